// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "convbench/core/worker.hpp"
#include "convbench/model/model.hpp"
#include "convbench/pipeline/cost_model.hpp"
#include "convbench/pipeline/document.hpp"

namespace convbench::pipeline {

using core::Co;
using core::TaskContext;

struct PageBatch {
    std::string doc_id;
    int batch_index = 0;
    int first_page = 1;  // inclusive
    int last_page = 1;   // inclusive

    int size() const { return last_page - first_page + 1; }
    bool operator==(const PageBatch&) const = default;
};

void to_json(json& j, const PageBatch& b);
void from_json(const json& j, PageBatch& b);

/// Contiguous batches of `batch_size` pages; only the last may be short.
std::vector<PageBatch> make_batches(const SyntheticDocument& doc, int batch_size);

/// Calls the model service from a task, logging infer_request / infer_reply.
Co<model::InferReply> call_model(std::shared_ptr<TaskContext> ctx, std::shared_ptr<model::ModelClient> client,
                                 model::InferRequest req, std::string stage);

/// Runs the layout model, then table structure when the page has tables.
/// `entry` is a parse entry; returns it extended with "layout" / "tables".
Co<json> infer_page(std::shared_ptr<TaskContext> ctx, std::shared_ptr<model::ModelClient> client,
                    const SyntheticDocument& doc, json entry, CostModel cost);

/// Parse and render of one page on the worker lane.
json parse_page(TaskContext& ctx, const PageSpec& page, const CostModel& cost);

/// The whole document in one task; intermediates stay in task memory.
Co<ConvertedDocument> convert_document(std::shared_ptr<TaskContext> ctx, SyntheticDocument doc, CostModel cost,
                                       std::shared_ptr<model::ModelClient> client, std::string input_key,
                                       std::string output_key);

/// Parse stage of one batch; stores the batch entries under `result_key`.
Co<std::string> process_parse_batch(std::shared_ptr<TaskContext> ctx, SyntheticDocument doc, PageBatch batch,
                                    CostModel cost, std::string result_key);

/// Model stage of one batch. Loads the parse result and returns the page
/// entries (carried back in the task result).
Co<json> process_model_batch(std::shared_ptr<TaskContext> ctx, SyntheticDocument doc, PageBatch batch,
                             CostModel cost, std::shared_ptr<model::ModelClient> client, std::string parse_key);

/// Orders the batch entries by page, charges merge time and stores the
/// merged document under `merged_key`.
Co<ConvertedDocument> merge_document(std::shared_ptr<TaskContext> ctx, SyntheticDocument doc,
                                     std::vector<json> batch_entries, CostModel cost, std::string merged_key);

}  // namespace convbench::pipeline
