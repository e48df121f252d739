// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "convbench/core/worker.hpp"
#include "convbench/model/model.hpp"
#include "convbench/pipeline/cost_model.hpp"
#include "convbench/pipeline/corpus.hpp"

namespace convbench::pipeline {

enum class Scheme { document_level, page_level };

std::string to_string(Scheme s);
/// Accepts "doc", "document", "document-level", "page", "page-level".
Scheme parse_scheme(const std::string& s);

inline constexpr const char* kJobKind = "convert_job";
inline constexpr const char* kDocumentKind = "convert_document";
inline constexpr const char* kSetupKind = "page_setup";
inline constexpr const char* kParseKind = "page_parse";
inline constexpr const char* kModelKind = "page_model";
inline constexpr const char* kMergeKind = "page_merge";
inline constexpr const char* kExportKind = "page_export";

struct ConversionRequest {
    std::string dataset;
    Scheme scheme = Scheme::document_level;
    int batch_size = 4;
    /// Subtask window of the root task. Unset uses the submitter's default;
    /// `unbounded_window` enqueues everything at once.
    std::optional<std::size_t> window;
    bool unbounded_window = false;
    CostModel cost{};
    /// Grow the batch size of long documents so no document has more than
    /// `max_batches_per_doc` batches.
    bool dynamic_batching = false;
    int max_batches_per_doc = 8;
    /// Per-task timeout as a multiple of the task's cost estimate.
    double timeout_factor = 10.0;
    double min_timeout_s = 60.0;

    void validate() const;
};

/// Batch size actually used for `doc` under `req`.
int effective_batch_size(const SyntheticDocument& doc, const ConversionRequest& req);

/// Task-count formulas (root included once per job).
std::size_t document_level_task_count(std::size_t n_docs);
std::size_t page_level_task_count(const std::vector<SyntheticDocument>& docs, const ConversionRequest& req);
std::size_t page_level_tasks_per_doc(int pages, int batch_size);
/// Store transactions per document in the page-level scheme.
std::size_t page_level_transactions_per_doc(int pages, int batch_size);

std::string input_key(const std::string& dataset, const std::string& doc_id);
std::string output_key(const std::string& job_id, const std::string& doc_id);

/// Named corpora jobs can refer to. Registering stages each input document
/// in the store without charging a transaction.
class DatasetCatalog {
public:
    using Preload = std::function<void(const std::string& key, std::string bytes)>;

    void add(const std::string& name, std::vector<SyntheticDocument> docs, const Preload& preload = {});
    bool contains(const std::string& name) const;
    /// Throws UnknownDatasetError.
    std::vector<SyntheticDocument> get(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<SyntheticDocument>> sets_;
};

/// Validates the request, resolves the dataset and enqueues the root task.
/// Returns immediately with the job id.
std::string submit_job(core::Client& client, const DatasetCatalog& catalog, const ConversionRequest& req,
                       std::optional<std::size_t> default_window);

struct PipelineServices {
    std::shared_ptr<model::ModelClient> model;
};

void register_pipeline_handlers(core::HandlerRegistry& registry, PipelineServices services);

}  // namespace convbench::pipeline
