// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include "convbench/pipeline/corpus.hpp"

namespace convbench::pipeline {

/// Simulated stage durations in seconds before time scaling. Per-page
/// parse/render/layout costs are multiplied by the page's complexity.
struct CostModel {
    double fetch_flat = 0.25;
    double parse_per_page = 0.3;
    double render_per_page = 0.3;
    double infer_layout_per_page = 3.0;
    double table_structure_per_table = 0.05;
    double merge_per_page = 0.1;
    double export_flat = 0.25;
    /// One blob-store transaction, charged by the store itself.
    double store_latency = 0.05;

    void validate() const;
    bool operator==(const CostModel&) const = default;
};

void to_json(nlohmann::json& j, const CostModel& c);
void from_json(const nlohmann::json& j, CostModel& c);

double parse_cost(const PageSpec& p, const CostModel& c);
double render_cost(const PageSpec& p, const CostModel& c);
double layout_cost(const PageSpec& p, const CostModel& c);
double table_cost(const PageSpec& p, const CostModel& c);

/// Uncontended runtime of a document-level task: fetch, parse of every page,
/// render + layout + tables for pages that parse, merge, export, plus the two
/// store transactions.
double document_task_cost(const SyntheticDocument& d, const CostModel& c);

/// Share of document_task_cost spent in model inference (layout + tables).
double model_share(const SyntheticDocument& d, const CostModel& c);

}  // namespace convbench::pipeline
