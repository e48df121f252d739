// SPDX-License-Identifier: Apache-2.0
#include "convbench/pipeline/cost_model.hpp"

#include "convbench/core/errors.hpp"

namespace convbench::pipeline {

void CostModel::validate() const {
    for (double v : {fetch_flat, parse_per_page, render_per_page, infer_layout_per_page, table_structure_per_table,
                     merge_per_page, export_flat, store_latency}) {
        if (!(v >= 0.0)) throw InvalidArgumentError("cost model durations must be >= 0");
    }
}

#define CONVBENCH_COST_FIELDS(X)                                                                     \
    X(fetch_flat) X(parse_per_page) X(render_per_page) X(infer_layout_per_page) X(table_structure_per_table) \
    X(merge_per_page) X(export_flat) X(store_latency)

void to_json(nlohmann::json& j, const CostModel& c) {
    j = nlohmann::json::object();
#define X(f) j[#f] = c.f;
    CONVBENCH_COST_FIELDS(X)
#undef X
}

// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, CostModel& c) {
    if (!j.is_object()) throw InvalidArgumentError("cost model must be an object");
#define X(f) c.f = j.value(#f, c.f);
    CONVBENCH_COST_FIELDS(X)
#undef X
}

double parse_cost(const PageSpec& p, const CostModel& c) { return c.parse_per_page * p.complexity; }
double render_cost(const PageSpec& p, const CostModel& c) { return c.render_per_page * p.complexity; }
double layout_cost(const PageSpec& p, const CostModel& c) { return c.infer_layout_per_page * p.complexity; }
double table_cost(const PageSpec& p, const CostModel& c) { return c.table_structure_per_table * p.tables; }

double document_task_cost(const SyntheticDocument& d, const CostModel& c) {
    double t = c.fetch_flat + c.store_latency;
    if (d.fail_whole_doc) return t + c.export_flat + c.store_latency;
    for (const auto& p : d.pages()) {
        // A failing page is detected while parsing and goes no further.
        t += parse_cost(p, c);
        if (!p.fail_page) t += render_cost(p, c) + layout_cost(p, c) + table_cost(p, c);
    }
    return t + d.page_count * c.merge_per_page + c.export_flat + c.store_latency;
}

double model_share(const SyntheticDocument& d, const CostModel& c) {
    double ml = 0;
    for (const auto& p : d.pages()) {
        if (!p.fail_page && !d.fail_whole_doc) ml += layout_cost(p, c) + table_cost(p, c);
    }
    const double total = document_task_cost(d, c);
    return total > 0 ? ml / total : 0.0;
}

}  // namespace convbench::pipeline
