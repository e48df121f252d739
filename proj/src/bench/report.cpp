// SPDX-License-Identifier: Apache-2.0
#include "convbench/bench/report.hpp"

#include <fstream>
#include <sstream>

namespace convbench::bench {

ReportFormat parse_format(const std::string& s) {
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    throw InvalidArgumentError("unknown report format: " + s);
}

namespace {

const std::vector<std::string> kScalarColumns = {
    "job_id",        "t0_us",         "td_s",       "tw_s",          "tts_s",
    "pages_total",   "effective_throughput",        "sustained_throughput",
    "sustained_completed_throughput", "serial_time_s", "model_share", "task_count",
    "store_txn_count", "worker_count"};

std::string cell(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::vector<std::string> csv_header() {
    auto h = kScalarColumns;
    h.push_back("serial_time_by_stage");
    return h;
}

// Stage times go into one column as "stage=seconds;..." so the column set
// does not depend on which stages ran.
std::string to_csv(const std::vector<MetricsReport>& rows) {
    std::ostringstream out;
    const auto header = csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& r : rows) {
        const json j = r;
        for (std::size_t i = 0; i < kScalarColumns.size(); ++i) out << (i ? "," : "") << cell(j.at(kScalarColumns[i]));
        out << ',';
        bool first = true;
        for (const auto& [s, v] : r.serial_time_by_stage) {
            out << (first ? "" : ";") << s << '=' << json(v).dump();
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

std::string to_json_text(const std::vector<MetricsReport>& rows) { return json(rows).dump(2); }

std::vector<MetricsReport> reports_from_json_text(const std::string& text) {
    const json j = json::parse(text);
    if (j.is_object()) return {j.get<MetricsReport>()};
    return j.get<std::vector<MetricsReport>>();
}

void emit_report(const std::vector<MetricsReport>& rows, ReportFormat format, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write report: " + path);
    out << (format == ReportFormat::json ? to_json_text(rows) + "\n" : to_csv(rows));
    if (!out) throw Error("io", "write failed: " + path);
}

MetricsReport without_timings(MetricsReport r) {
    r.job_id.clear();
    r.t0_us = 0;
    r.td_s = r.tw_s = r.tts_s = 0;
    r.effective_throughput = r.sustained_throughput = r.sustained_completed_throughput = 0;
    r.serial_time_s = 0;
    r.serial_time_by_stage.clear();
    r.model_share = 0;
    return r;
}

}  // namespace convbench::bench
