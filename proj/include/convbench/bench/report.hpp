// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "convbench/bench/metrics.hpp"

namespace convbench::bench {

enum class ReportFormat { json, csv };

ReportFormat parse_format(const std::string& s);

/// The column order of the csv form; every MetricsReport field appears.
std::vector<std::string> csv_header();
std::string to_csv(const std::vector<MetricsReport>& rows);
std::string to_json_text(const std::vector<MetricsReport>& rows);
std::vector<MetricsReport> reports_from_json_text(const std::string& text);

/// Writes `rows` to `path`; throws Error("io") when the path is unwritable.
void emit_report(const std::vector<MetricsReport>& rows, ReportFormat format, const std::string& path);

/// Copy with the wall-clock dependent fields zeroed, for determinism checks.
MetricsReport without_timings(MetricsReport r);

}  // namespace convbench::bench
