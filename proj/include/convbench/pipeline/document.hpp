// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convbench/pipeline/corpus.hpp"

namespace convbench::pipeline {

enum class DocStatus { converted, partial, failed };

std::string to_string(DocStatus s);
DocStatus parse_doc_status(const std::string& s);

struct PageResult {
    int page_no = 1;
    json text_cells = json::array();
    json layout = json::array();
    std::optional<json> tables;  // only for pages with tables

    bool operator==(const PageResult&) const = default;
};

struct ConvertedDocument {
    std::string doc_id;
    std::vector<PageResult> page_results;  // ordered by page_no
    std::vector<int> failed_pages;
    DocStatus status = DocStatus::converted;

    bool operator==(const ConvertedDocument&) const = default;
};

void to_json(json& j, const PageResult& p);
void from_json(const json& j, PageResult& p);
void to_json(json& j, const ConvertedDocument& d);
void from_json(const json& j, ConvertedDocument& d);

/// Sorted-key JSON; equal documents give equal bytes.
std::string canonical(const ConvertedDocument& d);

/// Text cells the PDF backend would extract for this page.
json generate_text_cells(const PageSpec& p);

/// Stages a page goes through, in dependency order.
std::vector<std::string> page_dependency_order(const PageSpec& p);

/// Per-page intermediate entry: {"page_no", "text_cells"} after parsing,
/// plus "layout" (and "tables") after the model stage, or {"page_no", "error"}.
json parse_page_entry(const PageSpec& p);
bool is_error_entry(const json& entry);

/// Assembles entries that may arrive in any order. Idempotent.
ConvertedDocument assemble_document(const SyntheticDocument& doc, std::vector<json> entries);

}  // namespace convbench::pipeline
