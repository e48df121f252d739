// SPDX-License-Identifier: Apache-2.0
#include "convbench/pipeline/document.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "convbench/core/errors.hpp"

namespace convbench::pipeline {

std::string to_string(DocStatus s) {
    switch (s) {
        case DocStatus::converted: return "converted";
        case DocStatus::partial: return "partial";
        case DocStatus::failed: return "failed";
    }
    return "failed";
}

DocStatus parse_doc_status(const std::string& s) {
    if (s == "converted") return DocStatus::converted;
    if (s == "partial") return DocStatus::partial;
    if (s == "failed") return DocStatus::failed;
    throw InvalidArgumentError("unknown document status: " + s);
}

void to_json(json& j, const PageResult& p) {
    j = json{{"page_no", p.page_no}, {"text_cells", p.text_cells}, {"layout", p.layout}};
    if (p.tables) j["tables"] = *p.tables;
}

void from_json(const json& j, PageResult& p) {
    p.page_no = j.at("page_no").get<int>();
    p.text_cells = j.at("text_cells");
    p.layout = j.at("layout");
    if (j.contains("tables")) {
        p.tables = j["tables"];
    } else {
        p.tables.reset();
    }
}

void to_json(json& j, const ConvertedDocument& d) {
    j = json{{"doc_id", d.doc_id},
             {"status", to_string(d.status)},
             {"failed_pages", d.failed_pages},
             {"pages", d.page_results}};
}

void from_json(const json& j, ConvertedDocument& d) {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.status = parse_doc_status(j.at("status").get<std::string>());
    d.failed_pages = j.at("failed_pages").get<std::vector<int>>();
    d.page_results = j.at("pages").get<std::vector<PageResult>>();
}

// Same bytes as json(d).dump() (keys in std::map order), without copying the page trees.
std::string canonical(const ConvertedDocument& d) {
    std::string out = R"({"doc_id":)" + json(d.doc_id).dump() + R"(,"failed_pages":)" + json(d.failed_pages).dump() +
                      R"(,"pages":[)";
    for (std::size_t i = 0; i < d.page_results.size(); ++i) {
        const PageResult& p = d.page_results[i];
        if (i) out += ',';
        out += R"({"layout":)";
        out += p.layout.dump();
        out += R"(,"page_no":)" + std::to_string(p.page_no);
        if (p.tables) {
            out += R"(,"tables":)";
            out += p.tables->dump();
        }
        out += R"(,"text_cells":)";
        out += p.text_cells.dump();
        out += '}';
    }
    out += R"(],"status":)" + json(to_string(d.status)).dump() + '}';
    return out;
}

namespace {

constexpr std::array<const char*, 24> kWords = {
    "the",     "model",   "document", "page",    "table", "figure", "result",  "method",
    "section", "data",    "layout",   "we",      "show",  "that",   "results", "of",
    "in",      "scaling", "workers",  "queue",   "text",  "cells",  "and",     "with"};

}  // namespace

json generate_text_cells(const PageSpec& p) {
    json cells = json::array();
    std::uint64_t s = splitmix64(p.seed ^ 0x7465787463656c6cULL);
    const int line_h = std::max(4, 720 / std::max(p.text_cell_count, 1));
    for (int i = 0; i < p.text_cell_count; ++i) {
        s = splitmix64(s);
        const int words = 2 + static_cast<int>(s % 6);
        std::string text;
        std::uint64_t w = s;
        for (int k = 0; k < words; ++k) {
            w = splitmix64(w);
            if (k) text.push_back(' ');
            text += kWords[w % kWords.size()];
        }
        const int x0 = 36 + static_cast<int>((s >> 8) % 40);
        const int y0 = 36 + i * line_h;
        // [x0, y0, x1, y1, text]; the cell id is its index.
        cells.push_back(json::array({x0, y0, x0 + 6 * static_cast<int>(text.size()), y0 + line_h - 1, std::move(text)}));
    }
    return cells;
}

std::vector<std::string> page_dependency_order(const PageSpec& p) {
    std::vector<std::string> stages{"parse", "layout"};
    if (p.has_table) stages.emplace_back("table_structure");
    return stages;
}

json parse_page_entry(const PageSpec& p) {
    if (p.fail_page) return json{{"page_no", p.page_no}, {"error", "page could not be parsed"}};
    return json{{"page_no", p.page_no}, {"text_cells", generate_text_cells(p)}};
}

bool is_error_entry(const json& entry) { return entry.contains("error"); }

ConvertedDocument assemble_document(const SyntheticDocument& doc, std::vector<json> entries) {
    ConvertedDocument out;
    out.doc_id = doc.doc_id;
    if (doc.fail_whole_doc) {
        out.status = DocStatus::failed;
        return out;
    }
    std::map<int, json*> by_page;
    for (auto& e : entries) {
        const int no = e.at("page_no").get<int>();
        if (no < 1 || no > doc.page_count) throw InvalidArgumentError(doc.doc_id + ": page out of range in merge");
        by_page[no] = &e;
    }
    for (int no = 1; no <= doc.page_count; ++no) {
        auto it = by_page.find(no);
        if (it == by_page.end()) throw NotFoundError(doc.doc_id + ": missing result for page " + std::to_string(no));
        json& e = *it->second;
        if (is_error_entry(e)) {
            out.failed_pages.push_back(no);
            continue;
        }
        PageResult r;
        r.page_no = no;
        r.text_cells = std::move(e.at("text_cells"));
        r.layout = std::move(e.at("layout"));
        if (e.contains("tables")) r.tables = std::move(e["tables"]);
        out.page_results.push_back(std::move(r));
    }
    out.status = out.failed_pages.empty() ? DocStatus::converted : DocStatus::partial;
    return out;
}

}  // namespace convbench::pipeline
