// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace convbench::pipeline {

using json = nlohmann::json;

struct PageSpec {
    int page_no = 1;  // 1-based
    bool has_table = false;
    int tables = 0;
    int text_cell_count = 0;
    double complexity = 1.0;
    bool fail_page = false;
    std::uint64_t seed = 0;

    bool operator==(const PageSpec&) const = default;
};

/// Cost-model stand-in for a PDF. Everything per page except the table and
/// failure lists derives from `seed`.
struct SyntheticDocument {
    std::string doc_id;
    int page_count = 1;
    std::uint64_t seed = 0;
    std::uint64_t binary_size = 0;
    bool fail_whole_doc = false;
    std::vector<int> fail_pages;                   // sorted page numbers
    std::vector<std::pair<int, int>> table_pages;  // (page_no, tables), sorted

    PageSpec page(int page_no) const;
    std::vector<PageSpec> pages() const;
    int table_count() const;

    bool operator==(const SyntheticDocument&) const = default;
};

void to_json(json& j, const SyntheticDocument& d);
void from_json(const json& j, SyntheticDocument& d);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t page_seed(std::uint64_t doc_seed, int page_no);

struct CorpusParams {
    double mean_pages = 156529.0 / 8053.0;
    double sigma = 0.9;  // of log(page count)
    int max_pages = 300;
    double whole_doc_fail_rate = 3.0 / 8053.0;
    double page_fail_doc_rate = 160.0 / 8053.0;
    double failing_pages_per_doc = 504.0 / 160.0;
    double table_page_rate = 0.2;
    double extra_tables_mean = 0.4;  // tables on a table page = 1 + Poisson(this)
    std::string id_prefix = "doc";

    void validate() const;
};

std::vector<SyntheticDocument> generate_corpus(std::size_t n_docs, std::uint64_t seed, const CorpusParams& params = {});

/// Fixed page count for every doc, no failures unless asked.
std::vector<SyntheticDocument> uniform_corpus(std::size_t n_docs, int pages, std::uint64_t seed,
                                              const std::string& id_prefix = "doc");

/// Drops injected failures (whole-doc and page-level).
std::vector<SyntheticDocument> without_failures(std::vector<SyntheticDocument> docs);

void write_corpus_jsonl(const std::string& path, const std::vector<SyntheticDocument>& docs);
std::vector<SyntheticDocument> read_corpus_jsonl(const std::string& path);

std::uint64_t total_pages(const std::vector<SyntheticDocument>& docs);

}  // namespace convbench::pipeline
