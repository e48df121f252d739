// SPDX-License-Identifier: Apache-2.0
#include "convbench/pipeline/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "convbench/core/errors.hpp"

namespace convbench::pipeline {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t page_seed(std::uint64_t doc_seed, int page_no) {
    return splitmix64(doc_seed ^ (static_cast<std::uint64_t>(page_no) * 0x100000001b3ULL));
}

namespace {

double unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

double normal_from(std::uint64_t a, std::uint64_t b) {
    // Box-Muller on two splitmix draws keeps page attributes independent of
    // library distribution implementations.
    const double u1 = std::max(unit(a), 1e-12);
    const double u2 = unit(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string make_id(const std::string& prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "-%06zu", i);
    return prefix + buf;
}

}  // namespace

PageSpec SyntheticDocument::page(int page_no) const {
    if (page_no < 1 || page_no > page_count) throw InvalidArgumentError("page out of range: " + std::to_string(page_no));
    PageSpec p;
    p.page_no = page_no;
    p.seed = page_seed(seed, page_no);
    const std::uint64_t a = splitmix64(p.seed), b = splitmix64(a), c = splitmix64(b);
    p.text_cell_count = 20 + static_cast<int>(a % 181);
    // Log-normal with unit mean.
    const double sigma = 0.25;
    p.complexity = std::clamp(std::exp(sigma * normal_from(b, c) - sigma * sigma / 2), 0.25, 3.0);
    p.complexity = std::round(p.complexity * 1000.0) / 1000.0;
    auto t = std::lower_bound(table_pages.begin(), table_pages.end(), std::pair{page_no, 0});
    if (t != table_pages.end() && t->first == page_no) {
        p.has_table = true;
        p.tables = t->second;
    }
    p.fail_page = std::binary_search(fail_pages.begin(), fail_pages.end(), page_no);
    return p;
}

std::vector<PageSpec> SyntheticDocument::pages() const {
    std::vector<PageSpec> out;
    out.reserve(static_cast<std::size_t>(page_count));
    for (int i = 1; i <= page_count; ++i) out.push_back(page(i));
    return out;
}

int SyntheticDocument::table_count() const {
    int n = 0;
    for (const auto& [p, k] : table_pages) n += k;
    return n;
}

void to_json(json& j, const SyntheticDocument& d) {
    json tables = json::array();
    for (const auto& [p, k] : d.table_pages) tables.push_back(json::array({p, k}));
    j = json{{"doc_id", d.doc_id},         {"page_count", d.page_count},
             {"seed", d.seed},             {"binary_size", d.binary_size},
             {"fail_whole_doc", d.fail_whole_doc}, {"fail_pages", d.fail_pages},
             {"table_pages", tables}};
}

void from_json(const json& j, SyntheticDocument& d) {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.page_count = j.at("page_count").get<int>();
    d.seed = j.at("seed").get<std::uint64_t>();
    d.binary_size = j.value("binary_size", std::uint64_t{0});
    d.fail_whole_doc = j.value("fail_whole_doc", false);
    d.fail_pages = j.value("fail_pages", std::vector<int>{});
    d.table_pages.clear();
    for (const auto& t : j.value("table_pages", json::array())) d.table_pages.emplace_back(t.at(0), t.at(1));
    if (d.page_count < 1) throw InvalidArgumentError(d.doc_id + ": page_count must be >= 1");
    std::sort(d.fail_pages.begin(), d.fail_pages.end());
    std::sort(d.table_pages.begin(), d.table_pages.end());
    for (int p : d.fail_pages) {
        if (p < 1 || p > d.page_count) throw InvalidArgumentError(d.doc_id + ": failing page out of range");
    }
    for (const auto& [p, k] : d.table_pages) {
        if (p < 1 || p > d.page_count || k < 1) throw InvalidArgumentError(d.doc_id + ": bad table page entry");
    }
}

void CorpusParams::validate() const {
    if (!(mean_pages >= 1.0)) throw InvalidArgumentError("mean_pages must be >= 1");
    if (!(sigma >= 0.0)) throw InvalidArgumentError("sigma must be >= 0");
    if (max_pages < 1) throw InvalidArgumentError("max_pages must be >= 1");
    auto rate = [](double r, const char* name) {
        if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgumentError(std::string(name) + " must be within [0, 1]");
    };
    rate(whole_doc_fail_rate, "whole_doc_fail_rate");
    rate(page_fail_doc_rate, "page_fail_doc_rate");
    rate(table_page_rate, "table_page_rate");
    if (!(failing_pages_per_doc >= 1.0)) throw InvalidArgumentError("failing_pages_per_doc must be >= 1");
    if (!(extra_tables_mean >= 0.0)) throw InvalidArgumentError("extra_tables_mean must be >= 0");
}

std::vector<SyntheticDocument> generate_corpus(std::size_t n_docs, std::uint64_t seed, const CorpusParams& params) {
    params.validate();
    // mean of a log-normal is exp(mu + sigma^2 / 2).
    const double mu = std::log(params.mean_pages) - params.sigma * params.sigma / 2;
    std::vector<SyntheticDocument> docs;
    docs.reserve(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) {
        SyntheticDocument d;
        d.doc_id = make_id(params.id_prefix, i);
        d.seed = splitmix64(seed * 0x2545f4914f6cdd1dULL + i);
        std::mt19937_64 rng(d.seed);
        const double raw = std::exp(mu + params.sigma * normal_from(rng(), rng()));
        d.page_count = std::clamp(static_cast<int>(std::lround(raw)), 1, params.max_pages);
        d.binary_size = static_cast<std::uint64_t>(d.page_count) * (20000 + rng() % 60000);
        d.fail_whole_doc = unit(rng()) < params.whole_doc_fail_rate;
        if (unit(rng()) < params.page_fail_doc_rate) {
            int k = 1;
            if (params.failing_pages_per_doc > 1.0) {
                k += std::poisson_distribution<int>(params.failing_pages_per_doc - 1.0)(rng);
            }
            k = std::min(d.page_count, k);
            std::vector<int> all(static_cast<std::size_t>(d.page_count));
            std::iota(all.begin(), all.end(), 1);
            std::shuffle(all.begin(), all.end(), rng);
            d.fail_pages.assign(all.begin(), all.begin() + k);
            std::sort(d.fail_pages.begin(), d.fail_pages.end());
        }
        std::poisson_distribution<int> extra_tables(std::max(params.extra_tables_mean, 1e-9));
        for (int p = 1; p <= d.page_count; ++p) {
            if (unit(rng()) < params.table_page_rate) d.table_pages.emplace_back(p, 1 + extra_tables(rng));
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<SyntheticDocument> uniform_corpus(std::size_t n_docs, int pages, std::uint64_t seed,
                                              const std::string& id_prefix) {
    CorpusParams p;
    p.id_prefix = id_prefix;
    p.whole_doc_fail_rate = 0;
    p.page_fail_doc_rate = 0;
    auto docs = generate_corpus(n_docs, seed, p);
    for (auto& d : docs) {
        d.page_count = pages;
        std::erase_if(d.table_pages, [pages](const auto& t) { return t.first > pages; });
        d.binary_size = static_cast<std::uint64_t>(pages) * 40000;
    }
    return docs;
}

std::vector<SyntheticDocument> without_failures(std::vector<SyntheticDocument> docs) {
    for (auto& d : docs) {
        d.fail_whole_doc = false;
        d.fail_pages.clear();
    }
    return docs;
}

void write_corpus_jsonl(const std::string& path, const std::vector<SyntheticDocument>& docs) {
    std::ofstream out(path);
    if (!out) throw InvalidArgumentError("cannot write corpus file: " + path);
    for (const auto& d : docs) out << json(d).dump() << '\n';
    if (!out) throw InvalidArgumentError("write failed: " + path);
}

std::vector<SyntheticDocument> read_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgumentError("cannot read corpus file: " + path);
    std::vector<SyntheticDocument> docs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            docs.push_back(json::parse(line).get<SyntheticDocument>());
        } catch (const json::exception& e) {
            throw InvalidArgumentError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return docs;
}

std::uint64_t total_pages(const std::vector<SyntheticDocument>& docs) {
    std::uint64_t n = 0;
    for (const auto& d : docs) n += static_cast<std::uint64_t>(d.page_count);
    return n;
}

}  // namespace convbench::pipeline
