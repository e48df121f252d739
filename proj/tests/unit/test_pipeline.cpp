// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "../support/pipeline_fixture.hpp"
#include "convbench/core/errors.hpp"
#include "convbench/pipeline/stages.hpp"

using namespace convbench;
using namespace convbench::core;
using namespace convbench::pipeline;
using convbench::testing::PipelineFixture;

namespace {

constexpr auto kWait = std::chrono::seconds(120);

WorkerConfig wcfg(std::string id, int x = 1) {
    WorkerConfig c;
    c.worker_id = std::move(id);
    c.prefetch_limit = x;
    c.restart_after_tasks = std::nullopt;
    return c;
}

/// A cheap cost model so end-to-end tests stay fast at time_scale 100.
CostModel quick_cost() {
    CostModel c;
    c.fetch_flat = 0.05;
    c.parse_per_page = 0.05;
    c.render_per_page = 0.05;
    c.infer_layout_per_page = 0.3;
    c.table_structure_per_table = 0.05;
    c.merge_per_page = 0.02;
    c.export_flat = 0.05;
    c.store_latency = 0.02;
    return c;
}

SyntheticDocument doc_with(std::string id, int pages, std::uint64_t seed) {
    return uniform_corpus(1, pages, seed, std::move(id)).front();
}

struct JobRun {
    std::string job;
    TaskState root;
};

JobRun run_job(PipelineFixture& fx, ConversionRequest req, std::optional<std::size_t> default_window = std::nullopt) {
    Client client(fx.env());
    const auto job = submit_job(client, fx.catalog, req, default_window);
    auto s = client.wait(job, kWait);
    REQUIRE(s.has_value());
    return {job, *s};
}

std::size_t tasks_of(const PipelineFixture& fx, const std::string& job) {
    return fx.events_of(EventKind::task_enqueued, job).size();
}

std::size_t txns_of(const PipelineFixture& fx, const std::string& job) {
    return fx.events_of(EventKind::store_txn, job).size();
}

std::map<std::string, std::string> outputs(const PipelineFixture& fx, const std::string& job,
                                           const std::vector<SyntheticDocument>& docs) {
    std::map<std::string, std::string> out;
    for (const auto& d : docs) {
        auto blob = fx.store->peek(output_key(job, d.doc_id));
        REQUIRE_MESSAGE(blob.has_value(), d.doc_id);
        out[d.doc_id] = *blob;
    }
    return out;
}

double sim_runtime(const PipelineFixture& fx, const TaskId& id) {
    Micros start = -1, end = -1;
    for (const auto& e : fx.events->snapshot()) {
        if (!e.task || *e.task != id) continue;
        if (e.kind == EventKind::task_started) start = e.ts;
        if (e.kind == EventKind::task_finished) end = e.ts;
    }
    REQUIRE(start >= 0);
    REQUIRE(end >= start);
    return fx.scale.to_sim_seconds(end - start);
}

std::vector<TaskId> tasks_of_kind(const PipelineFixture& fx, const std::string& job, const std::string& kind) {
    std::vector<TaskId> out;
    for (const auto& e : fx.events_of(EventKind::task_enqueued, job)) {
        if (e.meta.value("kind", "") == kind) out.push_back(*e.task);
    }
    return out;
}

}  // namespace

// -- corpus

TEST_CASE("default corpus of 8053 docs totals within 5% of 156529 pages") {
    const auto docs = generate_corpus(8053, 42);
    REQUIRE(docs.size() == 8053);
    const double total = static_cast<double>(total_pages(docs));
    CHECK(std::abs(total - 156529.0) / 156529.0 < 0.05);
    for (const auto& d : docs) {
        REQUIRE(d.page_count >= 1);
        REQUIRE(d.page_count <= 300);
        REQUIRE(d.pages().size() == static_cast<std::size_t>(d.page_count));
    }
}

TEST_CASE("corpus failure injection lands near the configured scale") {
    const auto docs = generate_corpus(8053, 42);
    std::size_t whole = 0, page_docs = 0, pages = 0;
    for (const auto& d : docs) {
        whole += d.fail_whole_doc;
        page_docs += !d.fail_pages.empty();
        pages += d.fail_pages.size();
    }
    CHECK(whole <= 12);
    CHECK(page_docs >= 110);
    CHECK(page_docs <= 210);
    CHECK(pages >= 300);
    CHECK(pages <= 750);
}

TEST_CASE("corpus is deterministic and empty for n=0") {
    CHECK(generate_corpus(0, 1).empty());
    CHECK(generate_corpus(200, 9) == generate_corpus(200, 9));
    CHECK(generate_corpus(200, 9) != generate_corpus(200, 10));
    CorpusParams bad;
    bad.mean_pages = -1;
    CHECK_THROWS_AS(generate_corpus(3, 1, bad), InvalidArgumentError);
}

TEST_CASE("corpus jsonl round trip") {
    const auto docs = generate_corpus(50, 3);
    const std::string path = "pipeline_corpus_roundtrip.jsonl";
    write_corpus_jsonl(path, docs);
    CHECK(read_corpus_jsonl(path) == docs);
    std::remove(path.c_str());
}

TEST_CASE("property: page specs derive from the seed and stay in range") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto d = generate_corpus(1, rng()).front();
        for (const auto& p : d.pages()) {
            REQUIRE(p.complexity >= 0.25);
            REQUIRE(p.complexity <= 3.0);
            REQUIRE(p.has_table == (p.tables > 0));
            REQUIRE(p == d.page(p.page_no));
        }
    }
}

// -- batching and assembly

TEST_CASE("property: batches partition the pages and only the last is short") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        const int pages = 1 + static_cast<int>(rng() % 300);
        const int b = 1 + static_cast<int>(rng() % 12);
        const auto batches = make_batches(doc_with("d", pages, rng()), b);
        REQUIRE(batches.size() == static_cast<std::size_t>((pages + b - 1) / b));
        int next = 1;
        for (std::size_t k = 0; k < batches.size(); ++k) {
            REQUIRE(batches[k].first_page == next);
            REQUIRE(batches[k].batch_index == static_cast<int>(k));
            if (k + 1 < batches.size()) REQUIRE(batches[k].size() == b);
            REQUIRE(batches[k].size() <= b);
            next = batches[k].last_page + 1;
        }
        REQUIRE(next == pages + 1);
    }
    CHECK_THROWS_AS(make_batches(doc_with("d", 3, 1), 0), InvalidArgumentError);
}

TEST_CASE("page dependency order") {
    PageSpec plain;
    PageSpec table;
    table.has_table = true;
    table.tables = 2;
    CHECK(page_dependency_order(plain) == std::vector<std::string>{"parse", "layout"});
    CHECK(page_dependency_order(table) == std::vector<std::string>{"parse", "layout", "table_structure"});
}

TEST_CASE("property: assembly is order independent and idempotent") {
    std::mt19937_64 rng(17);
    const auto docs = generate_corpus(40, 77);
    for (const auto& d : docs) {
        if (d.fail_whole_doc) continue;
        std::vector<json> entries;
        for (const auto& p : d.pages()) {
            json e = parse_page_entry(p);
            if (!is_error_entry(e)) e["layout"] = json::array({p.page_no});
            if (!is_error_entry(e) && p.has_table) e["tables"] = json::array({json{{"rows", p.tables}}});
            entries.push_back(e);
        }
        const auto base = assemble_document(d, entries);
        std::shuffle(entries.begin(), entries.end(), rng);
        const auto shuffled = assemble_document(d, entries);
        REQUIRE(canonical(base) == canonical(shuffled));
        REQUIRE(canonical(assemble_document(d, entries)) == canonical(shuffled));
        REQUIRE(canonical(base) == json(base).dump());
        REQUIRE(canonical(json::parse(canonical(base)).get<ConvertedDocument>()) == canonical(base));
        for (std::size_t k = 1; k < base.page_results.size(); ++k) {
            REQUIRE(base.page_results[k - 1].page_no < base.page_results[k].page_no);
        }
        REQUIRE(base.failed_pages == d.fail_pages);
        REQUIRE((base.status == DocStatus::partial) == !d.fail_pages.empty());
    }
}

TEST_CASE("assembly with a missing page is not found; whole-doc failure has no pages") {
    auto d = doc_with("d", 3, 4);
    std::vector<json> entries{parse_page_entry(d.page(1)), parse_page_entry(d.page(3))};
    for (auto& e : entries) e["layout"] = json::array();
    CHECK_THROWS_AS(assemble_document(d, entries), NotFoundError);
    d.fail_whole_doc = true;
    const auto out = assemble_document(d, {});
    CHECK(out.status == DocStatus::failed);
    CHECK(out.page_results.empty());
}

// -- formulas

TEST_CASE("task and transaction formulas") {
    CHECK(page_level_tasks_per_doc(15, 4) + 1 == 12);
    CHECK(page_level_tasks_per_doc(4, 4) + 1 == 6);
    CHECK(page_level_tasks_per_doc(1, 4) + 1 == 6);
    CHECK(page_level_transactions_per_doc(15, 4) == 12);
    CHECK(document_level_task_count(10) == 11);
    CHECK(document_level_task_count(1) == 2);
    ConversionRequest req;
    req.dataset = "x";
    req.scheme = Scheme::page_level;
    req.dynamic_batching = true;
    req.max_batches_per_doc = 2;
    CHECK(effective_batch_size(doc_with("d", 15, 1), req) == 8);
    CHECK(effective_batch_size(doc_with("d", 3, 1), req) == 4);
}

TEST_CASE("analytic document cost, hand computed") {
    SyntheticDocument d = doc_with("d", 2, 1);
    d.table_pages = {{2, 3}};
    CostModel c;
    const double pages = d.page(1).complexity + d.page(2).complexity;
    const double expect = 0.25 + 0.05 + pages * (0.3 + 0.3 + 3.0) + 3 * 0.05 + 2 * 0.1 + 0.25 + 0.05;
    CHECK(document_task_cost(d, c) == doctest::Approx(expect));
    d.fail_pages = {1};
    const double with_fail = 0.25 + 0.05 + d.page(1).complexity * 0.3 + d.page(2).complexity * 3.6 + 0.15 + 0.2 + 0.3;
    CHECK(document_task_cost(d, c) == doctest::Approx(with_fail));
}

TEST_CASE("default cost model puts model inference between 70% and 90%") {
    const auto docs = generate_corpus(400, 8);
    double ml = 0, total = 0;
    for (const auto& d : docs) {
        ml += model_share(d, {}) * document_task_cost(d, {});
        total += document_task_cost(d, {});
    }
    CHECK(ml / total >= 0.70);
    CHECK(ml / total <= 0.90);
}

TEST_CASE("request validation") {
    ConversionRequest req;
    CHECK_THROWS_AS(req.validate(), InvalidArgumentError);
    req.dataset = "x";
    req.validate();
    req.batch_size = 0;
    CHECK_THROWS_AS(req.validate(), InvalidArgumentError);
    CHECK(parse_scheme("doc") == Scheme::document_level);
    CHECK(parse_scheme("page-level") == Scheme::page_level);
    CHECK_THROWS_AS(parse_scheme("chapter"), InvalidArgumentError);
    DatasetCatalog cat;
    CHECK_THROWS_AS(cat.get("nope"), UnknownDatasetError);
}

// -- end to end

TEST_CASE("15-page document: 12 tasks and 12 transactions page-level, 2 and 2 document-level") {
    const auto c = quick_cost();
    PipelineFixture fx(2, c);
    fx.add_dataset("one", {doc_with("p15", 15, 21)});
    fx.add_worker(wcfg("w0", 4));
    fx.add_worker(wcfg("w1", 4));
    fx.start_all();

    ConversionRequest req;
    req.dataset = "one";
    req.cost = c;
    req.scheme = Scheme::page_level;
    const auto page = run_job(fx, req);
    req.scheme = Scheme::document_level;
    const auto doc = run_job(fx, req);
    fx.stop_all();

    REQUIRE(page.root.status == TaskStatus::succeeded);
    REQUIRE(doc.root.status == TaskStatus::succeeded);
    CHECK(tasks_of(fx, page.job) == 12);
    CHECK(txns_of(fx, page.job) == 12);
    CHECK(tasks_of(fx, doc.job) == 2);
    CHECK(txns_of(fx, doc.job) == 2);
    CHECK(tasks_of_kind(fx, page.job, kParseKind).size() == 4);
    CHECK(tasks_of_kind(fx, page.job, kModelKind).size() == 4);
    CHECK(page.root.result.at("converted") == 1);
}

TEST_CASE("small documents give 6 page-level tasks and N docs give N+1 document-level tasks") {
    const auto c = quick_cost();
    PipelineFixture fx(1, c);
    fx.add_dataset("four", {doc_with("p4", 4, 1)});
    fx.add_dataset("single", {doc_with("p1", 1, 2)});
    fx.add_dataset("ten", uniform_corpus(10, 1, 3));
    fx.add_worker(wcfg("w0", 4));
    fx.start_all();
    ConversionRequest req;
    req.cost = c;
    req.scheme = Scheme::page_level;
    req.dataset = "four";
    const auto four = run_job(fx, req);
    req.dataset = "single";
    const auto single = run_job(fx, req);
    req.scheme = Scheme::document_level;
    req.dataset = "ten";
    const auto ten = run_job(fx, req);
    fx.stop_all();
    CHECK(tasks_of(fx, four.job) == 6);
    CHECK(tasks_of(fx, single.job) == 6);
    CHECK(tasks_of(fx, ten.job) == 11);
    CHECK(ten.root.result.at("documents") == 10);
}

TEST_CASE("document-level root keeps at most W=8 documents pending") {
    CostModel c = quick_cost();
    c.infer_layout_per_page = 0.05;
    PipelineFixture fx(4, c);
    fx.add_dataset("hundred", uniform_corpus(100, 1, 5));
    for (int i = 0; i < 4; ++i) fx.add_worker(wcfg("w" + std::to_string(i), 4));
    fx.start_all();
    ConversionRequest req;
    req.cost = c;
    req.dataset = "hundred";
    req.window = 8;
    const auto run = run_job(fx, req);
    fx.stop_all();
    REQUIRE(run.root.status == TaskStatus::succeeded);
    CHECK(fx.max_pending_children(TaskId::root(run.job)) == 8);
    CHECK(tasks_of(fx, run.job) == 101);
}

TEST_CASE("property: both schemes give byte-identical outputs on failure-free corpora") {
    const auto c = quick_cost();
    PipelineFixture fx(3, c);
    for (std::uint64_t seed : {1, 2, 3}) {
        CorpusParams p;
        p.mean_pages = 6;
        p.max_pages = 24;
        p.table_page_rate = 0.4;
        const auto docs = without_failures(generate_corpus(6, seed, p));
        fx.add_dataset("c" + std::to_string(seed), docs);
    }
    fx.add_worker(wcfg("w0", 4));
    fx.add_worker(wcfg("w1", 4));
    fx.start_all();
    for (std::uint64_t seed : {1, 2, 3}) {
        ConversionRequest req;
        req.cost = c;
        req.dataset = "c" + std::to_string(seed);
        req.batch_size = 1 + static_cast<int>(seed);
        const auto docs = fx.catalog.get(req.dataset);
        const auto doc = run_job(fx, req);
        req.scheme = Scheme::page_level;
        const auto page = run_job(fx, req);
        REQUIRE(doc.root.status == TaskStatus::succeeded);
        REQUIRE(page.root.status == TaskStatus::succeeded);
        CHECK(outputs(fx, doc.job, docs) == outputs(fx, page.job, docs));
        bool any_table = false;
        for (const auto& [id, bytes] : outputs(fx, page.job, docs)) {
            any_table |= bytes.find("\"tables\"") != std::string::npos;
        }
        CHECK(any_table);
    }
    fx.stop_all();
}

TEST_CASE("page and document failures stay contained in both schemes") {
    const auto c = quick_cost();
    PipelineFixture fx(2, c);
    auto docs = uniform_corpus(3, 5, 9);
    docs[0].fail_whole_doc = true;
    docs[1].fail_pages = {2, 5};
    fx.add_dataset("faulty", docs);
    fx.add_worker(wcfg("w0", 4));
    fx.start_all();
    for (Scheme s : {Scheme::document_level, Scheme::page_level}) {
        ConversionRequest req;
        req.cost = c;
        req.dataset = "faulty";
        req.scheme = s;
        const auto run = run_job(fx, req);
        CAPTURE(to_string(s));
        REQUIRE(run.root.status == TaskStatus::succeeded);
        CHECK(run.root.result.at("failed") == 1);
        CHECK(run.root.result.at("partial") == 1);
        CHECK(run.root.result.at("converted") == 1);
        const auto out = outputs(fx, run.job, docs);
        const auto failed = json::parse(out.at(docs[0].doc_id)).get<ConvertedDocument>();
        CHECK(failed.status == DocStatus::failed);
        CHECK(failed.page_results.empty());
        const auto partial = json::parse(out.at(docs[1].doc_id)).get<ConvertedDocument>();
        CHECK(partial.failed_pages == std::vector<int>{2, 5});
        CHECK(partial.page_results.size() == 3);
        if (s == Scheme::page_level) CHECK(tasks_of(fx, run.job) == 1 + 3 + 2 * (2 * 2 + 3));
    }
    fx.stop_all();
}

TEST_CASE("5-page document task runtime matches the analytic cost") {
    // Slower time scale keeps sleep overshoot well inside the tolerance.
    PipelineFixture fx(1, CostModel{}, 25.0);
    SyntheticDocument d = doc_with("p5", 5, 31);
    d.table_pages = {{3, 2}};
    fx.add_dataset("five", {d});
    fx.add_worker(wcfg("w0", 1));
    fx.start_all();
    ConversionRequest req;
    req.dataset = "five";
    const auto run = run_job(fx, req);
    fx.stop_all();
    REQUIRE(run.root.status == TaskStatus::succeeded);
    const auto ids = tasks_of_kind(fx, run.job, kDocumentKind);
    REQUIRE(ids.size() == 1);
    const double measured = sim_runtime(fx, ids.front());
    const double expect = document_task_cost(d, {});
    CHECK(measured >= expect * 0.99);
    CHECK(measured <= expect * 1.10);
}

TEST_CASE("parse batch costs 4 pages of parse and render and one store; merge costs pages x merge") {
    PipelineFixture fx(2, CostModel{}, 25.0);
    const auto d = doc_with("p15", 15, 41);
    fx.add_dataset("one", {d});
    // X=1 so a task's runtime is not stretched by another task's compute.
    fx.add_worker(wcfg("w0", 1));
    fx.start_all();
    ConversionRequest req;
    req.dataset = "one";
    req.scheme = Scheme::page_level;
    const auto run = run_job(fx, req);
    fx.stop_all();
    REQUIRE(run.root.status == TaskStatus::succeeded);

    const CostModel c;
    const auto parse_ids = tasks_of_kind(fx, run.job, kParseKind);
    const auto batches = make_batches(d, 4);
    REQUIRE(parse_ids.size() == batches.size());
    // Children are enqueued in batch order, so parse task k handles batch k.
    for (std::size_t k = 0; k < parse_ids.size(); ++k) {
        double expect = 0;
        for (int no = batches[k].first_page; no <= batches[k].last_page; ++no) {
            expect += parse_cost(d.page(no), c) + render_cost(d.page(no), c);
        }
        double work = 0;
        std::size_t stores = 0;
        for (const auto& e : fx.events->snapshot()) {
            if (!e.task || *e.task != parse_ids[k]) continue;
            if (e.kind == EventKind::compute) work += fx.scale.to_sim_seconds(e.meta.at("dur_us").get<Micros>());
            if (e.kind == EventKind::store_txn) ++stores;
        }
        CHECK(stores == 1);
        CHECK(work == doctest::Approx(expect).epsilon(0.10));
        CHECK(sim_runtime(fx, parse_ids[k]) >= expect + c.store_latency);
    }

    const auto merge_ids = tasks_of_kind(fx, run.job, kMergeKind);
    REQUIRE(merge_ids.size() == 1);
    double merge = 0;
    for (const auto& e : fx.events->snapshot()) {
        if (e.task && *e.task == merge_ids.front() && e.kind == EventKind::compute) {
            merge += fx.scale.to_sim_seconds(e.meta.at("dur_us").get<Micros>());
        }
    }
    CHECK(merge == doctest::Approx(15 * c.merge_per_page).epsilon(0.10));
}

TEST_CASE("model batch before its parse result is not found") {
    const auto c = quick_cost();
    PipelineFixture fx(1, c);
    fx.add_worker(wcfg("w0", 1));
    fx.start_all();
    const auto d = doc_with("p4", 4, 1);
    Client client(fx.env());
    const auto job = client.submit(kModelKind, json{{"doc", d},
                                                    {"batch", make_batches(d, 4).front()},
                                                    {"cost", c},
                                                    {"parse_key", "nowhere/0.json"}});
    const auto s = client.wait(job, kWait);
    fx.stop_all();
    REQUIRE(s.has_value());
    CHECK(s->status == TaskStatus::failed);
    CHECK(s->error.value_or("").find("not found") != std::string::npos);
}

TEST_CASE("parse batch with a failing page stores three payloads and one error marker") {
    const auto c = quick_cost();
    PipelineFixture fx(1, c);
    fx.add_worker(wcfg("w0", 1));
    fx.start_all();
    auto d = doc_with("p4", 4, 1);
    d.fail_pages = {3};
    Client client(fx.env());
    const auto job = client.submit(kParseKind, json{{"doc", d},
                                                    {"batch", make_batches(d, 4).front()},
                                                    {"cost", c},
                                                    {"result_key", "parse/p4/0.json"}});
    const auto s = client.wait(job, kWait);
    fx.stop_all();
    REQUIRE(s->status == TaskStatus::succeeded);
    const json entries = json::parse(fx.store->peek("parse/p4/0.json").value());
    REQUIRE(entries.size() == 4);
    int errors = 0;
    for (const auto& e : entries) errors += is_error_entry(e);
    CHECK(errors == 1);
    CHECK(is_error_entry(entries[2]));
}

TEST_CASE("unknown dataset is rejected at submission") {
    PipelineFixture fx(1);
    Client client(fx.env());
    ConversionRequest req;
    req.dataset = "missing";
    CHECK_THROWS_AS(submit_job(client, fx.catalog, req, std::nullopt), UnknownDatasetError);
}
