// SPDX-License-Identifier: Apache-2.0
#include "convbench/pipeline/job.hpp"

#include <algorithm>
#include <cmath>

#include "convbench/core/errors.hpp"
#include "convbench/pipeline/stages.hpp"

namespace convbench::pipeline {

using core::SubtaskSpawner;
using core::SubtaskSpec;
using core::TaskGroup;
using core::TaskId;
using core::TaskState;
using core::TaskStatus;

std::string to_string(Scheme s) { return s == Scheme::page_level ? "page-level" : "document-level"; }

Scheme parse_scheme(const std::string& s) {
    if (s == "doc" || s == "document" || s == "document-level") return Scheme::document_level;
    if (s == "page" || s == "page-level") return Scheme::page_level;
    throw InvalidArgumentError("unknown scheme: " + s);
}

void ConversionRequest::validate() const {
    if (dataset.empty()) throw InvalidArgumentError("dataset is required");
    if (batch_size < 1) throw InvalidArgumentError("batch_size must be >= 1");
    if (window && *window < 1) throw InvalidArgumentError("window must be >= 1");
    if (window && unbounded_window) throw InvalidArgumentError("window and unbounded_window are exclusive");
    if (max_batches_per_doc < 1) throw InvalidArgumentError("max_batches_per_doc must be >= 1");
    if (!(timeout_factor > 0) || !(min_timeout_s > 0)) throw InvalidArgumentError("timeouts must be positive");
    cost.validate();
}

int effective_batch_size(const SyntheticDocument& doc, const ConversionRequest& req) {
    if (!req.dynamic_batching) return req.batch_size;
    const int spread = (doc.page_count + req.max_batches_per_doc - 1) / req.max_batches_per_doc;
    return std::max(req.batch_size, spread);
}

namespace {

std::size_t ceil_div(int a, int b) { return static_cast<std::size_t>((a + b - 1) / b); }

}  // namespace

std::size_t document_level_task_count(std::size_t n_docs) { return n_docs + 1; }

std::size_t page_level_tasks_per_doc(int pages, int batch_size) { return 2 * ceil_div(pages, batch_size) + 3; }

std::size_t page_level_transactions_per_doc(int pages, int batch_size) {
    return 2 * ceil_div(pages, batch_size) + 4;
}

std::size_t page_level_task_count(const std::vector<SyntheticDocument>& docs, const ConversionRequest& req) {
    std::size_t n = 1;
    for (const auto& d : docs) n += d.fail_whole_doc ? 3 : page_level_tasks_per_doc(d.page_count, effective_batch_size(d, req));
    return n;
}

std::string input_key(const std::string& dataset, const std::string& doc_id) {
    return "datasets/" + dataset + "/" + doc_id + ".pdf";
}

std::string output_key(const std::string& job_id, const std::string& doc_id) {
    return job_id + "/out/" + doc_id + ".json";
}

void DatasetCatalog::add(const std::string& name, std::vector<SyntheticDocument> docs, const Preload& preload) {
    if (name.empty()) throw InvalidArgumentError("dataset name is empty");
    if (preload) {
        for (const auto& d : docs) preload(input_key(name, d.doc_id), std::string(d.binary_size, 'P'));
    }
    std::lock_guard lock(mu_);
    sets_[name] = std::move(docs);
}

bool DatasetCatalog::contains(const std::string& name) const {
    std::lock_guard lock(mu_);
    return sets_.contains(name);
}

std::vector<SyntheticDocument> DatasetCatalog::get(const std::string& name) const {
    std::lock_guard lock(mu_);
    auto it = sets_.find(name);
    if (it == sets_.end()) throw UnknownDatasetError(name);
    return it->second;
}

std::vector<std::string> DatasetCatalog::names() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : sets_) out.push_back(k);
    return out;
}

namespace {

json request_json(const ConversionRequest& req, std::optional<std::size_t> window) {
    json j{{"dataset", req.dataset},
           {"scheme", to_string(req.scheme)},
           {"batch_size", req.batch_size},
           {"cost", req.cost},
           {"dynamic_batching", req.dynamic_batching},
           {"max_batches_per_doc", req.max_batches_per_doc},
           {"timeout_factor", req.timeout_factor},
           {"min_timeout_s", req.min_timeout_s}};
    j["window"] = window ? json(*window) : json(nullptr);
    return j;
}

ConversionRequest request_from(const json& j) {
    ConversionRequest req;
    req.dataset = j.at("dataset").get<std::string>();
    req.scheme = parse_scheme(j.at("scheme").get<std::string>());
    req.batch_size = j.at("batch_size").get<int>();
    req.cost = j.at("cost").get<CostModel>();
    req.dynamic_batching = j.at("dynamic_batching").get<bool>();
    req.max_batches_per_doc = j.at("max_batches_per_doc").get<int>();
    req.timeout_factor = j.at("timeout_factor").get<double>();
    req.min_timeout_s = j.at("min_timeout_s").get<double>();
    if (!j.at("window").is_null()) req.window = j.at("window").get<std::size_t>();
    return req;
}

double timeout_for(const ConversionRequest& req, double estimate) {
    return std::max(req.min_timeout_s, req.timeout_factor * estimate);
}

std::string merged_key(const std::string& job_id, const std::string& doc_id) {
    return job_id + "/merged/" + doc_id + ".json";
}

std::string parse_key(const std::string& job_id, const std::string& doc_id, int batch) {
    return job_id + "/parse/" + doc_id + "/" + std::to_string(batch) + ".json";
}

json doc_summary(const ConvertedDocument& d) {
    return json{{"doc_id", d.doc_id},
                {"status", to_string(d.status)},
                {"pages", static_cast<int>(d.page_results.size() + d.failed_pages.size())},
                {"failed_pages", d.failed_pages}};
}

struct Tally {
    std::size_t documents = 0, converted = 0, partial = 0, failed = 0, errored = 0;
    std::uint64_t pages = 0;

    void count_task(const TaskState& s) {
        if (s.status != TaskStatus::succeeded || !s.result.is_object()) {
            ++errored;
            return;
        }
        switch (parse_doc_status(s.result.at("status").get<std::string>())) {
            case DocStatus::converted: ++converted; break;
            case DocStatus::partial: ++partial; break;
            case DocStatus::failed: ++failed; break;
        }
    }

    json to_json(Scheme scheme) const {
        return json{{"scheme", to_string(scheme)}, {"documents", documents}, {"pages", pages},
                    {"converted", converted},     {"partial", partial},     {"failed", failed},
                    {"errored", errored}};
    }
};

// -- document level

Co<json> document_task(std::shared_ptr<TaskContext> ctx, json payload, PipelineServices services) {
    const auto doc = payload.at("doc").get<SyntheticDocument>();
    const auto cost = payload.at("cost").get<CostModel>();
    auto body = convert_document(ctx, doc, cost, services.model, payload.at("input_key").get<std::string>(),
                                 payload.at("output_key").get<std::string>());
    ConvertedDocument out = co_await body;
    co_return doc_summary(out);
}

Co<json> run_document_level(std::shared_ptr<TaskContext> ctx, ConversionRequest req,
                            std::vector<SyntheticDocument> docs, std::optional<std::size_t> window) {
    const std::string& job = ctx->task().id.job_id;
    std::vector<SubtaskSpec> specs;
    specs.reserve(docs.size());
    Tally tally;
    for (const auto& d : docs) {
        tally.pages += static_cast<std::uint64_t>(d.page_count);
        specs.push_back(SubtaskSpec{kDocumentKind,
                                    json{{"doc", d},
                                         {"cost", req.cost},
                                         {"input_key", input_key(req.dataset, d.doc_id)},
                                         {"output_key", output_key(job, d.doc_id)}},
                                    timeout_for(req, document_task_cost(d, req.cost))});
    }
    tally.documents = docs.size();
    core::SubtaskStream stream(ctx, std::move(specs), window);
    for (;;) {
        auto step = stream.next();
        std::optional<TaskState> s = co_await step;
        if (!s) break;
        tally.count_task(*s);
    }
    co_return tally.to_json(req.scheme);
}

// -- page level

Co<json> setup_task(std::shared_ptr<TaskContext> ctx, json payload) {
    const auto cost = payload.at("cost").get<CostModel>();
    co_await ctx->io_wait("fetch", cost.fetch_flat);
    auto load = ctx->load_blob(payload.at("input_key").get<std::string>(), "fetch");
    const std::string bytes = co_await load;
    co_return json{{"bytes", bytes.size()}};
}

Co<json> parse_task(std::shared_ptr<TaskContext> ctx, json payload) {
    auto body = process_parse_batch(ctx, payload.at("doc").get<SyntheticDocument>(), payload.at("batch").get<PageBatch>(),
                                    payload.at("cost").get<CostModel>(), payload.at("result_key").get<std::string>());
    std::string key = co_await body;
    co_return json{{"result_key", key}};
}

Co<json> model_task(std::shared_ptr<TaskContext> ctx, json payload, PipelineServices services) {
    auto body = process_model_batch(ctx, payload.at("doc").get<SyntheticDocument>(), payload.at("batch").get<PageBatch>(),
                                    payload.at("cost").get<CostModel>(), services.model,
                                    payload.at("parse_key").get<std::string>());
    json entries = co_await body;
    co_return json{{"entries", std::move(entries)}};
}

Co<json> merge_task(std::shared_ptr<TaskContext> ctx, json payload) {
    const auto doc = payload.at("doc").get<SyntheticDocument>();
    std::vector<json> batches;
    for (const auto& raw : payload.at("model_tasks")) {
        auto peek = ctx->peek_state(raw.get<TaskId>());
        std::optional<TaskState> s = co_await peek;
        if (!s || s->status != TaskStatus::succeeded) throw NotFoundError("model result for " + raw.dump());
        batches.push_back(std::move(s->result.at("entries")));
    }
    auto body = merge_document(ctx, doc, std::move(batches), payload.at("cost").get<CostModel>(),
                               payload.at("merged_key").get<std::string>());
    ConvertedDocument out = co_await body;
    co_return doc_summary(out);
}

Co<json> export_task(std::shared_ptr<TaskContext> ctx, json payload) {
    const auto cost = payload.at("cost").get<CostModel>();
    auto load = ctx->load_blob(payload.at("merged_key").get<std::string>(), "export");
    const std::string merged = co_await load;
    co_await ctx->io_wait("export", cost.export_flat);
    auto store = ctx->store_blob(payload.at("output_key").get<std::string>(), merged, "export");
    co_await store;
    co_return payload.at("summary");
}

struct BatchChain {
    std::optional<TaskId> model_task;
    bool ok = false;
};

Co<void> run_batch(SubtaskSpawner* spawner, std::shared_ptr<BatchChain> out, ConversionRequest req, json doc_json,
                   PageBatch batch, std::string job, double parse_est, double model_est) {
    const std::string key = parse_key(job, batch.doc_id, batch.batch_index);
    auto submit_parse = spawner->submit(SubtaskSpec{
        kParseKind, json{{"doc", doc_json}, {"batch", batch}, {"cost", req.cost}, {"result_key", key}},
        timeout_for(req, parse_est)});
    TaskId parse_id = co_await submit_parse;
    auto wait_parse = spawner->wait(parse_id);
    TaskState ps = co_await wait_parse;
    if (ps.status != TaskStatus::succeeded) co_return;
    auto submit_model = spawner->submit(SubtaskSpec{
        kModelKind, json{{"doc", doc_json}, {"batch", batch}, {"cost", req.cost}, {"parse_key", key}},
        timeout_for(req, model_est)});
    TaskId model_id = co_await submit_model;
    auto wait_model = spawner->wait(model_id);
    TaskState ms = co_await wait_model;
    out->model_task = model_id;
    out->ok = ms.status == TaskStatus::succeeded;
}

Co<void> run_doc_dag(std::shared_ptr<TaskContext> ctx, SubtaskSpawner* spawner, ConversionRequest req,
                     SyntheticDocument doc, Tally* tally) {
    const std::string job = ctx->task().id.job_id;
    const CostModel& c = req.cost;
    const json doc_json = doc;
    auto submit_setup = spawner->submit(SubtaskSpec{
        kSetupKind, json{{"doc_id", doc.doc_id}, {"cost", c}, {"input_key", input_key(req.dataset, doc.doc_id)}},
        timeout_for(req, c.fetch_flat + c.store_latency)});
    TaskId setup_id = co_await submit_setup;
    auto wait_setup = spawner->wait(setup_id);
    TaskState setup = co_await wait_setup;
    if (setup.status != TaskStatus::succeeded) {
        ++tally->errored;
        co_return;
    }

    std::vector<std::shared_ptr<BatchChain>> chains;
    if (!doc.fail_whole_doc) {
        TaskGroup group(ctx->loop());
        for (const auto& b : make_batches(doc, effective_batch_size(doc, req))) {
            double parse_est = c.store_latency, model_est = c.store_latency;
            for (int no = b.first_page; no <= b.last_page; ++no) {
                const PageSpec p = doc.page(no);
                parse_est += parse_cost(p, c) + (p.fail_page ? 0.0 : render_cost(p, c));
                if (!p.fail_page) model_est += layout_cost(p, c) + table_cost(p, c);
            }
            chains.push_back(std::make_shared<BatchChain>());
            group.spawn(run_batch(spawner, chains.back(), req, doc_json, b, job, parse_est, model_est));
        }
        auto joined = group.join();
        co_await joined;
        for (const auto& ch : chains) {
            if (!ch->ok) {
                ++tally->errored;
                co_return;
            }
        }
    }

    json model_ids = json::array();
    for (const auto& ch : chains) model_ids.push_back(*ch->model_task);
    const std::string mkey = merged_key(job, doc.doc_id);
    auto submit_merge = spawner->submit(SubtaskSpec{
        kMergeKind,
        json{{"doc", doc_json}, {"cost", c}, {"model_tasks", model_ids}, {"merged_key", mkey}},
        timeout_for(req, doc.page_count * c.merge_per_page + c.store_latency)});
    TaskId merge_id = co_await submit_merge;
    auto wait_merge = spawner->wait(merge_id);
    TaskState merged = co_await wait_merge;
    if (merged.status != TaskStatus::succeeded) {
        ++tally->errored;
        co_return;
    }

    auto submit_export = spawner->submit(SubtaskSpec{
        kExportKind,
        json{{"doc_id", doc.doc_id},
             {"cost", c},
             {"merged_key", mkey},
             {"output_key", output_key(job, doc.doc_id)},
             {"summary", std::move(merged.result)}},
        timeout_for(req, c.export_flat + 2 * c.store_latency)});
    TaskId export_id = co_await submit_export;
    auto wait_export = spawner->wait(export_id);
    TaskState exported = co_await wait_export;
    tally->count_task(exported);
}

Co<json> run_page_level(std::shared_ptr<TaskContext> ctx, ConversionRequest req, std::vector<SyntheticDocument> docs,
                        std::optional<std::size_t> window) {
    SubtaskSpawner& spawner = ctx->subtasks(window);
    auto tally = std::make_shared<Tally>();
    tally->documents = docs.size();
    TaskGroup group(ctx->loop());
    for (auto& d : docs) {
        tally->pages += static_cast<std::uint64_t>(d.page_count);
        group.spawn(run_doc_dag(ctx, &spawner, req, std::move(d), tally.get()));
    }
    auto joined = group.join();
    co_await joined;
    co_return tally->to_json(req.scheme);
}

Co<json> job_task(std::shared_ptr<TaskContext> ctx, json payload) {
    ConversionRequest req = request_from(payload.at("request"));
    auto docs = payload.at("documents").get<std::vector<SyntheticDocument>>();
    std::optional<std::size_t> window = req.window;
    if (req.scheme == Scheme::page_level) {
        auto body = run_page_level(ctx, std::move(req), std::move(docs), window);
        json out = co_await body;
        co_return out;
    }
    auto body = run_document_level(ctx, std::move(req), std::move(docs), window);
    json out = co_await body;
    co_return out;
}

}  // namespace

std::string submit_job(core::Client& client, const DatasetCatalog& catalog, const ConversionRequest& req,
                       std::optional<std::size_t> default_window) {
    req.validate();
    const auto docs = catalog.get(req.dataset);
    std::optional<std::size_t> window = req.unbounded_window ? std::nullopt : (req.window ? req.window : default_window);
    json payload{{"request", request_json(req, window)}, {"documents", docs}};
    json meta{{"dataset", req.dataset},
              {"scheme", to_string(req.scheme)},
              {"documents", docs.size()},
              {"pages", total_pages(docs)},
              {"window", window ? json(*window) : json(nullptr)},
              {"batch_size", req.batch_size}};
    return client.submit(kJobKind, std::move(payload), core::kDefaultQueue, std::move(meta));
}

void register_pipeline_handlers(core::HandlerRegistry& registry, PipelineServices services) {
    if (!services.model) throw InvalidArgumentError("pipeline needs a model client");
    registry.add(kJobKind, [](std::shared_ptr<TaskContext> ctx, json p) { return job_task(std::move(ctx), std::move(p)); });
    registry.add(kDocumentKind, [services](std::shared_ptr<TaskContext> ctx, json p) {
        return document_task(std::move(ctx), std::move(p), services);
    });
    registry.add(kSetupKind, [](std::shared_ptr<TaskContext> ctx, json p) { return setup_task(std::move(ctx), std::move(p)); });
    registry.add(kParseKind, [](std::shared_ptr<TaskContext> ctx, json p) { return parse_task(std::move(ctx), std::move(p)); });
    registry.add(kModelKind, [services](std::shared_ptr<TaskContext> ctx, json p) {
        return model_task(std::move(ctx), std::move(p), services);
    });
    registry.add(kMergeKind, [](std::shared_ptr<TaskContext> ctx, json p) { return merge_task(std::move(ctx), std::move(p)); });
    registry.add(kExportKind, [](std::shared_ptr<TaskContext> ctx, json p) { return export_task(std::move(ctx), std::move(p)); });
}

}  // namespace convbench::pipeline
