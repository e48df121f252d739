// SPDX-License-Identifier: Apache-2.0
#include "convbench/pipeline/stages.hpp"

#include <algorithm>

#include "convbench/core/errors.hpp"

namespace convbench::pipeline {

using core::EventKind;
using core::Micros;
using core::now_us;

void to_json(json& j, const PageBatch& b) {
    j = json{{"doc_id", b.doc_id}, {"batch_index", b.batch_index}, {"first_page", b.first_page},
             {"last_page", b.last_page}};
}

void from_json(const json& j, PageBatch& b) {
    b.doc_id = j.at("doc_id").get<std::string>();
    b.batch_index = j.at("batch_index").get<int>();
    b.first_page = j.at("first_page").get<int>();
    b.last_page = j.at("last_page").get<int>();
}

std::vector<PageBatch> make_batches(const SyntheticDocument& doc, int batch_size) {
    if (batch_size < 1) throw InvalidArgumentError("batch size must be >= 1");
    std::vector<PageBatch> out;
    for (int first = 1, i = 0; first <= doc.page_count; first += batch_size, ++i) {
        out.push_back(PageBatch{doc.doc_id, i, first, std::min(doc.page_count, first + batch_size - 1)});
    }
    return out;
}

Co<model::InferReply> call_model(std::shared_ptr<TaskContext> ctx, std::shared_ptr<model::ModelClient> client,
                                 model::InferRequest req, std::string stage) {
    ctx->check_cancelled();
    const Micros start = now_us();
    ctx->events().append(EventKind::infer_request, ctx->task().id, ctx->worker_id(),
                         json{{"doc_id", req.doc_id}, {"page_no", req.page_no}, {"want", req.want}, {"stage", stage}});
    auto op = ctx->offload([client, req] { return client->infer(req); });
    model::InferReply reply = co_await op;
    ctx->events().append(EventKind::infer_reply, ctx->task().id, ctx->worker_id(),
                         json{{"doc_id", req.doc_id},
                              {"page_no", req.page_no},
                              {"want", req.want},
                              {"stage", stage},
                              {"replica", reply.replica},
                              {"start_us", start},
                              {"dur_us", now_us() - start},
                              {"service_start_us", reply.service_start_us},
                              {"service_us", reply.service_end_us - reply.service_start_us},
                              {"duration_ms", reply.duration_ms}});
    ctx->check_cancelled();
    co_return reply;
}

json parse_page(TaskContext& ctx, const PageSpec& page, const CostModel& cost) {
    ctx.compute("parse", parse_cost(page, cost));
    if (page.fail_page) return parse_page_entry(page);
    ctx.compute("render", render_cost(page, cost));
    return parse_page_entry(page);
}

Co<json> infer_page(std::shared_ptr<TaskContext> ctx, std::shared_ptr<model::ModelClient> client,
                    const SyntheticDocument& doc, json entry, CostModel cost) {
    if (is_error_entry(entry)) co_return entry;
    const PageSpec page = doc.page(entry.at("page_no").get<int>());
    model::InferRequest req;
    req.doc_id = doc.doc_id;
    req.page_no = page.page_no;
    req.seed = page.seed;
    req.complexity = page.complexity;
    req.tables = page.tables;
    model::InferReply layout = co_await call_model(ctx, client, req, "layout");
    entry["layout"] = std::move(layout.regions);
    // Table structure needs the table regions from layout and the text cells from parsing.
    if (page.has_table) {
        model::InferRequest treq = req;
        treq.want = "table";
        treq.layout = entry["layout"];
        treq.text_cells = static_cast<int>(entry.at("text_cells").size());
        model::InferReply tables = co_await call_model(ctx, client, std::move(treq), "table");
        entry["tables"] = std::move(tables.regions);
    }
    (void)cost;
    co_return entry;
}

Co<ConvertedDocument> convert_document(std::shared_ptr<TaskContext> ctx, SyntheticDocument doc, CostModel cost,
                                       std::shared_ptr<model::ModelClient> client, std::string input_key,
                                       std::string output_key) {
    co_await ctx->io_wait("fetch", cost.fetch_flat);
    co_await ctx->load_blob(input_key, "fetch");
    std::vector<json> entries;
    if (!doc.fail_whole_doc) {
        for (const auto& page : doc.pages()) {
            entries.push_back(parse_page(*ctx, page, cost));
            co_await ctx->yield();
        }
        for (auto& e : entries) e = co_await infer_page(ctx, client, doc, std::move(e), cost);
        ctx->compute("merge", doc.page_count * cost.merge_per_page);
    }
    ConvertedDocument out = assemble_document(doc, std::move(entries));
    co_await ctx->io_wait("export", cost.export_flat);
    co_await ctx->store_blob(output_key, canonical(out), "export");
    co_return out;
}

Co<std::string> process_parse_batch(std::shared_ptr<TaskContext> ctx, SyntheticDocument doc, PageBatch batch,
                                    CostModel cost, std::string result_key) {
    json entries = json::array();
    for (int no = batch.first_page; no <= batch.last_page; ++no) {
        entries.push_back(parse_page(*ctx, doc.page(no), cost));
        co_await ctx->yield();
    }
    co_await ctx->store_blob(result_key, entries.dump(), "parse");
    co_return result_key;
}

Co<json> process_model_batch(std::shared_ptr<TaskContext> ctx, SyntheticDocument doc, PageBatch batch,
                             CostModel cost, std::shared_ptr<model::ModelClient> client, std::string parse_key) {
    const std::string raw = co_await ctx->load_blob(parse_key, "layout");
    json entries = json::parse(raw);
    if (!entries.is_array() || entries.size() != static_cast<std::size_t>(batch.size())) {
        throw InvalidArgumentError(parse_key + ": parse result does not match batch " + std::to_string(batch.batch_index));
    }
    json out = json::array();
    for (auto& e : entries) out.push_back(co_await infer_page(ctx, client, doc, std::move(e), cost));
    co_return out;
}

Co<ConvertedDocument> merge_document(std::shared_ptr<TaskContext> ctx, SyntheticDocument doc,
                                     std::vector<json> batch_entries, CostModel cost, std::string merged_key) {
    std::vector<json> entries;
    for (auto& batch : batch_entries) {
        for (auto& e : batch) entries.push_back(std::move(e));
    }
    ConvertedDocument out = assemble_document(doc, std::move(entries));
    if (!doc.fail_whole_doc) ctx->compute("merge", doc.page_count * cost.merge_per_page);
    co_await ctx->store_blob(merged_key, canonical(out), "merge");
    co_return out;
}

}  // namespace convbench::pipeline
