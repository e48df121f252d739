// SPDX-License-Identifier: Apache-2.0
// convbench: corpus generation, in-process experiments, and the multi-process
// roles (broker server, model replica, worker, job submitter).
#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "convbench/bench/experiments.hpp"
#include "convbench/bench/report.hpp"
#include "convbench/core/errors.hpp"
#include "convbench/net/services.hpp"
#include "convbench/pipeline/corpus.hpp"

using namespace convbench;
using nlohmann::json;

namespace {

std::string config_scalar(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw InvalidArgumentError("config value for '" + key + "' must be a scalar or a list of scalars");
}

// A flat JSON object keyed by long flag names, e.g. {"scheme": "page", "nodes": [1, 2, 4]}.
// Only options absent from the command line take the file's value.
void apply_config(CLI::App* app, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot read config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidArgumentError(path + ": " + e.what());
    }
    if (!j.is_object()) throw InvalidArgumentError(path + ": config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        CLI::Option* opt = app->get_option_no_throw("--" + it.key());
        if (opt == nullptr || it.key() == "config") throw InvalidArgumentError(path + ": unknown option '" + it.key() + "'");
        if (opt->count() > 0) continue;
        if (it->is_array()) {
            for (const auto& v : *it) opt->add_result(config_scalar(v, it.key()));
        } else {
            opt->add_result(config_scalar(*it, it.key()));
        }
        opt->run_callback();
    }
}

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

/// Blocks until SIGINT/SIGTERM, or for `seconds` when positive.
void serve_until_stopped(double seconds) {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
    while (!g_stop && (seconds <= 0 || std::chrono::steady_clock::now() < until)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

std::string broker_address(const std::string& flag) {
    if (const char* env = std::getenv("CONVBENCH_BROKER"); env && *env) return env;
    return flag;
}

struct CorpusOpts {
    std::string corpus;
    std::size_t docs = 100;
    std::uint64_t seed = 1;
    int max_pages = 0;

    void add(CLI::App* app) {
        app->add_option("--corpus", corpus, "Corpus file (jsonl); generated from --docs/--seed when absent");
        app->add_option("--docs", docs, "Documents to generate")->check(CLI::PositiveNumber);
        app->add_option("--seed", seed, "Corpus seed");
        app->add_option("--max-pages", max_pages, "Clamp generated page counts (0 keeps the distribution)")
            ->check(CLI::NonNegativeNumber);
    }

    std::vector<pipeline::SyntheticDocument> load() const {
        if (!corpus.empty()) return pipeline::read_corpus_jsonl(corpus);
        pipeline::CorpusParams params;
        if (max_pages > 0) params.max_pages = max_pages;
        return pipeline::generate_corpus(docs, seed, params);
    }
};

struct RunOpts {
    std::string scheme = "doc";
    std::string profile = "B";
    double time_scale = 100.0;
    double store_cap = 0;
    int batch_size = 4;
    bool dynamic_batching = false;
    std::size_t window = 0;
    bool unbounded = false;
    int workers_per_node = 0;
    int restart_after = 64;
    std::string router = "round_robin";
    int job_timeout_s = 600;
    std::string report;
    std::string format = "json";

    void add(CLI::App* app) {
        app->add_option("--scheme", scheme, "doc | page");
        app->add_option("--profile", profile, "Deployment profile A | B");
        app->add_option("--time-scale", time_scale, "Simulated seconds per real second")->check(CLI::PositiveNumber);
        app->add_option("--store-cap", store_cap, "Store transactions per simulated second (0 = uncapped)")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--batch-size", batch_size, "Pages per page-level batch")->check(CLI::PositiveNumber);
        app->add_flag("--dynamic-batching", dynamic_batching, "Grow batches of long documents");
        app->add_option("--window", window, "Subtask window W (0 = worker slots)");
        app->add_flag("--unbounded-window", unbounded, "Disable windowed enqueueing");
        app->add_option("--workers-per-node", workers_per_node, "Override the planner (0 = planner)")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--restart-after", restart_after, "Worker restart cadence in tasks (0 = never)")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--router", router, "round_robin | random | least_loaded");
        app->add_option("--job-timeout", job_timeout_s, "Wall-clock seconds per job")->check(CLI::PositiveNumber);
        app->add_option("--report", report, "Write the metrics report here");
        app->add_option("--format", format, "json | csv");
    }

    bench::ExperimentConfig config() const {
        bench::ExperimentConfig cfg;
        cfg.scheme = pipeline::parse_scheme(scheme);
        cfg.profile = bench::profile_by_name(profile);
        cfg.cluster.time_scale = time_scale;
        if (store_cap > 0) cfg.cluster.store_capacity_ops_per_s = store_cap;
        if (workers_per_node > 0) cfg.cluster.workers_per_node = workers_per_node;
        cfg.cluster.restart_after_tasks = restart_after > 0 ? std::optional<int>(restart_after) : std::nullopt;
        cfg.cluster.router.policy = model::parse_policy(router);
        cfg.batch_size = batch_size;
        cfg.dynamic_batching = dynamic_batching;
        if (window > 0) cfg.window = window;
        cfg.unbounded_window = unbounded;
        cfg.job_timeout = std::chrono::seconds(job_timeout_s);
        return cfg;
    }

    void emit(const std::vector<bench::MetricsReport>& rows) const {
        const auto fmt = bench::parse_format(format);
        if (report.empty()) {
            std::cout << (fmt == bench::ReportFormat::csv ? bench::to_csv(rows) : bench::to_json_text(rows) + "\n");
        } else {
            bench::emit_report(rows, fmt, report);
        }
    }
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    out << text << "\n";
}

std::string g_config;

void add_config(CLI::App* app) {
    app->add_option("--config", g_config, "JSON file with the same keys as the long flags; flags win");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed document conversion benchmark"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "spdlog level")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic corpus");
    CorpusOpts gen_corpus;
    std::string gen_out;
    gen_corpus.add(gen);
    gen->add_option("--out", gen_out, "Output jsonl path")->required();
    add_config(gen);

    // run
    auto* run = app.add_subcommand("run", "One conversion job on an in-process cluster");
    CorpusOpts run_corpus;
    RunOpts run_opts;
    int run_nodes = 1;
    run_corpus.add(run);
    run_opts.add(run);
    run->add_option("--nodes", run_nodes, "Node count")->check(CLI::PositiveNumber);
    add_config(run);

    // scaling
    auto* scaling = app.add_subcommand("scaling", "The same job over several node counts");
    CorpusOpts sc_corpus;
    RunOpts sc_opts;
    std::vector<int> sc_nodes{1, 2, 4};
    std::string sc_summary;
    sc_corpus.add(scaling);
    sc_opts.add(scaling);
    scaling->add_option("--nodes", sc_nodes, "Ascending node counts")->delimiter(',');
    scaling->add_option("--summary", sc_summary, "Write speedups and allocations (json) here");
    add_config(scaling);

    // fairness
    auto* fair = app.add_subcommand("fairness", "Probe job latency on an idle and a busy cluster");
    CorpusOpts fair_corpus;
    RunOpts fair_opts;
    std::vector<double> offsets{60, 120, 180};
    int probe_pages = 15;
    int fair_nodes = 1;
    std::string fair_out;
    fair_corpus.docs = 60;
    fair_opts.scheme = "doc";
    fair_opts.profile = "A";
    fair_opts.workers_per_node = 4;
    fair_corpus.add(fair);
    fair_opts.add(fair);
    fair->add_option("--offsets", offsets, "Probe submit offsets in simulated seconds")->delimiter(',');
    fair->add_option("--probe-pages", probe_pages, "Pages of the probe document")->check(CLI::PositiveNumber);
    fair->add_option("--nodes", fair_nodes, "Node count")->check(CLI::PositiveNumber);
    fair->add_option("--out", fair_out, "Write the result (json) here");
    add_config(fair);

    // report
    auto* report = app.add_subcommand("report", "Convert a json report to csv or json");
    std::string rep_in, rep_out, rep_format = "csv";
    report->add_option("--in", rep_in, "json report")->required()->check(CLI::ExistingFile);
    report->add_option("--out", rep_out, "Output path (stdout when absent)");
    report->add_option("--format", rep_format, "json | csv");
    add_config(report);

    // serve
    auto* serve = app.add_subcommand("serve", "Broker, result backend, store and event log server");
    std::string serve_bind = ":7400";
    double serve_scale = 100.0, serve_cap = 0, serve_latency = 0.05, serve_for = 0;
    serve->add_option("--bind", serve_bind, "host:port or :port")->capture_default_str();
    serve->add_option("--time-scale", serve_scale, "Simulated seconds per real second")->check(CLI::PositiveNumber);
    serve->add_option("--store-cap", serve_cap, "Store transactions per simulated second (0 = uncapped)");
    serve->add_option("--store-latency", serve_latency, "Simulated seconds per store transaction");
    serve->add_option("--duration", serve_for, "Exit after this many wall seconds (0 = until signalled)");
    add_config(serve);

    // model
    auto* modelc = app.add_subcommand("model", "One model replica behind a socket");
    std::string model_bind = ":7500", model_id = "model-0";
    double model_scale = 100.0, model_for = 0;
    pipeline::CostModel model_cost;
    modelc->add_option("--bind", model_bind, "host:port or :port")->capture_default_str();
    modelc->add_option("--id", model_id, "Replica id");
    modelc->add_option("--time-scale", model_scale, "Simulated seconds per real second")->check(CLI::PositiveNumber);
    modelc->add_option("--infer-seconds", model_cost.infer_layout_per_page, "Layout inference per page");
    modelc->add_option("--table-seconds", model_cost.table_structure_per_table, "Table structure per table");
    modelc->add_option("--duration", model_for, "Exit after this many wall seconds (0 = until signalled)");
    add_config(modelc);

    // worker
    auto* worker = app.add_subcommand("worker", "A worker attached to a broker server");
    std::string worker_broker = "127.0.0.1:7400", worker_id = "w0";
    std::vector<std::string> worker_models;
    int worker_x = 4, worker_restart = 64;
    double worker_scale = 100.0, worker_for = 0;
    std::string worker_router = "round_robin";
    worker->add_option("--broker", worker_broker, "Broker address (CONVBENCH_BROKER overrides)");
    worker->add_option("--models", worker_models, "Model replica addresses")->delimiter(',')->required();
    worker->add_option("--id", worker_id, "Worker id");
    worker->add_option("--prefetch", worker_x, "Prefetch limit X")->check(CLI::PositiveNumber);
    worker->add_option("--restart-after", worker_restart, "Restart cadence in tasks (0 = never)");
    worker->add_option("--router", worker_router, "round_robin | random | least_loaded");
    worker->add_option("--time-scale", worker_scale, "Simulated seconds per real second")->check(CLI::PositiveNumber);
    worker->add_option("--duration", worker_for, "Exit after this many wall seconds (0 = until signalled)");
    add_config(worker);

    // submit
    auto* submit = app.add_subcommand("submit", "Stage a corpus on a broker server and run one job");
    CorpusOpts sub_corpus;
    std::string sub_broker = "127.0.0.1:7400", sub_scheme = "doc", sub_report, sub_format = "json";
    int sub_batch = 4, sub_timeout = 600;
    std::size_t sub_window = 0;
    double sub_scale = 100.0;
    sub_corpus.add(submit);
    submit->add_option("--broker", sub_broker, "Broker address (CONVBENCH_BROKER overrides)");
    submit->add_option("--scheme", sub_scheme, "doc | page");
    submit->add_option("--batch-size", sub_batch, "Pages per page-level batch")->check(CLI::PositiveNumber);
    submit->add_option("--window", sub_window, "Subtask window W (0 = unbounded)");
    submit->add_option("--time-scale", sub_scale, "Must match the server")->check(CLI::PositiveNumber);
    submit->add_option("--job-timeout", sub_timeout, "Wall-clock seconds")->check(CLI::PositiveNumber);
    submit->add_option("--report", sub_report, "Write the metrics report here");
    submit->add_option("--format", sub_format, "json | csv");
    add_config(submit);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (!g_config.empty()) apply_config(app.get_subcommands().front(), g_config);
        if (*gen) {
            const auto docs = gen_corpus.load();
            pipeline::write_corpus_jsonl(gen_out, docs);
            std::cerr << docs.size() << " documents, " << pipeline::total_pages(docs) << " pages -> " << gen_out << "\n";
        } else if (*run) {
            const auto r = bench::run_conversion(run_corpus.load(), run_nodes, run_opts.config());
            run_opts.emit({r.metrics});
            std::cerr << "summary " << r.summary.dump() << "\n";
        } else if (*scaling) {
            const auto r = bench::run_scaling_experiment(sc_corpus.load(), sc_nodes, sc_opts.config());
            std::vector<bench::MetricsReport> rows;
            for (const auto& p : r.points) rows.push_back(p.metrics);
            sc_opts.emit(rows);
            if (!sc_summary.empty()) write_text(sc_summary, json(r).dump(2));
        } else if (*fair) {
            const auto background = fair_corpus.load();
            const auto probe = pipeline::uniform_corpus(1, probe_pages, fair_corpus.seed + 1, "probe").front();
            const auto r = bench::run_fairness_experiment(background, probe, offsets, fair_nodes, fair_opts.config());
            write_text(fair_out, json(r).dump(2));
        } else if (*report) {
            std::ifstream in(rep_in);
            std::stringstream buf;
            buf << in.rdbuf();
            const auto rows = bench::reports_from_json_text(buf.str());
            const auto fmt = bench::parse_format(rep_format);
            if (rep_out.empty()) {
                std::cout << (fmt == bench::ReportFormat::csv ? bench::to_csv(rows) : bench::to_json_text(rows) + "\n");
            } else {
                bench::emit_report(rows, fmt, rep_out);
            }
        } else if (*serve) {
            const core::TimeScale scale{serve_scale};
            core::BrokerConfig bc;
            bc.time_scale = scale;
            core::StoreConfig sc;
            sc.latency_per_op_s = serve_latency;
            if (serve_cap > 0) sc.capacity_ops_per_s = serve_cap;
            net::BrokerServer server(net::Endpoint::parse(serve_bind), std::make_shared<core::InMemoryBroker>(bc),
                                     std::make_shared<core::InMemoryResultBackend>(),
                                     std::make_shared<core::LocalBlobStore>(sc, scale),
                                     std::make_shared<core::EventLog>());
            std::cout << "listening " << server.endpoint().str() << std::endl;
            serve_until_stopped(serve_for);
            server.stop();
        } else if (*modelc) {
            model::ModelEndpointConfig mc;
            mc.replica_id = model_id;
            mc.infer_duration_s = model_cost.infer_layout_per_page;
            mc.table_duration_s = model_cost.table_structure_per_table;
            mc.time_scale = core::TimeScale{model_scale};
            auto replica = std::make_shared<model::LocalReplica>(mc);
            net::ModelServer server(net::Endpoint::parse(model_bind), replica);
            std::cout << "listening " << server.endpoint().str() << std::endl;
            serve_until_stopped(model_for);
            server.stop();
        } else if (*worker) {
            const core::TimeScale scale{worker_scale};
            auto rpc = std::make_shared<net::RpcClient>(net::Endpoint::parse(broker_address(worker_broker)));
            std::vector<std::shared_ptr<model::ModelClient>> replicas;
            for (const auto& m : worker_models) replicas.push_back(std::make_shared<net::TcpModelClient>(net::Endpoint::parse(m)));
            model::RouterPolicy policy;
            policy.policy = model::parse_policy(worker_router);
            auto registry = std::make_shared<core::HandlerRegistry>();
            pipeline::register_pipeline_handlers(
                *registry, pipeline::PipelineServices{std::make_shared<model::RoutedModelClient>(replicas, policy, scale)});
            auto events = std::make_shared<core::EventLog>();
            net::EventForwarder forwarder(events, rpc);
            core::WorkerConfig wc;
            wc.worker_id = worker_id;
            wc.prefetch_limit = worker_x;
            wc.restart_after_tasks = worker_restart > 0 ? std::optional<int>(worker_restart) : std::nullopt;
            core::Worker w(wc, core::WorkerEnv{std::make_shared<net::RemoteBroker>(rpc),
                                               std::make_shared<net::RemoteResultBackend>(rpc),
                                               std::make_shared<net::RemoteBlobStore>(rpc), events, registry, scale});
            w.start();
            serve_until_stopped(worker_for);
            w.stop();
            forwarder.flush();
        } else if (*submit) {
            const core::TimeScale scale{sub_scale};
            auto rpc = std::make_shared<net::RpcClient>(net::Endpoint::parse(broker_address(sub_broker)));
            auto store = std::make_shared<net::RemoteBlobStore>(rpc);
            pipeline::DatasetCatalog catalog;
            const auto docs = sub_corpus.load();
            catalog.add("corpus", docs, [&](const std::string& key, std::string bytes) { store->preload(key, std::move(bytes)); });
            auto events = std::make_shared<core::EventLog>();
            std::string job;
            {
                net::EventForwarder forwarder(events, rpc);
                core::Client client(core::WorkerEnv{std::make_shared<net::RemoteBroker>(rpc),
                                                    std::make_shared<net::RemoteResultBackend>(rpc), store, events,
                                                    nullptr, scale},
                                    // Distinct per submitting process: several submitters share one server.
                                    "job" + std::to_string(::getpid()));
                pipeline::ConversionRequest req;
                req.dataset = "corpus";
                req.scheme = pipeline::parse_scheme(sub_scheme);
                req.batch_size = sub_batch;
                req.unbounded_window = sub_window == 0;
                if (sub_window > 0) req.window = sub_window;
                job = pipeline::submit_job(client, catalog, req, std::nullopt);
                forwarder.flush();
                const auto st = client.wait(job, std::chrono::seconds(sub_timeout));
                if (!st) throw Error("timeout", "job " + job + " did not finish");
                std::cerr << job << " " << core::to_string(st->status) << " " << st->result.dump() << "\n";
            }
            // Workers forward their logs periodically; give the last batch time to land.
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
            const auto rows = std::vector<bench::MetricsReport>{
                bench::compute_metrics(net::fetch_events(*rpc), job, pipeline::total_pages(docs), scale)};
            RunOpts out;
            out.report = sub_report;
            out.format = sub_format;
            out.emit(rows);
        }
    } catch (const std::exception& e) {
        std::cerr << "convbench: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
