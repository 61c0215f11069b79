#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "legend/graph.hpp"
#include "legend/nvme_sim.hpp"
#include "legend/ordering.hpp"
#include "legend/pipeline.hpp"
#include "legend/store.hpp"
#include "legend/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace legend;

namespace {

struct RunConfig {
  std::string dataset_path;
  std::string dataset_format = "auto";
  bool remap_ids = false;
  std::string test_path;

  std::uint32_t partitions = 8;
  std::uint32_t dim = 64;
  std::string model = "dot";
  std::uint64_t seed = 42;

  double learning_rate = 0.1;
  std::uint32_t batch_size = 100000;
  std::uint32_t negatives = 16;
  std::uint32_t epochs = 10;
  bool shuffle = true;

  std::uint32_t eval_candidates = 999;
  std::uint32_t hits_k = 10;
  std::uint64_t max_test_edges = 1000000;

  CostModel cost;

  std::uint64_t stats_edges = 0;
  std::uint64_t stats_nodes = 0;

  std::string output_dir = "run";
};

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) ok = true;
    }
    if (!ok) throw std::invalid_argument("unknown config key: " + scope + key);
  }
}

void load_config_file(const fs::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  json j = json::parse(in);
  reject_unknown(j, {"dataset", "partitions", "dim", "model", "seed", "train", "eval", "cost",
                     "stats", "output_dir"},
                 "");
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    reject_unknown(d, {"path", "format", "remap_ids", "test_path"}, "dataset.");
    if (d.contains("path")) cfg.dataset_path = d["path"].get<std::string>();
    if (d.contains("format")) cfg.dataset_format = d["format"].get<std::string>();
    if (d.contains("remap_ids")) cfg.remap_ids = d["remap_ids"].get<bool>();
    if (d.contains("test_path")) cfg.test_path = d["test_path"].get<std::string>();
  }
  if (j.contains("partitions")) cfg.partitions = j["partitions"].get<std::uint32_t>();
  if (j.contains("dim")) cfg.dim = j["dim"].get<std::uint32_t>();
  if (j.contains("model")) cfg.model = j["model"].get<std::string>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t, {"learning_rate", "batch_size", "negatives", "epochs", "shuffle"}, "train.");
    if (t.contains("learning_rate")) cfg.learning_rate = t["learning_rate"].get<double>();
    if (t.contains("batch_size")) cfg.batch_size = t["batch_size"].get<std::uint32_t>();
    if (t.contains("negatives")) cfg.negatives = t["negatives"].get<std::uint32_t>();
    if (t.contains("epochs")) cfg.epochs = t["epochs"].get<std::uint32_t>();
    if (t.contains("shuffle")) cfg.shuffle = t["shuffle"].get<bool>();
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    reject_unknown(e, {"candidates", "hits_k", "max_test_edges"}, "eval.");
    if (e.contains("candidates")) cfg.eval_candidates = e["candidates"].get<std::uint32_t>();
    if (e.contains("hits_k")) cfg.hits_k = e["hits_k"].get<std::uint32_t>();
    if (e.contains("max_test_edges")) cfg.max_test_edges = e["max_test_edges"].get<std::uint64_t>();
  }
  if (j.contains("cost")) {
    const auto& c = j["cost"];
    reject_unknown(c,
                   {"seconds_per_edge", "write_bps", "read_bps", "buffer_bytes", "page_size",
                    "queue_count", "queue_depth", "workers_per_queue", "ring_latency_s",
                    "page_service_s"},
                   "cost.");
    if (c.contains("seconds_per_edge")) cfg.cost.seconds_per_edge = c["seconds_per_edge"].get<double>();
    if (c.contains("write_bps")) cfg.cost.write_bps = c["write_bps"].get<double>();
    if (c.contains("read_bps")) cfg.cost.read_bps = c["read_bps"].get<double>();
    if (c.contains("buffer_bytes")) cfg.cost.buffer_bytes = c["buffer_bytes"].get<double>();
    if (c.contains("page_size")) cfg.cost.queue.page_size = c["page_size"].get<std::uint32_t>();
    if (c.contains("queue_count")) cfg.cost.queue_count = c["queue_count"].get<std::uint32_t>();
    if (c.contains("queue_depth")) cfg.cost.queue.depth = c["queue_depth"].get<std::uint32_t>();
    if (c.contains("workers_per_queue")) cfg.cost.workers_per_queue = c["workers_per_queue"].get<std::uint32_t>();
    if (c.contains("ring_latency_s")) cfg.cost.nvme_cost.ring_latency_s = c["ring_latency_s"].get<double>();
    if (c.contains("page_service_s")) cfg.cost.nvme_cost.page_service_s = c["page_service_s"].get<double>();
  }
  if (j.contains("stats")) {
    const auto& s = j["stats"];
    reject_unknown(s, {"num_edges", "num_nodes"}, "stats.");
    if (s.contains("num_edges")) cfg.stats_edges = s["num_edges"].get<std::uint64_t>();
    if (s.contains("num_nodes")) cfg.stats_nodes = s["num_nodes"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
}

EdgeFileFormat sniff_format(const fs::path& path, const std::string& requested) {
  if (requested == "triples") return EdgeFileFormat::kTriples;
  if (requested == "pairs") return EdgeFileFormat::kPairs;
  if (requested != "auto") throw std::invalid_argument("unknown edge format: " + requested);
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open edge file: " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream row(line);
    std::string tok;
    int cols = 0;
    while (row >> tok) ++cols;
    if (cols == 2) return EdgeFileFormat::kPairs;
    if (cols == 3) return EdgeFileFormat::kTriples;
    throw std::invalid_argument("cannot infer edge format from " + std::to_string(cols) +
                                " columns");
  }
  throw std::invalid_argument("edge file has no data rows: " + path.string());
}

fs::path graph_dir(const RunConfig& cfg) { return fs::path(cfg.output_dir) / "graph"; }
fs::path store_dir(const RunConfig& cfg) { return fs::path(cfg.output_dir) / "store"; }

Graph load_ingested(const RunConfig& cfg) {
  if (!fs::exists(graph_dir(cfg) / "graph_meta.json")) {
    throw std::invalid_argument("no ingested graph under " + cfg.output_dir +
                                " (run `legend ingest` first)");
  }
  return read_graph(graph_dir(cfg));
}

std::vector<Edge> load_test_edges(const RunConfig& cfg, const Graph& g) {
  if (cfg.test_path.empty()) return {};
  const auto format = sniff_format(cfg.test_path, cfg.dataset_format);
  Graph test = ingest(cfg.test_path, format);
  for (const Edge& e : test.edges) {
    if (e.src >= g.num_nodes || e.dst >= g.num_nodes) {
      throw std::invalid_argument("test edge references a node outside the trained graph");
    }
    if (g.typed() && e.rel >= g.num_relations) {
      throw std::invalid_argument("test edge references an unknown relation");
    }
  }
  if (test.edges.size() > cfg.max_test_edges) test.edges.resize(cfg.max_test_edges);
  return std::move(test.edges);
}

int cmd_ingest(const RunConfig& cfg) {
  if (cfg.dataset_path.empty()) throw std::invalid_argument("dataset.path is required");
  const auto format = sniff_format(cfg.dataset_path, cfg.dataset_format);
  IngestOptions opts;
  opts.remap_ids = cfg.remap_ids;
  const Graph g = ingest(cfg.dataset_path, format, opts);
  write_graph(g, graph_dir(cfg));
  std::printf("ingested %zu edges, %llu nodes, %llu relations -> %s\n", g.edges.size(),
              static_cast<unsigned long long>(g.num_nodes),
              static_cast<unsigned long long>(g.num_relations), graph_dir(cfg).c_str());
  return 0;
}

int cmd_partition(const RunConfig& cfg) {
  const Graph g = load_ingested(cfg);
  const PartitionPlan plan = make_partition_plan(g, cfg.partitions);
  json meta;
  meta["n"] = plan.n;
  meta["num_nodes"] = plan.num_nodes;
  meta["stride"] = plan.stride;
  json sizes = json::array();
  std::uint64_t total = 0;
  for (PartitionId i = 0; i < plan.n; ++i) {
    json row = json::array();
    for (PartitionId j = 0; j < plan.n; ++j) {
      row.push_back(plan.bucket_size(i, j));
      total += plan.bucket_size(i, j);
    }
    sizes.push_back(row);
  }
  meta["bucket_sizes"] = sizes;
  meta["total_edges"] = total;
  std::ofstream out(fs::path(cfg.output_dir) / "partition_meta.json");
  out << meta.dump(2) << "\n";
  std::printf("partitioned |V|=%llu into n=%u (stride %llu); bucket total %llu of %zu edges\n",
              static_cast<unsigned long long>(plan.num_nodes), plan.n,
              static_cast<unsigned long long>(plan.stride),
              static_cast<unsigned long long>(total), g.edges.size());
  return total == g.edges.size() ? 0 : 2;
}

int cmd_order(const RunConfig& cfg, bool emit_fixture, const std::string& out_path) {
  const BufferStateSequence seq = plan_loading_order(cfg.partitions);
  const IterationPlan plan = plan_iteration_order(seq, cfg.partitions);
  const auto accounting = io_accounting(seq, 1.0, cfg.partitions);
  const PrefetchReport report = verify_prefetchable(plan);
  const std::string text = plan_to_json(plan);

  if (emit_fixture) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return report.ok ? 0 : 1;
  }

  fs::path path = out_path.empty() ? fs::path(cfg.output_dir) / "plan.json" : fs::path(out_path);
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  std::printf("io_times=%llu, volume=%.2fS, prefetchable=%s\n",
              static_cast<unsigned long long>(accounting.io_times), accounting.comm_volume,
              report.ok ? "yes" : "no");
  if (!report.nonconsecutive_pairs.empty()) {
    std::printf("note: %zu partition pairs co-reside in non-consecutive states\n",
                report.nonconsecutive_pairs.size());
  }
  std::printf("plan written to %s\n", path.c_str());
  return report.ok ? 0 : 1;
}

int cmd_simulate_io(const RunConfig& cfg, std::uint64_t bytes) {
  fs::create_directories(cfg.output_dir);
  const fs::path file = fs::path(cfg.output_dir) / "simulate_io.bin";
  fs::remove(file);

  const std::uint64_t pages = (bytes + cfg.cost.queue.page_size - 1) / cfg.cost.queue.page_size;
  std::vector<std::byte> buffer(pages * cfg.cost.queue.page_size);
  Rng rng(cfg.seed);
  for (auto& b : buffer) b = static_cast<std::byte>(rng.next_u64() & 0xff);

  std::ostringstream csv;
  csv << "enqueue,doorbell,polling,commands,batches,sq_rings,cq_rings,lock_events,"
         "modeled_seconds,gbps\n";
  std::printf("%-10s %-9s %-8s %8s %7s %8s %8s %6s %9s %7s\n", "enqueue", "doorbell", "polling",
              "commands", "batches", "sq_rings", "cq_rings", "locks", "seconds", "GB/s");
  for (int e = 0; e < 2; ++e) {
    for (int d = 0; d < 2; ++d) {
      for (int p = 0; p < 2; ++p) {
        nvme::AccessStrategy strat;
        strat.enqueue = e ? nvme::EnqueueMode::kBatchPrecomputed : nvme::EnqueueMode::kPerCommandAtomic;
        strat.doorbell = d ? nvme::DoorbellMode::kFullCoalesced : nvme::DoorbellMode::kPerCommand;
        strat.polling = p ? nvme::PollingMode::kBatchCounter : nvme::PollingMode::kPerThread;

        nvme::BackingFile backing(file, bytes);
        const auto offload = nvme::transfer_partition(
            backing, 0, bytes, nvme::Direction::kOffload, buffer, strat, cfg.cost.queue,
            cfg.cost.queue_count, cfg.cost.workers_per_queue, cfg.seed);
        std::vector<std::byte> loaded(buffer.size());
        auto report = nvme::transfer_partition(backing, 0, bytes, nvme::Direction::kLoad, loaded,
                                               strat, cfg.cost.queue, cfg.cost.queue_count,
                                               cfg.cost.workers_per_queue, cfg.seed + 1);
        if (std::memcmp(loaded.data(), buffer.data(), bytes) != 0) {
          throw std::runtime_error("round trip mismatch in strategy grid");
        }
        report.commands += offload.commands;
        report.batches += offload.batches;
        report.sq_rings += offload.sq_rings;
        report.cq_rings += offload.cq_rings;
        report.lock_events += offload.lock_events;
        for (std::size_t q = 0; q < report.per_queue_pages.size(); ++q) {
          report.per_queue_pages[q] += offload.per_queue_pages[q];
          report.per_queue_rings[q] += offload.per_queue_rings[q];
        }
        const double seconds = nvme::model_time(report, cfg.cost.nvme_cost);
        const double gbps = seconds > 0 ? 2.0 * bytes / seconds / 1e9 : 0.0;
        const char* en = e ? "batch" : "atomic";
        const char* db = d ? "coalesced" : "percmd";
        const char* po = p ? "counter" : "perthread";
        csv << en << ',' << db << ',' << po << ',' << report.commands << ',' << report.batches
            << ',' << report.sq_rings << ',' << report.cq_rings << ',' << report.lock_events
            << ',' << seconds << ',' << gbps << '\n';
        std::printf("%-10s %-9s %-8s %8llu %7llu %8llu %8llu %6llu %9.4f %7.2f\n", en, db, po,
                    static_cast<unsigned long long>(report.commands),
                    static_cast<unsigned long long>(report.batches),
                    static_cast<unsigned long long>(report.sq_rings),
                    static_cast<unsigned long long>(report.cq_rings),
                    static_cast<unsigned long long>(report.lock_events), seconds, gbps);
      }
    }
  }
  std::ofstream out(fs::path(cfg.output_dir) / "io_report.csv", std::ios::trunc);
  out << csv.str();
  fs::remove(file);
  return 0;
}

int cmd_simulate_overlap(const RunConfig& cfg, bool prefetch) {
  std::uint64_t num_edges = cfg.stats_edges;
  std::uint64_t num_nodes = cfg.stats_nodes;
  if (fs::exists(graph_dir(cfg) / "graph_meta.json")) {
    const Graph g = load_ingested(cfg);
    num_edges = g.edges.size();
    num_nodes = g.num_nodes;
  }
  if (num_edges == 0 || num_nodes == 0) {
    throw std::invalid_argument("simulate overlap needs an ingested graph or stats.{num_edges,num_nodes}");
  }
  CostModel cost = cfg.cost;
  cost.dim = cfg.dim;
  const Theorem3Report t3 = theorem3_check(num_edges, num_nodes, cost);

  const std::uint32_t n = cfg.partitions;
  const BufferStateSequence seq = plan_loading_order(n);
  const IterationPlan plan = plan_iteration_order(seq, n);
  std::vector<std::uint64_t> buckets(static_cast<std::size_t>(n) * n,
                                     num_edges / (static_cast<std::uint64_t>(n) * n));
  const std::uint64_t stride = (num_nodes + n - 1) / n;
  std::vector<double> part_bytes(n, static_cast<double>(partition_file_bytes(stride, cfg.dim)));
  const OverlapTimeline tl = simulate_epoch_timeline(plan, buckets, part_bytes, cost, prefetch);
  const UtilizationReport util = utilization_report(tl);

  fs::create_directories(cfg.output_dir);
  {
    std::ofstream out(fs::path(cfg.output_dir) / "timeline.csv", std::ios::trunc);
    out << timeline_to_csv(tl);
  }
  json summary{
      {"lhs", t3.lhs},
      {"rhs", t3.rhs},
      {"covered", t3.covered},
      {"prefetch", prefetch},
      {"compute_s", tl.compute_s},
      {"transfer_s", tl.transfer_s},
      {"stall_s", tl.stall_s},
      {"fill_s", tl.fill_s},
      {"span_s", tl.span_s},
      {"utilization", util.utilization},
      {"duty_cycle", util.duty_cycle},
  };
  {
    std::ofstream out(fs::path(cfg.output_dir) / "overlap_summary.json", std::ios::trunc);
    out << summary.dump(2) << "\n";
  }
  std::printf("covered=%s (%.3g %s %.3g)\n", t3.covered ? "true" : "false", t3.lhs,
              t3.covered ? ">=" : "<", t3.rhs);
  std::printf("modeled epoch: compute=%.3fs transfer=%.3fs stall=%.3fs span=%.3fs utilization=%.3f\n",
              tl.compute_s, tl.transfer_s, tl.stall_s, tl.span_s, util.utilization);
  return 0;
}

int cmd_train(const RunConfig& cfg, bool reinit) {
  const Graph g = load_ingested(cfg);
  const PartitionPlan parts = make_partition_plan(g, cfg.partitions);
  ScoreModel model{score_kind_from_name(cfg.model), cfg.dim};
  model.validate();
  if (model.uses_relations() && !g.typed()) {
    throw std::invalid_argument("typed model on an untyped graph");
  }

  const fs::path sdir = store_dir(cfg);
  std::optional<EmbeddingStore> store;
  if (!reinit && fs::exists(sdir / "store_meta.json")) {
    store = EmbeddingStore::open(sdir);
    if (store->n() != cfg.partitions || store->dim() != cfg.dim) {
      throw std::invalid_argument("existing store does not match config (use --init)");
    }
  } else {
    fs::remove_all(sdir);
    store = EmbeddingStore::create(parts, cfg.dim, g.typed() ? g.num_relations : 0, cfg.seed, sdir);
  }

  const BufferStateSequence seq = plan_loading_order(cfg.partitions);
  const IterationPlan plan = plan_iteration_order(seq, cfg.partitions);
  CostModel cost = cfg.cost;
  cost.dim = cfg.dim;

  const std::vector<Edge> test_edges = load_test_edges(cfg, g);

  fs::create_directories(cfg.output_dir);
  const fs::path metrics_path = fs::path(cfg.output_dir) / "metrics.csv";
  std::ofstream metrics(metrics_path, std::ios::trunc);
  metrics << "epoch,loss,mrr,hits@10,seconds\n";
  metrics.precision(9);

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    TrainOptions opts;
    opts.learning_rate = cfg.learning_rate;
    opts.batch_size = cfg.batch_size;
    opts.negatives = cfg.negatives;
    opts.shuffle = cfg.shuffle;
    opts.seed = cfg.seed;
    opts.epoch = epoch;
    const EpochResult res =
        run_epoch(plan, *store, g, parts, model, cost, EpochMode::kRealTrain, opts);

    std::string mrr = "na";
    std::string hits = "na";
    if (!test_edges.empty()) {
      EvalOptions eopts;
      eopts.hits_k = cfg.hits_k;
      eopts.num_candidates = cfg.eval_candidates;
      eopts.seed = derive_seed(cfg.seed, 0x6d727245ull, epoch);
      const EvalResult ev = evaluate(model, *store, test_edges, eopts);
      mrr = std::to_string(ev.mrr);
      hits = std::to_string(ev.hits_at_k);
    }
    metrics << epoch << ',' << res.loss_per_edge << ',' << mrr << ',' << hits << ','
            << res.timeline.span_s << '\n';
    metrics.flush();
    std::printf("epoch %u: loss/edge=%.6f mrr=%s hits@%u=%s modeled=%.3fs wall=%.1fs\n", epoch,
                res.loss_per_edge, mrr.c_str(), cfg.hits_k, hits.c_str(), res.timeline.span_s,
                res.wall_seconds);
  }
  std::printf("metrics written to %s\n", metrics_path.c_str());
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const Graph g = load_ingested(cfg);
  const EmbeddingStore store = EmbeddingStore::open(store_dir(cfg));
  ScoreModel model{score_kind_from_name(cfg.model), store.dim()};
  const std::vector<Edge> test_edges = load_test_edges(cfg, g);
  if (test_edges.empty()) throw std::invalid_argument("dataset.test_path is required for eval");
  EvalOptions opts;
  opts.hits_k = cfg.hits_k;
  opts.num_candidates = cfg.eval_candidates;
  opts.seed = derive_seed(cfg.seed, 0x6d727245ull, 0xffff);
  const EvalResult res = evaluate(model, store, test_edges, opts);
  json out{{"mrr", res.mrr}, {"hits_at_k", res.hits_at_k}, {"k", cfg.hits_k},
           {"candidates", cfg.eval_candidates}, {"edges", res.edges},
           {"random_baseline_mrr", random_rank_mrr(cfg.eval_candidates)}};
  fs::create_directories(cfg.output_dir);
  std::ofstream f(fs::path(cfg.output_dir) / "eval.json", std::ios::trunc);
  f << out.dump(2) << "\n";
  std::printf("mrr=%.4f hits@%u=%.4f over %llu edges (%u candidates)\n", res.mrr, cfg.hits_k,
              res.hits_at_k, static_cast<unsigned long long>(res.edges), cfg.eval_candidates);
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  bool printed = false;
  if (fs::exists(dir / "partition_meta.json")) {
    std::ifstream in(dir / "partition_meta.json");
    json j = json::parse(in);
    std::printf("partitions: n=%u stride=%llu total_edges=%llu\n", j["n"].get<std::uint32_t>(),
                j["stride"].get<unsigned long long>(),
                j["total_edges"].get<unsigned long long>());
    printed = true;
  }
  if (fs::exists(dir / "plan.json")) {
    std::ifstream in(dir / "plan.json");
    std::stringstream ss;
    ss << in.rdbuf();
    const IterationPlan plan = plan_from_json(ss.str());
    const auto acc = io_accounting(plan.buffer_seq, 1.0, plan.buffer_seq.n);
    std::printf("plan: n=%u io_times=%llu volume=%.2fS buckets=%zu\n", plan.buffer_seq.n,
                static_cast<unsigned long long>(acc.io_times), acc.comm_volume,
                plan.bucket_order.size());
    printed = true;
  }
  if (fs::exists(dir / "metrics.csv")) {
    std::ifstream in(dir / "metrics.csv");
    std::string line, last, header;
    std::getline(in, header);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      if (!line.empty()) {
        last = line;
        ++rows;
      }
    }
    std::printf("metrics: %zu epochs (%s)\n  last: %s\n", rows, header.c_str(), last.c_str());
    printed = true;
  }
  if (fs::exists(dir / "overlap_summary.json")) {
    std::ifstream in(dir / "overlap_summary.json");
    json j = json::parse(in);
    std::printf("overlap: covered=%s stall=%.3fs utilization=%.3f\n",
                j["covered"].get<bool>() ? "true" : "false", j["stall_s"].get<double>(),
                j["utilization"].get<double>());
    printed = true;
  }
  if (fs::exists(dir / "io_report.csv")) {
    std::ifstream in(dir / "io_report.csv");
    std::string line;
    std::printf("io strategy grid:\n");
    while (std::getline(in, line)) std::printf("  %s\n", line.c_str());
    printed = true;
  }
  if (!printed) std::printf("no artifacts found under %s\n", dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partition-based out-of-core graph embedding trainer"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");

  RunConfig cfg;
  // Per-flag overrides, applied after the config file loads.
  std::optional<std::string> o_dataset, o_format, o_model, o_out, o_test;
  std::optional<std::uint32_t> o_n, o_dim, o_batch, o_neg, o_epochs, o_cands;
  std::optional<std::uint64_t> o_seed, o_edges, o_nodes;
  std::optional<double> o_lr;
  bool remap = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", o_out, "output directory");
    sub->add_option("--n", o_n, "number of node partitions");
    sub->add_option("--dim", o_dim, "embedding dimension");
    sub->add_option("--model", o_model, "score model: dot|distmult|complex");
    sub->add_option("--seed", o_seed, "RNG seed");
  };

  auto* c_ingest = app.add_subcommand("ingest", "read a TSV edge list into the run directory");
  c_ingest->add_option("--input", o_dataset, "edge list path");
  c_ingest->add_option("--format", o_format, "auto|triples|pairs");
  c_ingest->add_flag("--remap", remap, "remap sparse ids to dense ids");
  add_common(c_ingest);

  auto* c_partition = app.add_subcommand("partition", "partition the ingested graph");
  add_common(c_partition);

  auto* c_order = app.add_subcommand("order", "generate the partition loading + bucket order");
  bool emit_fixture = false;
  std::string plan_out;
  c_order->add_flag("--emit-fixture", emit_fixture, "print the canonical plan JSON to stdout");
  c_order->add_option("--out", plan_out, "plan file path (default <out-dir>/plan.json)");
  add_common(c_order);

  auto* c_sim = app.add_subcommand("simulate", "run the storage-tier simulations");
  std::string which;
  c_sim->add_option("which", which, "io|overlap")->required();
  std::uint64_t sim_bytes = 8ull << 20;
  bool no_prefetch = false;
  c_sim->add_option("--bytes", sim_bytes, "transfer size for the io grid");
  c_sim->add_flag("--no-prefetch", no_prefetch, "disable prefetching in the overlap model");
  c_sim->add_option("--edges", o_edges, "edge count for overlap stats");
  c_sim->add_option("--nodes", o_nodes, "node count for overlap stats");
  add_common(c_sim);

  auto* c_train = app.add_subcommand("train", "train embeddings through the pipeline");
  bool reinit = false;
  c_train->add_flag("--init", reinit, "reinitialize the store");
  c_train->add_option("--epochs", o_epochs, "number of epochs");
  c_train->add_option("--lr", o_lr, "learning rate");
  c_train->add_option("--batch-size", o_batch, "positives per batch");
  c_train->add_option("--negatives", o_neg, "negatives per positive");
  c_train->add_option("--test", o_test, "held-out edge list for per-epoch metrics");
  add_common(c_train);

  auto* c_eval = app.add_subcommand("eval", "rank test edges against sampled corruptions");
  c_eval->add_option("--test", o_test, "held-out edge list");
  c_eval->add_option("--candidates", o_cands, "corruption candidates per edge");
  add_common(c_eval);

  auto* c_report = app.add_subcommand("report", "summarize the artifacts in a run directory");
  add_common(c_report);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) load_config_file(config_path, cfg);
    if (o_dataset) cfg.dataset_path = *o_dataset;
    if (o_format) cfg.dataset_format = *o_format;
    if (remap) cfg.remap_ids = true;
    if (o_test) cfg.test_path = *o_test;
    if (o_out) cfg.output_dir = *o_out;
    if (o_n) cfg.partitions = *o_n;
    if (o_dim) cfg.dim = *o_dim;
    if (o_model) cfg.model = *o_model;
    if (o_seed) cfg.seed = *o_seed;
    if (o_lr) cfg.learning_rate = *o_lr;
    if (o_batch) cfg.batch_size = *o_batch;
    if (o_neg) cfg.negatives = *o_neg;
    if (o_epochs) cfg.epochs = *o_epochs;
    if (o_cands) cfg.eval_candidates = *o_cands;
    if (o_edges) cfg.stats_edges = *o_edges;
    if (o_nodes) cfg.stats_nodes = *o_nodes;

    if (app.got_subcommand(c_ingest)) return cmd_ingest(cfg);
    if (app.got_subcommand(c_partition)) return cmd_partition(cfg);
    if (app.got_subcommand(c_order)) return cmd_order(cfg, emit_fixture, plan_out);
    if (app.got_subcommand(c_sim)) {
      if (which == "io") return cmd_simulate_io(cfg, sim_bytes);
      if (which == "overlap") return cmd_simulate_overlap(cfg, !no_prefetch);
      throw std::invalid_argument("simulate expects io or overlap");
    }
    if (app.got_subcommand(c_train)) return cmd_train(cfg, reinit);
    if (app.got_subcommand(c_eval)) return cmd_eval(cfg);
    if (app.got_subcommand(c_report)) return cmd_report(cfg);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 0;
}
