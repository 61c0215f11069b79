#include "legend/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace legend {

void CostModel::validate() const {
  if (seconds_per_edge <= 0 || write_bps <= 0 || read_bps <= 0 || buffer_bytes <= 0 || dim == 0) {
    throw std::invalid_argument("cost model parameters must be strictly positive");
  }
}

Theorem3Report theorem3_check(std::uint64_t num_edges, std::uint64_t num_nodes,
                              const CostModel& cost) {
  cost.validate();
  if (num_edges == 0 || num_nodes == 0) {
    throw std::invalid_argument("graph statistics must be positive");
  }
  Theorem3Report report;
  const double v = static_cast<double>(num_nodes);
  report.lhs = static_cast<double>(num_edges) / (v * v);
  const double d = static_cast<double>(cost.dim);
  report.rhs = 96.0 * d * d /
               (cost.buffer_bytes * cost.seconds_per_edge * (cost.write_bps + cost.read_bps));
  report.covered = report.lhs >= report.rhs;
  return report;
}

std::string timeline_to_csv(const OverlapTimeline& timeline) {
  std::ostringstream out;
  out << "kind,start,end,label\n";
  out.precision(9);
  for (const auto& ev : timeline.events) {
    const char* kind = ev.kind == TimelineEvent::Kind::kCompute   ? "compute"
                       : ev.kind == TimelineEvent::Kind::kTransfer ? "transfer"
                                                                    : "stall";
    out << kind << ',' << ev.start << ',' << ev.end << ',' << ev.label << '\n';
  }
  return out.str();
}

UtilizationReport utilization_report(const OverlapTimeline& timeline) {
  if (timeline.events.empty()) throw std::invalid_argument("timeline is empty");
  UtilizationReport report;
  report.utilization = timeline.utilization();
  report.duty_cycle = timeline.span_s > 0 ? timeline.compute_s / timeline.span_s : 1.0;
  report.compute_s = timeline.compute_s;
  report.transfer_s = timeline.transfer_s;
  report.stall_s = timeline.stall_s;
  for (const auto& ev : timeline.events) {
    if (ev.kind != TimelineEvent::Kind::kStall) continue;
    // stall labels carry the state index
    const auto pos = ev.label.find_last_of(' ');
    const std::uint32_t state =
        pos == std::string::npos ? 0u : static_cast<std::uint32_t>(std::stoul(ev.label.substr(pos + 1)));
    report.stall_by_state.push_back({state, ev.end - ev.start});
  }
  return report;
}

OverlapTimeline simulate_epoch_timeline(const IterationPlan& plan,
                                        std::span<const std::uint64_t> bucket_sizes,
                                        std::span<const double> partition_bytes,
                                        const CostModel& cost, bool prefetch) {
  cost.validate();
  const auto& seq = plan.buffer_seq;
  const std::uint32_t n = seq.n;
  if (bucket_sizes.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("bucket size table must have n*n entries");
  }
  if (partition_bytes.size() != n) {
    throw std::invalid_argument("one byte size per partition required");
  }

  OverlapTimeline tl;
  std::vector<double> loaded_at(n, std::numeric_limits<double>::infinity());

  // Initial fill: three sequential loads into the empty buffer.
  double channel_free = 0.0;
  for (PartitionId p : seq.states[0]) {
    const double dur = partition_bytes[p] / cost.read_bps;
    tl.events.push_back({TimelineEvent::Kind::kTransfer, channel_free, channel_free + dur,
                         "load p" + std::to_string(p)});
    channel_free += dur;
    loaded_at[p] = channel_free;
    tl.transfer_s += dur;
  }
  tl.fill_s = channel_free;
  double compute_clock = channel_free;

  const std::size_t num_states = seq.states.size();
  std::size_t state = 0;
  std::size_t next_swap = 0;  // next swap to issue

  auto issue_swap = [&](std::size_t i, double now) {
    const PartitionId out = seq.swaps[i].evicted;
    const PartitionId in = seq.swaps[i].loaded;
    // Write-out and read-in overlap; the exchange models as the dominant
    // side's bytes over the combined duplex throughput (for equal partitions
    // this is exactly 2P/(w+r)).
    const double bytes = std::max(partition_bytes[out], partition_bytes[in]);
    const double start = std::max(now, channel_free);
    const double dur = bytes / (cost.write_bps + cost.read_bps);
    tl.events.push_back({TimelineEvent::Kind::kTransfer, start, start + dur,
                         "offload p" + std::to_string(out)});
    tl.events.push_back({TimelineEvent::Kind::kTransfer, start, start + dur,
                         "load p" + std::to_string(in)});
    tl.transfer_s += 2 * dur;
    channel_free = start + dur;
    loaded_at[in] = channel_free;
    loaded_at[out] = std::numeric_limits<double>::infinity();
  };

  for (std::size_t g = 0; g < plan.bucket_order.size(); ++g) {
    while (state + 1 < num_states && g >= plan.state_offsets[state + 1]) ++state;
    // Prefetch: issue any swap whose point has been passed.
    while (next_swap + 1 < num_states && prefetch &&
           g >= plan.prefetch_points[next_swap]) {
      issue_swap(next_swap, compute_clock);
      ++next_swap;
    }
    // Without prefetching a swap waits for its whole state to finish.
    while (!prefetch && next_swap + 1 < num_states &&
           g >= plan.state_offsets[next_swap + 1]) {
      issue_swap(next_swap, compute_clock);
      ++next_swap;
    }

    const auto [a, b] = plan.bucket_order[g];
    const double ready = std::max(loaded_at[a], loaded_at[b]);
    if (ready > compute_clock) {
      tl.events.push_back({TimelineEvent::Kind::kStall, compute_clock, ready,
                           "wait state " + std::to_string(state)});
      tl.stall_s += ready - compute_clock;
      compute_clock = ready;
    }
    const double dur =
        static_cast<double>(bucket_sizes[static_cast<std::size_t>(a) * n + b]) *
        cost.seconds_per_edge;
    tl.events.push_back({TimelineEvent::Kind::kCompute, compute_clock, compute_clock + dur,
                         "bucket(" + std::to_string(a) + "," + std::to_string(b) + ")"});
    tl.compute_s += dur;
    compute_clock += dur;
  }
  // Swaps whose point coincides with the end of the order.
  while (next_swap + 1 < num_states) {
    issue_swap(next_swap, compute_clock);
    ++next_swap;
  }

  // Drain: write the final residents back.
  double drain = std::max(compute_clock, channel_free);
  for (PartitionId p : seq.states[num_states - 1]) {
    const double dur = partition_bytes[p] / cost.write_bps;
    tl.events.push_back(
        {TimelineEvent::Kind::kTransfer, drain, drain + dur, "offload p" + std::to_string(p)});
    drain += dur;
    tl.transfer_s += dur;
  }
  channel_free = drain;
  tl.span_s = std::max(compute_clock, channel_free);
  return tl;
}

namespace {

std::vector<std::byte> partition_to_bytes(const EmbeddingPartition& part) {
  const std::size_t half = part.embeddings.size() * sizeof(float);
  std::vector<std::byte> bytes(2 * half);
  std::memcpy(bytes.data(), part.embeddings.data(), half);
  std::memcpy(bytes.data() + half, part.opt_states.data(), half);
  return bytes;
}

EmbeddingPartition partition_from_bytes(std::span<const std::byte> bytes, PartitionId id,
                                        std::uint32_t dim, std::uint64_t node_count) {
  EmbeddingPartition part;
  part.id = id;
  part.dim = dim;
  part.node_count = node_count;
  const std::size_t rows = node_count * dim;
  part.embeddings.resize(rows);
  part.opt_states.resize(rows);
  std::memcpy(part.embeddings.data(), bytes.data(), rows * sizeof(float));
  std::memcpy(part.opt_states.data(), bytes.data() + rows * sizeof(float), rows * sizeof(float));
  return part;
}

void merge_transfer(nvme::TransferReport& into, const nvme::TransferReport& from) {
  into.commands += from.commands;
  into.batches += from.batches;
  into.sq_rings += from.sq_rings;
  into.cq_rings += from.cq_rings;
  into.lock_events += from.lock_events;
  into.bytes += from.bytes;
  if (into.per_queue_pages.size() < from.per_queue_pages.size()) {
    into.per_queue_pages.resize(from.per_queue_pages.size(), 0);
    into.per_queue_rings.resize(from.per_queue_rings.size(), 0);
    into.queue_count = from.queue_count;
  }
  for (std::size_t q = 0; q < from.per_queue_pages.size(); ++q) {
    into.per_queue_pages[q] += from.per_queue_pages[q];
    into.per_queue_rings[q] += from.per_queue_rings[q];
  }
}

}  // namespace

EpochResult run_epoch(const IterationPlan& plan, EmbeddingStore& store, const Graph& graph,
                      const PartitionPlan& parts, const ScoreModel& model, const CostModel& cost,
                      EpochMode mode, const TrainOptions& train, bool prefetch) {
  const auto wall_start = std::chrono::steady_clock::now();
  cost.validate();
  model.validate();
  const std::uint32_t n = plan.buffer_seq.n;
  if (parts.n != n || store.n() != n) {
    throw std::invalid_argument("plan, partition plan and store disagree on partition count");
  }
  if (model.dim != store.dim()) {
    throw std::invalid_argument("model dimension does not match the store");
  }
  if (model.uses_relations() && store.num_relations() == 0) {
    throw std::invalid_argument("typed model on a store without relation embeddings");
  }

  std::vector<std::uint64_t> bucket_sizes(static_cast<std::size_t>(n) * n, 0);
  for (PartitionId i = 0; i < n; ++i) {
    for (PartitionId j = 0; j < n; ++j) {
      bucket_sizes[static_cast<std::size_t>(i) * n + j] = parts.bucket_size(i, j);
    }
  }
  std::vector<double> part_bytes(n, 0.0);
  for (PartitionId p = 0; p < n; ++p) part_bytes[p] = static_cast<double>(store.partition_bytes(p));

  EpochResult result;
  result.timeline = simulate_epoch_timeline(plan, bucket_sizes, part_bytes, cost, prefetch);

  const nvme::AccessStrategy strategy;  // batch enqueue + coalesced + batch polling
  auto load_via_nvme = [&](PartitionId p, ResidentTable& table) {
    const std::uint64_t bytes = store.partition_bytes(p);
    const std::uint64_t pages = (bytes + cost.queue.page_size - 1) / cost.queue.page_size;
    std::vector<std::byte> buffer(pages * cost.queue.page_size);
    nvme::BackingFile file(store.partition_path(p), bytes);
    const auto rep = nvme::transfer_partition(
        file, 0, bytes, nvme::Direction::kLoad, buffer, strategy, cost.queue, cost.queue_count,
        cost.workers_per_queue, derive_seed(train.seed, 0x6c6f6164ull, train.epoch, p));
    merge_transfer(result.transfers, rep);
    table.add_partition(
        partition_from_bytes(buffer, p, store.dim(), store.part_node_count(p)),
        store.part_begin(p));
  };
  auto offload_via_nvme = [&](PartitionId p, ResidentTable& table) {
    EmbeddingPartition part = table.take_partition(p);
    const auto bytes_vec = partition_to_bytes(part);
    const std::uint64_t bytes = bytes_vec.size();
    const std::uint64_t pages = (bytes + cost.queue.page_size - 1) / cost.queue.page_size;
    std::vector<std::byte> buffer(pages * cost.queue.page_size);
    std::memcpy(buffer.data(), bytes_vec.data(), bytes);
    nvme::BackingFile file(store.partition_path(p), bytes);
    const auto rep = nvme::transfer_partition(
        file, 0, bytes, nvme::Direction::kOffload, buffer, strategy, cost.queue, cost.queue_count,
        cost.workers_per_queue, derive_seed(train.seed, 0x73746f72ull, train.epoch, p));
    merge_transfer(result.transfers, rep);
  };

  const auto& seq = plan.buffer_seq;
  if (mode == EpochMode::kRealTrain) {
    ResidentTable table(store.dim());
    for (PartitionId p : seq.states[0]) load_via_nvme(p, table);
    table.set_relations(store.load_relations());

    const AdagradHyper hyper{train.learning_rate, train.adagrad_epsilon};
    // The wall-clock execution swaps at state boundaries; the overlap with the
    // window buckets is a modeled-time property carried by the timeline.
    std::size_t state = 0;
    for (std::size_t g = 0; g < plan.bucket_order.size(); ++g) {
      while (state + 1 < seq.states.size() && g >= plan.state_offsets[state + 1]) {
        offload_via_nvme(seq.swaps[state].evicted, table);
        load_via_nvme(seq.swaps[state].loaded, table);
        ++state;
      }

      const auto [bi, bj] = plan.bucket_order[g];
      const auto edge_ids = parts.bucket(bi, bj);
      if (edge_ids.empty()) continue;

      std::vector<Edge> edges;
      edges.reserve(edge_ids.size());
      for (std::uint64_t idx : edge_ids) edges.push_back(graph.edges[idx]);
      Rng rng(derive_seed(train.seed, 0x62756b74ull, train.epoch, g));
      if (train.shuffle) {
        for (std::size_t i = edges.size(); i > 1; --i) {
          std::swap(edges[i - 1], edges[rng.next_below(i)]);
        }
      }

      for (std::size_t off = 0; off < edges.size(); off += train.batch_size) {
        const std::size_t count = std::min<std::size_t>(train.batch_size, edges.size() - off);
        TrainBatch batch;
        batch.positives.assign(edges.begin() + off, edges.begin() + off + count);
        batch.negatives_per_positive = train.negatives;
        batch.negative_dst = sample_negatives(table, train.negatives, count, rng);
        result.loss_sum += batch_loss(model, batch, table);
        const GradientSet grads = batch_gradients(model, batch, table);
        adagrad_step(table, grads, hyper);
      }
      result.edges_trained += edges.size();
      ++result.buckets_trained;
    }
    while (state + 1 < seq.states.size()) {
      offload_via_nvme(seq.swaps[state].evicted, table);
      load_via_nvme(seq.swaps[state].loaded, table);
      ++state;
    }
    for (PartitionId p : seq.states.back()) offload_via_nvme(p, table);
    store.save_relations(table.relations());
  } else {
    for (std::uint64_t size : bucket_sizes) result.edges_trained += size;
    result.buckets_trained = bucket_sizes.size();
  }

  result.loss_per_edge =
      result.edges_trained > 0 ? result.loss_sum / static_cast<double>(result.edges_trained) : 0.0;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return result;
}

}  // namespace legend
