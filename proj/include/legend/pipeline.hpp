#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "legend/graph.hpp"
#include "legend/nvme_sim.hpp"
#include "legend/ordering.hpp"
#include "legend/store.hpp"
#include "legend/train.hpp"

namespace legend {

// Cost model of the modeled hardware: t seconds of compute per edge, w/r
// write/read throughput between buffer and storage tier, M buffer bytes.
struct CostModel {
  double seconds_per_edge = 1e-7;  // t
  double write_bps = 2e9;          // w
  double read_bps = 3e9;           // r
  double buffer_bytes = 15e9;      // M
  std::uint32_t dim = 100;

  nvme::QueueConfig queue;
  std::uint32_t queue_count = 8;
  std::uint32_t workers_per_queue = 32;
  nvme::CostModel nvme_cost;

  void validate() const;
};

struct Theorem3Report {
  double lhs = 0.0;  // |E| / |V|^2
  double rhs = 0.0;  // 96 d^2 / (M t (w + r))
  bool covered = false;
};

Theorem3Report theorem3_check(std::uint64_t num_edges, std::uint64_t num_nodes,
                              const CostModel& cost);

struct TimelineEvent {
  enum class Kind { kCompute, kTransfer, kStall };
  Kind kind = Kind::kCompute;
  double start = 0.0;
  double end = 0.0;
  std::string label;
};

struct OverlapTimeline {
  std::vector<TimelineEvent> events;
  double compute_s = 0.0;
  double transfer_s = 0.0;
  double stall_s = 0.0;  // compute-track gaps after the initial fill
  double fill_s = 0.0;
  double span_s = 0.0;

  double utilization() const {
    const double busy = compute_s + stall_s;
    return busy > 0.0 ? compute_s / busy : 1.0;
  }
};

std::string timeline_to_csv(const OverlapTimeline& timeline);

struct UtilizationReport {
  double utilization = 0.0;
  double duty_cycle = 0.0;  // compute over full span
  double compute_s = 0.0;
  double transfer_s = 0.0;
  double stall_s = 0.0;
  std::vector<std::pair<std::uint32_t, double>> stall_by_state;
};

UtilizationReport utilization_report(const OverlapTimeline& timeline);

// Discrete-event replay of one epoch over explicit bucket sizes: compute
// events in plan order, swaps issued at the prefetch points (or, without
// prefetching, only when a state has fully finished), stalls whenever the
// next bucket waits on an in-flight partition. bucket_sizes has n*n entries
// indexed src_partition * n + dst_partition; partition_bytes one entry per
// partition (embeddings plus optimizer state).
OverlapTimeline simulate_epoch_timeline(const IterationPlan& plan,
                                        std::span<const std::uint64_t> bucket_sizes,
                                        std::span<const double> partition_bytes,
                                        const CostModel& cost, bool prefetch);

enum class EpochMode { kCostOnly, kRealTrain };

struct TrainOptions {
  double learning_rate = 0.1;
  double adagrad_epsilon = 1e-10;
  std::uint32_t batch_size = 100000;
  std::uint32_t negatives = 16;
  bool shuffle = true;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;  // folded into per-bucket RNG streams
};

struct EpochResult {
  OverlapTimeline timeline;
  double loss_sum = 0.0;
  double loss_per_edge = 0.0;
  std::uint64_t edges_trained = 0;
  std::uint64_t buckets_trained = 0;
  nvme::TransferReport transfers;  // aggregated counters
  double wall_seconds = 0.0;       // measured, console reporting only
};

// Runs one epoch through the iteration plan. Real-train mode moves partitions
// through the simulated NVMe tier, trains every bucket, and writes all
// partitions back; cost-only mode replays the same schedule without numerics
// or I/O. The timeline always carries modeled durations.
EpochResult run_epoch(const IterationPlan& plan, EmbeddingStore& store, const Graph& graph,
                      const PartitionPlan& parts, const ScoreModel& model, const CostModel& cost,
                      EpochMode mode, const TrainOptions& train, bool prefetch = true);

}  // namespace legend
