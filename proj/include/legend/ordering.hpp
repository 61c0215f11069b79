#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "legend/graph.hpp"

namespace legend {

// Ordered buffer states of the 3-slot fast tier plus the swap that produces
// each state from its predecessor. The first state is the initial fill.
struct BufferStateSequence {
  std::uint32_t n = 0;
  std::vector<std::array<PartitionId, 3>> states;  // each sorted ascending

  struct Swap {
    PartitionId evicted = 0;
    PartitionId loaded = 0;

    friend bool operator==(const Swap&, const Swap&) = default;
  };
  std::vector<Swap> swaps;  // states.size() - 1 entries

  friend bool operator==(const BufferStateSequence&, const BufferStateSequence&) = default;
};

// I/O times under this artifact's calibrated convention: one count per buffer
// state, the initial fill included.
inline std::uint64_t io_times(const BufferStateSequence& seq) { return seq.states.size(); }

using Bucket = std::pair<PartitionId, PartitionId>;

// Full iteration schedule: every bucket exactly once, scheduled inside a state
// where both endpoints are resident. Within each state, buckets touching the
// next-evicted partition come first; prefetch_points[i] is the number of
// buckets that must complete before the swap out of state i may be issued.
struct IterationPlan {
  BufferStateSequence buffer_seq;
  std::vector<Bucket> bucket_order;          // n*n buckets
  std::vector<std::uint64_t> state_offsets;  // states.size() + 1 prefix into bucket_order
  std::vector<std::uint64_t> prefetch_points;  // states.size() - 1

  friend bool operator==(const IterationPlan&, const IterationPlan&) = default;
};

// Column-separation covering order. Deterministic for fixed n; requires n >= 4.
BufferStateSequence plan_loading_order(std::uint32_t n);

// Derives the bucket iteration order for a single-swap sequence that starts at
// {0,1,2} and first evicts partition 1 (the shape plan_loading_order emits).
IterationPlan plan_iteration_order(const BufferStateSequence& seq, std::uint32_t n);

struct PrefetchReport {
  bool ok = false;
  // Non-final states whose schedule leaves no bucket to compute while the
  // next swap is in flight.
  std::vector<std::uint32_t> violating_states;
  // Pairs co-resident in non-consecutive states (warning only; the loading
  // order does not enforce that property).
  std::vector<Bucket> nonconsecutive_pairs;
};

PrefetchReport verify_prefetchable(const IterationPlan& plan);

struct IoAccounting {
  std::uint64_t io_times = 0;
  double comm_volume = 0.0;  // same unit as total_size
};

IoAccounting io_accounting(const BufferStateSequence& seq, double total_size, std::uint32_t n);

// Exact minimum buffer-state count over all single-swap sequences covering all
// partition pairs, optionally restricted to sequences where a swapped-in
// partition is never evicted by the next swap. Exhaustive search; n <= 7.
struct OracleResult {
  std::uint32_t min_states = 0;
  BufferStateSequence witness;
};

OracleResult oracle_min_io(std::uint32_t n, bool require_property1);

// Canonical JSON form (keys: n, states, loads, bucket_order, prefetch_points,
// state_offsets). Identical plans serialize to identical bytes.
std::string plan_to_json(const IterationPlan& plan);
IterationPlan plan_from_json(const std::string& text);

}  // namespace legend
