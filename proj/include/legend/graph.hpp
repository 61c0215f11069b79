#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace legend {

using NodeId = std::uint32_t;
using RelId = std::uint32_t;
using PartitionId = std::uint32_t;

inline constexpr RelId kNoRelation = 0xffffffffu;

struct Edge {
  NodeId src = 0;
  RelId rel = kNoRelation;
  NodeId dst = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Multi-relation edge list. num_relations == 0 means the graph is untyped and
// every edge carries rel == kNoRelation.
struct Graph {
  std::uint64_t num_nodes = 0;
  std::uint64_t num_relations = 0;
  std::vector<Edge> edges;

  bool typed() const { return num_relations > 0; }
};

enum class EdgeFileFormat { kTriples, kPairs };

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IngestOptions {
  // Raw ids are taken as-is by default (num_nodes = max id + 1). When set,
  // sparse ids are remapped to dense contiguous ids in first-appearance order.
  bool remap_ids = false;
};

// Reads a TSV edge list: one edge per line, 2 or 3 decimal integer columns,
// '#'-prefixed lines skipped. Throws ParseError with the offending line number
// on malformed input and on empty edge lists.
Graph ingest(const std::filesystem::path& path, EdgeFileFormat format,
             const IngestOptions& options = {});

// Node partitions are contiguous id ranges of ceil(num_nodes / n) nodes; the
// last partition takes the remainder. Edge positions are grouped by bucket
// (src partition, dst partition) preserving ingestion order within a bucket.
struct PartitionPlan {
  std::uint32_t n = 0;
  std::uint64_t num_nodes = 0;
  std::uint64_t stride = 0;
  std::vector<std::uint64_t> bucket_offsets;  // n*n + 1 prefix sums
  std::vector<std::uint64_t> edge_order;      // edge indices grouped by bucket

  PartitionId partition_of(NodeId v) const { return static_cast<PartitionId>(v / stride); }

  std::uint64_t part_begin(PartitionId p) const { return stride * p; }
  std::uint64_t part_end(PartitionId p) const {
    const std::uint64_t end = stride * (p + 1);
    return end < num_nodes ? end : num_nodes;
  }
  std::uint64_t part_node_count(PartitionId p) const { return part_end(p) - part_begin(p); }

  std::uint64_t bucket_size(PartitionId i, PartitionId j) const {
    const std::size_t b = static_cast<std::size_t>(i) * n + j;
    return bucket_offsets[b + 1] - bucket_offsets[b];
  }
  std::span<const std::uint64_t> bucket(PartitionId i, PartitionId j) const {
    const std::size_t b = static_cast<std::size_t>(i) * n + j;
    return {edge_order.data() + bucket_offsets[b], edge_order.data() + bucket_offsets[b + 1]};
  }
};

PartitionPlan make_partition_plan(const Graph& g, std::uint32_t n);

// Binary edge cache written by the ingest step and consumed by later stages:
// edges.bin (little-endian u32 src,rel,dst per edge) plus graph_meta.json.
void write_graph(const Graph& g, const std::filesystem::path& dir);
Graph read_graph(const std::filesystem::path& dir);

}  // namespace legend
