#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "legend/graph.hpp"

namespace legend {

// One partition's embedding matrix followed by its optimizer-state matrix.
// Serialized as a single contiguous byte region (E block then S block) so a
// partition moves between tiers as one request.
struct EmbeddingPartition {
  PartitionId id = 0;
  std::uint32_t dim = 0;
  std::uint64_t node_count = 0;
  std::vector<float> embeddings;  // node_count x dim, row major
  std::vector<float> opt_states;  // same shape
};

// Relation embeddings use the same E||S binary layout in a single file; they
// live permanently in the resident tier during training.
struct RelationTable {
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::vector<float> embeddings;
  std::vector<float> opt_states;
};

inline std::uint64_t partition_file_bytes(std::uint64_t node_count, std::uint32_t dim) {
  return 2ull * node_count * dim * sizeof(float);
}

// File-backed SSD tier: part_<id>.bin per node partition, relations.bin for
// relation embeddings, store_meta.json sidecar. Safe for concurrent reads of
// distinct partitions; writes to a given partition are exclusive.
class EmbeddingStore {
 public:
  static EmbeddingStore create(const PartitionPlan& plan, std::uint32_t dim,
                               std::uint64_t num_relations, std::uint64_t seed,
                               const std::filesystem::path& dir);
  static EmbeddingStore open(const std::filesystem::path& dir);

  EmbeddingPartition load_partition(PartitionId id) const;
  void save_partition(const EmbeddingPartition& part) const;

  RelationTable load_relations() const;
  void save_relations(const RelationTable& rels) const;

  std::uint32_t n() const { return n_; }
  std::uint32_t dim() const { return dim_; }
  std::uint64_t num_nodes() const { return num_nodes_; }
  std::uint64_t num_relations() const { return num_relations_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stride() const { return stride_; }
  const std::filesystem::path& dir() const { return dir_; }

  std::uint64_t part_begin(PartitionId p) const { return stride_ * p; }
  std::uint64_t part_node_count(PartitionId p) const {
    const std::uint64_t end = std::min<std::uint64_t>(stride_ * (p + 1), num_nodes_);
    return end - stride_ * p;
  }
  std::uint64_t partition_bytes(PartitionId p) const {
    return partition_file_bytes(part_node_count(p), dim_);
  }
  std::filesystem::path partition_path(PartitionId p) const {
    return dir_ / ("part_" + std::to_string(p) + ".bin");
  }
  std::filesystem::path relations_path() const { return dir_ / "relations.bin"; }

 private:
  std::filesystem::path dir_;
  std::uint32_t n_ = 0;
  std::uint32_t dim_ = 0;
  std::uint64_t num_nodes_ = 0;
  std::uint64_t num_relations_ = 0;
  std::uint64_t stride_ = 0;
  std::uint64_t seed_ = 0;
};

}  // namespace legend
