#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "legend/graph.hpp"
#include "legend/rng.hpp"
#include "legend/store.hpp"

namespace legend {

enum class ScoreKind { kDot, kDistMult, kComplEx };

// ComplEx uses the half-split encoding: the first dim/2 entries are real
// parts, the last dim/2 imaginary parts, so dim must be even.
struct ScoreModel {
  ScoreKind kind = ScoreKind::kDot;
  std::uint32_t dim = 0;

  void validate() const;
  bool uses_relations() const { return kind != ScoreKind::kDot; }
};

ScoreKind score_kind_from_name(const std::string& name);
const char* score_kind_name(ScoreKind kind);

// f(s, r, d). rel must be empty for the dot model and dim-sized otherwise.
double score(const ScoreModel& model, std::span<const float> src, std::span<const float> rel,
             std::span<const float> dst);

// Embeddings and optimizer state of the partitions currently in the fast
// tier, plus the always-resident relation table.
class ResidentTable {
 public:
  explicit ResidentTable(std::uint32_t dim) : dim_(dim) {}

  void add_partition(EmbeddingPartition part, std::uint64_t first_node);
  EmbeddingPartition take_partition(PartitionId id);
  bool has_partition(PartitionId id) const;
  void set_relations(RelationTable rels);

  std::uint32_t dim() const { return dim_; }
  bool has_node(NodeId node) const;
  std::span<float> node_embedding(NodeId node);
  std::span<const float> node_embedding(NodeId node) const;
  std::span<float> node_acc(NodeId node);
  std::span<float> rel_embedding(RelId rel);
  std::span<const float> rel_embedding(RelId rel) const;
  std::span<float> rel_acc(RelId rel);
  RelationTable& relations() { return relations_; }
  const RelationTable& relations() const { return relations_; }

  std::uint64_t resident_node_count() const;
  NodeId resident_node_at(std::uint64_t index) const;  // index over all resident nodes

 private:
  struct Entry {
    std::uint64_t first_node = 0;
    EmbeddingPartition part;
  };
  const Entry& entry_for(NodeId node) const;

  std::uint32_t dim_;
  std::vector<Entry> entries_;  // sorted by first_node
  RelationTable relations_;
};

// One training batch with the reusable intermediate results of its last loss
// evaluation: IR1 = s (x) r rows, IR2 = IR1 (.) d rows, IR3 = shifted
// exponentials of the negative scores.
struct TrainBatch {
  std::vector<Edge> positives;
  std::uint32_t negatives_per_positive = 0;
  std::vector<NodeId> negative_dst;  // positives.size() * negatives_per_positive

  // 64-bit scratch populated by batch_loss.
  std::vector<double> ir1;
  std::vector<double> ir2;
  std::vector<double> ir3;
  std::vector<double> ir3_rowsum;
  std::vector<double> neg_rowmax;
  std::vector<double> pos_scores;

  std::uint64_t version = 0;
  std::uint64_t ir_version = ~0ull;

  // Callers that mutate edges or negatives after a loss evaluation must mark
  // the batch dirty; gradients refuse to run on stale intermediates.
  void mark_dirty() { ++version; }
  bool irs_fresh() const { return ir_version == version; }
};

// Contrastive loss, summed over positives: -sum_p (f(pos_p) - logsumexp_j
// f(neg_pj)), with the log-sum-exp shifted by the row maximum.
double batch_loss(const ScoreModel& model, TrainBatch& batch, const ResidentTable& table);

struct GradientSet {
  std::uint32_t dim = 0;
  std::vector<std::pair<NodeId, std::vector<double>>> nodes;  // sorted by id
  std::vector<std::pair<RelId, std::vector<double>>> rels;    // sorted by id
};

// Analytic gradients of batch_loss for every touched row, reusing IR1/IR3.
// Requires a fresh batch_loss evaluation on this exact batch.
GradientSet batch_gradients(const ScoreModel& model, const TrainBatch& batch,
                            const ResidentTable& table);

struct AdagradHyper {
  double learning_rate = 0.1;
  double epsilon = 1e-10;
};

void adagrad_update(std::span<float> theta, std::span<float> acc, std::span<const double> grad,
                    const AdagradHyper& hyper);

void adagrad_step(ResidentTable& table, const GradientSet& grads, const AdagradHyper& hyper);

// k destination corruptions per positive, uniform over the resident nodes.
std::vector<NodeId> sample_negatives(const ResidentTable& table, std::uint32_t k,
                                     std::size_t num_positives, Rng& rng);

struct EvalOptions {
  std::uint32_t hits_k = 10;
  std::uint32_t num_candidates = 999;
  std::uint64_t seed = 0;
};

struct EvalResult {
  double mrr = 0.0;
  double hits_at_k = 0.0;
  std::uint64_t edges = 0;
};

// Unfiltered ranking of each test edge against sampled destination
// corruptions; ties rank pessimistically (the true edge last among equals).
EvalResult evaluate(const ScoreModel& model, const ResidentTable& table,
                    std::span<const Edge> test_edges, const EvalOptions& options);
EvalResult evaluate(const ScoreModel& model, const EmbeddingStore& store,
                    std::span<const Edge> test_edges, const EvalOptions& options);

// Expected MRR of uniformly random ranks over c+1 places: H(c+1)/(c+1).
double random_rank_mrr(std::uint32_t num_candidates);

}  // namespace legend
