#include "legend/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace legend {

void ScoreModel::validate() const {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (kind == ScoreKind::kComplEx && dim % 2 != 0) {
    throw std::invalid_argument("complex model requires an even dimension");
  }
}

ScoreKind score_kind_from_name(const std::string& name) {
  if (name == "dot") return ScoreKind::kDot;
  if (name == "distmult") return ScoreKind::kDistMult;
  if (name == "complex") return ScoreKind::kComplEx;
  throw std::invalid_argument("unknown score model: " + name);
}

const char* score_kind_name(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kDot: return "dot";
    case ScoreKind::kDistMult: return "distmult";
    case ScoreKind::kComplEx: return "complex";
  }
  return "?";
}

namespace {

// IR1 = s (x) r under the model's operator; for every supported model the
// score is then a plain dot product of IR1 with the destination row (ComplEx
// folds the conjugation into that dot product).
void combine_src_rel(const ScoreModel& model, std::span<const float> src,
                     std::span<const float> rel, std::span<double> out) {
  const std::size_t d = model.dim;
  switch (model.kind) {
    case ScoreKind::kDot:
      for (std::size_t i = 0; i < d; ++i) out[i] = src[i];
      break;
    case ScoreKind::kDistMult:
      for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<double>(src[i]) * rel[i];
      break;
    case ScoreKind::kComplEx: {
      const std::size_t h = d / 2;
      for (std::size_t i = 0; i < h; ++i) {
        const double sr = src[i], si = src[i + h];
        const double rr = rel[i], ri = rel[i + h];
        out[i] = sr * rr - si * ri;
        out[i + h] = sr * ri + si * rr;
      }
      break;
    }
  }
}

// Gradient of the score w.r.t. the source row is linear in the destination;
// this applies the adjoint of (x) r to an accumulated destination vector.
// The same form with s in place of r gives the relation gradient.
void adjoint_combine(const ScoreModel& model, std::span<const float> other,
                     std::span<const double> mix, std::span<double> out) {
  const std::size_t d = model.dim;
  switch (model.kind) {
    case ScoreKind::kDot:
      for (std::size_t i = 0; i < d; ++i) out[i] += mix[i];
      break;
    case ScoreKind::kDistMult:
      for (std::size_t i = 0; i < d; ++i) out[i] += static_cast<double>(other[i]) * mix[i];
      break;
    case ScoreKind::kComplEx: {
      const std::size_t h = d / 2;
      for (std::size_t i = 0; i < h; ++i) {
        const double orr = other[i], ori = other[i + h];
        out[i] += orr * mix[i] + ori * mix[i + h];
        out[i + h] += orr * mix[i + h] - ori * mix[i];
      }
      break;
    }
  }
}

void check_row(std::span<const float> row, std::uint32_t dim, const char* what) {
  if (row.size() != dim) {
    throw std::invalid_argument(std::string(what) + " has wrong dimension");
  }
}

}  // namespace

double score(const ScoreModel& model, std::span<const float> src, std::span<const float> rel,
             std::span<const float> dst) {
  model.validate();
  check_row(src, model.dim, "source row");
  check_row(dst, model.dim, "destination row");
  if (model.uses_relations()) {
    check_row(rel, model.dim, "relation row");
  } else if (!rel.empty()) {
    throw std::invalid_argument("dot model takes no relation row");
  }
  std::vector<double> ir1(model.dim);
  combine_src_rel(model, src, rel, ir1);
  double acc = 0.0;
  for (std::uint32_t i = 0; i < model.dim; ++i) acc += ir1[i] * dst[i];
  return acc;
}

void ResidentTable::add_partition(EmbeddingPartition part, std::uint64_t first_node) {
  if (part.dim != dim_) throw std::invalid_argument("partition dimension mismatch");
  Entry e{first_node, std::move(part)};
  const auto pos = std::lower_bound(
      entries_.begin(), entries_.end(), first_node,
      [](const Entry& entry, std::uint64_t key) { return entry.first_node < key; });
  entries_.insert(pos, std::move(e));
}

EmbeddingPartition ResidentTable::take_partition(PartitionId id) {
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->part.id == id) {
      EmbeddingPartition part = std::move(it->part);
      entries_.erase(it);
      return part;
    }
  }
  throw std::invalid_argument("partition not resident: " + std::to_string(id));
}

bool ResidentTable::has_partition(PartitionId id) const {
  for (const auto& e : entries_) {
    if (e.part.id == id) return true;
  }
  return false;
}

void ResidentTable::set_relations(RelationTable rels) {
  if (rels.count > 0 && rels.dim != dim_) {
    throw std::invalid_argument("relation table dimension mismatch");
  }
  relations_ = std::move(rels);
}

bool ResidentTable::has_node(NodeId node) const {
  for (const auto& e : entries_) {
    if (node >= e.first_node && node < e.first_node + e.part.node_count) return true;
  }
  return false;
}

const ResidentTable::Entry& ResidentTable::entry_for(NodeId node) const {
  for (const auto& e : entries_) {
    if (node >= e.first_node && node < e.first_node + e.part.node_count) return e;
  }
  throw std::out_of_range("node " + std::to_string(node) + " is not resident");
}

std::span<float> ResidentTable::node_embedding(NodeId node) {
  auto& e = const_cast<Entry&>(entry_for(node));
  return {e.part.embeddings.data() + (node - e.first_node) * dim_, dim_};
}

std::span<const float> ResidentTable::node_embedding(NodeId node) const {
  const auto& e = entry_for(node);
  return {e.part.embeddings.data() + (node - e.first_node) * dim_, dim_};
}

std::span<float> ResidentTable::node_acc(NodeId node) {
  auto& e = const_cast<Entry&>(entry_for(node));
  return {e.part.opt_states.data() + (node - e.first_node) * dim_, dim_};
}

std::span<float> ResidentTable::rel_embedding(RelId rel) {
  if (rel >= relations_.count) throw std::out_of_range("relation id out of range");
  return {relations_.embeddings.data() + static_cast<std::size_t>(rel) * dim_, dim_};
}

std::span<const float> ResidentTable::rel_embedding(RelId rel) const {
  if (rel >= relations_.count) throw std::out_of_range("relation id out of range");
  return {relations_.embeddings.data() + static_cast<std::size_t>(rel) * dim_, dim_};
}

std::span<float> ResidentTable::rel_acc(RelId rel) {
  if (rel >= relations_.count) throw std::out_of_range("relation id out of range");
  return {relations_.opt_states.data() + static_cast<std::size_t>(rel) * dim_, dim_};
}

std::uint64_t ResidentTable::resident_node_count() const {
  std::uint64_t total = 0;
  for (const auto& e : entries_) total += e.part.node_count;
  return total;
}

NodeId ResidentTable::resident_node_at(std::uint64_t index) const {
  for (const auto& e : entries_) {
    if (index < e.part.node_count) return static_cast<NodeId>(e.first_node + index);
    index -= e.part.node_count;
  }
  throw std::out_of_range("resident node index out of range");
}

namespace {

std::span<const float> rel_row_or_empty(const ScoreModel& model, const ResidentTable& table,
                                        RelId rel) {
  if (!model.uses_relations()) return {};
  if (rel == kNoRelation) {
    throw std::invalid_argument("typed model requires a relation id on every edge");
  }
  return table.rel_embedding(rel);
}

}  // namespace

double batch_loss(const ScoreModel& model, TrainBatch& batch, const ResidentTable& table) {
  model.validate();
  if (batch.negatives_per_positive == 0) {
    throw std::invalid_argument("at least one negative per positive required");
  }
  const std::size_t P = batch.positives.size();
  const std::size_t k = batch.negatives_per_positive;
  if (batch.negative_dst.size() != P * k) {
    throw std::invalid_argument("negative list does not match positives * k");
  }
  const std::size_t d = model.dim;

  batch.ir1.assign(P * d, 0.0);
  batch.ir2.assign(P * d, 0.0);
  batch.ir3.assign(P * k, 0.0);
  batch.ir3_rowsum.assign(P, 0.0);
  batch.neg_rowmax.assign(P, 0.0);
  batch.pos_scores.assign(P, 0.0);

  double loss = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    const Edge& e = batch.positives[p];
    const auto src = table.node_embedding(e.src);
    const auto dst = table.node_embedding(e.dst);
    const auto rel = rel_row_or_empty(model, table, e.rel);

    std::span<double> ir1_row(batch.ir1.data() + p * d, d);
    combine_src_rel(model, src, rel, ir1_row);

    double pos = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double term = ir1_row[i] * dst[i];
      batch.ir2[p * d + i] = term;
      pos += term;
    }
    batch.pos_scores[p] = pos;

    // Negative scores share IR1; keep the shifted exponentials for gradient
    // reuse.
    double row_max = -std::numeric_limits<double>::infinity();
    std::vector<double> neg_scores(k);
    for (std::size_t j = 0; j < k; ++j) {
      const auto neg = table.node_embedding(batch.negative_dst[p * k + j]);
      double f = 0.0;
      for (std::size_t i = 0; i < d; ++i) f += ir1_row[i] * neg[i];
      neg_scores[j] = f;
      row_max = std::max(row_max, f);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double ex = std::exp(neg_scores[j] - row_max);
      batch.ir3[p * k + j] = ex;
      sum += ex;
    }
    batch.ir3_rowsum[p] = sum;
    batch.neg_rowmax[p] = row_max;

    loss += -(pos - (row_max + std::log(sum)));
  }
  batch.ir_version = batch.version;
  return loss;
}

GradientSet batch_gradients(const ScoreModel& model, const TrainBatch& batch,
                            const ResidentTable& table) {
  model.validate();
  if (!batch.irs_fresh()) {
    throw std::logic_error("stale intermediate results: evaluate batch_loss first");
  }
  const std::size_t P = batch.positives.size();
  const std::size_t k = batch.negatives_per_positive;
  const std::size_t d = model.dim;

  std::map<NodeId, std::vector<double>> node_grads;
  std::map<RelId, std::vector<double>> rel_grads;
  auto node_grad = [&](NodeId id) -> std::vector<double>& {
    auto [it, inserted] = node_grads.try_emplace(id);
    if (inserted) it->second.assign(d, 0.0);
    return it->second;
  };

  std::vector<double> mix(d);
  for (std::size_t p = 0; p < P; ++p) {
    const Edge& e = batch.positives[p];
    std::span<const double> ir1_row(batch.ir1.data() + p * d, d);
    const double inv_sum = 1.0 / batch.ir3_rowsum[p];

    // dL/d(dst): -IR1 for the positive, softmax-weighted +IR1 for negatives;
    // mix accumulates sum_j w_j * neg_j - dst for the source/relation side.
    {
      auto& g = node_grad(e.dst);
      const auto dst = table.node_embedding(e.dst);
      for (std::size_t i = 0; i < d; ++i) {
        g[i] -= ir1_row[i];
        mix[i] = -static_cast<double>(dst[i]);
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      const NodeId neg_id = batch.negative_dst[p * k + j];
      const double w = batch.ir3[p * k + j] * inv_sum;
      auto& g = node_grad(neg_id);
      const auto neg = table.node_embedding(neg_id);
      for (std::size_t i = 0; i < d; ++i) {
        g[i] += w * ir1_row[i];
        mix[i] += w * neg[i];
      }
    }

    const auto src = table.node_embedding(e.src);
    const auto rel = rel_row_or_empty(model, table, e.rel);
    adjoint_combine(model, rel, mix, node_grad(e.src));
    if (model.uses_relations()) {
      auto [it, inserted] = rel_grads.try_emplace(e.rel);
      if (inserted) it->second.assign(d, 0.0);
      adjoint_combine(model, src, mix, it->second);
    }
  }

  GradientSet out;
  out.dim = static_cast<std::uint32_t>(d);
  out.nodes.assign(node_grads.begin(), node_grads.end());
  out.rels.assign(rel_grads.begin(), rel_grads.end());
  return out;
}

void adagrad_update(std::span<float> theta, std::span<float> acc, std::span<const double> grad,
                    const AdagradHyper& hyper) {
  if (theta.size() != acc.size() || theta.size() != grad.size()) {
    throw std::invalid_argument("adagrad shapes must match");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    const double a = static_cast<double>(acc[i]) + g * g;
    acc[i] = static_cast<float>(a);
    theta[i] = static_cast<float>(static_cast<double>(theta[i]) -
                                  hyper.learning_rate * g / (std::sqrt(a) + hyper.epsilon));
  }
}

void adagrad_step(ResidentTable& table, const GradientSet& grads, const AdagradHyper& hyper) {
  for (const auto& [node, grad] : grads.nodes) {
    adagrad_update(table.node_embedding(node), table.node_acc(node), grad, hyper);
  }
  for (const auto& [rel, grad] : grads.rels) {
    adagrad_update(table.rel_embedding(rel), table.rel_acc(rel), grad, hyper);
  }
}

std::vector<NodeId> sample_negatives(const ResidentTable& table, std::uint32_t k,
                                     std::size_t num_positives, Rng& rng) {
  if (k == 0) throw std::invalid_argument("at least one negative per positive required");
  const std::uint64_t total = table.resident_node_count();
  if (total == 0) throw std::invalid_argument("no resident nodes to sample from");
  std::vector<NodeId> out(num_positives * k);
  for (auto& id : out) id = table.resident_node_at(rng.next_below(total));
  return out;
}

EvalResult evaluate(const ScoreModel& model, const ResidentTable& table,
                    std::span<const Edge> test_edges, const EvalOptions& options) {
  model.validate();
  if (test_edges.empty()) throw std::invalid_argument("test edge set is empty");
  if (options.num_candidates == 0) throw std::invalid_argument("need at least one candidate");

  const std::uint64_t num_nodes = table.resident_node_count();
  const std::size_t d = model.dim;
  std::vector<double> ir1(d);

  EvalResult result;
  result.edges = test_edges.size();
  for (std::size_t t = 0; t < test_edges.size(); ++t) {
    const Edge& e = test_edges[t];
    const auto rel = rel_row_or_empty(model, table, e.rel);
    combine_src_rel(model, table.node_embedding(e.src), rel, ir1);
    auto score_of = [&](NodeId dst) {
      const auto row = table.node_embedding(dst);
      double f = 0.0;
      for (std::size_t i = 0; i < d; ++i) f += ir1[i] * row[i];
      return f;
    };
    const double true_score = score_of(e.dst);

    Rng rng(derive_seed(options.seed, 0x65766179ull, t));
    std::uint64_t beaten_or_tied = 0;
    for (std::uint32_t c = 0; c < options.num_candidates; ++c) {
      const NodeId cand = table.resident_node_at(rng.next_below(num_nodes));
      if (score_of(cand) >= true_score) ++beaten_or_tied;
    }
    const std::uint64_t rank = 1 + beaten_or_tied;
    result.mrr += 1.0 / static_cast<double>(rank);
    result.hits_at_k += rank <= options.hits_k ? 1.0 : 0.0;
  }
  result.mrr /= static_cast<double>(test_edges.size());
  result.hits_at_k /= static_cast<double>(test_edges.size());
  return result;
}

EvalResult evaluate(const ScoreModel& model, const EmbeddingStore& store,
                    std::span<const Edge> test_edges, const EvalOptions& options) {
  ResidentTable table(store.dim());
  for (PartitionId p = 0; p < store.n(); ++p) {
    table.add_partition(store.load_partition(p), store.part_begin(p));
  }
  table.set_relations(store.load_relations());
  return evaluate(model, table, test_edges, options);
}

double random_rank_mrr(std::uint32_t num_candidates) {
  const std::uint32_t places = num_candidates + 1;
  double h = 0.0;
  for (std::uint32_t r = 1; r <= places; ++r) h += 1.0 / r;
  return h / places;
}

}  // namespace legend
