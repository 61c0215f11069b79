// Test-only reference implementations, independent of the library's
// combine/adjoint evaluation path. Shared by the unit tests and the
// acceptance suite.
#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "legend/rng.hpp"
#include "legend/train.hpp"

namespace legend::testing {

inline double naive_score(const ScoreModel& model, std::span<const float> s,
                          std::span<const float> r, std::span<const float> d) {
  const std::size_t dim = model.dim;
  switch (model.kind) {
    case ScoreKind::kDot: {
      double acc = 0;
      for (std::size_t i = 0; i < dim; ++i) acc += double(s[i]) * d[i];
      return acc;
    }
    case ScoreKind::kDistMult: {
      double acc = 0;
      for (std::size_t i = 0; i < dim; ++i) acc += double(s[i]) * r[i] * d[i];
      return acc;
    }
    case ScoreKind::kComplEx: {
      const std::size_t h = dim / 2;
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < h; ++i) {
        const std::complex<double> cs(s[i], s[i + h]);
        const std::complex<double> cr(r[i], r[i + h]);
        const std::complex<double> cd(d[i], d[i + h]);
        acc += cs * cr * std::conj(cd);
      }
      return acc.real();
    }
  }
  return 0;
}

// Direct evaluation of the contrastive loss, no intermediate-result sharing.
inline double naive_batch_loss(const ScoreModel& model, const TrainBatch& batch,
                               const ResidentTable& table) {
  long double total = 0;
  const std::size_t k = batch.negatives_per_positive;
  for (std::size_t p = 0; p < batch.positives.size(); ++p) {
    const Edge& e = batch.positives[p];
    std::span<const float> rel =
        model.uses_relations() ? table.rel_embedding(e.rel) : std::span<const float>{};
    const double fpos =
        naive_score(model, table.node_embedding(e.src), rel, table.node_embedding(e.dst));
    long double sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double f = naive_score(model, table.node_embedding(e.src), rel,
                                   table.node_embedding(batch.negative_dst[p * k + j]));
      sum += std::exp(static_cast<long double>(f));
    }
    total += -(static_cast<long double>(fpos) - std::log(sum));
  }
  return static_cast<double>(total);
}

inline ResidentTable random_table(std::uint32_t dim, std::uint64_t nodes, std::uint64_t rels,
                                  std::uint64_t seed, double scale = 0.0) {
  if (scale == 0.0) scale = 0.5 / std::sqrt(double(dim));
  Rng rng(seed);
  ResidentTable table(dim);
  EmbeddingPartition part;
  part.id = 0;
  part.dim = dim;
  part.node_count = nodes;
  part.embeddings.resize(nodes * dim);
  part.opt_states.assign(nodes * dim, 0.0f);
  for (auto& v : part.embeddings) v = static_cast<float>(rng.uniform(-scale, scale));
  table.add_partition(std::move(part), 0);
  RelationTable rt;
  rt.dim = dim;
  rt.count = rels;
  rt.embeddings.resize(rels * dim);
  rt.opt_states.assign(rels * dim, 0.0f);
  for (auto& v : rt.embeddings) v = static_cast<float>(rng.uniform(-scale, scale));
  table.set_relations(std::move(rt));
  return table;
}

inline TrainBatch random_batch(const ScoreModel& model, std::uint64_t nodes, std::uint64_t rels,
                               std::uint32_t positives, std::uint32_t k, Rng& rng) {
  TrainBatch batch;
  batch.negatives_per_positive = k;
  for (std::uint32_t p = 0; p < positives; ++p) {
    Edge e;
    e.src = static_cast<NodeId>(rng.next_below(nodes));
    e.dst = static_cast<NodeId>(rng.next_below(nodes));
    e.rel = model.uses_relations() ? static_cast<RelId>(rng.next_below(rels)) : kNoRelation;
    batch.positives.push_back(e);
  }
  for (std::uint32_t i = 0; i < positives * k; ++i) {
    batch.negative_dst.push_back(static_cast<NodeId>(rng.next_below(nodes)));
  }
  return batch;
}

}  // namespace legend::testing
