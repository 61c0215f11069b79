#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "legend/rng.hpp"
#include "legend/train.hpp"
#include "reference_oracles.hpp"

using namespace legend;
using legend::testing::naive_batch_loss;
using legend::testing::naive_score;
using legend::testing::random_batch;
using legend::testing::random_table;

namespace {

ScoreModel model_of(ScoreKind kind, std::uint32_t dim) { return {kind, dim}; }

}  // namespace

TEST_CASE("score basics") {
  std::vector<float> unit = {1, 0, 0, 0};
  std::vector<float> other = {1, 0, 0, 0};
  CHECK(score(model_of(ScoreKind::kDot, 4), unit, {}, other) == doctest::Approx(1.0));

  Rng rng(5);
  std::vector<float> s(4), d(4), ones(4, 1.0f);
  for (auto& v : s) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : d) v = static_cast<float>(rng.uniform(-1, 1));
  // all-ones relation reduces DistMult to the dot product
  CHECK(score(model_of(ScoreKind::kDistMult, 4), s, ones, d) ==
        doctest::Approx(score(model_of(ScoreKind::kDot, 4), s, {}, d)));

  CHECK_THROWS_AS(score(model_of(ScoreKind::kComplEx, 5), s, ones, d), std::invalid_argument);
  std::vector<float> shorter(3);
  CHECK_THROWS_AS(score(model_of(ScoreKind::kDot, 4), shorter, {}, d), std::invalid_argument);
  CHECK_THROWS_AS(score(model_of(ScoreKind::kDot, 4), s, ones, d), std::invalid_argument);
}

TEST_CASE("complex score matches the complex-arithmetic reference") {
  Rng rng(17);
  const ScoreModel model = model_of(ScoreKind::kComplEx, 8);
  for (int t = 0; t < 1000; ++t) {
    std::vector<float> s(8), r(8), d(8);
    for (auto& v : s) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : r) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : d) v = static_cast<float>(rng.uniform(-1, 1));
    CHECK(score(model, s, r, d) == doctest::Approx(naive_score(model, s, r, d)).epsilon(1e-12));
  }
}

TEST_CASE("loss at zero scores") {
  ResidentTable table(4);
  EmbeddingPartition part;
  part.id = 0;
  part.dim = 4;
  part.node_count = 4;
  part.embeddings.assign(16, 0.0f);
  part.opt_states.assign(16, 0.0f);
  table.add_partition(std::move(part), 0);

  const ScoreModel model = model_of(ScoreKind::kDot, 4);
  TrainBatch batch;
  batch.positives = {{0, kNoRelation, 1}};
  batch.negatives_per_positive = 1;
  batch.negative_dst = {2};
  CHECK(batch_loss(model, batch, table) == doctest::Approx(0.0));

  batch.mark_dirty();
  batch.negatives_per_positive = 2;
  batch.negative_dst = {2, 3};
  CHECK(batch_loss(model, batch, table) == doctest::Approx(std::log(2.0)));

  // all-zero embeddings sit at the symmetric point: every gradient vanishes
  const GradientSet grads = batch_gradients(model, batch, table);
  for (const auto& [node, g] : grads.nodes) {
    for (double v : g) CHECK(v == doctest::Approx(0.0));
  }
}

TEST_CASE("reused intermediates equal the naive loss") {
  Rng rng(23);
  for (ScoreKind kind : {ScoreKind::kDot, ScoreKind::kDistMult, ScoreKind::kComplEx}) {
    const ScoreModel model = model_of(kind, 6);
    for (int t = 0; t < 30; ++t) {
      ResidentTable table = random_table(6, 20, 4, 100 + t, 1.0);
      TrainBatch batch = random_batch(model, 20, 4, 1 + t % 5, 1 + t % 4, rng);
      const double fast = batch_loss(model, batch, table);
      const double slow = naive_batch_loss(model, batch, table);
      CHECK(fast == doctest::Approx(slow).epsilon(1e-6));
    }
  }
}

TEST_CASE("log-sum-exp stays finite under large scores") {
  // scale 40 drives raw exp(f) far past double range when dim is large enough
  ResidentTable table = random_table(8, 10, 2, 77, 40.0);
  const ScoreModel model = model_of(ScoreKind::kDistMult, 8);
  Rng rng(3);
  TrainBatch batch = random_batch(model, 10, 2, 4, 4, rng);
  const double loss = batch_loss(model, batch, table);
  CHECK(std::isfinite(loss));
  const GradientSet grads = batch_gradients(model, batch, table);
  for (const auto& [node, g] : grads.nodes) {
    for (double v : g) CHECK(std::isfinite(v));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  // Relative check for components above 1e-2, which doubles as a 1e-6
  // absolute budget below that; central differences at h=1e-3 carry ~1e-7 of
  // truncation error of their own.
  Rng rng(31);
  const double h = 1e-3;
  for (ScoreKind kind : {ScoreKind::kDot, ScoreKind::kDistMult, ScoreKind::kComplEx}) {
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      const std::uint32_t dim = kind == ScoreKind::kComplEx ? 6 : 5;
      const ScoreModel model = model_of(kind, dim);
      ResidentTable table = random_table(dim, 12, 3, 555 + t, 1.0);
      TrainBatch batch = random_batch(model, 12, 3, 1 + t % 4, 1 + t % 3, rng);

      batch_loss(model, batch, table);
      const GradientSet grads = batch_gradients(model, batch, table);

      auto fd_check = [&](std::span<float> row, std::span<const double> grad) {
        for (std::size_t i = 0; i < row.size(); ++i) {
          const float saved = row[i];
          row[i] = static_cast<float>(double(saved) + h);
          const double hi = double(row[i]);
          const double loss_hi = naive_batch_loss(model, batch, table);
          row[i] = static_cast<float>(double(saved) - h);
          const double lo = double(row[i]);
          const double loss_lo = naive_batch_loss(model, batch, table);
          row[i] = saved;
          const double fd = (loss_hi - loss_lo) / (hi - lo);
          const double rel = std::abs(grad[i] - fd) /
                             std::max({1e-2, std::abs(grad[i]), std::abs(fd)});
          worst = std::max(worst, rel);
        }
      };
      for (const auto& [node, grad] : grads.nodes) fd_check(table.node_embedding(node), grad);
      for (const auto& [rel, grad] : grads.rels) fd_check(table.rel_embedding(rel), grad);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gradients are linear in repeated positives") {
  const ScoreModel model = model_of(ScoreKind::kDistMult, 6);
  ResidentTable table = random_table(6, 10, 2, 99, 1.0);
  Rng rng(41);
  TrainBatch one = random_batch(model, 10, 2, 1, 3, rng);
  TrainBatch two;
  two.positives = {one.positives[0], one.positives[0]};
  two.negatives_per_positive = one.negatives_per_positive;
  two.negative_dst = one.negative_dst;
  two.negative_dst.insert(two.negative_dst.end(), one.negative_dst.begin(),
                          one.negative_dst.end());

  batch_loss(model, one, table);
  batch_loss(model, two, table);
  const GradientSet g1 = batch_gradients(model, one, table);
  const GradientSet g2 = batch_gradients(model, two, table);
  REQUIRE(g1.nodes.size() == g2.nodes.size());
  for (std::size_t i = 0; i < g1.nodes.size(); ++i) {
    CHECK(g1.nodes[i].first == g2.nodes[i].first);
    for (std::size_t j = 0; j < g1.nodes[i].second.size(); ++j) {
      CHECK(g2.nodes[i].second[j] == doctest::Approx(2.0 * g1.nodes[i].second[j]));
    }
  }
}

TEST_CASE("stale intermediates are rejected") {
  const ScoreModel model = model_of(ScoreKind::kDot, 4);
  ResidentTable table = random_table(4, 8, 0, 1, 1.0);
  Rng rng(2);
  TrainBatch batch = random_batch(model, 8, 1, 2, 2, rng);
  CHECK_THROWS_AS(batch_gradients(model, batch, table), std::logic_error);
  batch_loss(model, batch, table);
  CHECK_NOTHROW(batch_gradients(model, batch, table));
  batch.mark_dirty();
  CHECK_THROWS_AS(batch_gradients(model, batch, table), std::logic_error);
}

TEST_CASE("adagrad closed forms") {
  AdagradHyper hyper{0.1, 1e-10};

  std::vector<float> theta = {1.0f};
  std::vector<float> acc = {0.0f};
  std::vector<double> zero = {0.0};
  adagrad_update(theta, acc, zero, hyper);
  CHECK(theta[0] == 1.0f);
  CHECK(acc[0] == 0.0f);

  std::vector<double> g = {1.0};
  adagrad_update(theta, acc, g, hyper);
  CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(acc[0] == doctest::Approx(1.0));

  // second identical step moves less
  const float before = theta[0];
  adagrad_update(theta, acc, g, hyper);
  const double second_step = double(before) - double(theta[0]);
  CHECK(second_step > 0);
  CHECK(second_step < 0.1);
  CHECK(acc[0] == doctest::Approx(2.0));

  std::vector<float> short_acc = {0.0f, 0.0f};
  CHECK_THROWS_AS(adagrad_update(theta, short_acc, g, hyper), std::invalid_argument);
}

TEST_CASE("adagrad accumulators never decrease during training steps") {
  const ScoreModel model = model_of(ScoreKind::kDistMult, 6);
  ResidentTable table = random_table(6, 12, 3, 7, 1.0);
  Rng rng(8);
  AdagradHyper hyper{0.05, 1e-10};
  std::vector<float> prev_acc(table.node_acc(3).begin(), table.node_acc(3).end());
  for (int step = 0; step < 10; ++step) {
    TrainBatch batch = random_batch(model, 12, 3, 4, 3, rng);
    batch_loss(model, batch, table);
    adagrad_step(table, batch_gradients(model, batch, table), hyper);
    const auto acc = table.node_acc(3);
    for (std::size_t i = 0; i < acc.size(); ++i) CHECK(acc[i] >= prev_acc[i]);
    prev_acc.assign(acc.begin(), acc.end());
  }
}

TEST_CASE("negative sampling is uniform over the resident tier") {
  ResidentTable table(4);
  auto add_part = [&](PartitionId id, std::uint64_t first, std::uint64_t count) {
    EmbeddingPartition part;
    part.id = id;
    part.dim = 4;
    part.node_count = count;
    part.embeddings.assign(count * 4, 0.0f);
    part.opt_states.assign(count * 4, 0.0f);
    table.add_partition(std::move(part), first);
  };
  add_part(0, 0, 50);
  add_part(2, 100, 50);

  Rng rng(4242);
  const auto samples = sample_negatives(table, 4, 2500, rng);
  REQUIRE(samples.size() == 10000);

  std::vector<std::uint64_t> counts(100, 0);
  for (NodeId id : samples) {
    const bool low = id < 50;
    const bool high = id >= 100 && id < 150;
    REQUIRE((low || high));
    ++counts[low ? id : id - 50];
  }
  // chi-square against uniform: df=99, mean 99, sigma ~= 14.07
  const double expected = 100.0;
  double chi2 = 0;
  for (auto c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 99.0 + 4.0 * std::sqrt(2.0 * 99.0));

  // fixed seed reproduces the exact sample
  Rng rng2(4242);
  CHECK(sample_negatives(table, 4, 2500, rng2) == samples);

  CHECK_THROWS_AS(sample_negatives(table, 0, 10, rng), std::invalid_argument);
}

TEST_CASE("evaluation ranking rules") {
  const std::uint32_t dim = 2;
  ResidentTable table(dim);
  EmbeddingPartition part;
  part.id = 0;
  part.dim = dim;
  part.node_count = 50;
  part.embeddings.assign(50 * dim, 0.0f);
  part.opt_states.assign(50 * dim, 0.0f);
  // src points along x; the true destination dominates every other node
  part.embeddings[0 * dim] = 1.0f;
  part.embeddings[1 * dim] = 10.0f;
  for (std::uint64_t v = 2; v < 50; ++v) part.embeddings[v * dim] = 0.01f * v;
  table.add_partition(std::move(part), 0);

  const ScoreModel model = model_of(ScoreKind::kDot, dim);
  const Edge truth{0, kNoRelation, 1};
  EvalOptions opts;
  opts.num_candidates = 30;
  opts.hits_k = 10;
  const EvalResult top = evaluate(model, table, std::span<const Edge>(&truth, 1), opts);
  CHECK(top.mrr == doctest::Approx(1.0));
  CHECK(top.hits_at_k == doctest::Approx(1.0));

  // all-equal scores rank pessimistically: rank = candidates + 1
  ResidentTable flat(dim);
  EmbeddingPartition same;
  same.id = 0;
  same.dim = dim;
  same.node_count = 20;
  same.embeddings.assign(20 * dim, 0.5f);
  same.opt_states.assign(20 * dim, 0.0f);
  flat.add_partition(std::move(same), 0);
  EvalOptions flat_opts;
  flat_opts.num_candidates = 7;
  flat_opts.hits_k = 7;
  const EvalResult tied = evaluate(model, flat, std::span<const Edge>(&truth, 1), flat_opts);
  CHECK(tied.mrr == doctest::Approx(1.0 / 8.0));
  CHECK(tied.hits_at_k == doctest::Approx(0.0));

  CHECK_THROWS_AS(evaluate(model, table, {}, opts), std::invalid_argument);
}

TEST_CASE("random embeddings score near the closed-form random baseline") {
  ResidentTable table = random_table(16, 500, 0, 2718, 1.0);
  const ScoreModel model = model_of(ScoreKind::kDot, 16);
  Rng rng(99);
  std::vector<Edge> test;
  for (int i = 0; i < 2000; ++i) {
    test.push_back({static_cast<NodeId>(rng.next_below(500)), kNoRelation,
                    static_cast<NodeId>(rng.next_below(500))});
  }
  EvalOptions opts;
  opts.num_candidates = 999;
  opts.seed = 1;
  const EvalResult res = evaluate(model, table, test, opts);
  const double baseline = random_rank_mrr(999);
  CHECK(baseline == doctest::Approx(0.00748).epsilon(0.01));
  CHECK(res.mrr > baseline / 2);
  CHECK(res.mrr < baseline * 2);
}
