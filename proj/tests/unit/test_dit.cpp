// Copyright 2026 The PartGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <chrono>

#include "partgen/dit.hpp"
#include "partgen/error.hpp"
#include "oracles.hpp"
#include "test_models.hpp"

namespace partgen {
namespace {

using nn::Graph;
using nn::Mat;
using D = double;

using testing_util::random_mat;

TEST(Dit, AttentionMatchesMaskedOracle) {
  const auto start = std::chrono::steady_clock::now();
  const testing_util::AttentionCheck r = testing_util::check_attention(50, 99);
  EXPECT_EQ(r.instances, 50);
  EXPECT_LE(r.intra_max_diff, 1e-5);
  EXPECT_LE(r.inter_max_diff, 1e-5);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);
}

TEST(Dit, CrossAttentionIgnoresSlotStructure) {
  Rng rng(4);
  auto w = make_attention_weights<D>("c", 8, rng);
  const Mat<D> x = random_mat(5, 8, rng);
  const Mat<D> c = random_mat(3, 8, rng);
  Graph<D> g(false);
  const Mat<D> out = g.value(cross_attention<D>(g, g.constant(x), g.constant(c), w, 2));
  // Oracle: rows of x attend to every row of c.
  Mat<D> q = (x * w.wq.value).rowwise() + w.bq.value.row(0);
  Mat<D> k = (c * w.wk.value).rowwise() + w.bk.value.row(0);
  Mat<D> v = (c * w.wv.value).rowwise() + w.bv.value.row(0);
  Mat<D> o(5, 8);
  for (int h = 0; h < 2; ++h) {
    Mat<D> s = q.middleCols(h * 4, 4) * k.middleCols(h * 4, 4).transpose() / 2.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      s.row(i) = (s.row(i).array() - s.row(i).maxCoeff()).exp();
      s.row(i) /= s.row(i).sum();
    }
    o.middleCols(h * 4, 4) = s * v.middleCols(h * 4, 4);
  }
  const Mat<D> want = (o * w.wo.value).rowwise() + w.bo.value.row(0);
  EXPECT_LE((out - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dit, CfmGradientsMatchFiniteDifferences) {
  const auto start = std::chrono::steady_clock::now();
  const testing_util::GradientCheck r = testing_util::check_cfm_gradients(123);
  EXPECT_GT(r.checked, 100);
  EXPECT_LE(r.worst_relative, 1e-3) << r.worst_param;
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
}

TEST(Dit, ZeroInitOutputAndShape) {
  Dit<float> model(testing_util::tiny_config(1));
  TokenStream<float> s;
  s.tokens = Mat<float>::Ones(6, 8);
  s.slots = {{0, 3, 0, true}, {3, 6, 1, true}};
  for (int r = 0; r < 6; ++r) s.keys.push_back(cell_key(Aabb::unit(), {r % 2, 0, 0}, 2));
  const Mat<float> v = model.velocity(s, 0.5, Condition<float>::make_null());
  EXPECT_EQ(v.rows(), 6);
  EXPECT_EQ(v.cols(), 8);
  EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Dit, BlockPatternAlternates) {
  ModelConfig c;
  c.depth = 6;
  EXPECT_EQ(c.block_pattern(), (std::vector<bool>{false, true, false, true, false, true}));
  c.depth = 5;
  EXPECT_THROW(c.validate(), Error);
  c.depth = 4;
  c.inter_blocks = {true, true, true, false};
  EXPECT_THROW(c.validate(), Error);
  c.inter_blocks = {true, true, false, false};
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(ModelConfig::from_json(c.to_json()).block_pattern(), c.block_pattern());
}

TEST(Dit, SlotIdBeyondKmaxRejected) {
  Dit<float> model(testing_util::tiny_config(1, 2));
  TokenStream<float> s;
  s.tokens = Mat<float>::Zero(2, 8);
  s.slots = {{0, 1, 0, true}, {1, 2, 3, true}};
  s.keys.assign(2, cell_key(Aabb::unit(), {0, 0, 0}, 1));
  EXPECT_THROW(model.velocity(s, 0.5, Condition<float>::make_null()), Error);
}

TEST(Dit, EulerClosedForm) {
  // v(x, t) = x: each step multiplies by (1 - 1/n).
  const int n = 10;
  Mat<D> noise(1, 2);
  noise << 1.0, -2.0;
  SamplerOptions o;
  o.steps = n;
  o.cfg_scale = 1.0;
  std::vector<double> times;
  const Mat<D> out = euler_sample<D>([](const Mat<D>& x, double, bool) { return x; }, noise, o,
                                     [&](Mat<D>&, double t) { times.push_back(t); });
  const double f = std::pow(1.0 - 1.0 / n, n);
  EXPECT_NEAR(out(0, 0), f, 1e-12);
  EXPECT_NEAR(out(0, 1), -2.0 * f, 1e-12);
  ASSERT_EQ(times.size(), static_cast<std::size_t>(n + 1));
  for (int i = 0; i < n; ++i) EXPECT_DOUBLE_EQ(times[i], 1.0 - static_cast<double>(i) / n);
  EXPECT_EQ(times.back(), 0.0);

  // v(x, t) = t: x(0) = x(1) - sum_i t_i / n.
  const Mat<D> out2 = euler_sample<D>([](const Mat<D>& x, double t, bool) { return Mat<D>::Constant(1, x.cols(), t); },
                                      noise, o);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += (1.0 - static_cast<double>(i) / n) / n;
  EXPECT_NEAR(out2(0, 0), 1.0 - sum, 1e-12);
}

TEST(Dit, GuidanceCombination) {
  Mat<D> noise = Mat<D>::Zero(1, 1);
  SamplerOptions o;
  o.steps = 4;
  int cond_calls = 0;
  int uncond_calls = 0;
  auto v = [&](const Mat<D>& x, double, bool c) {
    (c ? cond_calls : uncond_calls)++;
    return Mat<D>::Constant(x.rows(), x.cols(), c ? 2.0 : 0.5);
  };
  o.cfg_scale = 3.5;
  // Constant velocity over unit time: x(0) = x(1) - (v_u + s (v_c - v_u)).
  EXPECT_NEAR(euler_sample<D>(v, noise, o)(0, 0), -(0.5 + 3.5 * 1.5), 1e-12);
  EXPECT_EQ(cond_calls, 4);
  EXPECT_EQ(uncond_calls, 4);
  cond_calls = uncond_calls = 0;
  o.cfg_scale = 1.0;
  EXPECT_NEAR(euler_sample<D>(v, noise, o)(0, 0), -2.0, 1e-12);
  EXPECT_EQ(uncond_calls, 0);
  o.cfg_scale = 0.0;
  cond_calls = 0;
  EXPECT_NEAR(euler_sample<D>(v, noise, o)(0, 0), -0.5, 1e-12);
  EXPECT_EQ(cond_calls, 0);
  o.steps = 0;
  EXPECT_THROW(euler_sample<D>(v, noise, o), Error);
}

TEST(Dit, ConditionDropFrequency) {
  // Replays the per-item draw order (t, eps, drop) of train_step and checks
  // both the reported loss and the drop frequency.
  ModelConfig c = testing_util::tiny_config(3);
  c.in_channels = 2;
  c.positional = false;
  c.cond_tokens = 2;
  c.cond_dim = 3;
  Dit<D> model(c);
  testing_util::wake_output(model, 5);
  TrainItem<D> item;
  item.x0.tokens = Mat<D>::Ones(2, 2);
  item.x0.slots = {{0, 2, 0, true}};
  item.cond.patches = Mat<D>::Constant(2, 3, 0.7);
  nn::AdamWOptions ao;
  ao.lr = 0.0;
  nn::AdamW<D> opt(model.parameters(), ao);
  const double p = 0.25;
  Rng rng(77);
  int drops = 0;
  const int trials = 4000;
  for (int i = 0; i < trials; ++i) {
    Rng replay = rng;
    const double t = std::clamp(replay.uniform(), 1e-3, 1.0 - 1e-3);
    const Mat<D> eps = gaussian<D>(2, 2, replay);
    const bool drop = replay.bernoulli(p);
    drops += drop ? 1 : 0;
    Graph<D> g(false);
    const double want =
        g.value(cfm_loss<D>(g, model, item.x0, eps, t, drop ? Condition<D>::make_null() : item.cond, {}))(0, 0);
    const double got = train_step<D>(model, opt, std::span<const TrainItem<D>>(&item, 1), p, rng);
    ASSERT_NEAR(got, want, 1e-12) << i;
  }
  const double freq = static_cast<double>(drops) / trials;
  EXPECT_NEAR(freq, p, 3.0 * std::sqrt(p * (1 - p) / trials));
}

TEST(Dit, SaveLoadRoundTrip) {
  Dit<float> a(testing_util::tiny_config(11));
  testing_util::wake_output(a, 12);
  TensorArchive ar;
  a.save(ar, "m.");
  Dit<float> b(testing_util::tiny_config(99));
  b.load(decode_archive(encode_archive(ar)), "m.");
  TokenStream<float> s;
  s.tokens = Mat<float>::Constant(4, 8, 0.3f);
  s.slots = {{0, 2, 0, true}, {2, 4, 1, true}};
  for (int r = 0; r < 4; ++r) s.keys.push_back(cell_key(Aabb::unit(), {r % 2, r / 2, 0}, 2));
  Condition<float> c;
  c.patches = Mat<float>::Constant(48, 64, 1.0f);
  EXPECT_EQ(a.velocity(s, 0.3, c), b.velocity(s, 0.3, c));
  Dit<float> wrong(ModelConfig{.depth = 2, .width = 32, .heads = 2});
  EXPECT_THROW(wrong.load(ar, "m."), Error);
}

TEST(Dit, TrainingReducesLossOnFixedItem) {
  ModelConfig c = testing_util::tiny_config(4);
  c.in_channels = 2;
  c.positional = false;
  c.cond_tokens = 2;
  c.cond_dim = 3;
  Dit<float> model(c);
  TrainItem<float> item;
  item.x0.tokens = Mat<float>(3, 2);
  item.x0.tokens << 1, -1, 0.5, 0.5, -1, 1;
  item.x0.slots = {{0, 3, 0, true}};
  item.cond.patches = Mat<float>::Constant(2, 3, 0.5f);
  // Fixed (t, eps) probes so the comparison is free of sampling noise.
  Rng probe_rng(2);
  std::vector<std::pair<double, Mat<float>>> probes;
  for (int i = 0; i < 64; ++i) {
    const double t = std::clamp(probe_rng.uniform(), 0.05, 0.95);
    probes.emplace_back(t, gaussian<float>(3, 2, probe_rng));
  }
  auto probe_loss = [&] {
    double sum = 0.0;
    for (const auto& [t, eps] : probes) {
      Graph<float> g(false);
      sum += g.value(cfm_loss<float>(g, model, item.x0, eps, t, item.cond, {}))(0, 0);
    }
    return sum / static_cast<double>(probes.size());
  };
  const double before = probe_loss();
  nn::AdamWOptions ao;
  ao.lr = 3e-3;
  nn::AdamW<float> opt(model.parameters(), ao);
  Rng rng(1);
  std::vector<TrainItem<float>> batch(8, item);
  for (int i = 0; i < 800; ++i) train_step<float>(model, opt, batch, 0.0, rng);
  EXPECT_LT(probe_loss(), 0.5 * before) << before;
}

}  // namespace
}  // namespace partgen
