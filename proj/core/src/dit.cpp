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

#include "partgen/dit.hpp"

#include <cmath>
#include <string>

#include "partgen/error.hpp"

namespace partgen {

using nn::Graph;
using nn::Mat;
using nn::Param;
using nn::Var;

std::vector<bool> ModelConfig::block_pattern() const {
  if (!inter_blocks.empty()) return inter_blocks;
  std::vector<bool> pattern(static_cast<std::size_t>(std::max(depth, 0)));
  for (std::size_t i = 0; i < pattern.size(); ++i) pattern[i] = (i % 2) == 1;
  return pattern;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfig, "ModelConfig: " + what); };
  if (depth <= 0 || depth % 2 != 0) fail("depth must be positive and even");
  if (width <= 0 || heads <= 0 || width % heads != 0) fail("width must be divisible by heads");
  if (width % 2 != 0) fail("width must be even");
  if (in_channels <= 0) fail("in_channels must be positive");
  if (kmax < 0) fail("kmax must be non-negative");
  if (cond_tokens <= 0 || cond_dim <= 0) fail("condition shape must be positive");
  if (time_dim <= 0 || time_dim % 2 != 0) fail("time_dim must be positive and even");
  if (lattice <= 0 || lattice > 65536) fail("lattice out of range");
  const auto pattern = block_pattern();
  if (static_cast<int>(pattern.size()) != depth) fail("block pattern length differs from depth");
  int inter = 0;
  for (bool b : pattern) inter += b ? 1 : 0;
  if (inter * 2 != depth) fail("exactly half of the blocks must be inter-part");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"depth", depth},
          {"width", width},
          {"heads", heads},
          {"in_channels", in_channels},
          {"tokens_per_part", tokens_per_part},
          {"kmax", kmax},
          {"inter_blocks", block_pattern()},
          {"cond_tokens", cond_tokens},
          {"cond_dim", cond_dim},
          {"lattice", lattice},
          {"ffn_mult", ffn_mult},
          {"time_dim", time_dim},
          {"positional", positional},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.depth = j.at("depth").get<int>();
  c.width = j.at("width").get<int>();
  c.heads = j.at("heads").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.tokens_per_part = j.at("tokens_per_part").get<int>();
  c.kmax = j.at("kmax").get<int>();
  c.inter_blocks = j.at("inter_blocks").get<std::vector<bool>>();
  c.cond_tokens = j.at("cond_tokens").get<int>();
  c.cond_dim = j.at("cond_dim").get<int>();
  c.lattice = j.at("lattice").get<int>();
  c.ffn_mult = j.at("ffn_mult").get<int>();
  c.time_dim = j.at("time_dim").get<int>();
  c.positional = j.at("positional").get<bool>();
  c.seed = j.at("seed").get<uint64_t>();
  c.validate();
  return c;
}

template <class T>
void TokenStream<T>::validate(int channels, bool needs_keys) const {
  if (tokens.cols() != channels) {
    throw Error(ErrorCode::kInvalidArgument, "token stream has " + std::to_string(tokens.cols()) +
                                                 " channels, model expects " + std::to_string(channels));
  }
  int at = 0;
  for (const SlotRange& s : slots) {
    if (s.begin != at || s.end < s.begin) throw Error(ErrorCode::kInvalidArgument, "slot ranges must partition rows");
    at = s.end;
  }
  if (at != rows()) throw Error(ErrorCode::kInvalidArgument, "slot ranges do not cover the stream");
  if (needs_keys && static_cast<int>(keys.size()) != rows()) {
    throw Error(ErrorCode::kInvalidArgument, "token stream needs one key per row");
  }
}

template <class T>
std::vector<nn::Segment> TokenStream<T>::intra_segments() const {
  std::vector<nn::Segment> segs;
  segs.reserve(slots.size());
  for (const SlotRange& s : slots) segs.push_back({s.begin, s.end, s.begin, s.end});
  return segs;
}

template <class T>
std::vector<T> TokenStream<T>::row_mask() const {
  std::vector<T> m(static_cast<std::size_t>(rows()), T(0));
  for (const SlotRange& s : slots) {
    for (int r = s.begin; r < s.end; ++r) m[static_cast<std::size_t>(r)] = s.real ? T(1) : T(0);
  }
  return m;
}

template <class T>
std::vector<int32_t> TokenStream<T>::row_slot_ids() const {
  std::vector<int32_t> ids(static_cast<std::size_t>(rows()), 0);
  for (const SlotRange& s : slots) {
    for (int r = s.begin; r < s.end; ++r) ids[static_cast<std::size_t>(r)] = s.slot_id;
  }
  return ids;
}

namespace {

template <class T>
Param<T> make_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Param<T> p;
  p.name = name;
  p.value.resize(rows, cols);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(stddev * rng.normal());
  return p;
}

template <class T>
Param<T> make_const(const std::string& name, Eigen::Index rows, Eigen::Index cols, T v) {
  Param<T> p;
  p.name = name;
  p.value = Mat<T>::Constant(rows, cols, v);
  return p;
}

template <class T>
Var attend(Graph<T>& g, Var xq, Var xkv, AttentionWeights<T>& w, int heads, const std::vector<nn::Segment>& segs) {
  const Var q = nn::linear(g, xq, g.param(w.wq), g.param(w.bq));
  const Var k = nn::linear(g, xkv, g.param(w.wk), g.param(w.bk));
  const Var v = nn::linear(g, xkv, g.param(w.wv), g.param(w.bv));
  const Var o = nn::attention(g, q, k, v, heads, segs);
  return nn::linear(g, o, g.param(w.wo), g.param(w.bo));
}

}  // namespace

template <class T>
AttentionWeights<T> make_attention_weights(const std::string& prefix, int width, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(width));
  AttentionWeights<T> w;
  w.wq = make_param<T>(prefix + ".wq", width, width, s, rng);
  w.bq = make_const<T>(prefix + ".bq", 1, width, T(0));
  w.wk = make_param<T>(prefix + ".wk", width, width, s, rng);
  w.bk = make_const<T>(prefix + ".bk", 1, width, T(0));
  w.wv = make_param<T>(prefix + ".wv", width, width, s, rng);
  w.bv = make_const<T>(prefix + ".bv", 1, width, T(0));
  w.wo = make_param<T>(prefix + ".wo", width, width, s, rng);
  w.bo = make_const<T>(prefix + ".bo", 1, width, T(0));
  return w;
}

template <class T>
Var intra_attention(Graph<T>& g, Var x, AttentionWeights<T>& w, int heads, std::span<const SlotRange> slots) {
  std::vector<nn::Segment> segs;
  segs.reserve(slots.size());
  for (const SlotRange& s : slots) segs.push_back({s.begin, s.end, s.begin, s.end});
  return attend(g, x, x, w, heads, segs);
}

template <class T>
Var inter_attention(Graph<T>& g, Var x, AttentionWeights<T>& w, int heads) {
  const int n = static_cast<int>(g.value(x).rows());
  return attend(g, x, x, w, heads, {{0, n, 0, n}});
}

template <class T>
Var cross_attention(Graph<T>& g, Var x, Var c, AttentionWeights<T>& w, int heads) {
  const int n = static_cast<int>(g.value(x).rows());
  const int m = static_cast<int>(g.value(c).rows());
  if (m == 0) throw Error(ErrorCode::kEmptyInput, "cross_attention: empty condition");
  return attend(g, x, c, w, heads, {{0, n, 0, m}});
}

template <class T>
Dit<T>::Dit(const ModelConfig& cfg)
    : cfg_(cfg), embed_(cfg.lattice, cfg.width, cfg.kmax, derive_seed(cfg.seed, 1)) {
  cfg_.validate();
  cfg_.inter_blocks = cfg_.block_pattern();
  Rng rng(derive_seed(cfg.seed, 2));
  const int d = cfg_.width;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  in_w = make_param<T>("in.w", cfg_.in_channels, d, 1.0 / std::sqrt(static_cast<double>(cfg_.in_channels)), rng);
  in_b = make_const<T>("in.b", 1, d, T(0));
  t1_w = make_param<T>("time.w1", cfg_.time_dim, d, 1.0 / std::sqrt(static_cast<double>(cfg_.time_dim)), rng);
  t1_b = make_const<T>("time.b1", 1, d, T(0));
  t2_w = make_param<T>("time.w2", d, d, sd, rng);
  t2_b = make_const<T>("time.b2", 1, d, T(0));
  cond_w = make_param<T>("cond.w", cfg_.cond_dim, d, 1.0 / std::sqrt(static_cast<double>(cfg_.cond_dim)), rng);
  cond_b = make_const<T>("cond.b", 1, d, T(0));
  cond_pos = make_param<T>("cond.pos", cfg_.cond_tokens, d, 0.5, rng);
  cond_null = make_param<T>("cond.null", cfg_.cond_tokens, d, 0.5, rng);
  for (int i = 0; i < cfg_.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i);
    Block b;
    b.inter = cfg_.inter_blocks[static_cast<std::size_t>(i)];
    b.ln1_g = make_const<T>(p + ".ln1.g", 1, d, T(1));
    b.ln1_b = make_const<T>(p + ".ln1.b", 1, d, T(0));
    b.ln2_g = make_const<T>(p + ".ln2.g", 1, d, T(1));
    b.ln2_b = make_const<T>(p + ".ln2.b", 1, d, T(0));
    b.ln3_g = make_const<T>(p + ".ln3.g", 1, d, T(1));
    b.ln3_b = make_const<T>(p + ".ln3.b", 1, d, T(0));
    b.self_attn = make_attention_weights<T>(p + ".self", d, rng);
    b.cross_attn = make_attention_weights<T>(p + ".cross", d, rng);
    const int f = cfg_.ffn_mult * d;
    b.ff1_w = make_param<T>(p + ".ff.w1", d, f, sd, rng);
    b.ff1_b = make_const<T>(p + ".ff.b1", 1, f, T(0));
    b.ff2_w = make_param<T>(p + ".ff.w2", f, d, 1.0 / std::sqrt(static_cast<double>(f)), rng);
    b.ff2_b = make_const<T>(p + ".ff.b2", 1, d, T(0));
    blocks_.push_back(std::move(b));
  }
  out_ln_g = make_const<T>("out.ln.g", 1, d, T(1));
  out_ln_b = make_const<T>("out.ln.b", 1, d, T(0));
  // Zero output projection: v_theta == 0 at initialization.
  out_w = make_const<T>("out.w", d, cfg_.in_channels, T(0));
  out_b = make_const<T>("out.b", 1, cfg_.in_channels, T(0));
}

template <class T>
std::vector<Param<T>*> Dit<T>::parameters() {
  std::vector<Param<T>*> ps = {&in_w, &in_b, &t1_w, &t1_b, &t2_w, &t2_b, &cond_w, &cond_b, &cond_pos, &cond_null};
  if (cfg_.positional) {
    for (auto& a : embed_.axis) ps.push_back(&a);
  }
  ps.push_back(&embed_.ids);
  for (Block& b : blocks_) {
    for (Param<T>* p : {&b.ln1_g, &b.ln1_b, &b.ln2_g, &b.ln2_b, &b.ln3_g, &b.ln3_b}) ps.push_back(p);
    for (AttentionWeights<T>* w : {&b.self_attn, &b.cross_attn}) {
      for (Param<T>* p : {&w->wq, &w->bq, &w->wk, &w->bk, &w->wv, &w->bv, &w->wo, &w->bo}) ps.push_back(p);
    }
    for (Param<T>* p : {&b.ff1_w, &b.ff1_b, &b.ff2_w, &b.ff2_b}) ps.push_back(p);
  }
  for (Param<T>* p : {&out_ln_g, &out_ln_b, &out_w, &out_b}) ps.push_back(p);
  return ps;
}

template <class T>
Var Dit<T>::condition_tokens(Graph<T>& g, const Condition<T>& c) {
  if (c.null) return g.param(cond_null);
  if (c.patches.rows() != cfg_.cond_tokens || c.patches.cols() != cfg_.cond_dim) {
    throw Error(ErrorCode::kInvalidArgument, "condition patches have the wrong shape");
  }
  const Var e = nn::linear(g, g.constant(c.patches), g.param(cond_w), g.param(cond_b));
  return nn::add(g, e, g.param(cond_pos));
}

template <class T>
Var Dit<T>::time_embedding(Graph<T>& g, double t) {
  const int half = cfg_.time_dim / 2;
  Mat<T> feats(1, cfg_.time_dim);
  for (int j = 0; j < half; ++j) {
    const double omega = std::pow(10000.0, -static_cast<double>(j) / half);
    feats(0, j) = static_cast<T>(std::sin(1000.0 * t * omega));
    feats(0, half + j) = static_cast<T>(std::cos(1000.0 * t * omega));
  }
  Var h = nn::linear(g, g.constant(std::move(feats)), g.param(t1_w), g.param(t1_b));
  h = nn::silu(g, h);
  return nn::linear(g, h, g.param(t2_w), g.param(t2_b));
}

template <class T>
Var Dit<T>::forward(Graph<T>& g, const TokenStream<T>& x, double t, const Condition<T>& c) {
  x.validate(cfg_.in_channels, cfg_.positional);
  for (const SlotRange& s : x.slots) {
    if (s.slot_id < 0 || s.slot_id > cfg_.kmax) throw Error(ErrorCode::kOutOfRange, "slot id exceeds kmax");
  }
  const int heads = cfg_.heads;
  Var h = nn::linear(g, g.constant(x.tokens), g.param(in_w), g.param(in_b));
  if (cfg_.positional) {
    const KeyIndices idx = key_indices(x.keys);
    for (int a = 0; a < 3; ++a) h = nn::add(g, h, nn::gather_sum(g, g.param(embed_.axis[a]), idx.axis[a], 9));
  }
  auto ids = std::make_shared<const std::vector<int32_t>>(x.row_slot_ids());
  h = nn::add(g, h, nn::gather_sum(g, g.param(embed_.ids), ids, 1));
  h = nn::add_row(g, h, time_embedding(g, t));
  const Var cond = condition_tokens(g, c);

  for (Block& b : blocks_) {
    Var a = nn::layer_norm(g, h, g.param(b.ln1_g), g.param(b.ln1_b));
    a = b.inter ? inter_attention(g, a, b.self_attn, heads) : intra_attention<T>(g, a, b.self_attn, heads, x.slots);
    h = nn::add(g, h, a);
    a = nn::layer_norm(g, h, g.param(b.ln2_g), g.param(b.ln2_b));
    h = nn::add(g, h, cross_attention(g, a, cond, b.cross_attn, heads));
    a = nn::layer_norm(g, h, g.param(b.ln3_g), g.param(b.ln3_b));
    a = nn::gelu(g, nn::linear(g, a, g.param(b.ff1_w), g.param(b.ff1_b)));
    h = nn::add(g, h, nn::linear(g, a, g.param(b.ff2_w), g.param(b.ff2_b)));
  }
  h = nn::layer_norm(g, h, g.param(out_ln_g), g.param(out_ln_b));
  return nn::linear(g, h, g.param(out_w), g.param(out_b));
}

template <class T>
Mat<T> Dit<T>::velocity(const TokenStream<T>& x, double t, const Condition<T>& c) {
  Graph<T> g(false);
  return g.value(forward(g, x, t, c));
}

template <class T>
void Dit<T>::save(TensorArchive& archive, const std::string& prefix) const {
  for (Param<T>* p : const_cast<Dit*>(this)->parameters()) archive.put(prefix + p->name, p->value);
}

template <class T>
void Dit<T>::load(const TensorArchive& archive, const std::string& prefix) {
  for (Param<T>* p : parameters()) {
    Mat<T> v = archive.get<T>(prefix + p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw Error(ErrorCode::kFormat, "checkpoint tensor '" + prefix + p->name + "' has the wrong shape");
    }
    p->value = std::move(v);
  }
}

template <class T>
Var cfm_loss(Graph<T>& g, Dit<T>& model, const TokenStream<T>& x0, const Mat<T>& eps, double t,
             const Condition<T>& c, const std::vector<T>& row_weights) {
  if (eps.rows() != x0.tokens.rows() || eps.cols() != x0.tokens.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "cfm_loss: noise shape differs from x0");
  }
  TokenStream<T> xt = x0;
  xt.tokens = static_cast<T>(1.0 - t) * x0.tokens + static_cast<T>(t) * eps;
  const Var v = model.forward(g, xt, t, c);
  const Mat<T> target = eps - x0.tokens;
  return nn::masked_mse(g, v, target, row_weights.empty() ? x0.row_mask() : row_weights);
}

template <class T>
Mat<T> gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.normal());
  return m;
}

template <class T>
double train_step(Dit<T>& model, nn::AdamW<T>& opt, std::span<const TrainItem<T>> batch, double drop_prob, Rng& rng) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "train_step: empty batch");
  opt.zero_grad();
  double total = 0.0;
  const T inv = T(1) / static_cast<T>(batch.size());
  for (const TrainItem<T>& item : batch) {
    const double t = std::clamp(rng.uniform(), 1e-3, 1.0 - 1e-3);
    const Mat<T> eps = gaussian<T>(item.x0.tokens.rows(), item.x0.tokens.cols(), rng);
    const bool drop = rng.bernoulli(drop_prob);
    Graph<T> g(true);
    const Var loss = cfm_loss(g, model, item.x0, eps, t, drop ? Condition<T>::make_null() : item.cond, item.loss_rows);
    total += static_cast<double>(g.value(loss)(0, 0));
    g.backward(nn::scale(g, loss, inv));
  }
  opt.step();
  return total / static_cast<double>(batch.size());
}

template <class T>
Mat<T> euler_sample(const VelocityFn<T>& velocity, Mat<T> noise, const SamplerOptions& opts, const StepHook<T>& hook) {
  if (opts.steps <= 0) throw Error(ErrorCode::kInvalidArgument, "sampler needs at least one step");
  Mat<T> x = std::move(noise);
  const double s = opts.cfg_scale;
  for (int i = 0; i < opts.steps; ++i) {
    const double t = 1.0 - static_cast<double>(i) / opts.steps;
    const double t_next = 1.0 - static_cast<double>(i + 1) / opts.steps;
    if (hook) hook(x, t);
    Mat<T> v;
    if (s == 1.0) {
      v = velocity(x, t, true);
    } else if (s == 0.0) {
      v = velocity(x, t, false);
    } else {
      const Mat<T> vu = velocity(x, t, false);
      const Mat<T> vc = velocity(x, t, true);
      v = vu + static_cast<T>(s) * (vc - vu);
    }
    x -= static_cast<T>(t - t_next) * v;
  }
  if (hook) hook(x, 0.0);
  return x;
}

template <class T>
Mat<T> sample(Dit<T>& model, const TokenStream<T>& layout, const Condition<T>& cond, Mat<T> noise,
              const SamplerOptions& opts, const StepHook<T>& hook) {
  if (noise.rows() != layout.tokens.rows() || noise.cols() != model.config().in_channels) {
    throw Error(ErrorCode::kInvalidArgument, "sample: noise shape does not match the layout");
  }
  TokenStream<T> work = layout;
  const Condition<T> null_cond = Condition<T>::make_null();
  VelocityFn<T> fn = [&](const Mat<T>& x, double t, bool conditional) {
    work.tokens = x;
    return model.velocity(work, t, conditional ? cond : null_cond);
  };
  return euler_sample<T>(fn, std::move(noise), opts, hook);
}

#define PARTGEN_DIT_INSTANTIATE(T)                                                                              \
  template struct TokenStream<T>;                                                                               \
  template class Dit<T>;                                                                                        \
  template AttentionWeights<T> make_attention_weights<T>(const std::string&, int, Rng&);                        \
  template Var intra_attention<T>(Graph<T>&, Var, AttentionWeights<T>&, int, std::span<const SlotRange>);       \
  template Var inter_attention<T>(Graph<T>&, Var, AttentionWeights<T>&, int);                                   \
  template Var cross_attention<T>(Graph<T>&, Var, Var, AttentionWeights<T>&, int);                              \
  template Var cfm_loss<T>(Graph<T>&, Dit<T>&, const TokenStream<T>&, const Mat<T>&, double, const Condition<T>&, \
                           const std::vector<T>&);                                                              \
  template Mat<T> gaussian<T>(Eigen::Index, Eigen::Index, Rng&);                                                \
  template double train_step<T>(Dit<T>&, nn::AdamW<T>&, std::span<const TrainItem<T>>, double, Rng&);          \
  template Mat<T> euler_sample<T>(const VelocityFn<T>&, Mat<T>, const SamplerOptions&, const StepHook<T>&);     \
  template Mat<T> sample<T>(Dit<T>&, const TokenStream<T>&, const Condition<T>&, Mat<T>, const SamplerOptions&, \
                            const StepHook<T>&);

PARTGEN_DIT_INSTANTIATE(float)
PARTGEN_DIT_INSTANTIATE(double)

}  // namespace partgen
