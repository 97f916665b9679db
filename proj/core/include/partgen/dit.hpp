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

#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "partgen/archive.hpp"
#include "partgen/encoding.hpp"
#include "partgen/nn/optim.hpp"
#include "partgen/nn/tensor.hpp"
#include "partgen/rng.hpp"

namespace partgen {

/// Shape of one diffusion transformer. Every stage uses the same core with a
/// different token payload (`in_channels`) and with or without center-corner
/// position keys.
struct ModelConfig {
  int depth = 8;             // total blocks, even
  int width = 128;           // D
  int heads = 4;
  int in_channels = 8;       // token payload width
  int tokens_per_part = 8;   // M for the layout stage
  int kmax = 30;             // slots 1..kmax, slot 0 is the global branch
  std::vector<bool> inter_blocks;  // empty: intra, inter, intra, ...
  int cond_tokens = 48;
  int cond_dim = 64;
  int lattice = kDefaultLattice;
  int ffn_mult = 4;
  int time_dim = 64;
  bool positional = true;    // add center-corner embeddings from row keys
  uint64_t seed = 0;

  /// Resolved per-block pattern; exactly depth/2 entries are true.
  std::vector<bool> block_pattern() const;
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// One slot's rows in a token stream. `slot_id` indexes the ID embedding
/// (0 = global branch); `real` is false for zero padding.
struct SlotRange {
  int begin = 0;
  int end = 0;
  int slot_id = 0;
  bool real = true;
};

/// ((K'+1) * M) x C token matrix with its slot partition and, for spatial
/// stages, one center-corner key per row.
template <class T>
struct TokenStream {
  nn::Mat<T> tokens;
  std::vector<SlotRange> slots;
  std::vector<CenterCornerKey> keys;

  int rows() const { return static_cast<int>(tokens.rows()); }
  /// Throws unless slots partition [0, rows) in order and keys are sized.
  void validate(int channels, bool needs_keys) const;
  std::vector<nn::Segment> intra_segments() const;
  /// 1 for rows of real slots, 0 for padding.
  std::vector<T> row_mask() const;
  /// Per-row slot ids.
  std::vector<int32_t> row_slot_ids() const;
};

/// Raw condition source (cond_tokens x cond_dim) or the learned null rows.
template <class T>
struct Condition {
  nn::Mat<T> patches;
  bool null = false;

  static Condition make_null() { return Condition{nn::Mat<T>(), true}; }
};

template <class T>
struct AttentionWeights {
  nn::Param<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Softmax self-attention computed independently inside every slot.
template <class T>
nn::Var intra_attention(nn::Graph<T>& g, nn::Var x, AttentionWeights<T>& w, int heads,
                        std::span<const SlotRange> slots);
/// One softmax attention over all rows.
template <class T>
nn::Var inter_attention(nn::Graph<T>& g, nn::Var x, AttentionWeights<T>& w, int heads);
/// Queries from x, keys/values from the condition embedding c.
template <class T>
nn::Var cross_attention(nn::Graph<T>& g, nn::Var x, nn::Var c, AttentionWeights<T>& w, int heads);

template <class T>
AttentionWeights<T> make_attention_weights(const std::string& prefix, int width, Rng& rng);

/// The shared diffusion transformer v_theta(x, t, c).
template <class T>
class Dit {
 public:
  explicit Dit(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<nn::Param<T>*> parameters();
  EmbeddingTable<T>& embeddings() { return embed_; }

  /// Records the forward pass on g; output has the same shape as x.tokens.
  nn::Var forward(nn::Graph<T>& g, const TokenStream<T>& x, double t, const Condition<T>& c);
  /// Gradient-free evaluation.
  nn::Mat<T> velocity(const TokenStream<T>& x, double t, const Condition<T>& c);

  void save(TensorArchive& archive, const std::string& prefix) const;
  void load(const TensorArchive& archive, const std::string& prefix);

 private:
  struct Block {
    bool inter = false;
    nn::Param<T> ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
    AttentionWeights<T> self_attn;
    AttentionWeights<T> cross_attn;
    nn::Param<T> ff1_w, ff1_b, ff2_w, ff2_b;
  };

  nn::Var condition_tokens(nn::Graph<T>& g, const Condition<T>& c);
  nn::Var time_embedding(nn::Graph<T>& g, double t);

  ModelConfig cfg_;
  EmbeddingTable<T> embed_;
  nn::Param<T> in_w, in_b;
  nn::Param<T> t1_w, t1_b, t2_w, t2_b;
  nn::Param<T> cond_w, cond_b, cond_pos, cond_null;
  std::vector<Block> blocks_;
  nn::Param<T> out_ln_g, out_ln_b, out_w, out_b;
};

/// Rectified-flow CFM loss: x_t = (1 - t) x0 + t eps, target eps - x0,
/// mean squared error over rows with nonzero weight.
template <class T>
nn::Var cfm_loss(nn::Graph<T>& g, Dit<T>& model, const TokenStream<T>& x0, const nn::Mat<T>& eps, double t,
                 const Condition<T>& c, const std::vector<T>& row_weights);

template <class T>
struct TrainItem {
  TokenStream<T> x0;
  Condition<T> cond;
  std::vector<T> loss_rows;  // empty: use x0.row_mask()
};

/// One optimizer step over a batch. Each item draws t ~ U(0,1), eps ~ N(0,1)
/// and, with probability drop_prob, trains against the null condition.
/// Returns the mean loss.
template <class T>
double train_step(Dit<T>& model, nn::AdamW<T>& opt, std::span<const TrainItem<T>> batch, double drop_prob,
                  Rng& rng);

struct SamplerOptions {
  int steps = 50;
  double cfg_scale = 3.5;
};

template <class T>
using VelocityFn = std::function<nn::Mat<T>(const nn::Mat<T>& x, double t, bool conditional)>;
/// Called with the state before every velocity evaluation at time t and once
/// more after the last step with t = 0. May overwrite rows in place.
template <class T>
using StepHook = std::function<void(nn::Mat<T>& x, double t)>;

/// Fixed-step Euler from t = 1 to 0 on dx/dt = v_hat, v_hat = v_u + s (v_c - v_u).
template <class T>
nn::Mat<T> euler_sample(const VelocityFn<T>& velocity, nn::Mat<T> noise, const SamplerOptions& opts,
                        const StepHook<T>& hook = {});

template <class T>
nn::Mat<T> sample(Dit<T>& model, const TokenStream<T>& layout, const Condition<T>& cond, nn::Mat<T> noise,
                  const SamplerOptions& opts, const StepHook<T>& hook = {});

template <class T>
nn::Mat<T> gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace partgen
