#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "subsense/augment.hpp"

namespace subsense::encoder {

using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

struct ModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ff = 128;
  int max_len = 128;
  int vocab_size = 8000;
  int n_classes = 2;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  int seq_len() const { return max_len + 1; }
  int head_dim() const { return d_model / n_heads; }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Biases and norm parameters are stored as 1 x n matrices.
struct LayerParams {
  Matrix norm1_gain, norm1_bias;
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix norm2_gain, norm2_bias;
  Matrix w1, b1, w2, b2;
};

struct EncoderParams {
  Matrix tok_emb;  // vocab_size x d_model
  Matrix pos_emb;  // (max_len + 1) x d_model; last row is the slot position
  Matrix emb_norm_gain, emb_norm_bias;
  std::vector<LayerParams> layers;
  Matrix head_w;  // d_model x 2
  Matrix head_b;  // 1 x 2

  // Visits every tensor with a stable dotted name, in a fixed order.
  template <class F>
  void for_each(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit_impl(*this, f);
  }

  static EncoderParams zeros(const ModelConfig& config);
  std::size_t parameter_count() const;
  bool all_finite() const;
  // Throws ContractError when shapes disagree with `config`.
  void check_shapes(const ModelConfig& config) const;

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    f("tok_emb", self.tok_emb);
    f("pos_emb", self.pos_emb);
    f("emb_norm.gain", self.emb_norm_gain);
    f("emb_norm.bias", self.emb_norm_bias);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string p = "layers." + std::to_string(i) + ".";
      f(p + "norm1.gain", l.norm1_gain);
      f(p + "norm1.bias", l.norm1_bias);
      f(p + "attn.wq", l.wq);
      f(p + "attn.bq", l.bq);
      f(p + "attn.wk", l.wk);
      f(p + "attn.bk", l.bk);
      f(p + "attn.wv", l.wv);
      f(p + "attn.bv", l.bv);
      f(p + "attn.wo", l.wo);
      f(p + "attn.bo", l.bo);
      f(p + "norm2.gain", l.norm2_gain);
      f(p + "norm2.bias", l.norm2_bias);
      f(p + "ffn.w1", l.w1);
      f(p + "ffn.b1", l.b1);
      f(p + "ffn.w2", l.w2);
      f(p + "ffn.b2", l.b2);
    }
    f("head.w", self.head_w);
    f("head.b", self.head_b);
  }
};

// Glorot-uniform weights, U(-0.1, 0.1) embeddings, unit norm gains, zero
// biases. Deterministic in config.seed.
EncoderParams init(const ModelConfig& config);

// Per-example activations retained for the backward pass, including the
// dropout masks that were applied.
struct ExampleCache {
  struct Layer {
    Matrix x_in;  // residual stream entering the block
    Matrix xhat1;
    Eigen::VectorXd inv_rms1;
    Matrix a_in, q, k, v;
    std::vector<Matrix> probs;  // one L x L matrix per head
    Matrix attn_concat;
    Matrix drop_attn;
    Matrix h;
    Matrix xhat2;
    Eigen::VectorXd inv_rms2;
    Matrix f_in, u, g;
    Matrix drop_ffn;
  };
  std::vector<std::int32_t> ids;
  bool slot_live = false;  // slot_fill enters the embedding
  Matrix emb_sum;
  Matrix emb_xhat;
  Eigen::VectorXd emb_inv_rms;
  Matrix drop_emb;
  std::vector<Layer> layers;
  Eigen::RowVectorXd cls;
};

struct ForwardCache {
  std::vector<ExampleCache> examples;
};

struct ForwardOutput {
  Matrix logits;  // batch x 2; column 1 is the toxic logit
  std::optional<ForwardCache> cache;
};

struct ForwardOptions {
  bool keep_cache = false;
  bool dropout = false;
  Rng* rng = nullptr;  // required when dropout is on and rate > 0
};

// train_mode keeps the cache and enables dropout (drawn from `rng`).
ForwardOutput forward(std::span<const augment::AugmentedExample> batch,
                      const EncoderParams& params, const ModelConfig& config,
                      bool train_mode, Rng* rng = nullptr);
ForwardOutput forward(std::span<const augment::AugmentedExample> batch,
                      const EncoderParams& params, const ModelConfig& config,
                      const ForwardOptions& options);

struct Gradients {
  EncoderParams params;
  std::vector<double> slot_fill;  // d loss / d slot_fill, per example
};

Gradients zero_gradients(const ModelConfig& config, std::size_t batch_size);

// dlogits has the logits' shape. Throws ContractError when the cache is
// missing or shapes disagree.
Gradients backward(const std::optional<ForwardCache>& cache,
                   const EncoderParams& params, const ModelConfig& config,
                   const Matrix& dlogits);
// Adds into `grads` instead of allocating.
void backward_accumulate(const ForwardCache& cache, const EncoderParams& params,
                         const ModelConfig& config, const Matrix& dlogits,
                         Gradients& grads);

// Checkpoint container: magic "SUBSENSE", u32 version, u64 manifest length,
// JSON manifest (config + tensor table), then little-endian float64 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                     const ModelConfig& config);
struct Checkpoint {
  ModelConfig config;
  EncoderParams params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace subsense::encoder
