#pragma once

// Transformer encoder with a single-output regression head.
//
// The architecture follows RoBERTa: token + position + token-type
// embeddings, L identical post-norm layers of multi-head self-attention and a
// GELU feed-forward block, then a head that reads the first token's hidden
// state through dense -> tanh -> dropout -> dense(1). Parameter names match
// the Hugging Face RobertaForSequenceClassification layout so pretrained
// weights import by name.
//
// All parameters live in one contiguous buffer (with a parallel gradient
// buffer), which keeps the optimizer and serialization simple.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strel/data.hpp"
#include "strel/tokenizer.hpp"

namespace strel {

struct EncoderConfig {
  std::size_t vocab_size = 50265;
  std::size_t hidden_size = 768;
  std::size_t num_layers = 12;
  std::size_t num_attention_heads = 12;
  std::size_t intermediate_size = 3072;
  // Position table size. RoBERTa numbers positions from pad_token_id + 1, so
  // the longest usable sequence is max_position - pad_token_id - 1.
  std::size_t max_position = 514;
  std::size_t type_vocab_size = 1;
  std::int32_t pad_token_id = 1;
  double layer_norm_eps = 1e-5;
  double dropout_rate = 0.1;
  double attention_dropout_rate = 0.1;

  // Throws ConfigError.
  void validate() const;
  std::size_t max_sequence_length() const;

  // Two layers, hidden 32: small enough for property tests.
  static EncoderConfig tiny(std::size_t vocab_size, std::size_t max_tokens = 128);

  bool operator==(const EncoderConfig&) const = default;
};

// Items padded to a common length. Row-major [batch_size x length].
struct PaddedBatch {
  std::size_t batch_size = 0;
  std::size_t length = 0;
  std::vector<std::int32_t> token_ids;
  std::vector<std::uint8_t> mask;
};

// Pads to `length`, or to the longest item when length is 0.
PaddedBatch pad_batch(std::span<const TokenizedInput> items, std::int32_t pad_id,
                      std::size_t length = 0);

struct ParameterInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  // Weight decay applies to matrices and embeddings, not to biases or
  // normalization parameters.
  bool decay = true;
};

namespace detail {

// Activations kept by a training-mode forward pass for the backward pass.
template <typename T>
struct LayerActivations {
  std::vector<T> q, k, v;
  std::vector<T> probs;       // softmax output, before dropout
  std::vector<T> probs_mask;  // dropout scale per probability (empty: none)
  std::vector<T> context;
  std::vector<T> attn_mask;
  std::vector<T> ln1_xhat, ln1_rstd;
  std::vector<T> h1;
  std::vector<T> pre_gelu, gelu;
  std::vector<T> ffn_mask;
  std::vector<T> ln2_xhat, ln2_rstd;
};

}  // namespace detail

template <typename T>
struct ForwardState {
  PaddedBatch batch;
  std::vector<std::int32_t> position_ids;
  std::vector<T> emb_xhat, emb_rstd, emb_mask;
  // hidden[0] is the embedding output, hidden[l + 1] the output of layer l.
  std::vector<std::vector<T>> hidden;
  std::vector<detail::LayerActivations<T>> layers;
  std::vector<T> pooled, head_tanh, head_mask;
  std::vector<T> outputs;
};

template <typename T>
class RegressionModel {
 public:
  using value_type = T;

  // All weights zero; call init_random() or load parameters.
  explicit RegressionModel(EncoderConfig config);

  // Normal(0, stddev) matrices and embeddings, zero biases, unit norms, zero
  // padding rows. Deterministic for a given seed.
  void init_random(std::uint64_t seed, double stddev = 0.02);

  const EncoderConfig& config() const noexcept { return config_; }
  void set_dropout(double hidden, double attention);

  std::span<T> parameters() noexcept { return params_; }
  std::span<const T> parameters() const noexcept { return params_; }
  std::span<T> gradients() noexcept { return grads_; }
  std::span<const T> gradients() const noexcept { return grads_; }
  const std::vector<ParameterInfo>& parameter_table() const noexcept {
    return table_;
  }
  // Throws std::out_of_range for unknown names.
  const ParameterInfo& parameter_info(std::string_view name) const;
  std::span<T> parameter(std::string_view name);
  std::span<const T> parameter(std::string_view name) const;
  std::span<T> gradient(std::string_view name);

  void zero_grad();

  // Raw (unclamped) head outputs, dropout disabled.
  std::vector<T> forward(const PaddedBatch& batch) const;

  // Training-mode pass: dropout drawn from `rng`, activations stored in
  // `state` for backward().
  std::vector<T> forward_train(const PaddedBatch& batch, std::mt19937_64& rng,
                               ForwardState<T>& state) const;

  // Accumulates d(loss)/d(parameters) into the gradient buffer given
  // d(loss)/d(outputs) for the pass recorded in `state`.
  void backward(const ForwardState<T>& state, std::span<const T> d_outputs);

 private:
  struct Dense {
    std::size_t weight, bias, in, out;
  };
  struct Norm {
    std::size_t gamma, beta;
  };
  struct Layer {
    Dense query, key, value, attn_out;
    Norm attn_norm;
    Dense intermediate, output;
    Norm out_norm;
  };

  void build_layout();
  std::size_t add_param(std::string name, std::vector<std::size_t> shape,
                        bool decay);
  Dense add_dense(const std::string& prefix, std::size_t in, std::size_t out);
  Norm add_norm(const std::string& prefix);
  void run_forward(const PaddedBatch& batch, std::mt19937_64* rng,
                   ForwardState<T>& state) const;
  void validate_batch(const PaddedBatch& batch) const;

  EncoderConfig config_;
  std::vector<ParameterInfo> table_;
  std::vector<T> params_;
  std::vector<T> grads_;

  std::size_t word_emb_ = 0, pos_emb_ = 0, type_emb_ = 0;
  Norm emb_norm_{};
  std::vector<Layer> layers_;
  Dense head_dense_{}, head_out_{};
};

extern template class RegressionModel<float>;
extern template class RegressionModel<double>;

using Model = RegressionModel<float>;

inline double clamp_score(double raw) {
  return raw < 0.0 ? 0.0 : (raw > 1.0 ? 1.0 : raw);
}

// Raw head outputs for pre-tokenized inputs, in order, batched dynamically.
template <typename T>
std::vector<double> raw_scores(const RegressionModel<T>& model,
                               std::span<const TokenizedInput> inputs,
                               std::size_t batch_size);

// Relatedness predictions clamped to [0, 1], in input order. Empty input
// yields empty output.
template <typename T>
std::vector<double> predict(const RegressionModel<T>& model,
                            const Tokenizer& tokenizer,
                            std::span<const LabeledPair> pairs,
                            std::size_t max_tokens, std::size_t batch_size);

}  // namespace strel
