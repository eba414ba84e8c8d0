#include "strel/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "strel/error.hpp"
#include "strel/kernels.hpp"

namespace strel {
namespace {

template <typename T>
void add_bias(T* y, const T* bias, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = y + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += bias[c];
  }
}

template <typename T>
void layer_norm_forward(const T* x, std::size_t rows, std::size_t width,
                        const T* gamma, const T* beta, T eps, T* y, T* xhat,
                        T* rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * width;
    T mean = 0;
    for (std::size_t c = 0; c < width; ++c) mean += xr[c];
    mean /= static_cast<T>(width);
    T var = 0;
    for (std::size_t c = 0; c < width; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<T>(width);
    const T inv = T(1) / std::sqrt(var + eps);
    rstd[r] = inv;
    T* xh = xhat + r * width;
    T* yr = y + r * width;
    for (std::size_t c = 0; c < width; ++c) {
      xh[c] = (xr[c] - mean) * inv;
      yr[c] = gamma[c] * xh[c] + beta[c];
    }
  }
}

// Overwrites dx; accumulates into dgamma and dbeta.
template <typename T>
void layer_norm_backward(const T* dy, const T* xhat, const T* rstd,
                         const T* gamma, std::size_t rows, std::size_t width,
                         T* dgamma, T* dbeta, T* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dyr = dy + r * width;
    const T* xh = xhat + r * width;
    T* dxr = dx + r * width;
    T mean_d = 0;
    T mean_dx = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const T d = dyr[c] * gamma[c];
      dgamma[c] += dyr[c] * xh[c];
      dbeta[c] += dyr[c];
      mean_d += d;
      mean_dx += d * xh[c];
    }
    mean_d /= static_cast<T>(width);
    mean_dx /= static_cast<T>(width);
    for (std::size_t c = 0; c < width; ++c) {
      const T d = dyr[c] * gamma[c];
      dxr[c] = rstd[r] * (d - mean_d - xh[c] * mean_dx);
    }
  }
}

template <typename T>
std::vector<T> dropout_mask(std::mt19937_64* rng, std::size_t n, double rate) {
  if (rng == nullptr || rate <= 0.0) return {};
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(n);
  for (auto& m : mask) m = keep(*rng) ? scale : T(0);
  return mask;
}

template <typename T>
void apply_mask(std::vector<T>& x, const std::vector<T>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Exact (erf) GELU.
template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(kInvSqrt2)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(kInvSqrt2)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(kInvSqrt2Pi);
  return cdf + x * pdf;
}

}  // namespace

void EncoderConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(hidden_size, "hidden_size");
  positive(num_layers, "num_layers");
  positive(num_attention_heads, "num_attention_heads");
  positive(intermediate_size, "intermediate_size");
  positive(type_vocab_size, "type_vocab_size");
  if (hidden_size % num_attention_heads != 0) {
    throw ConfigError("hidden_size must be divisible by num_attention_heads");
  }
  if (pad_token_id < 0 || static_cast<std::size_t>(pad_token_id) >= vocab_size) {
    throw ConfigError("pad_token_id must be a valid token id");
  }
  if (max_position <= static_cast<std::size_t>(pad_token_id) + 1) {
    throw ConfigError("max_position leaves no room for any token");
  }
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0) ||
      !(attention_dropout_rate >= 0.0 && attention_dropout_rate < 1.0)) {
    throw ConfigError("dropout rates must lie in [0, 1)");
  }
}

std::size_t EncoderConfig::max_sequence_length() const {
  return max_position - static_cast<std::size_t>(pad_token_id) - 1;
}

EncoderConfig EncoderConfig::tiny(std::size_t vocab_size, std::size_t max_tokens) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  c.hidden_size = 32;
  c.num_layers = 2;
  c.num_attention_heads = 4;
  c.intermediate_size = 64;
  c.max_position = max_tokens + 2;
  return c;
}

PaddedBatch pad_batch(std::span<const TokenizedInput> items, std::int32_t pad_id,
                      std::size_t length) {
  std::size_t longest = 0;
  for (const auto& item : items) longest = std::max(longest, item.size());
  if (length == 0) length = longest;
  if (longest > length) {
    throw ValidationError("item of length " + std::to_string(longest) +
                          " does not fit padded length " + std::to_string(length));
  }
  PaddedBatch batch;
  batch.batch_size = items.size();
  batch.length = length;
  batch.token_ids.assign(items.size() * length, pad_id);
  batch.mask.assign(items.size() * length, 0);
  for (std::size_t b = 0; b < items.size(); ++b) {
    const auto& item = items[b];
    if (item.attention_mask.size() != item.token_ids.size()) {
      throw ValidationError("token ids and attention mask differ in length");
    }
    std::copy(item.token_ids.begin(), item.token_ids.end(),
              batch.token_ids.begin() + static_cast<std::ptrdiff_t>(b * length));
    std::copy(item.attention_mask.begin(), item.attention_mask.end(),
              batch.mask.begin() + static_cast<std::ptrdiff_t>(b * length));
  }
  return batch;
}

template <typename T>
RegressionModel<T>::RegressionModel(EncoderConfig config) : config_(config) {
  config_.validate();
  build_layout();
}

template <typename T>
std::size_t RegressionModel<T>::add_param(std::string name,
                                          std::vector<std::size_t> shape,
                                          bool decay) {
  std::size_t size = 1;
  for (auto d : shape) size *= d;
  const std::size_t offset = params_.size();
  table_.push_back({std::move(name), std::move(shape), offset, size, decay});
  params_.resize(offset + size, T(0));
  return offset;
}

template <typename T>
typename RegressionModel<T>::Dense RegressionModel<T>::add_dense(
    const std::string& prefix, std::size_t in, std::size_t out) {
  Dense d{};
  d.in = in;
  d.out = out;
  d.weight = add_param(prefix + ".weight", {out, in}, true);
  d.bias = add_param(prefix + ".bias", {out}, false);
  return d;
}

template <typename T>
typename RegressionModel<T>::Norm RegressionModel<T>::add_norm(
    const std::string& prefix) {
  Norm n{};
  n.gamma = add_param(prefix + ".weight", {config_.hidden_size}, false);
  n.beta = add_param(prefix + ".bias", {config_.hidden_size}, false);
  return n;
}

template <typename T>
void RegressionModel<T>::build_layout() {
  const std::size_t H = config_.hidden_size;
  const std::size_t I = config_.intermediate_size;
  word_emb_ = add_param("roberta.embeddings.word_embeddings.weight",
                        {config_.vocab_size, H}, true);
  pos_emb_ = add_param("roberta.embeddings.position_embeddings.weight",
                       {config_.max_position, H}, true);
  type_emb_ = add_param("roberta.embeddings.token_type_embeddings.weight",
                        {config_.type_vocab_size, H}, true);
  emb_norm_ = add_norm("roberta.embeddings.LayerNorm");
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "roberta.encoder.layer." + std::to_string(l);
    Layer layer{};
    layer.query = add_dense(p + ".attention.self.query", H, H);
    layer.key = add_dense(p + ".attention.self.key", H, H);
    layer.value = add_dense(p + ".attention.self.value", H, H);
    layer.attn_out = add_dense(p + ".attention.output.dense", H, H);
    layer.attn_norm = add_norm(p + ".attention.output.LayerNorm");
    layer.intermediate = add_dense(p + ".intermediate.dense", H, I);
    layer.output = add_dense(p + ".output.dense", I, H);
    layer.out_norm = add_norm(p + ".output.LayerNorm");
    layers_.push_back(layer);
  }
  head_dense_ = add_dense("classifier.dense", H, H);
  head_out_ = add_dense("classifier.out_proj", H, 1);
  grads_.assign(params_.size(), T(0));
  // Norm scales start at one so a fresh model is well defined.
  for (const auto& info : table_) {
    if (info.name.ends_with("LayerNorm.weight")) {
      std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(info.offset),
                  info.size, T(1));
    }
  }
}

template <typename T>
void RegressionModel<T>::init_random(std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (const auto& info : table_) {
    auto p = std::span<T>(params_).subspan(info.offset, info.size);
    if (info.name.ends_with("LayerNorm.weight")) {
      std::fill(p.begin(), p.end(), T(1));
    } else if (info.decay) {
      for (auto& x : p) x = static_cast<T>(normal(rng));
    } else {
      std::fill(p.begin(), p.end(), T(0));
    }
  }
  const std::size_t H = config_.hidden_size;
  const auto pad = static_cast<std::size_t>(config_.pad_token_id);
  std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(word_emb_ + pad * H), H, T(0));
  std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(pos_emb_ + pad * H), H, T(0));
}

template <typename T>
void RegressionModel<T>::set_dropout(double hidden, double attention) {
  EncoderConfig c = config_;
  c.dropout_rate = hidden;
  c.attention_dropout_rate = attention;
  c.validate();
  config_ = c;
}

template <typename T>
const ParameterInfo& RegressionModel<T>::parameter_info(std::string_view name) const {
  for (const auto& info : table_) {
    if (info.name == name) return info;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

template <typename T>
std::span<T> RegressionModel<T>::parameter(std::string_view name) {
  const auto& info = parameter_info(name);
  return std::span<T>(params_).subspan(info.offset, info.size);
}

template <typename T>
std::span<const T> RegressionModel<T>::parameter(std::string_view name) const {
  const auto& info = parameter_info(name);
  return std::span<const T>(params_).subspan(info.offset, info.size);
}

template <typename T>
std::span<T> RegressionModel<T>::gradient(std::string_view name) {
  const auto& info = parameter_info(name);
  return std::span<T>(grads_).subspan(info.offset, info.size);
}

template <typename T>
void RegressionModel<T>::zero_grad() {
  std::fill(grads_.begin(), grads_.end(), T(0));
}

template <typename T>
void RegressionModel<T>::validate_batch(const PaddedBatch& batch) const {
  if (batch.token_ids.size() != batch.batch_size * batch.length ||
      batch.mask.size() != batch.token_ids.size()) {
    throw ValidationError("padded batch has inconsistent dimensions");
  }
  if (batch.length > config_.max_sequence_length()) {
    throw ValidationError("batch length " + std::to_string(batch.length) +
                          " exceeds the model's maximum sequence length " +
                          std::to_string(config_.max_sequence_length()));
  }
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    if (batch.length == 0 || batch.mask[b * batch.length] == 0) {
      throw ValidationError("every batch item needs a leading unmasked token");
    }
  }
  for (auto id : batch.token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw ValidationError("token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(config_.vocab_size));
    }
  }
}

template <typename T>
void RegressionModel<T>::run_forward(const PaddedBatch& batch,
                                     std::mt19937_64* rng,
                                     ForwardState<T>& st) const {
  validate_batch(batch);
  const auto& k = kernels::active<T>();
  const bool training = rng != nullptr;
  const std::size_t B = batch.batch_size;
  const std::size_t S = batch.length;
  const std::size_t N = B * S;
  const std::size_t H = config_.hidden_size;
  const std::size_t A = config_.num_attention_heads;
  const std::size_t D = H / A;
  const std::size_t I = config_.intermediate_size;
  const T eps = static_cast<T>(config_.layer_norm_eps);
  const T attn_scale = T(1) / std::sqrt(static_cast<T>(D));
  const double p_hidden = training ? config_.dropout_rate : 0.0;
  const double p_attn = training ? config_.attention_dropout_rate : 0.0;
  const T* P = params_.data();

  st.batch = batch;
  st.position_ids.assign(N, config_.pad_token_id);
  for (std::size_t b = 0; b < B; ++b) {
    std::int32_t seen = 0;
    for (std::size_t s = 0; s < S; ++s) {
      if (batch.mask[b * S + s]) {
        st.position_ids[b * S + s] = config_.pad_token_id + (++seen);
      }
    }
  }

  // Embeddings.
  std::vector<T> emb(N * H);
  for (std::size_t n = 0; n < N; ++n) {
    const T* w = P + word_emb_ + static_cast<std::size_t>(batch.token_ids[n]) * H;
    const T* p = P + pos_emb_ + static_cast<std::size_t>(st.position_ids[n]) * H;
    const T* t = P + type_emb_;
    T* e = emb.data() + n * H;
    for (std::size_t c = 0; c < H; ++c) e[c] = w[c] + p[c] + t[c];
  }
  st.hidden.assign(config_.num_layers + 1, {});
  st.hidden[0].resize(N * H);
  st.emb_xhat.resize(N * H);
  st.emb_rstd.resize(N);
  layer_norm_forward(emb.data(), N, H, P + emb_norm_.gamma, P + emb_norm_.beta,
                     eps, st.hidden[0].data(), st.emb_xhat.data(),
                     st.emb_rstd.data());
  st.emb_mask = dropout_mask<T>(rng, N * H, p_hidden);
  apply_mask(st.hidden[0], st.emb_mask);

  auto dense = [&](const Dense& d, const T* x, std::size_t rows, T* y) {
    k.gemm_nt(rows, d.out, d.in, x, d.in, P + d.weight, d.in, y, d.out, false);
    add_bias(y, P + d.bias, rows, d.out);
  };

  st.layers.assign(training ? config_.num_layers : 1, {});
  std::vector<T> dropped_probs(training && p_attn > 0.0 ? S * S : 0);
  std::vector<T> tmp(N * H);

  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const Layer& L = layers_[l];
    auto& a = st.layers[training ? l : 0];
    const T* x = st.hidden[l].data();

    a.q.resize(N * H);
    a.k.resize(N * H);
    a.v.resize(N * H);
    dense(L.query, x, N, a.q.data());
    dense(L.key, x, N, a.k.data());
    dense(L.value, x, N, a.v.data());

    a.probs.resize(B * A * S * S);
    a.probs_mask = dropout_mask<T>(rng, B * A * S * S, p_attn);
    a.context.assign(N * H, T(0));
    for (std::size_t b = 0; b < B; ++b) {
      const std::uint8_t* mask = batch.mask.data() + b * S;
      for (std::size_t h = 0; h < A; ++h) {
        const std::size_t off = b * S * H + h * D;
        T* probs = a.probs.data() + (b * A + h) * S * S;
        k.gemm_nt(S, S, D, a.q.data() + off, H, a.k.data() + off, H, probs, S,
                  false);
        for (std::size_t i = 0; i < S; ++i) {
          T* row = probs + i * S;
          T max = -std::numeric_limits<T>::infinity();
          for (std::size_t j = 0; j < S; ++j) {
            if (mask[j]) max = std::max(max, row[j] * attn_scale);
          }
          T sum = 0;
          for (std::size_t j = 0; j < S; ++j) {
            row[j] = mask[j] ? std::exp(row[j] * attn_scale - max) : T(0);
            sum += row[j];
          }
          const T inv = T(1) / sum;
          for (std::size_t j = 0; j < S; ++j) row[j] *= inv;
        }
        const T* used = probs;
        if (!a.probs_mask.empty()) {
          const T* m = a.probs_mask.data() + (b * A + h) * S * S;
          for (std::size_t i = 0; i < S * S; ++i) dropped_probs[i] = probs[i] * m[i];
          used = dropped_probs.data();
        }
        k.gemm_nn(S, D, S, used, S, a.v.data() + off, H, a.context.data() + off,
                  H, false);
      }
    }

    dense(L.attn_out, a.context.data(), N, tmp.data());
    a.attn_mask = dropout_mask<T>(rng, N * H, p_hidden);
    apply_mask(tmp, a.attn_mask);
    for (std::size_t i = 0; i < N * H; ++i) tmp[i] += x[i];
    a.h1.resize(N * H);
    a.ln1_xhat.resize(N * H);
    a.ln1_rstd.resize(N);
    layer_norm_forward(tmp.data(), N, H, P + L.attn_norm.gamma,
                       P + L.attn_norm.beta, eps, a.h1.data(), a.ln1_xhat.data(),
                       a.ln1_rstd.data());

    a.pre_gelu.resize(N * I);
    a.gelu.resize(N * I);
    dense(L.intermediate, a.h1.data(), N, a.pre_gelu.data());
    for (std::size_t i = 0; i < N * I; ++i) a.gelu[i] = gelu(a.pre_gelu[i]);
    dense(L.output, a.gelu.data(), N, tmp.data());
    a.ffn_mask = dropout_mask<T>(rng, N * H, p_hidden);
    apply_mask(tmp, a.ffn_mask);
    for (std::size_t i = 0; i < N * H; ++i) tmp[i] += a.h1[i];
    st.hidden[l + 1].resize(N * H);
    a.ln2_xhat.resize(N * H);
    a.ln2_rstd.resize(N);
    layer_norm_forward(tmp.data(), N, H, P + L.out_norm.gamma,
                       P + L.out_norm.beta, eps, st.hidden[l + 1].data(),
                       a.ln2_xhat.data(), a.ln2_rstd.data());
    if (!training) st.hidden[l].clear();
  }

  // Head on the first token of every item.
  const std::vector<T>& last = st.hidden[config_.num_layers];
  st.pooled.resize(B * H);
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(last.begin() + static_cast<std::ptrdiff_t>(b * S * H), H,
                st.pooled.begin() + static_cast<std::ptrdiff_t>(b * H));
  }
  st.head_tanh.resize(B * H);
  dense(head_dense_, st.pooled.data(), B, st.head_tanh.data());
  for (auto& v : st.head_tanh) v = std::tanh(v);
  st.head_mask = dropout_mask<T>(rng, B * H, p_hidden);
  std::vector<T> dropped = st.head_tanh;
  apply_mask(dropped, st.head_mask);
  st.outputs.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    st.outputs[b] = k.dot(dropped.data() + b * H, P + head_out_.weight, H) +
                    P[head_out_.bias];
  }
}

template <typename T>
std::vector<T> RegressionModel<T>::forward(const PaddedBatch& batch) const {
  ForwardState<T> state;
  run_forward(batch, nullptr, state);
  return std::move(state.outputs);
}

template <typename T>
std::vector<T> RegressionModel<T>::forward_train(const PaddedBatch& batch,
                                                 std::mt19937_64& rng,
                                                 ForwardState<T>& state) const {
  run_forward(batch, &rng, state);
  return state.outputs;
}

template <typename T>
void RegressionModel<T>::backward(const ForwardState<T>& st,
                                  std::span<const T> d_out) {
  const auto& k = kernels::active<T>();
  const std::size_t B = st.batch.batch_size;
  const std::size_t S = st.batch.length;
  const std::size_t N = B * S;
  const std::size_t H = config_.hidden_size;
  const std::size_t A = config_.num_attention_heads;
  const std::size_t D = H / A;
  const std::size_t I = config_.intermediate_size;
  const T attn_scale = T(1) / std::sqrt(static_cast<T>(D));
  if (d_out.size() != B) {
    throw std::invalid_argument("backward: one output gradient per item required");
  }
  if (st.layers.size() != config_.num_layers) {
    throw std::logic_error("backward needs the state of a training forward pass");
  }
  const T* P = params_.data();
  T* G = grads_.data();

  // dY[rows x out], X[rows x in]; accumulates weight and bias gradients and
  // writes (or adds to) dX[rows x in] when requested.
  auto dense_back = [&](const Dense& d, const T* dy, const T* x, std::size_t rows,
                        T* dx, bool accumulate_dx) {
    k.gemm_tn(d.out, d.in, rows, dy, d.out, x, d.in, G + d.weight, d.in, true);
    T* db = G + d.bias;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* row = dy + r * d.out;
      for (std::size_t c = 0; c < d.out; ++c) db[c] += row[c];
    }
    if (dx != nullptr) {
      k.gemm_nn(rows, d.in, d.out, dy, d.out, P + d.weight, d.in, dx, d.in,
                accumulate_dx);
    }
  };

  // Head.
  std::vector<T> dropped = st.head_tanh;
  apply_mask(dropped, st.head_mask);
  std::vector<T> dz(B * H);
  for (std::size_t b = 0; b < B; ++b) {
    const T g = d_out[b];
    G[head_out_.bias] += g;
    k.axpy(H, g, dropped.data() + b * H, G + head_out_.weight);
    for (std::size_t c = 0; c < H; ++c) {
      T d = g * P[head_out_.weight + c];
      if (!st.head_mask.empty()) d *= st.head_mask[b * H + c];
      const T t = st.head_tanh[b * H + c];
      dz[b * H + c] = d * (T(1) - t * t);
    }
  }
  std::vector<T> dpooled(B * H);
  dense_back(head_dense_, dz.data(), st.pooled.data(), B, dpooled.data(), false);

  std::vector<T> dh(N * H, T(0));
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(dpooled.begin() + static_cast<std::ptrdiff_t>(b * H), H,
                dh.begin() + static_cast<std::ptrdiff_t>(b * S * H));
  }

  std::vector<T> dr(N * H), dh1(N * H), dtmp(N * H), dctx(N * H);
  std::vector<T> dq(N * H), dk(N * H), dv(N * H);
  std::vector<T> dmid(N * I);
  std::vector<T> dprobs(S * S), dscores(S * S), dropped_probs(S * S);

  for (std::size_t li = config_.num_layers; li-- > 0;) {
    const Layer& L = layers_[li];
    const auto& a = st.layers[li];
    const T* x = st.hidden[li].data();

    // Output LayerNorm and residual.
    layer_norm_backward(dh.data(), a.ln2_xhat.data(), a.ln2_rstd.data(),
                        P + L.out_norm.gamma, N, H, G + L.out_norm.gamma,
                        G + L.out_norm.beta, dr.data());
    dh1 = dr;
    dtmp = dr;
    apply_mask(dtmp, a.ffn_mask);
    dense_back(L.output, dtmp.data(), a.gelu.data(), N, dmid.data(), false);
    for (std::size_t i = 0; i < N * I; ++i) dmid[i] *= gelu_grad(a.pre_gelu[i]);
    dense_back(L.intermediate, dmid.data(), a.h1.data(), N, dh1.data(), true);

    // Attention LayerNorm and residual.
    layer_norm_backward(dh1.data(), a.ln1_xhat.data(), a.ln1_rstd.data(),
                        P + L.attn_norm.gamma, N, H, G + L.attn_norm.gamma,
                        G + L.attn_norm.beta, dr.data());
    dtmp = dr;
    apply_mask(dtmp, a.attn_mask);
    dense_back(L.attn_out, dtmp.data(), a.context.data(), N, dctx.data(), false);

    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < A; ++h) {
        const std::size_t off = b * S * H + h * D;
        const T* probs = a.probs.data() + (b * A + h) * S * S;
        const T* used = probs;
        const T* m = nullptr;
        if (!a.probs_mask.empty()) {
          m = a.probs_mask.data() + (b * A + h) * S * S;
          for (std::size_t i = 0; i < S * S; ++i) dropped_probs[i] = probs[i] * m[i];
          used = dropped_probs.data();
        }
        k.gemm_nt(S, S, D, dctx.data() + off, H, a.v.data() + off, H,
                  dprobs.data(), S, false);
        k.gemm_tn(S, D, S, used, S, dctx.data() + off, H, dv.data() + off, H,
                  false);
        if (m != nullptr) {
          for (std::size_t i = 0; i < S * S; ++i) dprobs[i] *= m[i];
        }
        for (std::size_t i = 0; i < S; ++i) {
          const T* pr = probs + i * S;
          const T* dp = dprobs.data() + i * S;
          const T inner = k.dot(pr, dp, S);
          T* ds = dscores.data() + i * S;
          for (std::size_t j = 0; j < S; ++j) {
            ds[j] = pr[j] * (dp[j] - inner) * attn_scale;
          }
        }
        k.gemm_nn(S, D, S, dscores.data(), S, a.k.data() + off, H,
                  dq.data() + off, H, false);
        k.gemm_tn(S, D, S, dscores.data(), S, a.q.data() + off, H,
                  dk.data() + off, H, false);
      }
    }

    // dx = residual + projections back through Q, K, V.
    dense_back(L.query, dq.data(), x, N, dr.data(), true);
    dense_back(L.key, dk.data(), x, N, dr.data(), true);
    dense_back(L.value, dv.data(), x, N, dr.data(), true);
    dh.swap(dr);
  }

  // Embeddings.
  apply_mask(dh, st.emb_mask);
  layer_norm_backward(dh.data(), st.emb_xhat.data(), st.emb_rstd.data(),
                      P + emb_norm_.gamma, N, H, G + emb_norm_.gamma,
                      G + emb_norm_.beta, dr.data());
  for (std::size_t n = 0; n < N; ++n) {
    const T* d = dr.data() + n * H;
    const auto tok = st.batch.token_ids[n];
    const auto pos = st.position_ids[n];
    if (tok != config_.pad_token_id) {
      k.axpy(H, T(1), d, G + word_emb_ + static_cast<std::size_t>(tok) * H);
    }
    if (pos != config_.pad_token_id) {
      k.axpy(H, T(1), d, G + pos_emb_ + static_cast<std::size_t>(pos) * H);
    }
    k.axpy(H, T(1), d, G + type_emb_);
  }
}

template class RegressionModel<float>;
template class RegressionModel<double>;

template <typename T>
std::vector<double> raw_scores(const RegressionModel<T>& model,
                               std::span<const TokenizedInput> inputs,
                               std::size_t batch_size) {
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  std::vector<double> out;
  out.reserve(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    const auto chunk =
        inputs.subspan(start, std::min(batch_size, inputs.size() - start));
    const auto batch = pad_batch(chunk, model.config().pad_token_id);
    for (T v : model.forward(batch)) out.push_back(static_cast<double>(v));
  }
  return out;
}

template <typename T>
std::vector<double> predict(const RegressionModel<T>& model,
                            const Tokenizer& tokenizer,
                            std::span<const LabeledPair> pairs,
                            std::size_t max_tokens, std::size_t batch_size) {
  std::vector<TokenizedInput> inputs;
  inputs.reserve(pairs.size());
  for (const auto& p : pairs) inputs.push_back(tokenize(tokenizer, p, max_tokens));
  auto scores = raw_scores(model, inputs, batch_size);
  for (auto& s : scores) s = clamp_score(s);
  return scores;
}

template std::vector<double> raw_scores(const RegressionModel<float>&,
                                        std::span<const TokenizedInput>,
                                        std::size_t);
template std::vector<double> raw_scores(const RegressionModel<double>&,
                                        std::span<const TokenizedInput>,
                                        std::size_t);
template std::vector<double> predict(const RegressionModel<float>&,
                                     const Tokenizer&, std::span<const LabeledPair>,
                                     std::size_t, std::size_t);
template std::vector<double> predict(const RegressionModel<double>&,
                                     const Tokenizer&, std::span<const LabeledPair>,
                                     std::size_t, std::size_t);

}  // namespace strel
