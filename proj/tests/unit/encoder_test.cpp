#include "strel/encoder.hpp"

#include <gtest/gtest.h>

#include <random>

#include "strel/error.hpp"
#include "strel/training.hpp"
#include "support/fixtures.hpp"

using namespace strel;

namespace {

std::vector<TokenizedInput> inputs_for(const Tokenizer& tok, const PairDataset& ds,
                                       std::size_t max_tokens = 64) {
  std::vector<TokenizedInput> out;
  for (const auto& p : ds) out.push_back(tokenize(tok, p, max_tokens));
  return out;
}

}  // namespace

TEST(EncoderConfig, Validation) {
  EncoderConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.hidden_size, 768u);
  EXPECT_EQ(c.num_layers, 12u);
  EXPECT_EQ(c.max_sequence_length(), 512u);
  c.num_attention_heads = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EncoderConfig{};
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(EncoderConfig::tiny(260, 128).max_sequence_length(), 128u);
}

TEST(Encoder, ParameterLayoutFollowsRobertaNames) {
  const auto tok = Tokenizer::byte_level();
  auto m = fixtures::tiny_model(tok);
  const auto& info = m.parameter_info("roberta.encoder.layer.1.attention.self.query.weight");
  EXPECT_EQ(info.shape, (std::vector<std::size_t>{32, 32}));
  EXPECT_TRUE(info.decay);
  EXPECT_FALSE(m.parameter_info("roberta.embeddings.LayerNorm.weight").decay);
  EXPECT_FALSE(m.parameter_info("classifier.out_proj.bias").decay);
  EXPECT_EQ(m.parameter_info("classifier.out_proj.weight").shape,
            (std::vector<std::size_t>{1, 32}));
  EXPECT_THROW(m.parameter_info("nope"), std::out_of_range);

  std::size_t total = 0;
  for (const auto& p : m.parameter_table()) {
    EXPECT_EQ(p.offset, total);
    total += p.size;
  }
  EXPECT_EQ(total, m.parameters().size());
  // Padding rows start at zero.
  const auto word = m.parameter("roberta.embeddings.word_embeddings.weight");
  for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(word[1 * 32 + j], 0.0f);
}

TEST(Encoder, InitIsDeterministic) {
  const auto tok = Tokenizer::byte_level();
  auto a = fixtures::tiny_model(tok, 3), b = fixtures::tiny_model(tok, 3),
       c = fixtures::tiny_model(tok, 4);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST(Encoder, DuplicatedBatchGivesIdenticalOutputs) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok);
  const auto one = tok.encode_pair("the cat sat", "a dog ran", 64);
  const std::vector<TokenizedInput> eight(8, one);
  const auto out = m.forward(pad_batch(eight, 1));
  for (float v : out) EXPECT_EQ(v, out[0]);
}

TEST(Encoder, PermutingTheBatchPermutesOutputs) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok, 7, 64, 0.2);
  const auto in = inputs_for(tok, fixtures::synthetic_pairs(6));
  auto rev = in;
  std::reverse(rev.begin(), rev.end());
  const auto a = m.forward(pad_batch(in, 1));
  const auto b = m.forward(pad_batch(rev, 1));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[a.size() - 1 - i], 1e-5);
}

TEST(Encoder, ExtraPaddingAndMaskedTokensDoNotChangeOutputs) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok, 7, 64, 0.2);
  const auto in = inputs_for(tok, fixtures::synthetic_pairs(5));
  const auto tight = pad_batch(in, 1);
  auto loose = pad_batch(in, 1, tight.length + 13);
  const auto a = m.forward(tight);
  const auto b = m.forward(loose);
  std::mt19937_64 rng(1);
  for (std::size_t i = 0; i < loose.token_ids.size(); ++i) {
    if (!loose.mask[i]) loose.token_ids[i] = static_cast<std::int32_t>(4 + rng() % 256);
  }
  const auto c = m.forward(loose);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-5);
    EXPECT_NEAR(a[i], c[i], 1e-5);
  }
}

TEST(Encoder, RejectsBadBatches) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok, 7, 16);
  auto b = pad_batch(std::vector<TokenizedInput>{tok.encode_pair("a", "b", 16)}, 1);
  b.token_ids[1] = 9999;
  EXPECT_THROW(m.forward(b), ValidationError);
  const auto long_in = tok.encode_pair(std::string(40, 'x'), std::string(40, 'y'), 64);
  EXPECT_THROW(m.forward(pad_batch(std::vector<TokenizedInput>{long_in}, 1)), ValidationError);
}

TEST(Encoder, DropoutOnlyInTrainingMode) {
  const auto tok = Tokenizer::byte_level();
  auto m = fixtures::tiny_model(tok, 7, 64, 0.2);
  m.set_dropout(0.5, 0.5);
  const auto batch = pad_batch(inputs_for(tok, fixtures::synthetic_pairs(4)), 1);
  EXPECT_EQ(m.forward(batch), m.forward(batch));
  std::mt19937_64 r1(1), r2(2);
  ForwardState<float> s1, s2;
  EXPECT_NE(m.forward_train(batch, r1, s1), m.forward_train(batch, r2, s2));
}

TEST(Encoder, GradientMatchesFiniteDifferencesEverywhere) {
  const auto tok = Tokenizer::byte_level();
  auto m = fixtures::tiny_model<double>(tok, 5, 32, 0.2);
  const auto ds = fixtures::synthetic_pairs(3);
  const auto batch = pad_batch(inputs_for(tok, ds, 32), 1);
  const auto labels = ds.scores();
  std::mt19937_64 rng(0);
  m.zero_grad();
  loss_and_gradient(m, batch, labels, rng);
  const std::vector<double> grad(m.gradients().begin(), m.gradients().end());
  auto loss = [&] {
    const auto out = m.forward(batch);
    return mse_loss(std::vector<double>(out.begin(), out.end()), labels);
  };
  double num = 0, den = 0;
  for (const auto& p : m.parameter_table()) {
    for (std::size_t j = 0; j < p.size; j += std::max<std::size_t>(1, p.size / 5)) {
      double& w = m.parameters()[p.offset + j];
      const double saved = w, h = 1e-6;
      w = saved + h;
      const double lp = loss();
      w = saved - h;
      const double lm = loss();
      w = saved;
      const double fd = (lp - lm) / (2 * h);
      num += (fd - grad[p.offset + j]) * (fd - grad[p.offset + j]);
      den += fd * fd;
      EXPECT_NEAR(grad[p.offset + j], fd, 1e-6 + 1e-4 * std::abs(fd)) << p.name << "[" << j << "]";
    }
  }
  EXPECT_LT(std::sqrt(num / den), 1e-5);
}

TEST(Predict, ClampsAndPreservesOrder) {
  EXPECT_EQ(clamp_score(1.4), 1.0);
  EXPECT_EQ(clamp_score(-0.2), 0.0);
  EXPECT_EQ(clamp_score(0.3), 0.3);

  const auto tok = Tokenizer::byte_level();
  auto m = fixtures::tiny_model(tok);
  // Push the head bias so raw outputs leave [0, 1].
  m.parameter("classifier.out_proj.bias")[0] = 3.0f;
  const auto ds = fixtures::synthetic_pairs(5);
  for (double v : predict(m, tok, ds.pairs(), 64, 2)) EXPECT_EQ(v, 1.0);
  m.parameter("classifier.out_proj.bias")[0] = -3.0f;
  for (double v : predict(m, tok, ds.pairs(), 64, 2)) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(predict(m, tok, std::span<const LabeledPair>{}, 64, 4).empty());
}

TEST(Predict, BatchSizeInvariance) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok, 7, 64, 0.2);
  const auto ds = fixtures::synthetic_pairs(16);
  const auto a = predict(m, tok, ds.pairs(), 64, 1);
  const auto b = predict(m, tok, ds.pairs(), 64, 16);
  const auto c = predict(m, tok, ds.pairs(), 64, 5);
  ASSERT_EQ(a.size(), 16u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-5);
    EXPECT_NEAR(a[i], c[i], 1e-5);
  }
}

TEST(Predict, SameResultUnderEveryKernelSet) {
  const auto tok = Tokenizer::byte_level();
  const auto m = fixtures::tiny_model(tok, 7, 64, 0.2);
  const auto ds = fixtures::synthetic_pairs(6);
  const auto before = kernels::active_isa();
  kernels::set_active_isa(kernels::Isa::scalar);
  const auto ref = predict(m, tok, ds.pairs(), 64, 3);
  for (auto isa : kernels::available_isas()) {
    kernels::set_active_isa(isa);
    const auto got = predict(m, tok, ds.pairs(), 64, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-5);
  }
  kernels::set_active_isa(before);
}
