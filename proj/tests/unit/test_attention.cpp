#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "tde/attention.hpp"

using namespace tde;
using tde::test::count_ops;
using tde::test::random_tensor;

namespace {

AttentionConfig constant_maps(AttentionVariant v, std::size_t t, std::size_t c, double weight,
                              double bias, std::size_t k = 7) {
  AttentionConfig cfg;
  cfg.variant = v;
  cfg.temporal_map = LinearSpec::zeros(t, t);
  cfg.channel_map = LinearSpec::zeros(c, c);
  cfg.spatial_map = ConvSpec::zeros(1, 1, k, 1, (k - 1) / 2);
  for (Tensor* w : {&cfg.temporal_map.weights, &cfg.channel_map.weights, &cfg.spatial_map.weights})
    for (double& x : w->data()) x = weight;
  for (Tensor* b : {&cfg.temporal_map.bias, &cfg.channel_map.bias, &cfg.spatial_map.bias})
    for (double& x : b->data()) x = bias;
  return cfg;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

AttentionConfig hand_tcsa() {
  AttentionConfig cfg = constant_maps(AttentionVariant::Tcsa, 2, 1, 0.0, 0.0, 1);
  cfg.temporal_map.weights = Tensor(Shape{2, 2}, {1.0, 0.5, -1.0, 2.0});
  cfg.temporal_map.bias = Tensor(Shape{2}, {0.1, -0.2});
  cfg.channel_map.weights[0] = 0.7;
  cfg.channel_map.bias[0] = 0.05;
  cfg.spatial_map.weights[0] = -1.2;
  cfg.spatial_map.bias[0] = 0.3;
  return cfg;
}

Tensor hand_tcsa_expected(const Tensor& h) {
  const double g1 = logistic(1.0 * h[0] + 0.5 * h[1] + 0.1);
  const double g2 = logistic(-1.0 * h[0] + 2.0 * h[1] - 0.2);
  const double a = g1 * h[0], b = g2 * h[1];
  const double gc = logistic(0.7 * std::max(a, b) + 0.05);
  const double gs = logistic(-1.2 * std::max(gc * a, gc * b) + 0.3);
  return Tensor(Shape{2, 1, 1, 1}, {gs * (gc * a), gs * (gc * b)});
}

AttentionWeights full_weights(const Shape& s, double mask, double value) {
  AttentionWeights w;
  auto make = [&](Shape ws) {
    Tensor spike(ws, mask);
    spike.mark_binary();
    return DimWeights{spike, Tensor(ws, value)};
  };
  w.temporal = make(Shape{s[0], 1, 1, 1});
  w.channel = make(Shape{1, s[1], 1, 1});
  w.spatial = make(Shape{1, 1, s[2], s[3]});
  return w;
}

}  // namespace

TEST(Variant, ParseAndPrint) {
  for (auto v : {AttentionVariant::None, AttentionVariant::Tcsa, AttentionVariant::Sda})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("softmax"), std::invalid_argument);
}

TEST(Tcsa, OpenGatesReturnInput) {
  const Tensor h = random_tensor(Shape{3, 4, 5, 5}, 1);
  const Tensor out = tcsa_apply(h, constant_maps(AttentionVariant::Tcsa, 3, 4, 0.0, 50.0));
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(out[i], h[i], 1e-6);
}

TEST(Tcsa, ClosedGatesSuppressInput) {
  const Tensor h = random_tensor(Shape{3, 4, 5, 5}, 2);
  const Tensor out = tcsa_apply(h, constant_maps(AttentionVariant::Tcsa, 3, 4, 0.0, -50.0));
  for (double v : out.data()) EXPECT_NEAR(v, 0.0, 1e-6);
}

TEST(Tcsa, HandSetTwoStepCase) {
  const Tensor h(Shape{2, 1, 1, 1}, {0.8, -0.3});
  const Tensor out = tcsa_apply(h, hand_tcsa());
  const Tensor expected = hand_tcsa_expected(h);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(out[i], expected[i], 1e-15);
}

TEST(Tcsa, GatesLieInOpenUnitIntervalAndShapeIsKept) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Tensor h = random_tensor(Shape{4, 6, 7, 5}, seed, "h", -3, 3);
    Rng rng(seed, "att");
    const AttentionConfig cfg = make_attention_config(AttentionVariant::Tcsa, 4, 6, rng);
    AttentionWeights w;
    const Tensor out = tcsa_apply(h, cfg, &w);
    EXPECT_EQ(out.shape(), h.shape());
    ASSERT_TRUE(w.complete());
    for (const DimWeights* d : {&*w.temporal, &*w.channel, &*w.spatial})
      for (double g : d->value.data()) {
        EXPECT_GT(g, 0.0);
        EXPECT_LT(g, 1.0);
      }
  }
}

TEST(Tcsa, CostsThreeFullHadamards) {
  const Tensor h = random_tensor(Shape{2, 3, 4, 4}, 3);
  Rng rng(3, "att");
  const AttentionConfig cfg = make_attention_config(AttentionVariant::Tcsa, 2, 3, rng);
  const OpCounts ops = count_ops([&] { tcsa_apply(h, cfg); });
  // Hadamards 3 * 96, FC maps 4 + 9 MACs, a 7x7 same conv on 4x4 sees all 16 pixels per output.
  EXPECT_EQ(ops.mul, 3u * 96u + 4u + 9u + 256u);
  EXPECT_EQ(ops.ac, 4u + 9u + 256u);
}

TEST(Tcsa, RejectsMismatchedMapsAndWrongVariant) {
  const Tensor h(Shape{2, 3, 4, 4});
  EXPECT_THROW(tcsa_apply(h, constant_maps(AttentionVariant::Tcsa, 3, 3, 0, 0)), ShapeError);
  EXPECT_THROW(tcsa_apply(h, constant_maps(AttentionVariant::Tcsa, 2, 2, 0, 0)), ShapeError);
  EXPECT_THROW(tcsa_apply(h, constant_maps(AttentionVariant::Sda, 2, 3, 0, 0)), std::invalid_argument);
  EXPECT_THROW(tcsa_apply(Tensor(Shape{2, 3, 4}), constant_maps(AttentionVariant::Tcsa, 2, 3, 0, 0)),
               ShapeError);
}

TEST(Sda, ZeroMembraneWithZeroMapsGivesSilentMasksAndHalfWeights) {
  const Tensor h(Shape{3, 2, 4, 4});
  const AttentionConfig cfg = constant_maps(AttentionVariant::Sda, 3, 2, 0.0, 0.0);
  for (AttentionDim d : {AttentionDim::Temporal, AttentionDim::Channel, AttentionDim::Spatial}) {
    const DimWeights w = sda_dim_weights(h, d, cfg);
    EXPECT_TRUE(w.spike.is_binary());
    for (double v : w.spike.data()) EXPECT_EQ(v, 0.0);
    for (double v : w.value.data()) EXPECT_EQ(v, 0.5);
  }
}

TEST(Sda, DominantSliceFiresThroughIdentityTemporalMap) {
  Tensor h(Shape{4, 2, 2, 2}, 0.1);
  for (std::size_t i = 16; i < 24; ++i) h[i] = 5.0;
  AttentionConfig cfg = constant_maps(AttentionVariant::Sda, 4, 2, 0.0, 0.0);
  cfg.temporal_map = LinearSpec::identity(4);
  cfg.k_percent = 25.0;
  cfg.lif1.v_th = 0.9;
  const DimWeights w = sda_dim_weights(h, AttentionDim::Temporal, cfg);
  EXPECT_EQ(w.spike, Tensor(Shape{4, 1, 1, 1}, {0, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(w.value[2], logistic(1.0));
}

TEST(Sda, WeightShapes) {
  const Tensor h = random_tensor(Shape{3, 5, 4, 2}, 4);
  Rng rng(4, "att");
  const AttentionConfig cfg = make_attention_config(AttentionVariant::Sda, 3, 5, rng);
  const DimWeights t = sda_dim_weights(h, AttentionDim::Temporal, cfg);
  EXPECT_EQ(t.spike.shape(), (Shape{3, 1, 1, 1}));
  EXPECT_EQ(t.value.shape(), (Shape{3, 1, 1, 1}));
  EXPECT_EQ(sda_dim_weights(h, AttentionDim::Channel, cfg).spike.shape(), (Shape{1, 5, 1, 1}));
  EXPECT_EQ(sda_dim_weights(h, AttentionDim::Spatial, cfg).value.shape(), (Shape{1, 1, 4, 2}));
}

TEST(SdaFuse, ZeroMasksAreTheIdentity) {
  const Tensor h = random_tensor(Shape{2, 3, 2, 2}, 5);
  EXPECT_EQ(sda_fuse(h, full_weights(h.shape(), 0.0, 0.7)), h);
}

TEST(SdaFuse, AllOnesAddThree) {
  const Tensor h = random_tensor(Shape{2, 3, 2, 2}, 6);
  Tensor out;
  const OpCounts ops = count_ops([&] { out = sda_fuse(h, full_weights(h.shape(), 1.0, 1.0)); });
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(out[i], h[i] + 3.0);
  EXPECT_EQ(ops.mul, 0u);
  EXPECT_EQ(ops.ac, 4u * h.size());
}

TEST(SdaFuse, MatchesTripleProductExpansion) {
  const Shape s{2, 3, 2, 2};
  const Tensor h = random_tensor(s, 7);
  AttentionWeights w;
  auto dim = [](Shape ws, std::uint64_t seed) {
    return DimWeights{tde::test::random_spikes(ws, seed), random_tensor(ws, seed, "f")};
  };
  w.temporal = dim(Shape{2, 1, 1, 1}, 1);
  w.channel = dim(Shape{1, 3, 1, 1}, 2);
  w.spatial = dim(Shape{1, 1, 2, 2}, 3);
  const Tensor out = sda_fuse(h, w);
  std::size_t i = 0;
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < 4; ++p, ++i) {
        const double st = w.temporal->spike[t], ft = w.temporal->value[t];
        const double sc = w.channel->spike[c], fc = w.channel->value[c];
        const double ss = w.spatial->spike[p], fs = w.spatial->value[p];
        EXPECT_DOUBLE_EQ(out[i], st * fc * ss + sc * fs * st + ss * ft * sc + h[i]);
      }
}

TEST(SdaFuse, RejectsIncompleteOrUnflaggedWeights) {
  const Tensor h(Shape{2, 3, 2, 2});
  AttentionWeights w = full_weights(h.shape(), 1.0, 1.0);
  w.spatial.reset();
  EXPECT_THROW(sda_fuse(h, w), std::invalid_argument);
  w = full_weights(h.shape(), 1.0, 1.0);
  w.channel->spike.clear_binary();
  EXPECT_THROW(sda_fuse(h, w), std::invalid_argument);
  w = full_weights(Shape{2, 2, 2, 2}, 1.0, 1.0);
  EXPECT_THROW(sda_fuse(h, w), ShapeError);
}

TEST(AttentionForward, NoneIsIdentityWithoutOps) {
  const Tensor h = random_tensor(Shape{2, 3, 4, 4}, 8);
  AttentionConfig cfg;
  AttentionResult r;
  const OpCounts ops = count_ops([&] { r = attention_forward(h, cfg); });
  EXPECT_EQ(r.h_att, h);
  EXPECT_FALSE(r.weights.has_value());
  EXPECT_EQ(ops, OpCounts{});
}

TEST(AttentionForward, TcsaMatchesHandCase) {
  const Tensor h(Shape{2, 1, 1, 1}, {0.8, -0.3});
  const AttentionResult r = attention_forward(h, hand_tcsa());
  EXPECT_EQ(r.h_att, tcsa_apply(h, hand_tcsa()));
  ASSERT_TRUE(r.weights && r.weights->temporal);
  EXPECT_EQ(r.weights->temporal->value.shape(), (Shape{2, 1, 1, 1}));
}

TEST(AttentionForward, SdaZeroGateIsResidual) {
  const Tensor h(Shape{3, 2, 4, 4});
  const AttentionResult r = attention_forward(h, constant_maps(AttentionVariant::Sda, 3, 2, 0, 0));
  EXPECT_EQ(r.h_att, h);
}

TEST(AttentionForward, SdaNeverMultipliesAndRecordsUnderAttentionTag) {
  const std::array<Shape, 3> shapes{Shape{4, 8, 6, 5}, Shape{1, 1, 1, 1}, Shape{6, 3, 9, 2}};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const Shape& s : shapes) {
      const Tensor h = random_tensor(s, seed, "h", -2, 2);
      Rng rng(seed, "att");
      AttentionInit init;
      init.k_percent = 10.0 * static_cast<double>(seed);
      const AttentionConfig cfg = make_attention_config(AttentionVariant::Sda, s[0], s[1], rng, init);
      EnergyLedger ledger;
      AttentionResult r;
      {
        ActiveLedger active(ledger);
        r = attention_forward(h, cfg);
      }
      EXPECT_EQ(ledger.total().mul, 0u) << s.str() << " seed " << seed;
      EXPECT_GT(ledger.counts("attention").ac, 0u);
      EXPECT_EQ(ledger.by_tag().size(), 1u);
      EXPECT_EQ(r.h_att.shape(), s);
    }
  }
}

TEST(MakeAttentionConfig, IsDeterministicAndValid) {
  Rng a(9, "att"), b(9, "att");
  const AttentionConfig x = make_attention_config(AttentionVariant::Sda, 4, 8, a);
  const AttentionConfig y = make_attention_config(AttentionVariant::Sda, 4, 8, b);
  EXPECT_EQ(x.channel_map.weights, y.channel_map.weights);
  EXPECT_NO_THROW(x.validate(Shape{4, 8, 10, 10}));
  for (double v : x.temporal_map.bias.data()) EXPECT_EQ(v, AttentionInit{}.sda_bias);
  Rng c(9, "att");
  AttentionInit even;
  even.spatial_kernel = 4;
  EXPECT_THROW(make_attention_config(AttentionVariant::Tcsa, 4, 8, c, even), std::invalid_argument);
}
