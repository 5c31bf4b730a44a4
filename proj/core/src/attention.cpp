#include "tde/attention.hpp"

#include <cmath>
#include <fmt/format.h>

#include "tde/ledger.hpp"

namespace tde {

std::string_view to_string(AttentionVariant v) noexcept {
  switch (v) {
    case AttentionVariant::Tcsa:
      return "tcsa";
    case AttentionVariant::Sda:
      return "sda";
    case AttentionVariant::None:
      break;
  }
  return "none";
}

AttentionVariant parse_variant(std::string_view name) {
  if (name == "none") return AttentionVariant::None;
  if (name == "tcsa") return AttentionVariant::Tcsa;
  if (name == "sda") return AttentionVariant::Sda;
  throw std::invalid_argument(
      fmt::format("unknown attention variant '{}' (expected none, tcsa or sda)", name));
}

void AttentionConfig::validate(const Shape& h) const {
  if (h.rank() != 4)
    throw ShapeError(fmt::format("attention expects a [T, C, H, W] membrane, got {}", h.str()));
  if (variant == AttentionVariant::None) return;
  temporal_map.validate();
  channel_map.validate();
  spatial_map.validate();
  if (temporal_map.in_features != h[0] || temporal_map.out_features != h[0])
    throw ShapeError(fmt::format("temporal map {} does not fit T = {} of {}",
                                 temporal_map.weights.shape().str(), h[0], h.str()));
  if (channel_map.in_features != h[1] || channel_map.out_features != h[1])
    throw ShapeError(fmt::format("channel map {} does not fit C = {} of {}",
                                 channel_map.weights.shape().str(), h[1], h.str()));
  if (spatial_map.in_channels != 1 || !spatial_map.preserves_shape())
    throw ShapeError(fmt::format("spatial map {} must be a single-channel same-padding conv",
                                 spatial_map.weights.shape().str()));
  if (variant == AttentionVariant::Sda) {
    lif1.validate();
    if (!(k_percent > 0.0 && k_percent <= 100.0))
      throw std::invalid_argument(fmt::format("k_percent {} outside (0, 100]", k_percent));
  }
}

AttentionConfig make_attention_config(AttentionVariant variant, std::size_t steps,
                                      std::size_t channels, Rng& rng, const AttentionInit& init) {
  if (init.spatial_kernel % 2 == 0)
    throw std::invalid_argument("spatial attention kernel must be odd");
  AttentionConfig cfg;
  cfg.variant = variant;
  cfg.k_percent = init.k_percent;
  cfg.lif1 = init.lif1;

  const double bias = variant == AttentionVariant::Sda ? init.sda_bias : 0.0;
  auto fill = [&](Tensor& w, Tensor& b, Rng r, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (double& v : w.data()) v = r.uniform(-bound, bound);
    for (double& v : b.data()) v = bias;
  };

  cfg.temporal_map = LinearSpec::zeros(steps, steps);
  fill(cfg.temporal_map.weights, cfg.temporal_map.bias, rng.split("temporal"),
       static_cast<double>(steps));
  cfg.channel_map = LinearSpec::zeros(channels, channels);
  fill(cfg.channel_map.weights, cfg.channel_map.bias, rng.split("channel"),
       static_cast<double>(channels));
  const std::size_t k = init.spatial_kernel;
  cfg.spatial_map = ConvSpec::zeros(1, 1, k, 1, (k - 1) / 2);
  fill(cfg.spatial_map.weights, cfg.spatial_map.bias, rng.split("spatial"),
       static_cast<double>(k * k));
  return cfg;
}

namespace {

constexpr std::size_t kT = 0, kC = 1, kH = 2, kW = 3;

Tensor squeeze(const Tensor& h, AttentionDim dim) {
  switch (dim) {
    case AttentionDim::Temporal:
      return maxpool_over(h, std::initializer_list<std::size_t>{kC, kH, kW});
    case AttentionDim::Channel:
      return maxpool_over(h, std::initializer_list<std::size_t>{kT, kH, kW});
    case AttentionDim::Spatial:
      break;
  }
  return maxpool_over(h, std::initializer_list<std::size_t>{kT, kC});
}

Shape weight_shape(const Shape& h, AttentionDim dim) {
  switch (dim) {
    case AttentionDim::Temporal:
      return Shape{h[kT], 1, 1, 1};
    case AttentionDim::Channel:
      return Shape{1, h[kC], 1, 1};
    case AttentionDim::Spatial:
      break;
  }
  return Shape{1, 1, h[kH], h[kW]};
}

// Applies the dimension's map to a squeezed tensor and returns the
// pre-activation flattened in the layout the map produces.
Tensor apply_map(const Tensor& squeezed, const Shape& h, AttentionDim dim,
                 const AttentionConfig& cfg) {
  switch (dim) {
    case AttentionDim::Temporal:
      return linear(squeezed.reshaped(Shape{h[kT]}), cfg.temporal_map);
    case AttentionDim::Channel:
      return linear(squeezed.reshaped(Shape{h[kC]}), cfg.channel_map);
    case AttentionDim::Spatial:
      break;
  }
  return conv2d(squeezed.reshaped(Shape{1, h[kH], h[kW]}), cfg.spatial_map);
}

}  // namespace

Tensor tcsa_apply(const Tensor& h, const AttentionConfig& cfg, AttentionWeights* weights) {
  if (cfg.variant != AttentionVariant::Tcsa)
    throw std::invalid_argument("tcsa_apply called with a non-tcsa config");
  cfg.validate(h.shape());
  Tensor out = h;
  for (AttentionDim dim : {AttentionDim::Temporal, AttentionDim::Channel, AttentionDim::Spatial}) {
    const Shape ws = weight_shape(h.shape(), dim);
    Tensor gate = sigmoid(apply_map(squeeze(out, dim), h.shape(), dim, cfg)).reshaped(ws);
    out = broadcast_combine(gate, out, Combine::Mul);
    if (weights != nullptr) {
      std::optional<DimWeights>& slot = dim == AttentionDim::Temporal ? weights->temporal
                                        : dim == AttentionDim::Channel ? weights->channel
                                                                       : weights->spatial;
      slot.emplace();
      slot->value = std::move(gate);
    }
  }
  return out;
}

DimWeights sda_dim_weights(const Tensor& h, AttentionDim dim, const AttentionConfig& cfg) {
  if (cfg.variant != AttentionVariant::Sda)
    throw std::invalid_argument("sda_dim_weights called with a non-sda config");
  cfg.validate(h.shape());
  const Shape ws = weight_shape(h.shape(), dim);
  const Tensor fired = lif0_topk(squeeze(h, dim), cfg.k_percent);
  const Tensor pre = apply_map(fired, h.shape(), dim, cfg);

  // The temporal group integrates over its T outputs as a time sequence; the
  // channel and spatial groups see a single step.
  const Shape sequence = dim == AttentionDim::Temporal ? Shape{h.shape()[kT]}
                         : dim == AttentionDim::Channel ? Shape{1, h.shape()[kC]}
                                                        : Shape{1, h.shape()[kH], h.shape()[kW]};
  DualOutput dual = lif1_dual(pre.reshaped(sequence), cfg.lif1);
  return DimWeights{dual.spikes.reshaped(ws), sigmoid(dual.membrane).reshaped(ws)};
}

Tensor sda_fuse(const Tensor& h, const AttentionWeights& w) {
  if (!w.complete())
    throw std::invalid_argument("sda_fuse needs temporal, channel and spatial weights");
  const Shape& s = h.shape();
  if (s.rank() != 4) throw ShapeError(fmt::format("sda_fuse expects rank 4, got {}", s.str()));
  const std::size_t steps = s[kT], chans = s[kC], plane = s[kH] * s[kW];
  auto check = [&](const DimWeights& d, AttentionDim dim, std::string_view name) {
    const Shape expected = weight_shape(s, dim);
    if (d.spike.shape() != expected || d.value.shape() != expected)
      throw ShapeError(fmt::format("{} weights {} / {} do not match {} for membrane {}", name,
                                   d.spike.shape().str(), d.value.shape().str(), expected.str(),
                                   s.str()));
    if (!d.spike.is_binary())
      throw std::invalid_argument(fmt::format("{} spike weights are not binary-flagged", name));
  };
  check(*w.temporal, AttentionDim::Temporal, "temporal");
  check(*w.channel, AttentionDim::Channel, "channel");
  check(*w.spatial, AttentionDim::Spatial, "spatial");

  const Tensor& st = w.temporal->spike;
  const Tensor& ft = w.temporal->value;
  const Tensor& sc = w.channel->spike;
  const Tensor& fc = w.channel->value;
  const Tensor& ss = w.spatial->spike;
  const Tensor& fs = w.spatial->value;

  Tensor out(s);
  std::uint64_t acs = 0;
  std::size_t i = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const bool t_on = st[t] != 0.0;
    for (std::size_t c = 0; c < chans; ++c) {
      const bool c_on = sc[c] != 0.0;
      for (std::size_t p = 0; p < plane; ++p, ++i) {
        const bool p_on = ss[p] != 0.0;
        double g = 0.0;
        if (t_on && p_on) {
          g += fc[c];
          ++acs;
        }
        if (c_on && t_on) {
          g += fs[p];
          ++acs;
        }
        if (p_on && c_on) {
          g += ft[t];
          ++acs;
        }
        out[i] = g + h[i];
      }
    }
  }
  counting::ac(acs + h.size());
  return out;
}

AttentionResult attention_forward(const Tensor& h, const AttentionConfig& cfg) {
  cfg.validate(h.shape());
  LedgerTag tag("attention");
  switch (cfg.variant) {
    case AttentionVariant::None:
      return AttentionResult{h, std::nullopt};
    case AttentionVariant::Tcsa: {
      AttentionWeights w;
      Tensor out = tcsa_apply(h, cfg, &w);
      return AttentionResult{std::move(out), std::move(w)};
    }
    case AttentionVariant::Sda:
      break;
  }
  AttentionWeights w;
  w.temporal = sda_dim_weights(h, AttentionDim::Temporal, cfg);
  w.channel = sda_dim_weights(h, AttentionDim::Channel, cfg);
  w.spatial = sda_dim_weights(h, AttentionDim::Spatial, cfg);
  Tensor out = sda_fuse(h, w);
  return AttentionResult{std::move(out), std::move(w)};
}

}  // namespace tde
