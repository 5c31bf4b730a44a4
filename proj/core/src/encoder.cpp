#include "tde/encoder.hpp"

#include <cmath>
#include <fmt/format.h>

#include "tde/ledger.hpp"

namespace tde {

namespace {

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

}  // namespace

void EncoderState::validate() const {
  stem_conv.validate();
  const std::size_t t = per_step_convs.size();
  if (t == 0) throw std::invalid_argument("encoder needs at least one time step");
  if (alpha.size() != t || alpha_bar.size() != t)
    throw std::invalid_argument(fmt::format(
        "encoder has {} step convolutions but {} alpha and {} alpha_bar values", t, alpha.size(),
        alpha_bar.size()));
  for (std::size_t i = 0; i < t; ++i) {
    if (!(alpha[i] >= 0.0 && alpha[i] <= 1.0))
      throw std::invalid_argument(fmt::format("alpha[{}] = {} lies outside [0, 1]", i, alpha[i]));
    per_step_convs[i].validate();
    if (!per_step_convs[i].preserves_shape() ||
        per_step_convs[i].in_channels != stem_conv.out_channels)
      throw ShapeError(fmt::format(
          "step convolution {} ({}x{} kernel, stride {}, padding {}, {} -> {} channels) does not "
          "preserve the [{}, H, W] feature shape",
          i + 1, per_step_convs[i].kernel, per_step_convs[i].kernel, per_step_convs[i].stride,
          per_step_convs[i].padding, per_step_convs[i].in_channels,
          per_step_convs[i].out_channels, stem_conv.out_channels));
  }
  if (stem_bn.channels() != stem_conv.out_channels)
    throw ShapeError("stem batch norm does not match stem conv channels");
}

EncoderState make_encoder(const EncoderOptions& o, Rng& rng) {
  if (o.steps == 0 || o.channels == 0 || o.in_channels == 0 || o.kernel == 0 || o.kernel % 2 == 0)
    throw std::invalid_argument("encoder options need positive extents and an odd kernel");
  EncoderState s;
  const std::size_t pad = (o.kernel - 1) / 2;

  Rng stem_rng = rng.split("stem");
  s.stem_conv = ConvSpec::zeros(o.in_channels, o.channels, o.kernel, 1, pad);
  const double stem_fan = static_cast<double>(o.in_channels * o.kernel * o.kernel);
  fill_uniform(s.stem_conv.weights, stem_rng, std::sqrt(6.0 / stem_fan));
  s.stem_bn = BatchNormParams::identity(o.channels);

  Rng step_rng = rng.split("steps");
  const double step_fan = static_cast<double>(o.channels * o.kernel * o.kernel);
  for (std::size_t t = 0; t < o.steps; ++t) {
    if (t > 0 && !o.independent_step_weights) {
      s.per_step_convs.push_back(s.per_step_convs.front());
      continue;
    }
    ConvSpec conv = ConvSpec::zeros(o.channels, o.channels, o.kernel, 1, pad);
    fill_uniform(conv.weights, step_rng, std::sqrt(3.0 / step_fan));
    s.per_step_convs.push_back(std::move(conv));
  }
  s.alpha.assign(o.steps, o.alpha_init);
  s.alpha_bar = s.alpha;
  s.validate();
  return s;
}

Tensor direct_encode(const Tensor& image, std::size_t steps) {
  if (steps < 1) throw std::invalid_argument("direct_encode needs T >= 1");
  std::vector<Tensor> frames(steps, image);
  return stack(frames);
}

Tensor stem_features(const Tensor& input, const EncoderState& state) {
  LedgerTag tag("encoder");
  return batchnorm_eval(conv2d(input, state.stem_conv), state.stem_bn);
}

Tensor se_features(const Tensor& stem, const EncoderState& state) {
  state.validate();
  if (stem.shape().rank() != 3 || stem.shape()[0] != state.channels())
    throw ShapeError(fmt::format("stem feature {} does not have {} channels", stem.shape().str(),
                                 state.channels()));
  LedgerTag tag("encoder");
  std::vector<Tensor> blocks;
  blocks.reserve(state.steps());
  Tensor prev = stem;
  for (std::size_t t = 0; t < state.steps(); ++t) {
    const double a = state.alpha[t];
    Tensor evolved = conv2d(prev, state.per_step_convs[t]);
    prev = axpby(a, stem, 1.0 - a, evolved);
    blocks.push_back(prev);
  }
  return stack(blocks);
}

Tensor se_encode(const Tensor& input, const EncoderState& state, const LifParams& p) {
  if (input.shape().rank() != 3 || input.shape()[0] != state.stem_conv.in_channels)
    throw ShapeError(fmt::format("encoder input {} does not have {} channels",
                                 input.shape().str(), state.stem_conv.in_channels));
  return lif_forward(se_features(stem_features(input, state), state), p);
}

Tensor direct_encode_spikes(const Tensor& input, const EncoderState& state, const LifParams& p) {
  return lif_forward(direct_encode(stem_features(input, state), state.steps()), p);
}

}  // namespace tde
