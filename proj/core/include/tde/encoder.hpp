#pragma once

#include <cstddef>
#include <vector>

#include "tde/neuron.hpp"
#include "tde/random.hpp"
#include "tde/tensor.hpp"

namespace tde {

/// State of the spiking encoder: stem Conv-BN, one convolution per time step
/// and the preference coefficients that blend the stem feature with the
/// evolved feature of the previous step.
struct EncoderState {
  ConvSpec stem_conv;
  BatchNormParams stem_bn;
  std::vector<ConvSpec> per_step_convs;
  std::vector<double> alpha;      // used by the next forward pass
  std::vector<double> alpha_bar;  // smoothed value carried across batches

  std::size_t steps() const noexcept { return per_step_convs.size(); }
  std::size_t channels() const noexcept { return stem_conv.out_channels; }
  void validate() const;
};

struct EncoderOptions {
  std::size_t in_channels = 1;
  std::size_t channels = 8;
  std::size_t steps = 4;
  std::size_t kernel = 3;
  double alpha_init = 0.5;
  // When false every step shares the weights of step 1.
  bool independent_step_weights = true;
};

/// Seeded initialisation. Stem weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in));
/// per-step weights ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)); biases zero;
/// identity batch norm.
EncoderState make_encoder(const EncoderOptions& options, Rng& rng);

/// Replicates an image [C, H, W] along a new time axis: [T, C, H, W].
Tensor direct_encode(const Tensor& image, std::size_t steps);

/// Stem Conv-BN (inference statistics) of an input [C_in, H, W].
Tensor stem_features(const Tensor& input, const EncoderState& state);

/// A_0 = F, A_t = alpha_t * F + (1 - alpha_t) * conv_t(A_{t-1}); returns
/// A_1..A_T stacked as [T, C, H, W].
Tensor se_features(const Tensor& stem, const EncoderState& state);

/// LIF over se_features(stem_features(input)).
Tensor se_encode(const Tensor& input, const EncoderState& state, const LifParams& p);

/// LIF over direct_encode(stem_features(input)); the pattern-poor baseline.
Tensor direct_encode_spikes(const Tensor& input, const EncoderState& state, const LifParams& p);

}  // namespace tde
