#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tde/autodiff.hpp"
#include "tde/neuron.hpp"

namespace tde {

/// Three spiking conv layers regressing a single box (cx, cy, w, h) from
/// synthetic images, trained with Adam on a smooth-L1 loss.
///
/// baseline: conv1 -> direct encode -> LIF -> conv2 -> LIF -> conv3 -> mean_T -> fc
/// tde:      conv1 -> spiking encoder -> LIF -> conv2 -> float attention -> LIF
///           -> conv3 -> mean_T -> fc, with the attention's temporal weights
///           gating the encoder coefficients after every step.
struct ToyTrainConfig {
  std::uint64_t seed = 42;
  std::size_t steps = 200;
  std::size_t time_steps = 4;
  std::size_t image = 16;
  std::size_t batch = 8;
  std::size_t train_size = 128;
  std::size_t eval_size = 32;
  double learning_rate = 3e-3;
  LifParams lif{};
  ad::SpikeMode mode = ad::SpikeMode::Spiking;

  void validate() const;
};

struct LossCurves {
  // Entry i is the mean held-out loss after i updates (steps + 1 entries).
  std::vector<double> baseline;
  std::vector<double> tde;
  // Encoder coefficients used at every update of the tde run.
  std::vector<std::vector<double>> alpha;
};

LossCurves train_toy(const ToyTrainConfig& config);

inline constexpr std::size_t kLossSmoothingWindow = 20;

/// Trailing moving average; entry i averages values[max(0, i - window + 1) .. i].
std::vector<double> moving_average(std::span<const double> values, std::size_t window);

}  // namespace tde
