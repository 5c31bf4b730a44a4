#pragma once

#include <optional>

#include "tde/tensor.hpp"

namespace tde {

/// Leaky integrate-and-fire parameters. The defaults are this library's
/// choices; nothing upstream fixes them.
struct LifParams {
  double v_th = 1.0;             // firing threshold
  double beta = 0.5;             // leak factor applied after the soft reset
  double surrogate_alpha = 2.0;  // sharpness of the atan surrogate

  void validate() const;
};

struct LifState {
  Tensor v;  // membrane potential carried into the next step
};

struct LifStep {
  Tensor spikes;     // S_t, binary
  LifState state;    // V_t
  Tensor pre_reset;  // H_t = V_{t-1} + X_t
};

/// One step of the soft-reset LIF recurrence:
///   H = V + x,  S = [H >= v_th],  V' = beta * (H - v_th * S).
/// A neuron sitting exactly on the threshold fires.
LifStep lif_step(const LifState& state, const Tensor& x, const LifParams& p);

/// Folds lif_step over the leading (time) axis of `inputs`, starting from
/// `v0` or zeros. Returns a binary tensor of the same shape.
Tensor lif_forward(const Tensor& inputs, const LifParams& p,
                   const std::optional<Tensor>& v0 = std::nullopt);

/// Threshold-free group: fires exactly ceil(k_percent/100 * N) neurons, the
/// ones with the largest input, lowest flat index first on ties.
Tensor lif0_topk(const Tensor& x, double k_percent);

struct DualOutput {
  Tensor spikes;    // as lif_forward
  Tensor membrane;  // pre-reset potentials H_t per step
};

/// Threshold group that also exposes its membrane potential.
DualOutput lif1_dual(const Tensor& inputs, const LifParams& p);

}  // namespace tde
