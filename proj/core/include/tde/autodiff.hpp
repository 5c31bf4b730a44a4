#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "tde/neuron.hpp"
#include "tde/tensor.hpp"

namespace tde::ad {

/// Spiking: hard step forward, surrogate derivative backward (straight-through).
/// Relaxed: the surrogate itself forward, so the network is smooth end to end
/// and finite differences apply.
enum class SpikeMode { Spiking, Relaxed };

/// Arctangent surrogate sigma(x) = 1/2 + atan(pi * alpha * x / 2) / pi.
double surrogate(double x, double alpha) noexcept;
double surrogate_grad(double x, double alpha) noexcept;

struct Var {
  std::size_t id = 0;
};

using GradientMap = std::map<std::size_t, Tensor>;

/// Linear record of primitive applications. Inputs of every entry precede it,
/// so reverse iteration is a valid topological order.
class Tape {
 public:
  // Accumulates d(loss)/d(input_k) into grad_in[k], given d(loss)/d(output).
  using Backward = std::function<void(const Tensor& grad_out, std::span<Tensor> grad_in)>;

  Var leaf(Tensor value);
  Var record(Tensor value, std::vector<Var> inputs, Backward backward);

  const Tensor& value(Var v) const;
  bool is_leaf(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient of the scalar `loss` with respect to every leaf (zeros for
  /// leaves the loss does not depend on). Throws unless loss has one element.
  GradientMap backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Elementwise, equal-rank broadcasting as in broadcast_combine.
Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double c);
Var shift(Tape& tape, Var a, double c);
Var sigmoid(Tape& tape, Var x);

/// x [C_in, H, W] or [T, C_in, H, W] (frame-wise), w [C_out, C_in, k, k], b [C_out].
Var conv2d(Tape& tape, Var x, Var w, Var b, std::size_t stride, std::size_t padding);
/// x [in], w [out, in], b [out].
Var linear(Tape& tape, Var x, Var w, Var b);
/// Inference-mode batch norm with trainable gamma/beta and fixed statistics.
Var batchnorm_eval(Tape& tape, Var x, Var gamma, Var beta, const BatchNormParams& stats);
/// Max over `axes`; the gradient goes to the first argmax.
Var maxpool(Tape& tape, Var x, std::span<const std::size_t> axes);
/// Spike nonlinearity on (x - v_th).
Var spike(Tape& tape, Var x, double v_th, SpikeMode mode, double alpha);

Var sum(Tape& tape, Var x);
Var mean(Tape& tape, Var x);
Var reshape(Tape& tape, Var x, Shape shape);
Var select(Tape& tape, Var x, std::size_t index);
Var stack(Tape& tape, std::span<const Var> parts);
/// Mean over the leading axis: [T, ...] -> [...].
Var mean_leading(Tape& tape, Var x);
/// Mean smooth-L1 (Huber, delta 1) against a constant target of equal shape.
Var smooth_l1(Tape& tape, Var pred, const Tensor& target);

/// LIF over the leading axis of `inputs` built from the primitives above, so
/// gradients flow through charge, spike and soft reset.
Var lif(Tape& tape, Var inputs, const LifParams& p, SpikeMode mode);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every i.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|), 0 when both vanish.
double max_relative_error(const Tensor& a, const Tensor& b);

}  // namespace tde::ad
