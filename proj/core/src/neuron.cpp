#include "tde/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace tde {

void LifParams::validate() const {
  if (!(v_th > 0.0) || !std::isfinite(v_th))
    throw std::invalid_argument(fmt::format("v_th must be positive and finite, got {}", v_th));
  if (!(beta >= 0.0 && beta <= 1.0))
    throw std::invalid_argument(fmt::format("beta must lie in [0, 1], got {}", beta));
  if (!std::isfinite(surrogate_alpha))
    throw std::invalid_argument("surrogate_alpha must be finite");
}

LifStep lif_step(const LifState& state, const Tensor& x, const LifParams& p) {
  if (x.shape() != state.v.shape())
    throw ShapeError(fmt::format("lif_step input {} does not match state {}", x.shape().str(),
                                 state.v.shape().str()));
  if (!x.all_finite()) throw std::invalid_argument("lif_step input contains non-finite values");
  LifStep out{Tensor(x.shape()), LifState{Tensor(x.shape())}, Tensor(x.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = state.v[i] + x[i];
    const double s = h >= p.v_th ? 1.0 : 0.0;
    out.pre_reset[i] = h;
    out.spikes[i] = s;
    out.state.v[i] = p.beta * (h - p.v_th * s);
  }
  out.spikes.mark_binary();
  return out;
}

namespace {

template <typename OnStep>
void fold_time(const Tensor& inputs, const LifParams& p, const std::optional<Tensor>& v0,
               OnStep&& on_step) {
  p.validate();
  const Shape& s = inputs.shape();
  if (s.rank() < 1 || s[0] < 1)
    throw ShapeError(fmt::format("LIF inputs need a leading time axis, got {}", s.str()));
  const std::size_t steps = s[0];
  const Shape inner = s.rank() == 1 ? Shape{1} : Shape(s.extents().subspan(1));
  LifState state{v0 ? *v0 : Tensor(inner)};
  if (state.v.shape() != inner)
    throw ShapeError(fmt::format("initial membrane {} does not match per-step shape {}",
                                 state.v.shape().str(), inner.str()));
  for (std::size_t t = 0; t < steps; ++t) {
    LifStep step = lif_step(state, leading_slice(inputs, t), p);
    on_step(t, step);
    state = std::move(step.state);
  }
}

}  // namespace

Tensor lif_forward(const Tensor& inputs, const LifParams& p, const std::optional<Tensor>& v0) {
  Tensor out(inputs.shape());
  const std::size_t n = inputs.shape().rank() == 0 ? 0 : inputs.size() / inputs.shape()[0];
  fold_time(inputs, p, v0, [&](std::size_t t, const LifStep& step) {
    std::copy(step.spikes.data().begin(), step.spikes.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(t * n));
  });
  out.mark_binary();
  return out;
}

DualOutput lif1_dual(const Tensor& inputs, const LifParams& p) {
  DualOutput out{Tensor(inputs.shape()), Tensor(inputs.shape())};
  const std::size_t n = inputs.shape().rank() == 0 ? 0 : inputs.size() / inputs.shape()[0];
  fold_time(inputs, p, std::nullopt, [&](std::size_t t, const LifStep& step) {
    const auto at = static_cast<std::ptrdiff_t>(t * n);
    std::copy(step.spikes.data().begin(), step.spikes.data().end(), out.spikes.data().begin() + at);
    std::copy(step.pre_reset.data().begin(), step.pre_reset.data().end(),
              out.membrane.data().begin() + at);
  });
  out.spikes.mark_binary();
  return out;
}

Tensor lif0_topk(const Tensor& x, double k_percent) {
  if (x.empty()) throw std::invalid_argument("lif0_topk on an empty tensor");
  if (!(k_percent > 0.0 && k_percent <= 100.0))
    throw std::invalid_argument(fmt::format("k_percent must lie in (0, 100], got {}", k_percent));
  const std::size_t n = x.size();
  // Guard against k*n/100 landing a hair above an integer.
  const double exact = k_percent * static_cast<double>(n) / 100.0;
  auto fire = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  fire = std::clamp<std::size_t>(fire, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  Tensor out(x.shape());
  for (std::size_t i = 0; i < fire; ++i) out[order[i]] = 1.0;
  out.mark_binary();
  return out;
}

}  // namespace tde
