#include "tde/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tde/random.hpp"

namespace tde {

namespace {

constexpr std::size_t kChannels = 2;

// Leaf order on the tape.
const std::array<const char*, 5> kNames = {"input", "conv1.weight", "conv1.bias", "conv2.weight",
                                           "conv2.bias"};

Tensor uniform(Shape s, Rng rng, double lo, double hi) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double loss_of(const std::array<Tensor, 5>& p, const Tensor& target, const GradcheckOptions& o,
               ad::GradientMap* grads) {
  ad::Tape tape;
  std::array<ad::Var, 5> v{};
  for (std::size_t i = 0; i < p.size(); ++i) v[i] = tape.leaf(p[i]);
  std::vector<ad::Var> frames(o.steps, v[0]);
  const ad::Var x = ad::stack(tape, frames);
  const ad::Var h1 = ad::conv2d(tape, x, v[1], v[2], 1, 1);
  const ad::Var s1 = ad::lif(tape, h1, o.lif, ad::SpikeMode::Relaxed);
  const ad::Var h2 = ad::conv2d(tape, s1, v[3], v[4], 1, 1);
  const ad::Var s2 = ad::lif(tape, h2, o.lif, ad::SpikeMode::Relaxed);
  const ad::Var loss = ad::smooth_l1(tape, s2, target);
  if (grads != nullptr) *grads = tape.backward(loss);
  return tape.value(loss)[0];
}

}  // namespace

GradcheckReport gradcheck_network(const GradcheckOptions& o) {
  if (o.steps == 0 || o.size == 0) throw std::invalid_argument("gradcheck needs T >= 1 and size >= 1");
  const Rng root(o.seed, "gradcheck");
  const std::size_t n = o.size;
  std::array<Tensor, 5> p = {
      uniform(Shape{1, n, n}, root.split("input"), 0.0, 2.0),
      uniform(Shape{kChannels, 1, 3, 3}, root.split("w1"), -0.8, 0.8),
      uniform(Shape{kChannels}, root.split("b1"), 0.0, 0.5),
      uniform(Shape{kChannels, kChannels, 3, 3}, root.split("w2"), -0.6, 0.6),
      uniform(Shape{kChannels}, root.split("b2"), 0.0, 0.5),
  };
  const Tensor target = uniform(Shape{o.steps, kChannels, n, n}, root.split("target"), 0.0, 1.0);

  ad::GradientMap grads;
  loss_of(p, target, o, &grads);

  GradcheckReport report;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto f = [&](const Tensor& probe) {
      std::array<Tensor, 5> q = p;
      q[i] = probe;
      return loss_of(q, target, o, nullptr);
    };
    const Tensor fd = ad::finite_diff(f, p[i], o.h);
    const double err = ad::max_relative_error(grads.at(i), fd);
    report.parameters.push_back({kNames[i], err});
    report.max_relative_error = std::max(report.max_relative_error, err);
  }
  return report;
}

}  // namespace tde
