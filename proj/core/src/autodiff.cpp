#include "tde/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

namespace tde::ad {

double surrogate(double x, double alpha) noexcept {
  return 0.5 + std::atan(std::numbers::pi * alpha * x / 2.0) / std::numbers::pi;
}

double surrogate_grad(double x, double alpha) noexcept {
  const double u = std::numbers::pi * alpha * x / 2.0;
  return (alpha / 2.0) / (1.0 + u * u);
}

// ---------------------------------------------------------------- Tape

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, Backward backward) {
  Node node{std::move(value), {}, std::move(backward)};
  for (Var v : inputs) {
    if (v.id >= nodes_.size()) throw std::out_of_range("tape input refers to a future entry");
    node.inputs.push_back(v.id);
  }
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id).value; }

bool Tape::is_leaf(Var v) const { return !nodes_.at(v.id).backward; }

GradientMap Tape::backward(Var loss) const {
  if (loss.id >= nodes_.size()) throw std::out_of_range("loss is not on this tape");
  if (nodes_[loss.id].value.size() != 1)
    throw std::invalid_argument(fmt::format("loss must be a scalar, got shape {}",
                                            nodes_[loss.id].value.shape().str()));
  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.id] = Tensor(nodes_[loss.id].value.shape(), 1.0);

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!grads[i] || !node.backward) continue;
    std::vector<Tensor> grad_in;
    grad_in.reserve(node.inputs.size());
    for (std::size_t in : node.inputs) grad_in.emplace_back(nodes_[in].value.shape());
    node.backward(*grads[i], grad_in);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      std::optional<Tensor>& slot = grads[node.inputs[k]];
      if (!slot) {
        slot = std::move(grad_in[k]);
      } else {
        for (std::size_t j = 0; j < slot->size(); ++j) (*slot)[j] += grad_in[k][j];
      }
    }
  }

  GradientMap out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].backward) continue;
    out.emplace(i, grads[i] ? std::move(*grads[i]) : Tensor(nodes_[i].value.shape()));
  }
  return out;
}

// ---------------------------------------------------------------- elementwise

namespace {

// Visits every output element of the broadcast of shapes a and b with the
// flat indices into a and b.
template <typename F>
void broadcast_visit(const Shape& a, const Shape& b, const Shape& out, F&& f) {
  const std::size_t rank = out.rank();
  std::array<std::size_t, Shape::kMaxRank> sa{}, sb{}, idx{};
  for (std::size_t i = 0; i < rank; ++i) {
    sa[i] = a[i] == 1 ? 0 : a.stride(i);
    sb[i] = b[i] == 1 ? 0 : b.stride(i);
  }
  const std::size_t n = out.numel();
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < rank; ++i) {
      ia += idx[i] * sa[i];
      ib += idx[i] * sb[i];
    }
    f(flat, ia, ib);
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out[i]) break;
      idx[i] = 0;
    }
  }
}

enum class Binary { Add, Sub, Mul };

Var binary_op(Tape& tape, Var va, Var vb, Binary kind) {
  const Tensor& a = tape.value(va);
  const Tensor& b = tape.value(vb);
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  Tensor out(out_shape);
  broadcast_visit(a.shape(), b.shape(), out_shape, [&](std::size_t o, std::size_t ia, std::size_t ib) {
    switch (kind) {
      case Binary::Add:
        out[o] = a[ia] + b[ib];
        break;
      case Binary::Sub:
        out[o] = a[ia] - b[ib];
        break;
      case Binary::Mul:
        out[o] = a[ia] * b[ib];
        break;
    }
  });
  Tensor a_val = kind == Binary::Mul ? a : Tensor{};
  Tensor b_val = kind == Binary::Mul ? b : Tensor{};
  Shape as = a.shape(), bs = b.shape();
  return tape.record(std::move(out), {va, vb},
                     [=](const Tensor& g, std::span<Tensor> gi) {
                       broadcast_visit(as, bs, out_shape,
                                       [&](std::size_t o, std::size_t ia, std::size_t ib) {
                                         switch (kind) {
                                           case Binary::Add:
                                             gi[0][ia] += g[o];
                                             gi[1][ib] += g[o];
                                             break;
                                           case Binary::Sub:
                                             gi[0][ia] += g[o];
                                             gi[1][ib] -= g[o];
                                             break;
                                           case Binary::Mul:
                                             gi[0][ia] += g[o] * b_val[ib];
                                             gi[1][ib] += g[o] * a_val[ia];
                                             break;
                                         }
                                       });
                     });
}

template <typename Fwd, typename Deriv>
Var unary_op(Tape& tape, Var vx, Fwd fwd, Deriv deriv) {
  const Tensor& x = tape.value(vx);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  Tensor x_val = x;
  return tape.record(std::move(out), {vx}, [x_val, deriv](const Tensor& g, std::span<Tensor> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * deriv(x_val[i]);
  });
}

}  // namespace

Var add(Tape& tape, Var a, Var b) { return binary_op(tape, a, b, Binary::Add); }
Var sub(Tape& tape, Var a, Var b) { return binary_op(tape, a, b, Binary::Sub); }
Var mul(Tape& tape, Var a, Var b) { return binary_op(tape, a, b, Binary::Mul); }

Var scale(Tape& tape, Var a, double c) {
  return unary_op(tape, a, [c](double x) { return c * x; }, [c](double) { return c; });
}

Var shift(Tape& tape, Var a, double c) {
  return unary_op(tape, a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Var sigmoid(Tape& tape, Var x) {
  return unary_op(
      tape, x, [](double v) { return tde::sigmoid(v); },
      [](double v) {
        const double s = tde::sigmoid(v);
        return s * (1.0 - s);
      });
}

Var spike(Tape& tape, Var x, double v_th, SpikeMode mode, double alpha) {
  auto deriv = [v_th, alpha](double v) { return surrogate_grad(v - v_th, alpha); };
  if (mode == SpikeMode::Relaxed)
    return unary_op(
        tape, x, [v_th, alpha](double v) { return surrogate(v - v_th, alpha); }, deriv);
  return unary_op(
      tape, x, [v_th](double v) { return v - v_th >= 0.0 ? 1.0 : 0.0; }, deriv);
}

// ---------------------------------------------------------------- conv / linear

namespace {

struct ConvGeometry {
  std::size_t cin, cout, k, stride, pad, h, w, ho, wo;
};

void conv_backward_frame(const ConvGeometry& c, const double* x, const double* wt,
                         const double* g, double* dx, double* dw, double* db) {
  for (std::size_t co = 0; co < c.cout; ++co) {
    for (std::size_t oy = 0; oy < c.ho; ++oy) {
      for (std::size_t ox = 0; ox < c.wo; ++ox) {
        const double go = g[(co * c.ho + oy) * c.wo + ox];
        if (go == 0.0) continue;
        db[co] += go;
        for (std::size_t ci = 0; ci < c.cin; ++ci) {
          for (std::size_t ky = 0; ky < c.k; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                            static_cast<std::ptrdiff_t>(c.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(c.h)) continue;
            for (std::size_t kx = 0; kx < c.k; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                              static_cast<std::ptrdiff_t>(c.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(c.w)) continue;
              const std::size_t xi = (ci * c.h + static_cast<std::size_t>(iy)) * c.w +
                                     static_cast<std::size_t>(ix);
              const std::size_t wi = ((co * c.cin + ci) * c.k + ky) * c.k + kx;
              dx[xi] += go * wt[wi];
              dw[wi] += go * x[xi];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Tape& tape, Var vx, Var vw, Var vb, std::size_t stride, std::size_t padding) {
  const Tensor& x = tape.value(vx);
  const Tensor& w = tape.value(vw);
  const Tensor& b = tape.value(vb);
  if (w.shape().rank() != 4)
    throw ShapeError(fmt::format("conv weights must be rank 4, got {}", w.shape().str()));
  ConvSpec spec;
  spec.out_channels = w.shape()[0];
  spec.in_channels = w.shape()[1];
  spec.kernel = w.shape()[2];
  spec.stride = stride;
  spec.padding = padding;
  spec.weights = w;
  spec.bias = b;

  Tensor plain_x = x;
  plain_x.clear_binary();
  const bool framed = x.shape().rank() == 4;
  Tensor out = framed ? conv2d_frames(plain_x, spec) : conv2d(plain_x, spec);

  const std::size_t frames = framed ? x.shape()[0] : 1;
  const Shape frame_in = framed ? Shape(x.shape().extents().subspan(1)) : x.shape();
  ConvGeometry geo{spec.in_channels, spec.out_channels, spec.kernel, stride, padding,
                   frame_in[1], frame_in[2], spec.output_extent(frame_in[1]),
                   spec.output_extent(frame_in[2])};
  Tensor x_val = plain_x;
  Tensor w_val = w;
  return tape.record(std::move(out), {vx, vw, vb},
                     [=](const Tensor& g, std::span<Tensor> gi) {
                       const std::size_t in_n = geo.cin * geo.h * geo.w;
                       const std::size_t out_n = geo.cout * geo.ho * geo.wo;
                       for (std::size_t f = 0; f < frames; ++f) {
                         conv_backward_frame(geo, x_val.data().data() + f * in_n,
                                             w_val.data().data(), g.data().data() + f * out_n,
                                             gi[0].data().data() + f * in_n, gi[1].data().data(),
                                             gi[2].data().data());
                       }
                     });
}

Var linear(Tape& tape, Var vx, Var vw, Var vb) {
  const Tensor& x = tape.value(vx);
  const Tensor& w = tape.value(vw);
  const Tensor& b = tape.value(vb);
  if (w.shape().rank() != 2 || x.size() != w.shape()[1] || b.size() != w.shape()[0])
    throw ShapeError(fmt::format("linear shapes x {} w {} b {} are inconsistent", x.shape().str(),
                                 w.shape().str(), b.shape().str()));
  const std::size_t n_out = w.shape()[0], n_in = w.shape()[1];
  Tensor out(Shape{n_out});
  for (std::size_t o = 0; o < n_out; ++o) {
    double acc = b[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += w[o * n_in + i] * x[i];
    out[o] = acc;
  }
  Tensor x_val = x, w_val = w;
  return tape.record(std::move(out), {vx, vw, vb},
                     [=](const Tensor& g, std::span<Tensor> gi) {
                       for (std::size_t o = 0; o < n_out; ++o) {
                         gi[2][o] += g[o];
                         for (std::size_t i = 0; i < n_in; ++i) {
                           gi[0][i] += g[o] * w_val[o * n_in + i];
                           gi[1][o * n_in + i] += g[o] * x_val[i];
                         }
                       }
                     });
}

Var batchnorm_eval(Tape& tape, Var vx, Var vgamma, Var vbeta, const BatchNormParams& stats) {
  const Tensor& x = tape.value(vx);
  const Tensor& gamma = tape.value(vgamma);
  const Tensor& beta = tape.value(vbeta);
  const Shape& s = x.shape();
  const std::size_t axis = s.rank() == 4 ? 1 : s.rank() == 1 ? Shape::kMaxRank : 0;
  const std::size_t c = axis == Shape::kMaxRank ? 1 : s[axis];
  if (gamma.size() != c || beta.size() != c || stats.running_mean.size() != c ||
      stats.running_var.size() != c)
    throw ShapeError(fmt::format("batchnorm parameters do not have {} channels for {}", c, s.str()));
  if (stats.eps < 0.0) throw std::invalid_argument("batchnorm eps must be >= 0");

  std::vector<double> inv_std(c);
  for (std::size_t i = 0; i < c; ++i) {
    const double d = stats.running_var[i] + stats.eps;
    if (!(d > 0.0)) throw std::invalid_argument("batchnorm variance + eps must be positive");
    inv_std[i] = 1.0 / std::sqrt(d);
  }
  auto chan = [axis, s](std::size_t flat) {
    return axis == Shape::kMaxRank ? std::size_t{0} : (flat / s.stride(axis)) % s[axis];
  };
  Tensor out(s), xhat(s);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t ch = chan(i);
    xhat[i] = (x[i] - stats.running_mean[ch]) * inv_std[ch];
    out[i] = gamma[ch] * xhat[i] + beta[ch];
  }
  Tensor gamma_val = gamma;
  return tape.record(std::move(out), {vx, vgamma, vbeta},
                     [=](const Tensor& g, std::span<Tensor> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const std::size_t ch = chan(i);
                         gi[0][i] += g[i] * gamma_val[ch] * inv_std[ch];
                         gi[1][ch] += g[i] * xhat[i];
                         gi[2][ch] += g[i];
                       }
                     });
}

Var maxpool(Tape& tape, Var vx, std::span<const std::size_t> axes) {
  PoolResult pr = maxpool_with_indices(tape.value(vx), axes);
  std::vector<std::size_t> argmax = std::move(pr.argmax);
  Tensor values = std::move(pr.values);
  values.clear_binary();
  return tape.record(std::move(values), {vx}, [argmax](const Tensor& g, std::span<Tensor> gi) {
    for (std::size_t o = 0; o < g.size(); ++o) gi[0][argmax[o]] += g[o];
  });
}

// ---------------------------------------------------------------- reductions / layout

Var sum(Tape& tape, Var vx) {
  const Tensor& x = tape.value(vx);
  double s = 0.0;
  for (double v : x.data()) s += v;
  return tape.record(Tensor(Shape{1}, {s}), {vx}, [](const Tensor& g, std::span<Tensor> gi) {
    for (double& v : gi[0].data()) v += g[0];
  });
}

Var mean(Tape& tape, Var vx) {
  const auto n = static_cast<double>(tape.value(vx).size());
  return scale(tape, sum(tape, vx), 1.0 / n);
}

Var reshape(Tape& tape, Var vx, Shape shape) {
  Tensor out = tape.value(vx).reshaped(shape);
  out.clear_binary();
  return tape.record(std::move(out), {vx}, [](const Tensor& g, std::span<Tensor> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
  });
}

Var select(Tape& tape, Var vx, std::size_t index) {
  const Tensor& x = tape.value(vx);
  Tensor out = leading_slice(x, index);
  out.clear_binary();
  const std::size_t n = out.size();
  return tape.record(std::move(out), {vx}, [index, n](const Tensor& g, std::span<Tensor> gi) {
    for (std::size_t i = 0; i < n; ++i) gi[0][index * n + i] += g[i];
  });
}

Var stack(Tape& tape, std::span<const Var> parts) {
  std::vector<Tensor> values;
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (Var v : parts) values.push_back(tape.value(v));
  Tensor out = tde::stack(values);
  out.clear_binary();
  const std::size_t n = values.front().size();
  return tape.record(std::move(out), std::move(inputs), [n](const Tensor& g, std::span<Tensor> gi) {
    for (std::size_t k = 0; k < gi.size(); ++k)
      for (std::size_t i = 0; i < n; ++i) gi[k][i] += g[k * n + i];
  });
}

Var mean_leading(Tape& tape, Var vx) {
  const Tensor& x = tape.value(vx);
  const std::size_t steps = x.shape()[0];
  const std::size_t n = x.size() / steps;
  const Shape inner = x.shape().rank() == 1 ? Shape{1} : Shape(x.shape().extents().subspan(1));
  Tensor out(inner);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < n; ++i) out[i] += x[t * n + i];
  for (double& v : out.data()) v /= static_cast<double>(steps);
  return tape.record(std::move(out), {vx}, [steps, n](const Tensor& g, std::span<Tensor> gi) {
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < n; ++i) gi[0][t * n + i] += g[i] / static_cast<double>(steps);
  });
}

Var smooth_l1(Tape& tape, Var vpred, const Tensor& target) {
  const Tensor& pred = tape.value(vpred);
  if (pred.size() != target.size())
    throw ShapeError(fmt::format("smooth_l1 prediction {} vs target {}", pred.shape().str(),
                                 target.shape().str()));
  const auto n = static_cast<double>(pred.size());
  double loss = 0.0;
  std::vector<double> dloss(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    const double ad = std::abs(d);
    loss += ad < 1.0 ? 0.5 * d * d : ad - 0.5;
    dloss[i] = std::clamp(d, -1.0, 1.0) / n;
  }
  return tape.record(Tensor(Shape{1}, {loss / n}), {vpred},
                     [dloss](const Tensor& g, std::span<Tensor> gi) {
                       for (std::size_t i = 0; i < dloss.size(); ++i) gi[0][i] += g[0] * dloss[i];
                     });
}

Var lif(Tape& tape, Var inputs, const LifParams& p, SpikeMode mode) {
  p.validate();
  const std::size_t steps = tape.value(inputs).shape()[0];
  std::vector<Var> spikes;
  spikes.reserve(steps);
  Var v{};
  for (std::size_t t = 0; t < steps; ++t) {
    const Var x = select(tape, inputs, t);
    const Var h = t == 0 ? x : add(tape, v, x);
    const Var s = spike(tape, h, p.v_th, mode, p.surrogate_alpha);
    v = scale(tape, sub(tape, h, scale(tape, s, p.v_th)), p.beta);
    spikes.push_back(s);
  }
  return stack(tape, spikes);
}

// ---------------------------------------------------------------- oracles

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument(fmt::format("finite difference step {} must be > 0", h));
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::domain_error(fmt::format("objective is not finite around coordinate {}", i));
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(fmt::format("cannot compare {} with {}", a.shape().str(), b.shape().str()));
  double diff = 0.0, scale_ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale_ab = std::max({scale_ab, std::abs(a[i]), std::abs(b[i])});
  }
  return scale_ab == 0.0 ? 0.0 : diff / scale_ab;
}

}  // namespace tde::ad
