#include "tde/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "tde/ledger.hpp"

namespace tde {

// ---------------------------------------------------------------- Shape

Shape::Shape(std::initializer_list<std::size_t> extents)
    : Shape(std::span<const std::size_t>(extents.begin(), extents.size())) {}

Shape::Shape(std::span<const std::size_t> extents) {
  if (extents.size() > kMaxRank)
    throw ShapeError(fmt::format("rank {} exceeds the maximum of {}", extents.size(), kMaxRank));
  rank_ = extents.size();
  std::copy(extents.begin(), extents.end(), ext_.begin());
}

std::size_t Shape::operator[](std::size_t axis) const {
  if (axis >= rank_) throw ShapeError(fmt::format("axis {} out of range for {}", axis, str()));
  return ext_[axis];
}

std::size_t Shape::numel() const noexcept {
  if (rank_ == 0) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i) n *= ext_[i];
  return n;
}

std::size_t Shape::stride(std::size_t axis) const {
  if (axis >= rank_) throw ShapeError(fmt::format("axis {} out of range for {}", axis, str()));
  std::size_t s = 1;
  for (std::size_t i = axis + 1; i < rank_; ++i) s *= ext_[i];
  return s;
}

std::string Shape::str() const { return fmt::format("[{}]", fmt::join(extents(), ", ")); }

bool operator==(const Shape& a, const Shape& b) noexcept {
  return a.rank_ == b.rank_ && std::equal(a.ext_.begin(), a.ext_.begin() + a.rank_, b.ext_.begin());
}

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel())
    throw ShapeError(fmt::format("shape {} holds {} elements but {} values were given",
                                 shape_.str(), shape_.numel(), data_.size()));
}

Tensor Tensor::spikes(Shape shape, std::vector<double> data) {
  Tensor t(shape, std::move(data));
  t.mark_binary();
  return t;
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.rank())
    throw ShapeError(fmt::format("{} indices given for tensor of shape {}", index.size(), shape_.str()));
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    const std::size_t ext = shape_[axis];
    if (i >= ext)
      throw ShapeError(fmt::format("index {} out of range on axis {} of {}", i, axis, shape_.str()));
    off = off * ext + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }

double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

Tensor& Tensor::mark_binary() {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (data_[i] != 0.0 && data_[i] != 1.0)
      throw std::invalid_argument(
          fmt::format("element {} of {} is {}, not a spike value", i, shape_.str(), data_[i]));
  }
  binary_ = true;
  return *this;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != data_.size())
    throw ShapeError(fmt::format("cannot reshape {} into {}", shape_.str(), shape.str()));
  Tensor out(shape, data_);
  out.binary_ = binary_;
  return out;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) throw std::logic_error("tensor has no gradient");
  return *grad_;
}

std::span<double> Tensor::grad() {
  if (!grad_) throw std::logic_error("tensor has no gradient");
  return *grad_;
}

void Tensor::set_grad(std::vector<double> grad) {
  if (grad.size() != data_.size())
    throw ShapeError(fmt::format("gradient of {} elements for tensor of shape {}", grad.size(),
                                 shape_.str()));
  grad_ = std::move(grad);
}

void Tensor::zero_grad() { grad_ = std::vector<double>(data_.size(), 0.0); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------- specs

ConvSpec ConvSpec::zeros(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                         std::size_t stride, std::size_t padding) {
  ConvSpec s;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.weights = Tensor(Shape{out_channels, in_channels, kernel, kernel});
  s.bias = Tensor(Shape{out_channels});
  return s;
}

void ConvSpec::validate() const {
  if (kernel < 1) throw ShapeError("conv kernel_size must be >= 1");
  if (stride < 1) throw ShapeError("conv stride must be >= 1");
  if (in_channels < 1 || out_channels < 1) throw ShapeError("conv channel counts must be >= 1");
  const Shape expected{out_channels, in_channels, kernel, kernel};
  if (weights.shape() != expected)
    throw ShapeError(fmt::format("conv weights have shape {}, expected {}", weights.shape().str(),
                                 expected.str()));
  if (bias.shape() != Shape{out_channels})
    throw ShapeError(
        fmt::format("conv bias has shape {}, expected [{}]", bias.shape().str(), out_channels));
}

std::size_t ConvSpec::output_extent(std::size_t input_extent) const {
  const std::size_t padded = input_extent + 2 * padding;
  if (padded < kernel)
    throw ShapeError(fmt::format("kernel {} larger than padded extent {}", kernel, padded));
  if ((padded - kernel) % stride != 0)
    throw ShapeError(fmt::format("kernel {} with stride {} does not tile padded extent {}", kernel,
                                 stride, padded));
  return (padded - kernel) / stride + 1;
}

bool ConvSpec::preserves_shape() const noexcept {
  return in_channels == out_channels && stride == 1 && kernel % 2 == 1 &&
         padding == (kernel - 1) / 2;
}

LinearSpec LinearSpec::zeros(std::size_t in_features, std::size_t out_features) {
  LinearSpec s;
  s.in_features = in_features;
  s.out_features = out_features;
  s.weights = Tensor(Shape{out_features, in_features});
  s.bias = Tensor(Shape{out_features});
  return s;
}

LinearSpec LinearSpec::identity(std::size_t features) {
  LinearSpec s = zeros(features, features);
  for (std::size_t i = 0; i < features; ++i) s.weights.at({i, i}) = 1.0;
  return s;
}

void LinearSpec::validate() const {
  if (in_features < 1 || out_features < 1) throw ShapeError("linear feature counts must be >= 1");
  if (weights.shape() != Shape{out_features, in_features})
    throw ShapeError(fmt::format("linear weights have shape {}, expected [{}, {}]",
                                 weights.shape().str(), out_features, in_features));
  if (bias.shape() != Shape{out_features})
    throw ShapeError(
        fmt::format("linear bias has shape {}, expected [{}]", bias.shape().str(), out_features));
}

BatchNormParams BatchNormParams::identity(std::size_t channels, double eps) {
  BatchNormParams p;
  p.gamma.assign(channels, 1.0);
  p.beta.assign(channels, 0.0);
  p.running_mean.assign(channels, 0.0);
  p.running_var.assign(channels, 1.0);
  p.eps = eps;
  return p;
}

// ---------------------------------------------------------------- conv / linear

Tensor conv2d(const Tensor& input, const ConvSpec& spec) {
  spec.validate();
  const Shape& s = input.shape();
  if (s.rank() != 3 || s[0] != spec.in_channels)
    throw ShapeError(fmt::format("conv2d input {} does not match weights {}", s.str(),
                                 spec.weights.shape().str()));
  const std::size_t cin = s[0], h = s[1], w = s[2];
  const std::size_t ho = spec.output_extent(h), wo = spec.output_extent(w);
  const std::size_t k = spec.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
  const bool gated = input.is_binary();

  Tensor out(Shape{spec.out_channels, ho, wo});
  const double* x = input.data().data();
  const double* wt = spec.weights.data().data();
  std::uint64_t muls = 0, acs = 0;

  for (std::size_t co = 0; co < spec.out_channels; ++co) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = spec.bias[co];
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* xc = x + ci * h * w;
          const double* wc = wt + (co * cin + ci) * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * spec.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * spec.stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              const double v = xc[iy * static_cast<std::ptrdiff_t>(w) + ix];
              if (gated) {
                if (v != 0.0) {
                  acc += wc[ky * k + kx];
                  ++acs;
                }
              } else {
                acc += wc[ky * k + kx] * v;
                ++muls;
                ++acs;
              }
            }
          }
        }
        out[(co * ho + oy) * wo + ox] = acc;
      }
    }
  }
  counting::mul(muls);
  counting::ac(acs);
  return out;
}

Tensor conv2d_frames(const Tensor& input, const ConvSpec& spec) {
  if (input.shape().rank() != 4)
    throw ShapeError(fmt::format("conv2d_frames expects [T, C, H, W], got {}", input.shape().str()));
  const std::size_t steps = input.shape()[0];
  std::vector<Tensor> frames;
  frames.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) frames.push_back(conv2d(leading_slice(input, t), spec));
  return stack(frames);
}

Tensor linear(const Tensor& x, const LinearSpec& spec) {
  spec.validate();
  if (x.size() != spec.in_features)
    throw ShapeError(fmt::format("linear input {} does not match weights {}", x.shape().str(),
                                 spec.weights.shape().str()));
  const bool gated = x.is_binary();
  Tensor out(Shape{spec.out_features});
  std::uint64_t muls = 0, acs = 0;
  for (std::size_t o = 0; o < spec.out_features; ++o) {
    double acc = spec.bias[o];
    const double* row = spec.weights.data().data() + o * spec.in_features;
    for (std::size_t i = 0; i < spec.in_features; ++i) {
      if (gated) {
        if (x[i] != 0.0) {
          acc += row[i];
          ++acs;
        }
      } else {
        acc += row[i] * x[i];
        ++muls;
        ++acs;
      }
    }
    out[o] = acc;
  }
  counting::mul(muls);
  counting::ac(acs);
  return out;
}

// ---------------------------------------------------------------- pooling

namespace {

// Maps a flat input index to the flat output index after collapsing `reduce`.
struct Reducer {
  Shape in;
  Shape out;
  std::array<bool, Shape::kMaxRank> reduce{};

  std::size_t map(std::size_t flat) const {
    std::size_t o = 0;
    std::size_t rem = flat;
    for (std::size_t axis = 0; axis < in.rank(); ++axis) {
      const std::size_t st = in.stride(axis);
      const std::size_t idx = rem / st;
      rem %= st;
      o = o * out[axis] + (reduce[axis] ? 0 : idx);
    }
    return o;
  }
};

Reducer make_reducer(const Shape& in, std::span<const std::size_t> axes) {
  if (axes.empty()) throw std::invalid_argument("maxpool_over needs at least one axis");
  Reducer r;
  r.in = in;
  std::array<std::size_t, Shape::kMaxRank> ext{};
  for (std::size_t a : axes) {
    if (a >= in.rank())
      throw ShapeError(fmt::format("pool axis {} invalid for tensor of shape {}", a, in.str()));
    r.reduce[a] = true;
  }
  for (std::size_t i = 0; i < in.rank(); ++i) ext[i] = r.reduce[i] ? 1 : in[i];
  r.out = Shape(std::span<const std::size_t>(ext.data(), in.rank()));
  return r;
}

}  // namespace

PoolResult maxpool_with_indices(const Tensor& input, std::span<const std::size_t> axes) {
  if (input.empty()) throw std::invalid_argument("maxpool_over on an empty tensor");
  const Reducer r = make_reducer(input.shape(), axes);
  PoolResult res{Tensor(r.out), std::vector<std::size_t>(r.out.numel(), 0)};
  std::vector<bool> seen(r.out.numel(), false);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const std::size_t o = r.map(i);
    if (!seen[o] || input[i] > res.values[o]) {
      res.values[o] = input[i];
      res.argmax[o] = i;
      seen[o] = true;
    }
  }
  if (input.is_binary()) res.values.mark_binary();
  return res;
}

Tensor maxpool_over(const Tensor& input, std::span<const std::size_t> axes) {
  return maxpool_with_indices(input, axes).values;
}

Tensor maxpool_over(const Tensor& input, std::initializer_list<Axis> axes) {
  std::vector<std::size_t> idx;
  for (Axis a : axes) idx.push_back(static_cast<std::size_t>(a));
  return maxpool_over(input, idx);
}

// ---------------------------------------------------------------- batchnorm

namespace {

std::size_t channel_axis(const Shape& s) {
  switch (s.rank()) {
    case 4:
      return 1;
    case 2:
    case 3:
      return 0;
    default:
      return Shape::kMaxRank;  // single channel
  }
}

std::size_t channel_of(const Shape& s, std::size_t axis, std::size_t flat) {
  if (axis == Shape::kMaxRank) return 0;
  return (flat / s.stride(axis)) % s[axis];
}

void check_bn(const Shape& s, const BatchNormParams& p) {
  if (p.eps < 0.0) throw std::invalid_argument(fmt::format("batchnorm eps {} must be >= 0", p.eps));
  const std::size_t axis = channel_axis(s);
  const std::size_t c = axis == Shape::kMaxRank ? 1 : s[axis];
  if (p.gamma.size() != c || p.beta.size() != c || p.running_mean.size() != c ||
      p.running_var.size() != c)
    throw ShapeError(fmt::format("batchnorm parameters do not have {} channels for input {}", c,
                                 s.str()));
}

Tensor normalize(const Tensor& input, const BatchNormParams& p, std::span<const double> mean,
                 std::span<const double> var) {
  const Shape& s = input.shape();
  const std::size_t axis = channel_axis(s);
  const std::size_t c = p.gamma.size();
  std::vector<double> scale(c), shift(c);
  for (std::size_t i = 0; i < c; ++i) {
    const double denom = var[i] + p.eps;
    if (!(denom > 0.0))
      throw std::invalid_argument(
          fmt::format("batchnorm channel {} has variance + eps = {}; must be positive", i, denom));
    scale[i] = p.gamma[i] / std::sqrt(denom);
    shift[i] = p.beta[i] - mean[i] * scale[i];
  }
  Tensor out(s);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const std::size_t ch = channel_of(s, axis, i);
    out[i] = input[i] * scale[ch] + shift[ch];
  }
  counting::mul(input.size());
  counting::ac(input.size());
  return out;
}

}  // namespace

Tensor batchnorm_eval(const Tensor& input, const BatchNormParams& params) {
  check_bn(input.shape(), params);
  return normalize(input, params, params.running_mean, params.running_var);
}

Tensor batchnorm(const Tensor& input, BatchNormParams& params, bool training) {
  if (!training) return batchnorm_eval(input, params);
  check_bn(input.shape(), params);
  if (input.empty()) throw std::invalid_argument("batchnorm on an empty tensor");
  const Shape& s = input.shape();
  const std::size_t axis = channel_axis(s);
  const std::size_t c = params.channels();
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  std::vector<std::size_t> n(c, 0);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const std::size_t ch = channel_of(s, axis, i);
    sum[ch] += input[i];
    ++n[ch];
  }
  std::vector<double> mean(c), var(c);
  for (std::size_t ch = 0; ch < c; ++ch) mean[ch] = sum[ch] / static_cast<double>(n[ch]);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const std::size_t ch = channel_of(s, axis, i);
    const double d = input[i] - mean[ch];
    sq[ch] += d * d;
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    var[ch] = sq[ch] / static_cast<double>(n[ch]);
    const double unbiased = n[ch] > 1 ? sq[ch] / static_cast<double>(n[ch] - 1) : var[ch];
    params.running_mean[ch] =
        (1.0 - params.momentum) * params.running_mean[ch] + params.momentum * mean[ch];
    params.running_var[ch] =
        (1.0 - params.momentum) * params.running_var[ch] + params.momentum * unbiased;
  }
  return normalize(input, params, mean, var);
}

// ---------------------------------------------------------------- elementwise

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a.rank() != b.rank())
    throw ShapeError(fmt::format("cannot broadcast {} with {}: ranks differ", a.str(), b.str()));
  std::array<std::size_t, Shape::kMaxRank> ext{};
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      ext[i] = a[i];
    } else if (a[i] == 1) {
      ext[i] = b[i];
    } else {
      throw ShapeError(fmt::format("cannot broadcast {} with {}", a.str(), b.str()));
    }
  }
  return Shape(std::span<const std::size_t>(ext.data(), a.rank()));
}

Tensor broadcast_combine(const Tensor& a, const Tensor& b, Combine op) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const std::size_t rank = out_shape.rank();
  Tensor out(out_shape);

  // Strides that are 0 along broadcast axes.
  std::array<std::size_t, Shape::kMaxRank> sa{}, sb{}, ext{};
  for (std::size_t i = 0; i < rank; ++i) {
    ext[i] = out_shape[i];
    sa[i] = a.shape()[i] == 1 ? 0 : a.shape().stride(i);
    sb[i] = b.shape()[i] == 1 ? 0 : b.shape().stride(i);
  }

  const bool gated = op == Combine::Mul && (a.is_binary() || b.is_binary());
  std::uint64_t muls = 0, acs = 0;
  std::array<std::size_t, Shape::kMaxRank> idx{};
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < rank; ++i) {
      ia += idx[i] * sa[i];
      ib += idx[i] * sb[i];
    }
    const double va = a[ia], vb = b[ib];
    if (op == Combine::Add) {
      out[flat] = va + vb;
      ++acs;
    } else if (gated) {
      const bool open = (!a.is_binary() || va != 0.0) && (!b.is_binary() || vb != 0.0);
      if (open) {
        out[flat] = a.is_binary() ? vb : va;
        if (a.is_binary() && b.is_binary()) out[flat] = 1.0;
        ++acs;
      } else {
        out[flat] = 0.0;
      }
    } else {
      out[flat] = va * vb;
      ++muls;
    }
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < ext[i]) break;
      idx[i] = 0;
    }
  }
  if (op == Combine::Mul && a.is_binary() && b.is_binary()) out.mark_binary();
  counting::mul(muls);
  counting::ac(acs);
  return out;
}

Tensor axpby(double a, const Tensor& x, double b, const Tensor& y) {
  if (x.shape() != y.shape())
    throw ShapeError(fmt::format("axpby shapes differ: {} vs {}", x.shape().str(), y.shape().str()));
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  counting::mul(2 * x.size());
  counting::ac(x.size());
  return out;
}

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

// ---------------------------------------------------------------- layout

Tensor stack(std::span<const Tensor> slices) {
  if (slices.empty()) throw ShapeError("stack of zero tensors");
  const Shape& inner = slices.front().shape();
  if (inner.rank() >= Shape::kMaxRank)
    throw ShapeError(fmt::format("cannot stack tensors of shape {}", inner.str()));
  std::array<std::size_t, Shape::kMaxRank> ext{};
  ext[0] = slices.size();
  for (std::size_t i = 0; i < inner.rank(); ++i) ext[i + 1] = inner[i];
  std::vector<double> data;
  data.reserve(slices.size() * inner.numel());
  bool binary = true;
  for (const Tensor& s : slices) {
    if (s.shape() != inner)
      throw ShapeError(fmt::format("stack shapes differ: {} vs {}", inner.str(), s.shape().str()));
    data.insert(data.end(), s.data().begin(), s.data().end());
    binary = binary && s.is_binary();
  }
  Tensor out(Shape(std::span<const std::size_t>(ext.data(), inner.rank() + 1)), std::move(data));
  if (binary) out.mark_binary();
  return out;
}

Tensor leading_slice(const Tensor& x, std::size_t index) {
  const Shape& s = x.shape();
  if (s.rank() == 0 || index >= s[0])
    throw ShapeError(fmt::format("slice {} out of range for {}", index, s.str()));
  Shape inner = s.rank() == 1 ? Shape{1} : Shape(s.extents().subspan(1));
  const std::size_t n = inner.numel();
  Tensor out(inner, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(index * n),
                                        x.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * n)));
  if (x.is_binary()) out.mark_binary();
  return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (first.rank() != 4)
    throw ShapeError(fmt::format("concat_channels expects rank 4, got {}", first.str()));
  std::size_t channels = 0;
  bool binary = true;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.rank() != 4 || s[0] != first[0] || s[2] != first[2] || s[3] != first[3])
      throw ShapeError(fmt::format("concat_channels shapes differ: {} vs {}", first.str(), s.str()));
    channels += s[1];
    binary = binary && p.is_binary();
  }
  const std::size_t steps = first[0], plane = first[2] * first[3];
  Tensor out(Shape{steps, channels, first[2], first[3]});
  std::size_t dst = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    for (const Tensor& p : parts) {
      const std::size_t n = p.shape()[1] * plane;
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(t * n), n,
                  out.data().begin() + static_cast<std::ptrdiff_t>(dst));
      dst += n;
    }
  }
  if (binary) out.mark_binary();
  return out;
}

}  // namespace tde
