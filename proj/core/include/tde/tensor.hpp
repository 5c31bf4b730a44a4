#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tde {

/// Axis names of the [T, C, H, W] convention.
enum class Axis : std::size_t { T = 0, C = 1, H = 2, W = 3 };

/// Thrown for any shape/extent contract violation. Messages name the shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Extents of a rank 1..4 tensor, row-major. A default-constructed shape has
/// rank 0 and describes the empty tensor.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> extents);
  explicit Shape(std::span<const std::size_t> extents);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t operator[](std::size_t axis) const;
  std::size_t numel() const noexcept;
  std::span<const std::size_t> extents() const noexcept { return {ext_.data(), rank_}; }
  // Row-major stride of `axis`.
  std::size_t stride(std::size_t axis) const;

  std::string str() const;

  friend bool operator==(const Shape& a, const Shape& b) noexcept;

 private:
  std::array<std::size_t, kMaxRank> ext_{};
  std::size_t rank_ = 0;
};

/// Dense real tensor, row-major, with an optional gradient slot and a binary
/// flag marking spike tensors (every element is 0 or 1). The flag is what the
/// kernels consult to count gated accumulates instead of multiplies.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  // Builds a binary-flagged tensor; throws if any value is outside {0, 1}.
  static Tensor spikes(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Bounds-checked multi-index access; index count must equal rank.
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  bool is_binary() const noexcept { return binary_; }
  // Validates the {0, 1} invariant and sets the flag.
  Tensor& mark_binary();
  Tensor& clear_binary() noexcept {
    binary_ = false;
    return *this;
  }

  Tensor reshaped(Shape shape) const;

  bool has_grad() const noexcept { return grad_.has_value(); }
  std::span<const double> grad() const;
  std::span<double> grad();
  void set_grad(std::vector<double> grad);
  void zero_grad();
  void drop_grad() noexcept { grad_.reset(); }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  std::optional<std::vector<double>> grad_;
  bool binary_ = false;
};

/// 2-D convolution parameters. weights [out, in, k, k], bias [out].
struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Tensor weights;
  Tensor bias;

  static ConvSpec zeros(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                        std::size_t stride = 1, std::size_t padding = 0);

  void validate() const;
  // Output extent along one spatial axis; throws unless it is a positive integer.
  std::size_t output_extent(std::size_t input_extent) const;
  // True when the spec maps [C, H, W] to [C, H, W].
  bool preserves_shape() const noexcept;
};

/// Fully connected map. weights [out, in], bias [out].
struct LinearSpec {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Tensor weights;
  Tensor bias;

  static LinearSpec zeros(std::size_t in_features, std::size_t out_features);
  static LinearSpec identity(std::size_t features);
  void validate() const;
};

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  static BatchNormParams identity(std::size_t channels, double eps = 1e-5);
  std::size_t channels() const noexcept { return gamma.size(); }
};

enum class Combine { Mul, Add };

/// Cross-correlation of input [C_in, H, W] with `spec`.
/// Bias seeds the accumulator; every in-bounds tap is one multiply plus one
/// accumulate. For a binary input only taps on a 1 are visited and each costs
/// one AC; padded taps are never visited.
Tensor conv2d(const Tensor& input, const ConvSpec& spec);

/// conv2d applied independently to every time slice of [T, C_in, H, W].
Tensor conv2d_frames(const Tensor& input, const ConvSpec& spec);

/// x [in] -> [out]; same counting rule as conv2d.
Tensor linear(const Tensor& x, const LinearSpec& spec);

struct PoolResult {
  Tensor values;
  // Flat source index of the maximum for each output element (first on ties).
  std::vector<std::size_t> argmax;
};

/// Max over the listed axes; reduced axes keep extent 1. Not counted.
Tensor maxpool_over(const Tensor& input, std::span<const std::size_t> axes);
Tensor maxpool_over(const Tensor& input, std::initializer_list<Axis> axes);
PoolResult maxpool_with_indices(const Tensor& input, std::span<const std::size_t> axes);

/// Per-channel batch normalization. The channel axis is 1 for rank 4, 0 for
/// rank 2 and 3; a rank-1 tensor is a single channel. Training mode
/// normalizes with batch statistics (biased variance) and updates the running
/// statistics with `momentum` (unbiased variance). Costs 1 MUL + 1 AC per
/// element (folded scale and shift).
Tensor batchnorm(const Tensor& input, BatchNormParams& params, bool training);
Tensor batchnorm_eval(const Tensor& input, const BatchNormParams& params);

/// Numpy-style broadcast of equal-rank tensors (each axis equal or 1).
/// Mul with a binary operand counts one AC per output where every binary
/// operand is 1; mul of two float operands counts one MUL per output; add
/// counts one AC per output. Mul of two binary operands yields a binary tensor.
Tensor broadcast_combine(const Tensor& a, const Tensor& b, Combine op);
Shape broadcast_shape(const Shape& a, const Shape& b);

/// a * x + b * y, elementwise with equal shapes: 2 MUL + 1 AC per element.
Tensor axpby(double a, const Tensor& x, double b, const Tensor& y);

/// Logistic function, uncounted.
Tensor sigmoid(const Tensor& x);
double sigmoid(double x) noexcept;

/// Stacks equal-shape tensors along a new leading axis.
Tensor stack(std::span<const Tensor> slices);
/// Slice `index` of the leading axis, dropping that axis.
Tensor leading_slice(const Tensor& x, std::size_t index);
/// Concatenates rank-4 tensors along the channel axis.
Tensor concat_channels(std::span<const Tensor> parts);

}  // namespace tde
