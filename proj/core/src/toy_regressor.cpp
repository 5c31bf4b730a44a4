#include "tde/toy_regressor.hpp"

#include <cmath>
#include <fmt/format.h>
#include <string>

#include "tde/gating.hpp"
#include "tde/random.hpp"
#include "tde/synthetic.hpp"

namespace tde {

void ToyTrainConfig::validate() const {
  lif.validate();
  if (time_steps == 0 || batch == 0 || train_size == 0 || eval_size == 0)
    throw std::invalid_argument("toy training needs positive T, batch, train_size and eval_size");
  if (image < 8 || image % 4 != 0)
    throw std::invalid_argument(fmt::format("toy image side {} must be a multiple of 4, >= 8", image));
  if (!(learning_rate > 0.0))
    throw std::invalid_argument(fmt::format("learning rate {} must be > 0", learning_rate));
}

namespace {

constexpr std::size_t kC1 = 4;
constexpr std::size_t kC2 = 8;
constexpr std::size_t kOut = 4;
constexpr std::size_t kSpatialKernel = 7;

struct Param {
  std::string name;
  Tensor value;
  Tensor m;
  Tensor v;
};

class Model {
 public:
  Model(const ToyTrainConfig& cfg, bool tde) : cfg_(cfg), tde_(tde) {
    const Rng root(cfg.seed, "toy");
    const std::size_t t = cfg.time_steps;
    const std::size_t feat = kC2 * (cfg.image / 4) * (cfg.image / 4);
    add_conv("conv1", kC1, 1, 3, root.split("conv1"), 6.0);
    add_conv("conv2", kC2, kC1, 4, root.split("conv2"), 6.0);
    add_conv("conv3", kC2, kC2, 4, root.split("conv3"), 6.0);
    add_linear("fc", kOut, feat, root.split("fc"));
    if (tde_) {
      Rng steps = root.split("steps");
      for (std::size_t i = 0; i < t; ++i)
        add_conv(fmt::format("step{}", i + 1), kC1, kC1, 3, steps.split(std::to_string(i)), 3.0);
      add_linear("att.temporal", t, t, root.split("att.temporal"));
      add_linear("att.channel", kC2, kC2, root.split("att.channel"));
      add_conv("att.spatial", 1, 1, kSpatialKernel, root.split("att.spatial"), 1.0);
      alpha_.assign(t, 0.5);
      alpha_bar_.assign(t, 0.5);
    }
  }

  const std::vector<double>& alpha() const noexcept { return alpha_; }

  // Mean loss over `samples`; when `grads` is given, also their gradients
  // (indexed like params_) and the per-sample temporal gate values [T, B].
  double evaluate(std::span<const BoxSample* const> samples, std::vector<Tensor>* grads,
                  Tensor* gate) const {
    ad::Tape tape;
    std::vector<ad::Var> p;
    p.reserve(params_.size());
    for (const Param& q : params_) p.push_back(tape.leaf(q.value));

    const std::size_t t = cfg_.time_steps;
    std::vector<ad::Var> gate_vars;
    ad::Var total{};
    for (std::size_t b = 0; b < samples.size(); ++b) {
      const ad::Var x = tape.leaf(samples[b]->image);
      const ad::Var f = ad::conv2d(tape, x, p[0], p[1], 1, 1);
      std::vector<ad::Var> frames;
      if (tde_) {
        ad::Var prev = f;
        for (std::size_t i = 0; i < t; ++i) {
          const std::size_t w = kStepBase + 2 * i;
          const ad::Var c = ad::conv2d(tape, prev, p[w], p[w + 1], 1, 1);
          prev = ad::add(tape, ad::scale(tape, f, alpha_[i]), ad::scale(tape, c, 1.0 - alpha_[i]));
          frames.push_back(prev);
        }
      } else {
        frames.assign(t, f);
      }
      const ad::Var s1 = ad::lif(tape, ad::stack(tape, frames), cfg_.lif, cfg_.mode);
      ad::Var h2 = ad::conv2d(tape, s1, p[2], p[3], 2, 1);
      if (tde_) h2 = attention(tape, h2, p, gate_vars);
      const ad::Var s2 = ad::lif(tape, h2, cfg_.lif, cfg_.mode);
      const ad::Var h3 = ad::conv2d(tape, s2, p[4], p[5], 2, 1);
      const ad::Var m = ad::mean_leading(tape, h3);
      const Shape& ms = tape.value(m).shape();
      const ad::Var flat = ad::reshape(tape, m, Shape{ms.numel()});
      const ad::Var pred = ad::linear(tape, flat, p[6], p[7]);
      const Tensor target(Shape{kOut}, std::vector<double>(samples[b]->box.begin(),
                                                           samples[b]->box.end()));
      const ad::Var l = ad::smooth_l1(tape, pred, target);
      total = b == 0 ? l : ad::add(tape, total, l);
    }
    const ad::Var loss = ad::scale(tape, total, 1.0 / static_cast<double>(samples.size()));

    if (gate != nullptr && !gate_vars.empty()) {
      *gate = Tensor(Shape{t, samples.size()});
      for (std::size_t b = 0; b < samples.size(); ++b) {
        const Tensor& g = tape.value(gate_vars[b]);
        for (std::size_t i = 0; i < t; ++i) (*gate)[i * samples.size() + b] = g[i];
      }
    }
    if (grads != nullptr) {
      ad::GradientMap all = tape.backward(loss);
      grads->clear();
      for (std::size_t i = 0; i < params_.size(); ++i) grads->push_back(std::move(all.at(p[i].id)));
    }
    return tape.value(loss)[0];
  }

  void adam_step(const std::vector<Tensor>& grads) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++step_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param& q = params_[i];
      for (std::size_t j = 0; j < q.value.size(); ++j) {
        const double g = grads[i][j];
        q.m[j] = b1 * q.m[j] + (1.0 - b1) * g;
        q.v[j] = b2 * q.v[j] + (1.0 - b2) * g * g;
        q.value[j] -= cfg_.learning_rate * (q.m[j] / c1) / (std::sqrt(q.v[j] / c2) + eps);
      }
    }
  }

  void gate(const Tensor& g_float) { alpha_ = attention_gate_update(g_float, alpha_bar_); }

 private:
  // params_ layout: conv1 w,b | conv2 w,b | conv3 w,b | fc w,b | step convs | attention maps
  static constexpr std::size_t kStepBase = 8;

  std::size_t attention_base() const noexcept { return kStepBase + 2 * cfg_.time_steps; }

  ad::Var attention(ad::Tape& tape, ad::Var h, const std::vector<ad::Var>& p,
                    std::vector<ad::Var>& gate_vars) const {
    const Shape s = tape.value(h).shape();
    const std::size_t a = attention_base();
    static constexpr std::array<std::size_t, 3> kOverT = {1, 2, 3};
    static constexpr std::array<std::size_t, 3> kOverC = {0, 2, 3};
    static constexpr std::array<std::size_t, 2> kOverHW = {0, 1};

    ad::Var q = ad::reshape(tape, ad::maxpool(tape, h, kOverT), Shape{s[0]});
    const ad::Var gt = ad::sigmoid(tape, ad::linear(tape, q, p[a], p[a + 1]));
    gate_vars.push_back(gt);
    h = ad::mul(tape, ad::reshape(tape, gt, Shape{s[0], 1, 1, 1}), h);

    q = ad::reshape(tape, ad::maxpool(tape, h, kOverC), Shape{s[1]});
    const ad::Var gc = ad::sigmoid(tape, ad::linear(tape, q, p[a + 2], p[a + 3]));
    h = ad::mul(tape, ad::reshape(tape, gc, Shape{1, s[1], 1, 1}), h);

    q = ad::reshape(tape, ad::maxpool(tape, h, kOverHW), Shape{1, s[2], s[3]});
    const ad::Var gs = ad::sigmoid(
        tape, ad::conv2d(tape, q, p[a + 4], p[a + 5], 1, (kSpatialKernel - 1) / 2));
    return ad::mul(tape, ad::reshape(tape, gs, Shape{1, 1, s[2], s[3]}), h);
  }

  void add_param(std::string name, Tensor value) {
    Tensor zeros(value.shape());
    params_.push_back(Param{std::move(name), std::move(value), zeros, zeros});
  }

  void add_conv(const std::string& name, std::size_t out, std::size_t in, std::size_t k, Rng rng,
                double gain) {
    Tensor w(Shape{out, in, k, k});
    const double bound = std::sqrt(gain / static_cast<double>(in * k * k));
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    add_param(name + ".weight", std::move(w));
    add_param(name + ".bias", Tensor(Shape{out}));
  }

  void add_linear(const std::string& name, std::size_t out, std::size_t in, Rng rng) {
    Tensor w(Shape{out, in});
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    add_param(name + ".weight", std::move(w));
    add_param(name + ".bias", Tensor(Shape{out}));
  }

  const ToyTrainConfig& cfg_;
  bool tde_;
  std::vector<Param> params_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::size_t step_ = 0;
};

std::vector<const BoxSample*> pointers(const std::vector<BoxSample>& data, std::size_t first,
                                       std::size_t count) {
  std::vector<const BoxSample*> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(&data[(first + i) % data.size()]);
  return out;
}

std::vector<double> run(const ToyTrainConfig& cfg, bool tde, const std::vector<BoxSample>& train,
                        const std::vector<BoxSample>& eval,
                        std::vector<std::vector<double>>* alpha_trace) {
  Model model(cfg, tde);
  const std::vector<const BoxSample*> eval_set = pointers(eval, 0, eval.size());
  std::vector<double> curve;
  curve.reserve(cfg.steps + 1);
  curve.push_back(model.evaluate(eval_set, nullptr, nullptr));
  std::vector<Tensor> grads;
  Tensor gate;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto batch = pointers(train, step * cfg.batch, cfg.batch);
    if (alpha_trace != nullptr) alpha_trace->push_back(model.alpha());
    model.evaluate(batch, &grads, tde ? &gate : nullptr);
    model.adam_step(grads);
    if (tde) model.gate(gate);
    curve.push_back(model.evaluate(eval_set, nullptr, nullptr));
  }
  return curve;
}

}  // namespace

LossCurves train_toy(const ToyTrainConfig& cfg) {
  cfg.validate();
  const std::vector<BoxSample> train =
      make_box_dataset(cfg.seed, "toy.train", cfg.train_size, cfg.image, cfg.image);
  const std::vector<BoxSample> eval = make_box_dataset(cfg.seed, "toy.eval", cfg.eval_size, cfg.image, cfg.image);
  LossCurves out;
  out.baseline = run(cfg, false, train, eval, nullptr);
  out.tde = run(cfg, true, train, eval, &out.alpha);
  return out;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving average window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace tde
