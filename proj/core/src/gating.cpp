#include "tde/gating.hpp"

#include <cmath>
#include <fmt/format.h>

namespace tde {

std::vector<double> attention_gate_update(const Tensor& g_float, std::vector<double>& alpha_bar) {
  const Shape& s = g_float.shape();
  if (s.rank() != 2)
    throw ShapeError(fmt::format("gate input must be [T, B], got {}", s.str()));
  const std::size_t steps = s[0], batch = s[1];
  if (batch == 0) throw std::invalid_argument("gate input has batch size 0");
  if (alpha_bar.size() != steps)
    throw ShapeError(fmt::format("gate input has T = {} but alpha_bar has {} entries", steps,
                                 alpha_bar.size()));
  std::vector<double> alpha(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    double sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) sum += g_float[t * batch + b];
    const double batch_mean = sum / static_cast<double>(batch);
    alpha[t] = 0.5 * (alpha_bar[t] + batch_mean);
    alpha_bar[t] = alpha[t];
  }
  return alpha;
}

TdeModel make_tde_model(const TdeOptions& o, std::uint64_t seed) {
  o.lif.validate();
  const Rng root(seed, "tde");
  Rng enc_rng = root.split("encoder");
  TdeModel m;
  m.encoder = make_encoder(o.encoder, enc_rng);
  m.lif = o.lif;

  const std::size_t c = o.encoder.channels;
  m.layer_conv = ConvSpec::zeros(c, c, 3, 1, 1);
  Rng layer_rng = root.split("layer");
  const double bound = std::sqrt(6.0 / static_cast<double>(c * 9));
  for (double& w : m.layer_conv.weights.data()) w = layer_rng.uniform(-bound, bound);

  Rng att_rng = root.split("attention");
  m.attention = make_attention_config(o.variant, o.encoder.steps, c, att_rng, o.attention);
  return m;
}

namespace {

Tensor layer_membrane(const Tensor& spikes, const TdeModel& model) {
  LedgerTag tag("layer");
  return conv2d_frames(spikes, model.layer_conv);
}

}  // namespace

TdeOutput tde_forward(std::span<const Tensor> batch, TdeModel& model, bool train) {
  if (batch.empty()) throw std::invalid_argument("tde_forward needs at least one sample");
  TdeOutput out;
  TdeDiagnostics& diag = out.diagnostics;
  diag.alpha_before = model.encoder.alpha;
  const std::size_t steps = model.encoder.steps();
  std::vector<double> g_float;

  {
    ActiveLedger active(diag.ledger);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      Tensor enc = se_encode(batch[b], model.encoder, model.lif);
      const Tensor membrane = layer_membrane(enc, model);
      AttentionResult att = attention_forward(membrane, model.attention);
      out.spikes.push_back(lif_forward(att.h_att, model.lif));
      diag.encoder_spikes.push_back(std::move(enc));
      if (att.weights && att.weights->temporal) {
        if (g_float.empty()) g_float.assign(steps * batch.size(), 0.0);
        const Tensor& g = att.weights->temporal->value;
        for (std::size_t t = 0; t < steps; ++t) g_float[t * batch.size() + b] = g[t];
      }
    }
  }

  if (!g_float.empty()) diag.temporal_weights = Tensor(Shape{steps, batch.size()}, g_float);
  if (train && !g_float.empty()) {
    model.encoder.alpha = attention_gate_update(diag.temporal_weights, model.encoder.alpha_bar);
    diag.gated = true;
  }
  diag.alpha_after = model.encoder.alpha;
  return out;
}

TdeOutput baseline_forward(std::span<const Tensor> batch, const TdeModel& model) {
  if (batch.empty()) throw std::invalid_argument("baseline_forward needs at least one sample");
  TdeOutput out;
  TdeDiagnostics& diag = out.diagnostics;
  diag.alpha_before = model.encoder.alpha;
  diag.alpha_after = model.encoder.alpha;
  ActiveLedger active(diag.ledger);
  for (const Tensor& x : batch) {
    Tensor enc = direct_encode_spikes(x, model.encoder, model.lif);
    out.spikes.push_back(lif_forward(layer_membrane(enc, model), model.lif));
    diag.encoder_spikes.push_back(std::move(enc));
  }
  return out;
}

}  // namespace tde
