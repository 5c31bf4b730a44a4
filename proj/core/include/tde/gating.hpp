#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tde/attention.hpp"
#include "tde/encoder.hpp"
#include "tde/ledger.hpp"
#include "tde/neuron.hpp"

namespace tde {

/// Batch-averages the temporal float weights g_float [T, B] and smooths them
/// into the carried coefficients:
///   a_hat_t = mean_b g[t, b];  a_t = (alpha_bar_t + a_hat_t) / 2;  alpha_bar_t = a_t.
/// Returns the new coefficients. Throws on B = 0 or a T mismatch.
std::vector<double> attention_gate_update(const Tensor& g_float, std::vector<double>& alpha_bar);

/// Spiking encoder, the first downstream conv layer whose pre-reset membrane
/// is modulated by attention, and the attention block feeding the gate.
struct TdeModel {
  EncoderState encoder;
  ConvSpec layer_conv;
  AttentionConfig attention;
  LifParams lif;
};

struct TdeOptions {
  EncoderOptions encoder;
  AttentionVariant variant = AttentionVariant::Sda;
  AttentionInit attention;
  LifParams lif;
};

TdeModel make_tde_model(const TdeOptions& options, std::uint64_t seed);

struct TdeDiagnostics {
  EnergyLedger ledger;                 // every op of the call, tagged by module
  std::vector<Tensor> encoder_spikes;  // first LIF layer, per sample
  std::vector<double> alpha_before;
  std::vector<double> alpha_after;
  Tensor temporal_weights;  // [T, B]; empty when the variant produces none
  bool gated = false;       // alpha was updated by this call
};

struct TdeOutput {
  std::vector<Tensor> spikes;  // block output spikes [T, C, H, W], per sample
  TdeDiagnostics diagnostics;
};

/// Spiking encoder -> layer conv -> attention on the membrane -> LIF, for
/// every sample of the batch. With `train` set and temporal weights
/// available, the gate updates model.encoder.alpha for the next call.
TdeOutput tde_forward(std::span<const Tensor> batch, TdeModel& model, bool train);

/// Direct encoding -> LIF -> layer conv -> LIF with the same weights; no
/// attention, no gating.
TdeOutput baseline_forward(std::span<const Tensor> batch, const TdeModel& model);

}  // namespace tde
