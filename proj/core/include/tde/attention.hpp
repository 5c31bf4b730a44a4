#pragma once

#include <optional>
#include <string_view>

#include "tde/neuron.hpp"
#include "tde/random.hpp"
#include "tde/tensor.hpp"

namespace tde {

enum class AttentionVariant { None, Tcsa, Sda };
enum class AttentionDim { Temporal, Channel, Spatial };

std::string_view to_string(AttentionVariant v) noexcept;
// Accepts "none", "tcsa", "sda"; throws std::invalid_argument otherwise.
AttentionVariant parse_variant(std::string_view name);

/// Spike and float weight of one attention dimension. Shapes are
/// temporal [T,1,1,1], channel [1,C,1,1], spatial [1,1,H,W]. For the float
/// reference attention `spike` is left empty.
struct DimWeights {
  Tensor spike;
  Tensor value;
};

struct AttentionWeights {
  std::optional<DimWeights> temporal;
  std::optional<DimWeights> channel;
  std::optional<DimWeights> spatial;

  bool complete() const noexcept { return temporal && channel && spatial; }
};

struct AttentionConfig {
  AttentionVariant variant = AttentionVariant::None;
  LinearSpec temporal_map;  // T -> T
  LinearSpec channel_map;   // C -> C
  ConvSpec spatial_map;     // 1 -> 1, k x k, same padding
  double k_percent = 50.0;  // LIF0 firing fraction
  LifParams lif1;

  // Throws unless the maps fit a membrane tensor of shape `h`.
  void validate(const Shape& h) const;
};

struct AttentionInit {
  std::size_t spatial_kernel = 7;
  double k_percent = 50.0;
  LifParams lif1{};
  // Bias of the SDA maps. Above lif1.v_th the weight neurons are open unless
  // the squeezed input votes them down; 1.4 gives ~85% firing for the
  // U(-1/sqrt(n), 1/sqrt(n)) weights over half-active inputs.
  double sda_bias = 1.4;
};

/// Seeded maps for either variant. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in));
/// float-attention biases are zero.
AttentionConfig make_attention_config(AttentionVariant variant, std::size_t steps,
                                      std::size_t channels, Rng& rng,
                                      const AttentionInit& init = {});

/// Float reference attention: for temporal, channel, then spatial, squeeze H
/// by max-pooling the other axes, map, sigmoid, and H <- g o H. Each
/// Hadamard costs one MUL per element of H. When `weights` is given the
/// three sigmoid gates are stored in its `value` members.
Tensor tcsa_apply(const Tensor& h, const AttentionConfig& cfg,
                  AttentionWeights* weights = nullptr);

/// Spike-driven weights of one dimension:
///   squeeze (max-pool) -> LIF0 top-k -> map (binary input) -> LIF1,
/// with value = sigmoid(LIF1 membrane).
DimWeights sda_dim_weights(const Tensor& h, AttentionDim dim, const AttentionConfig& cfg);

/// H_att = st*fc*ss + sc*fs*st + ss*ft*sc + H, where s* are spike masks and
/// f* float weights of the temporal (t), channel (c) and spatial (s)
/// dimensions. Every product carries two spike factors, so each term is a
/// gated accumulate visited only where both masks are 1; the residual add
/// costs one AC per element. No MULs.
Tensor sda_fuse(const Tensor& h, const AttentionWeights& w);

struct AttentionResult {
  Tensor h_att;
  std::optional<AttentionWeights> weights;
};

/// Dispatches on cfg.variant; None is the identity and records nothing.
/// Operations are recorded under the "attention" ledger tag.
AttentionResult attention_forward(const Tensor& h, const AttentionConfig& cfg);

}  // namespace tde
