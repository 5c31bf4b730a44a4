#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tde/attention.hpp"
#include "tde/autodiff.hpp"
#include "tde/encoder.hpp"
#include "tde/events.hpp"
#include "tde/gating.hpp"
#include "tde/neuron.hpp"
#include "tde/toy_regressor.hpp"

namespace tde::cli {

/// Invalid user input. Maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InputConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t batch = 8;
  // When set, a single frame accumulated from this event file replaces the
  // synthetic batch.
  std::optional<std::filesystem::path> events;
  bool events_binary = false;
  std::optional<TimeWindow> window;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::size_t steps = 4;
  InputConfig input;
  LifParams lif;
  EncoderOptions encoder;
  AttentionVariant variant = AttentionVariant::Sda;
  AttentionInit attention;
  bool gating = true;
  std::size_t rounds = 1;  // gated batches before the measured one
  ad::SpikeMode mode = ad::SpikeMode::Spiking;
  std::filesystem::path output_dir = "out";
  std::size_t layer = 0;  // 0: encoder LIF, 1: block output
  ToyTrainConfig train;

  TdeOptions tde_options() const;
};

inline constexpr int kSchemaVersion = 1;

/// Parses and validates a JSON config. Throws InputError naming the line of a
/// syntax error or the dotted path of an offending field.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Config from `path` (defaults when empty) with TDE_SNN_SEED applied.
RunConfig resolve_config(const std::optional<std::filesystem::path>& path);

/// Value of TDE_SNN_SEED, if set. Throws InputError when it is not an
/// unsigned integer.
std::optional<std::uint64_t> seed_override();

}  // namespace tde::cli
