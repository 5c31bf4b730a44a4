#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tde/tensor.hpp"

namespace tde {

/// Counts of T-bit firing patterns. Bin index reads the stream with the
/// earliest step as the most significant bit, so the stream 1,1,1,0 lands
/// in bin 0b1110 = 14.
struct PatternHistogram {
  std::size_t steps = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const noexcept;
  friend bool operator==(const PatternHistogram&, const PatternHistogram&) = default;
};

inline constexpr std::size_t kMaxPatternSteps = 16;

/// Histogram of every neuron of a binary [T, ...] tensor (neurons are the
/// non-leading elements). Throws on non-{0,1} values or T > 16.
PatternHistogram pattern_histogram(const Tensor& spikes);
/// Accumulates several trains with the same T into one histogram.
PatternHistogram pattern_histogram(std::span<const Tensor> trains);

/// Number of non-empty bins.
std::size_t coverage(const PatternHistogram& h) noexcept;

/// Shannon entropy in bits; throws when the histogram holds no neurons.
double pattern_entropy(const PatternHistogram& h);

/// "1110"-style rendering of a bin index.
std::string pattern_string(std::size_t index, std::size_t steps);

// {"T": steps, "counts": [...]}
std::string histogram_to_json(const PatternHistogram& h);
PatternHistogram histogram_from_json(const std::string& text);

/// Half-open neuron range [first, last) for raster export.
struct NeuronRange {
  std::size_t first = 0;
  std::size_t last = 0;
};

/// Writes `neuron_id,t,spike` rows, neuron-major then t = 1..T. Neuron ids
/// are flat indices over the non-leading axes. Throws std::runtime_error
/// naming the path on IO failure.
void raster_export(const Tensor& spikes, const std::filesystem::path& path,
                   std::optional<NeuronRange> selection = std::nullopt);

/// Parses a raster file back into a binary tensor of `shape` ([T, ...]).
/// Neurons absent from the file are silent.
Tensor raster_import(const std::filesystem::path& path, const Shape& shape);

}  // namespace tde
