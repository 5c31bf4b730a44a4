#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "tde/attention.hpp"
#include "tde/ledger.hpp"

namespace tde {

// 45 nm, 32-bit float operation energies.
inline constexpr double kMulJoules = 3.7e-12;
inline constexpr double kAcJoules = 0.9e-12;

double energy_of(std::uint64_t mul, std::uint64_t ac) noexcept;
double energy_of(const OpCounts& counts) noexcept;
double energy_of(const EnergyLedger& ledger);

struct EnergyComparison {
  double energy_a = 0.0;
  double energy_b = 0.0;
  // E(b) / E(a); empty when E(a) is zero.
  std::optional<double> ratio;
  std::map<std::string, std::array<double, 2>, std::less<>> per_tag;  // tag -> {E_a, E_b}
};

EnergyComparison compare(const EnergyLedger& a, const EnergyLedger& b);

using AttentionShape = std::array<std::size_t, 4>;  // T, C, H, W
inline constexpr AttentionShape kReferenceAttentionShape{4, 128, 80, 40};

/// Runs attention_forward for `variant` on a seeded N(0, 1) membrane tensor of
/// `shape` and returns the ledger slice of the "attention" tag.
EnergyLedger profile_attention(AttentionVariant variant, const AttentionShape& shape,
                               std::uint64_t seed, const AttentionInit& init = {});

struct EnergyReport {
  std::string variant;
  AttentionShape shape{};
  std::uint64_t mul = 0;
  std::uint64_t ac = 0;
  double energy_joules = 0.0;
  std::optional<double> ratio_vs_baseline;
};

EnergyReport make_report(AttentionVariant variant, const AttentionShape& shape,
                         const EnergyLedger& ledger, std::optional<double> ratio);

// {"variant", "shape", "mul", "ac", "energy_joules", "ratio_vs_baseline"}
std::string to_json(const EnergyReport& report);
std::string to_json(std::span<const EnergyReport> reports);
std::string csv_header();
std::string to_csv_row(const EnergyReport& report);

// {"mul", "ac", "energy_joules", "tags": {tag: {"mul", "ac", "energy_joules"}}}
std::string ledger_to_json(const EnergyLedger& ledger);

}  // namespace tde
