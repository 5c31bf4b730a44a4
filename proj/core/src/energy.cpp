#include "tde/energy.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "tde/random.hpp"

namespace tde {

double energy_of(std::uint64_t mul, std::uint64_t ac) noexcept {
  return kMulJoules * static_cast<double>(mul) + kAcJoules * static_cast<double>(ac);
}

double energy_of(const OpCounts& counts) noexcept { return energy_of(counts.mul, counts.ac); }

double energy_of(const EnergyLedger& ledger) { return energy_of(ledger.total()); }

EnergyComparison compare(const EnergyLedger& a, const EnergyLedger& b) {
  EnergyComparison cmp;
  cmp.energy_a = energy_of(a);
  cmp.energy_b = energy_of(b);
  if (cmp.energy_a > 0.0) cmp.ratio = cmp.energy_b / cmp.energy_a;
  for (const auto& [tag, c] : a.by_tag()) cmp.per_tag[tag][0] = energy_of(c);
  for (const auto& [tag, c] : b.by_tag()) cmp.per_tag[tag][1] = energy_of(c);
  return cmp;
}

EnergyLedger profile_attention(AttentionVariant variant, const AttentionShape& shape,
                               std::uint64_t seed, const AttentionInit& init) {
  if (variant == AttentionVariant::None)
    throw std::invalid_argument("profile_attention needs the tcsa or sda variant");
  const auto [steps, chans, height, width] = shape;
  if (steps == 0 || chans == 0 || height == 0 || width == 0)
    throw ShapeError("profile_attention shape extents must be positive");
  const Rng root(seed, "profile");
  Rng cfg_rng = root.split("attention");
  const AttentionConfig cfg = make_attention_config(variant, steps, chans, cfg_rng, init);

  Tensor h(Shape{steps, chans, height, width});
  Rng data_rng = root.split("membrane");
  for (double& v : h.data()) v = data_rng.normal();

  EnergyLedger ledger;
  {
    ActiveLedger active(ledger);
    (void)attention_forward(h, cfg);
  }
  return ledger.slice("attention");
}

EnergyReport make_report(AttentionVariant variant, const AttentionShape& shape,
                         const EnergyLedger& ledger, std::optional<double> ratio) {
  const OpCounts c = ledger.total();
  return EnergyReport{std::string(to_string(variant)), shape, c.mul, c.ac, energy_of(c), ratio};
}

namespace {

nlohmann::ordered_json report_json(const EnergyReport& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["shape"] = r.shape;
  j["mul"] = r.mul;
  j["ac"] = r.ac;
  j["energy_joules"] = r.energy_joules;
  j["ratio_vs_baseline"] = r.ratio_vs_baseline ? nlohmann::ordered_json(*r.ratio_vs_baseline)
                                               : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace

std::string to_json(const EnergyReport& report) { return report_json(report).dump(2); }

std::string to_json(std::span<const EnergyReport> reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const EnergyReport& r : reports) arr.push_back(report_json(r));
  return arr.dump(2);
}

std::string csv_header() { return "variant,shape,mul,ac,energy_joules,ratio_vs_baseline"; }

std::string to_csv_row(const EnergyReport& r) {
  return fmt::format("{},{}x{}x{}x{},{},{},{:.6e},{}", r.variant, r.shape[0], r.shape[1],
                     r.shape[2], r.shape[3], r.mul, r.ac, r.energy_joules,
                     r.ratio_vs_baseline ? fmt::format("{:.6f}", *r.ratio_vs_baseline) : "");
}

std::string ledger_to_json(const EnergyLedger& ledger) {
  nlohmann::ordered_json j;
  const OpCounts total = ledger.total();
  j["mul"] = total.mul;
  j["ac"] = total.ac;
  j["energy_joules"] = energy_of(total);
  nlohmann::ordered_json tags = nlohmann::ordered_json::object();
  for (const auto& [tag, c] : ledger.by_tag())
    tags[tag] = {{"mul", c.mul}, {"ac", c.ac}, {"energy_joules", energy_of(c)}};
  j["tags"] = std::move(tags);
  return j.dump(2);
}

}  // namespace tde
