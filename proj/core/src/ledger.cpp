#include "tde/ledger.hpp"

namespace tde {

namespace {
thread_local EnergyLedger* t_active = nullptr;
thread_local std::string_view t_tag = "untagged";

OpCounts& slot(EnergyLedger::TagMap& tags, std::string_view tag) {
  auto it = tags.find(tag);
  if (it == tags.end()) it = tags.emplace(std::string(tag), OpCounts{}).first;
  return it->second;
}
}  // namespace

void EnergyLedger::add_mul(std::string_view tag, std::uint64_t n) {
  slot(tags_, tag).mul += n;
}

void EnergyLedger::add_ac(std::string_view tag, std::uint64_t n) {
  slot(tags_, tag).ac += n;
}

void EnergyLedger::merge(const EnergyLedger& other) {
  for (const auto& [tag, c] : other.tags_) slot(tags_, tag) += c;
}

OpCounts EnergyLedger::counts(std::string_view tag) const {
  auto it = tags_.find(tag);
  return it == tags_.end() ? OpCounts{} : it->second;
}

OpCounts EnergyLedger::total() const {
  OpCounts sum;
  for (const auto& [tag, c] : tags_) sum += c;
  return sum;
}

bool EnergyLedger::empty() const noexcept {
  for (const auto& [tag, c] : tags_)
    if (c.mul != 0 || c.ac != 0) return false;
  return true;
}

EnergyLedger EnergyLedger::slice(std::string_view tag) const {
  EnergyLedger out;
  if (auto it = tags_.find(tag); it != tags_.end()) out.tags_.emplace(it->first, it->second);
  return out;
}

ActiveLedger::ActiveLedger(EnergyLedger& ledger) noexcept : previous_(t_active) {
  t_active = &ledger;
}

ActiveLedger::~ActiveLedger() { t_active = previous_; }

LedgerTag::LedgerTag(std::string_view tag) noexcept : previous_(t_tag) { t_tag = tag; }

LedgerTag::~LedgerTag() { t_tag = previous_; }

namespace counting {

void mul(std::uint64_t n) {
  if (t_active != nullptr && n != 0) t_active->add_mul(t_tag, n);
}

void ac(std::uint64_t n) {
  if (t_active != nullptr && n != 0) t_active->add_ac(t_tag, n);
}

bool active() noexcept { return t_active != nullptr; }

std::string_view current_tag() noexcept { return t_tag; }

}  // namespace counting

}  // namespace tde
