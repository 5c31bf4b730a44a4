#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace tde {

struct OpCounts {
  std::uint64_t mul = 0;
  std::uint64_t ac = 0;

  OpCounts& operator+=(const OpCounts& other) noexcept {
    mul += other.mul;
    ac += other.ac;
    return *this;
  }
  friend OpCounts operator+(OpCounts a, const OpCounts& b) noexcept { return a += b; }
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

/// MUL / AC counters keyed by module tag.
///
/// Counting convention used by every kernel in this library:
///   - float x float multiply: 1 MUL
///   - any addition (including accumulate into a running sum): 1 AC
///   - multiply where one operand is a spike: 1 AC, and only when the spike is 1
///   - comparisons, copies, max-pooling, neuron state updates and elementwise
///     activations (sigmoid): free
/// Counts only ever grow; there is no way to decrement a tag.
class EnergyLedger {
 public:
  using TagMap = std::map<std::string, OpCounts, std::less<>>;

  void add_mul(std::string_view tag, std::uint64_t n);
  void add_ac(std::string_view tag, std::uint64_t n);
  void merge(const EnergyLedger& other);

  OpCounts counts(std::string_view tag) const;
  OpCounts total() const;
  const TagMap& by_tag() const noexcept { return tags_; }
  bool empty() const noexcept;

  // Ledger restricted to a single tag.
  EnergyLedger slice(std::string_view tag) const;

  friend bool operator==(const EnergyLedger&, const EnergyLedger&) = default;

 private:
  TagMap tags_;
};

/// Installs `ledger` as the active ledger of the calling thread for the
/// lifetime of the scope. Scopes nest; the previous ledger is restored.
class ActiveLedger {
 public:
  explicit ActiveLedger(EnergyLedger& ledger) noexcept;
  ~ActiveLedger();
  ActiveLedger(const ActiveLedger&) = delete;
  ActiveLedger& operator=(const ActiveLedger&) = delete;

 private:
  EnergyLedger* previous_;
};

/// Sets the tag under which kernels record operations. The tag text must
/// outlive the scope (string literals in practice).
class LedgerTag {
 public:
  explicit LedgerTag(std::string_view tag) noexcept;
  ~LedgerTag();
  LedgerTag(const LedgerTag&) = delete;
  LedgerTag& operator=(const LedgerTag&) = delete;

 private:
  std::string_view previous_;
};

namespace counting {
// No-ops when no ledger is active on this thread.
void mul(std::uint64_t n);
void ac(std::uint64_t n);
bool active() noexcept;
std::string_view current_tag() noexcept;
}  // namespace counting

}  // namespace tde
