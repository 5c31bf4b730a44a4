#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

#include "tde/ledger.hpp"
#include "tde/random.hpp"
#include "tde/tensor.hpp"

namespace tde::test {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, std::string_view label = "t",
                            double lo = -1.0, double hi = 1.0) {
  Rng rng(seed, label);
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_spikes(Shape shape, std::uint64_t seed, double rate = 0.5) {
  Rng rng(seed, "spikes");
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform() < rate ? 1.0 : 0.0;
  t.mark_binary();
  return t;
}

// Runs f with a fresh active ledger and returns the ops it recorded.
template <typename F>
OpCounts count_ops(F&& f) {
  EnergyLedger ledger;
  {
    ActiveLedger active(ledger);
    std::forward<F>(f)();
  }
  return ledger.total();
}

}  // namespace tde::test
