#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tde/autodiff.hpp"

namespace tde {

struct GradcheckOptions {
  std::uint64_t seed = 42;
  double h = 1e-4;
  std::size_t steps = 4;
  std::size_t size = 4;
  LifParams lif{};
};

struct ParameterError {
  std::string name;
  double relative_error = 0.0;
};

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::vector<ParameterError> parameters;
};

/// Two conv + LIF layers in relaxed mode on a seeded single-channel
/// size x size input, smooth-L1 loss against a seeded target. Compares the
/// tape gradient of every parameter (and the input) with central differences.
GradcheckReport gradcheck_network(const GradcheckOptions& options);

}  // namespace tde
