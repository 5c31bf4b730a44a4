#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "tde/random.hpp"
#include "tde/tensor.hpp"

namespace tde {

/// Single-object image with its box (cx, cy, w, h); x extents are normalized
/// by the width, y extents by the height.
struct BoxSample {
  Tensor image;  // [1, height, width]
  std::array<double, 4> box{};
};

/// A bright axis-aligned box of random extent and position on a dark
/// background, plus Gaussian noise of standard deviation `noise`.
BoxSample make_box_sample(Rng& rng, std::size_t height, std::size_t width, double noise = 0.1);

std::vector<BoxSample> make_box_dataset(std::uint64_t seed, std::string_view label,
                                        std::size_t count, std::size_t height, std::size_t width,
                                        double noise = 0.1);

}  // namespace tde
