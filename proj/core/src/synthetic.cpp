#include "tde/synthetic.hpp"

#include <stdexcept>
#include <utility>

namespace tde {

namespace {

// Side in [2, extent / 2 + 1] and a start that keeps the box inside.
std::pair<std::size_t, std::size_t> draw_span(Rng& rng, std::size_t extent) {
  const std::size_t max_side = extent / 2 + 1;
  const std::size_t side = 2 + rng.below(max_side - 1);
  return {rng.below(extent - side + 1), side};
}

}  // namespace

BoxSample make_box_sample(Rng& rng, std::size_t height, std::size_t width, double noise) {
  if (height < 4 || width < 4)
    throw std::invalid_argument("box images need at least 4 pixels per side");
  const auto [x0, w] = draw_span(rng, width);
  const auto [y0, h] = draw_span(rng, height);

  BoxSample s;
  s.image = Tensor(Shape{1, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const bool inside = x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
      s.image[y * width + x] = (inside ? 1.0 : 0.0) + noise * rng.normal();
    }
  }
  const auto fw = static_cast<double>(width);
  const auto fh = static_cast<double>(height);
  s.box = {(static_cast<double>(x0) + static_cast<double>(w) / 2.0) / fw,
           (static_cast<double>(y0) + static_cast<double>(h) / 2.0) / fh,
           static_cast<double>(w) / fw, static_cast<double>(h) / fh};
  return s;
}

std::vector<BoxSample> make_box_dataset(std::uint64_t seed, std::string_view label,
                                        std::size_t count, std::size_t height, std::size_t width,
                                        double noise) {
  Rng rng(seed, label);
  std::vector<BoxSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_box_sample(rng, height, width, noise));
  return out;
}

}  // namespace tde
