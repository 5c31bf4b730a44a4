#include "tde/diversity.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace tde {

std::uint64_t PatternHistogram::total() const noexcept {
  std::uint64_t n = 0;
  for (std::uint64_t c : counts) n += c;
  return n;
}

namespace {

void accumulate(PatternHistogram& h, const Tensor& spikes) {
  const Shape& s = spikes.shape();
  if (s.rank() < 1 || s[0] < 1)
    throw ShapeError(fmt::format("spike train needs a leading time axis, got {}", s.str()));
  if (s[0] != h.steps)
    throw ShapeError(fmt::format("spike train has T = {}, histogram has T = {}", s[0], h.steps));
  const std::size_t neurons = spikes.size() / s[0];
  for (std::size_t n = 0; n < neurons; ++n) {
    std::size_t index = 0;
    for (std::size_t t = 0; t < h.steps; ++t) {
      const double v = spikes[t * neurons + n];
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument(
            fmt::format("neuron {} step {} holds {}, not a spike value", n, t + 1, v));
      index = (index << 1) | (v != 0.0 ? 1u : 0u);
    }
    ++h.counts[index];
  }
}

PatternHistogram empty_histogram(std::size_t steps) {
  if (steps < 1 || steps > kMaxPatternSteps)
    throw std::invalid_argument(
        fmt::format("pattern length {} outside 1..{}", steps, kMaxPatternSteps));
  return PatternHistogram{steps, std::vector<std::uint64_t>(std::size_t{1} << steps, 0)};
}

}  // namespace

PatternHistogram pattern_histogram(const Tensor& spikes) {
  if (spikes.shape().rank() < 1) throw ShapeError("empty spike train");
  PatternHistogram h = empty_histogram(spikes.shape()[0]);
  accumulate(h, spikes);
  return h;
}

PatternHistogram pattern_histogram(std::span<const Tensor> trains) {
  if (trains.empty()) throw std::invalid_argument("no spike trains given");
  if (trains.front().shape().rank() < 1) throw ShapeError("empty spike train");
  PatternHistogram h = empty_histogram(trains.front().shape()[0]);
  for (const Tensor& t : trains) accumulate(h, t);
  return h;
}

std::size_t coverage(const PatternHistogram& h) noexcept {
  std::size_t n = 0;
  for (std::uint64_t c : h.counts) n += c != 0 ? 1 : 0;
  return n;
}

double pattern_entropy(const PatternHistogram& h) {
  const std::uint64_t total = h.total();
  if (total == 0) throw std::invalid_argument("entropy of an empty histogram");
  double bits = 0.0;
  for (std::uint64_t c : h.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    bits -= p * std::log2(p);
  }
  return bits;
}

std::string pattern_string(std::size_t index, std::size_t steps) {
  std::string s(steps, '0');
  for (std::size_t t = 0; t < steps; ++t)
    if ((index >> (steps - 1 - t)) & 1u) s[t] = '1';
  return s;
}

std::string histogram_to_json(const PatternHistogram& h) {
  nlohmann::ordered_json j;
  j["T"] = h.steps;
  j["counts"] = h.counts;
  return j.dump();
}

PatternHistogram histogram_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PatternHistogram h = empty_histogram(j.at("T").get<std::size_t>());
  const auto counts = j.at("counts").get<std::vector<std::uint64_t>>();
  if (counts.size() != h.counts.size())
    throw std::invalid_argument(
        fmt::format("histogram has {} bins, expected {}", counts.size(), h.counts.size()));
  h.counts = counts;
  return h;
}

void raster_export(const Tensor& spikes, const std::filesystem::path& path,
                   std::optional<NeuronRange> selection) {
  const Shape& s = spikes.shape();
  if (s.rank() < 1 || s[0] < 1)
    throw ShapeError(fmt::format("spike train needs a leading time axis, got {}", s.str()));
  const std::size_t steps = s[0];
  const std::size_t neurons = spikes.size() / steps;
  NeuronRange range = selection.value_or(NeuronRange{0, neurons});
  range.last = std::min(range.last, neurons);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
  std::string buf = "neuron_id,t,spike\n";
  for (std::size_t n = range.first; n < range.last; ++n) {
    for (std::size_t t = 0; t < steps; ++t) {
      const double v = spikes[t * neurons + n];
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument(fmt::format("neuron {} step {} is not a spike value", n, t + 1));
      fmt::format_to(std::back_inserter(buf), "{},{},{}\n", n, t + 1, v != 0.0 ? 1 : 0);
    }
  }
  out << buf;
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

Tensor raster_import(const std::filesystem::path& path, const Shape& shape) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  if (shape.rank() < 1) throw ShapeError("raster import needs a [T, ...] shape");
  const std::size_t steps = shape[0];
  const std::size_t neurons = shape.numel() / steps;
  Tensor out(shape);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "neuron_id,t,spike")
        throw std::runtime_error(fmt::format("{}: unexpected header '{}'", path.string(), line));
      continue;
    }
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t n = 0, t = 0;
    int spike = 0;
    char c1 = 0, c2 = 0;
    if (!(row >> n >> c1 >> t >> c2 >> spike) || c1 != ',' || c2 != ',' || t < 1 || t > steps ||
        n >= neurons || (spike != 0 && spike != 1))
      throw std::runtime_error(fmt::format("{}:{}: malformed raster row '{}'", path.string(),
                                           line_no, line));
    out[(t - 1) * neurons + n] = spike;
  }
  out.mark_binary();
  return out;
}

}  // namespace tde
