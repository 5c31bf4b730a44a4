#include "tde/events.hpp"

#include <array>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>

namespace tde {

Tensor accumulate_events(std::span<const Event> events, std::size_t height, std::size_t width,
                         TimeWindow window) {
  if (window.end <= window.begin)
    throw std::invalid_argument(
        fmt::format("event window [{}, {}) is empty", window.begin, window.end));
  if (height == 0 || width == 0) throw ShapeError("event frame extents must be positive");
  Tensor frame(Shape{1, height, width});
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.x >= width || e.y >= height)
      throw std::out_of_range(fmt::format("event {} at ({}, {}) lies outside the {}x{} frame", i,
                                          e.x, e.y, width, height));
    if (e.p != 1 && e.p != -1)
      throw std::invalid_argument(fmt::format("event {} has polarity {}", i, int{e.p}));
    if (e.t < window.begin || e.t >= window.end) continue;
    frame[static_cast<std::size_t>(e.y) * width + e.x] += e.p;
  }
  return frame;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
Int parse_field(std::string_view field, std::string_view name, std::size_t line) {
  field = trim(field);
  Int value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end || field.empty())
    throw EventFormatError(fmt::format("line {}: invalid {} field '{}'", line, name, field), line);
  return value;
}

}  // namespace

std::vector<Event> read_events_csv(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    std::array<std::string_view, 4> fields;
    std::size_t count = 0, start = 0;
    for (std::size_t i = 0; i <= view.size(); ++i) {
      if (i == view.size() || view[i] == ',') {
        if (count == fields.size())
          throw EventFormatError(fmt::format("line {}: expected 4 fields", line_no), line_no);
        fields[count++] = view.substr(start, i - start);
        start = i + 1;
      }
    }
    if (count != fields.size())
      throw EventFormatError(fmt::format("line {}: expected 4 fields, got {}", line_no, count),
                             line_no);
    Event e;
    e.x = parse_field<std::uint16_t>(fields[0], "x", line_no);
    e.y = parse_field<std::uint16_t>(fields[1], "y", line_no);
    e.t = parse_field<std::uint64_t>(fields[2], "t", line_no);
    const int p = parse_field<int>(fields[3], "p", line_no);
    if (p != 1 && p != -1)
      throw EventFormatError(fmt::format("line {}: polarity must be -1 or 1, got {}", line_no, p),
                             line_no);
    e.p = static_cast<std::int8_t>(p);
    events.push_back(e);
  }
  return events;
}

void write_events_csv(std::ostream& out, std::span<const Event> events) {
  for (const Event& e : events) out << e.x << ',' << e.y << ',' << e.t << ',' << int{e.p} << '\n';
}

std::vector<Event> read_events_binary(std::istream& in) {
  std::vector<Event> events;
  std::array<unsigned char, kEventRecordBytes> rec{};
  for (std::size_t index = 0;; ++index) {
    in.read(reinterpret_cast<char*>(rec.data()), rec.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    if (got != rec.size())
      throw EventFormatError(
          fmt::format("record {}: truncated ({} of {} bytes)", index, got, rec.size()), index);
    auto le = [&](std::size_t at, std::size_t n) {
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(rec[at + i]) << (8 * i);
      return v;
    };
    Event e;
    e.x = static_cast<std::uint16_t>(le(0, 2));
    e.y = static_cast<std::uint16_t>(le(2, 2));
    e.t = le(4, 8);
    e.p = static_cast<std::int8_t>(rec[12]);
    if (e.p != 1 && e.p != -1)
      throw EventFormatError(fmt::format("record {}: polarity must be -1 or 1, got {}", index,
                                         int{e.p}),
                             index);
    events.push_back(e);
  }
  return events;
}

void write_events_binary(std::ostream& out, std::span<const Event> events) {
  std::array<unsigned char, kEventRecordBytes> rec{};
  for (const Event& e : events) {
    auto put = [&](std::size_t at, std::uint64_t v, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) rec[at + i] = static_cast<unsigned char>(v >> (8 * i));
    };
    put(0, e.x, 2);
    put(2, e.y, 2);
    put(4, e.t, 8);
    rec[12] = static_cast<unsigned char>(e.p);
    out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
  }
}

std::vector<Event> load_events(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error(fmt::format("cannot open event file {}", path.string()));
  return binary ? read_events_binary(in) : read_events_csv(in);
}

}  // namespace tde
