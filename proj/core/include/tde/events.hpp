#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "tde/tensor.hpp"

namespace tde {

/// One DVS event. Polarity is -1 or +1; t is in microseconds.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;
  std::int8_t p = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Half-open time window [begin, end).
struct TimeWindow {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

/// Malformed event input. `location` is the 1-based line number for CSV and
/// the 0-based record index for binary input.
class EventFormatError : public std::runtime_error {
 public:
  EventFormatError(const std::string& what, std::size_t location)
      : std::runtime_error(what), location_(location) {}
  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

/// Signed polarity sum per pixel over events inside `window`. Returns
/// [1, height, width]. Every event's coordinates are range-checked, including
/// events outside the window.
Tensor accumulate_events(std::span<const Event> events, std::size_t height, std::size_t width,
                         TimeWindow window);

// CSV: one `x,y,t,p` line per event, integer fields, p in {-1, 1}. Blank
// lines are skipped.
std::vector<Event> read_events_csv(std::istream& in);
void write_events_csv(std::ostream& out, std::span<const Event> events);

// Binary: little-endian records of u16 x, u16 y, u64 t, i8 p; 13 bytes each,
// no header, no padding.
inline constexpr std::size_t kEventRecordBytes = 13;
std::vector<Event> read_events_binary(std::istream& in);
void write_events_binary(std::ostream& out, std::span<const Event> events);

std::vector<Event> load_events(const std::filesystem::path& path, bool binary);

}  // namespace tde
