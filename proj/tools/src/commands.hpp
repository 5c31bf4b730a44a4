#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace tde::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;

struct SimulateArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out_dir;
  bool baseline = false;
};

struct EnergyArgs {
  std::string variant = "sda";
  bool reference_shape = false;
  std::optional<std::string> shape;  // "T,C,H,W"
  bool compare = false;
  std::optional<std::uint64_t> seed;
  bool csv = false;
};

struct DiversityArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::size_t> layer;
  std::optional<std::filesystem::path> out_dir;
};

struct GradcheckArgs {
  std::string mode = "relaxed";
  double h = 1e-4;
  std::size_t seeds = 5;
  std::optional<std::uint64_t> seed;
};

struct TrainToyArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::size_t> steps;
};

struct EventsToFrameArgs {
  std::filesystem::path input;
  std::string format = "csv";
  std::optional<std::filesystem::path> out;
  std::optional<std::string> window;  // "begin,end"
  std::optional<std::string> size;    // "H,W"
};

// Each command returns its exit code and throws InputError for invalid input.
int cmd_simulate(const SimulateArgs& args, std::ostream& log);
int cmd_energy(const EnergyArgs& args, std::ostream& out);
int cmd_diversity(const DiversityArgs& args, std::ostream& log);
int cmd_gradcheck(const GradcheckArgs& args, std::ostream& log);
int cmd_train_toy(const TrainToyArgs& args, std::ostream& log);
int cmd_events_to_frame(const EventsToFrameArgs& args, std::ostream& out);

}  // namespace tde::cli
