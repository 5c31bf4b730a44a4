#include <CLI11.hpp>
#include <fmt/format.h>
#include <iostream>

#include "commands.hpp"
#include "config.hpp"

using namespace tde::cli;

namespace {

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network simulator with a temporal dynamics enhancer, energy ledger and "
               "spike-pattern analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tde_snn 0.1.0");

  std::string config, out_dir;
  int code = kExitOk;

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run the TDE block on a seeded batch");
  simulate->add_option("config", config, "JSON run config (defaults when omitted)");
  simulate->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  simulate->add_flag("--baseline", sim.baseline, "Direct encoding pipeline instead of TDE");

  EnergyArgs en;
  std::uint64_t energy_seed = 0;
  auto* energy = app.add_subcommand("energy", "Attention MUL/AC counts and energy");
  energy->add_option("--variant", en.variant, "tcsa or sda")->capture_default_str();
  energy->add_flag("--paper-shape", en.reference_shape, "Profile at T=4, C=128, H=80, W=40 (default)");
  auto* shape_opt = energy->add_option("--shape", "Profile shape T,C,H,W");
  energy->add_flag("--compare", en.compare, "Report both variants and their ratio");
  auto* energy_seed_opt = energy->add_option("--seed", energy_seed, "Membrane seed");
  energy->add_flag("--csv", en.csv, "CSV instead of JSON");

  DiversityArgs div;
  std::size_t layer = 0;
  auto* diversity = app.add_subcommand("diversity", "Pattern coverage, baseline vs TDE");
  diversity->add_option("config", config, "JSON run config (defaults when omitted)");
  auto* layer_opt = diversity->add_option("--layer", layer, "0: encoder LIF, 1: block output");
  diversity->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  GradcheckArgs gc;
  std::uint64_t gc_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Autodiff vs central finite differences");
  gradcheck->set_help_flag("--help", "Print this help message and exit");
  gradcheck->add_option("--mode", gc.mode, "relaxed (spiking is refused)")->capture_default_str();
  gradcheck->add_option("--h", gc.h, "Finite-difference step")->capture_default_str();
  gradcheck->add_option("--seeds", gc.seeds, "Number of seeds")->capture_default_str();
  auto* gc_seed_opt = gradcheck->add_option("--seed", gc_seed, "First seed");

  TrainToyArgs tt;
  std::size_t steps = 0;
  auto* train = app.add_subcommand("train-toy", "Train the toy box regressor, baseline and TDE");
  train->add_option("config", config, "JSON run config (defaults when omitted)");
  train->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  auto* steps_opt = train->add_option("--steps", steps, "Training steps (overrides train.steps)");

  EventsToFrameArgs ev;
  std::string ev_out;
  auto* events = app.add_subcommand("events-to-frame", "Accumulate an event file into a frame");
  events->add_option("input", ev.input, "Event file")->required();
  events->add_option("--format", ev.format, "csv or bin")->capture_default_str();
  events->add_option("--out", ev_out, "Output CSV (stdout when omitted)");
  auto* window_opt = events->add_option("--window", "Half-open window begin,end in microseconds");
  auto* size_opt = events->add_option("--size", "Frame extent H,W (inferred when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (simulate->parsed()) {
      sim.config = opt_path(config);
      sim.out_dir = opt_path(out_dir);
      code = cmd_simulate(sim, std::cout);
    } else if (energy->parsed()) {
      if (*shape_opt) en.shape = shape_opt->as<std::string>();
      if (*energy_seed_opt) en.seed = energy_seed;
      code = cmd_energy(en, std::cout);
    } else if (diversity->parsed()) {
      div.config = opt_path(config);
      div.out_dir = opt_path(out_dir);
      if (*layer_opt) div.layer = layer;
      code = cmd_diversity(div, std::cout);
    } else if (gradcheck->parsed()) {
      if (*gc_seed_opt) gc.seed = gc_seed;
      code = cmd_gradcheck(gc, std::cout);
    } else if (train->parsed()) {
      tt.config = opt_path(config);
      tt.out_dir = opt_path(out_dir);
      if (*steps_opt) tt.steps = steps;
      code = cmd_train_toy(tt, std::cout);
    } else if (events->parsed()) {
      ev.out = opt_path(ev_out);
      if (*window_opt) ev.window = window_opt->as<std::string>();
      if (*size_opt) ev.size = size_opt->as<std::string>();
      code = cmd_events_to_frame(ev, std::cout);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitFailure;
  }
  return code;
}
