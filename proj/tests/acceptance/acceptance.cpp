#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "tde/energy.hpp"
#include "tde/gating.hpp"
#include "tde/gradcheck.hpp"
#include "tde/neuron.hpp"
#include "tde/synthetic.hpp"
#include "tde/toy_regressor.hpp"

namespace fs = std::filesystem;
using namespace tde;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

// Golden pattern coverage of the diversity command at its defaults (seed 42,
// batch of 8 16x16 box images, T = 4, encoder LIF layer, one gated round).
constexpr int kGoldenCoverageBaseline = 7;
constexpr int kGoldenCoverageTde = 15;

const std::vector<std::string> kSimulateOutputs{"raster.csv", "histogram.json", "ledger.json",
                                                "alpha.csv"};

fs::path scratch_dir() {
  static const fs::path dir = fs::temp_directory_path() / fmt::format("tde_acceptance_{}", getpid());
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the command-line tool with the default seed; returns its exit code.
int run_tool(const std::string& args) {
  const std::string cmd = fmt::format("env -u TDE_SNN_SEED '{}' {} >/dev/null 2>&1", TDE_SNN_EXE, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool within_rel(double value, double reference, double tol) {
  return std::abs(value - reference) <= tol * std::abs(reference);
}

Outcome energy_formula() {
  const double tcsa = energy_of(5'750'000, 576'000);
  const double sda = energy_of(0, 5'820'000);
  EnergyLedger a, b;
  a.add_mul("attention", 5'750'000);
  a.add_ac("attention", 576'000);
  b.add_ac("attention", 5'820'000);
  const std::optional<double> ratio = compare(a, b).ratio;
  const bool pass = within_rel(tcsa, 21.8e-6, 0.005) && within_rel(sda, 5.24e-6, 0.005) &&
                    within_rel(tcsa, 21.7934e-6, 1e-9) && within_rel(sda, 5.238e-6, 1e-9) &&
                    ratio && std::abs(*ratio - 0.240) <= 0.002;
  return {pass, fmt::format("E_tcsa {:.4f} uJ, E_sda {:.4f} uJ, ratio {:.4f} (tol 0.5%, 0.002)",
                            tcsa * 1e6, sda * 1e6, ratio.value_or(-1.0))};
}

Outcome sda_zero_mul() {
  std::string muls;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const OpCounts c = profile_attention(AttentionVariant::Sda, kReferenceAttentionShape, seed).total();
    pass = pass && c.mul == 0 && c.ac > 0;
    muls += fmt::format("{}{}", seed > 1 ? "," : "", c.mul);
  }
  return {pass, fmt::format("mul per seed 1..5 = [{}] at T=4 C=128 H=80 W=40", muls)};
}

Outcome tcsa_energy() {
  const EnergyLedger l = profile_attention(AttentionVariant::Tcsa, kReferenceAttentionShape, 42);
  const double e = energy_of(l);
  return {within_rel(e, 21.8e-6, 0.2),
          fmt::format("{:.3f} uJ ({} MUL, {} AC) vs 21.8 uJ, tol 20%", e * 1e6, l.total().mul,
                      l.total().ac)};
}

Outcome lif_trace() {
  const LifParams p{};
  const double v1 = 0.5 * ((0.0 + 0.6) - 1.0 * 0.0);
  const double v2 = 0.5 * ((v1 + 0.6) - 1.0 * 0.0);
  const double v3 = 0.5 * ((v2 + 0.6) - 1.0 * 1.0);
  const std::array<double, 3> expect_v{v1, v2, v3};
  const std::array<double, 3> decimal_v{0.3, 0.45, 0.025};
  const std::array<double, 3> expect_s{0, 0, 1};
  LifState state{Tensor(Shape{1})};
  bool pass = true;
  std::string trace;
  for (std::size_t t = 0; t < 3; ++t) {
    const LifStep s = lif_step(state, Tensor(Shape{1}, 0.6), p);
    pass = pass && s.spikes[0] == expect_s[t] && s.state.v[0] == expect_v[t] &&
           std::abs(s.state.v[0] - decimal_v[t]) <= 1e-12;
    trace += fmt::format(" t{}: s={} V={}", t + 1, s.spikes[0], s.state.v[0]);
    state = s.state;
  }
  const Tensor spikes = lif_forward(Tensor(Shape{3, 1}, 0.6), p);
  pass = pass && spikes == Tensor(Shape{3, 1}, {0, 0, 1});
  return {pass, "bit-exact;" + trace};
}

Outcome baseline_equivalence() {
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EncoderOptions eo;
    eo.alpha_init = 1.0;
    Rng rng(seed, "encoder");
    const EncoderState enc = make_encoder(eo, rng);
    const Tensor x = make_box_dataset(seed, "input", 1, 16, 16).front().image;
    pass = pass && se_encode(x, enc, LifParams{}) == direct_encode_spikes(x, enc, LifParams{});

    TdeOptions o;
    o.variant = AttentionVariant::None;
    o.encoder.alpha_init = 1.0;
    TdeModel m = make_tde_model(o, seed);
    std::vector<Tensor> batch;
    for (BoxSample& s : make_box_dataset(seed, "input", 4, 16, 16)) batch.push_back(s.image);
    const TdeOutput a = tde_forward(batch, m, true);
    const TdeOutput b = baseline_forward(batch, m);
    pass = pass && a.spikes == b.spikes &&
           a.diagnostics.encoder_spikes == b.diagnostics.encoder_spikes;
  }
  return {pass, "SE(alpha=1) == direct+LIF and TDE(none, alpha=1) == baseline, seeds 1..5, bit-equal"};
}

Outcome pattern_recovery() {
  const fs::path out = scratch_dir() / "diversity";
  const int code = run_tool(fmt::format("diversity --out '{}'", out.string()));
  if (code != 0) return {false, fmt::format("diversity command exited {}", code)};
  const auto j = nlohmann::json::parse(slurp(out / "diversity.json"));
  const int base = j.at("coverage_baseline").get<int>();
  const int tde = j.at("coverage_tde").get<int>();
  const bool full = tde == 16;
  const bool pass = tde > base && base == kGoldenCoverageBaseline && tde == kGoldenCoverageTde;
  return {pass, fmt::format("coverage baseline {}/16, tde {}/16 (golden {}/{}; full recovery {})",
                            base, tde, kGoldenCoverageBaseline, kGoldenCoverageTde,
                            full ? "reached" : "not reached at the reference run")};
}

Outcome gating_arithmetic() {
  std::vector<double> bar{0.5, 0.5};
  const std::vector<double> alpha =
      attention_gate_update(Tensor(Shape{2, 2}, {0.4, 0.8, 0.6, 0.2}), bar);
  bool pass = alpha == std::vector<double>{0.55, 0.45};

  const double c = 0.9;
  std::vector<double> g{0.1};
  double dist = std::abs(g[0] - c);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    attention_gate_update(Tensor(Shape{1, 3}, c), g);
    const double next = std::abs(g[0] - c);
    worst = std::max(worst, std::abs(next - dist / 2.0));
    dist = next;
  }
  pass = pass && worst <= 1e-15;
  return {pass, fmt::format("alpha = ({}, {}); 10 calls halve the distance, max deviation {:.1e}",
                            alpha[0], alpha[1], worst)};
}

Outcome gradient_check() {
  double worst = 0.0;
  for (std::uint64_t seed = 42; seed < 47; ++seed) {
    GradcheckOptions o;
    o.seed = seed;
    worst = std::max(worst, gradcheck_network(o).max_relative_error);
  }
  return {worst < 1e-4, fmt::format("max relative error {:.3e} over seeds 42..46, tol 1e-4", worst)};
}

Outcome toy_training() {
  const LossCurves l = train_toy(ToyTrainConfig{});
  const std::vector<double> base = moving_average(l.baseline, kLossSmoothingWindow);
  const std::vector<double> tde = moving_average(l.tde, kLossSmoothingWindow);
  const bool pass = base.back() < base.front() && tde.back() < tde.front() &&
                    tde.back() <= base.back() && l.tde.back() <= l.baseline.back();
  return {pass, fmt::format("200 steps, seed 42: smoothed baseline {:.5f} -> {:.5f}, tde {:.5f} -> "
                            "{:.5f}; final raw baseline {:.5f}, tde {:.5f}",
                            base.front(), base.back(), tde.front(), tde.back(), l.baseline.back(),
                            l.tde.back())};
}

Outcome simulate_determinism() {
  const fs::path a = scratch_dir() / "sim_a", b = scratch_dir() / "sim_b";
  for (const fs::path& dir : {a, b}) {
    const int code = run_tool(fmt::format("simulate --out '{}'", dir.string()));
    if (code != 0) return {false, fmt::format("simulate exited {}", code)};
  }
  bool pass = true;
  for (const std::string& f : kSimulateOutputs) pass = pass && slurp(a / f) == slurp(b / f);
  return {pass, "raster.csv, histogram.json, ledger.json, alpha.csv byte-identical over two runs"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"energy formula", energy_formula},
      {"spike-driven attention zero MUL", sda_zero_mul},
      {"float attention energy", tcsa_energy},
      {"LIF hand trace", lif_trace},
      {"baseline equivalence", baseline_equivalence},
      {"pattern recovery", pattern_recovery},
      {"gating arithmetic", gating_arithmetic},
      {"gradient check", gradient_check},
      {"toy training", toy_training},
      {"simulate determinism", simulate_determinism},
  };
  fs::create_directories(scratch_dir());
  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(scratch_dir());
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
