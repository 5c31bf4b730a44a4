#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fstream>
#include <limits>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "tde/diversity.hpp"
#include "tde/energy.hpp"
#include "tde/gradcheck.hpp"
#include "tde/synthetic.hpp"

namespace tde::cli {

namespace {

constexpr std::uint64_t kDefaultSeed = 42;
constexpr double kGradcheckTolerance = 1e-4;

std::vector<std::uint64_t> parse_list(const std::string& text, std::string_view what,
                                      std::size_t expected) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::uint64_t v = 0;
    const char* first = text.data() + pos;
    const char* last = text.data() + comma;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (first == last || ec != std::errc{} || ptr != last)
      throw InputError(fmt::format("{} '{}' must be {} comma-separated non-negative integers", what,
                                   text, expected));
    out.push_back(v);
    pos = comma + 1;
  }
  if (out.size() != expected)
    throw InputError(fmt::format("{} '{}' must have exactly {} values", what, text, expected));
  return out;
}

std::uint64_t seed_or_default(std::optional<std::uint64_t> explicit_seed) {
  if (explicit_seed) return *explicit_seed;
  return seed_override().value_or(kDefaultSeed);
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text << '\n';
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error(fmt::format("cannot create directory '{}': {}", dir.string(),
                                         ec.message()));
}

std::vector<Event> load_event_file(const std::filesystem::path& path, bool binary) {
  if (!std::filesystem::exists(path))
    throw InputError(fmt::format("event file '{}' does not exist", path.string()));
  try {
    return load_events(path, binary);
  } catch (const EventFormatError& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

TimeWindow full_window(std::span<const Event> events) {
  if (events.empty()) return TimeWindow{0, 1};
  const auto [lo, hi] = std::minmax_element(events.begin(), events.end(),
                                            [](const Event& a, const Event& b) { return a.t < b.t; });
  return TimeWindow{lo->t, hi->t + 1};
}

Tensor accumulate_checked(std::span<const Event> events, std::size_t h, std::size_t w,
                          TimeWindow window) {
  try {
    return accumulate_events(events, h, w, window);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  } catch (const std::out_of_range& e) {
    throw InputError(e.what());
  }
}

std::vector<Tensor> make_batch(const RunConfig& c) {
  const InputConfig& in = c.input;
  if (in.events) {
    const std::vector<Event> events = load_event_file(*in.events, in.events_binary);
    return {accumulate_checked(events, in.height, in.width, in.window.value_or(full_window(events)))};
  }
  std::vector<Tensor> batch;
  for (BoxSample& s : make_box_dataset(c.seed, "input", in.batch, in.height, in.width))
    batch.push_back(std::move(s.image));
  return batch;
}

void check_layer(std::size_t layer) {
  if (layer > 1)
    throw InputError(fmt::format("layer {} is out of range (0: encoder LIF, 1: block output)", layer));
}

const std::vector<Tensor>& layer_spikes(const TdeOutput& out, std::size_t layer) {
  return layer == 0 ? out.diagnostics.encoder_spikes : out.spikes;
}

// Gated warm-up batches followed by the measured (ungated) pass. Appends the
// coefficients in force for every pass to `alpha_rows`.
TdeOutput run_tde(std::span<const Tensor> batch, TdeModel& model, const RunConfig& c,
                  std::vector<std::vector<double>>& alpha_rows) {
  for (std::size_t r = 0; r < c.rounds; ++r) {
    alpha_rows.push_back(model.encoder.alpha);
    tde_forward(batch, model, c.gating);
  }
  alpha_rows.push_back(model.encoder.alpha);
  return tde_forward(batch, model, false);
}

std::string alpha_csv(const std::vector<std::vector<double>>& rows) {
  std::string s = "round,t,alpha\n";
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t t = 0; t < rows[r].size(); ++t)
      s += fmt::format("{},{},{}\n", r, t + 1, rows[r][t]);
  return s;
}

TdeModel build_model(const RunConfig& c) {
  try {
    return make_tde_model(c.tde_options(), c.seed);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

}  // namespace

int cmd_simulate(const SimulateArgs& args, std::ostream& log) {
  const RunConfig c = resolve_config(args.config);
  check_layer(c.layer);
  const std::filesystem::path dir = args.out_dir.value_or(c.output_dir);
  const std::vector<Tensor> batch = make_batch(c);
  TdeModel model = build_model(c);

  std::vector<std::vector<double>> alpha_rows;
  TdeOutput out;
  if (args.baseline) {
    alpha_rows.push_back(model.encoder.alpha);
    out = baseline_forward(batch, model);
  } else {
    out = run_tde(batch, model, c, alpha_rows);
  }
  const std::vector<Tensor>& spikes = layer_spikes(out, c.layer);
  const PatternHistogram hist = pattern_histogram(spikes);

  make_dir(dir);
  raster_export(spikes.front(), dir / "raster.csv");
  write_text(dir / "histogram.json", histogram_to_json(hist));
  write_text(dir / "ledger.json", ledger_to_json(out.diagnostics.ledger));
  {
    std::ofstream f = open_output(dir / "alpha.csv");
    f << alpha_csv(alpha_rows);
  }
  fmt::print(log, "{} pipeline, T={}, batch={}, layer {}: coverage {}/{}, wrote {}\n",
             args.baseline ? "baseline" : fmt::format("tde ({})", to_string(c.variant)), c.steps,
             batch.size(), c.layer, coverage(hist), hist.counts.size(), dir.string());
  return kExitOk;
}

int cmd_energy(const EnergyArgs& args, std::ostream& out) {
  AttentionVariant variant{};
  try {
    variant = parse_variant(args.variant);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (!args.compare && variant == AttentionVariant::None)
    throw InputError("--variant must be tcsa or sda");
  if (args.reference_shape && args.shape)
    throw InputError("--paper-shape and --shape are mutually exclusive");

  AttentionShape shape = kReferenceAttentionShape;
  if (args.shape) {
    const std::vector<std::uint64_t> v = parse_list(*args.shape, "--shape", 4);
    for (std::size_t i = 0; i < 4; ++i) {
      if (v[i] == 0) throw InputError(fmt::format("--shape '{}' has a zero extent", *args.shape));
      shape[i] = v[i];
    }
  }
  const std::uint64_t seed = seed_or_default(args.seed);

  const EnergyLedger tcsa = profile_attention(AttentionVariant::Tcsa, shape, seed);
  std::vector<EnergyReport> reports;
  auto add = [&](AttentionVariant v) {
    const EnergyLedger l = v == AttentionVariant::Tcsa ? tcsa : profile_attention(v, shape, seed);
    reports.push_back(make_report(v, shape, l, compare(tcsa, l).ratio));
  };
  if (args.compare) {
    add(AttentionVariant::Tcsa);
    add(AttentionVariant::Sda);
  } else {
    add(variant);
  }

  if (args.csv) {
    out << csv_header() << '\n';
    for (const EnergyReport& r : reports) out << to_csv_row(r) << '\n';
  } else if (args.compare) {
    out << to_json(std::span<const EnergyReport>(reports)) << '\n';
  } else {
    out << to_json(reports.front()) << '\n';
  }
  return kExitOk;
}

int cmd_diversity(const DiversityArgs& args, std::ostream& log) {
  const RunConfig c = resolve_config(args.config);
  const std::size_t layer = args.layer.value_or(c.layer);
  check_layer(layer);
  const std::filesystem::path dir = args.out_dir.value_or(c.output_dir);
  const std::vector<Tensor> batch = make_batch(c);
  TdeModel model = build_model(c);

  const TdeOutput base = baseline_forward(batch, model);
  std::vector<std::vector<double>> alpha_rows;
  const TdeOutput tde = run_tde(batch, model, c, alpha_rows);
  const PatternHistogram hb = pattern_histogram(layer_spikes(base, layer));
  const PatternHistogram ht = pattern_histogram(layer_spikes(tde, layer));

  nlohmann::ordered_json summary;
  summary["T"] = c.steps;
  summary["layer"] = layer;
  summary["seed"] = c.seed;
  summary["gating_rounds"] = c.rounds;
  summary["coverage_baseline"] = coverage(hb);
  summary["coverage_tde"] = coverage(ht);
  summary["entropy_baseline"] = pattern_entropy(hb);
  summary["entropy_tde"] = pattern_entropy(ht);

  make_dir(dir);
  write_text(dir / "histogram_baseline.json", histogram_to_json(hb));
  write_text(dir / "histogram_tde.json", histogram_to_json(ht));
  write_text(dir / "diversity.json", summary.dump(2));
  fmt::print(log, "coverage baseline {}/{} tde {}/{}\n", coverage(hb), hb.counts.size(),
             coverage(ht), ht.counts.size());
  return kExitOk;
}

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& log) {
  if (args.mode == "spiking")
    throw InputError(
        "gradcheck refuses --mode spiking: the hard threshold is discontinuous, so finite "
        "differences do not estimate the straight-through surrogate gradient; use --mode relaxed");
  if (args.mode != "relaxed")
    throw InputError(fmt::format("--mode '{}' is not relaxed or spiking", args.mode));
  if (!(args.h > 0.0)) throw InputError(fmt::format("--h {} must be > 0", args.h));
  if (args.seeds == 0) throw InputError("--seeds must be >= 1");

  const std::uint64_t base = seed_or_default(args.seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < args.seeds; ++i) {
    GradcheckOptions o;
    o.seed = base + i;
    o.h = args.h;
    const GradcheckReport r = gradcheck_network(o);
    const auto it = std::max_element(
        r.parameters.begin(), r.parameters.end(),
        [](const ParameterError& a, const ParameterError& b) { return a.relative_error < b.relative_error; });
    fmt::print(log, "seed {}: max relative error {:.3e} ({})\n", o.seed, r.max_relative_error,
               it->name);
    worst = std::max(worst, r.max_relative_error);
  }
  const bool ok = worst < kGradcheckTolerance;
  fmt::print(log, "max relative error {:.3e} (h = {:g}, tolerance {:g}): {}\n", worst, args.h,
             kGradcheckTolerance, ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitFailure;
}

int cmd_train_toy(const TrainToyArgs& args, std::ostream& log) {
  RunConfig c = resolve_config(args.config);
  if (args.steps) c.train.steps = *args.steps;
  const std::filesystem::path dir = args.out_dir.value_or(c.output_dir);
  const LossCurves curves = train_toy(c.train);
  const std::vector<double> sb = moving_average(curves.baseline, kLossSmoothingWindow);
  const std::vector<double> st = moving_average(curves.tde, kLossSmoothingWindow);

  make_dir(dir);
  {
    std::ofstream f = open_output(dir / "loss.csv");
    f << "step,baseline,tde,baseline_smoothed,tde_smoothed\n";
    for (std::size_t i = 0; i < curves.baseline.size(); ++i)
      f << fmt::format("{},{},{},{},{}\n", i, curves.baseline[i], curves.tde[i], sb[i], st[i]);
  }
  fmt::print(log, "{} steps: baseline loss {:.6f} -> {:.6f}, tde loss {:.6f} -> {:.6f}\n",
             c.train.steps, curves.baseline.front(), curves.baseline.back(), curves.tde.front(),
             curves.tde.back());
  return kExitOk;
}

int cmd_events_to_frame(const EventsToFrameArgs& args, std::ostream& out) {
  if (args.format != "csv" && args.format != "bin")
    throw InputError(fmt::format("--format '{}' is not csv or bin", args.format));
  const std::vector<Event> events = load_event_file(args.input, args.format == "bin");

  std::size_t h = 1, w = 1;
  if (args.size) {
    const std::vector<std::uint64_t> v = parse_list(*args.size, "--size", 2);
    if (v[0] == 0 || v[1] == 0) throw InputError(fmt::format("--size '{}' has a zero extent", *args.size));
    h = v[0];
    w = v[1];
  } else {
    for (const Event& e : events) {
      h = std::max<std::size_t>(h, std::size_t{e.y} + 1);
      w = std::max<std::size_t>(w, std::size_t{e.x} + 1);
    }
  }
  TimeWindow window = full_window(events);
  if (args.window) {
    const std::vector<std::uint64_t> v = parse_list(*args.window, "--window", 2);
    if (v[1] <= v[0]) throw InputError(fmt::format("--window '{}' is empty", *args.window));
    window = TimeWindow{v[0], v[1]};
  }
  const Tensor frame = accumulate_checked(events, h, w, window);

  std::string text;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (x > 0) text += ',';
      text += fmt::format("{}", static_cast<long long>(frame[y * w + x]));
    }
    text += '\n';
  }
  if (args.out) {
    std::ofstream f = open_output(*args.out);
    f << text;
  } else {
    out << text;
  }
  return kExitOk;
}

}  // namespace tde::cli
