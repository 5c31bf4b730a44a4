#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tde/diversity.hpp"

namespace tde::cli {

using nlohmann::json;

TdeOptions RunConfig::tde_options() const {
  TdeOptions o;
  o.encoder = encoder;
  o.encoder.steps = steps;
  o.variant = variant;
  o.attention = attention;
  o.attention.lif1 = lif;
  o.lif = lif;
  return o;
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  const std::size_t end = std::min(byte, text.size());
  std::size_t line = 1;
  for (std::size_t i = 0; i < end; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

[[noreturn]] void fail(const std::string& path, std::string_view message) {
  throw InputError(fmt::format("config field '{}': {}", path, message));
}

// Typed access to one JSON object; remembers which keys were read so unknown
// ones can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) { return (seen_.insert(key), j_.at(key)); }

  void size(const std::string& key, std::size_t& out, std::size_t min = 1) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() < min)
      fail(child(key), fmt::format("must be an integer >= {}", min));
    out = v.get<std::size_t>();
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned()) fail(child(key), "must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(child(key), "must be a number");
    out = v.get<double>();
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(child(key), "must be true or false");
    out = v.get<bool>();
  }

  std::optional<std::string> string(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(child(key), "must be a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) fail(child(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_input(Section& root, RunConfig& c) {
  if (!root.has("input")) return;
  Section s(root.raw("input"), "input");
  s.size("height", c.input.height, 4);
  s.size("width", c.input.width, 4);
  s.size("batch", c.input.batch);
  if (auto p = s.string("events")) c.input.events = *p;
  if (auto f = s.string("format")) {
    if (*f == "csv") c.input.events_binary = false;
    else if (*f == "bin") c.input.events_binary = true;
    else fail("input.format", fmt::format("'{}' is not csv or bin", *f));
  }
  if (s.has("window")) {
    const json& w = s.raw("window");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number_unsigned() || !w[1].is_number_unsigned())
      fail("input.window", "must be [begin, end] with non-negative integers");
    TimeWindow tw{w[0].get<std::uint64_t>(), w[1].get<std::uint64_t>()};
    if (tw.end <= tw.begin) fail("input.window", "must be non-empty (begin < end)");
    c.input.window = tw;
  }
  s.finish();
}

void read_neuron(Section& root, RunConfig& c) {
  if (!root.has("neuron")) return;
  Section s(root.raw("neuron"), "neuron");
  s.number("v_th", c.lif.v_th);
  s.number("beta", c.lif.beta);
  s.number("surrogate_alpha", c.lif.surrogate_alpha);
  s.finish();
  if (!(c.lif.v_th > 0.0)) fail("neuron.v_th", "must be > 0");
  if (!(c.lif.beta >= 0.0 && c.lif.beta <= 1.0)) fail("neuron.beta", "must lie in [0, 1]");
  if (!(c.lif.surrogate_alpha > 0.0)) fail("neuron.surrogate_alpha", "must be > 0");
}

void read_encoder(Section& root, RunConfig& c) {
  if (!root.has("encoder")) return;
  Section s(root.raw("encoder"), "encoder");
  s.size("channels", c.encoder.channels);
  s.size("kernel", c.encoder.kernel);
  s.boolean("per_step_weights", c.encoder.independent_step_weights);
  s.number("alpha_init", c.encoder.alpha_init);
  s.finish();
  if (c.encoder.kernel % 2 == 0) fail("encoder.kernel", "must be odd");
  if (!(c.encoder.alpha_init >= 0.0 && c.encoder.alpha_init <= 1.0))
    fail("encoder.alpha_init", "must lie in [0, 1]");
}

void read_attention(Section& root, RunConfig& c) {
  if (!root.has("attention")) return;
  Section s(root.raw("attention"), "attention");
  if (auto v = s.string("variant")) {
    try {
      c.variant = parse_variant(*v);
    } catch (const std::invalid_argument& e) {
      fail("attention.variant", e.what());
    }
  }
  s.number("k_percent", c.attention.k_percent);
  s.size("spatial_kernel", c.attention.spatial_kernel);
  s.number("sda_bias", c.attention.sda_bias);
  s.finish();
  if (!(c.attention.k_percent > 0.0 && c.attention.k_percent <= 100.0))
    fail("attention.k_percent", "must lie in (0, 100]");
  if (c.attention.spatial_kernel % 2 == 0) fail("attention.spatial_kernel", "must be odd");
}

void read_gating(Section& root, RunConfig& c) {
  if (!root.has("gating")) return;
  Section s(root.raw("gating"), "gating");
  s.boolean("enabled", c.gating);
  s.size("rounds", c.rounds, 0);
  s.finish();
}

void read_train(Section& root, RunConfig& c) {
  if (!root.has("train")) return;
  Section s(root.raw("train"), "train");
  s.size("steps", c.train.steps, 0);
  s.size("batch", c.train.batch);
  s.size("image", c.train.image, 8);
  s.size("train_size", c.train.train_size);
  s.size("eval_size", c.train.eval_size);
  s.number("learning_rate", c.train.learning_rate);
  s.finish();
  if (c.train.image % 4 != 0) fail("train.image", "must be a multiple of 4");
  if (!(c.train.learning_rate > 0.0)) fail("train.learning_rate", "must be > 0");
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("config line {}: invalid JSON ({})", line_of(text, e.byte),
                                 e.what()));
  }
  RunConfig c;
  Section root(j, "");
  if (!root.has("schema")) fail("schema", "missing; expected \"schema\": 1");
  if (const json& v = root.raw("schema"); !v.is_number_integer() || v.get<long long>() != kSchemaVersion)
    fail("schema", fmt::format("unsupported version {}; expected {}", v.dump(), kSchemaVersion));
  root.u64("seed", c.seed);
  root.size("T", c.steps);
  if (c.steps > kMaxPatternSteps) fail("T", fmt::format("must be <= {}", kMaxPatternSteps));
  read_input(root, c);
  read_neuron(root, c);
  read_encoder(root, c);
  read_attention(root, c);
  read_gating(root, c);
  if (auto m = root.string("mode")) {
    if (*m == "spiking") c.mode = ad::SpikeMode::Spiking;
    else if (*m == "relaxed") c.mode = ad::SpikeMode::Relaxed;
    else fail("mode", fmt::format("'{}' is not spiking or relaxed", *m));
  }
  if (auto o = root.string("output_dir")) c.output_dir = *o;
  root.size("layer", c.layer, 0);
  read_train(root, c);
  root.finish();

  c.train.seed = c.seed;
  c.train.time_steps = c.steps;
  c.train.lif = c.lif;
  c.train.mode = c.mode;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const InputError& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::optional<std::uint64_t> seed_override() {
  const char* env = std::getenv("TDE_SNN_SEED");
  if (env == nullptr) return std::nullopt;
  const std::string_view s(env);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw InputError(fmt::format("TDE_SNN_SEED='{}' is not an unsigned integer", s));
  return value;
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& path) {
  RunConfig c = path ? load_config(*path) : parse_config(R"({"schema": 1})");
  if (auto s = seed_override()) {
    c.seed = *s;
    c.train.seed = *s;
  }
  return c;
}

}  // namespace tde::cli
