#include <gtest/gtest.h>

#include <cstdlib>
#include <string>

#include "config.hpp"

using namespace tde;
using namespace tde::cli;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

class SeedEnv {
 public:
  explicit SeedEnv(const char* value) {
    if (const char* old = std::getenv("TDE_SNN_SEED")) old_ = old;
    if (value) setenv("TDE_SNN_SEED", value, 1);
    else unsetenv("TDE_SNN_SEED");
  }
  ~SeedEnv() {
    if (old_) setenv("TDE_SNN_SEED", old_->c_str(), 1);
    else unsetenv("TDE_SNN_SEED");
  }

 private:
  std::optional<std::string> old_;
};

}  // namespace

TEST(Config, MinimalDocumentGivesDefaults) {
  const RunConfig c = parse_config(R"({"schema": 1})");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.steps, 4u);
  EXPECT_EQ(c.variant, AttentionVariant::Sda);
  EXPECT_TRUE(c.gating);
  EXPECT_EQ(c.rounds, 1u);
  EXPECT_EQ(c.layer, 0u);
  EXPECT_EQ(c.lif.v_th, 1.0);
  EXPECT_EQ(c.lif.beta, 0.5);
  EXPECT_EQ(c.output_dir, "out");
}

TEST(Config, FullDocumentIsApplied) {
  const RunConfig c = parse_config(R"({
    "schema": 1, "seed": 7, "T": 6, "mode": "relaxed", "output_dir": "x", "layer": 1,
    "input": {"height": 8, "width": 12, "batch": 2, "events": "e.csv", "format": "bin",
              "window": [3, 9]},
    "neuron": {"v_th": 0.8, "beta": 0.25, "surrogate_alpha": 4},
    "encoder": {"channels": 4, "kernel": 5, "per_step_weights": false, "alpha_init": 0.3},
    "attention": {"variant": "tcsa", "k_percent": 25, "spatial_kernel": 3, "sda_bias": 1.0},
    "gating": {"enabled": false, "rounds": 0},
    "train": {"steps": 3, "batch": 2, "image": 8, "train_size": 4, "eval_size": 2,
              "learning_rate": 0.01}
  })");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.steps, 6u);
  EXPECT_EQ(c.mode, ad::SpikeMode::Relaxed);
  EXPECT_EQ(c.input.width, 12u);
  EXPECT_TRUE(c.input.events_binary);
  ASSERT_TRUE(c.input.window);
  EXPECT_EQ(c.input.window->end, 9u);
  EXPECT_EQ(c.lif.beta, 0.25);
  EXPECT_EQ(c.encoder.kernel, 5u);
  EXPECT_FALSE(c.encoder.independent_step_weights);
  EXPECT_EQ(c.variant, AttentionVariant::Tcsa);
  EXPECT_EQ(c.attention.spatial_kernel, 3u);
  EXPECT_FALSE(c.gating);
  EXPECT_EQ(c.train.steps, 3u);
  EXPECT_EQ(c.train.seed, 7u);
  EXPECT_EQ(c.train.time_steps, 6u);
  EXPECT_EQ(c.train.mode, ad::SpikeMode::Relaxed);

  const TdeOptions o = c.tde_options();
  EXPECT_EQ(o.encoder.steps, 6u);
  EXPECT_EQ(o.attention.lif1.v_th, 0.8);
}

TEST(Config, SchemaIsRequiredAndVersioned) {
  EXPECT_NE(error_of("{}").find("config field 'schema'"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema": 2})").find("unsupported version 2"), std::string::npos);
}

TEST(Config, DiagnosticsNameTheOffendingField) {
  EXPECT_NE(error_of(R"({"schema":1,"neuron":{"v_th":-1}})").find("'neuron.v_th'"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"encoder":{"kernel":4}})").find("'encoder.kernel'"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"input":{"colour":1}})").find("'input.colour': unknown field"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"T":17})").find("'T'"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"attention":{"variant":"soft"}})").find("'attention.variant'"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"input":{"window":[5,5]}})").find("'input.window'"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"train":{"image":10}})").find("'train.image'"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"mode":"soft"})").find("'mode'"), std::string::npos);
}

TEST(Config, SyntaxErrorsReportTheLine) {
  EXPECT_NE(error_of("{\n\"schema\": 1,\n\"seed\": ,\n}").find("config line 3"), std::string::npos);
}

TEST(Config, MissingFileIsAnInputError) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), InputError);
}

TEST(Config, EnvironmentSeedOverridesConfig) {
  {
    SeedEnv env("123");
    EXPECT_EQ(resolve_config(std::nullopt).seed, 123u);
    EXPECT_EQ(resolve_config(std::nullopt).train.seed, 123u);
  }
  {
    SeedEnv env(nullptr);
    EXPECT_EQ(resolve_config(std::nullopt).seed, 42u);
    EXPECT_FALSE(seed_override());
  }
  {
    SeedEnv env("12x");
    EXPECT_THROW(seed_override(), InputError);
  }
}
