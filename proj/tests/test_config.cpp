#include <gtest/gtest.h>

#include <fstream>

#include "depman/config.hpp"
#include "depman/errors.hpp"

using namespace depman;
using nlohmann::json;

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig d;
  const ExperimentConfig back = config_from_json(config_to_json(d));
  EXPECT_EQ(config_hash(back), config_hash(d));
  EXPECT_EQ(config_to_json(back), config_to_json(d));
  EXPECT_EQ(config_hash(d).size(), 16u);
}

TEST(Config, ShippedDefaultMatchesBuiltIn) {
  const ExperimentConfig f = load_config(std::string(DEPMAN_SOURCE_DIR) + "/configs/default.json");
  EXPECT_EQ(config_hash(f), config_hash(ExperimentConfig{}));
}

TEST(Config, PartialOverride) {
  const json j = {{"shape", "T"}, {"sim", {{"seed", 7}, {"gains", {{"k_v", 20.0}}}}}, {"circle", {{"direction", -1}}}};
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.shape, "T");
  EXPECT_EQ(c.sim.seed, 7u);
  EXPECT_EQ(c.sim.gains.k_v, 20.0);
  EXPECT_EQ(c.sim.gains.k_omega, ControlGains{}.k_omega);
  EXPECT_EQ(c.circle.direction, -1);
  EXPECT_NE(config_hash(c), config_hash(ExperimentConfig{}));
}

TEST(Config, Rejections) {
  auto bad = [](const json& j) { EXPECT_THROW(config_from_json(j), ConfigError) << j.dump(); };
  bad(json::array());
  bad({{"nope", 1}});
  bad({{"sim", {{"gains", {{"kv", 1.0}}}}}});
  bad({{"sim", {{"substeps", 2.5}}}});
  bad({{"sim", "fast"}});
  bad({{"shape", "CIRCLE"}});
  bad({{"elements_per_cell", 0}});
  bad({{"electrodes", {{"layout", "mesh"}}}});
  bad({{"sim", {{"schedule", {{"alpha", 1.5}}}}}});
  bad({{"feasibility", {{"step_deg", 7}}}});
  bad({{"circle", {{"direction", 0}}}});
  bad({{"edges", {{"k", 4}}}});
  bad({{"perf", {{"electrode_counts", {4}}}}});
  try {
    config_from_json({{"sim", {{"gains", {{"kv", 1.0}}}}}});
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("sim.gains.kv"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_config("/nonexistent/depman.json"), ConfigError);
}

TEST(Config, MalformedFile) {
  const std::string path = testing::TempDir() + "depman_bad.json";
  std::ofstream(path) << "{\"shape\": ";
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(Config, Builders) {
  ExperimentConfig c;
  c.elements_per_cell = 8;
  EXPECT_EQ(make_object(c).elements.size(), 8u * builtin_shape("SZ").cells.size());
  c.electrodes.layout = "ring";
  const ElectrodeBasis ring = make_basis(c);
  EXPECT_EQ(ring.n_electrodes(), 4);
  EXPECT_EQ(ring.nodes.size(), 12u);
  c.electrodes.layout = "pads";
  c.electrodes.pads.n_electrodes = 6;
  EXPECT_EQ(make_basis(c).n_electrodes(), 6);
}
