#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "depman/field.hpp"
#include "depman/materials.hpp"
#include "depman/object.hpp"
#include "depman/simulator.hpp"
#include "depman/vision.hpp"

namespace depman {

struct ElectrodeConfig {
  std::string layout = "pads";  // "pads" or "ring"
  PadArrayGeometry pads;
  RingArrayGeometry ring;
};

struct WaypointSpec {
  int count = 40;
  double radius = 150e-6;
  double dwell = 3.0;
};

struct CircleSpec {
  double radius = 100e-6;
  int points = 64;
  double speed = 20e-6;  // m/s along the path
  int direction = 1;     // +1 counter-clockwise, -1 clockwise
};

struct GridSpec {
  double spacing = 50e-6;
  double radius = 150e-6;
  std::vector<double> orientations{0.0, kPi / 4, kPi / 2};
};

struct FeasibilitySpec {
  int step_deg = 10;
  double band_pct = 20.0;
  int random_samples = 0;  // > 0: random 1-degree samples instead of the grid
};

struct PerfSpec {
  std::vector<int> electrode_counts{2, 4, 8, 16, 32};
  int assembly_repeats = 20;
  int solve_calls = 200;
  int frames = 200;
};

/// Everything an experiment needs, in SI units. Loaded from JSON; unknown keys and
/// out-of-range values raise ConfigError.
struct ExperimentConfig {
  MaterialProperties material;
  std::string shape = "SZ";
  int elements_per_cell = 1;
  ElectrodeConfig electrodes;
  SimConfig sim;
  FrameGeometry frame;
  RenderConfig render;
  EdgeParams edges;
  double manipulation_radius = 150e-6;
  WaypointSpec waypoints;
  CircleSpec circle;
  GridSpec grid;
  FeasibilitySpec feasibility;
  PerfSpec perf;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
/// FNV-1a of the canonical JSON dump, hex.
std::string config_hash(const ExperimentConfig& cfg);

ObjectModel make_object(const ExperimentConfig& cfg);
ElectrodeBasis make_basis(const ExperimentConfig& cfg);

}  // namespace depman
