#include "depman/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "depman/errors.hpp"

namespace depman {

using nlohmann::json;

namespace {

// One field list per struct, shared by the reader and the writer.
template <class V> void fields(V& v, MaterialProperties& m) {
  v("eps_m", m.eps_m); v("eps_o", m.eps_o); v("sigma_m", m.sigma_m); v("sigma_o", m.sigma_o);
  v("rho_m", m.rho_m); v("rho_o", m.rho_o); v("mu", m.mu); v("frequency", m.frequency);
}
template <class V> void fields(V& v, PadArrayGeometry& g) {
  v("n_electrodes", g.n_electrodes); v("tip_radius", g.tip_radius); v("outer_radius", g.outer_radius);
  v("gap", g.gap); v("panel", g.panel); v("fine_radius", g.fine_radius); v("first_angle", g.first_angle);
}
template <class V> void fields(V& v, RingArrayGeometry& g) {
  v("n_electrodes", g.n_electrodes); v("ring_radius", g.ring_radius);
  v("sources_per_electrode", g.sources_per_electrode); v("source_spacing", g.source_spacing);
  v("probe_offset", g.probe_offset); v("first_angle", g.first_angle);
}
template <class V> void fields(V& v, ElectrodeConfig& e) {
  v("layout", e.layout); v("pads", e.pads); v("ring", e.ring);
}
template <class V> void fields(V& v, NoiseConfig& n) {
  v("enabled", n.enabled); v("sigma_xy", n.sigma_xy); v("sigma_phi", n.sigma_phi);
}
template <class V> void fields(V& v, ControlGains& g) {
  v("k_v", g.k_v); v("k_omega", g.k_omega); v("v_max", g.v_max); v("w_max", g.w_max);
}
template <class V> void fields(V& v, AnnealSchedule& s) {
  v("T0", s.T0); v("alpha", s.alpha); v("max_evals", s.max_evals); v("moves_per_temp", s.moves_per_temp);
  v("seed", s.seed); v("phase_step_deg", s.phase_step_deg); v("sigma_start_deg", s.sigma_start_deg);
  v("sigma_end_deg", s.sigma_end_deg); v("calibration_proposals", s.calibration_proposals);
  v("calibration_acceptance", s.calibration_acceptance); v("restarts", s.restarts);
  v("reheat_levels", s.reheat_levels);
}
template <class V> void fields(V& v, ErrorTolerances& t) {
  v("torque_min", t.torque_min); v("torque_scale", t.torque_scale);
  v("force_min", t.force_min); v("force_scale", t.force_scale);
}
template <class V> void fields(V& v, SimConfig& s) {
  v("control_dt", s.control_dt); v("substeps", s.substeps); v("z_assumed", s.z_assumed);
  v("z_floor", s.z_floor); v("warmup_s", s.warmup_s); v("drag_multiplier", s.drag_multiplier);
  v("vision_bypass", s.vision_bypass); v("inverter_enabled", s.inverter_enabled); v("noise", s.noise);
  v("gains", s.gains); v("schedule", s.schedule); v("tolerances", s.tolerances); v("seed", s.seed);
  v("switch_position", s.switch_position); v("switch_yaw", s.switch_yaw); v("timeout_s", s.timeout_s);
}
template <class V> void fields(V& v, FrameGeometry& f) {
  v("width", f.width); v("height", f.height); v("pitch", f.pitch); v("crop", f.crop);
}
template <class V> void fields(V& v, RenderConfig& r) {
  v("background", r.background); v("edge_intensity", r.edge_intensity);
  v("edge_sigma_px", r.edge_sigma_px); v("gradient", r.gradient); v("noise_sigma", r.noise_sigma);
}
template <class V> void fields(V& v, EdgeParams& e) {
  v("k", e.k); v("c", e.c); v("min_blob", e.min_blob); v("area_min", e.area_min); v("area_max", e.area_max);
}
template <class V> void fields(V& v, WaypointSpec& w) { v("count", w.count); v("radius", w.radius); v("dwell", w.dwell); }
template <class V> void fields(V& v, CircleSpec& c) {
  v("radius", c.radius); v("points", c.points); v("speed", c.speed); v("direction", c.direction);
}
template <class V> void fields(V& v, GridSpec& g) {
  v("spacing", g.spacing); v("radius", g.radius); v("orientations", g.orientations);
}
template <class V> void fields(V& v, FeasibilitySpec& f) {
  v("step_deg", f.step_deg); v("band_pct", f.band_pct); v("random_samples", f.random_samples);
}
template <class V> void fields(V& v, PerfSpec& p) {
  v("electrode_counts", p.electrode_counts); v("assembly_repeats", p.assembly_repeats);
  v("solve_calls", p.solve_calls); v("frames", p.frames);
}
template <class V> void fields(V& v, ExperimentConfig& c) {
  v("material", c.material); v("shape", c.shape); v("elements_per_cell", c.elements_per_cell);
  v("electrodes", c.electrodes); v("sim", c.sim); v("frame", c.frame); v("render", c.render);
  v("edges", c.edges); v("manipulation_radius", c.manipulation_radius); v("waypoints", c.waypoints);
  v("circle", c.circle); v("grid", c.grid); v("feasibility", c.feasibility); v("perf", c.perf);
}

template <class T> concept Leaf = std::is_arithmetic_v<T> || std::is_same_v<T, std::string> ||
                                  std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<double>>;

struct Reader {
  const json& j;
  std::string path;
  std::set<std::string> seen;

  template <class T> void operator()(const char* key, T& out) {
    seen.insert(key);
    if (!j.contains(key)) return;
    const json& sub = j.at(key);
    const std::string where = path.empty() ? key : path + "." + key;
    if constexpr (Leaf<T>) {
      try {
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
          if (!sub.is_number_integer()) throw ConfigError(where + ": expected an integer");
        }
        out = sub.get<T>();
      } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
      }
    } else {
      if (!sub.is_object()) throw ConfigError(where + ": expected an object");
      Reader r{sub, where, {}};
      fields(r, out);
      r.finish();
    }
  }

  void finish() const {
    for (const auto& [k, _] : j.items())
      if (!seen.count(k)) throw ConfigError((path.empty() ? "" : path + ".") + k + ": unknown key");
  }
};

struct Writer {
  json& j;
  template <class T> void operator()(const char* key, T& v) {
    if constexpr (Leaf<T>) {
      j[key] = v;
    } else {
      json sub = json::object();
      Writer w{sub};
      fields(w, v);
      j[key] = std::move(sub);
    }
  }
};

}  // namespace

void ExperimentConfig::validate() const {
  material.validate();
  if (elements_per_cell < 1) throw ConfigError("elements_per_cell must be >= 1");
  if (electrodes.layout != "pads" && electrodes.layout != "ring")
    throw ConfigError("electrodes.layout must be \"pads\" or \"ring\"");
  sim.validate();
  frame.validate();
  if (edges.k < 1 || edges.k % 2 == 0) throw ConfigError("edges.k must be odd and positive");
  if (edges.min_blob < 1) throw ConfigError("edges.min_blob must be >= 1");
  if (!(edges.area_min >= 0 && edges.area_max > edges.area_min))
    throw ConfigError("edges.area_min/area_max must satisfy 0 <= min < max");
  if (!(manipulation_radius > 0)) throw ConfigError("manipulation_radius must be > 0");
  if (waypoints.count < 0 || !(waypoints.radius >= 0) || waypoints.dwell < 0)
    throw ConfigError("waypoints: count, radius, dwell must be >= 0");
  if (circle.radius < 0 || circle.points < 1 || !(circle.speed > 0) || (circle.direction != 1 && circle.direction != -1))
    throw ConfigError("circle: radius >= 0, points >= 1, speed > 0, direction +-1");
  if (!(grid.spacing > 0) || grid.radius < 0 || grid.orientations.empty())
    throw ConfigError("grid: spacing > 0, radius >= 0, at least one orientation");
  if (feasibility.step_deg < 1 || 360 % feasibility.step_deg != 0 || feasibility.band_pct < 0 ||
      feasibility.random_samples < 0)
    throw ConfigError("feasibility: step must divide 360, band >= 0, samples >= 0");
  if (perf.electrode_counts.size() < 2 || perf.assembly_repeats < 1 || perf.solve_calls < 1 || perf.frames < 1)
    throw ConfigError("perf: at least two electrode counts and positive repeat counts");
  for (int n : perf.electrode_counts)
    if (n < 2) throw ConfigError("perf: electrode counts must be >= 2");
  builtin_shape(shape);  // throws for unknown names
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  ExperimentConfig cfg;
  Reader r{j, "", {}};
  fields(r, cfg);
  r.finish();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j = json::object();
  ExperimentConfig copy = cfg;
  Writer w{j};
  fields(w, copy);
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ObjectModel make_object(const ExperimentConfig& cfg) {
  try {
    return build_object(builtin_shape(cfg.shape), cfg.elements_per_cell, cfg.material);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ElectrodeBasis make_basis(const ExperimentConfig& cfg) {
  return cfg.electrodes.layout == "ring" ? ring_array(cfg.electrodes.ring) : pad_array(cfg.electrodes.pads);
}

}  // namespace depman
