#include "depman/logio.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace depman {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json pose_json(const Pose& p) {
  return {{"x", p.r.x()}, {"y", p.r.y()}, {"z", p.r.z()}, {"yaw", p.yaw()}};
}

json wrench_json(const Wrench& w) { return {{"F", vec(w.F)}, {"T", vec(w.T)}}; }
Wrench wrench_from(const json& j) { return {vec(j.at("F")), vec(j.at("T"))}; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

}  // namespace

json tick_to_json(const TickRecord& r) {
  return {
      {"type", "tick"},
      {"tick", r.tick},
      {"t", r.time},
      {"warmup", r.warmup},
      {"true", pose_json(r.true_pose)},
      {"measured",
       {{"x", r.measured.x}, {"y", r.measured.y}, {"phi", r.measured.phi}, {"valid", r.measured.valid},
        {"stale", r.measured.stale}, {"blob_area", r.measured.blob_area}}},
      {"target", {{"index", r.target_index}, {"x", r.target.r_ref.x()}, {"y", r.target.r_ref.y()},
                  {"z", r.target.r_ref.z()}, {"phi", r.target.phi_ref}}},
      {"phases", r.phases.phase_deg},
      {"amplitude", r.phases.amplitude},
      {"reference", wrench_json(r.reference)},
      {"achieved", wrench_json(r.achieved)},
      {"error", {{"e1", r.error.e1}, {"e2", r.error.e2}, {"e3", r.error.e3}, {"e4", r.error.e4}, {"cost", r.error.cost}}},
      {"evals", r.evals},
      {"solve_ms", r.solve_ms},
      {"assembly_ms", r.assembly_ms},
      {"vision_ms", r.vision_ms},
  };
}

TickRecord tick_from_json(const json& j) {
  TickRecord r;
  r.tick = j.at("tick").get<long>();
  r.time = j.at("t").get<double>();
  r.warmup = j.at("warmup").get<bool>();
  const json& tp = j.at("true");
  r.true_pose = Pose::planar(tp.at("x"), tp.at("y"), tp.at("z"), tp.at("yaw"));
  const json& m = j.at("measured");
  r.measured.x = m.at("x");
  r.measured.y = m.at("y");
  r.measured.phi = m.at("phi");
  r.measured.valid = m.at("valid");
  r.measured.stale = m.value("stale", false);
  r.measured.blob_area = m.value("blob_area", 0);
  const json& t = j.at("target");
  r.target_index = t.at("index");
  r.target.r_ref = Vec3(t.at("x"), t.at("y"), t.at("z"));
  r.target.phi_ref = t.at("phi");
  r.phases = PhasorVector(j.at("phases").get<std::vector<int>>(), j.value("amplitude", 38.0));
  r.reference = wrench_from(j.at("reference"));
  r.achieved = wrench_from(j.at("achieved"));
  const json& e = j.at("error");
  r.error = {e.at("e1"), e.at("e2"), e.at("e3"), e.at("e4"), e.at("cost")};
  r.evals = j.value("evals", 0);
  r.solve_ms = j.value("solve_ms", 0.0);
  r.assembly_ms = j.value("assembly_ms", 0.0);
  r.vision_ms = j.value("vision_ms", 0.0);
  return r;
}

void write_jsonl(std::ostream& out, const EpisodeLog& log) {
  out << json{{"type", "episode"}, {"schema", kLogSchema}, {"ticks", log.ticks.size()},
              {"warmup_ticks", log.warmup_ticks}}.dump()
      << '\n';
  for (const auto& r : log.ticks) out << tick_to_json(r).dump() << '\n';
  json targets = json::array();
  for (const auto& t : log.targets)
    targets.push_back({{"index", t.index}, {"x", t.target.r_ref.x()}, {"y", t.target.r_ref.y()},
                       {"z", t.target.r_ref.z()}, {"phi", t.target.phi_ref}, {"issued_at", t.issued_at},
                       {"settled_at", t.settled_at}, {"finished_at", t.finished_at}, {"timeout", t.timeout}});
  out << json{{"type", "summary"}, {"outcome", log.outcome}, {"targets", targets}}.dump() << '\n';
}

void write_jsonl(const std::string& path, const EpisodeLog& log) {
  auto out = open_out(path);
  write_jsonl(out, log);
}

EpisodeLog read_jsonl(std::istream& in) {
  EpisodeLog log;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "episode") {
        if (j.at("schema").get<int>() != kLogSchema) throw std::runtime_error("unsupported log schema");
        log.warmup_ticks = j.value("warmup_ticks", 0);
      } else if (type == "tick") {
        log.ticks.push_back(tick_from_json(j));
      } else if (type == "summary") {
        log.outcome = j.value("outcome", "ok");
        for (const auto& t : j.at("targets")) {
          TargetOutcome o;
          o.index = t.at("index");
          o.target.r_ref = Vec3(t.at("x"), t.at("y"), t.at("z"));
          o.target.phi_ref = t.at("phi");
          o.issued_at = t.at("issued_at");
          o.settled_at = t.at("settled_at");
          o.finished_at = t.at("finished_at");
          o.timeout = t.at("timeout");
          log.targets.push_back(o);
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("episode log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

EpisodeLog read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_jsonl(in);
}

void write_csv(std::ostream& out, const EpisodeLog& log) {
  out << "tick,t,warmup,x,y,z,yaw,x_meas,y_meas,phi_meas,valid,target,x_ref,y_ref,phi_ref";
  const int n = log.ticks.empty() ? 0 : log.ticks.front().phases.n();
  for (int i = 0; i < n; ++i) out << ",phase" << i;
  out << ",Fx_ref,Fy_ref,Fz_ref,Tx_ref,Ty_ref,Tz_ref,Fx,Fy,Fz,Tx,Ty,Tz,e1,e2,e3,e4,cost,evals,solve_ms\n";
  for (const auto& r : log.ticks) {
    const Pose& p = r.true_pose;
    out << r.tick << ',' << r.time << ',' << r.warmup << ',' << p.r.x() << ',' << p.r.y() << ',' << p.r.z() << ','
        << p.yaw() << ',' << r.measured.x << ',' << r.measured.y << ',' << r.measured.phi << ','
        << r.measured.valid << ',' << r.target_index << ',' << r.target.r_ref.x() << ',' << r.target.r_ref.y()
        << ',' << r.target.phi_ref;
    for (int i = 0; i < n; ++i) out << ',' << (i < r.phases.n() ? r.phases.phase_deg[i] : 0);
    for (const Wrench* w : {&r.reference, &r.achieved})
      for (int a = 0; a < 6; ++a) out << ',' << (a < 3 ? w->F(a) : w->T(a - 3));
    out << ',' << r.error.e1 << ',' << r.error.e2 << ',' << r.error.e3 << ',' << r.error.e4 << ','
        << r.error.cost << ',' << r.evals << ',' << r.solve_ms << '\n';
  }
}

void write_csv(const std::string& path, const EpisodeLog& log) {
  auto out = open_out(path);
  write_csv(out, log);
}

}  // namespace depman
