#include "depman/service.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

#include "depman/errors.hpp"
#include "depman/harness.hpp"
#include "depman/logio.hpp"

namespace depman {

using nlohmann::json;

json make_message(const std::string& type, long tick, json payload) {
  return {{"type", type}, {"tick", tick}, {"payload", std::move(payload)}};
}

json snapshot_message(const TickRecord& r, bool include_true_pose, bool paused, const std::string& script) {
  json p = {
      {"schema", kWireSchema},
      {"time", r.time},
      {"warmup", r.warmup},
      {"paused", paused},
      {"measured", {{"x", r.measured.x}, {"y", r.measured.y}, {"phi", r.measured.phi},
                    {"valid", r.measured.valid}, {"stale", r.measured.stale}}},
      {"target", {{"index", r.target_index}, {"x", r.target.r_ref.x()}, {"y", r.target.r_ref.y()},
                  {"phi", r.target.phi_ref}}},
      {"phases", r.phases.phase_deg},
      {"error", {{"e1", r.error.e1}, {"e2", r.error.e2}, {"e3", r.error.e3}, {"e4", r.error.e4},
                 {"cost", r.error.cost}}},
      {"solver", {{"evals", r.evals}, {"solve_ms", r.solve_ms}, {"assembly_ms", r.assembly_ms},
                  {"vision_ms", r.vision_ms}}},
  };
  if (include_true_pose)
    p["true"] = {{"x", r.true_pose.r.x()}, {"y", r.true_pose.r.y()}, {"z", r.true_pose.r.z()},
                 {"phi", r.true_pose.yaw()}};
  if (!script.empty()) p["script"] = script;
  return make_message("snapshot", r.tick, std::move(p));
}

void ClientQueue::push(std::string msg) {
  std::lock_guard lock(mu_);
  if (q_.size() >= capacity_) {
    q_.pop_front();
    ++dropped_;
  }
  q_.push_back(std::move(msg));
}

std::optional<std::string> ClientQueue::pop() {
  std::lock_guard lock(mu_);
  if (q_.empty()) return std::nullopt;
  std::string m = std::move(q_.front());
  q_.pop_front();
  return m;
}

std::size_t ClientQueue::size() const {
  std::lock_guard lock(mu_);
  return q_.size();
}

std::size_t ClientQueue::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::shared_ptr<ClientQueue> Broadcaster::subscribe(Notify notify) {
  auto q = std::make_shared<ClientQueue>(per_client_);
  std::lock_guard lock(mu_);
  subs_.emplace_back(q, std::move(notify));
  return q;
}

void Broadcaster::unsubscribe(const std::shared_ptr<ClientQueue>& q) {
  std::lock_guard lock(mu_);
  std::erase_if(subs_, [&](const auto& s) { return s.first == q; });
}

void Broadcaster::publish(const std::string& msg) {
  std::vector<Notify> wake;
  {
    std::lock_guard lock(mu_);
    for (auto& [q, n] : subs_) {
      q->push(msg);
      if (n) wake.push_back(n);
    }
  }
  for (auto& n : wake) n();
}

std::size_t Broadcaster::clients() const {
  std::lock_guard lock(mu_);
  return subs_.size();
}

ControlLoop::ControlLoop(ExperimentConfig cfg, bool include_true_pose)
    : cfg_(std::move(cfg)), include_true_(include_true_pose) {
  cfg_.validate();
  sim_ = std::make_unique<Simulator>(make_object(cfg_), make_basis(cfg_), cfg_.material, cfg_.sim, cfg_.frame,
                                     cfg_.render, cfg_.edges);
  restart(Pose::planar(0, 0, cfg_.sim.z_assumed, 0));
}

void ControlLoop::restart(const Pose& initial) {
  sim_->reset(initial);
  warmup_left_ = std::lround(cfg_.sim.warmup_s / cfg_.sim.control_dt);
  target_ = TargetPose{};
  target_.r_ref = Vec3(initial.r.x(), initial.r.y(), cfg_.sim.z_assumed);
  target_.phi_ref = initial.yaw();
  script_.reset();
  fault_reported_ = false;
}

void ControlLoop::submit(std::string command_text) {
  std::lock_guard lock(mu_);
  pending_.push_back(std::move(command_text));
}

json ControlLoop::payload_for(const std::string& command, bool accepted, const std::string& reason,
                              const json& id) const {
  json p = {{"command", command}, {"accepted", accepted}};
  if (!reason.empty()) p["reason"] = reason;
  if (!id.is_null()) p["id"] = id;
  return p;
}

json ControlLoop::apply(const std::string& text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::exception& e) {
    return make_message("error", tick(), {{"reason", std::string("malformed command: ") + e.what()}});
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return make_message("error", tick(), {{"reason", "command needs a string 'type'"}});
  const std::string type = msg["type"];
  const json id = msg.value("id", json());
  const json p = msg.value("payload", json::object());
  auto ack = [&](bool ok, const std::string& reason = "") {
    return make_message("ack", tick(), payload_for(type, ok, reason, id));
  };
  try {
    if (type == "set_target") {
      const double x = p.at("x"), y = p.at("y"), phi = p.value("phi", 0.0);
      const double r = std::hypot(x, y);
      if (!std::isfinite(r) || !std::isfinite(phi)) return ack(false, "non-finite target");
      if (r > cfg_.manipulation_radius + 1e-12)
        return ack(false, "target radius " + std::to_string(r * 1e6) + " um exceeds the " +
                              std::to_string(cfg_.manipulation_radius * 1e6) + " um manipulation radius");
      target_.r_ref = Vec3(x, y, cfg_.sim.z_assumed);
      target_.phi_ref = phi;
      script_.reset();
      return ack(true);
    }
    if (type == "set_gains") {
      ControlGains g = sim_->config().gains;
      g.k_v = p.value("k_v", g.k_v);
      g.k_omega = p.value("k_omega", g.k_omega);
      g.v_max = p.value("v_max", g.v_max);
      g.w_max = p.value("w_max", g.w_max);
      g.validate();
      sim_->config().gains = g;
      return ack(true);
    }
    if (type == "set_noise") {
      NoiseConfig n = sim_->config().noise;
      n.enabled = p.value("enabled", n.enabled);
      n.sigma_xy = p.value("sigma_xy", n.sigma_xy);
      n.sigma_phi = p.value("sigma_phi", n.sigma_phi);
      if (n.sigma_xy < 0 || n.sigma_phi < 0) return ack(false, "noise sigmas must be >= 0");
      sim_->config().noise = n;
      return ack(true);
    }
    if (type == "pause") {
      paused_ = true;
      return ack(true);
    }
    if (type == "resume") {
      paused_ = false;
      return ack(true);
    }
    if (type == "start_script") {
      const std::string name = p.at("name");
      std::vector<ScriptStep> steps;
      if (name == "waypoints") {
        ExperimentConfig c = cfg_;
        c.sim.seed = p.value("seed", cfg_.sim.seed);
        steps = waypoint_script(c);
      } else if (name == "circle") {
        steps = circle_script(cfg_.circle, cfg_.sim.z_assumed);
      } else {
        return ack(false, "unknown script '" + name + "' (waypoints, circle)");
      }
      script_.emplace(steps, steps.empty() ? target_ : steps.back().target);
      script_name_ = name;
      return ack(true);
    }
    if (type == "reset") {
      const double x = p.value("x", 0.0), y = p.value("y", 0.0), phi = p.value("phi", 0.0);
      if (std::hypot(x, y) > cfg_.manipulation_radius + 1e-12) return ack(false, "reset pose outside the manipulation radius");
      restart(Pose::planar(x, y, cfg_.sim.z_assumed, phi));
      return ack(true);
    }
    return ack(false, "unknown command");
  } catch (const json::exception& e) {
    return ack(false, std::string("bad payload: ") + e.what());
  } catch (const ConfigError& e) {
    return ack(false, e.what());
  }
}

std::vector<json> ControlLoop::step() {
  std::vector<std::string> cmds;
  {
    std::lock_guard lock(mu_);
    cmds.swap(pending_);
  }
  std::vector<json> out;
  for (const auto& c : cmds) out.push_back(apply(c));
  if (paused_) return out;
  if (sim_->state().failed) {
    if (!fault_reported_) {
      out.push_back(make_message("fault", tick(), {{"reason", sim_->state().failure}}));
      fault_reported_ = true;
    }
    return out;
  }

  std::optional<TickRecord> rec;
  if (warmup_left_ > 0) {
    --warmup_left_;
    rec = sim_->warmup_tick();
  } else if (script_) {
    rec = script_->step(*sim_);
    if (!rec) {
      json outcomes = json::array();
      for (const auto& o : script_->outcomes())
        outcomes.push_back({{"index", o.index}, {"settled_at", o.settled_at}, {"timeout", o.timeout}});
      out.push_back(make_message("script_done", tick(), {{"name", script_name_}, {"targets", outcomes}}));
      target_ = script_->current_target();
      script_.reset();
    } else {
      target_ = rec->target;
    }
  }
  if (!rec && !sim_->state().failed) rec = sim_->control_tick(target_, -1);
  if (rec) {
    out.push_back(snapshot_message(*rec, include_true_, paused_, script_name()));
    records_.push_back(std::move(*rec));
  }
  return out;
}

std::vector<TickRecord> ControlLoop::take_records() {
  std::vector<TickRecord> r;
  r.swap(records_);
  return r;
}

std::vector<json> replay_messages(const EpisodeLog& log, bool include_true_pose) {
  std::vector<json> out;
  for (const auto& r : log.ticks) out.push_back(snapshot_message(r, include_true_pose, false, "replay"));
  const long last = log.ticks.empty() ? 0 : log.ticks.back().tick;
  out.push_back(make_message("end", last, {{"ticks", log.ticks.size()}, {"outcome", log.outcome}}));
  return out;
}

void paced_run(std::size_t count, double period_s, double speed, const std::function<void(std::size_t)>& emit,
               const std::atomic<bool>* stop) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto step = std::chrono::duration<double>(period_s / speed);
  for (std::size_t i = 0; i < count; ++i) {
    if (stop && stop->load()) return;
    std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(step * static_cast<double>(i)));
    emit(i);
  }
}

LiveRecorder::LiveRecorder(const std::string& path) {
  auto f = std::make_unique<std::ofstream>(path);
  if (!*f) throw std::runtime_error("cannot write " + path);
  *f << std::setprecision(17) << json{{"type", "episode"}, {"schema", kLogSchema}, {"live", true}}.dump() << '\n';
  out_ = std::move(f);
}

void LiveRecorder::write(const TickRecord& r) { *out_ << tick_to_json(r).dump() << '\n' << std::flush; }

}  // namespace depman
