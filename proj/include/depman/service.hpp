#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "depman/config.hpp"
#include "depman/simulator.hpp"

namespace depman {

/// Wire format version of {type, tick, payload} messages.
inline constexpr int kWireSchema = 1;

nlohmann::json make_message(const std::string& type, long tick, nlohmann::json payload);

/// Snapshot message for one tick record. The true pose is a debug field.
nlohmann::json snapshot_message(const TickRecord& r, bool include_true_pose, bool paused = false,
                                const std::string& script = "");

/// Bounded per-client outbox: a full queue drops its oldest message, so a slow reader
/// never blocks the publisher.
class ClientQueue {
 public:
  explicit ClientQueue(std::size_t capacity = 64) : capacity_(capacity) {}
  void push(std::string msg);
  std::optional<std::string> pop();
  std::size_t size() const;
  std::size_t dropped() const;

 private:
  mutable std::mutex mu_;
  std::deque<std::string> q_;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
};

class Broadcaster {
 public:
  using Notify = std::function<void()>;
  explicit Broadcaster(std::size_t per_client = 64) : per_client_(per_client) {}

  /// `notify` runs after every push to this client (it schedules the socket write).
  std::shared_ptr<ClientQueue> subscribe(Notify notify = {});
  void unsubscribe(const std::shared_ptr<ClientQueue>& q);
  void publish(const std::string& msg);
  std::size_t clients() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::pair<std::shared_ptr<ClientQueue>, Notify>> subs_;
  std::size_t per_client_;
};

/// The single owner of the live simulation. Commands may be submitted from any thread;
/// they are parsed and applied only at the start of step(), never mid-tick.
class ControlLoop {
 public:
  explicit ControlLoop(ExperimentConfig cfg, bool include_true_pose = true);

  void submit(std::string command_text);
  /// Applies queued commands (one ack each), then runs one tick unless paused or
  /// faulted. Returns the messages to broadcast, acks first.
  std::vector<nlohmann::json> step();
  /// Tick records produced since the last call (for recording).
  std::vector<TickRecord> take_records();

  bool paused() const { return paused_; }
  bool faulted() const { return sim_->state().failed; }
  long tick() const { return sim_->state().tick; }
  double time() const { return sim_->state().time; }
  const TargetPose& target() const { return target_; }
  const ExperimentConfig& config() const { return cfg_; }
  std::string script_name() const { return script_ ? script_name_ : ""; }

 private:
  nlohmann::json apply(const std::string& text);
  void restart(const Pose& initial);
  nlohmann::json payload_for(const std::string& command, bool accepted, const std::string& reason,
                             const nlohmann::json& id) const;

  ExperimentConfig cfg_;
  bool include_true_;
  std::unique_ptr<Simulator> sim_;
  std::mutex mu_;
  std::vector<std::string> pending_;
  std::vector<TickRecord> records_;
  bool paused_ = false;
  bool fault_reported_ = false;
  long warmup_left_ = 0;
  TargetPose target_;
  std::optional<ScriptRunner> script_;
  std::string script_name_;
};

/// Snapshot stream of a recorded episode followed by an "end" message. An empty log
/// yields only the end message.
std::vector<nlohmann::json> replay_messages(const EpisodeLog& log, bool include_true_pose = true);

/// Calls emit(i) at wall time start + i * period / speed. Returns early when stop is set.
void paced_run(std::size_t count, double period_s, double speed, const std::function<void(std::size_t)>& emit,
               const std::atomic<bool>* stop = nullptr);

/// Streams tick lines of a live session in the episode-log format.
class LiveRecorder {
 public:
  explicit LiveRecorder(const std::string& path);
  void write(const TickRecord& r);

 private:
  std::unique_ptr<std::ostream> out_;
};

struct ServiceOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  double speed = 1.0;           // > 1 runs faster than real time
  bool include_true_pose = true;
  std::size_t client_queue = 64;
  std::string record_path;      // live ticks as JSON lines
  std::string replay_path;      // stream this log instead of a live simulation
  int io_threads = 2;
};

/// Websocket + health endpoint around a ControlLoop (or a replay). Bind errors throw.
class Server {
 public:
  Server(ExperimentConfig cfg, ServiceOptions opts);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  /// Blocks until stop() or SIGINT/SIGTERM (when handle_signals).
  void run(bool handle_signals = true);
  void stop();
  nlohmann::json health() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace depman
