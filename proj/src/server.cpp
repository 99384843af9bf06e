#include <csignal>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "depman/errors.hpp"
#include "depman/logio.hpp"
#include "depman/service.hpp"

#ifndef DEPMAN_VERSION
#define DEPMAN_VERSION "dev"
#endif
#ifndef DEPMAN_BUILD_TYPE
#define DEPMAN_BUILD_TYPE "unknown"
#endif

namespace depman {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& s, Broadcaster& bc, ControlLoop* loop, json hello)
      : ws_(std::move(s)), bc_(bc), loop_(loop), hello_(std::move(hello)) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto exec = ws_.get_executor();
    q_ = bc_.subscribe([weak, exec] {
      asio::post(exec, [weak] {
        if (auto s = weak.lock()) s->pump();
      });
    });
    q_->push(hello_.dump());
    pump();
    read();
  }

  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      std::string text = beast::buffers_to_string(self->in_.data());
      self->in_.consume(self->in_.size());
      if (self->loop_) {
        self->loop_->submit(std::move(text));
      } else {
        self->q_->push(make_message("error", 0, {{"reason", "replay streams accept no commands"}}).dump());
        self->pump();
      }
      self->read();
    });
  }

  // Runs on the session strand.
  void pump() {
    if (writing_ || closed_ || !q_) return;
    auto m = q_->pop();
    if (!m) return;
    writing_ = true;
    out_ = std::move(*m);
    ws_.text(true);
    ws_.async_write(asio::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->close();
      self->pump();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    if (q_) bc_.unsubscribe(q_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Broadcaster& bc_;
  ControlLoop* loop_;
  json hello_;
  std::shared_ptr<ClientQueue> q_;
  beast::flat_buffer in_;
  std::string out_;
  bool writing_ = false;
  bool closed_ = false;
};

}  // namespace

struct Server::Impl {
  ExperimentConfig cfg;
  ServiceOptions opts;
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  Broadcaster bc;
  std::unique_ptr<ControlLoop> loop;
  std::vector<json> replay;
  std::unique_ptr<LiveRecorder> recorder;
  std::string hash;
  std::atomic<bool> stopping{false};
  std::atomic<long> tick{0};
  std::atomic<bool> fault{false};  // mirrors the loop state for the io threads
  std::thread worker;

  Impl(ExperimentConfig c, ServiceOptions o) : cfg(std::move(c)), opts(std::move(o)), bc(opts.client_queue) {}

  json hello() const {
    return make_message("hello", tick.load(),
                        {{"schema", kWireSchema}, {"mode", loop ? "live" : "replay"}, {"config_hash", hash},
                         {"control_dt", cfg.sim.control_dt}, {"manipulation_radius", cfg.manipulation_radius}});
  }

  void accept() {
    acceptor.async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket s) {
      if (ec) return;
      serve_http(std::move(s));
      accept();
    });
  }

  void serve_http(tcp::socket s) {
    struct Http {
      beast::tcp_stream stream;
      beast::flat_buffer buf;
      http::request<http::string_body> req;
      http::response<http::string_body> res;
    };
    auto h = std::make_shared<Http>(Http{beast::tcp_stream(std::move(s)), {}, {}, {}});
    h->stream.expires_after(std::chrono::seconds(10));
    http::async_read(h->stream, h->buf, h->req, [this, h](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (websocket::is_upgrade(h->req)) {
        h->stream.expires_never();
        std::make_shared<WsSession>(h->stream.release_socket(), bc, loop.get(), hello())->run(std::move(h->req));
        return;
      }
      h->res.version(h->req.version());
      h->res.keep_alive(false);
      h->res.set(http::field::content_type, "application/json");
      if (h->req.method() == http::verb::get && h->req.target() == "/health") {
        h->res.result(http::status::ok);
        h->res.body() = health().dump();
      } else {
        h->res.result(http::status::not_found);
        h->res.body() = json{{"error", "not found"}}.dump();
      }
      h->res.prepare_payload();
      http::async_write(h->stream, h->res, [h](beast::error_code, std::size_t) {
        beast::error_code ignored;
        h->stream.socket().shutdown(tcp::socket::shutdown_send, ignored);
      });
    });
  }

  json health() const {
    return {{"status", fault ? "fault" : "ok"},
            {"service", "depman"},
            {"version", DEPMAN_VERSION},
            {"build", DEPMAN_BUILD_TYPE},
            {"schema", kWireSchema},
            {"config_hash", hash},
            {"mode", loop ? "live" : "replay"},
            {"tick", tick.load()},
            {"clients", bc.clients()}};
  }

  void run_live() {
    using Clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(cfg.sim.control_dt / opts.speed));
    auto next = Clock::now();
    while (!stopping) {
      for (const auto& m : loop->step()) bc.publish(m.dump());
      if (recorder)
        for (const auto& r : loop->take_records()) recorder->write(r);
      else
        loop->take_records();
      tick = loop->tick();
      fault = loop->faulted();
      next += period;
      std::this_thread::sleep_until(next);
    }
  }

  void run_replay() {
    while (!stopping && bc.clients() == 0) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    paced_run(replay.size(), cfg.sim.control_dt, opts.speed, [this](std::size_t i) {
      tick = replay[i].at("tick").get<long>();
      bc.publish(replay[i].dump());
    }, &stopping);
  }
};

Server::Server(ExperimentConfig cfg, ServiceOptions opts) : impl_(std::make_unique<Impl>(std::move(cfg), std::move(opts))) {
  auto& im = *impl_;
  if (!(im.opts.speed > 0)) throw ConfigError("speed must be > 0");
  im.hash = config_hash(im.cfg);
  if (im.opts.replay_path.empty()) {
    im.loop = std::make_unique<ControlLoop>(im.cfg, im.opts.include_true_pose);
    if (!im.opts.record_path.empty()) im.recorder = std::make_unique<LiveRecorder>(im.opts.record_path);
  } else {
    im.replay = replay_messages(read_jsonl(im.opts.replay_path), im.opts.include_true_pose);
  }
  const tcp::endpoint ep(asio::ip::make_address(im.opts.address), im.opts.port);
  try {
    im.acceptor.open(ep.protocol());
    im.acceptor.set_option(asio::socket_base::reuse_address(true));
    im.acceptor.bind(ep);
    im.acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw std::runtime_error("cannot listen on " + im.opts.address + ":" + std::to_string(im.opts.port) + ": " +
                             e.code().message());
  }
}

Server::~Server() {
  stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

json Server::health() const { return impl_->health(); }

void Server::stop() {
  impl_->stopping = true;
  impl_->ioc.stop();
}

void Server::run(bool handle_signals) {
  auto& im = *impl_;
  asio::signal_set signals(im.ioc);
  if (handle_signals) {
    signals.add(SIGINT);
    signals.add(SIGTERM);
    signals.async_wait([this](beast::error_code, int) { stop(); });
  }
  im.accept();
  im.worker = std::thread([&im] { im.loop ? im.run_live() : im.run_replay(); });
  std::vector<std::thread> io;
  for (int i = 1; i < im.opts.io_threads; ++i) io.emplace_back([&im] { im.ioc.run(); });
  im.ioc.run();
  im.stopping = true;
  for (auto& t : io) t.join();
  if (im.worker.joinable()) im.worker.join();
}

}  // namespace depman
