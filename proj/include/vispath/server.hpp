// Live session service over TCP. Frames are single-line JSON objects
// terminated by '\n' (protocol version 1, see docs/protocol.md).
//
// One stepping thread owns the Engine. Network threads only enqueue inbound
// frames and drain per-client outboxes of pre-serialized frames.
#pragma once

#include "vispath/engine.hpp"
#include "vispath/scenario_io.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

namespace vispath {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kDefaultPort = 8765;

class ServerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  int port = kDefaultPort;  // 0 picks an ephemeral port
  std::optional<double> tick_rate_hz;  // overrides the scenario
  int broadcast_divisor = 1;           // snapshot every n-th tick while running
  bool start_running = true;
  std::filesystem::path trace_path;    // empty: not written
  std::filesystem::path script_path;
};

// Frame builders ------------------------------------------------------------

inline Json mesh_json(const PosedMesh& m) {
  Json verts = Json::array();
  for (const auto& v : m.world_vertices()) verts.push_back(point_json(v));
  Json tris = Json::array();
  for (const auto& t : m.mesh->triangles()) tris.push_back({t[0], t[1], t[2]});
  return {{"vertices", verts}, {"triangles", tris}};
}

inline Json scene_frame(const WorldState& w) {
  Json obstacles = Json::array();
  for (const auto& o : w.obstacles) obstacles.push_back(mesh_json(o));
  auto range = [](const JointRange& r) { return Json{{"min", r.min}, {"max", r.max}, {"neutral", r.neutral}}; };
  Json j;
  j["type"] = "scene";
  j["protocol"] = kProtocolVersion;
  j["obstacles"] = obstacles;
  j["body"] = {{"neck_height", w.body.neck_height},
               {"eye_forward", w.body.eye_forward},
               {"eye_up", w.body.eye_up},
               {"trunk", mesh_json(PosedMesh(w.body.trunk, Rigid3::Identity()))},
               {"head", mesh_json(PosedMesh(w.body.head, Rigid3::Identity()))}};
  j["joint_limits"] = {{"alpha", range(w.limits.alpha)}, {"beta", range(w.limits.beta)}, {"theta", range(w.limits.theta)}};
  j["cone"] = {{"eps_min", w.cone.eps_min}, {"eps_max", w.cone.eps_max}, {"facets", w.cone.facets}};
  return j;
}

inline Json snapshot_frame(const WorldState& w, bool running) {
  Json j;
  j["type"] = "snapshot";
  j["tick"] = w.tick;
  j["running"] = running;
  j["status"] = to_string(w.status);
  j["pose"] = {{"x", w.pose.x}, {"y", w.pose.y}, {"theta", w.pose.theta}};
  j["joints"] = {{"alpha", w.joints.alpha}, {"beta", w.joints.beta}, {"theta", w.joints.theta}};
  j["eps_c"] = w.cone.eps_c;
  j["cone_collision_length"] = w.diagnostics.cone_collision_length;
  j["collision_length"] = w.diagnostics.collision_length;
  j["comfort"] = w.diagnostics.comfort;
  j["occluded"] = w.diagnostics.occluded;
  j["eye"] = point_json(eye_center(w.pose, w.joints, w.body));
  j["normalization"] = {{"delta_pos", w.normalization.delta_pos}, {"delta_or", w.normalization.delta_or}};
  Json agents = Json::array();
  for (const auto& a : w.agents) {
    agents.push_back(
        {{"name", a.name}, {"rate", a.rate}, {"active", a.active}, {"gain", a.gain}, {"fire_count", a.fire_count}});
  }
  j["agents"] = agents;
  Json stack = Json::array();
  for (const auto& t : w.target_stack) stack.push_back(point_json(t));
  j["target_stack"] = stack;
  Json contributions = Json::object();
  for (const auto& [name, c] : w.last_contributions) contributions[name] = contribution_json(c);
  j["contributions"] = contributions;
  return j;
}

inline Json ack_frame(const Json& id, const std::string& command, std::int64_t tick) {
  Json j{{"type", "ack"}};
  if (!id.is_null()) j["id"] = id;
  j["command"] = command;
  j["tick"] = tick;
  return j;
}

inline Json error_frame(const Json& id, const std::string& message) {
  Json j{{"type", "error"}};
  if (!id.is_null()) j["id"] = id;
  j["message"] = message;
  return j;
}

// ---------------------------------------------------------------------------

class Server {
 public:
  Server(Scenario scenario, ServerOptions options) : scenario_(std::move(scenario)), options_(std::move(options)) {
    if (options_.broadcast_divisor < 1) throw ServerError("broadcast divisor must be >= 1");
    engine_ = std::make_unique<Engine>(build_world(scenario_));
    running_ = options_.start_running;
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  ~Server() { stop(); }

  /// Bind and start serving. Throws ServerError on bind failure.
  void start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ServerError(std::string("socket: ") + std::strerror(errno));
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
    if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
      close_listener();
      throw ServerError("invalid bind address " + options_.bind_address);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(listen_fd_, 16) < 0) {
      const std::string err = std::strerror(errno);
      close_listener();
      throw ServerError("cannot bind " + options_.bind_address + ":" + std::to_string(options_.port) + ": " + err);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_port_ = ntohs(addr.sin_port);
    stopping_ = false;
    acceptor_ = std::thread([this] { accept_loop(); });
    stepper_ = std::thread([this] { step_loop(); });
  }

  int port() const { return bound_port_; }

  /// Stop all threads, close connections and write the recording.
  void stop() {
    if (stopped_.exchange(true)) return;
    {
      std::lock_guard lock(inbox_mutex_);
      stopping_ = true;
    }
    inbox_cv_.notify_all();
    if (stepper_.joinable()) stepper_.join();
    if (acceptor_.joinable()) acceptor_.join();
    close_listener();
    std::vector<std::shared_ptr<Client>> all;
    {
      std::lock_guard lock(clients_mutex_);
      all.swap(all_clients_);
    }
    for (auto& c : all) c->shutdown();
    for (auto& c : all) c->join();
    write_recording();
  }

  bool stopped() const { return stopped_; }

  /// Trace and script of the current recording; valid after stop().
  const Engine& engine() const { return *engine_; }

 private:
  struct Client {
    int fd = -1;
    std::uint64_t id = 0;
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::string> outbox;
    bool closed = false;
    std::thread reader;
    std::thread writer;

    void send(std::string frame) {
      {
        std::lock_guard lock(m);
        if (closed) return;
        outbox.push_back(std::move(frame));
      }
      cv.notify_one();
    }

    bool is_closed() {
      std::lock_guard lock(m);
      return closed;
    }

    void shutdown() {
      {
        std::lock_guard lock(m);
        closed = true;
      }
      cv.notify_all();
      ::shutdown(fd, SHUT_RDWR);
    }

    void join() {
      if (reader.joinable()) reader.join();
      if (writer.joinable()) writer.join();
      ::close(fd);
    }
  };

  struct NewClient {
    std::shared_ptr<Client> client;
  };
  struct Frame {
    std::shared_ptr<Client> client;
    Json json;
  };
  using Inbound = std::variant<NewClient, Frame>;

  void close_listener() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
  }

  bool is_stopping() {
    std::lock_guard lock(inbox_mutex_);
    return stopping_;
  }

  void push_inbound(Inbound in) {
    {
      std::lock_guard lock(inbox_mutex_);
      inbox_.push_back(std::move(in));
    }
    inbox_cv_.notify_all();
  }

  void accept_loop() {
    while (!is_stopping()) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      int yes = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof(yes));
      auto c = std::make_shared<Client>();
      c->fd = fd;
      c->id = next_client_id_++;
      c->writer = std::thread([c] { write_loop(*c); });
      c->reader = std::thread([this, c] { read_loop(c); });
      {
        std::lock_guard lock(clients_mutex_);
        all_clients_.push_back(c);
      }
      push_inbound(NewClient{c});
    }
  }

  static void write_loop(Client& c) {
    while (true) {
      std::string frame;
      {
        std::unique_lock lock(c.m);
        c.cv.wait(lock, [&] { return c.closed || !c.outbox.empty(); });
        if (c.outbox.empty()) return;
        frame = std::move(c.outbox.front());
        c.outbox.pop_front();
      }
      std::size_t sent = 0;
      while (sent < frame.size()) {
        const ssize_t n = ::send(c.fd, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) {
          std::lock_guard lock(c.m);
          c.closed = true;
          c.outbox.clear();
          return;
        }
        sent += static_cast<std::size_t>(n);
      }
    }
  }

  void read_loop(const std::shared_ptr<Client>& c) {
    std::string buffer;
    char chunk[4096];
    while (!c->is_closed()) {
      pollfd p{c->fd, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const ssize_t n = ::recv(c->fd, chunk, sizeof(chunk), 0);
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buffer.find('\n')) != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
          j = Json::parse(line);
        } catch (const Json::parse_error& e) {
          c->send(error_frame(nullptr, std::string("malformed frame: ") + e.what()).dump() + "\n");
          continue;
        }
        if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
          c->send(error_frame(j.is_object() ? j.value("id", Json()) : Json(), "frame needs a string 'type'").dump() +
                  "\n");
          continue;
        }
        push_inbound(Frame{c, std::move(j)});
      }
    }
    std::lock_guard lock(c->m);
    c->closed = true;
    c->cv.notify_all();
  }

  // -- stepping thread ------------------------------------------------------

  void send_to(Client& c, const Json& j) { c.send(j.dump() + "\n"); }

  void broadcast(const Json& j) {
    const std::string frame = j.dump() + "\n";
    std::erase_if(subscribers_, [](const std::shared_ptr<Client>& c) { return c->is_closed(); });
    for (auto& c : subscribers_) c->send(frame);
  }

  void broadcast_snapshot() { broadcast(snapshot_frame(engine_->world(), running_)); }

  void advance_one() {
    if (!engine_->advance()) return;
    for (const auto id : engine_->world().last_consumed_inputs) {
      auto it = pending_inputs_.find(id);
      if (it == pending_inputs_.end()) continue;
      if (auto c = it->second.client.lock()) send_to(*c, ack_frame(it->second.request_id, "operator_input", engine_->trace().back().tick));
      pending_inputs_.erase(it);
    }
    if (engine_->trace().back().tick % options_.broadcast_divisor == 0) broadcast_snapshot();
  }

  void handle(Frame& f) {
    Client& c = *f.client;
    const Json id = f.json.value("id", Json());
    const std::string type = f.json.at("type").get<std::string>();
    try {
      if (is_world_command(type)) {
        const Command cmd = command_from_json(f.json);
        const auto queued = engine_->apply(cmd);
        if (queued) {
          pending_inputs_[*queued] = {f.client, id};
        } else {
          send_to(c, ack_frame(id, type, engine_->tick()));
        }
        // While paused no tick snapshot follows, so show the change now.
        if (!running_) broadcast_snapshot();
      } else if (type == "run") {
        running_ = true;
        send_to(c, ack_frame(id, type, engine_->tick()));
      } else if (type == "pause_sim") {
        running_ = false;
        send_to(c, ack_frame(id, type, engine_->tick()));
        broadcast_snapshot();
      } else if (type == "step_n") {
        if (running_) throw CommandError("step_n is rejected while running; send pause_sim first");
        if (!f.json.contains("n") || !f.json.at("n").is_number_integer() || f.json.at("n").get<std::int64_t>() < 0) {
          throw CommandError("step_n needs a non-negative integer 'n'");
        }
        const auto n = f.json.at("n").get<std::int64_t>();
        for (std::int64_t i = 0; i < n && !engine_->reached(); ++i) advance_one();
        send_to(c, ack_frame(id, type, engine_->tick()));
        broadcast_snapshot();
      } else if (type == "reset") {
        engine_ = std::make_unique<Engine>(build_world(scenario_));
        pending_inputs_.clear();
        send_to(c, ack_frame(id, type, engine_->tick()));
        broadcast_snapshot();
      } else {
        throw CommandError("unknown frame type '" + type + "'");
      }
    } catch (const std::exception& e) {
      send_to(c, error_frame(id, e.what()));
    }
  }

  void drain() {
    std::deque<Inbound> batch;
    {
      std::lock_guard lock(inbox_mutex_);
      batch.swap(inbox_);
    }
    for (auto& in : batch) {
      if (auto* nc = std::get_if<NewClient>(&in)) {
        send_to(*nc->client, Json{{"type", "hello"}, {"protocol", kProtocolVersion}, {"server", "vispath"}});
        send_to(*nc->client, scene_frame(engine_->world()));
        send_to(*nc->client, snapshot_frame(engine_->world(), running_));
        subscribers_.push_back(nc->client);
      } else {
        handle(std::get<Frame>(in));
      }
    }
  }

  void step_loop() {
    using clock = std::chrono::steady_clock;
    const double hz = options_.tick_rate_hz.value_or(scenario_.tick_rate_hz);
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / hz));
    auto deadline = clock::now();
    while (true) {
      drain();
      if (running_ && !engine_->reached()) {
        advance_one();
        deadline += period;
        const auto now = clock::now();
        if (deadline < now) deadline = now;
      } else {
        deadline = clock::now() + period;
      }
      std::unique_lock lock(inbox_mutex_);
      if (stopping_) break;
      if (running_ && !engine_->reached()) {
        inbox_cv_.wait_until(lock, deadline, [&] { return stopping_; });
      } else {
        inbox_cv_.wait_for(lock, std::chrono::milliseconds(100), [&] { return stopping_ || !inbox_.empty(); });
      }
      if (stopping_) break;
    }
    drain();
  }

  void write_recording() {
    if (!options_.trace_path.empty()) write_trace(engine_->trace(), options_.trace_path);
    if (!options_.script_path.empty()) write_script(engine_->script(), options_.script_path);
  }

  struct PendingInput {
    std::weak_ptr<Client> client;
    Json request_id;
  };

  Scenario scenario_;
  ServerOptions options_;
  std::unique_ptr<Engine> engine_;
  bool running_ = true;  // stepping thread only
  std::vector<std::shared_ptr<Client>> subscribers_;  // stepping thread only
  std::unordered_map<std::uint64_t, PendingInput> pending_inputs_;

  int listen_fd_ = -1;
  int bound_port_ = 0;
  std::atomic<std::uint64_t> next_client_id_{1};
  std::thread acceptor_;
  std::thread stepper_;
  std::atomic<bool> stopped_{false};

  std::mutex inbox_mutex_;
  std::condition_variable inbox_cv_;
  std::deque<Inbound> inbox_;
  bool stopping_ = false;

  std::mutex clients_mutex_;
  std::vector<std::shared_ptr<Client>> all_clients_;
};

}  // namespace vispath
