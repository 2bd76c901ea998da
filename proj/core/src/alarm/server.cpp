#include "falldet/alarm/server.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "falldet/error.hpp"
#include "falldet/ingest/dataset.hpp"

namespace falldet::alarm {

void ServerConfig::validate() const {
  policy.validate();
  if (retry_ms < 1) throw ConfigError("retry_ms must be >= 1");
  if (heartbeat_ms < 1) throw ConfigError("heartbeat_ms must be >= 1");
  if (heartbeat_misses < 1) throw ConfigError("heartbeat_misses must be >= 1");
  if (fall_label.empty()) throw ConfigError("fall_label must not be empty");
}

std::pair<std::string, std::uint16_t> parse_bind(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ConfigError("bind address must be host:port, got '" + s + "'");
  const std::string host = s.substr(0, colon);
  unsigned port = 0;
  const char* b = s.data() + colon + 1;
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, port);
  if (ec != std::errc{} || p != e || b == e || port > 65535) throw ConfigError("bad port in '" + s + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t since_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(b - a).count();
}

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

constexpr std::size_t kMaxOutBytes = 1 << 20;

}  // namespace

struct AlarmServer::Impl {
  struct Connection {
    std::uint64_t id = 0;
    int fd = -1;
    bool greeted = false;
    Role role = Role::kObserver;
    std::string source_id;
    std::string in;
    std::string out;
    bool closing = false;  // flush `out`, then close
    Clock::time_point last_rx;
    std::int64_t connected_at_ms = 0;
  };

  struct PendingAlarm {
    Message msg;
    Clock::time_point last_sent{};
    bool sent = false;
  };

  struct Responder {
    std::int64_t last_ack = 0;
    std::deque<PendingAlarm> queue;
    std::uint64_t connection = 0;  // 0 = offline
  };

  explicit Impl(ServerConfig c) : cfg(std::move(c)) {}

  ServerConfig cfg;
  int listen_fd = -1;
  int wake[2] = {-1, -1};
  std::uint16_t bound_port = 0;
  std::thread thread;
  std::atomic<bool> stop_flag{false};
  std::atomic<bool> is_running{false};

  // Everything below is guarded by `mu`; the service thread releases it
  // only while blocked in poll().
  mutable std::mutex mu;
  std::map<std::uint64_t, Connection> conns;
  std::map<std::string, Responder> responders;
  std::map<std::string, har::FallDebouncer> debouncers;
  std::uint64_t next_conn = 1;
  std::int64_t next_event = 1;
  Clock::time_point last_heartbeat;
  std::vector<LogRecord> records;
  std::ofstream log_file;
  ServerStats st;

  void log(LogRecord r) {
    if (r.ts_ms == 0) r.ts_ms = now_ms();
    if (log_file.is_open()) {
      log_file << to_json_line(r) << '\n';
      log_file.flush();
    }
    records.push_back(std::move(r));
  }

  void bind_and_listen() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(cfg.port);
    if (int rc = ::getaddrinfo(cfg.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
      throw NetworkError("cannot resolve " + cfg.host + ": " + ::gai_strerror(rc));
    }
    std::string last_err = "no address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
      if (fd < 0) continue;
      const int one = 1;
      ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
        listen_fd = fd;
        break;
      }
      last_err = std::strerror(errno);
      ::close(fd);
    }
    ::freeaddrinfo(res);
    if (listen_fd < 0) throw NetworkError("cannot bind " + cfg.host + ":" + port + ": " + last_err);
    set_nonblocking(listen_fd);

    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    ::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&ss), &len);
    bound_port = ss.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port)
                                          : ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
    if (::pipe2(wake, O_CLOEXEC | O_NONBLOCK) != 0) throw NetworkError("pipe failed");
  }

  // --- output ---------------------------------------------------------

  void queue_line(Connection& c, const Message& m) {
    if (c.closing) return;
    c.out += encode(m);
    c.out += '\n';
    flush(c);
    if (c.out.size() > kMaxOutBytes) {
      c.out.clear();
      c.closing = true;
      log({"disconnect", 0, std::nullopt, c.source_id, {}, "output backlog"});
    }
  }

  void flush(Connection& c) {
    while (!c.out.empty()) {
      const ssize_t n = ::send(c.fd, c.out.data(), c.out.size(), MSG_NOSIGNAL);
      if (n > 0) {
        c.out.erase(0, static_cast<std::size_t>(n));
      } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) {
        return;
      } else {
        c.out.clear();
        c.closing = true;
        return;
      }
    }
  }

  void reject(Connection& c, const std::string& reason) {
    queue_line(c, Message::error(reason));
    c.closing = true;
    ++st.errors;
    log({"error", 0, std::nullopt, c.source_id, std::to_string(c.id), reason});
  }

  // --- alarm fan-out --------------------------------------------------

  void send_head(Responder& r, Connection& c, bool retry) {
    if (r.queue.empty()) return;
    PendingAlarm& p = r.queue.front();
    queue_line(c, p.msg);
    p.last_sent = Clock::now();
    p.sent = true;
    ++st.deliveries;
    log({"deliver", 0, p.msg.event_id, p.msg.source_id, c.source_id, retry ? "retry" : ""});
  }

  void raise_alarm(const std::string& sensor, double confidence, std::int64_t detected_ts) {
    const std::int64_t id = next_event++;
    const Message m = Message::fall_alarm(id, now_ms(), confidence, sensor);
    ++st.alarms;
    log({"detection", detected_ts, id, sensor, {}, {}});
    log({"fall_alarm", m.ts_ms, id, sensor, {}, {}});
    for (auto& [rid, r] : responders) {
      r.queue.push_back({m});
      if (r.queue.size() == 1 && r.connection != 0) {
        if (auto it = conns.find(r.connection); it != conns.end()) send_head(r, it->second, false);
      }
    }
    for (auto& [cid, c] : conns) {
      if (c.greeted && c.role == Role::kObserver) queue_line(c, m);
    }
  }

  // --- input ----------------------------------------------------------

  void on_hello(Connection& c, const Message& m) {
    if (c.greeted) return reject(c, "duplicate hello");
    if (m.source_id.empty()) return reject(c, "hello needs a non-empty source_id");
    c.greeted = true;
    c.role = m.role;
    c.source_id = m.source_id;
    log({"connect", 0, std::nullopt, c.source_id, std::string(to_string(c.role)), {}});
    if (c.role != Role::kResponder) return;

    Responder& r = responders[c.source_id];
    if (r.connection != 0 && r.connection != c.id) {
      if (auto it = conns.find(r.connection); it != conns.end()) {
        queue_line(it->second, Message::error("superseded by a newer connection"));
        it->second.closing = true;
      }
    }
    r.connection = c.id;
    send_head(r, c, false);
  }

  void on_ack(Connection& c, const Message& m) {
    if (c.role != Role::kResponder) return reject(c, "only responders acknowledge alarms");
    Responder& r = responders[c.source_id];
    ++st.acks;
    log({"ack", 0, m.event_id, {}, c.source_id, {}});
    r.last_ack = std::max(r.last_ack, m.event_id);
    bool head_acked = !r.queue.empty() && r.queue.front().msg.event_id == m.event_id;
    std::erase_if(r.queue, [&](const PendingAlarm& p) { return p.msg.event_id == m.event_id; });
    if (head_acked) send_head(r, c, false);
  }

  void on_prediction(Connection& c, const Message& m) {
    if (c.role != Role::kSensor) return reject(c, "only sensors send predictions");
    log({"prediction", m.ts_ms, std::nullopt, c.source_id, m.class_name, std::to_string(m.confidence)});
    if (cfg.mode != ServerMode::kPolicyInServer) return;
    auto it = debouncers.try_emplace(c.source_id, cfg.policy).first;
    const bool is_fall = ingest::canonical_class_name(m.class_name) == ingest::canonical_class_name(cfg.fall_label);
    if (it->second.feed(is_fall ? m.confidence : 0.0)) raise_alarm(c.source_id, m.confidence, m.ts_ms);
  }

  void on_sensor_alarm(Connection& c, const Message& m) {
    if (c.role != Role::kSensor) return reject(c, "only sensors raise alarms");
    if (cfg.mode != ServerMode::kPassthrough) return reject(c, "server applies the policy itself; send predictions");
    if (m.confidence < cfg.policy.confidence_threshold) {
      log({"rejected", 0, std::nullopt, c.source_id, {}, "confidence below threshold"});
      return;
    }
    raise_alarm(c.source_id, m.confidence, m.ts_ms);
  }

  void handle_line(Connection& c, std::string_view line) {
    Message m;
    try {
      m = decode(line);
    } catch (const ParseError& e) {
      return reject(c, e.what());
    }
    if (!c.greeted && m.type != MessageType::kHello) return reject(c, "expected hello first");
    switch (m.type) {
      case MessageType::kHello: return on_hello(c, m);
      case MessageType::kPrediction: return on_prediction(c, m);
      case MessageType::kFallAlarm: return on_sensor_alarm(c, m);
      case MessageType::kAck: return on_ack(c, m);
      case MessageType::kHeartbeat: return;
      case MessageType::kError:
        log({"client_error", 0, std::nullopt, c.source_id, {}, m.reason});
        c.closing = true;
        return;
    }
  }

  void read_from(Connection& c) {
    char buf[4096];
    bool eof = false;
    for (;;) {
      const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
      if (n > 0) {
        c.in.append(buf, static_cast<std::size_t>(n));
        c.last_rx = Clock::now();
        continue;
      }
      if (n < 0 && errno == EINTR) continue;
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
      eof = true;
      break;
    }
    // Lines that arrived before EOF still count (an ack followed by close).
    std::size_t start = 0;
    while (!c.closing) {
      const auto nl = c.in.find('\n', start);
      if (nl == std::string::npos) break;
      const std::string_view line(c.in.data() + start, nl - start);
      start = nl + 1;
      if (line.empty() || line == "\r") continue;
      handle_line(c, line);
    }
    c.in.erase(0, start);
    if (!c.closing && c.in.size() > kMaxLineBytes) reject(c, "line too long");
    if (eof) {
      c.out.clear();
      c.closing = true;
    }
  }

  void drop(std::uint64_t id) {
    auto it = conns.find(id);
    if (it == conns.end()) return;
    Connection& c = it->second;
    if (c.greeted && c.role == Role::kResponder) {
      auto r = responders.find(c.source_id);
      if (r != responders.end() && r->second.connection == id) r->second.connection = 0;
    }
    log({"disconnect", 0, std::nullopt, c.source_id, std::to_string(id), {}});
    ::close(c.fd);
    conns.erase(it);
  }

  void accept_all() {
    for (;;) {
      const int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
      if (fd < 0) return;
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      Connection c;
      c.id = next_conn++;
      c.fd = fd;
      c.last_rx = Clock::now();
      c.connected_at_ms = now_ms();
      conns.emplace(c.id, std::move(c));
      ++st.connections;
    }
  }

  void timers() {
    const auto now = Clock::now();
    if (since_ms(last_heartbeat, now) >= cfg.heartbeat_ms) {
      last_heartbeat = now;
      const Message hb = Message::heartbeat(now_ms());
      for (auto& [id, c] : conns) {
        if (since_ms(c.last_rx, now) > std::int64_t{cfg.heartbeat_ms} * cfg.heartbeat_misses) {
          log({"timeout", 0, std::nullopt, c.source_id, std::to_string(id), "missed heartbeats"});
          c.out.clear();
          c.closing = true;
        } else if (c.greeted) {
          queue_line(c, hb);
        }
      }
    }
    for (auto& [rid, r] : responders) {
      if (r.connection == 0 || r.queue.empty()) continue;
      auto it = conns.find(r.connection);
      if (it == conns.end() || it->second.closing) continue;
      if (since_ms(r.queue.front().last_sent, now) >= cfg.retry_ms) send_head(r, it->second, true);
    }
  }

  int poll_timeout() const {
    const auto now = Clock::now();
    std::int64_t t = cfg.heartbeat_ms - since_ms(last_heartbeat, now);
    for (const auto& [rid, r] : responders) {
      if (r.connection != 0 && !r.queue.empty()) {
        t = std::min(t, cfg.retry_ms - since_ms(r.queue.front().last_sent, now));
      }
    }
    return static_cast<int>(std::clamp<std::int64_t>(t, 0, 1000));
  }

  void loop() {
    std::vector<pollfd> fds;
    std::vector<std::uint64_t> ids;
    while (!stop_flag.load()) {
      int timeout = 0;
      {
        std::lock_guard lk(mu);
        fds.clear();
        ids.clear();
        fds.push_back({wake[0], POLLIN, 0});
        fds.push_back({listen_fd, POLLIN, 0});
        for (auto& [id, c] : conns) {
          short ev = POLLIN;
          if (!c.out.empty()) ev |= POLLOUT;
          fds.push_back({c.fd, ev, 0});
          ids.push_back(id);
        }
        timeout = poll_timeout();
      }
      if (::poll(fds.data(), fds.size(), timeout) < 0 && errno != EINTR) break;

      std::lock_guard lk(mu);
      if (fds[0].revents & POLLIN) {
        char drain[64];
        while (::read(wake[0], drain, sizeof drain) > 0) {
        }
      }
      if (fds[1].revents & POLLIN) accept_all();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = conns.find(ids[i]);
        if (it == conns.end()) continue;
        Connection& c = it->second;
        const short re = fds[i + 2].revents;
        if (re & (POLLIN | POLLHUP | POLLERR)) read_from(c);
        if (re & POLLOUT) flush(c);
      }
      timers();
      std::vector<std::uint64_t> dead;
      for (auto& [id, c] : conns) {
        if (!c.out.empty()) flush(c);
        if (c.closing && c.out.empty()) dead.push_back(id);
      }
      for (auto id : dead) drop(id);
    }
  }

  void shutdown_all() {
    std::lock_guard lk(mu);
    std::vector<std::uint64_t> all;
    for (auto& [id, c] : conns) all.push_back(id);
    for (auto id : all) drop(id);
    if (listen_fd >= 0) ::close(listen_fd);
    listen_fd = -1;
    for (int& fd : wake) {
      if (fd >= 0) ::close(fd);
      fd = -1;
    }
  }
};

AlarmServer::AlarmServer(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {
  impl_->cfg.validate();
}

AlarmServer::~AlarmServer() { stop(); }

void AlarmServer::start() {
  if (impl_->is_running) return;
  impl_->bind_and_listen();
  if (!impl_->cfg.log_path.empty()) {
    impl_->log_file.open(impl_->cfg.log_path, std::ios::app);
    if (!impl_->log_file) throw NetworkError("cannot open event log " + impl_->cfg.log_path.string());
  }
  impl_->last_heartbeat = Clock::now();
  impl_->stop_flag = false;
  impl_->is_running = true;
  impl_->thread = std::thread([this] { impl_->loop(); });
}

void AlarmServer::stop() {
  if (!impl_->is_running.exchange(false)) return;
  impl_->stop_flag = true;
  const char b = 1;
  [[maybe_unused]] auto n = ::write(impl_->wake[1], &b, 1);
  if (impl_->thread.joinable()) impl_->thread.join();
  impl_->shutdown_all();
}

bool AlarmServer::running() const { return impl_->is_running; }
std::uint16_t AlarmServer::port() const { return impl_->bound_port; }

std::vector<LogRecord> AlarmServer::log() const {
  std::lock_guard lk(impl_->mu);
  return impl_->records;
}

ServerStats AlarmServer::stats() const {
  std::lock_guard lk(impl_->mu);
  return impl_->st;
}

std::vector<SubscriberRecord> AlarmServer::subscribers() const {
  std::lock_guard lk(impl_->mu);
  std::vector<SubscriberRecord> out;
  for (const auto& [id, c] : impl_->conns) {
    if (!c.greeted) continue;
    SubscriberRecord s{id, c.role, c.source_id, 0, c.connected_at_ms};
    if (c.role == Role::kResponder) {
      if (auto it = impl_->responders.find(c.source_id); it != impl_->responders.end()) s.last_ack = it->second.last_ack;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<std::int64_t>>> AlarmServer::pending() const {
  std::lock_guard lk(impl_->mu);
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> out;
  for (const auto& [rid, r] : impl_->responders) {
    std::vector<std::int64_t> ids;
    for (const auto& p : r.queue) ids.push_back(p.msg.event_id);
    out.emplace_back(rid, std::move(ids));
  }
  return out;
}

}  // namespace falldet::alarm
