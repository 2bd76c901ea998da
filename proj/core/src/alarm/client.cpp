#include "falldet/alarm/client.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "falldet/error.hpp"

namespace falldet::alarm {

namespace {

int connect_with_timeout(const addrinfo* ai, int timeout_ms) {
  const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
  if (fd < 0) return -1;
  if (::connect(fd, ai->ai_addr, ai->ai_addrlen) != 0) {
    if (errno != EINPROGRESS) {
      ::close(fd);
      return -1;
    }
    pollfd p{fd, POLLOUT, 0};
    int err = 0;
    socklen_t len = sizeof err;
    if (::poll(&p, 1, timeout_ms) != 1 || ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
      ::close(fd);
      errno = err ? err : ETIMEDOUT;
      return -1;
    }
  }
  ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) & ~O_NONBLOCK);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

}  // namespace

AlarmClient::~AlarmClient() { close(); }

AlarmClient::AlarmClient(AlarmClient&& o) noexcept
    : fd_(o.fd_), in_(std::move(o.in_)), eof_(o.eof_), auto_heartbeat_(o.auto_heartbeat_) {
  o.fd_ = -1;
}

AlarmClient& AlarmClient::operator=(AlarmClient&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    in_ = std::move(o.in_);
    eof_ = o.eof_;
    auto_heartbeat_ = o.auto_heartbeat_;
    o.fd_ = -1;
  }
  return *this;
}

AlarmClient AlarmClient::connect(const std::string& host, std::uint16_t port, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_NUMERICSERV;
  addrinfo* res = nullptr;
  const std::string p = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), p.c_str(), &hints, &res); rc != 0) {
    throw NetworkError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai && fd < 0; ai = ai->ai_next) fd = connect_with_timeout(ai, timeout_ms);
  const int err = errno;
  ::freeaddrinfo(res);
  if (fd < 0) throw NetworkError("cannot connect to " + host + ":" + p + ": " + std::strerror(err));
  return AlarmClient(fd);
}

void AlarmClient::send_raw(const std::string& bytes) {
  if (fd_ < 0) throw NetworkError("send on a closed client");
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetworkError(std::string("send failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void AlarmClient::send(const Message& m) { send_raw(encode(m) + "\n"); }

std::optional<std::string> AlarmClient::pop_line() {
  const auto nl = in_.find('\n');
  if (nl == std::string::npos) return std::nullopt;
  std::string line = in_.substr(0, nl);
  in_.erase(0, nl + 1);
  return line;
}

std::optional<Message> AlarmClient::receive(int timeout_ms) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    while (auto line = pop_line()) {
      if (line->empty()) continue;
      Message m = decode(*line);
      if (m.type == MessageType::kHeartbeat && auto_heartbeat_) {
        if (fd_ >= 0 && !eof_) send(Message::heartbeat(now_ms()));
        continue;
      }
      return m;
    }
    if (eof_ || fd_ < 0) throw NetworkError("connection closed by peer");

    // A zero timeout still takes whatever is already buffered in the socket.
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left < 0) left = 0;
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(left));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw NetworkError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) return std::nullopt;
    char buf[4096];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n > 0) {
      in_.append(buf, static_cast<std::size_t>(n));
    } else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
      eof_ = true;
    }
  }
}

void AlarmClient::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

}  // namespace falldet::alarm
