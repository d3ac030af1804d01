#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <functional>
#include <iostream>
#include <list>
#include <mutex>
#include <string>
#include <thread>

#include "preempt/bridge/session.hpp"

namespace preempt::bridge {

/// Line channel over a connected socket. Owns the descriptor.
class SocketChannel : public LineChannel {
 public:
  explicit SocketChannel(int fd) : fd_(fd) {}
  ~SocketChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;

  std::optional<std::string> read_line() override {
    for (;;) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char tmp[4096];
      const ssize_t n = ::recv(fd_, tmp, sizeof(tmp), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return std::nullopt;
      buf_.append(tmp, static_cast<std::size_t>(n));
    }
  }

  void write_line(const std::string& line) override {
    const std::string data = line + '\n';
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return;  // peer gone; the read side reports the close
      off += static_cast<std::size_t>(n);
    }
  }

 private:
  int fd_;
  std::string buf_;
};

class StdioChannel : public LineChannel {
 public:
  StdioChannel(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  std::optional<std::string> read_line() override {
    std::string line;
    if (!std::getline(in_, line)) return std::nullopt;
    return line;
  }
  void write_line(const std::string& line) override { out_ << line << '\n' << std::flush; }

 private:
  std::istream& in_;
  std::ostream& out_;
};

/// TCP listener: one thread per session, sessions share only the
/// immutable model.
class Server {
 public:
  using Listener = std::function<void(const SessionResult&)>;

  Server(forecast::ForecastModel model, EngineConfig ecfg) : model_(std::move(model)), ecfg_(ecfg) {}
  ~Server() { stop(); }

  /// Binds and listens; port 0 picks a free port. Returns the bound port.
  int listen(const std::string& host, int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ConfigError("bad listen address " + host);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 16) != 0)
      throw Error(std::string("bind/listen: ") + std::strerror(errno));
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
  }

  /// Accepts until stop(). Blocks the caller.
  void serve(const Listener& on_done = {}) {
    while (!stopping_) {
      const int c = ::accept(fd_, nullptr, nullptr);
      if (c < 0) {
        if (errno == EINTR) continue;
        break;
      }
      std::lock_guard lk(m_);
      workers_.emplace_back([this, c, on_done] {
        SocketChannel ch(c);
        const auto res = run_session(ch, model_, ecfg_);
        if (on_done) on_done(res);
      });
    }
    join_all();
  }

  void stop() {
    stopping_ = true;
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void join_all() {
    std::lock_guard lk(m_);
    for (auto& t : workers_)
      if (t.joinable()) t.join();
    workers_.clear();
  }

  forecast::ForecastModel model_;
  EngineConfig ecfg_;
  int fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::mutex m_;
  std::list<std::thread> workers_;
};

/// Client-side socket connect, for tests and tools.
inline int connect_tcp(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error("socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  ::inet_pton(AF_INET, host.c_str(), &addr.sin_addr);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw Error(std::string("connect: ") + std::strerror(errno));
  }
  return fd;
}

}  // namespace preempt::bridge
