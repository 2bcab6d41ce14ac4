// Copyright 2026 The simulst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Client for agents running as child processes (POSIX only). The child is
// started with `/bin/sh -c <command>` and talks the protocol.hpp format on
// its stdin/stdout; stderr is inherited.

#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <thread>

#include "simulst/agents.hpp"
#include "simulst/errors.hpp"
#include "simulst/protocol.hpp"

namespace simulst {

struct ExternalAgentOptions {
  std::chrono::milliseconds timeout{60'000};
  protocol::HeadAggregation aggregation = protocol::HeadAggregation::kGiven;
};

class ExternalAgent final : public Agent {
 public:
  explicit ExternalAgent(std::string command, ExternalAgentOptions options = {})
      : command_(std::move(command)), options_(options) {
    // A dead agent must surface as AgentCrashed, not kill the harness.
    struct sigaction current{};
    if (::sigaction(SIGPIPE, nullptr, &current) == 0 && current.sa_handler == SIG_DFL)
      ::signal(SIGPIPE, SIG_IGN);
    spawn();
    try {
      protocol::check_handshake(read_line());
    } catch (...) {
      terminate();
      throw;
    }
  }

  ExternalAgent(const ExternalAgent&) = delete;
  ExternalAgent& operator=(const ExternalAgent&) = delete;

  ~ExternalAgent() override {
    if (pid_ > 0 && alive_) {
      try {
        AgentRequest bye;
        bye.kind = RequestKind::kClose;
        write_line(protocol::encode_request(bye));
      } catch (const Error&) {
      }
    }
    terminate();
  }

  AgentResponse handle(const AgentRequest& request) override {
    write_line(protocol::encode_request(request));
    if (request.kind == RequestKind::kClose) {
      alive_ = false;
      return {};
    }
    return protocol::decode_response(read_line(), options_.aggregation);
  }

  pid_t pid() const { return pid_; }

 private:
  void spawn() {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw Error(Errc::kAgentCrashed, std::string("pipe: ") + std::strerror(errno));
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw Error(Errc::kAgentCrashed, std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      throw Error(Errc::kAgentCrashed, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    pid_ = pid;
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
    ::fcntl(in_fd_, F_SETFD, FD_CLOEXEC);
    ::fcntl(out_fd_, F_SETFD, FD_CLOEXEC);
    alive_ = true;
  }

  void write_line(const std::string& line) {
    if (!alive_) throw Error(Errc::kAgentCrashed, "agent '" + command_ + "' is not running");
    std::string buf = line;
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::write(in_fd_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        alive_ = false;
        throw Error(Errc::kAgentCrashed, "agent '" + command_ + "' closed its input: " + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + options_.timeout;
    while (true) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
      if (left.count() <= 0)
        throw Error(Errc::kTimeout, "agent '" + command_ + "' did not answer within " +
                                        std::to_string(options_.timeout.count()) + " ms");
      pollfd pfd{out_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1'000'000)));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::kAgentCrashed, std::string("poll: ") + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(out_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        alive_ = false;
        throw Error(Errc::kAgentCrashed, std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) {
        alive_ = false;
        throw Error(Errc::kAgentCrashed, "agent '" + command_ + "' closed its output");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void terminate() {
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0) ::close(out_fd_);
    in_fd_ = out_fd_ = -1;
    if (pid_ <= 0) return;
    // Give a well-behaved agent a moment to exit on close/EOF.
    for (int i = 0; i < 50; ++i) {
      int status = 0;
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_ || r < 0) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }

  std::string command_;
  ExternalAgentOptions options_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  bool alive_ = false;
  std::string buffer_;
};

}  // namespace simulst
