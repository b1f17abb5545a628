#pragma once

// Out-of-process objectives. Wire protocol: the decision is written as one
// line of whitespace-separated decimals to the child's stdin; the child
// answers with one line holding a single decimal (maximization orientation).
// One-shot mode spawns `/bin/sh -c command` per evaluation and requires exit
// status 0; persistent mode keeps one child alive and exchanges one line per
// request.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "kgcp/box.hpp"
#include "kgcp/errors.hpp"

namespace kgcp {

struct ExternalCommand {
  std::string command;
  double timeoutSeconds = 60.0;
  bool persistent = false;
};

namespace detail {

inline std::string format_decision(const Vector& x) {
  std::string line;
  char buf[40];
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", x[i]);
    if (i) line += ' ';
    line += buf;
  }
  line += '\n';
  return line;
}

/// Parses a single decimal, allowing surrounding whitespace only.
inline double parse_observation(const std::string& line) {
  const char* begin = line.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE) throw EvaluationFailed("external objective: cannot parse '" + line + "'");
  for (const char* p = end; *p; ++p)
    if (!std::isspace(static_cast<unsigned char>(*p)))
      throw EvaluationFailed("external objective: trailing garbage in '" + line + "'");
  if (!std::isfinite(v)) throw EvaluationFailed("external objective: nonfinite value '" + line + "'");
  return v;
}

class ChildProcess {
public:
  explicit ChildProcess(const std::string& command) {
    static std::once_flag sigpipeOnce;
    std::call_once(sigpipeOnce, [] { ::signal(SIGPIPE, SIG_IGN); });
    int toChild[2], fromChild[2];
    if (::pipe2(toChild, O_CLOEXEC) != 0) throw EvaluationFailed("external objective: pipe failed");
    if (::pipe2(fromChild, O_CLOEXEC) != 0) {
      ::close(toChild[0]);
      ::close(toChild[1]);
      throw EvaluationFailed("external objective: pipe failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      for (int fd : {toChild[0], toChild[1], fromChild[0], fromChild[1]}) ::close(fd);
      throw EvaluationFailed("external objective: fork failed");
    }
    if (pid_ == 0) {
      ::dup2(toChild[0], STDIN_FILENO);
      ::dup2(fromChild[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(toChild[0]);
    ::close(fromChild[1]);
    in_ = toChild[1];
    out_ = fromChild[0];
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    close_input();
    if (out_ >= 0) ::close(out_);
    if (pid_ > 0) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
      }
    }
  }

  void write_line(const std::string& line) {
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t w = ::write(in_, line.data() + off, line.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw EvaluationFailed("external objective: write to child failed");
      }
      off += static_cast<std::size_t>(w);
    }
  }

  void close_input() {
    if (in_ >= 0) {
      ::close(in_);
      in_ = -1;
    }
  }

  /// Reads up to the next newline (or EOF) within the deadline.
  std::string read_line(std::chrono::steady_clock::time_point deadline) {
    std::string line;
    for (;;) {
      const auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      if (eof_) {
        if (buffer_.empty()) throw EvaluationFailed("external objective: no output");
        line.swap(buffer_);
        return line;
      }
      const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) throw EvaluationFailed("external objective: timed out");
      pollfd pfd{out_, POLLIN, 0};
      const int r = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) throw EvaluationFailed("external objective: timed out");
      char buf[4096];
      const ssize_t got = ::read(out_, buf, sizeof buf);
      if (got < 0) {
        if (errno == EINTR) continue;
        throw EvaluationFailed("external objective: read failed");
      }
      if (got == 0) eof_ = true;
      else buffer_.append(buf, static_cast<std::size_t>(got));
    }
  }

  /// Waits for exit within the deadline; returns the exit status.
  int wait(std::chrono::steady_clock::time_point deadline) {
    int status = 0;
    for (;;) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        pid_ = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
      }
      if (r < 0 && errno != EINTR) throw EvaluationFailed("external objective: waitpid failed");
      if (std::chrono::steady_clock::now() >= deadline) throw EvaluationFailed("external objective: timed out");
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }

  bool alive() {
    if (pid_ <= 0) return false;
    int status = 0;
    return ::waitpid(pid_, &status, WNOHANG) == 0;
  }

private:
  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  bool eof_ = false;
  std::string buffer_;
};

inline std::chrono::steady_clock::time_point deadline_after(double seconds) {
  return std::chrono::steady_clock::now() +
         std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(seconds));
}

}  // namespace detail

/// One-shot evaluation of x by a fresh child process.
inline double external_objective(const ExternalCommand& cmd, const Vector& x) {
  if (cmd.command.empty()) throw ConfigError("external objective: empty command");
  const auto deadline = detail::deadline_after(cmd.timeoutSeconds);
  detail::ChildProcess child(cmd.command);
  child.write_line(detail::format_decision(x));
  child.close_input();
  const std::string line = child.read_line(deadline);
  const int status = child.wait(deadline);
  if (status != 0) throw EvaluationFailed("external objective: exit status " + std::to_string(status));
  return detail::parse_observation(line);
}

/// Callable objective honoring cmd.persistent. Not thread-safe; use one per run.
class ExternalObjective {
public:
  explicit ExternalObjective(ExternalCommand cmd) : cmd_(std::move(cmd)) {
    if (cmd_.command.empty()) throw ConfigError("external objective: empty command");
  }

  double operator()(const Vector& x) {
    if (!cmd_.persistent) return external_objective(cmd_, x);
    if (!child_ || !child_->alive()) child_ = std::make_unique<detail::ChildProcess>(cmd_.command);
    const auto deadline = detail::deadline_after(cmd_.timeoutSeconds);
    try {
      child_->write_line(detail::format_decision(x));
      return detail::parse_observation(child_->read_line(deadline));
    } catch (...) {
      child_.reset();
      throw;
    }
  }

private:
  ExternalCommand cmd_;
  std::unique_ptr<detail::ChildProcess> child_;
};

}  // namespace kgcp
