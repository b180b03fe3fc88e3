#pragma once

#include <csignal>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "robopt/objectives.hpp"

namespace robopt {

namespace detail {

/// One long-lived `/bin/sh -c command` child speaking JSON lines over its stdin/stdout.
class Worker {
 public:
  explicit Worker(const std::string& command) {
    int in[2], out[2];
    if (pipe2(in, O_CLOEXEC) != 0 || pipe2(out, O_CLOEXEC) != 0) throw EvaluationError("external: pipe failed");
    pid_ = fork();
    if (pid_ < 0) throw EvaluationError("external: fork failed");
    if (pid_ == 0) {
      dup2(in[0], STDIN_FILENO);
      dup2(out[1], STDOUT_FILENO);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(in[0]);
    close(out[1]);
    to_child_ = in[1];
    from_child_ = out[0];
  }

  Worker(const Worker&) = delete;
  Worker& operator=(const Worker&) = delete;

  ~Worker() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  bool alive() const { return alive_; }

  double call(const Vector& p) {
    nlohmann::json req{{"params", to_std(p)}};
    const std::string line = req.dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t w = write(to_child_, line.data() + off, line.size() - off);
      if (w <= 0) {
        alive_ = false;
        throw EvaluationError("external: command closed its input");
      }
      off += static_cast<std::size_t>(w);
    }
    const std::string reply = read_line();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::parse_error&) {
      throw EvaluationError("external: malformed reply '" + reply + "'");
    }
    if (j.contains("error")) throw EvaluationError("external: " + j["error"].dump());
    if (!j.contains("value") || !j["value"].is_number()) throw EvaluationError("external: reply has no numeric value");
    return j["value"].get<double>();
  }

 private:
  std::string read_line() {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t r = read(from_child_, chunk, sizeof chunk);
      if (r <= 0) {
        alive_ = false;
        throw EvaluationError("external: command exited before replying");
      }
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool alive_ = true;
  std::string buffer_;
};

/// At most `concurrency` children, started lazily and replaced when one dies.
class WorkerPool {
 public:
  WorkerPool(std::string command, std::size_t concurrency)
      : command_(std::move(command)), cap_(std::max<std::size_t>(concurrency, 1)) {
    std::signal(SIGPIPE, SIG_IGN);
  }

  double call(const Vector& p) {
    std::unique_ptr<Worker> w = acquire();
    try {
      const double v = w->call(p);
      release(std::move(w));
      return v;
    } catch (...) {
      release(w->alive() ? std::move(w) : nullptr);
      throw;
    }
  }

 private:
  std::unique_ptr<Worker> acquire() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return !idle_.empty() || started_ < cap_; });
    if (!idle_.empty()) {
      auto w = std::move(idle_.back());
      idle_.pop_back();
      return w;
    }
    ++started_;
    lock.unlock();
    try {
      return std::make_unique<Worker>(command_);
    } catch (...) {
      std::lock_guard g(m_);
      --started_;
      cv_.notify_one();
      throw;
    }
  }

  void release(std::unique_ptr<Worker> w) {
    std::lock_guard g(m_);
    if (w)
      idle_.push_back(std::move(w));
    else
      --started_;
    cv_.notify_one();
  }

  std::string command_;
  std::size_t cap_;
  std::size_t started_ = 0;
  std::vector<std::unique_ptr<Worker>> idle_;
  std::mutex m_;
  std::condition_variable cv_;
};

}  // namespace detail

/// Objective backed by an external executable. Each line written to the command is
/// {"params": [...]}; each line read back is {"value": x} or {"error": "..."}.
inline ObjectiveModel make_external(const std::string& command, BoxDomain domain, std::size_t concurrency = 1,
                                    double lower_bound = 0.0) {
  if (command.empty()) throw ShapeError("external: empty command");
  auto pool = std::make_shared<detail::WorkerPool>(command, concurrency);
  const std::size_t n = domain.dim();
  return {"external", n, std::move(domain), lower_bound, [pool, n](const Vector& p) {
            require_dim(p, n, "external");
            return pool->call(p);
          }};
}

}  // namespace robopt
