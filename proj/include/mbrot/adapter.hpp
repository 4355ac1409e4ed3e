#pragma once

// Client side of the metric-adapter protocol.
//
//   HTTP:  POST /v1/score  {"pairs": [{"hyp": s, "ref": s}, ...], "metric": s}
//          -> 200 {"scores": [x, ...]}
//   stdio: the same request object on one line of the child's stdin, the
//          response object on one line of its stdout.

#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "mbrot/error.hpp"
#include "mbrot/sentence_utility.hpp"

namespace mbrot {

struct AdapterOptions {
  double timeout_seconds = 30.0;
  int retries = 2;
  std::size_t batch_size = 64;
};

inline nlohmann::json make_score_request(std::span<const TextPair> pairs,
                                         std::string_view metric) {
  nlohmann::json body;
  body["metric"] = std::string(metric);
  auto& arr = body["pairs"] = nlohmann::json::array();
  for (const auto& p : pairs) arr.push_back({{"hyp", p.hyp}, {"ref", p.ref}});
  return body;
}

/// Validates a response body against the request size and the [0, 1] range
/// contract, returning the scores in request order.
inline std::vector<double> parse_score_response(std::string_view text,
                                                std::size_t expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::AdapterUnavailable,
                std::string("malformed adapter response: ") + e.what());
  }
  if (j.contains("error"))
    throw Error(ErrorKind::AdapterUnavailable,
                "adapter reported an error: " + j["error"].dump());
  if (!j.contains("scores") || !j["scores"].is_array())
    throw Error(ErrorKind::AdapterUnavailable, "adapter response has no scores");
  const auto& arr = j["scores"];
  if (arr.size() != expected)
    throw Error(ErrorKind::AdapterUnavailable,
                "adapter returned " + std::to_string(arr.size()) +
                    " scores for " + std::to_string(expected) + " pairs");
  std::vector<double> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw Error(ErrorKind::AdapterRangeViolation, "score is not a number", i);
    double x = arr[i].get<double>();
    if (!std::isfinite(x) || x < 0.0 || x > 1.0)
      throw Error(ErrorKind::AdapterRangeViolation,
                  "score " + std::to_string(x) + " outside [0, 1]", i);
    out.push_back(x);
  }
  return out;
}

/// Moves one request body to the adapter and returns the raw response body.
class AdapterTransport {
 public:
  virtual ~AdapterTransport() = default;
  virtual std::string exchange(const std::string& request) = 0;
  virtual std::string describe() const = 0;
};

class HttpAdapterTransport final : public AdapterTransport {
 public:
  HttpAdapterTransport(std::string base_url, AdapterOptions options)
      : base_url_(std::move(base_url)), options_(options) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  }

  std::string exchange(const std::string& request) override {
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      httplib::Client client(base_url_);
      auto timeout = std::chrono::duration<double>(options_.timeout_seconds);
      client.set_connection_timeout(
          std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(
          std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_write_timeout(
          std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      auto res = client.Post("/v1/score", request, "application/json");
      if (!res) {
        last_failure = "connection failed: " + httplib::to_string(res.error());
      } else if (res->status == 200) {
        return res->body;
      } else {
        last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body;
        if (res->status >= 400 && res->status < 500) break;
      }
      if (attempt < options_.retries)
        std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
    }
    throw Error(ErrorKind::AdapterUnavailable,
                "adapter at " + base_url_ + " unavailable (" + last_failure + ")");
  }

  std::string describe() const override { return "http:" + base_url_; }

 private:
  std::string base_url_;
  AdapterOptions options_;
};

/// Runs the adapter as a child process (`/bin/sh -c command`) and talks to
/// it line by line. Requests are serialized; one child serves all callers.
class StdioAdapterTransport final : public AdapterTransport {
 public:
  StdioAdapterTransport(std::string command, AdapterOptions options)
      : command_(std::move(command)), options_(options) {
    spawn();
  }

  StdioAdapterTransport(const StdioAdapterTransport&) = delete;
  StdioAdapterTransport& operator=(const StdioAdapterTransport&) = delete;

  ~StdioAdapterTransport() override { shutdown(); }

  std::string exchange(const std::string& request) override {
    std::lock_guard lock(mutex_);
    std::string line = request;
    line.erase(std::remove(line.begin(), line.end(), '\n'), line.end());
    line += '\n';
    std::string last_failure;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      if (pid_ <= 0) spawn();
      if (write_all(line) && read_line(last_failure)) {
        std::string out = std::move(pending_line_);
        pending_line_.clear();
        return out;
      }
      if (last_failure.empty()) last_failure = "write to adapter failed";
      shutdown();
    }
    throw Error(ErrorKind::AdapterUnavailable,
                "stdio adapter '" + command_ + "' unavailable (" + last_failure +
                    ")");
  }

  std::string describe() const override { return "stdio:" + command_; }

 private:
  void spawn() {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw spawn_error();
    if (pipe(from_child) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw spawn_error();
    }
    pid_t pid = fork();
    if (pid < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]})
        close(fd);
      throw spawn_error();
    }
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]})
        close(fd);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    pid_ = pid;
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    buffer_.clear();
    // A dead child must surface as a failed write, not kill the engine.
    signal(SIGPIPE, SIG_IGN);
  }

  Error spawn_error() const {
    return Error(ErrorKind::AdapterUnavailable,
                 "cannot start adapter '" + command_ + "': " + std::strerror(errno));
  }

  void shutdown() {
    if (write_fd_ >= 0) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    write_fd_ = read_fd_ = -1;
    if (pid_ > 0) {
      int status = 0;
      pid_t done = 0;
      for (int i = 0; i < 50 && done == 0; ++i) {
        done = waitpid(pid_, &status, WNOHANG);
        if (done == 0) std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      if (done == 0) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
      }
    }
    pid_ = -1;
  }

  bool write_all(const std::string& data) {
    std::size_t written = 0;
    while (written < data.size()) {
      ssize_t n = write(write_fd_, data.data() + written, data.size() - written);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      written += static_cast<std::size_t>(n);
    }
    return true;
  }

  bool read_line(std::string& failure) {
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(options_.timeout_seconds));
    while (true) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        pending_line_ = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return true;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        failure = "timed out waiting for a response";
        return false;
      }
      pollfd pfd{read_fd_, POLLIN, 0};
      int ready = poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0 && errno == EINTR) continue;
      if (ready <= 0) continue;
      char chunk[4096];
      ssize_t n = read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        failure = "adapter closed its output";
        return false;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string command_;
  AdapterOptions options_;
  std::mutex mutex_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
  std::string pending_line_;
};

/// A sentence utility computed by an external adapter process or service.
/// Not assumed symmetric unless the caller says so.
class ExternalAdapterUtility final : public SentenceUtility {
 public:
  ExternalAdapterUtility(std::shared_ptr<AdapterTransport> transport,
                         std::string metric, AdapterOptions options = {},
                         bool symmetric = false)
      : transport_(std::move(transport)),
        metric_(std::move(metric)),
        options_(options),
        symmetric_(symmetric) {
    if (options_.batch_size == 0)
      throw Error(ErrorKind::Config, "adapter batch size must be >= 1");
  }

  UtilityKind kind() const override { return UtilityKind::ExternalAdapter; }
  std::string id() const override { return "adapter:" + metric_; }
  bool symmetric() const override { return symmetric_; }

  double score(std::string_view hyp, std::string_view ref) const override {
    TextPair pair{std::string(hyp), std::string(ref)};
    return score_batch(std::span<const TextPair>(&pair, 1)).front();
  }

  std::vector<double> score_batch(std::span<const TextPair> pairs) const override {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (std::size_t begin = 0; begin < pairs.size(); begin += options_.batch_size) {
      auto chunk = pairs.subspan(begin, std::min(options_.batch_size,
                                                 pairs.size() - begin));
      auto body = make_score_request(chunk, metric_).dump();
      std::vector<double> scores;
      try {
        scores = parse_score_response(transport_->exchange(body), chunk.size());
      } catch (const Error& e) {
        throw e.index() ? e.at(begin + *e.index()) : e;
      }
      out.insert(out.end(), scores.begin(), scores.end());
    }
    return out;
  }

  const AdapterTransport& transport() const { return *transport_; }

 private:
  std::shared_ptr<AdapterTransport> transport_;
  std::string metric_;
  AdapterOptions options_;
  bool symmetric_;
};

}  // namespace mbrot
