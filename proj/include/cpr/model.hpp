#pragma once

// Presents a repair model as a black-box function from ProgramInput to a
// ranked RepairOutput. Transports: in-process, subprocess (stdio NDJSON) and
// HTTP. Responses are cached per (model identity, input, beam).

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "cpr/error.hpp"
#include "cpr/hash.hpp"
#include "cpr/program.hpp"
#include "cpr/protocol.hpp"

namespace cpr {

/// Something that answers repair queries. Implementations need not cache.
class ModelTransport {
 public:
  virtual ~ModelTransport() = default;
  /// Stable identity used in cache keys, e.g. "toy" or "cmd:python3 shim.py".
  virtual std::string identity() const = 0;
  /// Name announced by the model (handshake), or the identity.
  virtual std::string name() const { return identity(); }
  virtual std::size_t max_inflight() const = 0;
  virtual RepairOutput request(const ProgramInput& input, std::size_t beam) = 0;
};

/// Wraps a plain function as a model.
class InProcessTransport final : public ModelTransport {
 public:
  using Fn = std::function<RepairOutput(const ProgramInput&, std::size_t)>;

  InProcessTransport(std::string identity, Fn fn, std::size_t max_inflight = 4)
      : identity_(std::move(identity)), fn_(std::move(fn)), max_inflight_(max_inflight) {}

  std::string identity() const override { return identity_; }
  std::size_t max_inflight() const override { return max_inflight_; }
  RepairOutput request(const ProgramInput& input, std::size_t beam) override {
    return fn_(input, beam);
  }

 private:
  std::string identity_;
  Fn fn_;
  std::size_t max_inflight_;
};

/// Runs `/bin/sh -c command` and speaks protocol v1 over its stdin/stdout.
/// Requests are serialized.
class SubprocessTransport final : public ModelTransport {
 public:
  explicit SubprocessTransport(std::string command,
                               std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : command_(std::move(command)), timeout_(timeout) {
    spawn();
    send_line(protocol::hello_request().dump());
    name_ = protocol::parse_hello(protocol::parse_line(read_line()));
  }

  ~SubprocessTransport() override { shutdown(); }

  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  std::string identity() const override { return "cmd:" + command_; }
  std::string name() const override { return name_; }
  std::size_t max_inflight() const override { return 1; }

  RepairOutput request(const ProgramInput& input, std::size_t beam) override {
    std::lock_guard lock(mu_);
    const std::string id = "q" + std::to_string(++next_id_);
    send_line(protocol::request(id, input, beam).dump());
    return protocol::parse_response(protocol::parse_line(read_line()), id);
  }

  /// Sends a raw line and returns the raw reply; used by conformance tests.
  std::string exchange_raw(const std::string& line) {
    std::lock_guard lock(mu_);
    send_line(line);
    return read_line();
  }

 private:
  void spawn() {
    int in_pipe[2], out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0)
      throw TransportError("pipe creation failed");
    pid_ = fork();
    if (pid_ < 0) throw TransportError("fork failed");
    if (pid_ == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
  }

  std::string exit_diagnostic() {
    if (pid_ <= 0) return "model process not running";
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        if (WIFEXITED(status))
          return "model process exited with status " + std::to_string(WEXITSTATUS(status));
        if (WIFSIGNALED(status))
          return "model process killed by signal " + std::to_string(WTERMSIG(status));
        return "model process ended";
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return "model process closed its output";
  }

  void send_line(const std::string& line) {
    std::string data = line + '\n';
    std::size_t off = 0;
    struct sigaction ignore{}, old{};
    ignore.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &ignore, &old);
    while (off < data.size()) {
      auto n = ::write(to_child_, data.data() + off, data.size() - off);
      if (n <= 0) {
        sigaction(SIGPIPE, &old, nullptr);
        throw TransportError("write to model failed: " + exit_diagnostic());
      }
      off += static_cast<std::size_t>(n);
    }
    sigaction(SIGPIPE, &old, nullptr);
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0)
        throw TimeoutError("no reply from '" + command_ + "' within " +
                           std::to_string(timeout_.count()) + " ms");
      pollfd pfd{from_child_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc == 0) continue;
      char chunk[4096];
      auto n = ::read(from_child_, chunk, sizeof chunk);
      if (n <= 0) throw TransportError("read from model failed: " + exit_diagnostic());
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void shutdown() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 20; ++i) {
        if (waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::string name_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 0;
  std::mutex mu_;
};

/// POSTs protocol-v1 requests to `<base>/v1/repair`.
class HttpTransport final : public ModelTransport {
 public:
  explicit HttpTransport(std::string base_url,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30),
                         std::size_t max_inflight = 4)
      : base_url_(std::move(base_url)), timeout_(timeout), max_inflight_(max_inflight) {
    auto res = client().Get("/v1/hello");
    if (!res) transport_failure(res.error());
    if (res->status != 200)
      throw TransportError("hello returned HTTP " + std::to_string(res->status));
    name_ = protocol::parse_hello(protocol::parse_line(res->body));
  }

  std::string identity() const override { return "http:" + base_url_; }
  std::string name() const override { return name_; }
  std::size_t max_inflight() const override { return max_inflight_; }

  RepairOutput request(const ProgramInput& input, std::size_t beam) override {
    const std::string id = "q" + std::to_string(++next_id_);
    auto res = client().Post("/v1/repair", protocol::request(id, input, beam).dump(),
                             "application/json");
    if (!res) transport_failure(res.error());
    if (res->status != 200)
      throw TransportError("repair returned HTTP " + std::to_string(res->status) + ": " +
                           res->body);
    return protocol::parse_response(protocol::parse_line(res->body), id);
  }

 private:
  httplib::Client client() const {
    httplib::Client c(base_url_);
    const auto sec = static_cast<time_t>(timeout_.count() / 1000);
    const auto usec = static_cast<time_t>((timeout_.count() % 1000) * 1000);
    c.set_connection_timeout(sec, usec);
    c.set_read_timeout(sec, usec);
    c.set_write_timeout(sec, usec);
    return c;
  }

  [[noreturn]] void transport_failure(httplib::Error err) const {
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw TimeoutError("HTTP request to " + base_url_ + " failed: " +
                          httplib::to_string(err));
    throw TransportError("HTTP request to " + base_url_ + " failed: " +
                         httplib::to_string(err));
  }

  std::string base_url_;
  std::chrono::milliseconds timeout_;
  std::size_t max_inflight_;
  std::string name_;
  std::atomic<std::uint64_t> next_id_{0};
};

/// Outcome of one batch element: an output or the error it raised.
struct QueryResult {
  std::optional<RepairOutput> output;
  std::string error;
  ErrorKind error_kind = ErrorKind::transport;

  bool ok() const noexcept { return output.has_value(); }
  const RepairOutput& value() const {
    if (!output) throw Error(error_kind, error);
    return *output;
  }
};

struct CacheOptions {
  std::optional<std::filesystem::path> spill_dir;
};

/// A model behind a transport plus a response cache. Safe for concurrent use.
class ModelHandle {
 public:
  explicit ModelHandle(std::unique_ptr<ModelTransport> transport, CacheOptions cache = {})
      : transport_(std::move(transport)), cache_opts_(std::move(cache)) {
    if (cache_opts_.spill_dir) std::filesystem::create_directories(*cache_opts_.spill_dir);
  }

  std::string identity() const { return transport_->identity(); }
  std::string name() const { return transport_->name(); }
  std::size_t max_inflight() const { return transport_->max_inflight(); }

  /// Number of requests that actually reached the transport.
  std::size_t transport_calls() const noexcept { return transport_calls_.load(); }

  std::string cache_key(const ProgramInput& input, std::size_t beam) const {
    return sha256_hex(identity() + '\n' + input.canonical() + '\n' + std::to_string(beam));
  }

  RepairOutput query(const ProgramInput& input, std::size_t beam) {
    if (beam < 1) throw InvalidConfigError("beam must be at least 1");
    input.validate();
    const auto key = cache_key(input, beam);
    if (auto hit = lookup(key)) return *hit;
    auto out = transport_->request(input, beam);
    ++transport_calls_;
    out.truncate(beam);
    store(key, out);
    return out;
  }

  /// Element i equals query(inputs[i], beam). Duplicate inputs share one
  /// transport call. Errors are reported per element.
  std::vector<QueryResult> query_batch(const std::vector<ProgramInput>& inputs,
                                       std::size_t beam) {
    std::vector<QueryResult> results(inputs.size());
    std::unordered_map<std::string, std::size_t> first_of;
    std::vector<std::size_t> unique;
    std::vector<std::size_t> leader(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto [it, fresh] = first_of.try_emplace(inputs[i].canonical(), i);
      leader[i] = it->second;
      if (fresh) unique.push_back(i);
    }
    auto run = [&](std::size_t i) {
      try {
        results[i].output = query(inputs[i], beam);
      } catch (const Error& e) {
        results[i].error = e.what();
        results[i].error_kind = e.kind();
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    };
    const std::size_t workers = std::min(max_inflight(), unique.size());
    if (workers <= 1) {
      for (auto i : unique) run(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t u; (u = next.fetch_add(1)) < unique.size();) run(unique[u]);
        });
    }
    for (std::size_t i = 0; i < inputs.size(); ++i)
      if (leader[i] != i) results[i] = results[leader[i]];
    return results;
  }

 private:
  std::optional<RepairOutput> lookup(const std::string& key) {
    {
      std::shared_lock lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    if (!cache_opts_.spill_dir) return std::nullopt;
    std::ifstream in(*cache_opts_.spill_dir / (key + ".json"));
    if (!in) return std::nullopt;
    try {
      auto j = nlohmann::json::parse(in);
      auto out = protocol::parse_response(j, key);
      std::unique_lock lock(mu_);
      cache_.emplace(key, out);
      return out;
    } catch (const std::exception&) {
      return std::nullopt;  // corrupt spill entries are ignored
    }
  }

  void store(const std::string& key, const RepairOutput& out) {
    {
      std::unique_lock lock(mu_);
      cache_.insert_or_assign(key, out);
    }
    if (cache_opts_.spill_dir) {
      const auto path = *cache_opts_.spill_dir / (key + ".json");
      const auto tmp = path.string() + ".tmp";
      {
        std::ofstream f(tmp);
        f << protocol::response(key, out).dump();
      }
      std::error_code ec;
      std::filesystem::rename(tmp, path, ec);
    }
  }

  std::unique_ptr<ModelTransport> transport_;
  CacheOptions cache_opts_;
  std::shared_mutex mu_;
  std::unordered_map<std::string, RepairOutput> cache_;
  std::atomic<std::size_t> transport_calls_{0};
};

}  // namespace cpr
