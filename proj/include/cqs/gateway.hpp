#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cqs/diff.hpp"
#include "cqs/error.hpp"

namespace cqs {

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 2048;
  std::optional<std::uint64_t> sample_seed;
};

void validate_request(const ChatRequest& req);

enum class BackendKind { remote, scripted, heuristic };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view s);

struct BackendConfig {
  std::string backend_id;
  BackendKind kind = BackendKind::heuristic;
  std::optional<std::string> endpoint;  // required for remote
  std::string model;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  int max_in_flight = 4;
  std::chrono::milliseconds backoff_base{500};
  std::string script_path;  // scripted: JSONL of canned replies
};

void validate_config(const BackendConfig& cfg);

struct Completion {
  std::string text;
  std::string backend_id;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const ChatRequest& req) = 0;
};

// Canned replies looked up by a hash of (system, user, temperature, seed),
// falling back to per-seed replies, prompt-substring rules, then a default.
class ScriptedBackend final : public Backend {
 public:
  struct Failure {
    ErrorKind kind = ErrorKind::gateway_transport;
    std::string message = "scripted failure";
  };
  using Reply = std::variant<std::string, Failure>;

  explicit ScriptedBackend(std::string backend_id) : backend_id_(std::move(backend_id)) {}

  static std::uint64_t key(const ChatRequest& req);

  void add(const ChatRequest& req, Reply reply) { by_key_[key(req)] = std::move(reply); }
  void add_for_seed(std::uint64_t seed, Reply reply) { by_seed_[seed] = std::move(reply); }
  void add_for_substring(std::string needle, Reply reply) {
    by_substring_.emplace_back(std::move(needle), std::move(reply));
  }
  void set_default(Reply reply) { default_ = std::move(reply); }

  // JSONL rows: {"reply"|"error", and any of "system","user","temperature",
  // "seed" (exact key), "seed" alone, "match" (substring), "default": true}.
  void load_jsonl(std::string_view text);

  Completion complete(const ChatRequest& req) override;

 private:
  std::string backend_id_;
  std::map<std::uint64_t, Reply> by_key_;
  std::map<std::uint64_t, Reply> by_seed_;
  std::vector<std::pair<std::string, Reply>> by_substring_;
  std::optional<Reply> default_;
};

// Deterministic offline stand-in for every prompt the pipeline issues.
class HeuristicBackend final : public Backend {
 public:
  explicit HeuristicBackend(std::string backend_id) : backend_id_(std::move(backend_id)) {}
  Completion complete(const ChatRequest& req) override;

 private:
  std::string backend_id_;
};

// Minimal JSON chat-completions client over HTTP(S).
class RemoteBackend final : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit RemoteBackend(BackendConfig cfg, Sleeper sleeper = {});
  Completion complete(const ChatRequest& req) override;

  static std::string request_body(const BackendConfig& cfg, const ChatRequest& req);
  static std::string parse_response(std::string_view body);

 private:
  std::chrono::milliseconds backoff_delay(int attempt);

  BackendConfig cfg_;
  Sleeper sleeper_;
  std::mutex rng_mu_;
  std::uint64_t rng_state_;
};

// Registry of backends by id. Enforces max_in_flight per backend.
class Gateway {
 public:
  using InFlightObserver = std::function<void(const std::string& backend_id, int in_flight)>;

  Gateway() = default;
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Builds the backend from its config (scripted backends load script_path).
  void add(const BackendConfig& cfg);
  void add(const BackendConfig& cfg, std::shared_ptr<Backend> backend);

  bool has(std::string_view backend_id) const;
  const BackendConfig& config(std::string_view backend_id) const;
  std::vector<std::string> backend_ids() const;

  void set_in_flight_observer(InFlightObserver obs) { observer_ = std::move(obs); }

  // Throws GatewayError(unknown_backend) for an unregistered id.
  Completion complete(const ChatRequest& req, std::string_view backend_id) const;

 private:
  struct Slot {
    BackendConfig cfg;
    std::shared_ptr<Backend> backend;
    mutable std::mutex mu;
    mutable std::condition_variable cv;
    mutable int in_flight = 0;
  };
  std::map<std::string, std::unique_ptr<Slot>, std::less<>> slots_;
  InFlightObserver observer_;
};

// Gateway with a single heuristic backend registered as "heuristic".
std::unique_ptr<Gateway> make_offline_gateway();

// Collector-format output of the offline reviewer for a diff.
std::string heuristic_review(const Diff& diff);
std::vector<Issue> heuristic_issues(const std::vector<NumberedFile>& files);

}  // namespace cqs
