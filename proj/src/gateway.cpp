#include "cqs/gateway.hpp"

#include <cstdio>
#include <cstdlib>
#include <regex>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace cqs {

void validate_request(const ChatRequest& req) {
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) {
    throw Error(ErrorKind::invalid_argument, "temperature must be within [0, 2]");
  }
  if (req.system.empty() || req.user.empty()) {
    throw Error(ErrorKind::invalid_argument, "system and user prompts must be non-empty");
  }
  if (req.max_tokens <= 0) throw Error(ErrorKind::invalid_argument, "max_tokens must be > 0");
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::remote: return "remote";
    case BackendKind::scripted: return "scripted";
    case BackendKind::heuristic: return "heuristic";
  }
  return "heuristic";
}

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "remote") return BackendKind::remote;
  if (s == "scripted") return BackendKind::scripted;
  if (s == "heuristic") return BackendKind::heuristic;
  throw Error(ErrorKind::invalid_argument, "unknown backend kind: " + std::string(s));
}

void validate_config(const BackendConfig& cfg) {
  if (cfg.backend_id.empty()) throw Error(ErrorKind::invalid_argument, "backend_id is empty");
  if (cfg.kind == BackendKind::remote && (!cfg.endpoint || cfg.endpoint->empty())) {
    throw Error(ErrorKind::invalid_argument, "remote backend '" + cfg.backend_id + "' needs an endpoint");
  }
  if (cfg.max_retries < 0) throw Error(ErrorKind::invalid_argument, "max_retries must be >= 0");
  if (cfg.max_in_flight < 1) throw Error(ErrorKind::invalid_argument, "max_in_flight must be >= 1");
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t ScriptedBackend::key(const ChatRequest& req) {
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.17g", req.temperature);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, req.system);
  h = fnv1a(h, std::string_view("\0", 1));
  h = fnv1a(h, req.user);
  h = fnv1a(h, std::string_view("\0", 1));
  h = fnv1a(h, temp);
  h = fnv1a(h, std::string_view("\0", 1));
  h = fnv1a(h, req.sample_seed ? std::to_string(*req.sample_seed) : std::string("-"));
  return h;
}

void ScriptedBackend::load_jsonl(std::string_view text) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    Json row;
    try {
      row = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::parse, "script line " + std::to_string(line_no) + ": " + e.what());
    }
    Reply reply;
    if (row.contains("error")) {
      Failure f;
      f.message = row["error"].get<std::string>();
      if (row.value("kind", std::string{}) == "timeout") f.kind = ErrorKind::gateway_timeout;
      if (row.value("kind", std::string{}) == "status") f.kind = ErrorKind::gateway_status;
      reply = f;
    } else if (row.contains("reply")) {
      reply = row["reply"].get<std::string>();
    } else {
      throw Error(ErrorKind::parse,
                  "script line " + std::to_string(line_no) + " needs 'reply' or 'error'");
    }
    if (row.value("default", false)) {
      set_default(std::move(reply));
    } else if (row.contains("match")) {
      add_for_substring(row["match"].get<std::string>(), std::move(reply));
    } else if (row.contains("user")) {
      ChatRequest req;
      req.system = row.value("system", std::string{});
      req.user = row["user"].get<std::string>();
      req.temperature = row.value("temperature", 0.0);
      if (row.contains("seed")) req.sample_seed = row["seed"].get<std::uint64_t>();
      add(req, std::move(reply));
    } else if (row.contains("seed")) {
      add_for_seed(row["seed"].get<std::uint64_t>(), std::move(reply));
    } else {
      throw Error(ErrorKind::parse, "script line " + std::to_string(line_no) + " has no selector");
    }
  }
}

Completion ScriptedBackend::complete(const ChatRequest& req) {
  const Reply* hit = nullptr;
  if (auto it = by_key_.find(key(req)); it != by_key_.end()) {
    hit = &it->second;
  } else if (req.sample_seed) {
    if (auto s = by_seed_.find(*req.sample_seed); s != by_seed_.end()) hit = &s->second;
  }
  if (hit == nullptr) {
    for (const auto& [needle, reply] : by_substring_) {
      if (req.user.find(needle) != std::string::npos || req.system.find(needle) != std::string::npos) {
        hit = &reply;
        break;
      }
    }
  }
  if (hit == nullptr && default_) hit = &*default_;
  if (hit == nullptr) {
    throw GatewayError(ErrorKind::gateway_transport, backend_id_, "no scripted reply for request");
  }
  if (const auto* f = std::get_if<Failure>(hit)) {
    throw GatewayError(f->kind, backend_id_, f->message);
  }
  return {std::get<std::string>(*hit), backend_id_};
}

// ---------------------------------------------------------------------------

RemoteBackend::RemoteBackend(BackendConfig cfg, Sleeper sleeper)
    : cfg_(std::move(cfg)), sleeper_(std::move(sleeper)) {
  validate_config(cfg_);
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  rng_state_ = fnv1a(0xcbf29ce484222325ULL, cfg_.backend_id);
}

std::string RemoteBackend::request_body(const BackendConfig& cfg, const ChatRequest& req) {
  Json body;
  if (!cfg.model.empty()) body["model"] = cfg.model;
  body["messages"] = Json::array({Json{{"role", "system"}, {"content", req.system}},
                                  Json{{"role", "user"}, {"content", req.user}}});
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  if (req.sample_seed) body["seed"] = *req.sample_seed;
  return body.dump();
}

std::string RemoteBackend::parse_response(std::string_view body) {
  const Json j = Json::parse(body);
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& c = j["choices"][0];
    if (c.contains("message") && c["message"].contains("content")) {
      return c["message"]["content"].get<std::string>();
    }
    if (c.contains("text")) return c["text"].get<std::string>();
  }
  if (j.contains("text")) return j["text"].get<std::string>();
  throw std::runtime_error("no choices[0].message.content in response");
}

std::chrono::milliseconds RemoteBackend::backoff_delay(int attempt) {
  const std::int64_t cap = cfg_.backoff_base.count() << std::min(attempt, 20);
  if (cap <= 0) return std::chrono::milliseconds{0};
  std::lock_guard lock(rng_mu_);
  return std::chrono::milliseconds{static_cast<std::int64_t>(splitmix64(rng_state_) %
                                                             static_cast<std::uint64_t>(cap + 1))};
}

Completion RemoteBackend::complete(const ChatRequest& req) {
  static const std::regex url_re(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  const std::string endpoint = *cfg_.endpoint;
  if (!std::regex_match(endpoint, m, url_re)) {
    throw GatewayError(ErrorKind::gateway_transport, cfg_.backend_id, "bad endpoint URL " + endpoint);
  }
  const std::string scheme = m[1].str();
  const std::string host = m[2].str();
  const int port = m[3].matched ? std::stoi(m[3].str()) : (scheme == "https" ? 443 : 80);
  const std::string path = m[4].matched ? m[4].str() : "/v1/chat/completions";

  httplib::Client client(scheme + "://" + host + ":" + std::to_string(port));
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (const char* token = std::getenv("CQS_LLM_TOKEN"); token != nullptr && *token != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const std::string body = request_body(cfg_, req);

  std::optional<GatewayError> last;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(backoff_delay(attempt - 1));
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      const auto elapsed = std::chrono::steady_clock::now() - started;
      const bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                             (res.error() == httplib::Error::Read && elapsed >= cfg_.timeout);
      last.emplace(timed_out ? ErrorKind::gateway_timeout : ErrorKind::gateway_transport,
                   cfg_.backend_id, httplib::to_string(res.error()));
      continue;
    }
    const int status = res->status;
    if (status >= 200 && status < 300) {
      try {
        return {parse_response(res->body), cfg_.backend_id};
      } catch (const std::exception& e) {
        throw GatewayError(ErrorKind::gateway_status, cfg_.backend_id,
                           std::string("malformed response body: ") + e.what(), status);
      }
    }
    GatewayError err(ErrorKind::gateway_status, cfg_.backend_id,
                     "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200), status);
    if (status != 429 && status < 500) throw err;
    last.emplace(err);
  }
  if (cfg_.max_retries == 0) throw *last;
  throw GatewayError(ErrorKind::retries_exhausted, cfg_.backend_id,
                     "gave up after " + std::to_string(cfg_.max_retries + 1) +
                         " attempts; last error: " + last->what(),
                     last->http_status());
}

// ---------------------------------------------------------------------------

void Gateway::add(const BackendConfig& cfg) {
  validate_config(cfg);
  std::shared_ptr<Backend> backend;
  switch (cfg.kind) {
    case BackendKind::remote:
      backend = std::make_shared<RemoteBackend>(cfg);
      break;
    case BackendKind::heuristic:
      backend = std::make_shared<HeuristicBackend>(cfg.backend_id);
      break;
    case BackendKind::scripted: {
      auto scripted = std::make_shared<ScriptedBackend>(cfg.backend_id);
      if (!cfg.script_path.empty()) {
        std::FILE* f = std::fopen(cfg.script_path.c_str(), "rb");
        if (f == nullptr) throw Error(ErrorKind::io, "cannot open script " + cfg.script_path);
        std::string text;
        char buf[8192];
        std::size_t n = 0;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
        std::fclose(f);
        scripted->load_jsonl(text);
      }
      backend = scripted;
      break;
    }
  }
  add(cfg, std::move(backend));
}

void Gateway::add(const BackendConfig& cfg, std::shared_ptr<Backend> backend) {
  validate_config(cfg);
  auto slot = std::make_unique<Slot>();
  slot->cfg = cfg;
  slot->backend = std::move(backend);
  slots_[cfg.backend_id] = std::move(slot);
}

bool Gateway::has(std::string_view backend_id) const { return slots_.find(backend_id) != slots_.end(); }

const BackendConfig& Gateway::config(std::string_view backend_id) const {
  auto it = slots_.find(backend_id);
  if (it == slots_.end()) {
    throw GatewayError(ErrorKind::unknown_backend, std::string(backend_id), "unknown backend id");
  }
  return it->second->cfg;
}

std::vector<std::string> Gateway::backend_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : slots_) ids.push_back(id);
  return ids;
}

Completion Gateway::complete(const ChatRequest& req, std::string_view backend_id) const {
  auto it = slots_.find(backend_id);
  if (it == slots_.end()) {
    throw GatewayError(ErrorKind::unknown_backend, std::string(backend_id), "unknown backend id");
  }
  validate_request(req);
  Slot& slot = *it->second;
  {
    std::unique_lock lock(slot.mu);
    slot.cv.wait(lock, [&] { return slot.in_flight < slot.cfg.max_in_flight; });
    ++slot.in_flight;
    if (observer_) observer_(slot.cfg.backend_id, slot.in_flight);
  }
  struct Release {
    Slot& s;
    const InFlightObserver& obs;
    ~Release() {
      {
        std::lock_guard lock(s.mu);
        --s.in_flight;
        if (obs) obs(s.cfg.backend_id, s.in_flight);
      }
      s.cv.notify_one();
    }
  } release{slot, observer_};
  return slot.backend->complete(req);
}

std::unique_ptr<Gateway> make_offline_gateway() {
  auto gw = std::make_unique<Gateway>();
  BackendConfig cfg;
  cfg.backend_id = "heuristic";
  cfg.kind = BackendKind::heuristic;
  cfg.max_in_flight = 64;
  gw->add(cfg);
  return gw;
}

}  // namespace cqs
