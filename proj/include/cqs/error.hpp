#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cqs {

enum class ErrorKind {
  invalid_argument,
  invalid_tag,
  parse,
  diff_parse,
  unknown_file,
  unknown_backend,
  gateway_timeout,
  gateway_transport,
  gateway_status,
  retries_exhausted,
  malformed_verdict,
  unscored_review,
  contract,
  io,
  not_found,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library is a cqs::Error carrying a kind, so
// callers (CLI exit codes, HTTP status mapping) can branch without string
// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class GatewayError : public Error {
 public:
  GatewayError(ErrorKind kind, std::string backend_id, const std::string& message,
               int http_status = 0)
      : Error(kind, "[" + backend_id + "] " + message),
        backend_id_(std::move(backend_id)),
        http_status_(http_status) {}

  const std::string& backend_id() const noexcept { return backend_id_; }
  int http_status() const noexcept { return http_status_; }

 private:
  std::string backend_id_;
  int http_status_;
};

}  // namespace cqs
