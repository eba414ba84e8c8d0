#pragma once

// Minimal JSON-over-HTTP POST used by the remote paraphrase and translation
// clients.

#include <chrono>
#include <optional>
#include <string>

namespace strel::http {

struct Response {
  int status = 0;  // 0 when no response arrived
  std::string body;
  std::string transport_error;  // set when status is 0
};

// `url` is scheme://host[:port][/path][?query]; http and https are accepted.
// Throws ConfigError for an unparseable URL. Transport failures are reported
// in the response, not thrown.
Response post_json(const std::string& url, const std::string& body,
                   std::chrono::milliseconds timeout);

}  // namespace strel::http
