#include "strel/http.hpp"

#include <regex>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "strel/error.hpp"

namespace strel::http {

Response post_json(const std::string& url, const std::string& body,
                   std::chrono::milliseconds timeout) {
  static const std::regex pattern(R"(^(https?://[^/?#]+)([^#]*)$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) throw ConfigError("unsupported URL '" + url + "'");
  const std::string origin = m[1].str();
  std::string path = m[2].str();
  if (path.empty() || path[0] == '?') path.insert(path.begin(), '/');

  httplib::Client client(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  Response out;
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    out.transport_error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

}  // namespace strel::http
