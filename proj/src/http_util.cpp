#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "hallucheck/http_util.hpp"

#include <httplib.h>

#include "hallucheck/errors.hpp"

namespace hallucheck::http {

Endpoint parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base url needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported url scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    ep.prefix = url.substr(path_start);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  }
  return ep;
}

nlohmann::json post_json(const Endpoint& ep, const std::string& path, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers, int timeout_seconds) {
  httplib::Client cli(ep.scheme_host_port);
  cli.set_connection_timeout(timeout_seconds, 0);
  cli.set_read_timeout(timeout_seconds, 0);
  cli.set_write_timeout(timeout_seconds, 0);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = cli.Post(path, h, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + ep.scheme_host_port + path + " failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 408 || status == 429 || status >= 500) {
    throw TransportError("POST " + path + " returned HTTP " + std::to_string(status));
  }
  if (status == 401 || status == 403) {
    throw ConfigError("POST " + path + " rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 404) throw ConfigError("POST " + path + " not found (unknown model?)");
  if (status < 200 || status >= 300) {
    throw ProviderRefusal("POST " + path + " returned HTTP " + std::to_string(status) + ": " + res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProviderRefusal(std::string("reply is not JSON: ") + e.what());
  }
}

}  // namespace hallucheck::http
