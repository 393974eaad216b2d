#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace hallucheck::http {

struct Endpoint {
  std::string scheme_host_port;  // "https://api.openai.com", "http://127.0.0.1:8080"
  std::string prefix;            // path prefix without trailing slash, may be empty
};

/// Splits "scheme://host[:port][/prefix]". Throws ConfigError on other shapes.
Endpoint parse_base_url(const std::string& url);

/// POSTs a JSON body and parses the JSON reply. Maps failures onto the error
/// families: no connection, 408, 429 and 5xx are TransportError; 401, 403 and 404
/// are ConfigError; other statuses are ProviderRefusal.
nlohmann::json post_json(const Endpoint& ep, const std::string& path, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers, int timeout_seconds);

}  // namespace hallucheck::http
