#pragma once

#include <memory>
#include <string>

#include "hallucheck/provider.hpp"

namespace hallucheck::provider {

/// Endpoint and credential for a remote backend. An empty base_url selects the
/// vendor default; api_key falls back to the documented environment variable.
struct RemoteConfig {
  std::string base_url;
  std::string api_key;
  int timeout_seconds = 120;
};

/// OpenAI-style chat completions (`POST {base}/v1/chat/completions`).
/// Credential: HALLUCHECK_OPENAI_KEY.
std::unique_ptr<Backend> make_openai_backend(RemoteConfig config);

/// Gemini generateContent (`POST {base}/v1beta/models/{model}:generateContent`).
/// Credential: HALLUCHECK_GEMINI_KEY.
std::unique_ptr<Backend> make_gemini_backend(RemoteConfig config);

}  // namespace hallucheck::provider
