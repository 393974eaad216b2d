#include "hallucheck/http_backends.hpp"

#include <chrono>
#include <cstdlib>

#include "hallucheck/errors.hpp"
#include "hallucheck/http_util.hpp"

namespace hallucheck::provider {

namespace {

std::string env_or(const std::string& given, const char* var) {
  if (!given.empty()) return given;
  if (const char* v = std::getenv(var); v && *v) return v;
  throw ConfigError(std::string("missing API key: set ") + var);
}

class OpenAIBackend final : public Backend {
public:
  explicit OpenAIBackend(RemoteConfig cfg)
      : endpoint_(http::parse_base_url(cfg.base_url.empty() ? "https://api.openai.com" : cfg.base_url)),
        key_(env_or(cfg.api_key, "HALLUCHECK_OPENAI_KEY")),
        timeout_(cfg.timeout_seconds) {}

  std::string name() const override { return "openai"; }

  ChatResponse send(const ChatRequest& request) override {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : request.messages) msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    const nlohmann::json body = {
        {"model", request.model_id},
        {"messages", msgs},
        {"temperature", request.params.temperature},
        {"top_p", request.params.top_p},
        {"max_tokens", request.params.max_tokens},
        {"frequency_penalty", request.params.frequency_penalty},
        {"presence_penalty", request.params.presence_penalty},
    };
    const auto started = std::chrono::steady_clock::now();
    const auto reply = http::post_json(endpoint_, endpoint_.prefix + "/v1/chat/completions", body,
                                       {{"Authorization", "Bearer " + key_}}, timeout_);
    ChatResponse out;
    try {
      const auto& choice = reply.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      if (content.is_null()) throw ProviderRefusal("openai returned a null message");
      out.content = content.get<std::string>();
      out.provider_meta["finish_reason"] = choice.value("finish_reason", std::string());
      if (reply.contains("usage")) {
        out.provider_meta["prompt_tokens"] = std::to_string(reply["usage"].value("prompt_tokens", 0));
        out.provider_meta["completion_tokens"] = std::to_string(reply["usage"].value("completion_tokens", 0));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProviderRefusal(std::string("unexpected openai reply shape: ") + e.what());
    }
    out.provider_meta["latency_ms"] = std::to_string(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count());
    return out;
  }

private:
  http::Endpoint endpoint_;
  std::string key_;
  int timeout_;
};

class GeminiBackend final : public Backend {
public:
  explicit GeminiBackend(RemoteConfig cfg)
      : endpoint_(http::parse_base_url(cfg.base_url.empty() ? "https://generativelanguage.googleapis.com"
                                                             : cfg.base_url)),
        key_(env_or(cfg.api_key, "HALLUCHECK_GEMINI_KEY")),
        timeout_(cfg.timeout_seconds) {}

  std::string name() const override { return "gemini"; }

  ChatResponse send(const ChatRequest& request) override {
    nlohmann::json contents = nlohmann::json::array();
    nlohmann::json system_parts = nlohmann::json::array();
    for (const auto& m : request.messages) {
      if (m.role == Role::system) {
        system_parts.push_back({{"text", m.content}});
      } else {
        contents.push_back({{"role", m.role == Role::user ? "user" : "model"},
                            {"parts", nlohmann::json::array({{{"text", m.content}}})}});
      }
    }
    nlohmann::json body = {
        {"contents", contents},
        {"generationConfig",
         {{"temperature", request.params.temperature},
          {"topP", request.params.top_p},
          {"maxOutputTokens", request.params.max_tokens},
          {"frequencyPenalty", request.params.frequency_penalty},
          {"presencePenalty", request.params.presence_penalty}}},
    };
    if (!system_parts.empty()) body["systemInstruction"] = {{"parts", system_parts}};
    const auto started = std::chrono::steady_clock::now();
    const auto reply =
        http::post_json(endpoint_, endpoint_.prefix + "/v1beta/models/" + request.model_id + ":generateContent",
                        body, {{"x-goog-api-key", key_}}, timeout_);
    ChatResponse out;
    try {
      if (!reply.contains("candidates") || reply["candidates"].empty()) {
        throw ProviderRefusal("gemini returned no candidates");
      }
      const auto& cand = reply["candidates"][0];
      for (const auto& part : cand.at("content").value("parts", nlohmann::json::array())) {
        out.content += part.value("text", std::string());
      }
      out.provider_meta["finish_reason"] = cand.value("finishReason", std::string());
      if (reply.contains("usageMetadata")) {
        out.provider_meta["prompt_tokens"] = std::to_string(reply["usageMetadata"].value("promptTokenCount", 0));
        out.provider_meta["completion_tokens"] =
            std::to_string(reply["usageMetadata"].value("candidatesTokenCount", 0));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProviderRefusal(std::string("unexpected gemini reply shape: ") + e.what());
    }
    out.provider_meta["latency_ms"] = std::to_string(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count());
    return out;
  }

private:
  http::Endpoint endpoint_;
  std::string key_;
  int timeout_;
};

}  // namespace

std::unique_ptr<Backend> make_openai_backend(RemoteConfig config) {
  return std::make_unique<OpenAIBackend>(std::move(config));
}

std::unique_ptr<Backend> make_gemini_backend(RemoteConfig config) {
  return std::make_unique<GeminiBackend>(std::move(config));
}

}  // namespace hallucheck::provider
