#include "brandlens/provider_transport.hpp"

#include <cctype>
#include <cstdlib>

#include <httplib.h>

#include "brandlens/crypto.hpp"
#include "brandlens/text_util.hpp"

namespace brandlens {

using nlohmann::json;

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::OpenAI:
      return "openai";
    case ProviderKind::Anthropic:
      return "anthropic";
    case ProviderKind::Gemini:
      return "gemini";
  }
  return "unknown";
}

std::optional<ProviderKind> provider_kind_from_string(std::string_view text) {
  for (auto k : {ProviderKind::OpenAI, ProviderKind::Anthropic, ProviderKind::Gemini}) {
    if (iequals(to_string(k), text)) return k;
  }
  return std::nullopt;
}

std::string api_key_env_var(std::string_view provider_name) {
  std::string var = "BRANDLENS_API_KEY_";
  for (char c : provider_name) {
    var += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : '_';
  }
  return var;
}

std::pair<std::string, std::string> split_model_id(std::string_view model_id) {
  auto slash = model_id.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == model_id.size()) {
    throw std::invalid_argument("model id must look like <provider>/<model>: " + std::string(model_id));
  }
  return {std::string(model_id.substr(0, slash)), std::string(model_id.substr(slash + 1))};
}

HttpCall build_provider_call(ProviderKind kind, const LlmRequest& request, std::string_view model,
                             std::string_view api_key) {
  HttpCall call;
  json body;
  std::string image_b64 = request.image ? base64_encode(request.image->bytes) : std::string();
  switch (kind) {
    case ProviderKind::OpenAI: {
      call.path = "/v1/chat/completions";
      call.headers = {{"Authorization", "Bearer " + std::string(api_key)}};
      json content = json::array({{{"type", "text"}, {"text", request.user_text}}});
      if (request.image) {
        content.push_back({{"type", "image_url"},
                           {"image_url",
                            {{"url", "data:" + request.image->media_type + ";base64," + image_b64}}}});
      }
      body = {{"model", model},
              {"max_tokens", request.max_output_tokens},
              {"temperature", request.temperature},
              {"messages",
               {{{"role", "system"}, {"content", request.system_text}},
                {{"role", "user"}, {"content", content}}}}};
      break;
    }
    case ProviderKind::Anthropic: {
      call.path = "/v1/messages";
      call.headers = {{"x-api-key", std::string(api_key)}, {"anthropic-version", "2023-06-01"}};
      json content = json::array();
      if (request.image) {
        content.push_back({{"type", "image"},
                           {"source",
                            {{"type", "base64"},
                             {"media_type", request.image->media_type},
                             {"data", image_b64}}}});
      }
      content.push_back({{"type", "text"}, {"text", request.user_text}});
      body = {{"model", model},
              {"max_tokens", request.max_output_tokens},
              {"temperature", request.temperature},
              {"system", request.system_text},
              {"messages", {{{"role", "user"}, {"content", content}}}}};
      break;
    }
    case ProviderKind::Gemini: {
      call.path = "/v1beta/models/" + std::string(model) + ":generateContent";
      call.headers = {{"x-goog-api-key", std::string(api_key)}};
      json parts = json::array({{{"text", request.user_text}}});
      if (request.image) {
        parts.push_back(
            {{"inline_data", {{"mime_type", request.image->media_type}, {"data", image_b64}}}});
      }
      body = {{"system_instruction", {{"parts", {{{"text", request.system_text}}}}}},
              {"contents", {{{"role", "user"}, {"parts", parts}}}},
              {"generationConfig",
               {{"maxOutputTokens", request.max_output_tokens},
                {"temperature", request.temperature}}}};
      break;
    }
  }
  call.body = body.dump();
  return call;
}

namespace {

long int_at(const json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && it->is_number_integer() ? it->get<long>() : 0;
}

}  // namespace

Completion parse_provider_response(ProviderKind kind, int http_status, std::string_view body,
                                   const ErrorMarkers& markers) {
  if (http_status < 200 || http_status > 299) throw classify_error(body, http_status, markers);
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw classify_error(body, http_status, markers);

  Completion c;
  bool found = false;
  switch (kind) {
    case ProviderKind::OpenAI: {
      if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& choice = j["choices"][0];
        if (choice.value("finish_reason", "") == "content_filter") {
          throw GatewayError(GatewayErrorKind::SafetyFilter, "finish_reason content_filter");
        }
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string()) {
          c.text = choice["message"]["content"].get<std::string>();
          found = true;
        }
      }
      if (j.contains("usage")) {
        c.usage = {int_at(j["usage"], "prompt_tokens"), int_at(j["usage"], "completion_tokens")};
      }
      break;
    }
    case ProviderKind::Anthropic: {
      if (j.contains("content") && j["content"].is_array()) {
        for (const auto& block : j["content"]) {
          if (block.value("type", "") == "text" && block.contains("text")) {
            c.text += block["text"].get<std::string>();
            found = true;
          }
        }
      }
      if (j.value("stop_reason", "") == "refusal") {
        throw GatewayError(GatewayErrorKind::SafetyFilter, "stop_reason refusal");
      }
      if (j.contains("usage")) {
        c.usage = {int_at(j["usage"], "input_tokens"), int_at(j["usage"], "output_tokens")};
      }
      break;
    }
    case ProviderKind::Gemini: {
      if (j.contains("promptFeedback") && j["promptFeedback"].contains("blockReason")) {
        throw GatewayError(GatewayErrorKind::SafetyFilter,
                           "blockReason " + j["promptFeedback"]["blockReason"].dump());
      }
      if (j.contains("candidates") && j["candidates"].is_array() && !j["candidates"].empty()) {
        const auto& cand = j["candidates"][0];
        auto reason = cand.value("finishReason", "");
        if (reason == "SAFETY" || reason == "PROHIBITED_CONTENT" || reason == "BLOCKLIST") {
          throw GatewayError(GatewayErrorKind::SafetyFilter, "finishReason " + reason);
        }
        if (cand.contains("content") && cand["content"].contains("parts")) {
          for (const auto& part : cand["content"]["parts"]) {
            if (part.contains("text") && part["text"].is_string()) {
              c.text += part["text"].get<std::string>();
              found = true;
            }
          }
        }
      }
      if (j.contains("usageMetadata")) {
        c.usage = {int_at(j["usageMetadata"], "promptTokenCount"),
                   int_at(j["usageMetadata"], "candidatesTokenCount")};
      }
      break;
    }
  }
  if (!found) throw classify_error(body, http_status, markers);
  return c;
}

HttpProviderTransport::HttpProviderTransport(std::vector<ProviderConfig> providers) {
  for (auto& p : providers) {
    std::string var = api_key_env_var(p.name);
    const char* key = std::getenv(var.c_str());
    if (!key || !*key) throw std::runtime_error("missing credential environment variable " + var);
    std::string name = p.name;
    providers_[name] = Provider{std::move(p), key};
  }
}

Completion HttpProviderTransport::send(const LlmRequest& request) {
  auto [provider_name, model] = split_model_id(request.model_id);
  auto it = providers_.find(provider_name);
  if (it == providers_.end()) {
    throw GatewayError(GatewayErrorKind::Transport, "no provider configured for " + provider_name);
  }
  const auto& provider = it->second;
  HttpCall call = build_provider_call(provider.config.kind, request, model, provider.api_key);

  httplib::Client client(provider.config.base_url);
  client.set_connection_timeout(provider.config.timeout_seconds, 0);
  client.set_read_timeout(provider.config.timeout_seconds, 0);
  client.set_write_timeout(provider.config.timeout_seconds, 0);
  httplib::Headers headers;
  for (const auto& [k, v] : call.headers) headers.emplace(k, v);

  auto res = client.Post(call.path, headers, call.body, "application/json");
  if (!res) {
    throw GatewayError(GatewayErrorKind::Transport, httplib::to_string(res.error()));
  }
  return parse_provider_response(provider.config.kind, res->status, res->body,
                                 provider.config.markers);
}

}  // namespace brandlens
