#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "brandlens/llm_gateway.hpp"

namespace brandlens {

enum class ProviderKind { OpenAI, Anthropic, Gemini };

std::string_view to_string(ProviderKind kind);
std::optional<ProviderKind> provider_kind_from_string(std::string_view text);

struct ProviderConfig {
  std::string name;  // prefix of model ids, e.g. "openai" in "openai/gpt-4-turbo"
  ProviderKind kind = ProviderKind::OpenAI;
  std::string base_url;
  ErrorMarkers markers = default_error_markers();
  int timeout_seconds = 120;
  std::map<std::string, ImageTokenFormula> image_formulas;  // keyed by bare model name
};

// BRANDLENS_API_KEY_<NAME>, NAME upper-cased with non-alphanumerics as '_'.
std::string api_key_env_var(std::string_view provider_name);

// Splits "provider/model"; throws std::invalid_argument without a '/'.
std::pair<std::string, std::string> split_model_id(std::string_view model_id);

struct HttpCall {
  std::string path;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

// Provider wire formats, exposed for tests.
HttpCall build_provider_call(ProviderKind kind, const LlmRequest& request, std::string_view model,
                             std::string_view api_key);
Completion parse_provider_response(ProviderKind kind, int http_status, std::string_view body,
                                   const ErrorMarkers& markers);

// Live HTTPS transport. Keys are read from the environment at construction.
class HttpProviderTransport : public Transport {
 public:
  explicit HttpProviderTransport(std::vector<ProviderConfig> providers);

  Completion send(const LlmRequest& request) override;

 private:
  struct Provider {
    ProviderConfig config;
    std::string api_key;
  };
  std::map<std::string, Provider, std::less<>> providers_;
};

}  // namespace brandlens
