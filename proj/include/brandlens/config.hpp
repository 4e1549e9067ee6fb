#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "brandlens/detection_pipeline.hpp"
#include "brandlens/provider_transport.hpp"

namespace brandlens {

enum class TransportKind { Live, Record, Replay };

std::string_view to_string(TransportKind kind);
std::optional<TransportKind> transport_kind_from_string(std::string_view text);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::filesystem::path dataset_root;
  std::vector<InputMode> modes{InputMode::Both};
  std::vector<std::string> models;
  Verifier verifier = Verifier::Llm;
  TransportKind transport = TransportKind::Replay;
  std::filesystem::path fixture_path;
  FilterThresholds thresholds;
  std::size_t max_in_flight = 4;
  std::filesystem::path output_path;

  std::vector<ProviderConfig> providers;
  int rate_limit_per_second = 0;
  int max_output_tokens = 1024;
  double temperature = 0.0;
  std::size_t html_budget_chars = kDefaultHtmlBudgetChars;
  bool chain_of_thought = false;
  bool retry_safety_once = false;
  AliasMap baseline_aliases;
};

// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Env var names still unset for the providers used by `models`.
std::vector<std::string> missing_credentials(const RunConfig& config);

// Startup checks: replay needs an existing fixture file; live and record need
// every credential. Throws ConfigError naming what is missing.
void validate_run_config(const RunConfig& config);

PipelineConfig pipeline_config(const RunConfig& config);
ImageTokenEstimator image_token_estimator(const RunConfig& config);

}  // namespace brandlens
