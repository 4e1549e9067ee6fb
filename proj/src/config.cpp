#include "brandlens/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace brandlens {

using nlohmann::json;

std::string_view to_string(TransportKind kind) {
  switch (kind) {
    case TransportKind::Live:
      return "live";
    case TransportKind::Record:
      return "record";
    case TransportKind::Replay:
      return "replay";
  }
  return "replay";
}

std::optional<TransportKind> transport_kind_from_string(std::string_view text) {
  for (auto k : {TransportKind::Live, TransportKind::Record, TransportKind::Replay}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::vector<std::string> string_list(const json& j, const std::string& key) {
  if (!j.at(key).is_array()) throw ConfigError("config key '" + key + "' must be an array");
  return get_as<std::vector<std::string>>(j, key);
}

ProviderConfig provider_from_json(const std::string& name, const json& j) {
  if (!j.is_object()) throw ConfigError("provider '" + name + "' must be an object");
  reject_unknown(j, {"kind", "base_url", "safety_markers", "too_large_markers", "timeout_seconds",
                     "image_token_formulas"},
                 "provider '" + name + "'");
  ProviderConfig p;
  p.name = name;
  auto kind = provider_kind_from_string(j.value("kind", name));
  if (!kind) throw ConfigError("provider '" + name + "' has an unknown kind");
  p.kind = *kind;
  if (!j.contains("base_url")) throw ConfigError("provider '" + name + "' needs base_url");
  p.base_url = get_as<std::string>(j, "base_url");
  if (j.contains("safety_markers")) p.markers.safety = string_list(j, "safety_markers");
  if (j.contains("too_large_markers")) p.markers.too_large = string_list(j, "too_large_markers");
  if (j.contains("timeout_seconds")) p.timeout_seconds = get_as<int>(j, "timeout_seconds");
  if (j.contains("image_token_formulas")) {
    for (const auto& [model, f] : j["image_token_formulas"].items()) {
      ImageTokenFormula formula;
      formula.base_tokens = f.value("base", 0L);
      formula.tokens_per_tile = f.value("per_tile", 0L);
      formula.tile_size = f.value("tile", 512);
      if (formula.tile_size <= 0 || formula.base_tokens < 0 || formula.tokens_per_tile < 0) {
        throw ConfigError("bad image token formula for " + name + "/" + model);
      }
      p.image_formulas[model] = formula;
    }
  }
  return p;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"dataset_root", "modes", "models", "verifier", "transport", "fixture_path",
                  "filter_thresholds", "max_in_flight", "output_path", "providers",
                  "rate_limit_per_second", "max_output_tokens", "temperature", "html_budget_chars",
                  "chain_of_thought", "retry_safety_once", "baseline_aliases"},
                 "config");
  RunConfig c;
  if (j.contains("dataset_root")) c.dataset_root = get_as<std::string>(j, "dataset_root");
  if (j.contains("modes")) {
    c.modes.clear();
    for (const auto& m : string_list(j, "modes")) {
      auto mode = input_mode_from_string(m);
      if (!mode) throw ConfigError("unknown mode '" + m + "'");
      c.modes.push_back(*mode);
    }
  }
  if (j.contains("models")) c.models = string_list(j, "models");
  if (j.contains("verifier")) {
    auto v = verifier_from_string(get_as<std::string>(j, "verifier"));
    if (!v) throw ConfigError("verifier must be llm or baseline");
    c.verifier = *v;
  }
  if (j.contains("transport")) {
    auto t = transport_kind_from_string(get_as<std::string>(j, "transport"));
    if (!t) throw ConfigError("transport must be live, record or replay");
    c.transport = *t;
  }
  if (j.contains("fixture_path")) c.fixture_path = get_as<std::string>(j, "fixture_path");
  if (j.contains("filter_thresholds")) {
    try {
      c.thresholds = thresholds_from_json(j);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("filter_thresholds: ") + e.what());
    }
  }
  if (j.contains("max_in_flight")) {
    long n = get_as<long>(j, "max_in_flight");
    if (n < 1) throw ConfigError("max_in_flight must be positive");
    c.max_in_flight = static_cast<std::size_t>(n);
  }
  if (j.contains("output_path")) c.output_path = get_as<std::string>(j, "output_path");
  if (j.contains("providers")) {
    if (!j["providers"].is_object()) throw ConfigError("providers must be an object");
    for (const auto& [name, p] : j["providers"].items()) c.providers.push_back(provider_from_json(name, p));
  }
  if (j.contains("rate_limit_per_second")) c.rate_limit_per_second = get_as<int>(j, "rate_limit_per_second");
  if (j.contains("max_output_tokens")) c.max_output_tokens = get_as<int>(j, "max_output_tokens");
  if (j.contains("temperature")) c.temperature = get_as<double>(j, "temperature");
  if (j.contains("html_budget_chars")) c.html_budget_chars = get_as<std::size_t>(j, "html_budget_chars");
  if (j.contains("chain_of_thought")) c.chain_of_thought = get_as<bool>(j, "chain_of_thought");
  if (j.contains("retry_safety_once")) c.retry_safety_once = get_as<bool>(j, "retry_safety_once");
  if (j.contains("baseline_aliases")) {
    for (const auto& [brand, names] : j["baseline_aliases"].items()) {
      if (!names.is_array()) throw ConfigError("baseline_aliases values must be arrays");
      auto& dst = c.baseline_aliases[normalize_brand(brand)];
      for (const auto& n : names) dst.push_back(normalize_brand(n.get<std::string>()));
    }
  }
  if (c.rate_limit_per_second < 0) throw ConfigError("rate_limit_per_second must be >= 0");
  if (c.max_output_tokens < 1) throw ConfigError("max_output_tokens must be positive");
  if (c.temperature < 0) throw ConfigError("temperature must be >= 0");
  if (c.html_budget_chars < kMinHtmlBudgetChars) {
    throw ConfigError("html_budget_chars must be at least " + std::to_string(kMinHtmlBudgetChars));
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  return run_config_from_json(j);
}

std::vector<std::string> missing_credentials(const RunConfig& config) {
  std::set<std::string> needed;
  for (const auto& m : config.models) {
    try {
      needed.insert(split_model_id(m).first);
    } catch (const std::invalid_argument&) {
    }
  }
  std::vector<std::string> missing;
  for (const auto& provider : needed) {
    auto var = api_key_env_var(provider);
    const char* v = std::getenv(var.c_str());
    if (!v || !*v) missing.push_back(var);
  }
  return missing;
}

void validate_run_config(const RunConfig& config) {
  for (const auto& m : config.models) {
    try {
      split_model_id(m);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (config.transport == TransportKind::Replay) {
    if (config.fixture_path.empty()) throw ConfigError("replay transport needs a fixture path");
    if (!std::filesystem::is_regular_file(config.fixture_path)) {
      throw ConfigError("fixture file not found: " + config.fixture_path.string());
    }
    return;
  }
  if (config.transport == TransportKind::Record && config.fixture_path.empty()) {
    throw ConfigError("record transport needs a fixture path");
  }
  auto missing = missing_credentials(config);
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw ConfigError("missing credentials: " + names);
  }
  for (const auto& m : config.models) {
    auto provider = split_model_id(m).first;
    bool found = false;
    for (const auto& p : config.providers) found = found || p.name == provider;
    if (!found) throw ConfigError("no provider configured for model " + m);
  }
}

PipelineConfig pipeline_config(const RunConfig& config) {
  PipelineConfig p;
  p.verifier = config.verifier;
  p.html_budget_chars = config.html_budget_chars;
  p.prompt.chain_of_thought = config.chain_of_thought;
  p.filter.thresholds = config.thresholds;
  p.max_output_tokens = config.max_output_tokens;
  p.temperature = config.temperature;
  p.aliases = config.baseline_aliases;
  return p;
}

ImageTokenEstimator image_token_estimator(const RunConfig& config) {
  ImageTokenEstimator est;
  for (const auto& p : config.providers) {
    for (const auto& [model, f] : p.image_formulas) est.register_formula(p.name + "/" + model, f);
  }
  return est;
}

}  // namespace brandlens
