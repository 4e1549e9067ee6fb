#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "brandlens/html_extractor.hpp"
#include "brandlens/llm_gateway.hpp"
#include "brandlens/prompt_engine.hpp"
#include "brandlens/public_suffix.hpp"
#include "brandlens/snapshot_store.hpp"
#include "brandlens/validity_filter.hpp"

namespace brandlens {

enum class VerdictOutcome { Phishing, Genuine, Unknown, Invalid, Error };

std::string_view to_string(VerdictOutcome outcome);
std::optional<VerdictOutcome> verdict_outcome_from_string(std::string_view text);

enum class Verifier { Llm, Baseline };

std::string_view to_string(Verifier verifier);
std::optional<Verifier> verifier_from_string(std::string_view text);

struct VerdictError {
  GatewayErrorKind kind = GatewayErrorKind::Malformed;
  std::string detail;

  friend bool operator==(const VerdictError&, const VerdictError&) = default;
};

struct PhishingVerdict {
  std::string sample_id;
  std::string url;
  InputMode mode = InputMode::Both;
  std::string model;
  VerdictOutcome outcome = VerdictOutcome::Error;
  std::optional<std::string> identified_brand;
  std::optional<double> confidence;
  std::optional<std::string> phase1_evidence;
  std::optional<std::string> phase2_evidence;
  std::optional<std::string> genuine_url;
  TokenUsage usage;
  std::optional<VerdictError> error;
  // Kept in memory for callers; not part of the results file.
  std::optional<ValidityReport> validity;
};

nlohmann::ordered_json to_json(const PhishingVerdict& verdict);
// Throws std::invalid_argument on a record that is not a verdict.
PhishingVerdict verdict_from_json(const nlohmann::json& j);

class InvalidUrl : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// eTLD+1 of the URL's host. IP literals, and hosts that are themselves a
// public suffix, are returned as-is.
std::string registrable_domain(std::string_view url,
                               const PublicSuffixList& psl = PublicSuffixList::bundled());

// Lowercase ASCII alphanumerics only.
std::string normalize_brand(std::string_view brand);

// normalized brand -> additional normalized names accepted as a domain match.
using AliasMap = std::map<std::string, std::vector<std::string>>;

DomainVerdict verify_domain_baseline(std::string_view url, const BrandIdentification& identified,
                                     const AliasMap& aliases = {});

struct PipelineConfig {
  Verifier verifier = Verifier::Llm;
  std::size_t html_budget_chars = kDefaultHtmlBudgetChars;
  PromptOptions prompt;
  FilterOptions filter;
  int max_output_tokens = 1024;
  double temperature = 0.0;
  AliasMap aliases;  // ships empty
};

LlmRequest make_llm_request(const std::string& model_id, const PromptBundle& bundle,
                            const PipelineConfig& config);

// Phase-1 request exactly as detect() would send it. Throws ModeInputMismatch
// when the snapshot lacks the inputs the mode needs.
LlmRequest phase1_request(const WebpageSnapshot& snapshot, InputMode mode,
                          const std::string& model_id, const PipelineConfig& config);
LlmRequest phase2_request(const WebpageSnapshot& snapshot, const BrandIdentification& identified,
                          const std::string& model_id, const PipelineConfig& config);

struct Phase1Result {
  BrandIdentification identification;
  TokenUsage usage;
  std::string raw_text;
};

// Throws GatewayError, ResponseParseError (raw text attached) or
// ModeInputMismatch.
Phase1Result identify_brand(const WebpageSnapshot& snapshot, InputMode mode, Gateway& gateway,
                            const std::string& model_id, const PipelineConfig& config);

// Never throws for per-sample failures; they become outcome Error.
PhishingVerdict detect(const WebpageSnapshot& snapshot, InputMode mode, const std::string& model_id,
                       Gateway& gateway, const PipelineConfig& config);

struct BatchOptions {
  std::vector<InputMode> modes;
  std::vector<std::string> models;
  std::filesystem::path output_path;
  bool resume = false;
  std::size_t max_in_flight = 4;
  const std::atomic<bool>* stop = nullptr;  // checked before each task starts
};

struct BatchSummary {
  std::size_t total_tasks = 0;
  std::size_t skipped_existing = 0;
  std::size_t processed = 0;
  bool interrupted = false;
  TokenUsage usage;  // this run only
  std::map<VerdictOutcome, std::size_t> outcome_counts;
};

// Runs every (sample, mode, model) triple and writes one JSONL verdict per
// triple, sorted by (sample_id, mode, model). With resume, triples already in
// the output file are skipped.
BatchSummary detect_batch(const std::vector<WebpageSnapshot>& samples, Gateway& gateway,
                          const PipelineConfig& config, const BatchOptions& options);

// Reads the results file; blank and truncated lines are ignored.
std::vector<PhishingVerdict> read_results(const std::filesystem::path& path);

}  // namespace brandlens
