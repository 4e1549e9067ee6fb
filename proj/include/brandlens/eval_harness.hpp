#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "brandlens/detection_pipeline.hpp"
#include "brandlens/snapshot_store.hpp"

namespace brandlens {

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class KeyMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientModels : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Symmetric, transitive brand equivalences supplied by the evaluator.
class BrandAliases {
 public:
  void add(std::string_view a, std::string_view b);
  [[nodiscard]] bool equivalent(std::string_view a, std::string_view b) const;
  [[nodiscard]] bool empty() const { return group_of_.empty(); }

 private:
  std::map<std::string, std::size_t> group_of_;
  std::size_t next_group_ = 0;
};

// Case, punctuation and whitespace insensitive, plus aliases.
bool brand_match(std::string_view identified, std::string_view truth_brand,
                 const BrandAliases& aliases = {});

struct EvalRecord {
  std::string sample_id;
  GroundTruth truth = GroundTruth::Benign;
  std::optional<std::string> truth_brand;
  std::string model;
  InputMode mode = InputMode::Both;
  VerdictOutcome predicted = VerdictOutcome::Error;
  std::optional<bool> brand_correct;  // absent for Invalid and Error
};

// Joins verdicts with labels. Verdicts for unlabeled samples are skipped and
// their ids returned through `unlabeled` when given.
std::vector<EvalRecord> make_eval_records(const std::vector<PhishingVerdict>& verdicts,
                                          const std::map<std::string, SampleLabel>& labels,
                                          const BrandAliases& aliases = {},
                                          std::vector<std::string>* unlabeled = nullptr);

struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ConfusionMetrics {
  ConfusionCounts counts;
  // nullopt marks an undefined value (zero denominator).
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

// Positive class is Phishing; every other prediction counts as negative.
ConfusionMetrics confusion_metrics(const std::vector<EvalRecord>& records);

enum class EffectCategory {
  NegativeSS,
  NegativeHTML,
  RelyingOnSS,
  RelyingOnHTML,
  Conflict,
  Synergy,
  AllCorrect,
  AllWrong,
};

inline constexpr std::array<EffectCategory, 8> kAllEffectCategories = {
    EffectCategory::NegativeSS,    EffectCategory::NegativeHTML, EffectCategory::RelyingOnSS,
    EffectCategory::RelyingOnHTML, EffectCategory::Conflict,     EffectCategory::Synergy,
    EffectCategory::AllCorrect,    EffectCategory::AllWrong};

std::string_view to_string(EffectCategory category);

EffectCategory categorize_input_effect(bool ss_correct, bool html_correct, bool both_correct);

struct EffectTally {
  std::map<EffectCategory, long> counts;  // all eight present
  long keyed_samples = 0;                 // samples with all three modes
  long incomplete_samples = 0;
};

// Per model. brand_correct absent counts as incorrect.
std::map<std::string, EffectTally> effect_categories(const std::vector<EvalRecord>& records);

struct WinCount {
  long wins = 0;
  long keys = 0;
  [[nodiscard]] std::optional<double> percent() const {
    if (keys == 0) return std::nullopt;
    return 100.0 * static_cast<double>(wins) / static_cast<double>(keys);
  }
};

// model -> truth class -> wins over (sample, mode) keys.
using ExclusiveWins = std::map<std::string, std::map<GroundTruth, WinCount>>;

ExclusiveWins exclusive_wins(const std::vector<EvalRecord>& records);

struct TokenStats {
  long min = 0;
  double q1 = 0, median = 0, q3 = 0;
  long max = 0;
  double mean = 0;
  std::vector<long> outliers;  // ascending
  std::size_t count = 0;
};

// Linear-interpolation quartiles; outliers are values above q3 + 1.5 * IQR.
TokenStats token_stats(const std::vector<long>& values);
TokenStats token_stats(const std::vector<TokenUsage>& usages);

nlohmann::ordered_json to_json(const ConfusionMetrics& m);
nlohmann::ordered_json to_json(const TokenStats& s);

// Labels from a dataset directory (metadata.json of each sample) or a JSON
// file {"<sample_id>": {"class": "phishing", "brand": "..."}}.
std::map<std::string, SampleLabel> load_labels(const std::filesystem::path& path);

// Aliases file: JSON array of name groups, e.g. [["Facebook", "Meta"]].
BrandAliases load_aliases(const std::filesystem::path& path);

struct EvalReport {
  nlohmann::ordered_json json;
  std::string metrics_csv;
  std::string effects_csv;
  std::string wins_csv;
  std::string tokens_csv;
};

EvalReport build_report(const std::vector<PhishingVerdict>& verdicts,
                        const std::map<std::string, SampleLabel>& labels,
                        const BrandAliases& aliases = {});

// Token statistics per (model, mode); the body of the `cost` command.
nlohmann::ordered_json cost_report(const std::vector<PhishingVerdict>& verdicts);

}  // namespace brandlens
