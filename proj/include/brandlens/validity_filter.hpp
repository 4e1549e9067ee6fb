#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "brandlens/image.hpp"
#include "brandlens/snapshot_store.hpp"

namespace brandlens {

// Defaults are placeholders; run calibrate_thresholds on labeled data before
// trusting them. `calibrated` records whether that happened.
struct FilterThresholds {
  double min_gray_stddev = 5.0;
  long min_edge_count = 500;
  long min_ocr_chars = 20;
  bool calibrated = false;

  friend bool operator==(const FilterThresholds&, const FilterThresholds&) = default;
};

nlohmann::ordered_json to_json(const FilterThresholds& t);
// Reads the object stored under "filter_thresholds" (or the object itself).
FilterThresholds thresholds_from_json(const nlohmann::json& j);

struct CheckOutcome {
  enum class Status { Pass, Fail, Skipped };
  Status status = Status::Pass;
  std::string reason;

  static CheckOutcome pass() { return {}; }
  static CheckOutcome fail(std::string reason) { return {Status::Fail, std::move(reason)}; }
  static CheckOutcome skipped(std::string reason) { return {Status::Skipped, std::move(reason)}; }

  [[nodiscard]] bool failed() const { return status == Status::Fail; }

  friend bool operator==(const CheckOutcome&, const CheckOutcome&) = default;
};

std::string to_string(CheckOutcome::Status status);

enum class ValidityCheck {
  Completeness,
  HttpStatus,
  SemanticBlank,
  PixelStddev,
  EdgeCount,
  OcrLength,
  VerificationPage,
};
inline constexpr std::size_t kValidityCheckCount = 7;
inline constexpr std::array<ValidityCheck, kValidityCheckCount> kAllValidityChecks = {
    ValidityCheck::Completeness, ValidityCheck::HttpStatus,    ValidityCheck::SemanticBlank,
    ValidityCheck::PixelStddev,  ValidityCheck::EdgeCount,     ValidityCheck::OcrLength,
    ValidityCheck::VerificationPage};

std::string_view to_string(ValidityCheck check);

struct ValidityReport {
  std::string sample_id;
  std::array<CheckOutcome, kValidityCheckCount> outcomes;  // indexed by ValidityCheck
  bool valid = true;
  bool calibrated = false;

  [[nodiscard]] const CheckOutcome& outcome(ValidityCheck c) const {
    return outcomes[static_cast<std::size_t>(c)];
  }
  [[nodiscard]] std::vector<ValidityCheck> failed_checks() const;

  friend bool operator==(const ValidityReport&, const ValidityReport&) = default;
};

nlohmann::ordered_json to_json(const ValidityReport& report);

// Text recognition backend. Implementations must tolerate concurrent calls or
// be wrapped by the caller.
class OcrProvider {
 public:
  virtual ~OcrProvider() = default;
  virtual std::string recognize(const Image& image) = 0;
};

class OcrBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& default_verification_keywords() {
  static const std::vector<std::string> kKeywords = {
      "verify you are human", "checking your browser", "captcha", "cloudflare",
      "attention required"};
  return kKeywords;
}

CheckOutcome check_http_status(const WebpageSnapshot& snapshot);

// Population standard deviation of BT.601 luma, on the 0-255 scale.
double grayscale_stddev(const Image& image);

// Canny edge pixels: 5x5 Gaussian (sigma 1.4), Sobel, L2 magnitude,
// non-maximum suppression, hysteresis 50/150. Requires width, height >= 2.
long edge_count(const Image& image);

// Code points of the recognized text after whitespace collapse. Throws
// OcrBackendError when the provider fails.
std::size_t ocr_text_length(const Image& image, OcrProvider& ocr);

CheckOutcome check_ocr_length(const Image& image, OcrProvider* ocr, const FilterThresholds& t);
CheckOutcome check_semantic_blank(std::string_view html);
CheckOutcome check_verification_page(
    std::string_view html, const std::optional<std::string>& screenshot_ocr_text,
    const std::vector<std::string>& keywords = default_verification_keywords());

struct FilterOptions {
  FilterThresholds thresholds;
  OcrProvider* ocr = nullptr;
  std::vector<std::string> verification_keywords = default_verification_keywords();
};

ValidityReport classify_validity(const WebpageSnapshot& snapshot, const FilterOptions& options);
ValidityReport classify_validity(const WebpageSnapshot& snapshot, const FilterThresholds& thresholds,
                                 OcrProvider* ocr = nullptr);

struct LabeledSnapshot {
  WebpageSnapshot snapshot;
  bool is_blank = false;
};

struct CalibrationResult {
  FilterThresholds thresholds;
  std::vector<std::string> warnings;
};

class InsufficientExamples : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Per metric: midpoint between the largest blank value and the smallest
// non-blank value when the classes separate; otherwise the default is kept and
// a warning names the metric.
CalibrationResult calibrate_thresholds(std::span<const LabeledSnapshot> examples,
                                       OcrProvider* ocr = nullptr,
                                       const FilterThresholds& defaults = {});

}  // namespace brandlens
