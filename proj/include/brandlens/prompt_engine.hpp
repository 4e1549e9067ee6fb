#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "brandlens/html_extractor.hpp"
#include "brandlens/image.hpp"

namespace brandlens {

enum class InputMode { ScreenshotOnly, HtmlOnly, Both };

inline constexpr InputMode kAllInputModes[] = {InputMode::ScreenshotOnly, InputMode::HtmlOnly,
                                               InputMode::Both};

// "screenshot", "html", "both"
std::string_view to_string(InputMode mode);
std::optional<InputMode> input_mode_from_string(std::string_view text);

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::optional<Screenshot> image_attachment;
};

struct PromptOptions {
  // Appends the step-by-step brand analysis instructions before the common
  // rules. Off by default.
  bool chain_of_thought = false;
};

class ModeInputMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MissingBrand : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Response could not be mapped onto the expected fields.
class ResponseParseError : public std::runtime_error {
 public:
  ResponseParseError(std::vector<std::string> missing_fields, std::string raw_text);

  [[nodiscard]] const std::vector<std::string>& missing_fields() const { return missing_; }
  [[nodiscard]] const std::string& raw_text() const { return raw_; }

 private:
  std::vector<std::string> missing_;
  std::string raw_;
};

inline constexpr std::size_t kMaxListedFields = 10;
inline constexpr std::size_t kMaxEvidenceWords = 300;

struct BrandIdentification {
  std::optional<std::string> brand;  // nullopt encodes "NA"
  bool has_credentials = false;
  bool has_call_to_action = false;
  std::vector<std::string> credential_fields;
  std::vector<std::string> call_to_action_fields;
  double confidence = 0.0;  // [0, 10], two decimals
  std::string supporting_evidence;
  InputMode mode = InputMode::Both;
  std::vector<std::string> warnings;

  friend bool operator==(const BrandIdentification&, const BrandIdentification&) = default;
};

struct DomainVerdict {
  enum class Classification { Genuine, Phishing };
  Classification classification = Classification::Phishing;
  std::string evidence;
  std::optional<std::string> genuine_url;

  friend bool operator==(const DomainVerdict&, const DomainVerdict&) = default;
};

std::string_view to_string(DomainVerdict::Classification c);

// Verbatim template pieces, exposed for golden tests and documentation.
namespace prompt_text {
std::string_view screenshot_instructions();
std::string_view html_instructions();
std::string_view both_instructions();
std::string_view full_response_format();
std::string_view html_response_format();
std::string_view common_rules();
std::string_view chain_of_thought();
std::string_view domain_verifier_instructions();
}  // namespace prompt_text

PromptBundle build_phase1_prompt(InputMode mode, const std::optional<HtmlKeyInfo>& key_info,
                                 const std::optional<Screenshot>& screenshot,
                                 const PromptOptions& options = {});

BrandIdentification parse_phase1_response(std::string_view text, InputMode mode);

// Canonical numbered rendering; parse_phase1_response inverts it.
std::string render_phase1_response(const BrandIdentification& identification);

PromptBundle build_phase2_prompt(std::string_view url, const BrandIdentification& identified);

DomainVerdict parse_phase2_response(std::string_view text);

std::string format_confidence(double confidence);

}  // namespace brandlens
