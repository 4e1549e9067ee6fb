#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "brandlens/crypto.hpp"
#include "brandlens/image.hpp"

namespace brandlens {

enum class GroundTruth { Benign, Phishing };

std::string to_string(GroundTruth truth);
std::optional<GroundTruth> ground_truth_from_string(std::string_view text);

struct SampleLabel {
  GroundTruth truth = GroundTruth::Benign;
  std::optional<std::string> brand;

  friend bool operator==(const SampleLabel&, const SampleLabel&) = default;
};

// One captured page. Immutable after loading.
struct WebpageSnapshot {
  std::string sample_id;
  std::string url;
  std::string html;
  std::optional<Screenshot> screenshot;  // nullopt = not captured
  int http_status = 200;
  std::string captured_at;
  std::string user_agent;
  std::string referrer;
  std::optional<SampleLabel> label;

  friend bool operator==(const WebpageSnapshot&, const WebpageSnapshot&) = default;
};

inline constexpr std::string_view kDefaultUserAgent =
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) "
    "Chrome/116.0.0.0 Safari/537.36";

struct ReferrerPolicy {
  enum class Kind { SelfReferential, Fixed, Empty };
  Kind kind = Kind::SelfReferential;
  std::string fixed_value;

  static ReferrerPolicy self_referential() { return {}; }
  static ReferrerPolicy fixed(std::string value) { return {Kind::Fixed, std::move(value)}; }
  static ReferrerPolicy empty() { return {Kind::Empty, {}}; }

  // Referrer header to send when capturing `url`.
  [[nodiscard]] std::string referrer_for(const std::string& url) const;

  friend bool operator==(const ReferrerPolicy&, const ReferrerPolicy&) = default;
};

// Capture-side anti-cloaking settings. Recorded for provenance only; nothing in
// this project drives a browser.
struct CaptureProfile {
  std::string user_agent{kDefaultUserAgent};
  ReferrerPolicy referrer_policy;
  bool mouse_movement = true;

  friend bool operator==(const CaptureProfile&, const CaptureProfile&) = default;
};

struct DedupKey {
  Sha256Digest url_digest{};
  Sha256Digest html_digest{};

  friend auto operator<=>(const DedupKey&, const DedupKey&) = default;
};

// SHA-256 over the exact URL bytes and the exact HTML bytes. No normalization.
DedupKey dedup_key(const WebpageSnapshot& snapshot);

class SnapshotError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, MalformedMetadata, NonUtf8Html, BadScreenshot, UnreadableRoot };

  SnapshotError(Kind kind, std::string detail);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] const std::string& detail() const { return detail_; }

 private:
  Kind kind_;
  std::string detail_;
};

std::string to_string(SnapshotError::Kind kind);

// Reads sample_id/{metadata.json, page.html, screenshot.png}. The sample id is
// the directory name.
WebpageSnapshot load_snapshot(const std::filesystem::path& dir);

// Writes the on-disk layout read by load_snapshot. Creates `dir` if needed.
void write_snapshot(const std::filesystem::path& dir, const WebpageSnapshot& snapshot);

struct DedupDrop {
  std::string retained;
  std::string dropped;
};

struct LoadFailure {
  std::string sample_id;
  std::string kind;
  std::string message;
};

struct DedupReport {
  std::vector<DedupDrop> drops;
  std::vector<LoadFailure> errors;
};

struct ScanResult {
  std::vector<WebpageSnapshot> snapshots;  // lexicographic sample_id order
  DedupReport report;
};

// Loads every sample directory under `root`. Per-sample load failures are
// collected in the report; only an unreadable root throws.
ScanResult scan_dataset(const std::filesystem::path& root);

// {"retained": id, "dropped": id} per line.
void write_dedup_report_jsonl(std::ostream& out, const DedupReport& report);

}  // namespace brandlens
