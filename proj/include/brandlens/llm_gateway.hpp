#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace brandlens {

struct ImageData {
  std::string bytes;
  std::string media_type = "image/png";
};

struct LlmRequest {
  std::string model_id;  // "<provider>/<model>"
  std::string system_text;
  std::string user_text;
  std::optional<ImageData> image;
  int max_output_tokens = 1024;
  double temperature = 0.0;
};

struct TokenUsage {
  long input_tokens = 0;
  long output_tokens = 0;

  [[nodiscard]] long total() const { return input_tokens + output_tokens; }

  TokenUsage& operator+=(const TokenUsage& other) {
    input_tokens += other.input_tokens;
    output_tokens += other.output_tokens;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) { return a += b; }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

nlohmann::ordered_json to_json(const TokenUsage& usage);

enum class GatewayErrorKind { SafetyFilter, RateLimited, ServerError, InputTooLarge, Transport, Malformed };

std::string_view to_string(GatewayErrorKind kind);
std::optional<GatewayErrorKind> gateway_error_kind_from_string(std::string_view text);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorKind kind, std::string detail);

  [[nodiscard]] GatewayErrorKind kind() const { return kind_; }
  [[nodiscard]] const std::string& detail() const { return detail_; }
  // True exactly for RateLimited, ServerError and Transport.
  [[nodiscard]] bool retryable() const;

 private:
  GatewayErrorKind kind_;
  std::string detail_;
};

struct Completion {
  std::string text;
  TokenUsage usage;
};

// Sorted-key compact JSON of every request field; the image is represented by
// the SHA-256 of its bytes.
std::string canonical_request(const LlmRequest& request);
std::string request_hash(const LlmRequest& request);

class Transport {
 public:
  virtual ~Transport() = default;
  // Returns the provider text and usage or throws GatewayError.
  virtual Completion send(const LlmRequest& request) = 0;
};

struct ErrorMarkers {
  std::vector<std::string> safety;
  std::vector<std::string> too_large;
};

const ErrorMarkers& default_error_markers();

// Maps a failed provider exchange onto the error taxonomy.
GatewayError classify_error(std::string_view provider_payload, int http_status,
                            const ErrorMarkers& markers = default_error_markers());

// ---------------------------------------------------------------------------
// Image token estimation

struct ImageTokenFormula {
  long base_tokens = 0;
  long tokens_per_tile = 0;
  int tile_size = 512;
};

class UnknownModelFormula : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ImageTokenEstimator {
 public:
  void register_formula(std::string model_id, ImageTokenFormula formula);
  [[nodiscard]] long estimate(int width, int height, const std::string& model_id) const;
  [[nodiscard]] bool knows(const std::string& model_id) const;

 private:
  std::map<std::string, ImageTokenFormula, std::less<>> formulas_;
};

// base + per_tile * ceil(w / tile) * ceil(h / tile)
long estimate_image_tokens(int width, int height, const std::string& model_id,
                           const ImageTokenEstimator& estimator);

// ---------------------------------------------------------------------------
// Record / replay

class FixtureError : public std::runtime_error {
 public:
  enum class Kind { Miss, Corrupt };
  FixtureError(Kind kind, std::string detail);
  [[nodiscard]] Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct FixtureRecord {
  std::string hash;
  std::string text;
  TokenUsage usage;
  std::optional<GatewayErrorKind> error_kind;
  std::string error_detail;
};

nlohmann::ordered_json to_json(const FixtureRecord& record);
// Throws FixtureError{Corrupt} on any malformed line.
std::vector<FixtureRecord> load_fixture_file(const std::filesystem::path& path);

// Serves recorded exchanges by request hash. Several records under one hash
// are replayed in order; the last one repeats once the sequence is exhausted.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& fixture_path);
  explicit ReplayTransport(const std::vector<FixtureRecord>& records);

  Completion send(const LlmRequest& request) override;

  [[nodiscard]] std::size_t calls_served() const;
  [[nodiscard]] TokenUsage usage_served() const;

 private:
  struct Entry {
    std::vector<FixtureRecord> records;
    std::size_t next = 0;
  };
  mutable std::mutex mu_;
  std::map<std::string, Entry, std::less<>> entries_;
  std::size_t served_ = 0;
  TokenUsage usage_;
};

// Forwards to `inner` and appends every exchange, including errors, to the
// fixture file.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(Transport& inner, const std::filesystem::path& fixture_path);

  Completion send(const LlmRequest& request) override;
  [[nodiscard]] std::size_t records_written() const;

 private:
  Transport& inner_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::size_t written_ = 0;
};

// ---------------------------------------------------------------------------
// Clock, rate limiting, retry

class Clock {
 public:
  using Duration = std::chrono::nanoseconds;
  using TimePoint = std::chrono::time_point<std::chrono::steady_clock, Duration>;

  virtual ~Clock() = default;
  virtual TimePoint now() = 0;
  virtual void sleep_for(Duration d) = 0;
};

class SystemClock : public Clock {
 public:
  TimePoint now() override;
  void sleep_for(Duration d) override;
};

// Time advances only through sleep_for. Thread-safe.
class VirtualClock : public Clock {
 public:
  TimePoint now() override;
  void sleep_for(Duration d) override;
  void advance(Duration d) { sleep_for(d); }
  [[nodiscard]] Duration total_slept() const;

 private:
  mutable std::mutex mu_;
  Duration elapsed_{0};
  Duration slept_{0};
};

// At most `per_second` dispatches in any one-second window.
class RateLimiter {
 public:
  RateLimiter(int per_second, Clock& clock);
  void acquire();

 private:
  int per_second_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::TimePoint> recent_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  bool full_jitter = true;
  // One extra attempt after a safety-filter refusal.
  bool retry_safety_once = false;

  // Upper bound of the delay before attempt `attempt + 1` (attempt is 1-based).
  [[nodiscard]] std::chrono::nanoseconds max_delay_after(int attempt) const;
};

struct GatewayOptions {
  RetryPolicy retry;
  int rate_limit_per_second = 0;  // 0 disables limiting
  Clock* clock = nullptr;         // defaults to a SystemClock
  std::uint64_t jitter_seed = 0x5eed;
};

struct GatewayStats {
  std::size_t requests = 0;   // complete() calls
  std::size_t attempts = 0;   // transport sends
  std::size_t successes = 0;
  TokenUsage usage;           // summed over successful completions
};

class Gateway {
 public:
  explicit Gateway(Transport& transport, GatewayOptions options = {});

  // Safe for concurrent use. Throws GatewayError once retries are exhausted or
  // immediately for non-retryable kinds.
  Completion complete(const LlmRequest& request);

  [[nodiscard]] GatewayStats stats() const;

 private:
  Transport& transport_;
  GatewayOptions options_;
  SystemClock system_clock_;
  Clock* clock_;
  std::optional<RateLimiter> limiter_;
  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  GatewayStats stats_;

  void backoff(int attempt);
};

}  // namespace brandlens
