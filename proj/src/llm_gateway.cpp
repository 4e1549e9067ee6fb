#include "brandlens/llm_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "brandlens/crypto.hpp"
#include "brandlens/text_util.hpp"

namespace brandlens {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const TokenUsage& usage) {
  ordered_json j;
  j["input_tokens"] = usage.input_tokens;
  j["output_tokens"] = usage.output_tokens;
  j["total"] = usage.total();
  return j;
}

std::string_view to_string(GatewayErrorKind kind) {
  switch (kind) {
    case GatewayErrorKind::SafetyFilter:
      return "safety_filter";
    case GatewayErrorKind::RateLimited:
      return "rate_limited";
    case GatewayErrorKind::ServerError:
      return "server_error";
    case GatewayErrorKind::InputTooLarge:
      return "input_too_large";
    case GatewayErrorKind::Transport:
      return "transport";
    case GatewayErrorKind::Malformed:
      return "malformed";
  }
  return "unknown";
}

std::optional<GatewayErrorKind> gateway_error_kind_from_string(std::string_view text) {
  for (auto k : {GatewayErrorKind::SafetyFilter, GatewayErrorKind::RateLimited,
                 GatewayErrorKind::ServerError, GatewayErrorKind::InputTooLarge,
                 GatewayErrorKind::Transport, GatewayErrorKind::Malformed}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

GatewayError::GatewayError(GatewayErrorKind kind, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      detail_(std::move(detail)) {}

bool GatewayError::retryable() const {
  return kind_ == GatewayErrorKind::RateLimited || kind_ == GatewayErrorKind::ServerError ||
         kind_ == GatewayErrorKind::Transport;
}

std::string canonical_request(const LlmRequest& request) {
  json j;  // std::map-backed: keys serialize sorted
  j["model_id"] = request.model_id;
  j["system_text"] = request.system_text;
  j["user_text"] = request.user_text;
  j["max_output_tokens"] = request.max_output_tokens;
  j["temperature"] = request.temperature;
  if (request.image) {
    j["image"] = {{"media_type", request.image->media_type},
                  {"sha256", sha256_hex(request.image->bytes)}};
  } else {
    j["image"] = nullptr;
  }
  return j.dump();
}

std::string request_hash(const LlmRequest& request) {
  return sha256_hex(canonical_request(request));
}

const ErrorMarkers& default_error_markers() {
  static const ErrorMarkers kMarkers{
      {"blocked", "safety", "content_filter", "content filter", "content_policy",
       "content policy", "harm_category", "responsible ai", "prohibited_content"},
      {"too large", "too long", "context_length_exceeded", "maximum context length",
       "request_too_large", "exceeds the maximum", "too many tokens", "payload too large"}};
  return kMarkers;
}

GatewayError classify_error(std::string_view payload, int http_status, const ErrorMarkers& markers) {
  std::string detail = "http " + std::to_string(http_status) + ": " +
                       std::string(payload.substr(0, std::min<std::size_t>(payload.size(), 300)));
  if (http_status == 429) return {GatewayErrorKind::RateLimited, detail};
  if (http_status >= 500 && http_status <= 599) return {GatewayErrorKind::ServerError, detail};
  for (const auto& m : markers.safety) {
    if (icontains(payload, m)) return {GatewayErrorKind::SafetyFilter, detail};
  }
  if (http_status == 413) return {GatewayErrorKind::InputTooLarge, detail};
  for (const auto& m : markers.too_large) {
    if (icontains(payload, m)) return {GatewayErrorKind::InputTooLarge, detail};
  }
  return {GatewayErrorKind::Malformed, detail};
}

// ---------------------------------------------------------------------------

void ImageTokenEstimator::register_formula(std::string model_id, ImageTokenFormula formula) {
  if (formula.tile_size <= 0) throw std::invalid_argument("tile_size must be positive");
  formulas_[std::move(model_id)] = formula;
}

bool ImageTokenEstimator::knows(const std::string& model_id) const {
  return formulas_.count(model_id) > 0;
}

long ImageTokenEstimator::estimate(int width, int height, const std::string& model_id) const {
  auto it = formulas_.find(model_id);
  if (it == formulas_.end()) {
    throw UnknownModelFormula("no image token formula registered for " + model_id);
  }
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  const auto& f = it->second;
  long tiles_x = (width + f.tile_size - 1) / f.tile_size;
  long tiles_y = (height + f.tile_size - 1) / f.tile_size;
  return f.base_tokens + f.tokens_per_tile * tiles_x * tiles_y;
}

long estimate_image_tokens(int width, int height, const std::string& model_id,
                           const ImageTokenEstimator& estimator) {
  return estimator.estimate(width, height, model_id);
}

// ---------------------------------------------------------------------------

FixtureError::FixtureError(Kind kind, std::string detail)
    : std::runtime_error((kind == Kind::Miss ? "fixture miss: " : "fixture corrupt: ") + detail),
      kind_(kind) {}

ordered_json to_json(const FixtureRecord& record) {
  ordered_json j;
  j["hash"] = record.hash;
  j["text"] = record.text;
  j["usage"] = {{"input", record.usage.input_tokens}, {"output", record.usage.output_tokens}};
  if (record.error_kind) {
    j["error"] = {{"kind", to_string(*record.error_kind)}, {"detail", record.error_detail}};
  }
  return j;
}

std::vector<FixtureRecord> load_fixture_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FixtureError(FixtureError::Kind::Corrupt, "cannot open " + path.string());
  std::vector<FixtureRecord> records;
  std::string line;
  std::size_t lineno = 0;
  auto corrupt = [&](const std::string& why) {
    return FixtureError(FixtureError::Kind::Corrupt,
                        path.filename().string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw corrupt(e.what());
    }
    if (!j.is_object()) throw corrupt("record is not an object");
    FixtureRecord r;
    auto hash = j.find("hash");
    auto text = j.find("text");
    auto usage = j.find("usage");
    if (hash == j.end() || !hash->is_string() || hash->get<std::string>().size() != 64) {
      throw corrupt("missing or invalid hash");
    }
    if (text == j.end() || !text->is_string()) throw corrupt("missing text");
    if (usage == j.end() || !usage->is_object()) throw corrupt("missing usage");
    auto in_tok = usage->find("input");
    auto out_tok = usage->find("output");
    if (in_tok == usage->end() || !in_tok->is_number_integer() || out_tok == usage->end() ||
        !out_tok->is_number_integer()) {
      throw corrupt("usage needs integer input and output");
    }
    r.hash = hash->get<std::string>();
    r.text = text->get<std::string>();
    r.usage = {in_tok->get<long>(), out_tok->get<long>()};
    if (r.usage.input_tokens < 0 || r.usage.output_tokens < 0) throw corrupt("negative usage");
    if (auto err = j.find("error"); err != j.end() && !err->is_null()) {
      if (!err->is_object() || !err->contains("kind") || !(*err)["kind"].is_string()) {
        throw corrupt("error needs a kind");
      }
      r.error_kind = gateway_error_kind_from_string((*err)["kind"].get<std::string>());
      if (!r.error_kind) throw corrupt("unknown error kind");
      r.error_detail = err->value("detail", "");
    }
    records.push_back(std::move(r));
  }
  return records;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& fixture_path)
    : ReplayTransport(load_fixture_file(fixture_path)) {}

ReplayTransport::ReplayTransport(const std::vector<FixtureRecord>& records) {
  for (const auto& r : records) entries_[r.hash].records.push_back(r);
}

Completion ReplayTransport::send(const LlmRequest& request) {
  const std::string hash = request_hash(request);
  std::lock_guard lock(mu_);
  auto it = entries_.find(hash);
  if (it == entries_.end()) throw FixtureError(FixtureError::Kind::Miss, hash);
  Entry& e = it->second;
  const FixtureRecord& r = e.records[std::min(e.next, e.records.size() - 1)];
  if (e.next < e.records.size()) ++e.next;
  ++served_;
  if (r.error_kind) throw GatewayError(*r.error_kind, r.error_detail);
  usage_ += r.usage;
  return {r.text, r.usage};
}

std::size_t ReplayTransport::calls_served() const {
  std::lock_guard lock(mu_);
  return served_;
}

TokenUsage ReplayTransport::usage_served() const {
  std::lock_guard lock(mu_);
  return usage_;
}

RecordingTransport::RecordingTransport(Transport& inner, const std::filesystem::path& fixture_path)
    : inner_(inner), out_(fixture_path, std::ios::binary | std::ios::app) {
  if (!out_) throw FixtureError(FixtureError::Kind::Corrupt, "cannot open " + fixture_path.string());
}

Completion RecordingTransport::send(const LlmRequest& request) {
  FixtureRecord record;
  record.hash = request_hash(request);
  try {
    Completion c = inner_.send(request);
    record.text = c.text;
    record.usage = c.usage;
    std::lock_guard lock(mu_);
    out_ << to_json(record).dump() << '\n';
    out_.flush();
    ++written_;
    return c;
  } catch (const GatewayError& e) {
    record.error_kind = e.kind();
    record.error_detail = e.detail();
    std::lock_guard lock(mu_);
    out_ << to_json(record).dump() << '\n';
    out_.flush();
    ++written_;
    throw;
  }
}

std::size_t RecordingTransport::records_written() const {
  std::lock_guard lock(mu_);
  return written_;
}

// ---------------------------------------------------------------------------

Clock::TimePoint SystemClock::now() {
  return std::chrono::time_point_cast<Duration>(std::chrono::steady_clock::now());
}

void SystemClock::sleep_for(Duration d) {
  if (d > Duration::zero()) std::this_thread::sleep_for(d);
}

Clock::TimePoint VirtualClock::now() {
  std::lock_guard lock(mu_);
  return TimePoint(elapsed_);
}

void VirtualClock::sleep_for(Duration d) {
  std::lock_guard lock(mu_);
  if (d > Duration::zero()) {
    elapsed_ += d;
    slept_ += d;
  }
}

Clock::Duration VirtualClock::total_slept() const {
  std::lock_guard lock(mu_);
  return slept_;
}

RateLimiter::RateLimiter(int per_second, Clock& clock) : per_second_(per_second), clock_(clock) {
  if (per_second <= 0) throw std::invalid_argument("rate limit must be positive");
}

void RateLimiter::acquire() {
  // Holding the lock while waiting queues later callers behind this one.
  std::lock_guard lock(mu_);
  constexpr auto kWindow = std::chrono::seconds(1);
  while (true) {
    auto now = clock_.now();
    while (!recent_.empty() && recent_.front() <= now - kWindow) recent_.pop_front();
    if (static_cast<int>(recent_.size()) < per_second_) {
      recent_.push_back(now);
      return;
    }
    clock_.sleep_for(recent_.front() + kWindow - now);
  }
}

std::chrono::nanoseconds RetryPolicy::max_delay_after(int attempt) const {
  double scale = std::pow(factor, std::max(0, attempt - 1));
  return std::chrono::duration_cast<std::chrono::nanoseconds>(base_delay * scale);
}

Gateway::Gateway(Transport& transport, GatewayOptions options)
    : transport_(transport),
      options_(options),
      clock_(options.clock ? options.clock : &system_clock_),
      rng_(options.jitter_seed) {
  if (options_.retry.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  if (options_.rate_limit_per_second > 0) limiter_.emplace(options_.rate_limit_per_second, *clock_);
}

void Gateway::backoff(int attempt) {
  auto cap = options_.retry.max_delay_after(attempt);
  Clock::Duration delay = cap;
  if (options_.retry.full_jitter) {
    std::lock_guard lock(mu_);
    std::uniform_int_distribution<std::int64_t> dist(0, cap.count());
    delay = Clock::Duration(dist(rng_));
  }
  clock_->sleep_for(delay);
}

Completion Gateway::complete(const LlmRequest& request) {
  {
    std::lock_guard lock(mu_);
    ++stats_.requests;
  }
  bool safety_retry_used = false;
  for (int attempt = 1;; ++attempt) {
    if (limiter_) limiter_->acquire();
    {
      std::lock_guard lock(mu_);
      ++stats_.attempts;
    }
    try {
      Completion c;
      try {
        c = transport_.send(request);
      } catch (const GatewayError&) {
        throw;
      } catch (const FixtureError&) {
        throw;
      } catch (const std::exception& e) {
        throw GatewayError(GatewayErrorKind::Transport, e.what());
      }
      std::lock_guard lock(mu_);
      ++stats_.successes;
      stats_.usage += c.usage;
      return c;
    } catch (const GatewayError& e) {
      bool again = false;
      if (e.retryable()) {
        again = attempt < options_.retry.max_attempts;
      } else if (e.kind() == GatewayErrorKind::SafetyFilter && options_.retry.retry_safety_once &&
                 !safety_retry_used) {
        safety_retry_used = true;
        again = true;
      }
      if (!again) throw;
      backoff(attempt);
    }
  }
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

}  // namespace brandlens
