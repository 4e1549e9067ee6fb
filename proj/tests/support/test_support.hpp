#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "brandlens/image.hpp"
#include "brandlens/llm_gateway.hpp"
#include "brandlens/prompt_engine.hpp"
#include "brandlens/snapshot_store.hpp"

namespace brandlens::testing {

std::filesystem::path source_dir();
std::filesystem::path fixtures_dir();
std::filesystem::path golden_dir();
std::string read_text(const std::filesystem::path& path);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Image uniform_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);
// Left half black, right half white.
Image half_black_white(int w, int h);
// Vertical step between two gray levels at column w / 2.
Image step_edge_image(int w, int h, std::uint8_t left, std::uint8_t right);
// A page-like raster: colored header band and rows of text-like bars.
Image content_page_image(int w, int h, std::uint32_t seed, std::uint8_t accent_r = 30,
                         std::uint8_t accent_g = 110, std::uint8_t accent_b = 200);

// Deterministic token counts for scripted replies.
TokenUsage scripted_usage(const LlmRequest& request, const std::string& reply);

// Answers every request through `responder` and keeps a transcript.
class ScriptedTransport : public Transport {
 public:
  using Responder = std::function<Completion(const LlmRequest&)>;

  explicit ScriptedTransport(Responder responder) : responder_(std::move(responder)) {}

  Completion send(const LlmRequest& request) override;

  void set_responder(Responder responder);
  [[nodiscard]] std::vector<LlmRequest> requests() const;

 private:
  mutable std::mutex mu_;
  Responder responder_;
  std::vector<LlmRequest> requests_;
};

// Replies with phase-1 text to brand-identifier prompts and phase-2 text to
// domain-verifier prompts.
ScriptedTransport::Responder two_phase_responder(std::string phase1_text, std::string phase2_text);

bool is_phase2_request(const LlmRequest& request);

WebpageSnapshot make_snapshot(std::string sample_id, std::string url, std::string html,
                              std::optional<Image> screenshot,
                              std::optional<SampleLabel> label = std::nullopt);

// Random identification whose canonical rendering parses back to itself
// (warnings aside): no commas, colons or NA-like values in free text.
BrandIdentification random_identification(std::mt19937_64& rng, InputMode mode);

// Random UTF-8 text salted with field keys, bullets and markdown.
std::string random_response_noise(std::mt19937_64& rng);

// Minimal branded login page.
std::string login_page_html(const std::string& brand, const std::string& extra_body = "");

}  // namespace brandlens::testing
