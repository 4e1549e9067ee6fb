#include "brandlens/validity_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brandlens/html_extractor.hpp"
#include "brandlens/text_util.hpp"

namespace brandlens {

std::string to_string(CheckOutcome::Status status) {
  switch (status) {
    case CheckOutcome::Status::Pass:
      return "pass";
    case CheckOutcome::Status::Fail:
      return "fail";
    case CheckOutcome::Status::Skipped:
      return "skipped";
  }
  return "unknown";
}

std::string_view to_string(ValidityCheck check) {
  switch (check) {
    case ValidityCheck::Completeness:
      return "completeness";
    case ValidityCheck::HttpStatus:
      return "http_status";
    case ValidityCheck::SemanticBlank:
      return "semantic_blank";
    case ValidityCheck::PixelStddev:
      return "pixel_stddev";
    case ValidityCheck::EdgeCount:
      return "edge_count";
    case ValidityCheck::OcrLength:
      return "ocr_length";
    case ValidityCheck::VerificationPage:
      return "verification_page";
  }
  return "unknown";
}

nlohmann::ordered_json to_json(const FilterThresholds& t) {
  nlohmann::ordered_json j;
  j["min_gray_stddev"] = t.min_gray_stddev;
  j["min_edge_count"] = t.min_edge_count;
  j["min_ocr_chars"] = t.min_ocr_chars;
  j["calibrated"] = t.calibrated;
  return j;
}

FilterThresholds thresholds_from_json(const nlohmann::json& j) {
  const nlohmann::json& block = j.contains("filter_thresholds") ? j.at("filter_thresholds") : j;
  FilterThresholds t;
  t.min_gray_stddev = block.value("min_gray_stddev", t.min_gray_stddev);
  t.min_edge_count = block.value("min_edge_count", t.min_edge_count);
  t.min_ocr_chars = block.value("min_ocr_chars", t.min_ocr_chars);
  t.calibrated = block.value("calibrated", t.calibrated);
  if (t.min_gray_stddev < 0 || t.min_edge_count < 0 || t.min_ocr_chars < 0) {
    throw std::invalid_argument("filter_thresholds: values must be non-negative");
  }
  return t;
}

std::vector<ValidityCheck> ValidityReport::failed_checks() const {
  std::vector<ValidityCheck> out;
  for (auto c : kAllValidityChecks) {
    if (outcome(c).failed()) out.push_back(c);
  }
  return out;
}

nlohmann::ordered_json to_json(const ValidityReport& report) {
  nlohmann::ordered_json j;
  j["sample_id"] = report.sample_id;
  j["valid"] = report.valid;
  j["calibrated"] = report.calibrated;
  nlohmann::ordered_json outcomes = nlohmann::ordered_json::object();
  for (auto c : kAllValidityChecks) {
    const auto& o = report.outcome(c);
    nlohmann::ordered_json entry;
    entry["status"] = to_string(o.status);
    if (!o.reason.empty()) entry["reason"] = o.reason;
    outcomes[std::string(to_string(c))] = std::move(entry);
  }
  j["outcomes"] = std::move(outcomes);
  return j;
}

CheckOutcome check_http_status(const WebpageSnapshot& snapshot) {
  if (snapshot.http_status == 200) return CheckOutcome::pass();
  return CheckOutcome::fail("status " + std::to_string(snapshot.http_status));
}

double grayscale_stddev(const Image& image) {
  if (image.empty()) throw std::invalid_argument("grayscale_stddev: empty image");
  // Luma scaled by 1000 keeps every sum exact, so constant images give exactly 0.
  unsigned __int128 sum = 0;
  unsigned __int128 sum_sq = 0;
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = image.rgb.data() + i * 3;
    std::uint64_t y = 299u * p[0] + 587u * p[1] + 114u * p[2];
    sum += y;
    sum_sq += static_cast<unsigned __int128>(y) * y;
  }
  unsigned __int128 numerator = sum_sq * n - sum * sum;  // n^2 * variance
  long double variance = static_cast<long double>(numerator) /
                         (static_cast<long double>(n) * static_cast<long double>(n));
  return static_cast<double>(std::sqrt(variance) / 1000.0L);
}

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

std::vector<float> gaussian_blur_5x5(const std::vector<float>& src, int w, int h) {
  constexpr double kSigma = 1.4;
  std::array<float, 5> k{};
  double total = 0;
  for (int i = -2; i <= 2; ++i) {
    double v = std::exp(-(i * i) / (2 * kSigma * kSigma));
    k[i + 2] = static_cast<float>(v);
    total += v;
  }
  for (auto& v : k) v = static_cast<float>(v / total);

  std::vector<float> tmp(src.size());
  std::vector<float> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int d = -2; d <= 2; ++d) acc += k[d + 2] * src[y * w + reflect101(x + d, w)];
      tmp[y * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int d = -2; d <= 2; ++d) acc += k[d + 2] * tmp[reflect101(y + d, h) * w + x];
      out[y * w + x] = acc;
    }
  }
  return out;
}

}  // namespace

long edge_count(const Image& image) {
  const int w = image.width;
  const int h = image.height;
  if (w < 2 || h < 2) throw std::invalid_argument("edge_count: image smaller than 2x2");
  constexpr float kLow = 50.0f;
  constexpr float kHigh = 150.0f;

  std::vector<float> gray(image.pixel_count());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const auto* p = image.rgb.data() + i * 3;
    gray[i] = static_cast<float>((299 * p[0] + 587 * p[1] + 114 * p[2] + 500) / 1000);
  }
  auto blurred = gaussian_blur_5x5(gray, w, h);
  auto px = [&](int x, int y) { return blurred[reflect101(y, h) * w + reflect101(x, w)]; };

  std::vector<float> gx(gray.size());
  std::vector<float> gy(gray.size());
  std::vector<float> mag(gray.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float dx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                 (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      float dy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                 (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = dx;
      gy[i] = dy;
      mag[i] = std::sqrt(dx * dx + dy * dy);
    }
  }
  auto m = [&](int x, int y) -> float {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0f;
    return mag[static_cast<std::size_t>(y) * w + x];
  };

  // 0 = suppressed, 1 = weak, 2 = strong
  std::vector<std::uint8_t> state(gray.size(), 0);
  const float tan22 = 0.41421356f;
  const float tan67 = 2.41421356f;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      float v = mag[i];
      if (v <= kLow) continue;
      float ax = std::fabs(gx[i]);
      float ay = std::fabs(gy[i]);
      bool keep;
      if (ay <= ax * tan22) {
        keep = v > m(x - 1, y) && v >= m(x + 1, y);
      } else if (ay >= ax * tan67) {
        keep = v > m(x, y - 1) && v >= m(x, y + 1);
      } else {
        int s = (gx[i] * gy[i] < 0) ? -1 : 1;
        keep = v > m(x - s, y - 1) && v >= m(x + s, y + 1);
      }
      if (keep) state[i] = v > kHigh ? 2 : 1;
    }
  }

  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] == 2) stack.push_back(i);
  }
  std::vector<std::uint8_t> edge(state.size(), 0);
  for (auto i : stack) edge[i] = 1;
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    int x = static_cast<int>(i % w);
    int y = static_cast<int>(i / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        int nx = x + dx;
        int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (state[j] != 0 && !edge[j]) {
          edge[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return static_cast<long>(std::count(edge.begin(), edge.end(), 1));
}

std::size_t ocr_text_length(const Image& image, OcrProvider& ocr) {
  return utf8_length(collapse_whitespace(ocr.recognize(image)));
}

CheckOutcome check_ocr_length(const Image& image, OcrProvider* ocr, const FilterThresholds& t) {
  if (ocr == nullptr) return CheckOutcome::skipped("no ocr");
  std::size_t len = 0;
  try {
    len = ocr_text_length(image, *ocr);
  } catch (const OcrBackendError& e) {
    return CheckOutcome::skipped(std::string("ocr backend error: ") + e.what());
  }
  if (static_cast<long>(len) < t.min_ocr_chars) {
    return CheckOutcome::fail("ocr text length " + std::to_string(len) + " < " +
                              std::to_string(t.min_ocr_chars));
  }
  return CheckOutcome::pass();
}

CheckOutcome check_semantic_blank(std::string_view html) {
  HtmlKeyInfo info = extract_key_info(html);
  std::size_t visible = utf8_length(visible_text(html));
  if (info.all_empty() && visible < 10) {
    return CheckOutcome::fail("no key information and " + std::to_string(visible) +
                              " visible characters");
  }
  return CheckOutcome::pass();
}

CheckOutcome check_verification_page(std::string_view html,
                                     const std::optional<std::string>& screenshot_ocr_text,
                                     const std::vector<std::string>& keywords) {
  std::string text = visible_text(html);
  for (const auto& keyword : keywords) {
    if (keyword.empty()) continue;
    if (icontains(text, keyword)) return CheckOutcome::fail("keyword \"" + keyword + "\" in page text");
    if (screenshot_ocr_text && icontains(*screenshot_ocr_text, keyword)) {
      return CheckOutcome::fail("keyword \"" + keyword + "\" in screenshot text");
    }
  }
  return CheckOutcome::pass();
}

ValidityReport classify_validity(const WebpageSnapshot& snapshot, const FilterOptions& options) {
  const FilterThresholds& t = options.thresholds;
  ValidityReport report;
  report.sample_id = snapshot.sample_id;
  report.calibrated = t.calibrated;
  auto set = [&](ValidityCheck c, CheckOutcome o) {
    report.outcomes[static_cast<std::size_t>(c)] = std::move(o);
  };

  std::vector<std::string> missing;
  if (snapshot.url.empty()) missing.emplace_back("url");
  if (snapshot.html.empty()) missing.emplace_back("html");
  if (!snapshot.screenshot) missing.emplace_back("screenshot");
  if (missing.empty()) {
    set(ValidityCheck::Completeness, CheckOutcome::pass());
  } else {
    std::string reason = "missing";
    for (const auto& m : missing) reason += " " + m;
    set(ValidityCheck::Completeness, CheckOutcome::fail(reason));
  }

  set(ValidityCheck::HttpStatus, check_http_status(snapshot));
  set(ValidityCheck::SemanticBlank, check_semantic_blank(snapshot.html));

  std::optional<std::string> ocr_text;
  if (!snapshot.screenshot || snapshot.screenshot->image.empty()) {
    set(ValidityCheck::PixelStddev, CheckOutcome::skipped("no screenshot"));
    set(ValidityCheck::EdgeCount, CheckOutcome::skipped("no screenshot"));
    set(ValidityCheck::OcrLength, CheckOutcome::skipped("no screenshot"));
  } else {
    const Image& img = snapshot.screenshot->image;
    double sd = grayscale_stddev(img);
    set(ValidityCheck::PixelStddev,
        sd < t.min_gray_stddev
            ? CheckOutcome::fail("gray stddev " + std::to_string(sd) + " < " +
                                 std::to_string(t.min_gray_stddev))
            : CheckOutcome::pass());
    if (img.width < 2 || img.height < 2) {
      set(ValidityCheck::EdgeCount, CheckOutcome::skipped("image smaller than 2x2"));
    } else {
      long edges = edge_count(img);
      set(ValidityCheck::EdgeCount,
          edges < t.min_edge_count ? CheckOutcome::fail("edge count " + std::to_string(edges) +
                                                        " < " + std::to_string(t.min_edge_count))
                                   : CheckOutcome::pass());
    }
    if (options.ocr == nullptr) {
      set(ValidityCheck::OcrLength, CheckOutcome::skipped("no ocr"));
    } else {
      try {
        ocr_text = options.ocr->recognize(img);
        auto len = utf8_length(collapse_whitespace(*ocr_text));
        set(ValidityCheck::OcrLength,
            static_cast<long>(len) < t.min_ocr_chars
                ? CheckOutcome::fail("ocr text length " + std::to_string(len) + " < " +
                                     std::to_string(t.min_ocr_chars))
                : CheckOutcome::pass());
      } catch (const OcrBackendError& e) {
        set(ValidityCheck::OcrLength,
            CheckOutcome::skipped(std::string("ocr backend error: ") + e.what()));
      }
    }
  }

  set(ValidityCheck::VerificationPage,
      check_verification_page(snapshot.html, ocr_text, options.verification_keywords));

  report.valid = std::none_of(report.outcomes.begin(), report.outcomes.end(),
                              [](const CheckOutcome& o) { return o.failed(); });
  return report;
}

ValidityReport classify_validity(const WebpageSnapshot& snapshot, const FilterThresholds& thresholds,
                                 OcrProvider* ocr) {
  FilterOptions options;
  options.thresholds = thresholds;
  options.ocr = ocr;
  return classify_validity(snapshot, options);
}

namespace {

struct Separation {
  bool separable = false;
  double blank_max = 0;
  double content_min = 0;
};

Separation separate(const std::vector<double>& blank, const std::vector<double>& content) {
  Separation s;
  s.blank_max = *std::max_element(blank.begin(), blank.end());
  s.content_min = *std::min_element(content.begin(), content.end());
  s.separable = s.blank_max < s.content_min;
  return s;
}

}  // namespace

CalibrationResult calibrate_thresholds(std::span<const LabeledSnapshot> examples, OcrProvider* ocr,
                                       const FilterThresholds& defaults) {
  std::vector<double> sd_blank, sd_content, edge_blank, edge_content, ocr_blank, ocr_content;
  bool ocr_failed = false;
  for (const auto& ex : examples) {
    if (!ex.snapshot.screenshot) continue;
    const Image& img = ex.snapshot.screenshot->image;
    (ex.is_blank ? sd_blank : sd_content).push_back(grayscale_stddev(img));
    if (img.width >= 2 && img.height >= 2) {
      (ex.is_blank ? edge_blank : edge_content).push_back(static_cast<double>(edge_count(img)));
    }
    if (ocr != nullptr && !ocr_failed) {
      try {
        (ex.is_blank ? ocr_blank : ocr_content)
            .push_back(static_cast<double>(ocr_text_length(img, *ocr)));
      } catch (const OcrBackendError&) {
        ocr_failed = true;
      }
    }
  }
  if (sd_blank.size() < 2 || sd_content.size() < 2) {
    throw InsufficientExamples(
        "calibration needs at least two blank and two non-blank examples with screenshots");
  }

  CalibrationResult result;
  result.thresholds = defaults;
  bool all_separable = true;

  auto sd = separate(sd_blank, sd_content);
  if (sd.separable) {
    result.thresholds.min_gray_stddev = (sd.blank_max + sd.content_min) / 2.0;
  } else {
    all_separable = false;
    result.warnings.push_back("pixel_stddev: classes overlap, default retained");
  }

  if (edge_blank.size() >= 2 && edge_content.size() >= 2) {
    auto e = separate(edge_blank, edge_content);
    if (e.separable) {
      // Integer threshold with blank_max < threshold <= content_min.
      auto lo = static_cast<long>(e.blank_max);
      auto hi = static_cast<long>(e.content_min);
      result.thresholds.min_edge_count = lo + (hi - lo + 1) / 2;
    } else {
      all_separable = false;
      result.warnings.push_back("edge_count: classes overlap, default retained");
    }
  } else {
    all_separable = false;
    result.warnings.push_back("edge_count: not enough images of at least 2x2, default retained");
  }

  if (ocr == nullptr) {
    result.warnings.push_back("ocr_length: no ocr provider, default retained");
  } else if (ocr_failed || ocr_blank.size() < 2 || ocr_content.size() < 2) {
    all_separable = false;
    result.warnings.push_back("ocr_length: ocr backend failed, default retained");
  } else {
    auto o = separate(ocr_blank, ocr_content);
    if (o.separable) {
      auto lo = static_cast<long>(o.blank_max);
      auto hi = static_cast<long>(o.content_min);
      result.thresholds.min_ocr_chars = lo + (hi - lo + 1) / 2;
    } else {
      all_separable = false;
      result.warnings.push_back("ocr_length: classes overlap, default retained");
    }
  }
  result.thresholds.calibrated = all_separable;
  return result;
}

}  // namespace brandlens
