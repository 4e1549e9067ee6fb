#include "brandlens/snapshot_store.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "brandlens/text_util.hpp"
#include "brandlens/url.hpp"

namespace brandlens {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(GroundTruth truth) {
  return truth == GroundTruth::Phishing ? "phishing" : "benign";
}

std::optional<GroundTruth> ground_truth_from_string(std::string_view text) {
  if (text == "phishing") return GroundTruth::Phishing;
  if (text == "benign") return GroundTruth::Benign;
  return std::nullopt;
}

std::string ReferrerPolicy::referrer_for(const std::string& url) const {
  switch (kind) {
    case Kind::SelfReferential:
      return url;
    case Kind::Fixed:
      return fixed_value;
    case Kind::Empty:
      break;
  }
  return {};
}

DedupKey dedup_key(const WebpageSnapshot& snapshot) {
  return DedupKey{sha256(snapshot.url), sha256(snapshot.html)};
}

SnapshotError::SnapshotError(Kind kind, std::string detail)
    : std::runtime_error(to_string(kind) + ": " + detail), kind_(kind), detail_(std::move(detail)) {}

std::string to_string(SnapshotError::Kind kind) {
  switch (kind) {
    case SnapshotError::Kind::MissingFile:
      return "missing_file";
    case SnapshotError::Kind::MalformedMetadata:
      return "malformed_metadata";
    case SnapshotError::Kind::NonUtf8Html:
      return "non_utf8_html";
    case SnapshotError::Kind::BadScreenshot:
      return "bad_screenshot";
    case SnapshotError::Kind::UnreadableRoot:
      return "unreadable_root";
  }
  return "unknown";
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError(SnapshotError::Kind::MissingFile, path.filename().string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

[[noreturn]] void malformed(const std::string& field, const std::string& why) {
  throw SnapshotError(SnapshotError::Kind::MalformedMetadata, field + ": " + why);
}

std::string optional_string(const json& meta, const char* key) {
  auto it = meta.find(key);
  if (it == meta.end() || it->is_null()) return {};
  if (!it->is_string()) malformed(key, "expected string");
  return it->get<std::string>();
}

bool is_iso8601(const std::string& text) {
  static const std::regex kPattern(
      R"(^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$)");
  return std::regex_match(text, kPattern);
}

}  // namespace

WebpageSnapshot load_snapshot(const fs::path& dir) {
  const auto meta_path = dir / "metadata.json";
  const auto html_path = dir / "page.html";
  const auto shot_path = dir / "screenshot.png";
  if (!fs::is_regular_file(meta_path)) {
    throw SnapshotError(SnapshotError::Kind::MissingFile, "metadata.json");
  }
  if (!fs::is_regular_file(html_path)) {
    throw SnapshotError(SnapshotError::Kind::MissingFile, "page.html");
  }

  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::exception& e) {
    malformed("metadata.json", e.what());
  }
  if (!meta.is_object()) malformed("metadata.json", "expected object");

  WebpageSnapshot snap;
  snap.sample_id = dir.filename().string();
  if (snap.sample_id.empty()) snap.sample_id = dir.parent_path().filename().string();

  auto url_it = meta.find("url");
  if (url_it == meta.end() || !url_it->is_string()) malformed("url", "missing or not a string");
  snap.url = url_it->get<std::string>();
  if (!is_absolute_url(snap.url)) malformed("url", "not an absolute URL with a host");

  auto status_it = meta.find("http_status");
  if (status_it == meta.end() || !status_it->is_number_integer()) {
    malformed("http_status", "missing or not an integer");
  }
  snap.http_status = status_it->get<int>();
  if (snap.http_status < 100 || snap.http_status > 599) malformed("http_status", "outside 100-599");

  snap.captured_at = optional_string(meta, "captured_at");
  if (!snap.captured_at.empty() && !is_iso8601(snap.captured_at)) {
    malformed("captured_at", "not an ISO 8601 timestamp");
  }
  snap.user_agent = optional_string(meta, "user_agent");
  snap.referrer = optional_string(meta, "referrer");

  if (auto label_it = meta.find("label"); label_it != meta.end() && !label_it->is_null()) {
    if (!label_it->is_object()) malformed("label", "expected object");
    auto cls = label_it->find("class");
    if (cls == label_it->end() || !cls->is_string()) malformed("label.class", "missing");
    auto truth = ground_truth_from_string(cls->get<std::string>());
    if (!truth) malformed("label.class", "expected \"benign\" or \"phishing\"");
    SampleLabel label{*truth, std::nullopt};
    if (auto brand = label_it->find("brand"); brand != label_it->end() && !brand->is_null()) {
      if (!brand->is_string()) malformed("label.brand", "expected string");
      if (!brand->get<std::string>().empty()) label.brand = brand->get<std::string>();
    }
    if (label.truth == GroundTruth::Phishing && !label.brand) {
      malformed("label.brand", "phishing samples need a brand");
    }
    snap.label = std::move(label);
  }

  snap.html = read_file(html_path);
  if (!is_valid_utf8(snap.html)) {
    throw SnapshotError(SnapshotError::Kind::NonUtf8Html, "page.html is not valid UTF-8");
  }

  if (fs::is_regular_file(shot_path)) {
    try {
      snap.screenshot = Screenshot::from_png(read_file(shot_path));
    } catch (const ImageError& e) {
      throw SnapshotError(SnapshotError::Kind::BadScreenshot, e.what());
    }
  }
  return snap;
}

void write_snapshot(const fs::path& dir, const WebpageSnapshot& snapshot) {
  fs::create_directories(dir);
  json meta = json::object();
  meta["url"] = snapshot.url;
  meta["http_status"] = snapshot.http_status;
  meta["captured_at"] = snapshot.captured_at;
  meta["user_agent"] = snapshot.user_agent;
  meta["referrer"] = snapshot.referrer;
  if (snapshot.label) {
    json label = {{"class", to_string(snapshot.label->truth)}};
    if (snapshot.label->brand) label["brand"] = *snapshot.label->brand;
    meta["label"] = std::move(label);
  }
  write_file(dir / "metadata.json", meta.dump(2) + "\n");
  write_file(dir / "page.html", snapshot.html);
  if (snapshot.screenshot) {
    write_file(dir / "screenshot.png", snapshot.screenshot->png);
  } else {
    fs::remove(dir / "screenshot.png");
  }
}

ScanResult scan_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw SnapshotError(SnapshotError::Kind::UnreadableRoot, root.string());
  }
  std::vector<fs::path> dirs;
  for (fs::directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_directory()) dirs.push_back(it->path());
  }
  if (ec) throw SnapshotError(SnapshotError::Kind::UnreadableRoot, root.string() + ": " + ec.message());
  std::sort(dirs.begin(), dirs.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });

  ScanResult result;
  std::map<DedupKey, std::string> seen;
  for (const auto& dir : dirs) {
    WebpageSnapshot snap;
    try {
      snap = load_snapshot(dir);
    } catch (const SnapshotError& e) {
      result.report.errors.push_back({dir.filename().string(), to_string(e.kind()), e.detail()});
      continue;
    }
    auto [it, inserted] = seen.emplace(dedup_key(snap), snap.sample_id);
    if (!inserted) {
      result.report.drops.push_back({it->second, snap.sample_id});
      continue;
    }
    result.snapshots.push_back(std::move(snap));
  }
  return result;
}

void write_dedup_report_jsonl(std::ostream& out, const DedupReport& report) {
  for (const auto& drop : report.drops) {
    out << nlohmann::ordered_json{{"retained", drop.retained}, {"dropped", drop.dropped}}.dump() << '\n';
  }
}

}  // namespace brandlens
