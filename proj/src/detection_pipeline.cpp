#include "brandlens/detection_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "brandlens/text_util.hpp"
#include "brandlens/url.hpp"

namespace brandlens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(VerdictOutcome outcome) {
  switch (outcome) {
    case VerdictOutcome::Phishing:
      return "phishing";
    case VerdictOutcome::Genuine:
      return "genuine";
    case VerdictOutcome::Unknown:
      return "unknown";
    case VerdictOutcome::Invalid:
      return "invalid";
    case VerdictOutcome::Error:
      return "error";
  }
  return "error";
}

std::optional<VerdictOutcome> verdict_outcome_from_string(std::string_view text) {
  for (auto o : {VerdictOutcome::Phishing, VerdictOutcome::Genuine, VerdictOutcome::Unknown,
                 VerdictOutcome::Invalid, VerdictOutcome::Error}) {
    if (to_string(o) == text) return o;
  }
  return std::nullopt;
}

std::string_view to_string(Verifier verifier) {
  return verifier == Verifier::Llm ? "llm" : "baseline";
}

std::optional<Verifier> verifier_from_string(std::string_view text) {
  if (text == "llm") return Verifier::Llm;
  if (text == "baseline") return Verifier::Baseline;
  return std::nullopt;
}

namespace {

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

ordered_json to_json(const PhishingVerdict& v) {
  ordered_json j;
  j["sample_id"] = v.sample_id;
  j["url"] = v.url;
  j["mode"] = to_string(v.mode);
  j["model"] = v.model;
  j["outcome"] = to_string(v.outcome);
  j["identified_brand"] = opt_json(v.identified_brand);
  j["confidence"] = opt_json(v.confidence);
  j["phase1_evidence"] = opt_json(v.phase1_evidence);
  j["phase2_evidence"] = opt_json(v.phase2_evidence);
  j["genuine_url"] = opt_json(v.genuine_url);
  j["usage"] = to_json(v.usage);
  if (v.error) {
    j["error"] = {{"kind", to_string(v.error->kind)}, {"detail", v.error->detail}};
  } else {
    j["error"] = nullptr;
  }
  return j;
}

PhishingVerdict verdict_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("verdict must be an object");
  auto str = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw std::invalid_argument(std::string("verdict field '") + key + "' must be a string");
    }
    return it->get<std::string>();
  };
  auto opt_str = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      throw std::invalid_argument(std::string("verdict field '") + key + "' must be a string");
    }
    return it->get<std::string>();
  };

  PhishingVerdict v;
  v.sample_id = str("sample_id");
  v.url = str("url");
  auto mode = input_mode_from_string(str("mode"));
  if (!mode) throw std::invalid_argument("unknown mode");
  v.mode = *mode;
  v.model = str("model");
  auto outcome = verdict_outcome_from_string(str("outcome"));
  if (!outcome) throw std::invalid_argument("unknown outcome");
  v.outcome = *outcome;
  v.identified_brand = opt_str("identified_brand");
  if (auto it = j.find("confidence"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw std::invalid_argument("confidence must be a number");
    v.confidence = it->get<double>();
  }
  v.phase1_evidence = opt_str("phase1_evidence");
  v.phase2_evidence = opt_str("phase2_evidence");
  v.genuine_url = opt_str("genuine_url");
  if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
    v.usage.input_tokens = it->value("input_tokens", 0L);
    v.usage.output_tokens = it->value("output_tokens", 0L);
  } else {
    throw std::invalid_argument("verdict needs usage");
  }
  if (auto it = j.find("error"); it != j.end() && !it->is_null()) {
    auto kind = gateway_error_kind_from_string(it->value("kind", ""));
    if (!kind) throw std::invalid_argument("unknown error kind");
    v.error = VerdictError{*kind, it->value("detail", "")};
  }
  return v;
}

std::string registrable_domain(std::string_view url, const PublicSuffixList& psl) {
  auto parsed = parse_url(url);
  if (!parsed) throw InvalidUrl("not an absolute URL with a host: " + std::string(url));
  if (parsed->host_is_ip) return parsed->host;
  auto rd = psl.registrable_domain(parsed->host);
  if (rd) return *rd;
  // The host is a public suffix itself (or unusable for PSL matching).
  std::string host = parsed->host;
  if (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty()) throw InvalidUrl("empty host: " + std::string(url));
  return host;
}

std::string normalize_brand(std::string_view brand) {
  std::string out;
  for (char c : brand) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) && u < 0x80) out += static_cast<char>(std::tolower(u));
  }
  return out;
}

DomainVerdict verify_domain_baseline(std::string_view url, const BrandIdentification& identified,
                                     const AliasMap& aliases) {
  if (!identified.brand || normalize_brand(*identified.brand).empty()) {
    throw MissingBrand("baseline verification needs an identified brand");
  }
  const std::string domain = registrable_domain(url);
  // Label part: the registrable domain without its public suffix.
  std::string label_part = domain;
  if (auto parsed = parse_url(url); parsed && !parsed->host_is_ip) {
    if (auto suffix = PublicSuffixList::bundled().public_suffix(parsed->host);
        suffix && domain.size() > suffix->size() + 1 && domain.ends_with("." + *suffix)) {
      label_part = domain.substr(0, domain.size() - suffix->size() - 1);
    }
  }
  const std::string haystack = normalize_brand(label_part);
  const std::string brand = normalize_brand(*identified.brand);

  std::vector<std::string> names{brand};
  if (auto it = aliases.find(brand); it != aliases.end()) {
    for (const auto& a : it->second) {
      auto n = normalize_brand(a);
      if (!n.empty()) names.push_back(n);
    }
  }
  DomainVerdict verdict;
  verdict.evidence = "string-match: " + *identified.brand + " vs " + domain;
  verdict.classification = DomainVerdict::Classification::Phishing;
  for (const auto& n : names) {
    if (haystack.find(n) != std::string::npos) {
      verdict.classification = DomainVerdict::Classification::Genuine;
      break;
    }
  }
  return verdict;
}

LlmRequest make_llm_request(const std::string& model_id, const PromptBundle& bundle,
                            const PipelineConfig& config) {
  LlmRequest req;
  req.model_id = model_id;
  req.system_text = bundle.system_text;
  req.user_text = bundle.user_text;
  if (bundle.image_attachment) {
    req.image = ImageData{bundle.image_attachment->png, bundle.image_attachment->media_type};
  }
  req.max_output_tokens = config.max_output_tokens;
  req.temperature = config.temperature;
  return req;
}

LlmRequest phase1_request(const WebpageSnapshot& snapshot, InputMode mode,
                          const std::string& model_id, const PipelineConfig& config) {
  std::optional<HtmlKeyInfo> key_info;
  if (mode != InputMode::ScreenshotOnly) {
    key_info = truncate_for_budget(extract_key_info(snapshot.html), config.html_budget_chars);
  }
  std::optional<Screenshot> screenshot;
  if (mode != InputMode::HtmlOnly) screenshot = snapshot.screenshot;
  return make_llm_request(model_id, build_phase1_prompt(mode, key_info, screenshot, config.prompt),
                          config);
}

LlmRequest phase2_request(const WebpageSnapshot& snapshot, const BrandIdentification& identified,
                          const std::string& model_id, const PipelineConfig& config) {
  return make_llm_request(model_id, build_phase2_prompt(snapshot.url, identified), config);
}

Phase1Result identify_brand(const WebpageSnapshot& snapshot, InputMode mode, Gateway& gateway,
                            const std::string& model_id, const PipelineConfig& config) {
  auto request = phase1_request(snapshot, mode, model_id, config);
  Completion c = gateway.complete(request);
  Phase1Result r;
  r.usage = c.usage;
  r.raw_text = c.text;
  r.identification = parse_phase1_response(c.text, mode);
  return r;
}

PhishingVerdict detect(const WebpageSnapshot& snapshot, InputMode mode, const std::string& model_id,
                       Gateway& gateway, const PipelineConfig& config) {
  PhishingVerdict v;
  v.sample_id = snapshot.sample_id;
  v.url = snapshot.url;
  v.mode = mode;
  v.model = model_id;

  auto fail = [&](GatewayErrorKind kind, std::string detail) {
    v.outcome = VerdictOutcome::Error;
    v.error = VerdictError{kind, std::move(detail)};
    return v;
  };

  v.validity = classify_validity(snapshot, config.filter);
  if (!v.validity->valid) {
    v.outcome = VerdictOutcome::Invalid;
    return v;
  }

  try {
    // Phase 1
    LlmRequest req1 = phase1_request(snapshot, mode, model_id, config);
    Completion c1 = gateway.complete(req1);
    v.usage += c1.usage;
    BrandIdentification id = parse_phase1_response(c1.text, mode);
    v.confidence = id.confidence;
    v.phase1_evidence = id.supporting_evidence;
    if (!id.brand) {
      v.outcome = VerdictOutcome::Unknown;
      return v;
    }
    v.identified_brand = id.brand;

    // Phase 2
    DomainVerdict dv;
    if (config.verifier == Verifier::Baseline) {
      dv = verify_domain_baseline(snapshot.url, id, config.aliases);
    } else {
      Completion c2 = gateway.complete(phase2_request(snapshot, id, model_id, config));
      v.usage += c2.usage;
      dv = parse_phase2_response(c2.text);
    }
    v.phase2_evidence = dv.evidence;
    v.genuine_url = dv.genuine_url;
    v.outcome = dv.classification == DomainVerdict::Classification::Genuine
                    ? VerdictOutcome::Genuine
                    : VerdictOutcome::Phishing;
    return v;
  } catch (const GatewayError& e) {
    return fail(e.kind(), e.detail());
  } catch (const FixtureError& e) {
    return fail(GatewayErrorKind::Transport, e.what());
  } catch (const ResponseParseError& e) {
    std::string missing;
    for (const auto& f : e.missing_fields()) missing += (missing.empty() ? "" : ", ") + f;
    return fail(GatewayErrorKind::Malformed, "unparseable response, missing: " + missing);
  } catch (const ModeInputMismatch& e) {
    return fail(GatewayErrorKind::Malformed, std::string("input mismatch: ") + e.what());
  } catch (const std::exception& e) {
    return fail(GatewayErrorKind::Malformed, e.what());
  }
}

namespace {

using TripleKey = std::tuple<std::string, std::string, std::string>;

TripleKey key_of(const PhishingVerdict& v) {
  return {v.sample_id, std::string(to_string(v.mode)), v.model};
}

std::vector<PhishingVerdict> read_results_impl(const std::filesystem::path& path, bool lenient) {
  std::vector<PhishingVerdict> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (lenient) return out;
    throw std::runtime_error("cannot read results file " + path.string());
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(verdict_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      if (lenient) continue;
      throw std::runtime_error(path.filename().string() + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return out;
}

void write_sorted(const std::filesystem::path& path, std::vector<PhishingVerdict> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return key_of(a) < key_of(b); });
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<PhishingVerdict> read_results(const std::filesystem::path& path) {
  return read_results_impl(path, false);
}

BatchSummary detect_batch(const std::vector<WebpageSnapshot>& samples, Gateway& gateway,
                          const PipelineConfig& config, const BatchOptions& options) {
  if (options.modes.empty()) throw std::invalid_argument("batch needs at least one mode");
  if (options.models.empty()) throw std::invalid_argument("batch needs at least one model");
  if (options.max_in_flight == 0) throw std::invalid_argument("max_in_flight must be positive");

  std::vector<PhishingVerdict> existing;
  std::set<TripleKey> done;
  if (options.resume) {
    existing = read_results_impl(options.output_path, true);
    for (const auto& r : existing) done.insert(key_of(r));
  }

  struct Task {
    const WebpageSnapshot* snapshot;
    InputMode mode;
    const std::string* model;
  };
  BatchSummary summary;
  std::vector<Task> tasks;
  for (const auto& s : samples) {
    for (auto m : options.modes) {
      for (const auto& model : options.models) {
        ++summary.total_tasks;
        if (done.count({s.sample_id, std::string(to_string(m)), model})) {
          ++summary.skipped_existing;
          continue;
        }
        tasks.push_back({&s, m, &model});
      }
    }
  }

  // Rewrite what survived from the previous run, then append as verdicts land.
  write_sorted(options.output_path, existing);
  std::ofstream out(options.output_path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + options.output_path.string());

  std::mutex mu;
  std::vector<PhishingVerdict> fresh;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> interrupted{false};

  auto worker = [&] {
    while (true) {
      if (options.stop && options.stop->load()) {
        if (next.load() < tasks.size()) interrupted = true;
        return;
      }
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      PhishingVerdict v = detect(*t.snapshot, t.mode, *t.model, gateway, config);
      std::lock_guard lock(mu);
      out << to_json(v).dump() << '\n';
      out.flush();
      summary.usage += v.usage;
      ++summary.outcome_counts[v.outcome];
      fresh.push_back(std::move(v));
    }
  };

  std::size_t n_threads = std::min(options.max_in_flight, tasks.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  out.close();

  summary.processed = fresh.size();
  summary.interrupted = interrupted;
  existing.insert(existing.end(), std::make_move_iterator(fresh.begin()),
                  std::make_move_iterator(fresh.end()));
  write_sorted(options.output_path, std::move(existing));
  return summary;
}

}  // namespace brandlens
