#include "brandlens/cli.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "brandlens/config.hpp"
#include "brandlens/eval_harness.hpp"
#include "brandlens/html_extractor.hpp"
#include "brandlens/public_suffix.hpp"
#include "brandlens/validity_filter.hpp"

namespace brandlens {

using nlohmann::json;
using nlohmann::ordered_json;

int verdict_exit_code(VerdictOutcome outcome) {
  switch (outcome) {
    case VerdictOutcome::Genuine:
      return exit_code::kOk;
    case VerdictOutcome::Phishing:
      return exit_code::kPhishing;
    case VerdictOutcome::Unknown:
      return exit_code::kUnknown;
    case VerdictOutcome::Invalid:
      return exit_code::kInvalid;
    case VerdictOutcome::Error:
      return exit_code::kError;
  }
  return exit_code::kError;
}

std::atomic<bool>& cli_stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

struct CliFailure : std::runtime_error {
  CliFailure(int code, std::string kind, const std::string& message)
      : std::runtime_error(message), code(code), kind(std::move(kind)) {}
  int code;
  std::string kind;
};

// Screenshot OCR through an external command: `<cmd> <png path>`, text on stdout.
class CommandOcr : public OcrProvider {
 public:
  explicit CommandOcr(std::string command) : command_(std::move(command)) {}

  std::string recognize(const Image& image) override {
    auto path = std::filesystem::temp_directory_path() /
                ("brandlens-ocr-" + std::to_string(counter_++) + ".png");
    {
      std::ofstream f(path, std::ios::binary);
      f << encode_png(image);
      if (!f) throw OcrBackendError("cannot write " + path.string());
    }
    std::string cmd = command_ + " '" + path.string() + "'";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
      std::filesystem::remove(path);
      throw OcrBackendError("cannot run " + command_);
    }
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) text.append(buf, n);
    int status = pclose(pipe);
    std::filesystem::remove(path);
    if (status != 0) throw OcrBackendError(command_ + " exited with status " + std::to_string(status));
    return text;
  }

 private:
  std::string command_;
  int counter_ = 0;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CliFailure(exit_code::kFailure, "unwritable_output", "cannot write " + path);
  return f;
}

void require_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw CliFailure(exit_code::kUnreadableInput, "unreadable_input", "no such file " + path);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure(exit_code::kUnreadableInput, "unreadable_input", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flags shared by detect and batch.
struct RunFlags {
  std::string mode;
  std::vector<std::string> modes;
  std::vector<std::string> models;
  std::string verifier;
  std::string transport;
  std::string fixtures;
  std::size_t max_in_flight = 0;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--verifier", f.verifier, "Phase-2 verifier: llm or baseline");
  cmd->add_option("--transport", f.transport, "LLM transport: live, record or replay");
  cmd->add_option("--fixtures", f.fixtures, "Fixture JSONL read by replay and appended to by record");
}

RunConfig merged_config(const std::string& config_path, const RunFlags& f) {
  RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  std::vector<std::string> modes = f.modes;
  if (!f.mode.empty()) modes = {f.mode};
  if (!modes.empty()) {
    c.modes.clear();
    for (const auto& m : modes) {
      auto mode = input_mode_from_string(m);
      if (!mode) throw ConfigError("unknown mode '" + m + "' (screenshot, html, both)");
      c.modes.push_back(*mode);
    }
  }
  if (!f.models.empty()) c.models = f.models;
  if (!f.verifier.empty()) {
    auto v = verifier_from_string(f.verifier);
    if (!v) throw ConfigError("verifier must be llm or baseline");
    c.verifier = *v;
  }
  if (!f.transport.empty()) {
    auto t = transport_kind_from_string(f.transport);
    if (!t) throw ConfigError("transport must be live, record or replay");
    c.transport = *t;
  }
  if (!f.fixtures.empty()) c.fixture_path = f.fixtures;
  if (f.max_in_flight > 0) c.max_in_flight = f.max_in_flight;
  if (c.models.empty()) throw ConfigError("no model given (use --model or the config file)");
  validate_run_config(c);
  return c;
}

struct Runtime {
  std::unique_ptr<Transport> live;
  std::unique_ptr<Transport> transport;
  std::unique_ptr<Gateway> gateway;
};

Runtime make_runtime(const RunConfig& c) {
  Runtime rt;
  switch (c.transport) {
    case TransportKind::Replay:
      rt.transport = std::make_unique<ReplayTransport>(c.fixture_path);
      break;
    case TransportKind::Live:
      rt.transport = std::make_unique<HttpProviderTransport>(c.providers);
      break;
    case TransportKind::Record:
      rt.live = std::make_unique<HttpProviderTransport>(c.providers);
      rt.transport = std::make_unique<RecordingTransport>(*rt.live, c.fixture_path);
      break;
  }
  GatewayOptions opts;
  opts.rate_limit_per_second = c.rate_limit_per_second;
  opts.retry.retry_safety_once = c.retry_safety_once;
  rt.gateway = std::make_unique<Gateway>(*rt.transport, opts);
  return rt;
}

ordered_json manifest_entry(const WebpageSnapshot& s) {
  ordered_json j;
  j["sample_id"] = s.sample_id;
  j["url"] = s.url;
  j["http_status"] = s.http_status;
  j["has_screenshot"] = s.screenshot.has_value();
  if (s.label) {
    j["label"] = to_string(s.label->truth);
    j["brand"] = s.label->brand ? json(*s.label->brand) : json(nullptr);
  } else {
    j["label"] = nullptr;
    j["brand"] = nullptr;
  }
  return j;
}

ordered_json load_errors_json(const DedupReport& report) {
  ordered_json a = ordered_json::array();
  for (const auto& e : report.errors) {
    a.push_back({{"sample_id", e.sample_id}, {"kind", e.kind}, {"message", e.message}});
  }
  return a;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-phase LLM phishing webpage detection: brand identification, then domain verification.",
               "brandlens"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration; command-line flags override it");

  // scan
  auto* scan = app.add_subcommand("scan", "Load a dataset, report duplicates and unreadable samples");
  std::string scan_root, scan_manifest, scan_dedup;
  scan->add_option("root", scan_root, "Dataset directory")->required();
  scan->add_option("--manifest", scan_manifest, "Write the sample manifest JSONL here instead of stdout");
  scan->add_option("--dedup-report", scan_dedup, "Write {retained, dropped} JSONL duplicate pairs here");

  // filter
  auto* filter = app.add_subcommand("filter", "Run the invalid-sample checks over a dataset");
  std::string filter_root, filter_calibrate, filter_out, filter_ocr, filter_thresholds_out;
  filter->add_option("root", filter_root, "Dataset directory")->required();
  filter->add_option("--calibrate", filter_calibrate,
                     "JSON {\"blank\": [ids], \"content\": [ids]}; derive thresholds from these samples first");
  filter->add_option("--out", filter_out, "Write ValidityReport JSONL here instead of stdout");
  filter->add_option("--ocr-command", filter_ocr,
                     "OCR program run as '<cmd> <png path>', printing recognized text");
  filter->add_option("--thresholds-out", filter_thresholds_out, "Write the thresholds used as JSON");

  // extract
  auto* extract = app.add_subcommand("extract", "Print the HTML key information of one sample as JSON");
  std::string extract_sample;
  std::size_t extract_max = kDefaultHtmlBudgetChars;
  extract->add_option("sample", extract_sample, "Sample directory")->required();
  extract->add_option("--max-chars", extract_max, "Character budget after truncation")
      ->capture_default_str();

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "Classify one sample; the exit code encodes the outcome");
  std::string detect_sample, detect_model;
  RunFlags detect_flags;
  detect_cmd->add_option("sample", detect_sample, "Sample directory")->required();
  detect_cmd->add_option("--mode", detect_flags.mode, "Phase-1 input: screenshot, html or both");
  detect_cmd->add_option("--model", detect_model, "Model id <provider>/<model>");
  add_run_flags(detect_cmd, detect_flags);

  // batch
  auto* batch = app.add_subcommand("batch", "Classify every sample x mode x model into a results JSONL");
  std::string batch_root, batch_out;
  bool batch_resume = false;
  RunFlags batch_flags;
  batch->add_option("root", batch_root, "Dataset directory")->required();
  batch->add_option("--modes", batch_flags.modes, "Phase-1 inputs (screenshot, html, both)");
  batch->add_option("--models", batch_flags.models, "Model ids <provider>/<model>");
  batch->add_option("--out", batch_out, "Results JSONL path");
  batch->add_flag("--resume", batch_resume, "Skip (sample, mode, model) triples already in --out");
  batch->add_option("--max-in-flight", batch_flags.max_in_flight, "Concurrent detections (default 4)");
  add_run_flags(batch, batch_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "Compute metrics, exclusive wins and input-effect categories");
  std::string eval_results, eval_labels, eval_aliases, eval_csv, eval_out;
  eval->add_option("--results", eval_results, "Results JSONL from batch")->required();
  eval->add_option("--labels", eval_labels, "Dataset directory or labels JSON")->required();
  eval->add_option("--aliases", eval_aliases, "JSON array of equivalent brand-name groups");
  eval->add_option("--csv-dir", eval_csv, "Also write one CSV table per figure into this directory");
  eval->add_option("--out", eval_out, "Write the report here instead of stdout");

  // cost
  auto* cost = app.add_subcommand("cost", "Token statistics per (model, mode)");
  std::string cost_results;
  cost->add_option("--results", cost_results, "Results JSONL from batch")->required();

  // fixtures
  auto* fixtures = app.add_subcommand("fixtures", "Inspect LLM fixture files");
  fixtures->require_subcommand(1);
  auto* fixtures_check = fixtures->add_subcommand("check", "Validate a fixture JSONL file");
  std::string fixtures_file;
  fixtures_check->add_option("file", fixtures_file, "Fixture JSONL")->required();

  // psl
  auto* psl = app.add_subcommand("psl", "Show the bundled public-suffix snapshot or registrable domains");
  std::vector<std::string> psl_urls;
  psl->add_option("urls", psl_urls, "URLs to reduce to their registrable domain");
  std::string psl_list;
  std::string psl_install_to;
  psl->add_option("--list", psl_list, "Public-suffix list file to use instead of the bundled snapshot");
  psl->add_option("--install-to", psl_install_to,
                  "Validate --list and copy it here (e.g. data/public_suffix_list.dat), then rebuild")
      ->needs("--list");

  std::string command = "brandlens";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << ordered_json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return exit_code::kUsage;
  }

  try {
    if (*scan) {
      command = "scan";
      ScanResult r = scan_dataset(scan_root);
      std::ofstream mf;
      if (!scan_manifest.empty()) mf = open_output(scan_manifest);
      std::ostream& m = scan_manifest.empty() ? out : mf;
      for (const auto& s : r.snapshots) m << manifest_entry(s).dump() << '\n';
      if (!scan_dedup.empty()) {
        auto f = open_output(scan_dedup);
        write_dedup_report_jsonl(f, r.report);
      }
      ordered_json summary{{"retained", r.snapshots.size()},
                           {"duplicates", r.report.drops.size()},
                           {"load_errors", load_errors_json(r.report)}};
      (scan_manifest.empty() ? err : out) << summary.dump() << '\n';
      return exit_code::kOk;
    }

    if (*filter) {
      command = "filter";
      ScanResult r = scan_dataset(filter_root);
      FilterOptions opts;
      if (!config_path.empty()) opts.thresholds = load_run_config(config_path).thresholds;
      std::unique_ptr<CommandOcr> ocr;
      if (!filter_ocr.empty()) {
        ocr = std::make_unique<CommandOcr>(filter_ocr);
        opts.ocr = ocr.get();
      }
      ordered_json warnings = ordered_json::array();
      if (!filter_calibrate.empty()) {
        json spec = json::parse(read_file(filter_calibrate), nullptr, false);
        if (spec.is_discarded() || !spec.is_object()) {
          throw CliFailure(exit_code::kUsage, "usage", "--calibrate file must be a JSON object");
        }
        std::map<std::string, const WebpageSnapshot*> by_id;
        for (const auto& s : r.snapshots) by_id[s.sample_id] = &s;
        std::vector<LabeledSnapshot> labeled;
        for (const auto& [key, blank] : {std::pair{"blank", true}, std::pair{"content", false}}) {
          for (const auto& id : spec.value(key, std::vector<std::string>{})) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
              throw CliFailure(exit_code::kUsage, "usage", "calibration sample not in dataset: " + id);
            }
            labeled.push_back({*it->second, blank});
          }
        }
        CalibrationResult cal;
        try {
          cal = calibrate_thresholds(labeled, opts.ocr, opts.thresholds);
        } catch (const InsufficientExamples& e) {
          throw CliFailure(exit_code::kUsage, "usage", e.what());
        }
        opts.thresholds = cal.thresholds;
        for (const auto& w : cal.warnings) warnings.push_back(w);
      }
      std::ofstream rf;
      if (!filter_out.empty()) rf = open_output(filter_out);
      std::ostream& reports = filter_out.empty() ? out : rf;
      std::map<std::string, long> fails;
      for (auto c : kAllValidityChecks) fails[std::string(to_string(c))] = 0;
      long valid = 0;
      for (const auto& s : r.snapshots) {
        auto rep = classify_validity(s, opts);
        reports << to_json(rep).dump() << '\n';
        valid += rep.valid ? 1 : 0;
        for (auto c : rep.failed_checks()) ++fails[std::string(to_string(c))];
      }
      if (!filter_thresholds_out.empty()) {
        auto f = open_output(filter_thresholds_out);
        f << to_json(opts.thresholds).dump(2) << '\n';
      }
      ordered_json summary{{"samples", r.snapshots.size()},
                           {"valid", valid},
                           {"invalid", static_cast<long>(r.snapshots.size()) - valid},
                           {"fail_counts", fails},
                           {"thresholds", to_json(opts.thresholds)},
                           {"calibration_warnings", warnings},
                           {"load_errors", load_errors_json(r.report)}};
      (filter_out.empty() ? err : out) << summary.dump() << '\n';
      return exit_code::kOk;
    }

    if (*extract) {
      command = "extract";
      if (extract_max < kMinHtmlBudgetChars) {
        throw CliFailure(exit_code::kUsage, "usage",
                         "--max-chars must be at least " + std::to_string(kMinHtmlBudgetChars));
      }
      WebpageSnapshot s = load_snapshot(extract_sample);
      out << to_json(truncate_for_budget(extract_key_info(s.html), extract_max)).dump(2) << '\n';
      return exit_code::kOk;
    }

    if (*detect_cmd) {
      command = "detect";
      if (!detect_model.empty()) detect_flags.models = {detect_model};
      RunConfig c = merged_config(config_path, detect_flags);
      if (c.modes.size() != 1 || c.models.size() != 1) {
        throw ConfigError("detect takes exactly one mode and one model");
      }
      WebpageSnapshot s = load_snapshot(detect_sample);
      Runtime rt = make_runtime(c);
      PhishingVerdict v = detect(s, c.modes.front(), c.models.front(), *rt.gateway, pipeline_config(c));
      out << to_json(v).dump() << '\n';
      return verdict_exit_code(v.outcome);
    }

    if (*batch) {
      command = "batch";
      RunConfig c = merged_config(config_path, batch_flags);
      if (!batch_out.empty()) c.output_path = batch_out;
      if (c.output_path.empty()) throw ConfigError("batch needs --out or output_path in the config");
      ScanResult r = scan_dataset(batch_root);
      Runtime rt = make_runtime(c);
      BatchOptions bo;
      bo.modes = c.modes;
      bo.models = c.models;
      bo.output_path = c.output_path;
      bo.resume = batch_resume;
      bo.max_in_flight = c.max_in_flight;
      bo.stop = &cli_stop_flag();
      BatchSummary sum = detect_batch(r.snapshots, *rt.gateway, pipeline_config(c), bo);
      ordered_json outcomes = ordered_json::object();
      for (const auto& [o, n] : sum.outcome_counts) outcomes[std::string(to_string(o))] = n;
      ordered_json j{{"total_tasks", sum.total_tasks},
                     {"skipped_existing", sum.skipped_existing},
                     {"processed", sum.processed},
                     {"gateway_attempts", rt.gateway->stats().attempts},
                     {"usage", to_json(sum.usage)},
                     {"outcomes", outcomes},
                     {"duplicates_dropped", r.report.drops.size()},
                     {"load_errors", load_errors_json(r.report)},
                     {"interrupted", sum.interrupted}};
      out << j.dump() << '\n';
      return sum.interrupted ? exit_code::kInterrupted : exit_code::kOk;
    }

    if (*eval) {
      command = "eval";
      require_file(eval_results);
      if (!std::filesystem::exists(eval_labels)) require_file(eval_labels);
      auto verdicts = read_results(eval_results);
      auto labels = load_labels(eval_labels);
      BrandAliases aliases = eval_aliases.empty() ? BrandAliases{} : load_aliases(eval_aliases);
      EvalReport rep = build_report(verdicts, labels, aliases);
      if (!eval_csv.empty()) {
        std::filesystem::create_directories(eval_csv);
        const std::filesystem::path dir = eval_csv;
        open_output((dir / "metrics.csv").string()) << rep.metrics_csv;
        open_output((dir / "exclusive_wins.csv").string()) << rep.wins_csv;
        open_output((dir / "effect_categories.csv").string()) << rep.effects_csv;
        open_output((dir / "token_stats.csv").string()) << rep.tokens_csv;
      }
      if (eval_out.empty()) {
        out << rep.json.dump(2) << '\n';
      } else {
        open_output(eval_out) << rep.json.dump(2) << '\n';
      }
      return exit_code::kOk;
    }

    if (*cost) {
      command = "cost";
      require_file(cost_results);
      out << cost_report(read_results(cost_results)).dump(2) << '\n';
      return exit_code::kOk;
    }

    if (*fixtures_check) {
      command = "fixtures check";
      require_file(fixtures_file);
      auto records = load_fixture_file(fixtures_file);
      std::set<std::string> hashes;
      long errors = 0;
      TokenUsage usage;
      for (const auto& r : records) {
        hashes.insert(r.hash);
        errors += r.error_kind ? 1 : 0;
        usage += r.usage;
      }
      out << ordered_json{{"records", records.size()},
                          {"distinct_hashes", hashes.size()},
                          {"error_records", errors},
                          {"usage", to_json(usage)}}
                 .dump()
          << '\n';
      return exit_code::kOk;
    }

    if (*psl) {
      command = "psl";
      std::optional<PublicSuffixList> loaded;
      std::string list_text;
      if (!psl_list.empty()) {
        require_file(psl_list);
        list_text = read_file(psl_list);
        loaded = PublicSuffixList::parse(list_text);
        if (loaded->rule_count() == 0) {
          throw CliFailure(exit_code::kUnreadableInput, "unreadable_input", psl_list + " has no suffix rules");
        }
      }
      const auto& list = loaded ? *loaded : PublicSuffixList::bundled();
      if (!psl_install_to.empty()) {
        auto f = open_output(psl_install_to);
        f << list_text;
      }
      if (psl_urls.empty()) {
        out << ordered_json{{"version", list.version()},
                            {"commit", list.commit()},
                            {"rules", list.rule_count()}}
                   .dump()
            << '\n';
      }
      for (const auto& u : psl_urls) {
        out << ordered_json{{"url", u}, {"registrable_domain", registrable_domain(u, list)}}.dump()
            << '\n';
      }
      return exit_code::kOk;
    }
  } catch (const CliFailure& e) {
    err << ordered_json{{"error", e.kind}, {"command", command}, {"message", e.what()}}.dump() << '\n';
    return e.code;
  } catch (const SnapshotError& e) {
    err << ordered_json{{"error", to_string(e.kind())}, {"command", command}, {"message", e.what()}}.dump()
        << '\n';
    return exit_code::kUnreadableInput;
  } catch (const ConfigError& e) {
    err << ordered_json{{"error", "config"}, {"command", command}, {"message", e.what()}}.dump() << '\n';
    return exit_code::kUsage;
  } catch (const InvalidUrl& e) {
    err << ordered_json{{"error", "invalid_url"}, {"command", command}, {"message", e.what()}}.dump() << '\n';
    return exit_code::kUsage;
  } catch (const FixtureError& e) {
    err << ordered_json{{"error", e.kind() == FixtureError::Kind::Miss ? "fixture_miss" : "fixture_corrupt"},
                        {"command", command},
                        {"message", e.what()}}
               .dump()
        << '\n';
    return e.kind() == FixtureError::Kind::Corrupt ? exit_code::kUnreadableInput : exit_code::kFailure;
  } catch (const std::exception& e) {
    err << ordered_json{{"error", "failure"}, {"command", command}, {"message", e.what()}}.dump() << '\n';
    return exit_code::kFailure;
  }
  return exit_code::kUsage;
}

}  // namespace brandlens
