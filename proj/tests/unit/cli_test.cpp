#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "brandlens/cli.hpp"
#include "test_support.hpp"

using namespace brandlens;
using brandlens::testing::fixtures_dir;
using brandlens::testing::read_text;
using brandlens::testing::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') {
      q += "'\\''";
    } else {
      q += c;
    }
  }
  return q + "'";
}

// Runs the real binary with a scrubbed credential environment.
Run run(const std::vector<std::string>& args, const std::string& env = "") {
  static TempDir scratch;
  static int counter = 0;
  auto err_path = scratch / ("err" + std::to_string(counter++));
  std::string cmd = "env -u BRANDLENS_API_KEY_OPENAI -u BRANDLENS_API_KEY_ANTHROPIC -u BRANDLENS_API_KEY_GOOGLE " +
                    env + " " + quote(BRANDLENS_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " 2>" + quote(err_path.string());
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_text(err_path);
  return r;
}

std::vector<nlohmann::json> json_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::set<std::string> long_flags(const std::string& text) {
  static const std::regex kFlag("--[a-z][a-z0-9-]*");
  std::set<std::string> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kFlag); it != std::sregex_iterator(); ++it) {
    out.insert(it->str());
  }
  return out;
}

const std::string kGpt = "openai/gpt-4-turbo";

std::string corpus_root() { return (fixtures_dir() / "corpus" / "dataset").string(); }
std::string corpus_fixtures() { return (fixtures_dir() / "corpus" / "transcripts.jsonl").string(); }

}  // namespace

TEST(CliExitCodes, VerdictMapping) {
  EXPECT_EQ(verdict_exit_code(VerdictOutcome::Genuine), 0);
  EXPECT_EQ(verdict_exit_code(VerdictOutcome::Phishing), 3);
  EXPECT_EQ(verdict_exit_code(VerdictOutcome::Unknown), 4);
  EXPECT_EQ(verdict_exit_code(VerdictOutcome::Invalid), 5);
  EXPECT_EQ(verdict_exit_code(VerdictOutcome::Error), 6);
}

TEST(Cli, DetectWhatsAppReplay) {
  auto r = run({"detect", (fixtures_dir() / "whatsapp" / "dataset" / "polert_whatsapp").string(), "--mode", "both",
                "--model", kGpt, "--fixtures", (fixtures_dir() / "whatsapp" / "transcripts.jsonl").string()});
  EXPECT_EQ(r.code, 3) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["outcome"], "phishing");
  EXPECT_EQ(j["identified_brand"], "WhatsApp");
  EXPECT_EQ(j["genuine_url"], "https://www.whatsapp.com");
}

TEST(Cli, DetectOutcomesMapToExitCodes) {
  auto detect = [](const std::string& id, const std::string& model, const std::string& mode) {
    return run({"detect", corpus_root() + "/" + id, "--mode", mode, "--model", model, "--fixtures",
                corpus_fixtures()});
  };
  EXPECT_EQ(detect("c01_paypal_genuine", kGpt, "both").code, 0);
  EXPECT_EQ(detect("c08_netflix_phish", kGpt, "html").code, 4);
  EXPECT_EQ(detect("c07_blank_page", kGpt, "both").code, 5);
  auto err = detect("c09_chase_phish", "anthropic/claude-3-opus", "both");
  EXPECT_EQ(err.code, 6);
  EXPECT_EQ(nlohmann::json::parse(err.out)["error"]["kind"], "safety_filter");
}

TEST(Cli, BaselineVerifierFlag) {
  auto r = run({"detect", corpus_root() + "/c04_whatsapp_phish", "--mode", "both", "--model", kGpt, "--verifier",
                "baseline", "--fixtures", corpus_fixtures()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["phase2_evidence"].get<std::string>().rfind("string-match", 0), 0u);
}

TEST(Cli, FilterFlagsBlankPage) {
  auto r = run({"filter", corpus_root()});
  ASSERT_EQ(r.code, 0) << r.err;
  bool found = false;
  for (const auto& j : json_lines(r.out)) {
    if (j["sample_id"] != "c07_blank_page") {
      EXPECT_TRUE(j["valid"].get<bool>()) << j.dump();
      continue;
    }
    found = true;
    EXPECT_FALSE(j["valid"].get<bool>());
    EXPECT_EQ(j["outcomes"]["pixel_stddev"]["status"], "fail");
    EXPECT_EQ(j["outcomes"]["semantic_blank"]["status"], "fail");
  }
  EXPECT_TRUE(found);
}

TEST(Cli, FilterCalibration) {
  TempDir dir;
  std::ofstream(dir / "cal.json") << R"({"blank": ["c07_blank_page"], "content": ["c01_paypal_genuine"]})";
  auto r = run({"filter", corpus_root(), "--calibrate", (dir / "cal.json").string()});
  EXPECT_EQ(r.code, 64);  // two examples of each class are required
  EXPECT_EQ(nlohmann::json::parse(r.err)["command"], "filter");
}

TEST(Cli, ScanReportsDuplicates) {
  TempDir dir;
  auto r = run({"scan", corpus_root(), "--dedup-report", (dir / "dups.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json_lines(r.out).size(), 8u);
  auto dups = json_lines(read_text(dir / "dups.jsonl"));
  ASSERT_EQ(dups.size(), 1u);
  EXPECT_EQ(dups[0]["dropped"], "c03_paypal_phish_copy");
}

TEST(Cli, ExtractRespectsBudget) {
  auto r = run({"extract", (fixtures_dir() / "whatsapp" / "dataset" / "polert_whatsapp").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["title"], "WhatsApp");
  EXPECT_EQ(run({"extract", corpus_root() + "/c01_paypal_genuine", "--max-chars", "10"}).code, 64);
}

TEST(Cli, BatchResumeMakesNoCalls) {
  TempDir dir;
  auto out = (dir / "results.jsonl").string();
  std::vector<std::string> args = {"batch", corpus_root(), "--modes", "screenshot", "html", "both", "--models",
                                   kGpt, "anthropic/claude-3-opus", "--fixtures", corpus_fixtures(), "--out", out};
  auto first = run(args);
  ASSERT_EQ(first.code, 0) << first.err;
  auto s1 = nlohmann::json::parse(first.out);
  EXPECT_EQ(s1["total_tasks"], 48);
  EXPECT_GT(s1["gateway_attempts"].get<int>(), 0);
  const std::string written = read_text(out);

  args.push_back("--resume");
  auto second = run(args);
  ASSERT_EQ(second.code, 0) << second.err;
  auto s2 = nlohmann::json::parse(second.out);
  EXPECT_EQ(s2["gateway_attempts"], 0);
  EXPECT_EQ(s2["skipped_existing"], 48);
  EXPECT_EQ(read_text(out), written);

  auto ev = run({"eval", "--results", out, "--labels", corpus_root(), "--aliases",
                 (fixtures_dir() / "corpus" / "aliases.json").string(), "--csv-dir", (dir / "csv").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  auto report = nlohmann::json::parse(ev.out);
  EXPECT_TRUE(report.contains("metrics"));
  EXPECT_TRUE(std::filesystem::exists(dir / "csv"));

  auto cost = run({"cost", "--results", out});
  ASSERT_EQ(cost.code, 0) << cost.err;
  EXPECT_FALSE(nlohmann::json::parse(cost.out).empty());
}

TEST(Cli, ErrorsAreSingleLineJson) {
  auto missing = run({"eval", "--results", "/nonexistent/results.jsonl", "--labels", corpus_root()});
  EXPECT_EQ(missing.code, 2);
  auto j = nlohmann::json::parse(missing.err);
  EXPECT_EQ(j["error"], "unreadable_input");
  EXPECT_EQ(j["command"], "eval");
  EXPECT_EQ(std::count(missing.err.begin(), missing.err.end(), '\n'), 1);

  auto usage = run({"detect", "--no-such-flag"});
  EXPECT_EQ(usage.code, 64);
  EXPECT_EQ(nlohmann::json::parse(usage.err)["error"], "usage");

  auto bad_mode = run({"detect", corpus_root() + "/c01_paypal_genuine", "--mode", "pdf", "--model", kGpt,
                       "--fixtures", corpus_fixtures()});
  EXPECT_EQ(bad_mode.code, 64);

  auto no_sample = run({"detect", "/nonexistent/sample", "--mode", "both", "--model", kGpt, "--fixtures",
                        corpus_fixtures()});
  EXPECT_EQ(no_sample.code, 2);
}

TEST(Cli, LiveTransportNeedsEnvironmentCredentials) {
  TempDir dir;
  std::ofstream(dir / "cfg.json") << R"({"providers": {"openai": {"kind": "openai", "base_url": "https://api.openai.com"}}})";
  auto r = run({"--config", (dir / "cfg.json").string(), "detect", corpus_root() + "/c01_paypal_genuine", "--mode",
                "both", "--model", kGpt, "--transport", "live"});
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(r.err.find("BRANDLENS_API_KEY_OPENAI"), std::string::npos) << r.err;
}

TEST(Cli, FixturesCheck) {
  auto ok = run({"fixtures", "check", corpus_fixtures()});
  EXPECT_EQ(ok.code, 0) << ok.err;
  TempDir dir;
  std::ofstream(dir / "bad.jsonl") << "{\"hash\": 1}\n";
  auto bad = run({"fixtures", "check", (dir / "bad.jsonl").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(nlohmann::json::parse(bad.err)["error"], "fixture_corrupt");
}

TEST(Cli, PublicSuffixCommand) {
  auto info = run({"psl"});
  ASSERT_EQ(info.code, 0);
  auto j = nlohmann::json::parse(info.out);
  EXPECT_GT(j["rules"].get<int>(), 5000);
  EXPECT_FALSE(j["version"].get<std::string>().empty());
  auto d = run({"psl", "https://a.b.example.co.uk/x"});
  EXPECT_EQ(nlohmann::json::parse(d.out)["registrable_domain"], "example.co.uk");

  TempDir dir;
  std::ofstream(dir / "tiny.dat") << "// ===BEGIN ICANN DOMAINS===\nexample\n";
  auto custom = run({"psl", "--list", (dir / "tiny.dat").string(), "--install-to", (dir / "copy.dat").string(),
                     "https://x.y.example/"});
  ASSERT_EQ(custom.code, 0) << custom.err;
  EXPECT_EQ(nlohmann::json::parse(custom.out)["registrable_domain"], "y.example");
  EXPECT_EQ(read_text(dir / "copy.dat"), read_text(dir / "tiny.dat"));
}

TEST(Cli, NoCredentialFlags) {
  auto help = run({"--help-all"});
  ASSERT_EQ(help.code, 0);
  for (const auto& f : long_flags(help.out)) {
    EXPECT_EQ(f.find("key"), std::string::npos) << f;
    EXPECT_EQ(f.find("token"), std::string::npos) << f;
    EXPECT_EQ(f.find("secret"), std::string::npos) << f;
  }
}

TEST(Cli, ReadmeFlagsMatchHelp) {
  const std::string readme = read_text(brandlens::testing::source_dir() / "README.md");
  auto start = readme.find("\n## CLI");
  ASSERT_NE(start, std::string::npos);
  auto end = readme.find("\n## ", start + 1);
  auto section = readme.substr(start, end == std::string::npos ? std::string::npos : end - start);
  auto help = run({"--help-all"});
  ASSERT_EQ(help.code, 0);
  EXPECT_EQ(long_flags(section), long_flags(help.out));
}
