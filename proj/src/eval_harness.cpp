#include "brandlens/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace brandlens {

using nlohmann::json;
using nlohmann::ordered_json;

void BrandAliases::add(std::string_view a, std::string_view b) {
  std::string na = normalize_brand(a), nb = normalize_brand(b);
  if (na.empty() || nb.empty()) throw std::invalid_argument("alias names must contain alphanumerics");
  auto ia = group_of_.find(na);
  auto ib = group_of_.find(nb);
  if (ia == group_of_.end() && ib == group_of_.end()) {
    group_of_[na] = group_of_[nb] = next_group_++;
  } else if (ia == group_of_.end()) {
    group_of_[na] = ib->second;
  } else if (ib == group_of_.end()) {
    group_of_[nb] = ia->second;
  } else if (ia->second != ib->second) {
    std::size_t from = ib->second, to = ia->second;
    for (auto& [name, g] : group_of_) {
      if (g == from) g = to;
    }
  }
}

bool BrandAliases::equivalent(std::string_view a, std::string_view b) const {
  std::string na = normalize_brand(a), nb = normalize_brand(b);
  if (na == nb) return true;
  auto ia = group_of_.find(na);
  auto ib = group_of_.find(nb);
  return ia != group_of_.end() && ib != group_of_.end() && ia->second == ib->second;
}

bool brand_match(std::string_view identified, std::string_view truth_brand,
                 const BrandAliases& aliases) {
  std::string a = normalize_brand(identified), b = normalize_brand(truth_brand);
  if (a.empty() || b.empty()) return false;
  return a == b || aliases.equivalent(a, b);
}

std::vector<EvalRecord> make_eval_records(const std::vector<PhishingVerdict>& verdicts,
                                          const std::map<std::string, SampleLabel>& labels,
                                          const BrandAliases& aliases,
                                          std::vector<std::string>* unlabeled) {
  std::vector<EvalRecord> out;
  for (const auto& v : verdicts) {
    auto it = labels.find(v.sample_id);
    if (it == labels.end()) {
      if (unlabeled) unlabeled->push_back(v.sample_id);
      continue;
    }
    EvalRecord r;
    r.sample_id = v.sample_id;
    r.truth = it->second.truth;
    r.truth_brand = it->second.brand;
    r.model = v.model;
    r.mode = v.mode;
    r.predicted = v.outcome;
    if (v.outcome != VerdictOutcome::Invalid && v.outcome != VerdictOutcome::Error) {
      if (r.truth_brand) {
        r.brand_correct = v.identified_brand && brand_match(*v.identified_brand, *r.truth_brand, aliases);
      } else {
        // No brand on the label: only "no brand" is right.
        r.brand_correct = !v.identified_brand.has_value();
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

ConfusionMetrics confusion_metrics(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw EmptyInput("confusion_metrics needs at least one record");
  ConfusionMetrics m;
  auto& c = m.counts;
  for (const auto& r : records) {
    bool actual = r.truth == GroundTruth::Phishing;
    bool predicted = r.predicted == VerdictOutcome::Phishing;
    if (actual && predicted) ++c.tp;
    else if (!actual && predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  // Harmonic mean of P and R, written over the counts so it rounds once.
  if (m.precision && m.recall && c.tp > 0) {
    m.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  }
  return m;
}

std::string_view to_string(EffectCategory category) {
  switch (category) {
    case EffectCategory::NegativeSS:
      return "negative_ss";
    case EffectCategory::NegativeHTML:
      return "negative_html";
    case EffectCategory::RelyingOnSS:
      return "relying_on_ss";
    case EffectCategory::RelyingOnHTML:
      return "relying_on_html";
    case EffectCategory::Conflict:
      return "conflict";
    case EffectCategory::Synergy:
      return "synergy";
    case EffectCategory::AllCorrect:
      return "all_correct";
    case EffectCategory::AllWrong:
      return "all_wrong";
  }
  return "all_wrong";
}

EffectCategory categorize_input_effect(bool ss, bool html, bool both) {
  if (both) {
    if (ss && html) return EffectCategory::AllCorrect;
    if (ss) return EffectCategory::RelyingOnSS;
    if (html) return EffectCategory::RelyingOnHTML;
    return EffectCategory::Synergy;
  }
  if (ss && html) return EffectCategory::Conflict;
  if (ss) return EffectCategory::NegativeHTML;
  if (html) return EffectCategory::NegativeSS;
  return EffectCategory::AllWrong;
}

std::map<std::string, EffectTally> effect_categories(const std::vector<EvalRecord>& records) {
  // model -> sample -> correctness per mode
  std::map<std::string, std::map<std::string, std::array<std::optional<bool>, 3>>> grid;
  for (const auto& r : records) {
    auto& slot = grid[r.model][r.sample_id][static_cast<std::size_t>(r.mode)];
    if (slot) {
      throw KeyMismatch("duplicate record for " + r.model + "/" + r.sample_id + "/" +
                        std::string(to_string(r.mode)));
    }
    slot = r.brand_correct.value_or(false);
  }
  std::map<std::string, EffectTally> out;
  for (const auto& [model, samples] : grid) {
    EffectTally t;
    for (auto c : kAllEffectCategories) t.counts[c] = 0;
    for (const auto& [id, modes] : samples) {
      const auto& ss = modes[static_cast<std::size_t>(InputMode::ScreenshotOnly)];
      const auto& html = modes[static_cast<std::size_t>(InputMode::HtmlOnly)];
      const auto& both = modes[static_cast<std::size_t>(InputMode::Both)];
      if (!ss || !html || !both) {
        ++t.incomplete_samples;
        continue;
      }
      ++t.counts[categorize_input_effect(*ss, *html, *both)];
      ++t.keyed_samples;
    }
    out[model] = std::move(t);
  }
  return out;
}

ExclusiveWins exclusive_wins(const std::vector<EvalRecord>& records) {
  using Key = std::pair<std::string, InputMode>;
  std::map<std::string, std::map<Key, const EvalRecord*>> by_model;
  for (const auto& r : records) {
    auto [it, inserted] = by_model[r.model].emplace(Key{r.sample_id, r.mode}, &r);
    if (!inserted) {
      throw KeyMismatch("duplicate record for " + r.model + "/" + r.sample_id + "/" +
                        std::string(to_string(r.mode)));
    }
  }
  if (by_model.size() < 2) throw InsufficientModels("exclusive wins need at least two models");

  const auto& reference = by_model.begin()->second;
  for (const auto& [model, keyed] : by_model) {
    if (keyed.size() != reference.size() ||
        !std::equal(keyed.begin(), keyed.end(), reference.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw KeyMismatch("model " + model + " covers a different (sample, mode) set than " +
                        by_model.begin()->first);
    }
  }

  ExclusiveWins out;
  for (const auto& [model, keyed] : by_model) {
    out[model][GroundTruth::Benign] = {};
    out[model][GroundTruth::Phishing] = {};
  }
  for (const auto& [key, ref] : reference) {
    long correct_models = 0;
    const std::string* winner = nullptr;
    for (const auto& [model, keyed] : by_model) {
      const EvalRecord* r = keyed.at(key);
      if (r->truth != ref->truth) {
        throw KeyMismatch("conflicting truth labels for sample " + key.first);
      }
      if (r->brand_correct.value_or(false)) {
        ++correct_models;
        winner = &model;
      }
    }
    for (auto& [model, per_class] : out) ++per_class[ref->truth].keys;
    if (correct_models == 1) ++out[*winner][ref->truth].wins;
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<long>& v, double p) {
  double pos = p * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return static_cast<double>(v[lo]) + frac * static_cast<double>(v[hi] - v[lo]);
}

}  // namespace

TokenStats token_stats(const std::vector<long>& values) {
  if (values.empty()) throw EmptyInput("token_stats needs at least one value");
  std::vector<long> v = values;
  std::sort(v.begin(), v.end());
  TokenStats s;
  s.count = v.size();
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  long double sum = 0;
  for (long x : v) sum += x;
  s.mean = static_cast<double>(sum / static_cast<long double>(v.size()));
  double fence = s.q3 + 1.5 * (s.q3 - s.q1);
  for (long x : v) {
    if (static_cast<double>(x) > fence) s.outliers.push_back(x);
  }
  return s;
}

TokenStats token_stats(const std::vector<TokenUsage>& usages) {
  std::vector<long> totals;
  totals.reserve(usages.size());
  for (const auto& u : usages) totals.push_back(u.total());
  return token_stats(totals);
}

ordered_json to_json(const ConfusionMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  ordered_json j;
  j["tp"] = m.counts.tp;
  j["fp"] = m.counts.fp;
  j["fn"] = m.counts.fn;
  j["tn"] = m.counts.tn;
  j["precision"] = opt(m.precision);
  j["recall"] = opt(m.recall);
  j["f1"] = opt(m.f1);
  return j;
}

ordered_json to_json(const TokenStats& s) {
  ordered_json j;
  j["count"] = s.count;
  j["min"] = s.min;
  j["q1"] = s.q1;
  j["median"] = s.median;
  j["q3"] = s.q3;
  j["max"] = s.max;
  j["mean"] = s.mean;
  j["outliers"] = s.outliers;
  return j;
}

std::map<std::string, SampleLabel> load_labels(const std::filesystem::path& path) {
  std::map<std::string, SampleLabel> labels;
  if (std::filesystem::is_directory(path)) {
    ScanResult scan = scan_dataset(path);
    for (const auto& s : scan.snapshots) {
      if (s.label) labels[s.sample_id] = *s.label;
    }
    return labels;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read labels file " + path.string());
  json j = json::parse(in);
  if (!j.is_object()) throw std::runtime_error("labels file must be a JSON object");
  for (const auto& [id, entry] : j.items()) {
    if (!entry.is_object() || !entry.contains("class") || !entry["class"].is_string()) {
      throw std::runtime_error("label for " + id + " needs a \"class\"");
    }
    auto truth = ground_truth_from_string(entry["class"].get<std::string>());
    if (!truth) throw std::runtime_error("label for " + id + " has an unknown class");
    SampleLabel l;
    l.truth = *truth;
    if (entry.contains("brand") && entry["brand"].is_string()) l.brand = entry["brand"].get<std::string>();
    labels[id] = l;
  }
  return labels;
}

BrandAliases load_aliases(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read aliases file " + path.string());
  json j = json::parse(in);
  if (!j.is_array()) throw std::runtime_error("aliases file must be an array of name groups");
  BrandAliases aliases;
  for (const auto& group : j) {
    if (!group.is_array() || group.size() < 2) {
      throw std::runtime_error("each alias group needs at least two names");
    }
    for (std::size_t i = 1; i < group.size(); ++i) {
      aliases.add(group[0].get<std::string>(), group[i].get<std::string>());
    }
  }
  return aliases;
}

namespace {

std::string csv_num(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

using GroupKey = std::pair<std::string, InputMode>;

}  // namespace

EvalReport build_report(const std::vector<PhishingVerdict>& verdicts,
                        const std::map<std::string, SampleLabel>& labels,
                        const BrandAliases& aliases) {
  std::vector<std::string> unlabeled;
  auto records = make_eval_records(verdicts, labels, aliases, &unlabeled);
  if (records.empty()) throw EmptyInput("no verdict matched a labeled sample");

  EvalReport report;
  ordered_json& j = report.json;
  j["records"] = records.size();
  j["unlabeled_verdicts"] = unlabeled.size();
  j["negative_outcomes"] = "unknown, invalid and error predictions count as not-phishing";

  std::map<GroupKey, std::vector<EvalRecord>> groups;
  for (const auto& r : records) groups[{r.model, r.mode}].push_back(r);

  std::ostringstream mcsv;
  mcsv << "model,mode,tp,fp,fn,tn,precision,recall,f1,brand_accuracy\n";
  j["metrics"] = ordered_json::array();
  for (const auto& [key, rs] : groups) {
    auto m = confusion_metrics(rs);
    long graded = 0, correct = 0;
    for (const auto& r : rs) {
      if (r.brand_correct) {
        ++graded;
        correct += *r.brand_correct ? 1 : 0;
      }
    }
    std::optional<double> acc;
    if (graded > 0) acc = static_cast<double>(correct) / static_cast<double>(graded);
    ordered_json e;
    e["model"] = key.first;
    e["mode"] = to_string(key.second);
    const ordered_json mj = to_json(m);
    for (auto& [k, v] : mj.items()) e[k] = v;
    e["brand_accuracy"] = acc ? json(*acc) : json(nullptr);
    j["metrics"].push_back(e);
    mcsv << csv_field(key.first) << ',' << to_string(key.second) << ',' << m.counts.tp << ','
         << m.counts.fp << ',' << m.counts.fn << ',' << m.counts.tn << ',' << csv_num(m.precision)
         << ',' << csv_num(m.recall) << ',' << csv_num(m.f1) << ',' << csv_num(acc) << '\n';
  }
  report.metrics_csv = mcsv.str();

  std::ostringstream wcsv;
  wcsv << "model,class,wins,keys,percent\n";
  try {
    auto wins = exclusive_wins(records);
    ordered_json w = ordered_json::object();
    for (const auto& [model, per_class] : wins) {
      ordered_json m = ordered_json::object();
      for (const auto& [truth, count] : per_class) {
        auto pct = count.percent();
        m[to_string(truth)] = {{"wins", count.wins},
                               {"keys", count.keys},
                               {"percent", pct ? json(*pct) : json(nullptr)}};
        wcsv << csv_field(model) << ',' << to_string(truth) << ',' << count.wins << ','
             << count.keys << ',' << csv_num(pct) << '\n';
      }
      w[model] = m;
    }
    j["exclusive_wins"] = w;
  } catch (const std::invalid_argument& e) {
    j["exclusive_wins"] = {{"unavailable", e.what()}};
  }
  report.wins_csv = wcsv.str();

  std::ostringstream ecsv;
  ecsv << "model,category,count\n";
  ordered_json effects = ordered_json::object();
  for (const auto& [model, tally] : effect_categories(records)) {
    ordered_json t;
    for (auto c : kAllEffectCategories) {
      t[std::string(to_string(c))] = tally.counts.at(c);
      ecsv << csv_field(model) << ',' << to_string(c) << ',' << tally.counts.at(c) << '\n';
    }
    t["keyed_samples"] = tally.keyed_samples;
    t["incomplete_samples"] = tally.incomplete_samples;
    effects[model] = t;
  }
  j["effect_categories"] = effects;
  report.effects_csv = ecsv.str();

  j["token_stats"] = cost_report(verdicts)["token_stats"];
  std::ostringstream tcsv;
  tcsv << "model,mode,count,min,q1,median,q3,max,mean,outliers\n";
  for (const auto& e : j["token_stats"]) {
    tcsv << csv_field(e["model"].get<std::string>()) << ',' << e["mode"].get<std::string>() << ','
         << e["count"] << ',' << e["min"] << ',' << e["q1"] << ',' << e["median"] << ','
         << e["q3"] << ',' << e["max"] << ',' << e["mean"] << ',' << e["outliers"].size() << '\n';
  }
  report.tokens_csv = tcsv.str();
  return report;
}

ordered_json cost_report(const std::vector<PhishingVerdict>& verdicts) {
  std::map<GroupKey, std::vector<TokenUsage>> groups;
  for (const auto& v : verdicts) {
    // Verdicts that never reached a model carry no usage and are left out.
    if (v.usage.total() > 0) groups[{v.model, v.mode}].push_back(v.usage);
  }
  ordered_json j;
  j["token_stats"] = ordered_json::array();
  TokenUsage grand;
  for (const auto& [key, usages] : groups) {
    ordered_json e;
    e["model"] = key.first;
    e["mode"] = to_string(key.second);
    TokenUsage sum;
    for (const auto& u : usages) sum += u;
    grand += sum;
    const ordered_json sj = to_json(token_stats(usages));
    for (auto& [k, v] : sj.items()) e[k] = v;
    e["input_tokens"] = sum.input_tokens;
    e["output_tokens"] = sum.output_tokens;
    e["total_tokens"] = sum.total();
    j["token_stats"].push_back(e);
  }
  j["total"] = to_json(grand);
  return j;
}

}  // namespace brandlens
