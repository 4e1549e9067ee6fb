#include "brandlens/prompt_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <sstream>

#include "brandlens/text_util.hpp"
#include "brandlens/url.hpp"

namespace brandlens {

std::string_view to_string(InputMode mode) {
  switch (mode) {
    case InputMode::ScreenshotOnly:
      return "screenshot";
    case InputMode::HtmlOnly:
      return "html";
    case InputMode::Both:
      return "both";
  }
  return "unknown";
}

std::optional<InputMode> input_mode_from_string(std::string_view text) {
  std::string t = to_lower_ascii(trim(text));
  if (t == "screenshot" || t == "ss" || t == "screenshot_only") return InputMode::ScreenshotOnly;
  if (t == "html" || t == "html_only") return InputMode::HtmlOnly;
  if (t == "both") return InputMode::Both;
  return std::nullopt;
}

std::string_view to_string(DomainVerdict::Classification c) {
  return c == DomainVerdict::Classification::Genuine ? "Genuine" : "Phishing";
}

ResponseParseError::ResponseParseError(std::vector<std::string> missing_fields, std::string raw_text)
    : std::runtime_error([&] {
        std::string msg = "response is missing";
        for (const auto& f : missing_fields) msg += " " + f;
        return msg;
      }()),
      missing_(std::move(missing_fields)),
      raw_(std::move(raw_text)) {}

namespace prompt_text {

std::string_view screenshot_instructions() {
  return "I want you to act as a webpage brand identifier.\n"
         "Given a screenshot of a webpage. I want you to identify the brand of the webpage from "
         "the screenshot alone.\n"
         "Additionally, also note whether fields are asking for sensitive user credentials as "
         "well as any call-to-action buttons / links.\n"
         "Examples of sensitive user credentials: email, username, password, phone number, etc.\n"
         "Examples of call-to-action elements: buttons or links that lead to asking for user "
         "credentials.";
}

std::string_view html_instructions() {
  return "I want you to act as a webpage brand identifier.\n"
         "Given the key information from the HTML content of a webpage, I want you to identify "
         "the brand of the webpage from this information alone. The key information is extracted "
         "from the actual HTML script of the webpage, and this information includes the title of "
         "the webpage, the metadata, the favicon, the logo attribute, the footer and header text, "
         "and the nav bar. These areas are where the brand information can typically be found. "
         "Make good use of this information to identify the brand related to each webpage.";
}

std::string_view both_instructions() {
  return "I want you to act as a webpage brand identifier.\n"
         "Given a screenshot and key information from the HTML script of a webpage. I want you "
         "to identify the brand of the webpage from these two sources alone.\n"
         "Additionally, also note whether there are fields asking for sensitive user credentials "
         "as well as any call-to-action buttons/links.\n"
         "Examples of sensitive user credentials: email, username, password, phone number, etc.\n"
         "Examples of call-to-action elements: buttons or links that lead to asking for user "
         "credentials.";
}

std::string_view full_response_format() {
  return "Return your response in the following format, and replace everything in [] with your "
         "answer:\n"
         "1. Brand: [response]\n"
         "2. Has Credentials: [Yes/No]\n"
         "3. Has Call_To_Action: [Yes/No]\n"
         "4. List of credentials: [response if Yes for (2), otherwise NA. Keep within the top 10 "
         "fields.]\n"
         "5. List of call_to_action: [response if Yes for (3), otherwise NA. Keep within the top "
         "10 fields.]\n"
         "6. Confidence Score: [How confident are you when identifying the brand on a scale of "
         "0.00 to 10.00 (in 2 decimal places), 10.00 being absolutely confident, 0.00 being not "
         "confident]\n"
         "7. Supporting Evidence: [response, keep it within 300 words]";
}

// The double colon is in the published template.
std::string_view html_response_format() {
  return "Return your response in the following format, and replace everything in [] with your "
         "answer::\n"
         "1. Brand: [response]\n"
         "2. Confidence Score: [How confident are you when identifying the brand on a scale of "
         "0.00 to 10.00 (in 2 decimal places), 10.00 being absolutely confident, 0.00 being not "
         "confident]\n"
         "3. Supporting Evidence: [response, keep it within 300 words]";
}

std::string_view common_rules() {
  return "Please adhere strictly to the following rules for your analysis:\n"
         "1. Do not interact with the webpage in a live environment or use browser "
         "functionalities.\n"
         "2. Avoid inspecting the webpage's source code, the website's address bar, SSL "
         "certificates, URLs, or any interactive features.\n"
         "3. Your analysis should be grounded solely on the given input data.\n"
         "4. No additional resources or external validations should be used.\n"
         "\n"
         "Note that some pages may include information / logos of other brands, especially pages "
         "that use single sign-on features or pages created by website builders.";
}

std::string_view chain_of_thought() {
  return "Analyze the webpage screenshot by following these steps:\n"
         "1. Identify the webpage brand based on information available from the html script.\n"
         "2. The brand can be obtained from any part of the information (i.e., title, "
         "meta_description, favicon, logo, footer, header, nav_bar_content, paragraph, text)\n"
         "3. Most of the time you will be able to identify it from the title or footer "
         "information.\n"
         "4. If you cannot find or identify the brand, return NA for 'brand' in your response.\n"
         "5. Provide a comprehensive evaluation of the html script. Include a detailed "
         "explanation for your analysis.\n"
         "6. Take note of how confident you are in identifying the brand.";
}

// Authored for this project; only the input/output shape is fixed by the
// worked example it mirrors.
std::string_view domain_verifier_instructions() {
  return "I want you to act as a domain verifier for phishing webpage detection.\n"
         "Given the URL of a webpage and the brand identified from the content of that webpage, "
         "decide whether the domain name in the URL legitimately belongs to the identified "
         "brand.\n"
         "Take into account official domains, former brand names, aliases, product names, "
         "subsidiaries and regional domains of the brand.\n"
         "If the identified brand contains an obvious typo, for example from a text recognition "
         "error, correct it before comparing.\n"
         "Do not visit the URL. Do not interact with the webpage in a live environment, and do "
         "not use any external resources or validations. Base your decision solely on the given "
         "input data.\n"
         "\n"
         "Return your response in exactly the following format, and replace everything in [] "
         "with your answer:\n"
         "- Genuine/Phishing: [Genuine or Phishing]\n"
         "- Evidence: [explanation of your decision, keep it within 100 words]\n"
         "- Genuine URL: [official URL of the identified brand, or NA if unknown]";
}

}  // namespace prompt_text

std::string format_confidence(double confidence) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", confidence);
  return buf;
}

PromptBundle build_phase1_prompt(InputMode mode, const std::optional<HtmlKeyInfo>& key_info,
                                 const std::optional<Screenshot>& screenshot,
                                 const PromptOptions& options) {
  const bool wants_html = mode != InputMode::ScreenshotOnly;
  const bool wants_image = mode != InputMode::HtmlOnly;
  if (wants_html != key_info.has_value()) {
    throw ModeInputMismatch(std::string("mode ") + std::string(to_string(mode)) +
                            (wants_html ? " needs" : " does not take") + " HTML key information");
  }
  if (wants_image != screenshot.has_value()) {
    throw ModeInputMismatch(std::string("mode ") + std::string(to_string(mode)) +
                            (wants_image ? " needs" : " does not take") + " a screenshot");
  }

  std::string system;
  switch (mode) {
    case InputMode::ScreenshotOnly:
      system += prompt_text::screenshot_instructions();
      system += "\n\n";
      system += prompt_text::full_response_format();
      break;
    case InputMode::HtmlOnly:
      system += prompt_text::html_instructions();
      system += "\n\n";
      system += prompt_text::html_response_format();
      break;
    case InputMode::Both:
      system += prompt_text::both_instructions();
      system += "\n\n";
      system += prompt_text::full_response_format();
      break;
  }
  if (options.chain_of_thought) {
    system += "\n\n";
    system += prompt_text::chain_of_thought();
  }
  system += "\n\n";
  system += prompt_text::common_rules();

  PromptBundle bundle;
  bundle.system_text = std::move(system);
  std::string user;
  if (wants_image) user += "SCREENSHOT: attached image of the webpage.";
  if (wants_html) {
    if (!user.empty()) user += "\n\n";
    user += "KEY INFORMATION:\n";
    user += to_json(*key_info).dump(2);
  }
  bundle.user_text = std::move(user);
  if (wants_image) bundle.image_attachment = *screenshot;
  return bundle;
}

namespace {

enum class Field {
  Brand,
  HasCredentials,
  HasCallToAction,
  CredentialList,
  CallToActionList,
  Confidence,
  Evidence,
  Classification,
  GenuineUrl,
  Url,
  IdentifiedBrand,
};

bool is_decoration(char c) {
  return c == '*' || c == '_' || c == '`' || c == '#' || c == '>' || c == '~';
}

// Strips bullets, numbering and markdown emphasis from the start of a line.
std::string_view strip_line_prefix(std::string_view s) {
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    s = trim(s);
    if (s.empty()) break;
    if (s.size() >= 2 && (s[0] == '-' || s[0] == '+' || s[0] == '*') && is_ascii_space(s[1])) {
      s.remove_prefix(2);
      changed = true;
      continue;
    }
    if (s.substr(0, 3) == "\xE2\x80\xA2") {  // bullet
      s.remove_prefix(3);
      changed = true;
      continue;
    }
    if (is_decoration(s[0])) {
      while (!s.empty() && is_decoration(s[0])) s.remove_prefix(1);
      changed = true;
      continue;
    }
    std::size_t d = 0;
    while (d < s.size() && d < 3 && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
    if (d > 0 && d < s.size() && (s[d] == '.' || s[d] == ')')) {
      s.remove_prefix(d + 1);
      changed = true;
    }
  }
  return s;
}

std::string normalize_key(std::string_view key) {
  std::string out;
  for (char c : key) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (c == '/') {
      out.push_back('/');
    } else if (c == '_' || c == '-' || is_ascii_space(c)) {
      out.push_back(' ');
    }
  }
  return collapse_whitespace(out);
}

std::optional<Field> match_key(const std::string& key) {
  auto starts = [&](std::string_view p) { return key.rfind(p, 0) == 0; };
  if (key == "brand") return Field::Brand;
  if (starts("has credential")) return Field::HasCredentials;
  if (starts("has call to action")) return Field::HasCallToAction;
  if (starts("list of credential") || key == "credential fields" || key == "credentials") {
    return Field::CredentialList;
  }
  if (starts("list of call to action") || key == "call to action fields" ||
      key == "call to actions") {
    return Field::CallToActionList;
  }
  if (starts("confidence")) return Field::Confidence;
  if (key == "supporting evidence" || key == "evidence") return Field::Evidence;
  if (key == "genuine/phishing" || key == "genuine or phishing" || key == "phishing/genuine" ||
      key == "classification" || key == "verdict") {
    return Field::Classification;
  }
  if (key == "genuine url" || key == "official url") return Field::GenuineUrl;
  if (key == "url") return Field::Url;
  if (key == "identified brand") return Field::IdentifiedBrand;
  return std::nullopt;
}

struct KeyLine {
  Field field;
  std::string value;
};

std::optional<KeyLine> parse_key_line(std::string_view line, std::span<const Field> allowed) {
  std::string_view s = strip_line_prefix(line);
  auto colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 60) return std::nullopt;
  std::string_view raw_key = s.substr(0, colon);
  while (!raw_key.empty() && (is_decoration(raw_key.back()) || raw_key.back() == '\'' ||
                              raw_key.back() == '"' || is_ascii_space(raw_key.back()))) {
    raw_key.remove_suffix(1);
  }
  auto field = match_key(normalize_key(raw_key));
  if (!field || std::find(allowed.begin(), allowed.end(), *field) == allowed.end()) {
    return std::nullopt;
  }

  std::string_view value = trim(s.substr(colon + 1));
  // "**Brand:** X" leaves the closing emphasis right after the colon.
  while (!value.empty() && (value[0] == '*' || value[0] == '_') &&
         (value.size() == 1 || value[1] == '*' || value[1] == '_' || is_ascii_space(value[1]))) {
    value.remove_prefix(1);
  }
  value = trim(value);
  if (value.size() >= 2 && value.substr(value.size() - 2) == "**") {
    value.remove_suffix(2);
    value = trim(value);
  }
  return KeyLine{*field, std::string(value)};
}

struct FieldMap {
  std::vector<std::pair<Field, std::string>> values;

  [[nodiscard]] const std::string* get(Field f) const {
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
      if (it->first == f) return &it->second;
    }
    return nullptr;
  }
};

constexpr Field kPhase1Fields[] = {Field::Brand,          Field::HasCredentials,
                                   Field::HasCallToAction, Field::CredentialList,
                                   Field::CallToActionList, Field::Confidence,
                                   Field::Evidence};
constexpr Field kPhase2Fields[] = {Field::Classification, Field::Evidence, Field::GenuineUrl,
                                   Field::Url, Field::IdentifiedBrand};

FieldMap collect_fields(std::string_view text, std::span<const Field> allowed) {
  FieldMap map;
  bool have_current = false;
  for (const auto& line : split_lines(text)) {
    if (auto kl = parse_key_line(line, allowed)) {
      map.values.emplace_back(kl->field, std::move(kl->value));
      have_current = true;
      continue;
    }
    if (have_current) {
      auto& current = map.values.back().second;
      current += '\n';
      current += line;
    }
  }
  for (auto& [f, v] : map.values) v = std::string(trim(v));
  return map;
}

std::string_view strip_scalar(std::string_view v) {
  v = trim(v);
  while (!v.empty() && (v.back() == ',' || v.back() == ';' || v.back() == '.')) {
    v.remove_suffix(1);
    v = trim(v);
  }
  while (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                           (v.front() == '\'' && v.back() == '\'') ||
                           (v.front() == '`' && v.back() == '`'))) {
    v = trim(v.substr(1, v.size() - 2));
  }
  return v;
}

bool is_na(std::string_view v) {
  return iequals(v, "na") || iequals(v, "n/a") || iequals(v, "unknown");
}

bool is_empty_list_marker(std::string_view v) {
  return v.empty() || is_na(v) || iequals(v, "none") || iequals(v, "no") || iequals(v, "nil");
}

std::vector<std::string> parse_list(std::string_view value, const char* name,
                                    std::vector<std::string>& warnings) {
  std::vector<std::string> items;
  std::string_view whole = strip_scalar(value);
  if (is_empty_list_marker(whole)) return items;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t end = value.find_first_of(",\n", start);
    if (end == std::string_view::npos) end = value.size();
    std::string_view item = strip_scalar(strip_line_prefix(value.substr(start, end - start)));
    if (!is_empty_list_marker(item)) items.emplace_back(collapse_whitespace(item));
    start = end + 1;
  }
  if (items.size() > kMaxListedFields) {
    warnings.push_back(std::string(name) + ": " + std::to_string(items.size()) +
                       " entries, kept the first " + std::to_string(kMaxListedFields));
    items.resize(kMaxListedFields);
  }
  return items;
}

bool parse_yes_no(std::string_view value, const char* name, std::vector<std::string>& warnings) {
  std::string v = to_lower_ascii(strip_scalar(value));
  auto word = v.substr(0, v.find_first_of(" ,.;("));
  if (word == "yes" || word == "true" || word == "y") return true;
  if (word == "no" || word == "false" || word == "n") return false;
  warnings.push_back(std::string(name) + ": unrecognized value \"" + std::string(value) +
                     "\", treated as No");
  return false;
}

std::optional<double> first_number(std::string_view v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(v[i]))) continue;
    std::size_t start = i;
    if (start > 0 && v[start - 1] == '-') --start;
    std::size_t end = i;
    while (end < v.size() && std::isdigit(static_cast<unsigned char>(v[end]))) ++end;
    if (end + 1 < v.size() && v[end] == '.' && std::isdigit(static_cast<unsigned char>(v[end + 1]))) {
      ++end;
      while (end < v.size() && std::isdigit(static_cast<unsigned char>(v[end]))) ++end;
    }
    std::string number(v.substr(start, end - start));
    return std::strtod(number.c_str(), nullptr);
  }
  return std::nullopt;
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_ascii_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

}  // namespace

BrandIdentification parse_phase1_response(std::string_view text, InputMode mode) {
  FieldMap fields = collect_fields(text, kPhase1Fields);
  const std::string* brand = fields.get(Field::Brand);
  const std::string* confidence = fields.get(Field::Confidence);
  std::optional<double> score;
  if (confidence) score = first_number(*confidence);

  std::vector<std::string> missing;
  if (!brand) missing.emplace_back("Brand");
  if (!score) missing.emplace_back("Confidence");
  if (!missing.empty()) throw ResponseParseError(std::move(missing), std::string(text));

  BrandIdentification out;
  out.mode = mode;
  std::string_view brand_value = strip_scalar(*brand);
  if (brand_value.empty()) {
    out.warnings.emplace_back("Brand: empty value, treated as NA");
  } else if (!is_na(brand_value)) {
    out.brand = collapse_whitespace(brand_value);
  }

  double c = *score;
  if (!std::isfinite(c) || c < 0.0 || c > 10.0) {
    out.warnings.push_back("Confidence Score: " + std::string(trim(*confidence)) +
                           " outside [0, 10], clamped");
    c = std::isnan(c) ? 0.0 : std::clamp(c, 0.0, 10.0);
  }
  out.confidence = std::round(c * 100.0) / 100.0;

  if (const std::string* ev = fields.get(Field::Evidence)) {
    out.supporting_evidence = *ev;
    if (auto words = word_count(*ev); words > kMaxEvidenceWords) {
      out.warnings.push_back("Supporting Evidence: " + std::to_string(words) +
                             " words exceeds 300");
    }
  } else {
    out.warnings.emplace_back("Supporting Evidence: missing");
  }

  if (mode == InputMode::HtmlOnly) return out;

  if (const std::string* v = fields.get(Field::HasCredentials)) {
    out.has_credentials = parse_yes_no(*v, "Has Credentials", out.warnings);
  } else {
    out.warnings.emplace_back("Has Credentials: missing");
  }
  if (const std::string* v = fields.get(Field::HasCallToAction)) {
    out.has_call_to_action = parse_yes_no(*v, "Has Call_To_Action", out.warnings);
  } else {
    out.warnings.emplace_back("Has Call_To_Action: missing");
  }
  if (const std::string* v = fields.get(Field::CredentialList)) {
    out.credential_fields = parse_list(*v, "List of credentials", out.warnings);
  }
  if (const std::string* v = fields.get(Field::CallToActionList)) {
    out.call_to_action_fields = parse_list(*v, "List of call_to_action", out.warnings);
  }
  if (!out.credential_fields.empty() && !out.has_credentials) {
    out.has_credentials = true;
    out.warnings.emplace_back("Has Credentials: No contradicts listed fields, set to Yes");
  }
  if (!out.call_to_action_fields.empty() && !out.has_call_to_action) {
    out.has_call_to_action = true;
    out.warnings.emplace_back("Has Call_To_Action: No contradicts listed fields, set to Yes");
  }
  return out;
}

std::string render_phase1_response(const BrandIdentification& b) {
  auto list = [](const std::vector<std::string>& items) {
    if (items.empty()) return std::string("NA");
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += ", ";
      out += items[i];
    }
    return out;
  };
  std::ostringstream out;
  const std::string brand = b.brand.value_or("NA");
  if (b.mode == InputMode::HtmlOnly) {
    out << "1. Brand: " << brand << "\n"
        << "2. Confidence Score: " << format_confidence(b.confidence) << "\n"
        << "3. Supporting Evidence: " << b.supporting_evidence << "\n";
    return out.str();
  }
  out << "1. Brand: " << brand << "\n"
      << "2. Has Credentials: " << (b.has_credentials ? "Yes" : "No") << "\n"
      << "3. Has Call_To_Action: " << (b.has_call_to_action ? "Yes" : "No") << "\n"
      << "4. List of credentials: " << list(b.credential_fields) << "\n"
      << "5. List of call_to_action: " << list(b.call_to_action_fields) << "\n"
      << "6. Confidence Score: " << format_confidence(b.confidence) << "\n"
      << "7. Supporting Evidence: " << b.supporting_evidence << "\n";
  return out.str();
}

PromptBundle build_phase2_prompt(std::string_view url, const BrandIdentification& identified) {
  if (!identified.brand || identified.brand->empty()) {
    throw MissingBrand("phase-2 verification needs an identified brand");
  }
  PromptBundle bundle;
  bundle.system_text = std::string(prompt_text::domain_verifier_instructions());
  std::string user;
  user += "- URL: ";
  user += url;
  user += "\n- Identified Brand: ";
  user += *identified.brand;
  user += "\n- Confidence Score: ";
  user += format_confidence(identified.confidence);
  if (!identified.supporting_evidence.empty()) {
    user += "\n- Supporting Evidence: ";
    user += identified.supporting_evidence;
  }
  bundle.user_text = std::move(user);
  return bundle;
}

namespace {

std::optional<std::string> clean_url(std::string_view v) {
  v = trim(v);
  // Markdown link: [text](url)
  if (auto open = v.find("]("); open != std::string_view::npos) {
    auto close = v.find(')', open + 2);
    if (close != std::string_view::npos) v = v.substr(open + 2, close - open - 2);
  }
  while (!v.empty() && (v.front() == '<' || v.front() == '`' || v.front() == '"' ||
                        v.front() == '\'' || v.front() == '(')) {
    v.remove_prefix(1);
  }
  while (!v.empty() && (v.back() == '>' || v.back() == '`' || v.back() == '"' ||
                        v.back() == '\'' || v.back() == ')' || v.back() == '.' ||
                        v.back() == ',')) {
    v.remove_suffix(1);
  }
  auto space = v.find_first_of(" \t\n");
  if (space != std::string_view::npos) v = v.substr(0, space);
  if (v.empty() || is_na(v) || !is_absolute_url(v)) return std::nullopt;
  return std::string(v);
}

}  // namespace

DomainVerdict parse_phase2_response(std::string_view text) {
  FieldMap fields = collect_fields(text, kPhase2Fields);
  const std::string* cls = fields.get(Field::Classification);
  std::optional<DomainVerdict::Classification> classification;
  if (cls) {
    std::string v = to_lower_ascii(*cls);
    auto p = v.find("phishing");
    auto g = v.find("genuine");
    if (p != std::string::npos && (g == std::string::npos || p < g)) {
      classification = DomainVerdict::Classification::Phishing;
    } else if (g != std::string::npos) {
      classification = DomainVerdict::Classification::Genuine;
    }
  }
  if (!classification) {
    throw ResponseParseError({"Genuine/Phishing"}, std::string(text));
  }

  DomainVerdict verdict;
  verdict.classification = *classification;
  if (const std::string* ev = fields.get(Field::Evidence); ev && !ev->empty()) {
    verdict.evidence = *ev;
  } else {
    std::string rest;
    for (const auto& [f, v] : fields.values) {
      if (f == Field::Classification || f == Field::GenuineUrl || v.empty()) continue;
      if (!rest.empty()) rest += '\n';
      rest += v;
    }
    verdict.evidence = rest.empty() ? std::string(trim(text)) : rest;
  }
  if (const std::string* url = fields.get(Field::GenuineUrl)) verdict.genuine_url = clean_url(*url);
  return verdict;
}

}  // namespace brandlens
