#include "brandlens/html_extractor.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "brandlens/text_util.hpp"

namespace brandlens {
namespace {

// ---------------------------------------------------------------------------
// Entities

void append_utf8(std::string& out, char32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

const std::unordered_map<std::string_view, char32_t>& named_entities() {
  static const std::unordered_map<std::string_view, char32_t> kTable = {
      {"amp", '&'},       {"lt", '<'},        {"gt", '>'},        {"quot", '"'},
      {"apos", '\''},     {"nbsp", ' '},      {"copy", 0xA9},     {"reg", 0xAE},
      {"trade", 0x2122},  {"mdash", 0x2014},  {"ndash", 0x2013},  {"hellip", 0x2026},
      {"laquo", 0xAB},    {"raquo", 0xBB},    {"lsquo", 0x2018},  {"rsquo", 0x2019},
      {"ldquo", 0x201C},  {"rdquo", 0x201D},  {"bull", 0x2022},   {"middot", 0xB7},
      {"euro", 0x20AC},   {"pound", 0xA3},    {"yen", 0xA5},      {"cent", 0xA2},
      {"sect", 0xA7},     {"deg", 0xB0},      {"times", 0xD7},    {"divide", 0xF7},
      {"eacute", 0xE9},   {"egrave", 0xE8},   {"agrave", 0xE0},   {"aacute", 0xE1},
      {"ccedil", 0xE7},   {"ouml", 0xF6},     {"uuml", 0xFC},     {"auml", 0xE4},
      {"szlig", 0xDF},    {"ntilde", 0xF1},   {"iexcl", 0xA1},    {"iquest", 0xBF},
      {"zwnj", 0x200C},   {"zwj", 0x200D},    {"shy", 0xAD},      {"ensp", ' '},
      {"emsp", ' '},      {"thinsp", ' '},
  };
  return kTable;
}

std::string decode_entities(std::string_view text) {
  if (text.find('&') == std::string_view::npos) return std::string(text);
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c != '&') {
      out.push_back(c);
      ++i;
      continue;
    }
    std::size_t semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back(c);
      ++i;
      continue;
    }
    std::string_view name = text.substr(i + 1, semi - i - 1);
    std::optional<char32_t> cp;
    if (!name.empty() && name[0] == '#') {
      std::string_view digits = name.substr(1);
      int base = 10;
      if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
        base = 16;
        digits.remove_prefix(1);
      }
      if (!digits.empty()) {
        char32_t value = 0;
        bool ok = true;
        for (char d : digits) {
          int v = std::isdigit(static_cast<unsigned char>(d)) ? d - '0'
                  : (base == 16 && std::isxdigit(static_cast<unsigned char>(d)))
                      ? std::tolower(static_cast<unsigned char>(d)) - 'a' + 10
                      : -1;
          if (v < 0) {
            ok = false;
            break;
          }
          value = value * base + static_cast<char32_t>(v);
          if (value > 0x10FFFF) value = 0x110000;
        }
        if (ok) cp = value;
      }
    } else {
      auto& table = named_entities();
      if (auto it = table.find(name); it != table.end()) cp = it->second;
    }
    if (!cp) {
      out.push_back(c);
      ++i;
      continue;
    }
    append_utf8(out, *cp);
    i = semi + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tree

struct Node {
  std::string tag;  // empty for text nodes
  std::vector<std::pair<std::string, std::string>> attrs;
  std::string text;
  std::vector<std::size_t> children;

  [[nodiscard]] bool is_text() const { return tag.empty(); }
  [[nodiscard]] const std::string* attr(std::string_view name) const {
    for (const auto& [k, v] : attrs) {
      if (k == name) return &v;
    }
    return nullptr;
  }
};

constexpr std::size_t kMaxDepth = 256;

bool in_list(std::string_view tag, std::initializer_list<std::string_view> list) {
  return std::find(list.begin(), list.end(), tag) != list.end();
}

bool is_void(std::string_view tag) {
  return in_list(tag, {"area", "base", "br", "col", "embed", "hr", "img", "input", "link",
                       "meta", "param", "source", "track", "wbr", "keygen"});
}

bool closes_paragraph(std::string_view tag) {
  return in_list(tag, {"address", "article", "aside", "blockquote", "details", "div", "dl",
                       "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3",
                       "h4", "h5", "h6", "header", "hgroup", "hr", "main", "menu", "nav", "ol",
                       "p", "pre", "section", "table", "ul"});
}

bool is_inline(std::string_view tag) {
  return in_list(tag, {"a", "abbr", "b", "bdi", "bdo", "big", "cite", "code", "data", "dfn",
                       "em", "font", "i", "img", "kbd", "label", "mark", "q", "s", "samp",
                       "small", "span", "strike", "strong", "sub", "sup", "time", "tt", "u",
                       "var", "nobr"});
}

bool is_hidden_container(std::string_view tag) {
  return tag == "script" || tag == "style" || tag == "template";
}

class TreeBuilder {
 public:
  explicit TreeBuilder(std::string_view html) : src_(html) {
    nodes_.push_back(Node{"#root", {}, {}, {}});
    stack_.push_back(0);
  }

  std::vector<Node> build() {
    while (pos_ < src_.size()) {
      if (src_[pos_] == '<' && try_markup()) continue;
      auto next = src_.find('<', pos_ + 1);
      if (next == std::string_view::npos) next = src_.size();
      add_text(decode_entities(src_.substr(pos_, next - pos_)));
      pos_ = next;
    }
    return std::move(nodes_);
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::size_t> stack_;

  void add_text(std::string text) {
    if (text.empty()) return;
    auto& parent = nodes_[stack_.back()];
    if (!parent.children.empty() && nodes_[parent.children.back()].is_text()) {
      nodes_[parent.children.back()].text += text;
      return;
    }
    nodes_.push_back(Node{{}, {}, std::move(text), {}});
    nodes_[stack_.back()].children.push_back(nodes_.size() - 1);
  }

  std::size_t append_element(Node node) {
    nodes_.push_back(std::move(node));
    std::size_t id = nodes_.size() - 1;
    nodes_[stack_.back()].children.push_back(id);
    return id;
  }

  bool try_markup() {
    std::string_view rest = src_.substr(pos_);
    if (rest.size() < 2) return false;
    if (rest.substr(0, 4) == "<!--") {
      auto end = src_.find("-->", pos_ + 4);
      pos_ = end == std::string_view::npos ? src_.size() : end + 3;
      return true;
    }
    if (rest[1] == '!' || rest[1] == '?') {
      auto end = src_.find('>', pos_ + 2);
      pos_ = end == std::string_view::npos ? src_.size() : end + 1;
      return true;
    }
    if (rest[1] == '/') {
      if (rest.size() < 3 || !std::isalpha(static_cast<unsigned char>(rest[2]))) {
        // "</>" and "</ ..." are dropped like a bogus comment.
        auto end = src_.find('>', pos_ + 2);
        pos_ = end == std::string_view::npos ? src_.size() : end + 1;
        return true;
      }
      std::size_t p = pos_ + 2;
      std::string name = read_tag_name(p);
      auto end = src_.find('>', p);
      pos_ = end == std::string_view::npos ? src_.size() : end + 1;
      close_element(name);
      return true;
    }
    if (!std::isalpha(static_cast<unsigned char>(rest[1]))) return false;

    std::size_t p = pos_ + 1;
    Node element;
    element.tag = read_tag_name(p);
    bool self_closing = false;
    bool terminated = read_attributes(p, element.attrs, self_closing);
    if (!terminated) {
      // Unterminated tag at end of input: browsers discard it.
      pos_ = src_.size();
      return true;
    }
    pos_ = p;
    open_element(std::move(element), self_closing);
    return true;
  }

  std::string read_tag_name(std::size_t& p) {
    std::size_t start = p;
    while (p < src_.size() && !is_ascii_space(src_[p]) && src_[p] != '/' && src_[p] != '>') ++p;
    return to_lower_ascii(src_.substr(start, p - start));
  }

  // Leaves p just past the closing '>'. Returns false when input ends first.
  bool read_attributes(std::size_t& p, std::vector<std::pair<std::string, std::string>>& attrs,
                       bool& self_closing) {
    while (p < src_.size()) {
      char c = src_[p];
      if (is_ascii_space(c)) {
        ++p;
        continue;
      }
      if (c == '>') {
        ++p;
        return true;
      }
      if (c == '/') {
        ++p;
        if (p < src_.size() && src_[p] == '>') {
          self_closing = true;
          ++p;
          return true;
        }
        continue;
      }
      std::size_t start = p;
      ++p;  // an attribute name may begin with '='
      while (p < src_.size() && !is_ascii_space(src_[p]) && src_[p] != '/' && src_[p] != '>' &&
             src_[p] != '=') {
        ++p;
      }
      std::string name = to_lower_ascii(src_.substr(start, p - start));
      while (p < src_.size() && is_ascii_space(src_[p])) ++p;
      std::string value;
      if (p < src_.size() && src_[p] == '=') {
        ++p;
        while (p < src_.size() && is_ascii_space(src_[p])) ++p;
        if (p < src_.size() && (src_[p] == '"' || src_[p] == '\'')) {
          char quote = src_[p++];
          auto end = src_.find(quote, p);
          if (end == std::string_view::npos) return false;
          value = decode_entities(src_.substr(p, end - p));
          p = end + 1;
        } else {
          std::size_t vstart = p;
          while (p < src_.size() && !is_ascii_space(src_[p]) && src_[p] != '>') ++p;
          value = decode_entities(src_.substr(vstart, p - vstart));
        }
      }
      bool duplicate = std::any_of(attrs.begin(), attrs.end(),
                                   [&](const auto& kv) { return kv.first == name; });
      if (!duplicate) attrs.emplace_back(std::move(name), std::move(value));
    }
    return false;
  }

  bool has_open(std::string_view tag, std::initializer_list<std::string_view> boundaries) const {
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
      const auto& t = nodes_[*it].tag;
      if (t == tag) return true;
      if (in_list(t, boundaries)) return false;
    }
    return false;
  }

  void pop_until(std::string_view tag) {
    while (stack_.size() > 1) {
      bool match = nodes_[stack_.back()].tag == tag;
      stack_.pop_back();
      if (match) return;
    }
  }

  void open_element(Node element, bool self_closing) {
    const std::string tag = element.tag;
    if (closes_paragraph(tag) && has_open("p", {"button", "table", "td", "th", "template"})) {
      pop_until("p");
    }
    if (tag == "li" && has_open("li", {"ul", "ol", "menu"})) pop_until("li");
    if ((tag == "dt" || tag == "dd")) {
      if (has_open("dt", {"dl"})) pop_until("dt");
      if (has_open("dd", {"dl"})) pop_until("dd");
    }
    if (tag == "option" && has_open("option", {"select", "datalist"})) pop_until("option");
    if ((tag == "td" || tag == "th")) {
      if (has_open("td", {"tr", "table"})) pop_until("td");
      if (has_open("th", {"tr", "table"})) pop_until("th");
    }
    if (tag == "tr" && has_open("tr", {"table"})) pop_until("tr");

    bool deep = stack_.size() > kMaxDepth;
    std::size_t id = append_element(std::move(element));

    if (tag == "script" || tag == "style" || tag == "title" || tag == "textarea" ||
        tag == "xmp" || tag == "noembed" || tag == "iframe") {
      if (self_closing && tag != "script") return;
      // Raw text: everything up to the matching end tag is one text child.
      std::size_t end = find_end_tag(tag);
      std::string_view body = src_.substr(pos_, end - pos_);
      std::string text = (tag == "title" || tag == "textarea") ? decode_entities(body)
                                                               : std::string(body);
      if (!text.empty()) {
        nodes_.push_back(Node{{}, {}, std::move(text), {}});
        nodes_[id].children.push_back(nodes_.size() - 1);
      }
      pos_ = end;
      if (pos_ < src_.size()) {
        auto close = src_.find('>', pos_);
        pos_ = close == std::string_view::npos ? src_.size() : close + 1;
      }
      return;
    }
    if (self_closing || is_void(tag) || deep) return;
    stack_.push_back(id);
  }

  std::size_t find_end_tag(std::string_view tag) const {
    std::size_t p = pos_;
    while (true) {
      p = src_.find("</", p);
      if (p == std::string_view::npos) return src_.size();
      std::string_view candidate = src_.substr(p + 2, tag.size());
      std::size_t after = p + 2 + tag.size();
      if (iequals(candidate, tag) &&
          (after >= src_.size() || is_ascii_space(src_[after]) || src_[after] == '>' ||
           src_[after] == '/')) {
        return p;
      }
      p += 2;
    }
  }

  void close_element(const std::string& tag) {
    for (std::size_t i = stack_.size(); i-- > 1;) {
      if (nodes_[stack_[i]].tag == tag) {
        stack_.resize(i);
        return;
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Extraction

class Extractor {
 public:
  explicit Extractor(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  std::string text_of(std::size_t id) const {
    std::string raw;
    append_text(id, raw);
    return collapse_whitespace(raw);
  }

  HtmlKeyInfo run() {
    walk(0, false, false, false);
    info_.header_text = collapse_whitespace(header_);
    info_.footer_text = collapse_whitespace(footer_);
    info_.nav_bar_content = collapse_whitespace(nav_);
    return std::move(info_);
  }

 private:
  std::vector<Node> nodes_;
  HtmlKeyInfo info_;
  bool have_title_ = false;
  bool have_meta_ = false;
  bool have_favicon_ = false;
  std::string header_;
  std::string footer_;
  std::string nav_;

  void append_text(std::size_t id, std::string& out) const {
    const Node& n = nodes_[id];
    if (n.is_text()) {
      out += n.text;
      return;
    }
    if (is_hidden_container(n.tag)) return;
    if (n.tag == "br") {
      out.push_back(' ');
      return;
    }
    bool block = !is_inline(n.tag);
    if (block) out.push_back(' ');
    for (auto child : n.children) append_text(child, out);
    if (block) out.push_back(' ');
  }

  static bool class_has(const Node& n, std::string_view token) {
    const std::string* cls = n.attr("class");
    if (!cls) return false;
    std::string_view rest = *cls;
    while (!rest.empty()) {
      while (!rest.empty() && is_ascii_space(rest.front())) rest.remove_prefix(1);
      std::size_t end = 0;
      while (end < rest.size() && !is_ascii_space(rest[end])) ++end;
      if (end > 0 && iequals(rest.substr(0, end), token)) return true;
      rest.remove_prefix(end);
    }
    return false;
  }

  static bool id_is(const Node& n, std::string_view value) {
    const std::string* id = n.attr("id");
    return id && iequals(trim(*id), value);
  }

  static void push_capped(std::vector<std::string>& list, std::string value) {
    if (!value.empty() && list.size() < kMaxSequenceEntries) list.push_back(std::move(value));
  }

  static void append_section(std::string& section, const std::string& text) {
    if (text.empty()) return;
    if (!section.empty()) section.push_back(' ');
    section += text;
  }

  void walk(std::size_t id, bool in_header, bool in_footer, bool in_nav) {
    const Node& n = nodes_[id];
    if (n.is_text() || is_hidden_container(n.tag)) return;
    const std::string& tag = n.tag;

    if (tag == "title" && !have_title_) {
      have_title_ = true;
      std::string raw;
      for (auto c : n.children) raw += nodes_[c].text;
      info_.title = collapse_whitespace(raw);
    } else if (tag == "meta" && !have_meta_) {
      const std::string* name = n.attr("name");
      const std::string* content = n.attr("content");
      if (name && content && iequals(trim(*name), "description")) {
        have_meta_ = true;
        info_.meta_description = collapse_whitespace(*content);
      }
    } else if (tag == "link" && !have_favicon_) {
      const std::string* rel = n.attr("rel");
      const std::string* href = n.attr("href");
      if (rel && href) {
        std::string r = to_lower_ascii(collapse_whitespace(*rel));
        if (r == "icon" || r == "shortcut icon" || r == "apple-touch-icon") {
          have_favicon_ = true;
          info_.favicon_path = collapse_whitespace(*href);
        }
      }
    } else if (tag == "img") {
      const std::string* alt = n.attr("alt");
      bool logo = false;
      for (const char* key : {"src", "alt", "id", "class"}) {
        if (const std::string* v = n.attr(key); v && icontains(*v, "logo")) logo = true;
      }
      if (logo && alt) push_capped(info_.logo_alt_texts, collapse_whitespace(*alt));
    } else if (tag == "p") {
      push_capped(info_.paragraph_texts, text_of(id));
    } else if (tag == "span") {
      push_capped(info_.span_texts, text_of(id));
    }

    if (!in_header && (tag == "header" || id_is(n, "header") || class_has(n, "header"))) {
      append_section(header_, text_of(id));
      in_header = true;
    }
    if (!in_footer && (tag == "footer" || id_is(n, "footer") || class_has(n, "footer"))) {
      append_section(footer_, text_of(id));
      in_footer = true;
    }
    if (!in_nav && tag == "nav") {
      append_section(nav_, text_of(id));
      in_nav = true;
    }
    for (auto child : n.children) walk(child, in_header, in_footer, in_nav);
  }
};

// ---------------------------------------------------------------------------
// Budgeting

// Cuts `text` to at most `keep` code points, preferring a whitespace boundary
// within the last 20 code points of the cut.
std::string cut_text(const std::string& text, std::size_t keep) {
  if (keep == 0) return {};
  std::size_t byte_end = utf8_offset(text, keep);
  if (byte_end >= text.size()) return text;
  std::string_view prefix(text.data(), byte_end);
  if (!is_ascii_space(text[byte_end])) {
    // Look back at most 20 code points for a space.
    std::size_t lookback_cp = 0;
    std::size_t i = byte_end;
    while (i > 0 && lookback_cp < 20) {
      --i;
      if ((static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) continue;
      ++lookback_cp;
      if (is_ascii_space(text[i])) {
        prefix = std::string_view(text.data(), i);
        break;
      }
    }
  }
  return std::string(trim(prefix));
}

void shrink_string(std::string& field, std::size_t& excess) {
  if (excess == 0 || field.empty()) return;
  std::size_t len = utf8_length(field);
  std::size_t keep = len > excess ? len - excess : 0;
  field = cut_text(field, keep);
  std::size_t new_len = utf8_length(field);
  excess -= std::min(excess, len - new_len);
}

void shrink_list(std::vector<std::string>& list, std::size_t& excess) {
  while (excess > 0 && !list.empty()) {
    std::string& last = list.back();
    std::size_t len = utf8_length(last);
    if (len <= excess) {
      excess -= len;
      list.pop_back();
      continue;
    }
    shrink_string(last, excess);
    if (last.empty()) list.pop_back();
  }
}

}  // namespace

bool HtmlKeyInfo::all_empty() const {
  return title.empty() && meta_description.empty() && favicon_path.empty() &&
         logo_alt_texts.empty() && header_text.empty() && footer_text.empty() &&
         nav_bar_content.empty() && paragraph_texts.empty() && span_texts.empty();
}

HtmlKeyInfo extract_key_info(std::string_view html) {
  Extractor extractor(TreeBuilder(html).build());
  return extractor.run();
}

std::string visible_text(std::string_view html) {
  Extractor extractor(TreeBuilder(html).build());
  return extractor.text_of(0);
}

std::size_t total_chars(const HtmlKeyInfo& info) {
  std::size_t n = utf8_length(info.title) + utf8_length(info.meta_description) +
                  utf8_length(info.favicon_path) + utf8_length(info.header_text) +
                  utf8_length(info.footer_text) + utf8_length(info.nav_bar_content);
  for (const auto* list : {&info.logo_alt_texts, &info.paragraph_texts, &info.span_texts}) {
    for (const auto& s : *list) n += utf8_length(s);
  }
  return n;
}

HtmlKeyInfo truncate_for_budget(HtmlKeyInfo info, std::size_t max_chars) {
  if (max_chars < kMinHtmlBudgetChars) {
    throw std::invalid_argument("html budget must be at least 64 characters");
  }
  std::size_t total = total_chars(info);
  if (total <= max_chars) return info;
  std::size_t excess = total - max_chars;
  shrink_list(info.span_texts, excess);
  shrink_list(info.paragraph_texts, excess);
  shrink_string(info.nav_bar_content, excess);
  shrink_string(info.footer_text, excess);
  shrink_string(info.header_text, excess);
  shrink_list(info.logo_alt_texts, excess);
  shrink_string(info.favicon_path, excess);
  shrink_string(info.meta_description, excess);
  shrink_string(info.title, excess);
  return info;
}

nlohmann::ordered_json to_json(const HtmlKeyInfo& info) {
  nlohmann::ordered_json j;
  j["title"] = info.title;
  j["meta_description"] = info.meta_description;
  j["favicon_path"] = info.favicon_path;
  j["logo_alt_texts"] = info.logo_alt_texts;
  j["header_text"] = info.header_text;
  j["footer_text"] = info.footer_text;
  j["nav_bar_content"] = info.nav_bar_content;
  j["paragraph_texts"] = info.paragraph_texts;
  j["span_texts"] = info.span_texts;
  return j;
}

HtmlKeyInfo key_info_from_json(const nlohmann::json& j) {
  HtmlKeyInfo info;
  info.title = j.value("title", "");
  info.meta_description = j.value("meta_description", "");
  info.favicon_path = j.value("favicon_path", "");
  info.logo_alt_texts = j.value("logo_alt_texts", std::vector<std::string>{});
  info.header_text = j.value("header_text", "");
  info.footer_text = j.value("footer_text", "");
  info.nav_bar_content = j.value("nav_bar_content", "");
  info.paragraph_texts = j.value("paragraph_texts", std::vector<std::string>{});
  info.span_texts = j.value("span_texts", std::vector<std::string>{});
  return info;
}

}  // namespace brandlens
