#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace brandlens {

// Brand-bearing fields pulled out of a page's HTML. Every string is
// whitespace-collapsed and trimmed.
struct HtmlKeyInfo {
  std::string title;
  std::string meta_description;
  std::string favicon_path;
  std::vector<std::string> logo_alt_texts;
  std::string header_text;
  std::string footer_text;
  std::string nav_bar_content;
  std::vector<std::string> paragraph_texts;
  std::vector<std::string> span_texts;

  [[nodiscard]] bool all_empty() const;

  friend bool operator==(const HtmlKeyInfo&, const HtmlKeyInfo&) = default;
};

inline constexpr std::size_t kMaxSequenceEntries = 50;
inline constexpr std::size_t kDefaultHtmlBudgetChars = 4096;
inline constexpr std::size_t kMinHtmlBudgetChars = 64;

// Total, lenient extraction. Never throws on malformed markup.
HtmlKeyInfo extract_key_info(std::string_view html);

// All text outside <script>, <style> and <template>, whitespace-collapsed.
std::string visible_text(std::string_view html);

// Sum of code-point lengths over all nine fields.
std::size_t total_chars(const HtmlKeyInfo& info);

// Shrinks `info` to at most max_chars code points, cutting the lowest-priority
// fields first (spans, paragraphs, nav, footer, header, logo alts, favicon,
// meta description, title). Throws std::invalid_argument when max_chars < 64.
HtmlKeyInfo truncate_for_budget(HtmlKeyInfo info, std::size_t max_chars);

// Field order matches the struct; names are the snake_case member names.
nlohmann::ordered_json to_json(const HtmlKeyInfo& info);
HtmlKeyInfo key_info_from_json(const nlohmann::json& j);

}  // namespace brandlens
