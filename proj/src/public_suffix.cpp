#include "brandlens/public_suffix.hpp"

#include <stdexcept>
#include <vector>

#include "brandlens/text_util.hpp"

namespace brandlens {

namespace detail {
extern const std::string_view kBundledPublicSuffixList;
}

namespace {

std::vector<std::string_view> split_labels(std::string_view host) {
  std::vector<std::string_view> labels;
  std::size_t start = 0;
  while (true) {
    auto dot = host.find('.', start);
    labels.push_back(host.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels;
}

std::string join_labels(const std::vector<std::string_view>& labels, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < labels.size(); ++i) {
    if (i > from) out += '.';
    out += labels[i];
  }
  return out;
}

std::vector<char32_t> decode_utf8(std::string_view s) {
  if (!is_valid_utf8(s)) throw std::invalid_argument("label is not valid UTF-8");
  std::vector<char32_t> cps;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    cps.push_back(cp);
    i += len;
  }
  return cps;
}

char encode_digit(std::uint32_t d) { return static_cast<char>(d < 26 ? 'a' + d : '0' + (d - 26)); }

std::uint32_t adapt(std::uint32_t delta, std::uint32_t numpoints, bool first) {
  constexpr std::uint32_t kBase = 36, kTmin = 1, kTmax = 26, kSkew = 38, kDamp = 700;
  delta = first ? delta / kDamp : delta / 2;
  delta += delta / numpoints;
  std::uint32_t k = 0;
  while (delta > ((kBase - kTmin) * kTmax) / 2) {
    delta /= kBase - kTmin;
    k += kBase;
  }
  return k + (kBase - kTmin + 1) * delta / (delta + kSkew);
}

}  // namespace

std::string to_a_label(std::string_view label) {
  bool ascii = true;
  for (char c : label) ascii = ascii && static_cast<unsigned char>(c) < 0x80;
  if (ascii) return std::string(label);

  constexpr std::uint32_t kBase = 36, kTmin = 1, kTmax = 26;
  auto input = decode_utf8(label);
  std::string out;
  for (char32_t cp : input) {
    if (cp < 0x80) out += static_cast<char>(cp);
  }
  const std::uint32_t basic = static_cast<std::uint32_t>(out.size());
  std::uint32_t handled = basic;
  if (basic > 0) out += '-';

  std::uint32_t n = 128, delta = 0, bias = 72;
  while (handled < input.size()) {
    char32_t m = 0x10FFFF + 1;
    for (char32_t cp : input) {
      if (cp >= n && cp < m) m = cp;
    }
    delta += (m - n) * (handled + 1);
    n = m;
    for (char32_t cp : input) {
      if (cp < n) ++delta;
      if (cp == n) {
        std::uint32_t q = delta;
        for (std::uint32_t k = kBase;; k += kBase) {
          std::uint32_t t = k <= bias ? kTmin : k >= bias + kTmax ? kTmax : k - bias;
          if (q < t) break;
          out += encode_digit(t + (q - t) % (kBase - t));
          q = (q - t) / (kBase - t);
        }
        out += encode_digit(q);
        bias = adapt(delta, handled + 1, handled == basic);
        delta = 0;
        ++handled;
      }
    }
    ++delta;
    ++n;
  }
  return "xn--" + out;
}

std::string to_ascii_host(std::string_view host) {
  std::string out;
  bool first = true;
  for (auto label : split_labels(host)) {
    if (!first) out += '.';
    first = false;
    out += to_a_label(label);
  }
  return out;
}

PublicSuffixList PublicSuffixList::parse(std::string_view text) {
  PublicSuffixList psl;
  for (const auto& raw : split_lines(text)) {
    auto line = trim(raw);
    if (line.empty()) continue;
    if (line.starts_with("//")) {
      auto body = trim(line.substr(2));
      if (body.starts_with("VERSION:")) psl.version_ = std::string(trim(body.substr(8)));
      if (body.starts_with("COMMIT:")) psl.commit_ = std::string(trim(body.substr(7)));
      continue;
    }
    // A rule ends at the first whitespace.
    auto ws = line.find_first_of(" \t");
    auto rule = line.substr(0, ws);
    std::string ascii = to_lower_ascii(to_ascii_host(rule[0] == '!' ? rule.substr(1) : rule));
    if (rule[0] == '!') {
      psl.exceptions_.insert(ascii);
    } else if (ascii.starts_with("*.")) {
      psl.wildcards_.insert(ascii.substr(2));
    } else {
      psl.rules_.insert(ascii);
    }
  }
  return psl;
}

const PublicSuffixList& PublicSuffixList::bundled() {
  static const PublicSuffixList kList = parse(detail::kBundledPublicSuffixList);
  return kList;
}

std::size_t PublicSuffixList::suffix_labels(std::string_view host) const {
  if (host.empty() || host.front() == '.') return 0;
  if (host.back() == '.') host.remove_suffix(1);  // fully-qualified form
  std::string ascii;
  try {
    ascii = to_lower_ascii(to_ascii_host(host));
  } catch (const std::invalid_argument&) {
    return 0;
  }
  auto labels = split_labels(ascii);
  for (auto l : labels) {
    if (l.empty()) return 0;
  }
  const std::size_t n = labels.size();

  for (std::size_t i = 0; i < n; ++i) {
    if (exceptions_.count(join_labels(labels, i))) return n - i - 1;
  }
  std::size_t best = 1;  // implicit "*" rule
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = n - i;
    if (k <= best) break;
    if (rules_.count(join_labels(labels, i)) ||
        (i + 1 < n && wildcards_.count(join_labels(labels, i + 1)))) {
      best = k;
      break;
    }
  }
  return best;
}

std::optional<std::string> PublicSuffixList::public_suffix(std::string_view host) const {
  std::size_t k = suffix_labels(host);
  if (k == 0) return std::nullopt;
  if (host.back() == '.') host.remove_suffix(1);
  auto labels = split_labels(host);
  return to_lower_ascii(join_labels(labels, labels.size() - k));
}

std::optional<std::string> PublicSuffixList::registrable_domain(std::string_view host) const {
  std::size_t k = suffix_labels(host);
  if (k == 0) return std::nullopt;
  if (host.back() == '.') host.remove_suffix(1);
  auto labels = split_labels(host);
  if (labels.size() <= k) return std::nullopt;
  return to_lower_ascii(join_labels(labels, labels.size() - k - 1));
}

}  // namespace brandlens
