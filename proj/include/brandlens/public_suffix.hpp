#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

namespace brandlens {

// Rules from the Public Suffix List format: plain, wildcard ("*.x") and
// exception ("!y.x") rules. IDN rules and hosts are compared in A-label form.
class PublicSuffixList {
 public:
  static PublicSuffixList parse(std::string_view text);
  // The snapshot compiled into the library.
  static const PublicSuffixList& bundled();

  // eTLD+1 in the host's original label spelling (ASCII lowercased).
  // nullopt when the host is itself a public suffix or is malformed.
  [[nodiscard]] std::optional<std::string> registrable_domain(std::string_view host) const;
  [[nodiscard]] std::optional<std::string> public_suffix(std::string_view host) const;

  [[nodiscard]] const std::string& version() const { return version_; }
  [[nodiscard]] const std::string& commit() const { return commit_; }
  [[nodiscard]] std::size_t rule_count() const {
    return rules_.size() + wildcards_.size() + exceptions_.size();
  }

 private:
  std::unordered_set<std::string> rules_;
  std::unordered_set<std::string> wildcards_;   // stored without the "*."
  std::unordered_set<std::string> exceptions_;  // stored without the "!"
  std::string version_;
  std::string commit_;

  // Number of trailing labels forming the public suffix; 0 for bad input.
  [[nodiscard]] std::size_t suffix_labels(std::string_view host) const;
};

// RFC 3492 encoding of a single UTF-8 label, prefixed with "xn--". ASCII labels
// are returned unchanged. Throws std::invalid_argument on invalid UTF-8.
std::string to_a_label(std::string_view label);

// Applies to_a_label to each dot-separated label.
std::string to_ascii_host(std::string_view host);

}  // namespace brandlens
