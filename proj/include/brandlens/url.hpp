#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace brandlens {

struct ParsedUrl {
  std::string scheme;  // lowercased
  std::string host;    // lowercased; IPv6 literals keep their brackets
  std::optional<int> port;
  std::string path_and_rest;
  bool host_is_ip = false;
};

// Accepts absolute URLs of the form scheme://[userinfo@]host[:port][/...].
// Returns nullopt when there is no scheme or no host.
std::optional<ParsedUrl> parse_url(std::string_view url);

inline bool is_absolute_url(std::string_view url) { return parse_url(url).has_value(); }

}  // namespace brandlens
