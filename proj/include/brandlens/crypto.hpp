#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace brandlens {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view bytes);
std::string to_hex(const Sha256Digest& digest);
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

}  // namespace brandlens
