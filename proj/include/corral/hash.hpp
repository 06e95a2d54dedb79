#pragma once

#include <string>
#include <string_view>

namespace corral {

/// Lowercase hex SHA-256 of `bytes`.
auto sha256_hex(std::string_view bytes) -> std::string;

}  // namespace corral
