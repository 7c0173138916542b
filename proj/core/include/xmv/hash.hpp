#pragma once

#include <string>
#include <string_view>

namespace xmv {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

/// Reads a whole file into memory; throws IoError.
std::string read_file(const std::string& path);

}  // namespace xmv
