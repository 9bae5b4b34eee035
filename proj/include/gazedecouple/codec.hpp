#pragma once

#include <span>
#include <string>
#include <string_view>

#include "gazedecouple/raster.hpp"

namespace gazedecouple {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws DecodeError on invalid input.
Bytes base64_decode(std::string_view text);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

Bytes read_file_bytes(const std::string& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, std::string_view text);

} // namespace gazedecouple
