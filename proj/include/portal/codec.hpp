#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace portal {

using Bytes = std::vector<std::uint8_t>;

std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);  // throws std::invalid_argument

// Little-endian IEEE-754 binary32 packing used for stored embeddings.
Bytes pack_f32le(std::span<const float> values);
std::vector<float> unpack_f32le(std::span<const std::uint8_t> bytes);

Bytes to_bytes(std::string_view text);
Bytes read_file_bytes(const std::string& path);  // throws std::runtime_error

}  // namespace portal
