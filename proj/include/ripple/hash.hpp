#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace ripple {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
/// Throws IoError if the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes via a sibling temporary and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace ripple
