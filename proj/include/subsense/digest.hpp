#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace subsense {

// 64-bit FNV-1a. Used for config and artifact fingerprints, not security.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::string digest_text(std::string_view bytes);
std::string digest_file(const std::filesystem::path& path);

}  // namespace subsense
