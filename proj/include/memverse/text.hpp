#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memverse::text {

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);

/// Trimmed, internal whitespace runs collapsed to one ASCII space.
std::string collapse_whitespace(std::string_view s);

/// NFC-normalize, trim, collapse whitespace. Preserves case; used for
/// display names.
std::string normalize_display(std::string_view s);

/// Identity key for entity names: normalize_display followed by Unicode
/// case folding.
std::string canonicalize(std::string_view s);

/// Canonicalized word tokens: splits on anything that is not a letter or
/// digit (non-ASCII bytes count as letters), drops empties.
std::vector<std::string> tokenize(std::string_view s);

/// Longest prefix of `s` that is at most `max_bytes` long and does not end
/// inside a UTF-8 sequence.
std::string_view utf8_prefix(std::string_view s, std::size_t max_bytes);

std::vector<std::string> split(std::string_view s, char sep);

// Hashing and encoding helpers.
std::string sha256_hex(std::string_view data);
std::uint32_t crc32(std::span<const std::uint8_t> data);
std::uint64_t fnv1a64(std::string_view data);
std::string base64_encode(std::string_view data);

}  // namespace memverse::text
