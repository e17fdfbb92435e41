#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace tgraph::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Trim, case-fold and collapse internal whitespace. Used for duplicate
// detection and dictionary lookups, never for display.
std::string normalize_key(std::string_view s);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);

// Writes via a sibling temp file and rename so readers never observe a
// partially written file.
void write_file_atomic(const std::string& path, std::string_view content);

// Uniform integer in [0, bound) from a 64-bit Mersenne twister. Written out
// rather than using std::uniform_int_distribution, whose output differs
// between standard library implementations.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

} // namespace tgraph::text
