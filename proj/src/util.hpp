#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace thumbtruth {

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
// Writes through a sibling temp file and renames, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string trim(std::string_view s);
std::string trim_right(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view text);

// 64-bit FNV-1a; used for stable seed derivation and feature hashing.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Seed for a sub-stream, independent of iteration order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

// Uniform integer in [0, bound) by rejection; unlike std::uniform_int_distribution
// the mapping is fixed, so results agree across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);
// Uniform double in [0, 1) from the top 53 bits.
double uniform_unit(std::mt19937_64& rng);

template <typename T>
void stable_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

// Fixed-precision rendering used by every report ("%.{digits}f").
std::string format_fixed(double value, int digits);

}  // namespace thumbtruth

#include <functional>

namespace thumbtruth {

// Runs fn(i) for i in [0, n) on at most `limit` threads. The first exception
// thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t limit, const std::function<void(std::size_t)>& fn);

}  // namespace thumbtruth
