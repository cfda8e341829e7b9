#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fnode {

/// Shortest round-trip decimal form of a double (std::to_chars). Used for
/// every number persisted to CSV so that re-runs are byte-identical and the
/// values parse back exactly.
std::string format_double(double v);

/// FNV-1a 64-bit of a byte string, as 16 lowercase hex chars.
std::string fnv1a_hex(std::string_view bytes);

/// Write-temp-then-rename so partially written files are never observed.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Appends the raw little-endian image of the doubles to `out`.
void append_f64_block(std::string& out, std::span<const double> values);

/// Reads `count` doubles starting at `offset`; advances `offset`.
std::vector<double> read_f64_block(const std::string& bytes, std::size_t& offset,
                                   std::size_t count);

}  // namespace fnode
