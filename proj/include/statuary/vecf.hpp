#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "statuary/archive.hpp"

namespace statuary {

/// VECF vector-store file, little-endian:
///
///   "VECF" | version u32 (=1) | namespace u8 | dim u32 | count u64
///   | count*dim float32 row-major | count * (u16 length + UTF-8 id)
inline constexpr std::uint32_t kVecfVersion = 1;

[[nodiscard]] auto encode_vector_store(const VectorStore& store) -> std::vector<std::uint8_t>;

/// Throws FormatError carrying the byte offset of the first bad field.
[[nodiscard]] auto decode_vector_store(std::span<const std::uint8_t> bytes) -> VectorStore;

void write_vector_store(const VectorStore& store, const std::filesystem::path& file);
[[nodiscard]] auto read_vector_store(const std::filesystem::path& file) -> VectorStore;

/// True when the file starts with the VECF magic.
[[nodiscard]] auto looks_like_vecf(const std::filesystem::path& file) -> bool;

}  // namespace statuary
