#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "statuary/archive.hpp"

namespace statuary {

struct PathToken {
  std::string text;
  // Path component index, counted on '/'.
  std::size_t depth = 0;
  // Byte range [begin, end) in the source path.
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct PathTokenization {
  std::vector<PathToken> tokens;
  bool had_invalid_bytes = false;

  [[nodiscard]] auto texts() const -> std::vector<std::string>;
};

/// Splits a path into maximal letter/digit runs, case-folded.
///
/// Any ASCII character other than a letter or digit separates tokens. Runs of
/// CJK characters form their own tokens, and a change between CJK and other
/// letters also ends a token. Invalid UTF-8 bytes act as separators and set
/// `had_invalid_bytes`.
[[nodiscard]] auto tokenize_path(std::string_view path) -> PathTokenization;

/// Term -> (field, canonical value) lookup used to mine paths.
class Gazetteer {
public:
  struct Entry {
    MetadataField field;
    std::string canonical;
  };

  /// The surface term is tokenized like a path; it must yield one or two tokens.
  /// Throws ParameterError when the term already maps elsewhere.
  void add(std::string_view surface, MetadataField field, std::string canonical);

  /// Tab-separated `surface \t field \t canonical` lines; '#' starts a comment.
  [[nodiscard]] static auto parse(std::istream& in, const std::string& source = "gazetteer")
      -> Gazetteer;
  [[nodiscard]] static auto load(const std::filesystem::path& file) -> Gazetteer;

  /// `term` is one token or two tokens joined by a single space.
  [[nodiscard]] auto lookup(std::string_view term) const -> const Entry*;

  [[nodiscard]] auto canonical_values(MetadataField field) const -> const std::set<std::string>&;
  [[nodiscard]] auto is_canonical(MetadataField field, std::string_view value) const -> bool;
  /// Case-insensitive match against the canonical vocabulary of a field.
  [[nodiscard]] auto canonicalize(MetadataField field, std::string_view value) const
      -> std::optional<std::string>;
  /// Canonical values of `field` sharing the longest case-insensitive prefix with `value`.
  [[nodiscard]] auto suggest(MetadataField field, std::string_view value, std::size_t limit = 5) const
      -> std::vector<std::string>;

  [[nodiscard]] auto size() const -> std::size_t { return entries_.size(); }

private:
  std::unordered_map<std::string, Entry> entries_;
  std::array<std::set<std::string>, kMetadataFieldCount> canonical_{};
};

/// Mines a path against the gazetteer. Later (deeper) matches override earlier
/// ones; a two-token match takes precedence over its first token alone and
/// consumes both tokens.
[[nodiscard]] auto extract_metadata(std::string_view path, const Gazetteer& gazetteer)
    -> MetadataRecord;

struct MetadataConflict {
  MetadataField field;
  // value -> occurrences, for every value seen
  std::map<std::string, std::size_t> counts;
};

struct AggregatedMetadata {
  MetadataRecord record;
  std::vector<MetadataConflict> conflicts;
};

/// Strict majority per field among populated occurrences. A field without a
/// strict majority stays unset and is reported as a conflict.
[[nodiscard]] auto aggregate_statue_metadata(std::span<const MetadataRecord> records)
    -> AggregatedMetadata;

/// Number of statues with each field populated, indexed by MetadataField.
using CoverageReport = std::array<std::size_t, kMetadataFieldCount>;

[[nodiscard]] auto coverage_report(std::span<const StatueRecord> statues) -> CoverageReport;
[[nodiscard]] auto coverage_report(std::span<const MetadataRecord> records) -> CoverageReport;

}  // namespace statuary
