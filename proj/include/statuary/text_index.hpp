#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "statuary/query.hpp"

namespace statuary {

struct Posting {
  std::size_t doc;  // ordinal; ordinals follow ascending document id
  std::uint32_t tf;

  friend auto operator==(const Posting&, const Posting&) -> bool = default;
};

/// Inverted index over one text view of a corpus. Text is tokenized exactly
/// like paths (see tokenize_path).
class InvertedIndex {
public:
  InvertedIndex() = default;
  /// `texts[i]` is the text of document `i`.
  explicit InvertedIndex(std::span<const std::string> texts);

  [[nodiscard]] auto doc_count() const -> std::size_t { return doc_count_; }
  [[nodiscard]] auto document_frequency(std::string_view term) const -> std::size_t;
  [[nodiscard]] auto postings(std::string_view term) const -> std::span<const Posting>;
  [[nodiscard]] auto vocabulary_size() const -> std::size_t { return postings_.size(); }

  /// idf(t) = ln(1 + N / df(t)); 0 for unknown terms.
  [[nodiscard]] auto idf(std::string_view term) const -> double;

  /// Documents containing every term, with score sum_t tf(t, d) * idf(t).
  /// Duplicate terms count once. Returns (ordinal, score) sorted by ordinal.
  [[nodiscard]] auto match_all(std::span<const std::string> terms) const
      -> std::vector<std::pair<std::size_t, double>>;

private:
  std::size_t doc_count_ = 0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

struct TextDocument {
  std::string id;
  // field name -> text
  std::map<std::string, std::string> fields;
};

/// Whole-document index plus one sub-index per declared field.
class TextIndex {
public:
  TextIndex() = default;
  /// Document ids must be unique (ParameterError otherwise). Fields not in
  /// `field_names` are indexed only in the whole-document view.
  TextIndex(std::vector<TextDocument> docs, std::vector<std::string> field_names);

  [[nodiscard]] auto doc_count() const -> std::size_t { return ids_.size(); }
  [[nodiscard]] auto doc_id(std::size_t ordinal) const -> const std::string& { return ids_[ordinal]; }
  [[nodiscard]] auto ordinal(std::string_view id) const -> std::optional<std::size_t>;
  [[nodiscard]] auto has_field(std::string_view field) const -> bool;
  [[nodiscard]] auto field_names() const -> const std::vector<std::string>& { return field_names_; }

  /// Whole-document index, or a field sub-index. Unknown field -> FieldError.
  [[nodiscard]] auto view(const std::optional<std::string>& field) const -> const InvertedIndex&;

  /// AND-match of the query's tokens; (ordinal, score) sorted by ordinal.
  /// A query without tokens matches nothing.
  [[nodiscard]] auto match(std::string_view query, const std::optional<std::string>& field = {}) const
      -> std::vector<std::pair<std::size_t, double>>;

private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> ordinals_;
  std::vector<std::string> field_names_;
  InvertedIndex all_;
  std::map<std::string, InvertedIndex, std::less<>> by_field_;
};

[[nodiscard]] auto build_text_index(std::vector<TextDocument> docs,
                                    std::vector<std::string> field_names = {}) -> TextIndex;

/// Top-k AND-match by tf-idf, ties by ascending id. k must be >= 1.
[[nodiscard]] auto text_search(const TextIndex& index, std::string_view query, std::size_t k,
                               const std::optional<std::string>& field = {})
    -> std::vector<QueryResult>;

}  // namespace statuary
