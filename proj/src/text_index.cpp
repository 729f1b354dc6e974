#include "statuary/text_index.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "statuary/errors.hpp"
#include "statuary/metadata.hpp"

namespace statuary {

auto rank_page(std::vector<ScoredId> scored, std::size_t k, std::size_t offset)
    -> std::vector<QueryResult> {
  const auto better = [](const ScoredId& a, const ScoredId& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  };
  const std::size_t end = std::min(scored.size(), offset + k);
  if (offset >= end) {
    return {};
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(end), scored.end(),
                    better);
  std::vector<QueryResult> out;
  out.reserve(end - offset);
  for (std::size_t i = offset; i < end; ++i) {
    out.push_back({std::move(scored[i].id), scored[i].score, i + 1, {}});
  }
  return out;
}

InvertedIndex::InvertedIndex(std::span<const std::string> texts) : doc_count_(texts.size()) {
  for (std::size_t doc = 0; doc < texts.size(); ++doc) {
    std::map<std::string, std::uint32_t> tf;
    for (auto& token : tokenize_path(texts[doc]).tokens) {
      ++tf[std::move(token.text)];
    }
    for (auto& [term, count] : tf) {
      postings_[term].push_back({doc, count});
    }
  }
}

auto InvertedIndex::document_frequency(std::string_view term) const -> std::size_t {
  return postings(term).size();
}

auto InvertedIndex::postings(std::string_view term) const -> std::span<const Posting> {
  const auto it = postings_.find(std::string(term));
  if (it == postings_.end()) {
    return {};
  }
  return it->second;
}

auto InvertedIndex::idf(std::string_view term) const -> double {
  const auto df = document_frequency(term);
  if (df == 0) {
    return 0.0;
  }
  return std::log(1.0 + static_cast<double>(doc_count_) / static_cast<double>(df));
}

auto InvertedIndex::match_all(std::span<const std::string> terms) const
    -> std::vector<std::pair<std::size_t, double>> {
  const std::set<std::string> unique(terms.begin(), terms.end());
  if (unique.empty()) {
    return {};
  }
  std::vector<std::pair<std::span<const Posting>, double>> lists;
  for (const auto& term : unique) {
    const auto list = postings(term);
    if (list.empty()) {
      return {};
    }
    lists.emplace_back(list, idf(term));
  }
  std::sort(lists.begin(), lists.end(),
            [](const auto& a, const auto& b) { return a.first.size() < b.first.size(); });

  std::vector<std::pair<std::size_t, double>> out;
  std::vector<std::size_t> cursor(lists.size(), 0);
  for (const auto& head : lists.front().first) {
    bool in_all = true;
    for (std::size_t l = 1; l < lists.size() && in_all; ++l) {
      const auto& list = lists[l].first;
      auto& c = cursor[l];
      while (c < list.size() && list[c].doc < head.doc) {
        ++c;
      }
      in_all = c < list.size() && list[c].doc == head.doc;
    }
    if (in_all) {
      out.emplace_back(head.doc, 0.0);
    }
  }
  // Summed in term order so scores do not depend on posting-list lengths.
  for (auto& [doc, score] : out) {
    for (const auto& term : unique) {
      const auto list = postings(term);
      const auto it = std::lower_bound(list.begin(), list.end(), doc,
                                       [](const Posting& p, std::size_t d) { return p.doc < d; });
      score += static_cast<double>(it->tf) * idf(term);
    }
  }
  return out;
}

TextIndex::TextIndex(std::vector<TextDocument> docs, std::vector<std::string> field_names)
    : field_names_(std::move(field_names)) {
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!ordinals_.emplace(docs[i].id, i).second) {
      throw ParameterError("duplicate document id '" + docs[i].id + "'");
    }
    ids_.push_back(docs[i].id);
  }
  std::vector<std::string> whole;
  whole.reserve(docs.size());
  for (const auto& doc : docs) {
    std::string text;
    for (const auto& [name, value] : doc.fields) {
      text += value;
      text += ' ';
    }
    whole.push_back(std::move(text));
  }
  all_ = InvertedIndex(whole);
  for (const auto& name : field_names_) {
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& doc : docs) {
      const auto it = doc.fields.find(name);
      texts.push_back(it == doc.fields.end() ? std::string{} : it->second);
    }
    by_field_.emplace(name, InvertedIndex(texts));
  }
}

auto TextIndex::ordinal(std::string_view id) const -> std::optional<std::size_t> {
  const auto it = ordinals_.find(std::string(id));
  if (it == ordinals_.end()) {
    return std::nullopt;
  }
  return it->second;
}

auto TextIndex::has_field(std::string_view field) const -> bool {
  return by_field_.find(field) != by_field_.end();
}

auto TextIndex::view(const std::optional<std::string>& field) const -> const InvertedIndex& {
  if (!field) {
    return all_;
  }
  const auto it = by_field_.find(*field);
  if (it == by_field_.end()) {
    throw FieldError("unknown search field '" + *field + "'");
  }
  return it->second;
}

auto TextIndex::match(std::string_view query, const std::optional<std::string>& field) const
    -> std::vector<std::pair<std::size_t, double>> {
  const auto& index = view(field);
  const auto terms = tokenize_path(query).texts();
  return index.match_all(terms);
}

auto build_text_index(std::vector<TextDocument> docs, std::vector<std::string> field_names)
    -> TextIndex {
  return {std::move(docs), std::move(field_names)};
}

auto text_search(const TextIndex& index, std::string_view query, std::size_t k,
                 const std::optional<std::string>& field) -> std::vector<QueryResult> {
  if (k == 0) {
    throw ParameterError("k must be at least 1");
  }
  std::vector<ScoredId> scored;
  for (const auto& [ordinal, score] : index.match(query, field)) {
    scored.push_back({index.doc_id(ordinal), score});
  }
  return rank_page(std::move(scored), k);
}

}  // namespace statuary
