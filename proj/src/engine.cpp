#include "statuary/engine.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "statuary/errors.hpp"
#include "statuary/metadata.hpp"
#include "statuary/similarity.hpp"
#include "statuary/vector_index.hpp"

namespace statuary {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

auto equals_ignore_case(std::string_view a, std::string_view b) -> bool {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           const auto lx = (x >= 'A' && x <= 'Z') ? static_cast<char>(x - 'A' + 'a') : x;
           const auto ly = (y >= 'A' && y <= 'Z') ? static_cast<char>(y - 'A' + 'a') : y;
           return lx == ly;
         });
}

auto statue_document(const StatueRecord& statue, const std::unordered_map<std::string, std::size_t>& image_pos,
                     const std::vector<ArchiveImage>& images) -> TextDocument {
  TextDocument doc{statue.id, {}};
  for (const auto field : kAllMetadataFields) {
    if (const auto& value = statue.metadata.get(field)) {
      doc.fields.emplace(std::string(to_string(field)), *value);
    }
  }
  std::string paths;
  for (const auto& image_id : statue.image_ids) {
    if (const auto it = image_pos.find(image_id); it != image_pos.end()) {
      paths += images[it->second].path;
      paths += '\n';
    }
  }
  doc.fields.emplace(std::string(kPathField), std::move(paths));
  if (!statue.notes.empty()) {
    doc.fields.emplace(std::string(kNotesField), statue.notes);
  }
  return doc;
}

}  // namespace

auto predict_labels(const VectorStore& store, const Vector& query, std::size_t k_vote,
                    const std::function<std::optional<std::string>(std::size_t row)>& label_of)
    -> LabelPrediction {
  if (store.empty()) {
    throw ParameterError("label prediction needs a non-empty face store");
  }
  if (k_vote == 0) {
    throw ParameterError("k_vote must be at least 1");
  }
  if (static_cast<std::size_t>(query.size()) != store.dim()) {
    throw DimensionError("query has dimension " + std::to_string(query.size()) + ", store has " +
                         std::to_string(store.dim()));
  }
  struct Labeled {
    double score;
    std::size_t row;
    std::string label;
  };
  std::vector<Labeled> labeled;
  for (std::size_t r = 0; r < store.count(); ++r) {
    if (auto label = label_of(r)) {
      labeled.push_back({dot_accumulate(store.row(r), query), r, std::move(*label)});
    }
  }
  if (labeled.empty()) {
    throw NoLabelError("no neighbor carries a label");
  }
  const std::size_t take = std::min(k_vote, labeled.size());
  std::partial_sort(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(take), labeled.end(),
                    [&](const Labeled& a, const Labeled& b) {
                      return a.score != b.score ? a.score > b.score : store.id(a.row) < store.id(b.row);
                    });
  std::map<std::string, std::size_t> votes;
  for (std::size_t i = 0; i < take; ++i) {
    ++votes[labeled[i].label];
  }
  std::size_t top = 0;
  for (const auto& [label, count] : votes) {
    top = std::max(top, count);
  }
  // Neighbors are in nearest-first order, so the first tied label wins.
  for (std::size_t i = 0; i < take; ++i) {
    if (votes[labeled[i].label] == top) {
      return {labeled[i].label, static_cast<double>(top) / static_cast<double>(k_vote), top};
    }
  }
  throw NoLabelError("no neighbor carries a label");
}

SearchEngine::SearchEngine(Manifest manifest, std::optional<VectorStore> global,
                           std::optional<VectorStore> face)
    : manifest_(std::move(manifest)), global_(std::move(global)), face_(std::move(face)) {
  if (global_ && global_->ns() != Namespace::global) {
    throw ParameterError("global store is tagged as a face store");
  }
  if (face_ && face_->ns() != Namespace::face) {
    throw ParameterError("face store is tagged as a global store");
  }
  for (std::size_t i = 0; i < manifest_.statues.size(); ++i) {
    statue_pos_.emplace(manifest_.statues[i].id, i);
  }
  for (std::size_t i = 0; i < manifest_.images.size(); ++i) {
    image_pos_.emplace(manifest_.images[i].id, i);
  }

  // Ownership comes from the statue lists, so it never depends on stale statue_id fields.
  std::unordered_map<std::string, std::size_t> image_owner;
  for (std::size_t s = 0; s < manifest_.statues.size(); ++s) {
    for (const auto& image_id : manifest_.statues[s].image_ids) {
      image_owner.emplace(image_id, s);
    }
  }
  auto owner_of = [&](const std::string& image_id) {
    const auto it = image_owner.find(image_id);
    return it == image_owner.end() ? kNone : it->second;
  };

  if (global_) {
    global_owner_.assign(global_->count(), kNone);
    for (const auto& image : manifest_.images) {
      auto row = image.global_row ? image.global_row : global_->find(image.id);
      if (row && *row < global_owner_.size()) {
        global_owner_[*row] = owner_of(image.id);
      }
    }
  }
  if (face_) {
    face_owner_.assign(face_->count(), kNone);
    for (const auto& image : manifest_.images) {
      for (const auto& region : image.face_regions) {
        auto row = region.face_row ? region.face_row : face_->find(region.face_id);
        if (row && *row < face_owner_.size()) {
          face_owner_[*row] = owner_of(image.id);
        }
      }
    }
  }

  std::vector<TextDocument> docs;
  docs.reserve(manifest_.statues.size());
  for (const auto& statue : manifest_.statues) {
    docs.push_back(statue_document(statue, image_pos_, manifest_.images));
  }
  std::vector<std::string> fields;
  for (const auto field : kAllMetadataFields) {
    fields.emplace_back(to_string(field));
  }
  fields.emplace_back(kPathField);
  fields.emplace_back(kNotesField);
  text_ = TextIndex(std::move(docs), std::move(fields));
}

auto SearchEngine::statue(std::string_view id) const -> const StatueRecord* {
  const auto it = statue_pos_.find(std::string(id));
  return it == statue_pos_.end() ? nullptr : &manifest_.statues[it->second];
}

auto SearchEngine::image(std::string_view id) const -> const ArchiveImage* {
  const auto it = image_pos_.find(std::string(id));
  return it == image_pos_.end() ? nullptr : &manifest_.images[it->second];
}

auto SearchEngine::store(Namespace ns) const -> const VectorStore* {
  const auto& s = ns == Namespace::global ? global_ : face_;
  return s ? &*s : nullptr;
}

auto SearchEngine::statue_of_row(Namespace ns, std::size_t row) const -> const StatueRecord* {
  const auto& owners = ns == Namespace::global ? global_owner_ : face_owner_;
  if (row >= owners.size() || owners[row] == kNone) {
    return nullptr;
  }
  return &manifest_.statues[owners[row]];
}

auto SearchEngine::rows_of_statue(Namespace ns, std::string_view statue_id) const
    -> std::vector<std::size_t> {
  std::vector<std::size_t> rows;
  const auto it = statue_pos_.find(std::string(statue_id));
  if (it == statue_pos_.end()) {
    return rows;
  }
  const auto& owners = ns == Namespace::global ? global_owner_ : face_owner_;
  for (std::size_t r = 0; r < owners.size(); ++r) {
    if (owners[r] == it->second) {
      rows.push_back(r);
    }
  }
  return rows;
}

auto SearchEngine::check_vector(Namespace ns, const Vector& v) const -> const VectorStore& {
  const auto* s = store(ns);
  if (s == nullptr) {
    throw QueryError("archive has no " + std::string(to_string(ns)) + " vectors");
  }
  if (static_cast<std::size_t>(v.size()) != s->dim()) {
    throw DimensionError("query has dimension " + std::to_string(v.size()) + ", " +
                         std::string(to_string(ns)) + " store has " + std::to_string(s->dim()));
  }
  return *s;
}

auto SearchEngine::hybrid_search(const HybridQuery& query) const -> SearchPage {
  const bool has_text = query.text && !tokenize_path(*query.text).tokens.empty();
  if (!has_text && !query.vector) {
    throw QueryError("a search needs text or a vector");
  }
  if (query.k == 0) {
    throw ParameterError("k must be at least 1");
  }
  const auto& statues = manifest_.statues;
  std::vector<char> candidate(statues.size(), has_text ? 0 : 1);
  std::vector<double> text_score(statues.size(), 0.0);
  if (has_text) {
    for (const auto& [ordinal, score] : text_.match(*query.text, query.text_field)) {
      const auto pos = statue_pos_.at(text_.doc_id(ordinal));
      candidate[pos] = 1;
      text_score[pos] = score;
    }
  } else if (query.text_field && !text_.has_field(*query.text_field)) {
    throw FieldError("unknown search field '" + *query.text_field + "'");
  }
  for (std::size_t s = 0; s < statues.size(); ++s) {
    if (!candidate[s]) {
      continue;
    }
    for (const auto& [field, value] : query.filters) {
      const auto& have = statues[s].metadata.get(field);
      if (!have || !equals_ignore_case(*have, value)) {
        candidate[s] = 0;
        break;
      }
    }
  }

  std::vector<ScoredId> scored;
  if (query.vector) {
    const auto& store = check_vector(query.ns, *query.vector);
    const auto& owners = query.ns == Namespace::global ? global_owner_ : face_owner_;
    std::vector<double> best(statues.size(), -std::numeric_limits<double>::infinity());
    std::vector<char> seen(statues.size(), 0);
    for (std::size_t r = 0; r < store.count(); ++r) {
      const auto owner = owners[r];
      if (owner == kNone || !candidate[owner]) {
        continue;
      }
      best[owner] = std::max(best[owner], dot_accumulate(store.row(r), *query.vector));
      seen[owner] = 1;
    }
    for (std::size_t s = 0; s < statues.size(); ++s) {
      if (seen[s]) {
        scored.push_back({statues[s].id, best[s]});
      }
    }
  } else {
    for (std::size_t s = 0; s < statues.size(); ++s) {
      if (candidate[s]) {
        scored.push_back({statues[s].id, text_score[s]});
      }
    }
  }

  SearchPage page;
  page.total = scored.size();
  page.results = rank_page(std::move(scored), query.k, query.offset);
  for (auto& result : page.results) {
    result.facets = facets_of(*statue(result.id));
  }
  return page;
}

auto SearchEngine::facets_of(const StatueRecord& statue) const -> std::vector<Facet> {
  std::vector<Facet> facets;
  for (const auto field : kAllMetadataFields) {
    if (const auto& value = statue.metadata.get(field)) {
      facets.push_back({std::string(to_string(field)), *value});
    }
  }
  return facets;
}

auto SearchEngine::predict_field(const Vector& face_vector, MetadataField field, std::size_t k_vote,
                                 std::string_view exclude_statue) const -> LabelPrediction {
  if (!face_) {
    throw ParameterError("archive has no face vectors");
  }
  return predict_labels(*face_, face_vector, k_vote, [&](std::size_t row) -> std::optional<std::string> {
    const auto* owner = statue_of_row(Namespace::face, row);
    if (owner == nullptr || owner->id == exclude_statue) {
      return std::nullopt;
    }
    return owner->metadata.get(field);
  });
}

auto SearchEngine::image_neighbors(std::string_view image_id, std::size_t k) const
    -> std::vector<QueryResult> {
  const auto* img = image(image_id);
  if (img == nullptr) {
    throw QueryError("unknown image '" + std::string(image_id) + "'");
  }
  if (!global_) {
    throw QueryError("archive has no global vectors");
  }
  const auto row = img->global_row ? img->global_row : global_->find(img->id);
  if (!row || *row >= global_->count()) {
    throw QueryError("image '" + img->id + "' has no global vector");
  }
  const Vector q = global_->row(*row).transpose();
  const auto& self = global_->id(*row);
  return filtered_knn(FlatIndex(*global_), q, k, [&](const std::string& id) { return id != self; });
}

}  // namespace statuary
