#include "statuary/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "statuary/errors.hpp"
#include "statuary/similarity.hpp"
#include "statuary/utf8.hpp"
#include "statuary/vecf.hpp"

namespace statuary {

namespace fs = std::filesystem;

namespace {

constexpr double kUnitTolerance = 1e-5;
const std::vector<std::string> kCurationFlags = {"no_vector", "untimed"};

auto add_flag(ArchiveImage& image, const std::string& flag) {
  if (std::find(image.flags.begin(), image.flags.end(), flag) == image.flags.end()) {
    image.flags.push_back(flag);
  }
}

auto normalized_copy(const VectorStore& store, std::size_t& fixed) -> VectorStore {
  fixed = 0;
  RowMatrix matrix = store.matrix();
  for (std::size_t r = 0; r < store.count(); ++r) {
    const auto row = matrix.row(static_cast<Eigen::Index>(r));
    if (std::abs(l2_norm(row) - 1.0) > kUnitTolerance) {
      matrix.row(static_cast<Eigen::Index>(r)) = l2_normalize(row.transpose()).transpose();
      ++fixed;
    }
  }
  if (fixed == 0) {
    return store;
  }
  return {store.ns(), std::move(matrix), store.ids()};
}

}  // namespace

auto image_id_for_path(std::string_view relative_path) -> std::string {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : relative_path) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out = "img-";
  for (int shift = 60; shift >= 0; shift -= 4) {
    out.push_back(kHex[(hash >> shift) & 0xF]);
  }
  return out;
}

auto ingest_tree(const fs::path& root, const Gazetteer& gazetteer) -> Manifest {
  if (!fs::is_directory(root)) {
    throw Error("archive root '" + root.string() + "' is not a directory");
  }
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      files.emplace_back(entry.path().lexically_relative(root).generic_string(), entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  Manifest manifest;
  std::unordered_set<std::string> taken;
  for (const auto& [relative, full] : files) {
    ArchiveImage image;
    std::string id = image_id_for_path(relative);
    for (int suffix = 2; taken.contains(id); ++suffix) {
      id = image_id_for_path(relative) + "-" + std::to_string(suffix);
    }
    taken.insert(id);
    image.id = std::move(id);
    image.path = sanitize_utf8(relative);
    if (!is_valid_utf8(relative)) {
      image.flags.emplace_back("undecodable_name");
    }
    const auto slash = image.path.rfind('/');
    image.folder_id = slash == std::string::npos ? "." : image.path.substr(0, slash);
    const auto mtime = fs::last_write_time(full);
    const auto sys = std::chrono::file_clock::to_sys(mtime);
    image.timestamp = std::chrono::duration_cast<std::chrono::seconds>(sys.time_since_epoch()).count();
    image.metadata = extract_metadata(relative, gazetteer);
    manifest.images.push_back(std::move(image));
  }
  return manifest;
}

auto coverage_to_json(const CoverageReport& coverage) -> Json {
  Json j = Json::object();
  for (const auto field : kAllMetadataFields) {
    j[std::string(to_string(field))] = coverage[static_cast<std::size_t>(field)];
  }
  return j;
}

auto medoid(std::span<const std::string> members, const VectorStore& store) -> std::string {
  std::string best_id;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : members) {
    const auto ra = *store.find(a);
    double total = 0.0;
    for (const auto& b : members) {
      if (a != b) {
        total += dot_accumulate(store.row(ra), store.row(*store.find(b)));
      }
    }
    if (total > best || (total == best && a < best_id)) {
      best = total;
      best_id = a;
    }
  }
  return best_id;
}

auto curate(Manifest manifest, const VectorStore& global_in, std::optional<VectorStore> face_in,
            const OverrideScript* overrides, const CurateOptions& options) -> CurationOutcome {
  options.thresholds.validate();
  if (global_in.ns() != Namespace::global) {
    throw ParameterError("curation needs the global vector store");
  }
  std::size_t fixed_global = 0;
  VectorStore global = normalized_copy(global_in, fixed_global);
  std::size_t fixed_face = 0;
  if (face_in) {
    face_in = normalized_copy(*face_in, fixed_face);
  }

  std::vector<Json> events;
  auto& images = manifest.images;
  std::vector<std::string> missing;
  std::vector<std::size_t> curated;  // positions in images
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto& image = images[i];
    std::erase_if(image.flags, [](const std::string& f) {
      return std::find(kCurationFlags.begin(), kCurationFlags.end(), f) != kCurationFlags.end();
    });
    image.statue_id.reset();
    image.duplicate_of.reset();
    if (!image.global_row || *image.global_row >= global.count()) {
      image.global_row = global.find(image.id);
    }
    if (image.global_row) {
      curated.push_back(i);
    } else {
      add_flag(image, "no_vector");
      missing.push_back(image.id);
    }
    if (face_in) {
      for (auto& region : image.face_regions) {
        if (!region.face_row || *region.face_row >= face_in->count()) {
          region.face_row = face_in->find(region.face_id);
        }
      }
    }
  }
  events.push_back({{"stage", "vectors"},
                    {"images", images.size()},
                    {"with_vector", curated.size()},
                    {"normalized_rows", fixed_global + fixed_face},
                    {"warnings", missing}});

  // Curation works on a store keyed by image id.
  RowMatrix rows(static_cast<Eigen::Index>(curated.size()), static_cast<Eigen::Index>(global.dim()));
  std::vector<std::string> ids;
  ids.reserve(curated.size());
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t s = 0; s < curated.size(); ++s) {
    const auto& image = images[curated[s]];
    rows.row(static_cast<Eigen::Index>(s)) = global.row(*image.global_row);
    ids.push_back(image.id);
    position.emplace(image.id, curated[s]);
  }
  const VectorStore by_image(Namespace::global, std::move(rows), ids);

  const auto pairs = pairwise_near_duplicates(by_image, options.thresholds.duplicate);
  auto dedup = dedup_select(pairs, ids);
  for (const auto& [dup, survivor] : dedup.duplicate_of) {
    images[position.at(dup)].duplicate_of = survivor;
  }
  events.push_back({{"stage", "dedup"},
                    {"pairs", pairs.size()},
                    {"survivors", dedup.survivors.size()},
                    {"duplicates", dedup.duplicate_of.size()}});

  std::map<std::string, std::vector<ArchiveImage>> folders;
  for (const auto& id : dedup.survivors) {
    ArchiveImage copy = images[position.at(id)];
    copy.global_row = *by_image.find(id);
    folders[copy.folder_id].push_back(std::move(copy));
  }
  std::vector<Chain> chains;
  std::vector<std::string> untimed;
  for (const auto& [folder, members] : folders) {
    auto result = build_chains(members, by_image, options.thresholds.chain);
    chains.insert(chains.end(), result.chains.begin(), result.chains.end());
    untimed.insert(untimed.end(), result.untimed.begin(), result.untimed.end());
  }
  for (const auto& id : untimed) {
    add_flag(images[position.at(id)], "untimed");
  }
  events.push_back({{"stage", "chains"},
                    {"folders", folders.size()},
                    {"chains", chains.size()},
                    {"untimed", untimed.size()},
                    {"warnings", untimed}});

  const auto graph =
      build_identity_graph(chains, by_image, options.thresholds.k, options.thresholds.link);
  const auto knn_edges = static_cast<std::size_t>(std::count_if(
      graph.edges.begin(), graph.edges.end(), [](const IdentityEdge& e) { return e.kind == EdgeKind::knn; }));
  events.push_back({{"stage", "identity_graph"},
                    {"nodes", graph.nodes.size()},
                    {"chain_edges", graph.edges.size() - knn_edges},
                    {"knn_edges", knn_edges}});

  auto clusters = connected_components(graph);
  events.push_back({{"stage", "components"}, {"statues", clusters.size()}});
  if (overrides != nullptr) {
    clusters = apply_overrides(std::move(clusters), *overrides);
    events.push_back({{"stage", "overrides"},
                      {"operations", overrides->ops.size()},
                      {"statues", clusters.size()}});
  }

  std::vector<StatueRecord> statues;
  statues.reserve(clusters.size());
  std::vector<std::string> conflict_warnings;
  std::size_t conflicts = 0;
  for (auto& cluster : clusters) {
    StatueRecord statue;
    statue.id = cluster.id;
    statue.canonical_image = medoid(cluster.members, by_image);
    std::vector<MetadataRecord> records;
    for (const auto& member : cluster.members) {
      const auto group = dedup.groups.find(member);
      if (group == dedup.groups.end()) {
        records.push_back(images[position.at(member)].metadata);
        continue;
      }
      for (const auto& copy : group->second) {
        records.push_back(images[position.at(copy)].metadata);
      }
    }
    auto aggregated = aggregate_statue_metadata(records);
    statue.metadata = std::move(aggregated.record);
    for (const auto& conflict : aggregated.conflicts) {
      ++conflicts;
      conflict_warnings.push_back(statue.id + ": " + std::string(to_string(conflict.field)) +
                                  " has no majority value");
    }
    statue.image_ids = std::move(cluster.members);
    statues.push_back(std::move(statue));
  }
  events.push_back({{"stage", "metadata"},
                    {"conflicts", conflicts},
                    {"coverage", coverage_to_json(coverage_report(statues))},
                    {"warnings", conflict_warnings}});

  auto filtered = filter_statues(statues, options.min_pictures);
  events.push_back({{"stage", "filter"},
                    {"min_pictures", options.min_pictures},
                    {"statues", filtered.statues.size()},
                    {"pictures", filtered.picture_count},
                    {"dropped", statues.size() - filtered.statues.size()}});
  for (const auto& statue : filtered.statues) {
    for (const auto& member : statue.image_ids) {
      images[position.at(member)].statue_id = statue.id;
    }
  }
  manifest.statues = std::move(filtered.statues);

  return {std::move(manifest), std::move(global), std::move(face_in), std::move(dedup), std::move(events)};
}

auto read_overlay(const fs::path& file) -> std::vector<OverlayEdit> {
  std::vector<OverlayEdit> edits;
  std::ifstream in(file);
  if (!in) {
    return edits;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const auto j = Json::parse(line);
      OverlayEdit edit;
      edit.seq = j.at("seq").get<std::uint64_t>();
      edit.statue_id = j.at("statue_id").get<std::string>();
      edit.field = j.at("field").get<std::string>();
      if (!j.at("value").is_null()) {
        edit.value = j.at("value").get<std::string>();
      }
      edits.push_back(std::move(edit));
    } catch (const std::exception& e) {
      throw ParseError(file.string(), line_no, e.what());
    }
  }
  return edits;
}

void append_overlay(const fs::path& file, const OverlayEdit& edit) {
  std::ofstream out(file, std::ios::app);
  if (!out) {
    throw Error("cannot open overlay '" + file.string() + "'");
  }
  Json j = {{"seq", edit.seq}, {"statue_id", edit.statue_id}, {"field", edit.field}};
  j["value"] = edit.value ? Json(*edit.value) : Json(nullptr);
  JsonLinesWriter(out).write(j);
  out.flush();
  if (!out) {
    throw Error("failed writing overlay '" + file.string() + "'");
  }
}

auto apply_overlay(Manifest& manifest, std::span<const OverlayEdit> edits) -> std::size_t {
  std::unordered_map<std::string, StatueRecord*> by_id;
  for (auto& statue : manifest.statues) {
    by_id.emplace(statue.id, &statue);
  }
  std::size_t skipped = 0;
  for (const auto& edit : edits) {
    const auto it = by_id.find(edit.statue_id);
    if (it == by_id.end()) {
      ++skipped;
      continue;
    }
    if (edit.field == "notes") {
      it->second->notes = edit.value.value_or("");
    } else if (const auto field = parse_metadata_field(edit.field)) {
      it->second->metadata.set(*field, edit.value);
    } else {
      ++skipped;
    }
  }
  return skipped;
}

auto load_archive(const fs::path& root) -> LoadedArchive {
  const ArchiveLayout layout{root};
  if (!fs::exists(layout.manifest())) {
    throw Error("archive '" + root.string() + "' has no manifest.jsonl");
  }
  LoadedArchive archive;
  archive.manifest = read_manifest(layout.manifest());
  if (fs::exists(layout.global_vectors())) {
    archive.global = read_vector_store(layout.global_vectors());
  }
  if (fs::exists(layout.face_vectors())) {
    archive.face = read_vector_store(layout.face_vectors());
  }
  if (fs::exists(layout.gazetteer())) {
    archive.gazetteer = Gazetteer::load(layout.gazetteer());
  }
  const auto edits = read_overlay(layout.overlay());
  apply_overlay(archive.manifest, edits);
  archive.overlay_edits = edits.size();
  return archive;
}

}  // namespace statuary
