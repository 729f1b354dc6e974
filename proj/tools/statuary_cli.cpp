// statuary: ingest, curate, index, serve, query and map an image archive.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "statuary/engine.hpp"
#include "statuary/errors.hpp"
#include "statuary/neighborhood_map.hpp"
#include "statuary/pipeline.hpp"
#include "statuary/service.hpp"
#include "statuary/similarity.hpp"
#include "statuary/vecf.hpp"
#include "statuary/vector_index.hpp"

namespace fs = std::filesystem;
using namespace statuary;

namespace {

constexpr int kValidationFailed = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pipeline settings from --config; command-line flags win.
struct PipelineConfig {
  std::optional<fs::path> archive_root;
  std::optional<fs::path> gazetteer;
  std::optional<fs::path> out;
  CurationThresholds thresholds;
  std::size_t min_pictures = 1;
  MapParams map;
};

auto load_pipeline_config(const std::string& file) -> PipelineConfig {
  PipelineConfig config;
  if (file.empty()) {
    return config;
  }
  std::ifstream in(file);
  if (!in) {
    throw UsageError("cannot open config '" + file + "'");
  }
  const auto j = Json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw UsageError("config '" + file + "' is not a JSON object");
  }
  const fs::path base = fs::path(file).parent_path();
  auto path_of = [&](const char* key) -> std::optional<fs::path> {
    if (!j.contains(key)) {
      return std::nullopt;
    }
    fs::path p = j.at(key).get<std::string>();
    return p.is_relative() ? base / p : p;
  };
  config.archive_root = path_of("archive_root");
  config.gazetteer = path_of("gazetteer");
  config.out = path_of("out");
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    config.thresholds.duplicate = t.value("duplicate", config.thresholds.duplicate);
    config.thresholds.chain = t.value("chain", config.thresholds.chain);
    config.thresholds.link = t.value("link", config.thresholds.link);
    config.thresholds.k = t.value("k", config.thresholds.k);
  }
  config.min_pictures = j.value("min_pictures", config.min_pictures);
  if (j.contains("map")) {
    const auto& m = j.at("map");
    config.map.k_neighbors = m.value("k_neighbors", config.map.k_neighbors);
    config.map.epochs = m.value("epochs", config.map.epochs);
    config.map.negative_samples = m.value("negative_samples", config.map.negative_samples);
    config.map.learning_rate = m.value("learning_rate", config.map.learning_rate);
  }
  config.map.seed = j.value("seed", config.map.seed);
  return config;
}

void write_json_file(const fs::path& file, const Json& j) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) {
    throw Error("cannot open '" + file.string() + "' for writing");
  }
  out << j.dump(2) << '\n';
}

auto read_query_vector(const fs::path& file) -> Vector {
  if (!fs::exists(file)) {
    throw UsageError("vector file '" + file.string() + "' does not exist");
  }
  if (looks_like_vecf(file)) {
    const auto store = read_vector_store(file);
    if (store.count() != 1) {
      throw UsageError("vector file holds " + std::to_string(store.count()) + " rows, expected 1");
    }
    return store.row(0).transpose();
  }
  std::ifstream in(file);
  std::vector<float> values;
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      values.push_back(std::stof(token, &used));
      if (used != token.size()) {
        throw std::invalid_argument(token);
      }
    } catch (const std::exception&) {
      throw UsageError("vector file has a non-numeric token '" + token + "'");
    }
  }
  if (values.empty()) {
    throw UsageError("vector file is empty");
  }
  return l2_normalize(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

auto cmd_ingest(const fs::path& root, const PipelineConfig& config, std::optional<fs::path> gazetteer,
                std::optional<fs::path> out) -> int {
  gazetteer = gazetteer ? gazetteer : config.gazetteer;
  out = out ? out : config.out;
  if (!gazetteer || !fs::is_regular_file(*gazetteer)) {
    std::cerr << "error: gazetteer " << (gazetteer ? "'" + gazetteer->string() + "' not found" : "not given")
              << '\n';
    return kUsageError;
  }
  if (!out) {
    throw UsageError("--out is required");
  }
  const auto lexicon = Gazetteer::load(*gazetteer);
  const auto manifest = ingest_tree(root, lexicon);
  fs::create_directories(*out);
  const ArchiveLayout layout{*out};
  write_manifest(manifest, layout.manifest());
  if (!fs::exists(layout.gazetteer()) || !fs::equivalent(*gazetteer, layout.gazetteer())) {
    fs::copy_file(*gazetteer, layout.gazetteer(), fs::copy_options::overwrite_existing);
  }

  std::vector<MetadataRecord> records;
  std::size_t flagged = 0;
  for (const auto& image : manifest.images) {
    records.push_back(image.metadata);
    flagged += image.flags.empty() ? 0 : 1;
  }
  const Json report = {{"images", manifest.images.size()},
                       {"flagged", flagged},
                       {"coverage", coverage_to_json(coverage_report(records))}};
  write_json_file(layout.ingest_report(), report);
  std::cout << report.dump(2) << '\n';
  return 0;
}

auto cmd_curate(const fs::path& manifest_file, const fs::path& vectors, const std::optional<fs::path>& faces,
                const std::optional<fs::path>& overrides, std::optional<fs::path> out, PipelineConfig config)
    -> int {
  out = out ? out : config.out;
  if (!out) {
    out = manifest_file.parent_path().empty() ? fs::path(".") : manifest_file.parent_path();
  }
  auto manifest = read_manifest(manifest_file);
  const auto global = read_vector_store(vectors);
  std::optional<VectorStore> face;
  if (faces) {
    face = read_vector_store(*faces);
  }
  std::optional<OverrideScript> script;
  if (overrides) {
    script = OverrideScript::load(*overrides);
  }
  const CurateOptions options{config.thresholds, config.min_pictures};
  auto outcome = curate(std::move(manifest), global, std::move(face), script ? &*script : nullptr, options);

  fs::create_directories(*out);
  const ArchiveLayout layout{*out};
  write_manifest(outcome.manifest, layout.manifest());
  write_vector_store(outcome.global, layout.global_vectors());
  if (outcome.face) {
    write_vector_store(*outcome.face, layout.face_vectors());
  }
  const auto source_gazetteer = ArchiveLayout{manifest_file.parent_path()}.gazetteer();
  if (fs::exists(source_gazetteer) &&
      (!fs::exists(layout.gazetteer()) || !fs::equivalent(source_gazetteer, layout.gazetteer()))) {
    fs::copy_file(source_gazetteer, layout.gazetteer(), fs::copy_options::overwrite_existing);
  }
  std::ofstream report(layout.curation_report(), std::ios::trunc);
  JsonLinesWriter writer(report);
  for (const auto& event : outcome.events) {
    writer.write(event);
  }
  std::cout << "statues: " << outcome.manifest.statues.size()
            << "  duplicates: " << outcome.dedup.duplicate_of.size() << "  out: " << out->string() << '\n';
  return 0;
}

auto cmd_index(const fs::path& archive_root) -> int {
  const auto archive = load_archive(archive_root);
  const auto report = validate_archive(archive.manifest.images, archive.manifest.statues,
                                       {archive.global ? &*archive.global : nullptr,
                                        archive.face ? &*archive.face : nullptr});
  const SearchEngine engine(archive.manifest, archive.global, archive.face);
  Json stats = {{"images", engine.images().size()},
                {"statues", engine.statues().size()},
                {"overlay_edits", archive.overlay_edits},
                {"text_vocabulary", engine.text_index().view(std::nullopt).vocabulary_size()},
                {"violations", report.violations.size()}};
  for (const auto ns : {Namespace::global, Namespace::face}) {
    const auto* store = engine.store(ns);
    if (store == nullptr || store->empty()) {
      continue;
    }
    const auto graph = ProximityGraphIndex::build(std::make_shared<const VectorStore>(*store), {});
    stats[std::string(to_string(ns))] = {{"count", store->count()},
                                         {"dim", store->dim()},
                                         {"graph_levels", graph.max_level() + 1},
                                         {"graph_reachable", graph.base_reachable_count()}};
  }
  std::cout << stats.dump(2) << '\n';
  for (const auto& v : report.violations) {
    std::cerr << "violation: " << v.kind << " " << v.subject << ": " << v.message << '\n';
  }
  return report.ok() ? 0 : kValidationFailed;
}

auto cmd_serve(const std::string& config_file) -> int {
  if (config_file.empty()) {
    throw UsageError("serve needs --config");
  }
  auto config = ApiConfig::load(config_file);
  config.apply_env([](const char* name) { return std::getenv(name); });
  ArchiveService service(config);
  const int port = service.bind();
  std::cout << "listening on http://" << config.host << ":" << port << std::endl;
  service.run();
  return 0;
}

auto cmd_query(const fs::path& archive_root, const std::optional<std::string>& text,
               const std::optional<fs::path>& vector_file, const std::vector<std::string>& filters,
               const std::optional<std::string>& field, std::size_t k, std::size_t offset, const std::string& ns,
               const std::string& format) -> int {
  if (!text && !vector_file) {
    throw UsageError("query needs --text or --vector-file");
  }
  HybridQuery q;
  q.text = text;
  q.text_field = field;
  q.k = k;
  q.offset = offset;
  q.ns = parse_namespace(ns);
  if (vector_file) {
    q.vector = read_query_vector(*vector_file);
  }
  for (const auto& f : filters) {
    const auto eq = f.find('=');
    const auto parsed = eq == std::string::npos ? std::nullopt : parse_metadata_field(f.substr(0, eq));
    if (!parsed) {
      throw UsageError("--filter expects field=value with a metadata field, got '" + f + "'");
    }
    q.filters.emplace_back(*parsed, f.substr(eq + 1));
  }
  const auto archive = load_archive(archive_root);
  const SearchEngine engine(archive.manifest, archive.global, archive.face);
  const auto page = engine.hybrid_search(q);
  if (format == "json") {
    Json results = Json::array();
    for (const auto& r : page.results) {
      Json facets = Json::array();
      for (const auto& f : r.facets) {
        facets.push_back({{"field", f.field}, {"value", f.value}});
      }
      results.push_back({{"id", r.id}, {"score", r.score}, {"rank", r.rank}, {"facets", facets}});
    }
    std::cout << Json{{"total", page.total}, {"results", results}}.dump(2) << '\n';
    return 0;
  }
  std::cout << std::left << std::setw(6) << "rank" << std::setw(12) << "score" << "statue\n";
  for (const auto& r : page.results) {
    std::ostringstream score;
    score << std::fixed << std::setprecision(6) << r.score;
    std::cout << std::setw(6) << r.rank << std::setw(12) << score.str() << r.id << '\n';
  }
  std::cout << page.results.size() << " of " << page.total << " statues\n";
  return 0;
}

auto cmd_map(const fs::path& archive_root, const std::string& scope, const std::string& ns,
             const fs::path& out, MapParams params) -> int {
  if (scope != "all") {
    throw UsageError("map supports --scope all");
  }
  const auto archive = load_archive(archive_root);
  const auto namespace_tag = parse_namespace(ns);
  const auto& store = namespace_tag == Namespace::global ? archive.global : archive.face;
  if (!store) {
    throw UsageError("archive has no " + ns + " vectors");
  }
  const auto layout = build_map(*store, params);
  write_layout(layout, out);
  std::cout << "points: " << layout.ids.size() << "  out: " << out.string() << '\n';
  return 0;
}

}  // namespace

auto main(int argc, char** argv) -> int {
  CLI::App app{"statuary: statue archive curation and retrieval"};
  app.require_subcommand(1);
  std::string config_file;
  std::uint64_t seed = 42;
  app.add_option("--config", config_file, "JSON config file");
  app.add_option("--seed", seed, "random seed")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "scan an image tree into a manifest");
  fs::path ingest_root;
  std::optional<fs::path> ingest_gazetteer;
  std::optional<fs::path> ingest_out;
  ingest->add_option("--root", ingest_root, "image tree")->required();
  ingest->add_option("--gazetteer", ingest_gazetteer, "gazetteer TSV");
  ingest->add_option("--out", ingest_out, "output archive directory");

  auto* curate_cmd = app.add_subcommand("curate", "dedup, chain and cluster images into statues");
  fs::path curate_manifest;
  fs::path curate_vectors;
  std::optional<fs::path> curate_faces;
  std::optional<fs::path> curate_overrides;
  std::optional<fs::path> curate_out;
  std::optional<double> theta_dup;
  std::optional<double> theta_chain;
  std::optional<double> theta_link;
  std::optional<std::size_t> link_k;
  std::optional<std::size_t> min_pictures;
  curate_cmd->add_option("--manifest", curate_manifest, "manifest JSON-lines")->required();
  curate_cmd->add_option("--vectors", curate_vectors, "global VECF store")->required();
  curate_cmd->add_option("--faces", curate_faces, "face VECF store");
  curate_cmd->add_option("--overrides", curate_overrides, "override script");
  curate_cmd->add_option("--out", curate_out, "output archive directory");
  curate_cmd->add_option("--theta-dup", theta_dup, "near-duplicate threshold");
  curate_cmd->add_option("--theta-chain", theta_chain, "chain threshold");
  curate_cmd->add_option("--theta-link", theta_link, "identity link threshold");
  curate_cmd->add_option("--k", link_k, "identity graph neighbors");
  curate_cmd->add_option("--min-pictures", min_pictures, "drop statues with fewer pictures");

  auto* index = app.add_subcommand("index", "build indexes and verify an archive");
  fs::path index_archive;
  index->add_option("--archive", index_archive, "archive directory")->required();

  auto* serve = app.add_subcommand("serve", "start the HTTP service");
  std::string serve_config;
  serve->add_option("--config", serve_config, "service config JSON");

  auto* query = app.add_subcommand("query", "offline hybrid search");
  fs::path query_archive;
  std::optional<std::string> query_text;
  std::optional<fs::path> query_vector;
  std::vector<std::string> query_filters;
  std::optional<std::string> query_field;
  std::size_t query_k = 10;
  std::size_t query_offset = 0;
  std::string query_ns = "global";
  std::string query_format = "table";
  query->add_option("--archive", query_archive, "archive directory")->required();
  auto* text_opt = query->add_option("--text", query_text, "text query");
  auto* vector_opt = query->add_option("--vector-file", query_vector, "VECF or whitespace-separated floats");
  text_opt->excludes(vector_opt);
  query->add_option("--filter", query_filters, "metadata filter field=value");
  query->add_option("--field", query_field, "restrict text to one field");
  query->add_option("--k", query_k, "results per page")->capture_default_str();
  query->add_option("--offset", query_offset, "results to skip")->capture_default_str();
  query->add_option("--namespace", query_ns, "vector namespace")->check(CLI::IsMember({"global", "face"}));
  query->add_option("--format", query_format, "output format")->check(CLI::IsMember({"table", "json"}));

  auto* map = app.add_subcommand("map", "write a 2D neighborhood layout");
  std::optional<fs::path> map_archive;
  std::string map_scope = "all";
  std::string map_ns = "global";
  fs::path map_out;
  std::optional<std::size_t> map_epochs;
  map->add_option("--archive", map_archive, "archive directory");
  map->add_option("--scope", map_scope, "layout scope")->check(CLI::IsMember({"all"}));
  map->add_option("--namespace", map_ns, "vector namespace")->check(CLI::IsMember({"global", "face"}));
  map->add_option("--out", map_out, "layout JSON-lines")->required();
  map->add_option("--epochs", map_epochs, "optimization epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (serve->parsed()) {
      return cmd_serve(serve_config.empty() ? config_file : serve_config);
    }
    auto config = load_pipeline_config(config_file);
    config.map.seed = app.get_option("--seed")->count() > 0 ? seed : config.map.seed;
    if (ingest->parsed()) {
      return cmd_ingest(ingest_root, config, ingest_gazetteer, ingest_out);
    }
    if (curate_cmd->parsed()) {
      config.thresholds.duplicate = theta_dup.value_or(config.thresholds.duplicate);
      config.thresholds.chain = theta_chain.value_or(config.thresholds.chain);
      config.thresholds.link = theta_link.value_or(config.thresholds.link);
      config.thresholds.k = link_k.value_or(config.thresholds.k);
      config.min_pictures = min_pictures.value_or(config.min_pictures);
      return cmd_curate(curate_manifest, curate_vectors, curate_faces, curate_overrides, curate_out, config);
    }
    if (index->parsed()) {
      return cmd_index(index_archive);
    }
    if (query->parsed()) {
      return cmd_query(query_archive, query_text, query_vector, query_filters, query_field, query_k, query_offset,
                       query_ns, query_format);
    }
    if (map->parsed()) {
      if (!map_archive && !config.archive_root) {
        throw UsageError("map needs --archive");
      }
      config.map.epochs = map_epochs.value_or(config.map.epochs);
      return cmd_map(map_archive ? *map_archive : *config.archive_root, map_scope, map_ns, map_out, config.map);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}
