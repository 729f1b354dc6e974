#include "statuary/service.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <unordered_map>

#include <httplib.h>

#include "statuary/errors.hpp"
#include "statuary/neighborhood_map.hpp"
#include "statuary/similarity.hpp"
#include "statuary/vector_index.hpp"

namespace statuary {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kVoteK = 5;
constexpr auto kJson = "application/json";

// Raised by handlers to produce a specific HTTP status.
class HttpError : public std::runtime_error {
public:
  HttpError(int status, std::string code, const std::string& message, Json detail = nullptr)
      : std::runtime_error(message), status_(status), code_(std::move(code)), detail_(std::move(detail)) {}

  [[nodiscard]] auto status() const -> int { return status_; }
  [[nodiscard]] auto code() const -> const std::string& { return code_; }
  [[nodiscard]] auto detail() const -> const Json& { return detail_; }

private:
  int status_;
  std::string code_;
  Json detail_;
};

auto parse_size(const std::string& text, const std::string& name) -> std::size_t {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParameterError("'" + name + "' must be a non-negative integer, got '" + text + "'");
  }
  return value;
}

auto parse_double(const std::string& text, const std::string& name) -> double {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used == text.size()) {
      return value;
    }
  } catch (const std::exception&) {
  }
  throw ParameterError("'" + name + "' must be a number, got '" + text + "'");
}

auto page_size(std::size_t k) -> std::size_t {
  if (k == 0) {
    throw ParameterError("k must be at least 1");
  }
  return std::min(k, kMaxPageSize);
}

auto vector_from_json(const Json& j) -> Vector {
  if (!j.is_array() || j.empty()) {
    throw ParameterError("vector must be a non-empty array of numbers");
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ParameterError("vector component " + std::to_string(i) + " is not a number");
    }
    v(static_cast<Eigen::Index>(i)) = j[i].get<float>();
  }
  return l2_normalize(v);
}

auto filters_from_json(const Json& j) -> std::vector<std::pair<MetadataField, std::string>> {
  std::vector<std::pair<MetadataField, std::string>> filters;
  if (j.is_null()) {
    return filters;
  }
  if (!j.is_object()) {
    throw ParameterError("filters must be an object of field: value");
  }
  for (const auto& [key, value] : j.items()) {
    const auto field = parse_metadata_field(key);
    if (!field) {
      throw FieldError("unknown filter field '" + key + "'");
    }
    if (!value.is_string()) {
      throw ParameterError("filter '" + key + "' must be a string");
    }
    filters.emplace_back(*field, value.get<std::string>());
  }
  return filters;
}

auto prediction_to_json(const LabelPrediction& p) -> Json {
  return {{"label", p.label}, {"confidence", p.confidence}, {"votes", p.votes}};
}

auto cors_allows(const std::vector<std::string>& allow, const std::string& origin) -> bool {
  return std::any_of(allow.begin(), allow.end(),
                     [&](const std::string& a) { return a == "*" || a == origin; });
}

struct Snapshot {
  std::shared_ptr<const SearchEngine> engine;
  std::uint64_t version = 0;
};

}  // namespace

void ApiConfig::validate() const {
  if (port < 0 || port > 65535) {
    throw ParameterError("port " + std::to_string(port) + " is out of range");
  }
  if (default_k == 0 || default_k > kMaxPageSize) {
    throw ParameterError("default_k must be in [1, " + std::to_string(kMaxPageSize) + "]");
  }
}

auto ApiConfig::from_json(const Json& j, const fs::path& base_dir) -> ApiConfig {
  static const std::set<std::string> kKeys = {"host", "port", "archive_root", "extractor_url",
                                              "default_k", "cors_allow"};
  if (!j.is_object()) {
    throw ParameterError("config must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) {
      throw ParameterError("unknown config key '" + key + "'");
    }
  }
  ApiConfig config;
  try {
    config.host = j.value("host", config.host);
    config.port = j.value("port", config.port);
    if (j.contains("archive_root")) {
      fs::path root = j.at("archive_root").get<std::string>();
      config.archive_root = root.is_relative() ? base_dir / root : root;
    }
    if (j.contains("extractor_url") && !j.at("extractor_url").is_null()) {
      config.extractor_url = j.at("extractor_url").get<std::string>();
    }
    config.default_k = j.value("default_k", config.default_k);
    config.cors_allow = j.value("cors_allow", config.cors_allow);
  } catch (const Json::exception& e) {
    throw ParameterError(std::string("bad config value: ") + e.what());
  }
  config.validate();
  return config;
}

auto ApiConfig::load(const fs::path& file) -> ApiConfig {
  std::ifstream in(file);
  if (!in) {
    throw ParameterError("cannot open config '" + file.string() + "'");
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(file.string(), 0, e.what());
  }
  return from_json(j, file.parent_path());
}

void ApiConfig::apply_env(const std::function<const char*(const char*)>& getenv) {
  if (const char* port_text = getenv("STATUARY_PORT")) {
    const auto value = parse_size(port_text, "STATUARY_PORT");
    if (value > 65535) {
      throw ParameterError("STATUARY_PORT is out of range");
    }
    port = static_cast<int>(value);
  }
  if (const char* root = getenv("STATUARY_ARCHIVE_ROOT")) {
    archive_root = root;
  }
  if (const char* url = getenv("STATUARY_EXTRACTOR_URL")) {
    if (*url == '\0') {
      extractor_url.reset();
    } else {
      extractor_url = url;
    }
  }
  validate();
}

auto url_encode(std::string_view text) -> std::string {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(ch);
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

auto facet_url(std::string_view field, std::string_view value, std::size_t k, std::size_t offset)
    -> std::string {
  std::string url = "/api/search?q=" + url_encode(value) + "&field=" + url_encode(field) +
                    "&k=" + std::to_string(k);
  if (offset > 0) {
    url += "&offset=" + std::to_string(offset);
  }
  return url;
}

struct ArchiveService::Impl {
  ApiConfig config;
  std::optional<Gazetteer> gazetteer;
  std::size_t overlay_seq = 0;

  mutable std::mutex snapshot_mutex;
  Snapshot current;
  // Serializes edits.
  std::mutex writer_mutex;

  std::mutex map_mutex;
  std::map<std::string, std::string> map_cache;

  httplib::Server server;

  Impl(ApiConfig cfg, LoadedArchive archive) : config(std::move(cfg)) {
    config.validate();
    gazetteer = std::move(archive.gazetteer);
    overlay_seq = archive.overlay_edits;
    current.engine = std::make_shared<const SearchEngine>(std::move(archive.manifest), std::move(archive.global),
                                                          std::move(archive.face));
    current.version = 1;
    routes();
  }

  auto snapshot() const -> Snapshot {
    const std::lock_guard lock(snapshot_mutex);
    return current;
  }

  // Full ranking of a facet query, used to place a statue on the right page.
  auto facet_entry(const SearchEngine& engine, const Facet& facet, std::string_view statue_id,
                   std::map<std::pair<std::string, std::string>, std::vector<std::string>>& memo) const
      -> Json {
    auto key = std::make_pair(facet.field, facet.value);
    auto it = memo.find(key);
    if (it == memo.end()) {
      std::vector<std::string> ranking;
      HybridQuery q;
      q.text = facet.value;
      q.text_field = facet.field;
      q.k = std::max<std::size_t>(engine.statues().size(), 1);
      if (!tokenize_path(facet.value).tokens.empty()) {
        for (const auto& r : engine.hybrid_search(q).results) {
          ranking.push_back(r.id);
        }
      }
      it = memo.emplace(std::move(key), std::move(ranking)).first;
    }
    const auto& ranking = it->second;
    const auto pos = static_cast<std::size_t>(std::find(ranking.begin(), ranking.end(), statue_id) - ranking.begin());
    const std::size_t k = config.default_k;
    const std::size_t offset = pos < ranking.size() ? (pos / k) * k : 0;
    return {{"field", facet.field}, {"value", facet.value}, {"url", facet_url(facet.field, facet.value, k, offset)}};
  }

  auto page_to_json(const SearchEngine& engine, const SearchPage& page, std::size_t k, std::size_t offset) const
      -> Json {
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> memo;
    Json results = Json::array();
    for (const auto& r : page.results) {
      const auto* statue = engine.statue(r.id);
      Json facets = Json::array();
      for (const auto& f : r.facets) {
        facets.push_back(facet_entry(engine, f, r.id, memo));
      }
      results.push_back({{"id", r.id},
                         {"score", r.score},
                         {"rank", r.rank},
                         {"canonical_image", statue->canonical_image},
                         {"image_count", statue->image_ids.size()},
                         {"metadata", metadata_to_json(statue->metadata)},
                         {"facets", std::move(facets)}});
    }
    return {{"total", page.total}, {"k", k}, {"offset", offset}, {"results", std::move(results)}};
  }

  // Text query plus metadata filters from URL parameters.
  static auto text_query(const httplib::Request& req, const std::set<std::string>& extra) -> HybridQuery {
    HybridQuery q;
    for (const auto& [key, value] : req.params) {
      if (key == "q") {
        q.text = value;
      } else if (key == "field") {
        q.text_field = value;
      } else if (const auto field = parse_metadata_field(key)) {
        q.filters.emplace_back(*field, value);
      } else if (!extra.contains(key)) {
        throw ParameterError("unknown query parameter '" + key + "'");
      }
    }
    return q;
  }

  auto k_param(const httplib::Request& req) const -> std::size_t {
    return page_size(req.has_param("k") ? parse_size(req.get_param_value("k"), "k") : config.default_k);
  }

  static auto offset_param(const httplib::Request& req) -> std::size_t {
    return req.has_param("offset") ? parse_size(req.get_param_value("offset"), "offset") : 0;
  }

  void search(const httplib::Request& req, httplib::Response& res) const {
    auto q = text_query(req, {"k", "offset"});
    if (!q.text) {
      throw ParameterError("missing 'q'");
    }
    q.k = k_param(req);
    q.offset = offset_param(req);
    const auto snap = snapshot();
    const auto& engine = *snap.engine;
    SearchPage page;
    if (!tokenize_path(*q.text).tokens.empty()) {
      page = engine.hybrid_search(q);
    } else if (q.text_field && !engine.text_index().has_field(*q.text_field)) {
      throw FieldError("unknown search field '" + *q.text_field + "'");
    }
    reply(res, page_to_json(engine, page, q.k, q.offset));
  }

  void search_vector(const httplib::Request& req, httplib::Response& res) const {
    const auto body = parse_body(req);
    HybridQuery q;
    q.ns = parse_namespace(body.value("namespace", std::string("global")));
    if (!body.contains("vector")) {
      throw ParameterError("missing 'vector'");
    }
    q.vector = vector_from_json(body.at("vector"));
    q.k = page_size(json_size(body, "k", config.default_k));
    q.offset = json_size(body, "offset", 0);
    q.filters = filters_from_json(body.value("filters", Json()));
    if (body.contains("text") && body.at("text").is_string()) {
      q.text = body.at("text").get<std::string>();
    }
    const auto snap = snapshot();
    reply(res, page_to_json(*snap.engine, snap.engine->hybrid_search(q), q.k, q.offset));
  }

  void search_image(const httplib::Request& req, httplib::Response& res) const {
    if (!config.extractor_url) {
      throw HttpError(501, "extractor_unavailable",
                      "image search needs an extractor; set extractor_url in the config or "
                      "STATUARY_EXTRACTOR_URL");
    }
    if (!req.is_multipart_form_data() || !req.has_file("image")) {
      throw ParameterError("expected multipart form data with an 'image' part");
    }
    std::size_t k = config.default_k;
    if (req.has_file("k")) {
      k = parse_size(req.get_file_value("k").content, "k");
    }
    k = page_size(k);
    httplib::MultipartFormDataItems items;
    const auto image = req.get_file_value("image");
    items.push_back({"image", image.content, image.filename.empty() ? "upload" : image.filename,
                     image.content_type.empty() ? "application/octet-stream" : image.content_type});
    if (req.has_file("bbox")) {
      const auto bbox = req.get_file_value("bbox").content;
      std::vector<double> parts;
      std::size_t start = 0;
      while (start <= bbox.size()) {
        const auto comma = std::min(bbox.find(',', start), bbox.size());
        parts.push_back(parse_double(bbox.substr(start, comma - start), "bbox"));
        start = comma + 1;
      }
      if (parts.size() != 4 || parts[2] <= 0 || parts[3] <= 0) {
        throw ParameterError("bbox must be 'x,y,w,h' with w > 0 and h > 0");
      }
      items.push_back({"bbox", bbox, "", "text/plain"});
    }

    httplib::Client client(*config.extractor_url);
    client.set_connection_timeout(5);
    client.set_read_timeout(60);
    const auto reply_or = client.Post("/embed", items);
    if (!reply_or) {
      throw HttpError(502, "extractor_unreachable",
                      "extractor at " + *config.extractor_url + " did not answer: " +
                          httplib::to_string(reply_or.error()));
    }
    if (reply_or->status != 200) {
      throw HttpError(502, "extractor_error", "extractor answered HTTP " + std::to_string(reply_or->status),
                      Json::parse(reply_or->body, nullptr, false).is_discarded() ? Json(reply_or->body)
                                                                                  : Json::parse(reply_or->body));
    }
    Json out;
    Vector global_vector;
    std::vector<std::pair<Json, Vector>> faces;
    try {
      const auto j = Json::parse(reply_or->body);
      global_vector = vector_from_json(j.at("global"));
      for (const auto& face : j.value("faces", Json::array())) {
        faces.emplace_back(face.value("bbox", Json()), vector_from_json(face.at("vector")));
      }
    } catch (const std::exception& e) {
      throw HttpError(502, "extractor_malformed", std::string("extractor reply is malformed: ") + e.what());
    }

    const auto snap = snapshot();
    const auto& engine = *snap.engine;
    HybridQuery gq;
    gq.vector = global_vector;
    gq.ns = Namespace::global;
    gq.k = k;
    out["global"] = page_to_json(engine, engine.hybrid_search(gq), k, 0);
    out["faces"] = Json::array();
    for (const auto& [bbox, vector] : faces) {
      HybridQuery fq;
      fq.vector = vector;
      fq.ns = Namespace::face;
      fq.k = k;
      out["faces"].push_back({{"bbox", bbox}, {"results", page_to_json(engine, engine.hybrid_search(fq), k, 0)}});
    }
    reply(res, out);
  }

  auto statue_detail(const SearchEngine& engine, const StatueRecord& statue) const -> Json {
    Json images = Json::array();
    for (const auto& id : statue.image_ids) {
      const auto* image = engine.image(id);
      if (image == nullptr) {
        continue;
      }
      Json j = image_to_json(*image);
      j.erase("kind");
      j["faces"] = Json::array();
      for (const auto& face : image->face_regions) {
        Json f = face_to_json(face);
        f.erase("kind");
        j["faces"].push_back(std::move(f));
      }
      j["neighbors_url"] = "/api/images/" + url_encode(id) + "/neighbors";
      images.push_back(std::move(j));
    }

    Json predicted = Json::object();
    const auto face_rows = engine.rows_of_statue(Namespace::face, statue.id);
    if (const auto* faces = engine.store(Namespace::face); faces != nullptr && !face_rows.empty()) {
      Vector mean = Vector::Zero(static_cast<Eigen::Index>(faces->dim()));
      for (const auto r : face_rows) {
        mean += faces->row(r).transpose();
      }
      try {
        const Vector query = l2_normalize(mean);
        for (const auto field : kAllMetadataFields) {
          if (statue.metadata.has(field)) {
            continue;
          }
          try {
            predicted[std::string(to_string(field))] =
                prediction_to_json(engine.predict_field(query, field, kVoteK, statue.id));
          } catch (const NoLabelError&) {
          }
        }
      } catch (const NormalizationError&) {
      }
    }

    std::map<std::pair<std::string, std::string>, std::vector<std::string>> memo;
    Json facets = Json::array();
    for (const auto& f : engine.facets_of(statue)) {
      facets.push_back(facet_entry(engine, f, statue.id, memo));
    }
    return {{"id", statue.id},
            {"metadata", metadata_to_json(statue.metadata)},
            {"canonical_image", statue.canonical_image},
            {"notes", statue.notes},
            {"images", std::move(images)},
            {"predicted", std::move(predicted)},
            {"facets", std::move(facets)},
            {"neighbors_url", "/api/images/" + url_encode(statue.canonical_image) + "/neighbors"}};
  }

  void get_statue(const httplib::Request& req, httplib::Response& res) const {
    const auto snap = snapshot();
    const auto* statue = snap.engine->statue(req.matches[1].str());
    if (statue == nullptr) {
      throw HttpError(404, "not_found", "unknown statue '" + req.matches[1].str() + "'");
    }
    reply(res, statue_detail(*snap.engine, *statue));
  }

  void patch_statue(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1].str();
    const auto body = parse_body(req);
    const std::lock_guard writer(writer_mutex);
    const auto snap = snapshot();
    if (snap.engine->statue(id) == nullptr) {
      throw HttpError(404, "not_found", "unknown statue '" + id + "'");
    }

    std::vector<OverlayEdit> edits;
    if (body.contains("metadata")) {
      const auto& fields = body.at("metadata");
      if (!fields.is_object()) {
        throw ParameterError("'metadata' must be an object");
      }
      Json rejected = Json::object();
      for (const auto& [key, value] : fields.items()) {
        const auto field = parse_metadata_field(key);
        if (!field) {
          throw FieldError("unknown metadata field '" + key + "'");
        }
        if (value.is_null()) {
          edits.push_back({0, id, key, std::nullopt});
          continue;
        }
        if (!value.is_string()) {
          throw ParameterError("metadata value for '" + key + "' must be a string or null");
        }
        const auto text = value.get<std::string>();
        const auto canonical = gazetteer ? gazetteer->canonicalize(*field, text) : std::nullopt;
        if (!canonical) {
          rejected[key] = {{"value", text},
                           {"suggestions", gazetteer ? gazetteer->suggest(*field, text) : std::vector<std::string>{}}};
          continue;
        }
        edits.push_back({0, id, key, *canonical});
      }
      if (!rejected.empty()) {
        throw HttpError(422, "non_canonical_value", "values are not in the gazetteer vocabulary", rejected);
      }
    }
    for (const auto& [key, value] : body.items()) {
      if (key == "notes") {
        if (!value.is_string() && !value.is_null()) {
          throw ParameterError("'notes' must be a string or null");
        }
        edits.push_back({0, id, std::string(kNotesField),
                         value.is_null() ? std::nullopt : std::optional(value.get<std::string>())});
      } else if (key != "metadata") {
        throw ParameterError("unknown edit key '" + key + "'");
      }
    }

    Manifest manifest = snap.engine->manifest();
    const ArchiveLayout layout{config.archive_root};
    for (auto& edit : edits) {
      edit.seq = ++overlay_seq;
      if (!config.archive_root.empty()) {
        append_overlay(layout.overlay(), edit);
      }
    }
    apply_overlay(manifest, edits);
    auto next = std::make_shared<const SearchEngine>(
        std::move(manifest), snap.engine->store(Namespace::global) ? std::optional(*snap.engine->store(Namespace::global)) : std::nullopt,
        snap.engine->store(Namespace::face) ? std::optional(*snap.engine->store(Namespace::face)) : std::nullopt);
    {
      const std::lock_guard lock(snapshot_mutex);
      current = {next, snap.version + 1};
    }
    reply(res, statue_detail(*next, *next->statue(id)));
  }

  void get_map(const httplib::Request& req, httplib::Response& res) {
    static const std::set<std::string> kMapParams = {"scope", "namespace", "k_neighbors", "epochs",
                                                     "negative_samples", "learning_rate", "seed"};
    const std::string scope = req.has_param("scope") ? req.get_param_value("scope") : "all";
    if (scope != "all" && scope != "query") {
      throw ParameterError("scope must be 'all' or 'query'");
    }
    MapParams params;
    if (req.has_param("k_neighbors")) {
      params.k_neighbors = parse_size(req.get_param_value("k_neighbors"), "k_neighbors");
    }
    if (req.has_param("epochs")) {
      params.epochs = parse_size(req.get_param_value("epochs"), "epochs");
    }
    if (req.has_param("negative_samples")) {
      params.negative_samples = parse_size(req.get_param_value("negative_samples"), "negative_samples");
    }
    if (req.has_param("learning_rate")) {
      params.learning_rate = parse_double(req.get_param_value("learning_rate"), "learning_rate");
    }
    if (req.has_param("seed")) {
      params.seed = parse_size(req.get_param_value("seed"), "seed");
    }
    const auto ns = parse_namespace(req.has_param("namespace") ? req.get_param_value("namespace") : "global");
    HybridQuery q;
    if (scope == "query") {
      q = text_query(req, kMapParams);
      if (!q.text) {
        throw ParameterError("scope=query needs 'q'");
      }
    } else {
      for (const auto& [key, value] : req.params) {
        if (!kMapParams.contains(key)) {
          throw ParameterError("unknown query parameter '" + key + "'");
        }
      }
    }

    const auto snap = snapshot();
    std::string key = std::to_string(snap.version) + "?";
    for (const auto& [k, v] : req.params) {
      key += url_encode(k) + "=" + url_encode(v) + "&";
    }
    {
      const std::lock_guard lock(map_mutex);
      if (const auto it = map_cache.find(key); it != map_cache.end()) {
        res.set_content(it->second, kJson);
        return;
      }
    }

    const auto& engine = *snap.engine;
    const auto* store = engine.store(ns);
    if (store == nullptr) {
      throw QueryError("archive has no " + std::string(to_string(ns)) + " vectors");
    }
    std::vector<std::size_t> rows;
    if (scope == "all") {
      rows.resize(store->count());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        rows[r] = r;
      }
    } else if (!tokenize_path(*q.text).tokens.empty()) {
      q.k = std::max<std::size_t>(engine.statues().size(), 1);
      for (const auto& r : engine.hybrid_search(q).results) {
        const auto mine = engine.rows_of_statue(ns, r.id);
        rows.insert(rows.end(), mine.begin(), mine.end());
      }
      std::sort(rows.begin(), rows.end());
    }

    Json points = Json::array();
    MapLayout layout{{}, {}, params, "pca"};
    if (!rows.empty()) {
      layout = build_map(store->select(rows), params);
    }
    for (std::size_t i = 0; i < layout.ids.size(); ++i) {
      const auto* owner = engine.statue_of_row(ns, rows[i]);
      points.push_back({{"id", layout.ids[i]},
                        {"x", layout.coords[i][0]},
                        {"y", layout.coords[i][1]},
                        {"statue_id", owner != nullptr ? Json(owner->id) : Json(nullptr)}});
    }
    const Json out = {{"version", snap.version},
                      {"scope", scope},
                      {"namespace", to_string(ns)},
                      {"init", layout.init},
                      {"params",
                       {{"k_neighbors", params.k_neighbors},
                        {"epochs", params.epochs},
                        {"negative_samples", params.negative_samples},
                        {"learning_rate", params.learning_rate},
                        {"seed", params.seed}}},
                      {"points", std::move(points)}};
    auto text = out.dump(-1, ' ', false, Json::error_handler_t::replace);
    {
      const std::lock_guard lock(map_mutex);
      map_cache[key] = text;
    }
    res.set_content(std::move(text), kJson);
  }

  void image_neighbors(const httplib::Request& req, httplib::Response& res) const {
    for (const auto& [key, value] : req.params) {
      if (key != "k") {
        throw ParameterError("unknown query parameter '" + key + "'");
      }
    }
    const std::string id = req.matches[1].str();
    const auto k = k_param(req);
    const auto snap = snapshot();
    const auto& engine = *snap.engine;
    if (engine.image(id) == nullptr) {
      throw HttpError(404, "not_found", "unknown image '" + id + "'");
    }
    Json results = Json::array();
    for (const auto& r : engine.image_neighbors(id, k)) {
      const auto* image = engine.image(r.id);
      results.push_back({{"id", r.id},
                         {"score", r.score},
                         {"rank", r.rank},
                         {"statue_id", image != nullptr && image->statue_id ? Json(*image->statue_id) : Json(nullptr)}});
    }
    reply(res, {{"image_id", id}, {"k", k}, {"results", std::move(results)}});
  }

  void health(httplib::Response& res) const {
    const auto snap = snapshot();
    const auto& engine = *snap.engine;
    const auto* g = engine.store(Namespace::global);
    const auto* f = engine.store(Namespace::face);
    reply(res, {{"status", "ok"},
                {"version", snap.version},
                {"counts",
                 {{"images", engine.images().size()},
                  {"statues", engine.statues().size()},
                  {"global_vectors", g != nullptr ? g->count() : 0},
                  {"face_vectors", f != nullptr ? f->count() : 0}}},
                {"extractor", config.extractor_url.has_value()}});
  }

  static auto parse_body(const httplib::Request& req) -> Json {
    Json body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      throw ParameterError("request body must be a JSON object");
    }
    return body;
  }

  static auto json_size(const Json& body, const char* key, std::size_t fallback) -> std::size_t {
    if (!body.contains(key)) {
      return fallback;
    }
    const auto& v = body.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ParameterError(std::string("'") + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  static void reply(httplib::Response& res, const Json& j) {
    res.set_content(j.dump(-1, ' ', false, Json::error_handler_t::replace), kJson);
  }

  static void fail(httplib::Response& res, int status, const std::string& code, const std::string& message,
                   const Json& detail = nullptr) {
    res.status = status;
    reply(res, {{"code", code}, {"message", message}, {"detail", detail}});
  }

  template <typename F>
  auto guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        fail(res, e.status(), e.code(), e.what(), e.detail());
      } catch (const FieldError& e) {
        fail(res, 400, "field_error", e.what());
      } catch (const DimensionError& e) {
        fail(res, 400, "dimension_error", e.what());
      } catch (const NormalizationError& e) {
        fail(res, 400, "normalization_error", e.what());
      } catch (const ParameterError& e) {
        fail(res, 400, "parameter_error", e.what());
      } catch (const QueryError& e) {
        fail(res, 400, "query_error", e.what());
      } catch (const Json::exception& e) {
        fail(res, 400, "parameter_error", e.what());
      } catch (const std::exception& e) {
        fail(res, 500, "internal_error", e.what());
      }
    };
  }

  void routes() {
    server.Get("/api/health", guarded([this](const auto&, auto& res) { health(res); }));
    server.Get("/api/search", guarded([this](const auto& req, auto& res) { search(req, res); }));
    server.Post("/api/search/vector", guarded([this](const auto& req, auto& res) { search_vector(req, res); }));
    server.Post("/api/search/image", guarded([this](const auto& req, auto& res) { search_image(req, res); }));
    server.Get(R"(/api/statues/([^/]+))", guarded([this](const auto& req, auto& res) { get_statue(req, res); }));
    server.Patch(R"(/api/statues/([^/]+))",
                 guarded([this](const auto& req, auto& res) { patch_statue(req, res); }));
    server.Get("/api/map", guarded([this](const auto& req, auto& res) { get_map(req, res); }));
    server.Get(R"(/api/images/([^/]+)/neighbors)",
               guarded([this](const auto& req, auto& res) { image_neighbors(req, res); }));
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.body.empty()) {
        fail(res, res.status, res.status == 404 ? "not_found" : "http_error",
             "no route for " + req.method + " " + req.path);
      }
    });
    server.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      const auto origin = req.get_header_value("Origin");
      if (!origin.empty() && cors_allows(config.cors_allow, origin)) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
      }
    });
  }
};

ArchiveService::ArchiveService(ApiConfig config)
    : ArchiveService(config, load_archive(config.archive_root)) {}

ArchiveService::ArchiveService(ApiConfig config, LoadedArchive archive)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(archive))) {}

ArchiveService::~ArchiveService() { stop(); }

auto ArchiveService::bind() -> int {
  auto& server = impl_->server;
  const auto& cfg = impl_->config;
  if (cfg.port == 0) {
    const int port = server.bind_to_any_port(cfg.host);
    if (port < 0) {
      throw Error("cannot bind " + cfg.host);
    }
    return port;
  }
  if (!server.bind_to_port(cfg.host, cfg.port)) {
    throw Error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  }
  return cfg.port;
}

void ArchiveService::run() { impl_->server.listen_after_bind(); }

void ArchiveService::stop() {
  if (impl_) {
    impl_->server.stop();
  }
}

auto ArchiveService::version() const -> std::uint64_t { return impl_->snapshot().version; }

auto ArchiveService::engine() const -> std::shared_ptr<const SearchEngine> { return impl_->snapshot().engine; }

}  // namespace statuary
