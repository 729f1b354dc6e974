#include "statuary/manifest.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "statuary/errors.hpp"

namespace statuary {

auto metadata_to_json(const MetadataRecord& record) -> Json {
  Json j = Json::object();
  for (const auto field : kAllMetadataFields) {
    if (const auto& value = record.get(field)) {
      j[std::string(to_string(field))] = *value;
    }
  }
  return j;
}

auto metadata_from_json(const Json& j) -> MetadataRecord {
  MetadataRecord record;
  if (j.is_null()) {
    return record;
  }
  if (!j.is_object()) {
    throw FieldError("metadata must be an object");
  }
  for (const auto& [name, value] : j.items()) {
    const auto field = parse_metadata_field(name);
    if (!field) {
      throw FieldError("unknown metadata field '" + name + "'");
    }
    if (!value.is_null()) {
      record.set(*field, value.get<std::string>());
    }
  }
  return record;
}

auto face_to_json(const FaceRegion& face) -> Json {
  Json j = {{"kind", "face"},
            {"face_id", face.face_id},
            {"image_id", face.image_id},
            {"bbox", {face.bbox.x, face.bbox.y, face.bbox.w, face.bbox.h}}};
  if (face.face_row) {
    j["face_row"] = *face.face_row;
  }
  return j;
}

auto image_to_json(const ArchiveImage& image) -> Json {
  Json j = {{"kind", "image"},
            {"id", image.id},
            {"path", image.path},
            {"folder_id", image.folder_id}};
  if (image.timestamp) {
    j["timestamp"] = *image.timestamp;
  }
  if (image.global_row) {
    j["global_row"] = *image.global_row;
  }
  if (image.statue_id) {
    j["statue_id"] = *image.statue_id;
  }
  if (image.source_kind) {
    j["source_kind"] = to_string(*image.source_kind);
  }
  if (image.width) {
    j["width"] = *image.width;
  }
  if (image.height) {
    j["height"] = *image.height;
  }
  j["metadata"] = metadata_to_json(image.metadata);
  if (image.duplicate_of) {
    j["duplicate_of"] = *image.duplicate_of;
  }
  if (!image.flags.empty()) {
    j["flags"] = image.flags;
  }
  return j;
}

auto statue_to_json(const StatueRecord& statue) -> Json {
  Json j = {{"kind", "statue"},
            {"id", statue.id},
            {"image_ids", statue.image_ids},
            {"canonical_image", statue.canonical_image},
            {"metadata", metadata_to_json(statue.metadata)}};
  if (!statue.notes.empty()) {
    j["notes"] = statue.notes;
  }
  return j;
}

void JsonLinesWriter::write(const Json& record) {
  out_ << record.dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
}

void write_manifest(const Manifest& manifest, std::ostream& out) {
  JsonLinesWriter writer(out);
  for (const auto& image : manifest.images) {
    writer.write(image_to_json(image));
    for (const auto& face : image.face_regions) {
      writer.write(face_to_json(face));
    }
  }
  for (const auto& statue : manifest.statues) {
    writer.write(statue_to_json(statue));
  }
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) {
    throw Error("cannot open '" + file.string() + "' for writing");
  }
  write_manifest(manifest, out);
}

namespace {

template <typename T>
auto optional_field(const Json& j, const char* key) -> std::optional<T> {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    return std::nullopt;
  }
  return it->get<T>();
}

auto parse_image(const Json& j) -> ArchiveImage {
  ArchiveImage image;
  image.id = j.at("id").get<std::string>();
  image.path = j.value("path", "");
  image.folder_id = j.value("folder_id", "");
  image.timestamp = optional_field<std::int64_t>(j, "timestamp");
  image.global_row = optional_field<std::size_t>(j, "global_row");
  image.statue_id = optional_field<std::string>(j, "statue_id");
  if (const auto kind = optional_field<std::string>(j, "source_kind")) {
    image.source_kind = parse_source_kind(*kind);
    if (!image.source_kind) {
      throw Error("unknown source_kind '" + *kind + "'");
    }
  }
  image.width = optional_field<std::uint32_t>(j, "width");
  image.height = optional_field<std::uint32_t>(j, "height");
  if (j.contains("metadata")) {
    image.metadata = metadata_from_json(j.at("metadata"));
  }
  image.duplicate_of = optional_field<std::string>(j, "duplicate_of");
  if (j.contains("flags")) {
    image.flags = j.at("flags").get<std::vector<std::string>>();
  }
  return image;
}

auto parse_face(const Json& j) -> FaceRegion {
  FaceRegion face;
  face.face_id = j.at("face_id").get<std::string>();
  face.image_id = j.at("image_id").get<std::string>();
  const auto& box = j.at("bbox");
  if (!box.is_array() || box.size() != 4) {
    throw Error("bbox must be [x, y, w, h]");
  }
  face.bbox = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
               box[3].get<double>()};
  face.face_row = optional_field<std::size_t>(j, "face_row");
  return face;
}

auto parse_statue(const Json& j) -> StatueRecord {
  StatueRecord statue;
  statue.id = j.at("id").get<std::string>();
  statue.image_ids = j.at("image_ids").get<std::vector<std::string>>();
  statue.canonical_image = j.value("canonical_image", "");
  if (j.contains("metadata")) {
    statue.metadata = metadata_from_json(j.at("metadata"));
  }
  statue.notes = j.value("notes", "");
  return statue;
}

}  // namespace

auto read_manifest(std::istream& in, const std::string& source) -> Manifest {
  Manifest manifest;
  std::unordered_map<std::string, std::size_t> image_pos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const Json j = Json::parse(line);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "image") {
        auto image = parse_image(j);
        image_pos[image.id] = manifest.images.size();
        manifest.images.push_back(std::move(image));
      } else if (kind == "face") {
        auto face = parse_face(j);
        const auto it = image_pos.find(face.image_id);
        if (it == image_pos.end()) {
          throw Error("face '" + face.face_id + "' refers to image '" + face.image_id +
                      "' not declared above it");
        }
        manifest.images[it->second].face_regions.push_back(std::move(face));
      } else if (kind == "statue") {
        manifest.statues.push_back(parse_statue(j));
      } else {
        throw Error("unknown record kind '" + kind + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return manifest;
}

auto read_manifest(const std::filesystem::path& file) -> Manifest {
  std::ifstream in(file);
  if (!in) {
    throw Error("cannot open '" + file.string() + "'");
  }
  return read_manifest(in, file.string());
}

}  // namespace statuary
