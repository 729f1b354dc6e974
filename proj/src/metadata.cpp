#include "statuary/metadata.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include "statuary/errors.hpp"
#include "statuary/utf8.hpp"

namespace statuary {

namespace {

enum class CharClass { separator, word, cjk };

auto classify(char32_t cp) -> CharClass {
  if (cp < 0x80) {
    const bool alnum = (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    return alnum ? CharClass::word : CharClass::separator;
  }
  if (is_cjk(cp) && cp != 0x30FB) {  // katakana middle dot separates
    return CharClass::cjk;
  }
  // Latin-1 supplement and extended letters, Greek, Cyrillic.
  if ((cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7) || (cp >= 0x370 && cp <= 0x4FF)) {
    return CharClass::word;
  }
  return CharClass::separator;
}

auto ascii_lower(std::string_view s) -> std::string {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') {
      c = static_cast<char>(c - 'A' + 'a');
    }
  }
  return out;
}

auto trim(std::string_view s) -> std::string_view {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

auto PathTokenization::texts() const -> std::vector<std::string> {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    out.push_back(t.text);
  }
  return out;
}

auto tokenize_path(std::string_view path) -> PathTokenization {
  PathTokenization result;
  std::size_t depth = 0;
  std::size_t run_begin = 0;
  CharClass run_class = CharClass::separator;

  auto close_run = [&](std::size_t end) {
    if (run_class != CharClass::separator && end > run_begin) {
      result.tokens.push_back(
          {ascii_lower(path.substr(run_begin, end - run_begin)), depth, run_begin, end});
    }
    run_class = CharClass::separator;
  };

  for (std::size_t pos = 0; pos < path.size();) {
    const auto step = utf8_step(path, pos);
    CharClass cls = CharClass::separator;
    if (step.cp) {
      cls = classify(*step.cp);
    } else {
      result.had_invalid_bytes = true;
    }
    if (cls != run_class) {
      close_run(pos);
      if (cls != CharClass::separator) {
        run_begin = pos;
        run_class = cls;
      }
    }
    if (step.cp && *step.cp == '/') {
      ++depth;
    }
    pos += step.length;
  }
  close_run(path.size());
  return result;
}

namespace {

auto normalize_term(std::string_view surface) -> std::string {
  const auto tokens = tokenize_path(surface).texts();
  if (tokens.empty() || tokens.size() > 2) {
    throw ParameterError("gazetteer term '" + std::string(surface) +
                         "' must contain one or two tokens");
  }
  return tokens.size() == 1 ? tokens[0] : tokens[0] + " " + tokens[1];
}

}  // namespace

void Gazetteer::add(std::string_view surface, MetadataField field, std::string canonical) {
  if (trim(canonical).empty()) {
    throw ParameterError("empty canonical value for '" + std::string(surface) + "'");
  }
  auto term = normalize_term(surface);
  const auto it = entries_.find(term);
  if (it != entries_.end()) {
    if (it->second.field != field) {
      throw ParameterError("term '" + term + "' already maps to field " +
                           std::string(to_string(it->second.field)));
    }
    if (it->second.canonical != canonical) {
      throw ParameterError("term '" + term + "' already maps to '" + it->second.canonical + "'");
    }
    return;
  }
  canonical_[static_cast<std::size_t>(field)].insert(canonical);
  entries_.emplace(std::move(term), Entry{field, std::move(canonical)});
}

auto Gazetteer::parse(std::istream& in, const std::string& source) -> Gazetteer {
  Gazetteer gazetteer;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (trim(line).empty() || trim(line).front() == '#') {
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) {
      cols.emplace_back(trim(col));
    }
    if (cols.size() != 3) {
      throw ParseError(source, line_no, "expected 3 tab-separated columns, got " +
                                            std::to_string(cols.size()));
    }
    const auto field = parse_metadata_field(cols[1]);
    if (!field) {
      throw ParseError(source, line_no, "unknown field '" + cols[1] + "'");
    }
    if (!is_valid_utf8(cols[0]) || !is_valid_utf8(cols[2])) {
      throw ParseError(source, line_no, "line is not valid UTF-8");
    }
    try {
      gazetteer.add(cols[0], *field, cols[2]);
    } catch (const ParameterError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return gazetteer;
}

auto Gazetteer::load(const std::filesystem::path& file) -> Gazetteer {
  std::ifstream in(file);
  if (!in) {
    throw Error("cannot open gazetteer '" + file.string() + "'");
  }
  return parse(in, file.string());
}

auto Gazetteer::lookup(std::string_view term) const -> const Entry* {
  const auto it = entries_.find(std::string(term));
  return it == entries_.end() ? nullptr : &it->second;
}

auto Gazetteer::canonical_values(MetadataField field) const -> const std::set<std::string>& {
  return canonical_[static_cast<std::size_t>(field)];
}

auto Gazetteer::is_canonical(MetadataField field, std::string_view value) const -> bool {
  return canonical_values(field).contains(std::string(value));
}

auto Gazetteer::canonicalize(MetadataField field, std::string_view value) const
    -> std::optional<std::string> {
  if (is_canonical(field, value)) {
    return std::string(value);
  }
  const auto folded = ascii_lower(value);
  for (const auto& canonical : canonical_values(field)) {
    if (ascii_lower(canonical) == folded) {
      return canonical;
    }
  }
  return std::nullopt;
}

auto Gazetteer::suggest(MetadataField field, std::string_view value, std::size_t limit) const
    -> std::vector<std::string> {
  const auto folded = ascii_lower(value);
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& canonical : canonical_values(field)) {
    const auto lower = ascii_lower(canonical);
    std::size_t common = 0;
    while (common < lower.size() && common < folded.size() && lower[common] == folded[common]) {
      ++common;
    }
    if (common > 0) {
      scored.emplace_back(common, canonical);
    }
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < limit; ++i) {
    out.push_back(scored[i].second);
  }
  return out;
}

auto extract_metadata(std::string_view path, const Gazetteer& gazetteer) -> MetadataRecord {
  MetadataRecord record;
  const auto tokens = tokenize_path(path).tokens;
  for (std::size_t i = 0; i < tokens.size();) {
    if (i + 1 < tokens.size()) {
      if (const auto* entry = gazetteer.lookup(tokens[i].text + " " + tokens[i + 1].text)) {
        record.set(entry->field, entry->canonical);
        i += 2;
        continue;
      }
    }
    if (const auto* entry = gazetteer.lookup(tokens[i].text)) {
      record.set(entry->field, entry->canonical);
    }
    ++i;
  }
  return record;
}

auto aggregate_statue_metadata(std::span<const MetadataRecord> records) -> AggregatedMetadata {
  AggregatedMetadata out;
  for (const auto field : kAllMetadataFields) {
    std::map<std::string, std::size_t> counts;
    std::size_t populated = 0;
    for (const auto& record : records) {
      if (const auto& value = record.get(field)) {
        ++counts[*value];
        ++populated;
      }
    }
    if (populated == 0) {
      continue;
    }
    const auto best = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
      return a.second < b.second;
    });
    if (2 * best->second > populated) {
      out.record.set(field, best->first);
    } else {
      out.conflicts.push_back({field, std::move(counts)});
    }
  }
  return out;
}

auto coverage_report(std::span<const MetadataRecord> records) -> CoverageReport {
  CoverageReport report{};
  for (const auto& record : records) {
    for (const auto field : kAllMetadataFields) {
      if (record.has(field)) {
        ++report[static_cast<std::size_t>(field)];
      }
    }
  }
  return report;
}

auto coverage_report(std::span<const StatueRecord> statues) -> CoverageReport {
  std::vector<MetadataRecord> records;
  records.reserve(statues.size());
  for (const auto& statue : statues) {
    records.push_back(statue.metadata);
  }
  return coverage_report(records);
}

}  // namespace statuary
