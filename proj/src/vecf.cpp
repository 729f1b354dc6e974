#include "statuary/vecf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "statuary/errors.hpp"
#include "statuary/utf8.hpp"

namespace statuary {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'V', 'E', 'C', 'F'};
constexpr std::size_t kHeaderSize = 4 + 4 + 1 + 4 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu));
  }
}

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  auto get(const char* what) -> T {
    require(sizeof(T), what);
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }

  auto take(std::size_t n, const char* what) -> std::span<const std::uint8_t> {
    require(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void require(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated file: expected ") + what, pos_);
    }
  }

  [[nodiscard]] auto pos() const -> std::size_t { return pos_; }
  [[nodiscard]] auto remaining() const -> std::size_t { return bytes_.size() - pos_; }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

auto encode_vector_store(const VectorStore& store) -> std::vector<std::uint8_t> {
  std::vector<std::uint8_t> out;
  const std::size_t floats = store.count() * store.dim();
  out.reserve(kHeaderSize + floats * 4 + store.count() * 16);
  for (const auto byte : kMagic) {
    out.push_back(byte);
  }
  put_le<std::uint32_t>(out, kVecfVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(store.ns()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(store.count()));
  const float* data = store.matrix().data();
  for (std::size_t i = 0; i < floats; ++i) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(data[i]));
  }
  for (const auto& id : store.ids()) {
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ParameterError("row id longer than 65535 bytes: '" + id.substr(0, 32) + "...'");
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
  }
  return out;
}

auto decode_vector_store(std::span<const std::uint8_t> bytes) -> VectorStore {
  Reader in(bytes);
  const auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw FormatError("bad magic, not a VECF file", 0);
  }
  const std::size_t version_at = in.pos();
  if (const auto version = in.get<std::uint32_t>("version"); version != kVecfVersion) {
    throw FormatError("unsupported VECF version " + std::to_string(version), version_at);
  }
  const std::size_t ns_at = in.pos();
  const auto tag = in.get<std::uint8_t>("namespace tag");
  if (tag > 1) {
    throw FormatError("unknown namespace tag " + std::to_string(tag), ns_at);
  }
  const std::size_t dim_at = in.pos();
  const auto dim = in.get<std::uint32_t>("dim");
  if (dim == 0) {
    throw FormatError("dimension must be positive", dim_at);
  }
  const std::size_t count_at = in.pos();
  const auto count = in.get<std::uint64_t>("count");
  // Each row needs its floats plus at least a 2-byte id length.
  const std::uint64_t row_bytes = static_cast<std::uint64_t>(dim) * 4 + 2;
  if (count > in.remaining() / row_bytes) {
    throw FormatError("count " + std::to_string(count) + " exceeds file size", count_at);
  }

  RowMatrix matrix(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  float* data = matrix.data();
  const auto raw = in.take(static_cast<std::size_t>(count) * dim * 4, "matrix");
  for (std::size_t i = 0; i < static_cast<std::size_t>(count) * dim; ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(raw[i * 4 + b]) << (8 * b);
    }
    data[i] = std::bit_cast<float>(bits);
  }

  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(count));
  std::unordered_map<std::string, std::size_t> seen;
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::size_t id_at = in.pos();
    const auto len = in.get<std::uint16_t>("id length");
    const auto id_bytes = in.take(len, "id bytes");
    std::string id(id_bytes.begin(), id_bytes.end());
    if (!is_valid_utf8(id)) {
      throw FormatError("row id is not valid UTF-8", id_at);
    }
    if (!seen.emplace(id, r).second) {
      throw FormatError("duplicate row id '" + id + "'", id_at);
    }
    ids.push_back(std::move(id));
  }
  if (in.remaining() != 0) {
    throw FormatError("trailing bytes after last id", in.pos());
  }
  return {static_cast<Namespace>(tag), std::move(matrix), std::move(ids)};
}

void write_vector_store(const VectorStore& store, const std::filesystem::path& file) {
  const auto bytes = encode_vector_store(store);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot open '" + file.string() + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error("failed writing '" + file.string() + "'");
  }
}

auto read_vector_store(const std::filesystem::path& file) -> VectorStore {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw Error("cannot open '" + file.string() + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_vector_store(bytes);
}

auto looks_like_vecf(const std::filesystem::path& file) -> bool {
  std::ifstream in(file, std::ios::binary);
  std::array<char, 4> head{};
  in.read(head.data(), 4);
  return in.gcount() == 4 && std::memcmp(head.data(), kMagic.data(), 4) == 0;
}

}  // namespace statuary
