#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "tabsearch/scorer.h"

namespace tabsearch {
namespace {

constexpr char kMagic[4] = {'T', 'S', 'F', 'B'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "feature cache I/O assumes a little-endian host");

template <typename T>
void PutRaw(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

void PutString(std::string& out, const std::string& s) {
  PutRaw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string GetString() {
    const auto n = Get<std::uint32_t>();
    Need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void Need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ParseError("feature cache truncated");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t Crc32(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size())));
}

}  // namespace

void FeatureCache::Insert(const PairKey& key, Eigen::VectorXd f_bert) {
  if (f_bert.size() != hidden_size_) {
    throw DimensionError("cached f_bert width " +
                         std::to_string(f_bert.size()) + " != " +
                         std::to_string(hidden_size_));
  }
  vectors_[key] = std::move(f_bert);
}

const Eigen::VectorXd* FeatureCache::Find(const PairKey& key) const {
  const auto it = vectors_.find(key);
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<PairKey> FeatureCache::Missing(
    const std::vector<PairKey>& wanted) const {
  std::vector<PairKey> missing;
  for (const auto& key : wanted) {
    if (!vectors_.count(key)) missing.push_back(key);
  }
  return missing;
}

void FeatureCache::Save(const std::filesystem::path& path) const {
  std::string out(kMagic, sizeof(kMagic));
  PutRaw<std::uint32_t>(out, kVersion);
  PutRaw<std::uint32_t>(out, static_cast<std::uint32_t>(hidden_size_));
  PutRaw<std::uint64_t>(out, vectors_.size());
  for (const auto& [key, vec] : vectors_) {
    PutString(out, key.query_id);
    PutString(out, key.table_id);
    for (Eigen::Index i = 0; i < vec.size(); ++i) PutRaw<double>(out, vec[i]);
  }
  PutRaw<std::uint32_t>(out, Crc32(out));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write feature cache " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("short write to " + path.string());
}

FeatureCache FeatureCache::Load(const std::filesystem::path& path,
                                int expected_hidden_size) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open feature cache " + path.string());
  std::ostringstream buffer;
  buffer << file.rdbuf();
  const std::string data = buffer.str();

  if (data.size() < sizeof(kMagic) + 20 ||
      std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(path.string() + " is not a feature cache");
  }
  const std::string_view body(data.data(), data.size() - 4);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, data.data() + body.size(), 4);
  if (Crc32(body) != stored_crc) {
    throw ParseError(path.string() + ": checksum mismatch (corrupt cache)");
  }

  Reader reader(body.substr(sizeof(kMagic)));
  if (reader.Get<std::uint32_t>() != kVersion) {
    throw ParseError(path.string() + ": unsupported cache version");
  }
  const int hidden = static_cast<int>(reader.Get<std::uint32_t>());
  if (expected_hidden_size > 0 && hidden != expected_hidden_size) {
    throw DimensionError(path.string() + ": cache hidden size " +
                         std::to_string(hidden) + " != expected " +
                         std::to_string(expected_hidden_size));
  }
  const auto count = reader.Get<std::uint64_t>();
  FeatureCache cache(hidden);
  for (std::uint64_t n = 0; n < count; ++n) {
    PairKey key;
    key.query_id = reader.GetString();
    key.table_id = reader.GetString();
    Eigen::VectorXd vec(hidden);
    for (int i = 0; i < hidden; ++i) vec[i] = reader.Get<double>();
    cache.Insert(key, std::move(vec));
  }
  if (reader.remaining() != 0) {
    throw ParseError(path.string() + ": trailing bytes in feature cache");
  }
  return cache;
}

}  // namespace tabsearch
