#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tabsearch/corpus.h"
#include "tabsearch/embed.h"
#include "tabsearch/random.h"
#include "tabsearch/textproc.h"

namespace tabsearch::testing {

// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("tabsearch-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path WriteFile(const std::filesystem::path& path,
                                       const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
  return path;
}

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Words used by the toy corpora. Every word is also a single WordPiece token
// in ToyVocab, and has a vector in ToyStore (except "zzz", which is OOV).
inline const std::vector<std::string>& ToyWords() {
  static const std::vector<std::string> kWords = {
      "dog", "cat", "fish", "bird", "car", "bus", "train", "plane",
      "red", "blue", "green", "city", "world", "rate", "year", "zzz"};
  return kWords;
}

// Specials, whole words, single letters/digits with "##" continuations and
// ASCII punctuation, so any ASCII text segments without [UNK].
inline WordPieceVocab ToyVocab() {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (const auto& w : ToyWords()) tokens.push_back(w);
  for (char c = 'a'; c <= 'z'; ++c) {
    tokens.emplace_back(1, c);
    tokens.push_back(std::string("##") + c);
  }
  for (char c = 'A'; c <= 'Z'; ++c) {
    tokens.emplace_back(1, c);
    tokens.push_back(std::string("##") + c);
  }
  for (char c = '0'; c <= '9'; ++c) {
    tokens.emplace_back(1, c);
    tokens.push_back(std::string("##") + c);
  }
  for (char c : std::string("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")) {
    tokens.emplace_back(1, c);
  }
  // Whole words may collide with single letters only if one letter long.
  std::vector<std::string> unique;
  std::unordered_map<std::string, int> seen;
  for (auto& t : tokens) {
    if (seen.emplace(t, 0).second) unique.push_back(t);
  }
  return WordPieceVocab(std::move(unique));
}

// Deterministic 3-dimensional vectors for every toy word except "zzz".
inline VectorStore ToyStore(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> words;
  for (const auto& w : ToyWords()) {
    if (w != "zzz") words.push_back(w);
  }
  VectorStore::RowMatrix m(static_cast<Eigen::Index>(words.size()), 3);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < 3; ++c) m(r, c) = 2.0 * UniformUnit(rng) - 1.0;
  }
  return VectorStore(std::move(words), std::move(m));
}

inline std::string RandomPhrase(std::mt19937_64& rng, int max_words,
                                int min_words = 0) {
  const auto& words = ToyWords();
  const int n = min_words + static_cast<int>(UniformBelow(
                                rng, static_cast<std::uint64_t>(max_words - min_words + 1)));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += words[UniformBelow(rng, words.size())];
  }
  return out;
}

// Random table of at most max_rows x max_cols with toy-word cells (some
// empty).
inline Table RandomTable(std::mt19937_64& rng, const std::string& id,
                         int max_rows = 6, int max_cols = 6,
                         int max_cell_words = 2) {
  Table t;
  t.id = id;
  t.caption = RandomPhrase(rng, 4);
  t.page_title = RandomPhrase(rng, 3);
  t.section_title = RandomPhrase(rng, 3);
  const int rows = static_cast<int>(UniformBelow(rng, max_rows + 1));
  const int cols = 1 + static_cast<int>(UniformBelow(rng, max_cols));
  for (int c = 0; c < cols; ++c) t.headers.push_back(RandomPhrase(rng, 2, 1));
  for (int r = 0; r < rows; ++r) {
    std::vector<std::string> row;
    for (int c = 0; c < cols; ++c) row.push_back(RandomPhrase(rng, max_cell_words));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace tabsearch::testing
