#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tabsearch {

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kPadToken = "[PAD]";

class WordPieceVocab {
 public:
  WordPieceVocab() = default;

  // Ids are positions in `tokens`. Throws ValidationError on duplicates or
  // when a special token is missing.
  explicit WordPieceVocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool Contains(std::string_view token) const;
  // -1 when absent.
  int Id(std::string_view token) const;
  const std::string& Token(int id) const { return tokens_.at(id); }

  int cls_id() const { return cls_id_; }
  int sep_id() const { return sep_id_; }
  int unk_id() const { return unk_id_; }
  int pad_id() const { return pad_id_; }

  bool IsSpecial(int id) const {
    return id == cls_id_ || id == sep_id_ || id == unk_id_ || id == pad_id_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int cls_id_ = -1;
  int sep_id_ = -1;
  int unk_id_ = -1;
  int pad_id_ = -1;
};

WordPieceVocab LoadVocab(const std::filesystem::path& path);

struct TokenSeq {
  std::vector<std::string> tokens;
  std::vector<int> ids;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  void Append(const TokenSeq& other, std::size_t count);
  void Append(const TokenSeq& other) { Append(other, other.size()); }
  void PushBack(std::string token, int id) {
    tokens.push_back(std::move(token));
    ids.push_back(id);
  }

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

// Words longer than this many code points map straight to [UNK].
inline constexpr std::size_t kMaxWordPieceChars = 100;

// Cased BERT-style tokenization: split on whitespace and punctuation, then
// greedy longest-match-first over the vocabulary with "##" continuations.
// A word without a complete segmentation becomes a single [UNK].
TokenSeq WordPieceTokenize(std::string_view text, const WordPieceVocab& vocab);

// Number of WordPiece tokens in `text`.
std::size_t WordPieceLength(std::string_view text, const WordPieceVocab& vocab);

// Tokenizer for the word-vector path: every character other than an ASCII
// letter or digit is a separator (bytes of multi-byte UTF-8 sequences are kept
// as letters), and ASCII letters are lowercased unless `lowercase` is false.
std::vector<std::string> SimpleTokenize(std::string_view text,
                                        bool lowercase = true);

// Joins WordPiece tokens back into space-separated words, gluing "##"
// continuations onto the preceding piece.
std::string JoinWordPieces(const std::vector<std::string>& pieces);

}  // namespace tabsearch
