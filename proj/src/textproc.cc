#include "tabsearch/textproc.h"

#include <algorithm>
#include <fstream>
#include <utility>

#include "tabsearch/error.h"

namespace tabsearch {
namespace {

struct CodePoint {
  char32_t value;
  std::size_t offset;
  std::size_t length;
};

// Decodes UTF-8; an invalid byte is returned as a one-byte code point.
std::vector<CodePoint> DecodeUtf8(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    char32_t cp = lead;
    if (lead >= 0xF0 && lead <= 0xF7) {
      len = 4;
      cp = lead & 0x07;
    } else if (lead >= 0xE0) {
      len = 3;
      cp = lead & 0x0F;
    } else if (lead >= 0xC0) {
      len = 2;
      cp = lead & 0x1F;
    }
    bool valid = len == 1 || i + len <= text.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      const auto c = static_cast<unsigned char>(text[i + k]);
      if ((c & 0xC0) != 0x80) {
        valid = false;
      } else {
        cp = (cp << 6) | (c & 0x3F);
      }
    }
    if (!valid) {
      len = 1;
      cp = lead;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

bool IsWhitespace(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' ||
         c == 0x00A0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200A) ||
         c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
         c == 0x3000;
}

bool IsControl(char32_t c) {
  return (c < 0x20 && c != U'\t' && c != U'\n' && c != U'\r') ||
         (c >= 0x7F && c < 0xA0) || c == 0xFFFD || c == 0;
}

bool IsPunctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
      (c >= 123 && c <= 126)) {
    return true;
  }
  return c == 0x00A1 || c == 0x00A7 || c == 0x00AB || c == 0x00B6 ||
         c == 0x00B7 || c == 0x00BB || c == 0x00BF ||
         (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20);
}

bool IsCjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0x20000 && c <= 0x2A6DF) || (c >= 0xF900 && c <= 0xFAFF) ||
         (c >= 0x2F800 && c <= 0x2FA1F);
}

// Whitespace/punctuation split; each word is a run of code points.
std::vector<std::vector<CodePoint>> BasicSplit(std::string_view text) {
  std::vector<std::vector<CodePoint>> words;
  std::vector<CodePoint> current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  };
  for (const CodePoint& cp : DecodeUtf8(text)) {
    if (IsWhitespace(cp.value) || IsControl(cp.value)) {
      flush();
    } else if (IsPunctuation(cp.value) || IsCjk(cp.value)) {
      flush();
      words.push_back({cp});
    } else {
      current.push_back(cp);
    }
  }
  flush();
  return words;
}

void AppendWordPieces(std::string_view text,
                      const std::vector<CodePoint>& word,
                      const WordPieceVocab& vocab, TokenSeq& out) {
  if (word.size() > kMaxWordPieceChars) {
    out.PushBack(std::string(kUnkToken), vocab.unk_id());
    return;
  }
  TokenSeq pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < word.size()) {
    std::size_t end = word.size();
    int found = -1;
    while (start < end) {
      const std::size_t from = word[start].offset;
      const std::size_t to = word[end - 1].offset + word[end - 1].length;
      candidate.assign(start > 0 ? "##" : "");
      candidate.append(text.substr(from, to - from));
      found = vocab.Id(candidate);
      if (found >= 0) break;
      --end;
    }
    if (found < 0) {
      out.PushBack(std::string(kUnkToken), vocab.unk_id());
      return;
    }
    pieces.PushBack(candidate, found);
    start = end;
  }
  out.Append(pieces);
}

}  // namespace

WordPieceVocab::WordPieceVocab(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ValidationError("vocab: duplicate token '" + tokens_[i] +
                            "' at line " + std::to_string(i + 1));
    }
  }
  auto special = [this](std::string_view name) {
    const int id = Id(name);
    if (id < 0) {
      throw ValidationError("vocab: missing special token " +
                            std::string(name));
    }
    return id;
  };
  cls_id_ = special(kClsToken);
  sep_id_ = special(kSepToken);
  unk_id_ = special(kUnkToken);
  pad_id_ = special(kPadToken);
}

bool WordPieceVocab::Contains(std::string_view token) const {
  return Id(token) >= 0;
}

int WordPieceVocab::Id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? -1 : it->second;
}

WordPieceVocab LoadVocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(std::move(line));
  }
  // A trailing empty line is a file terminator, not a token.
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return WordPieceVocab(std::move(tokens));
}

void TokenSeq::Append(const TokenSeq& other, std::size_t count) {
  count = std::min(count, other.size());
  tokens.insert(tokens.end(), other.tokens.begin(),
                other.tokens.begin() + static_cast<std::ptrdiff_t>(count));
  ids.insert(ids.end(), other.ids.begin(),
             other.ids.begin() + static_cast<std::ptrdiff_t>(count));
}

TokenSeq WordPieceTokenize(std::string_view text, const WordPieceVocab& vocab) {
  TokenSeq out;
  for (const auto& word : BasicSplit(text)) {
    AppendWordPieces(text, word, vocab, out);
  }
  return out;
}

std::size_t WordPieceLength(std::string_view text,
                            const WordPieceVocab& vocab) {
  return WordPieceTokenize(text, vocab).size();
}

std::vector<std::string> SimpleTokenize(std::string_view text,
                                        bool lowercase) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool ascii_alnum = (c >= '0' && c <= '9') ||
                             (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (ascii_alnum || c >= 0x80) {
      current.push_back(lowercase && c >= 'A' && c <= 'Z'
                            ? static_cast<char>(c - 'A' + 'a')
                            : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string JoinWordPieces(const std::vector<std::string>& pieces) {
  std::string out;
  for (const auto& piece : pieces) {
    if (piece.rfind("##", 0) == 0 && piece.size() > 2) {
      out.append(piece, 2);
    } else {
      if (!out.empty()) out.push_back(' ');
      out.append(piece);
    }
  }
  return out;
}

}  // namespace tabsearch
