#include "tabsearch/scorer.h"

#include "tabsearch/textproc.h"

namespace tabsearch {

double ScoreNative(const PackedInput& packed, const Query& query,
                   const VectorStore& store) {
  std::vector<std::string> pieces;
  pieces.reserve(packed.size());
  for (const auto& token : packed.tokens.tokens) {
    if (token == kClsToken || token == kSepToken || token == kUnkToken ||
        token == kPadToken) {
      continue;
    }
    pieces.push_back(token);
  }
  const auto words = SimpleTokenize(JoinWordPieces(pieces));
  return Cosine(MeanVector(words, store),
                MeanVector(SimpleTokenize(query.text), store));
}

}  // namespace tabsearch
