#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabsearch/corpus.h"
#include "tabsearch/selector.h"
#include "tabsearch/textproc.h"

namespace tabsearch {

// Per-field WordPiece budgets. The query is never truncated.
struct Budgets {
  std::size_t caption = 20;
  std::size_t section_title = 10;
  std::size_t page_title = 10;
  std::size_t headers = 20;
  std::size_t max_len = 128;

  // Throws ValidationError when a budget is zero or max_len cannot hold the
  // minimal frame.
  void Validate() const;
};

// [CLS] + one query token + query [SEP] + one [SEP] per context field.
inline constexpr std::size_t kNumContextFields = 4;
inline constexpr std::size_t kMinimalFrame = 1 + 1 + 1 + kNumContextFields;

// Parses "caption,section,page,headers" (four positive integers).
Budgets ParseBudgets(const std::string& text, std::size_t max_len = 128);

enum class Segment : int { kA = 0, kB = 1 };

struct PackOptions {
  Budgets budgets;
  // Segment for [CLS] and the [SEP] closing the query.
  Segment frame_segment = Segment::kA;
};

struct PackedInput {
  TokenSeq tokens;
  std::vector<Segment> segments;
  std::size_t attention_length = 0;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const PackedInput&, const PackedInput&) = default;
};

// Builds
//   [CLS] query [SEP] caption [SEP] section [SEP] page [SEP] headers [SEP]
//   item_1 [SEP] ... item_m [SEP]
// keeping the front of each field up to its budget, items in the given
// order, and truncating the last item that partially fits. Throws
// ValidationError when the query alone does not fit in the frame.
PackedInput Pack(const Query& query, const Table& table,
                 const std::vector<TableItem>& items,
                 const WordPieceVocab& vocab, const PackOptions& options = {});

// Wire record {"tokens": [...], "ids": [...], "segments": [0|1, ...]}.
nlohmann::json Render(const PackedInput& packed);
PackedInput ParsePacked(const nlohmann::json& record);

}  // namespace tabsearch
