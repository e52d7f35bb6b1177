#include "tabsearch/encoder.h"

#include <sstream>

#include "tabsearch/error.h"

namespace tabsearch {
namespace {

std::string JoinNonEmpty(const std::vector<std::string>& cells) {
  std::string out;
  for (const auto& c : cells) {
    if (c.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += c;
  }
  return out;
}

}  // namespace

void Budgets::Validate() const {
  if (caption == 0 || section_title == 0 || page_title == 0 || headers == 0) {
    throw ValidationError("field budgets must be positive");
  }
  if (max_len < kMinimalFrame) {
    throw ValidationError("max_len " + std::to_string(max_len) +
                          " is below the minimal frame of " +
                          std::to_string(kMinimalFrame) + " tokens");
  }
}

Budgets ParseBudgets(const std::string& text, std::size_t max_len) {
  std::vector<std::size_t> values;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(part, &pos);
      if (pos != part.size() || v <= 0) throw std::invalid_argument(part);
      values.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ValidationError("bad budget '" + part + "' in '" + text + "'");
    }
  }
  if (values.size() != 4) {
    throw ValidationError(
        "budgets must be 'caption,section_title,page_title,headers'");
  }
  Budgets b{values[0], values[1], values[2], values[3], max_len};
  b.Validate();
  return b;
}

PackedInput Pack(const Query& query, const Table& table,
                 const std::vector<TableItem>& items,
                 const WordPieceVocab& vocab, const PackOptions& options) {
  const Budgets& budgets = options.budgets;
  budgets.Validate();
  const std::size_t max_len = budgets.max_len;

  PackedInput packed;
  auto push = [&packed](const TokenSeq& seq, std::size_t count, Segment seg) {
    packed.tokens.Append(seq, count);
    packed.segments.insert(packed.segments.end(), std::min(count, seq.size()),
                           seg);
  };
  auto sep = [&packed, &vocab](Segment seg) {
    packed.tokens.PushBack(std::string(kSepToken), vocab.sep_id());
    packed.segments.push_back(seg);
  };

  const TokenSeq query_tokens = WordPieceTokenize(query.text, vocab);
  if (query_tokens.size() + kMinimalFrame - 1 > max_len) {
    throw ValidationError("query '" + query.id + "' has " +
                          std::to_string(query_tokens.size()) +
                          " tokens and does not fit in max_len " +
                          std::to_string(max_len));
  }
  packed.tokens.PushBack(std::string(kClsToken), vocab.cls_id());
  packed.segments.push_back(options.frame_segment);
  push(query_tokens, query_tokens.size(), Segment::kA);
  sep(options.frame_segment);

  const std::pair<const std::string*, std::size_t> fields[kNumContextFields] = {
      {&table.caption, budgets.caption},
      {&table.section_title, budgets.section_title},
      {&table.page_title, budgets.page_title},
      {nullptr, budgets.headers},
  };
  const std::string headers = JoinNonEmpty(table.headers);
  for (std::size_t f = 0; f < kNumContextFields; ++f) {
    const std::string& text = fields[f].first ? *fields[f].first : headers;
    const TokenSeq tokens = WordPieceTokenize(text, vocab);
    // Own [SEP] plus one for every later field.
    const std::size_t reserved = kNumContextFields - f;
    const std::size_t room = max_len - packed.size() - reserved;
    push(tokens, std::min({fields[f].second, tokens.size(), room}),
         Segment::kB);
    sep(Segment::kB);
  }

  for (const auto& item : items) {
    const std::size_t remaining = max_len - packed.size();
    if (remaining < 2) break;
    const TokenSeq tokens = WordPieceTokenize(item.raw_text, vocab);
    if (tokens.empty()) continue;
    const std::size_t take = std::min(tokens.size(), remaining - 1);
    push(tokens, take, Segment::kB);
    sep(Segment::kB);
    if (take < tokens.size()) break;
  }
  packed.attention_length = packed.size();
  return packed;
}

nlohmann::json Render(const PackedInput& packed) {
  nlohmann::json segments = nlohmann::json::array();
  for (Segment s : packed.segments) segments.push_back(static_cast<int>(s));
  return {{"tokens", packed.tokens.tokens},
          {"ids", packed.tokens.ids},
          {"segments", std::move(segments)}};
}

PackedInput ParsePacked(const nlohmann::json& record) {
  PackedInput packed;
  try {
    packed.tokens.tokens = record.at("tokens").get<std::vector<std::string>>();
    packed.tokens.ids = record.at("ids").get<std::vector<int>>();
    for (int s : record.at("segments").get<std::vector<int>>()) {
      if (s != 0 && s != 1) throw ParseError("segment id must be 0 or 1");
      packed.segments.push_back(static_cast<Segment>(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("packed record: ") + e.what());
  }
  if (packed.tokens.tokens.size() != packed.tokens.ids.size() ||
      packed.tokens.tokens.size() != packed.segments.size()) {
    throw ParseError("packed record: tokens, ids and segments differ in length");
  }
  packed.attention_length = packed.tokens.size();
  return packed;
}

}  // namespace tabsearch
