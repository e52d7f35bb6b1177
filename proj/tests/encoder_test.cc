#include <doctest.h>

#include <random>

#include "pack_reference.h"
#include "tabsearch/encoder.h"
#include "tabsearch/error.h"
#include "tabsearch/selector.h"
#include "test_support.h"

namespace tabsearch {
namespace {

std::string Words(const std::string& word, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out.push_back(' ');
    out += word;
  }
  return out;
}

TableItem RawItem(const std::string& text) {
  TableItem item;
  item.raw_text = text;
  item.tokens = SimpleTokenize(text);
  return item;
}

TEST_CASE("budgets") {
  CHECK_NOTHROW(Budgets{}.Validate());
  const auto b = ParseBudgets("5,4,3,2", 64);
  CHECK(b.caption == 5);
  CHECK(b.section_title == 4);
  CHECK(b.page_title == 3);
  CHECK(b.headers == 2);
  CHECK(b.max_len == 64);
  CHECK_THROWS_AS(ParseBudgets("5,4,3"), ValidationError);
  CHECK_THROWS_AS(ParseBudgets("5,0,3,2"), ValidationError);
  CHECK_THROWS_AS(ParseBudgets("5,x,3,2"), ValidationError);
  CHECK_THROWS_AS(ParseBudgets("1,1,1,1", kMinimalFrame - 1), ValidationError);
}

TEST_CASE("template with no items") {
  const auto vocab = testing::ToyVocab();
  Table t;
  t.caption = "red car";
  t.section_title = "city";
  t.page_title = "";
  t.headers = {"year", "", "rate"};
  const Query q{"q", "dog cat"};
  const auto packed = Pack(q, t, {}, vocab);
  const std::vector<std::string> expected = {
      "[CLS]", "dog", "cat", "[SEP]", "red", "car", "[SEP]", "city",
      "[SEP]", "[SEP]", "year", "rate", "[SEP]"};
  CHECK(packed.tokens.tokens == expected);
  CHECK(packed.size() < 128);
  // Segment A through the query's [SEP], B after.
  const std::vector<Segment> segs = {
      Segment::kA, Segment::kA, Segment::kA, Segment::kA, Segment::kB,
      Segment::kB, Segment::kB, Segment::kB, Segment::kB, Segment::kB,
      Segment::kB, Segment::kB, Segment::kB};
  CHECK(packed.segments == segs);
  const auto record = Render(packed);
  CHECK(record["segments"] ==
        nlohmann::json({0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1}));
}

TEST_CASE("five hundred item tokens fill exactly max_len") {
  const auto vocab = testing::ToyVocab();
  Table t;
  t.caption = "cat";
  t.headers = {"bird"};
  // Frame: [CLS] dog [SEP] cat [SEP] [SEP] [SEP] bird [SEP] = 9 tokens.
  // Item 1 takes 100 + [SEP] (110 used); item 2 takes 17 + [SEP] = 128.
  std::vector<TableItem> items;
  for (int i = 0; i < 5; ++i) items.push_back(RawItem(Words("fish", 100)));
  const auto packed = Pack(Query{"q", "dog"}, t, items, vocab);
  REQUIRE(packed.size() == 128);
  CHECK(packed.tokens.tokens.back() == "[SEP]");
  CHECK(std::count(packed.tokens.tokens.begin(), packed.tokens.tokens.end(),
                   "fish") == 117);
  CHECK(testing::PackViolations(packed, Query{"q", "dog"}, t, items, vocab, {})
            .empty());
}

TEST_CASE("caption of thirty tokens keeps the first twenty") {
  const auto vocab = testing::ToyVocab();
  const auto& words = testing::ToyWords();
  std::string caption;
  std::vector<std::string> all;
  for (int i = 0; i < 30; ++i) {
    const auto& w = words[i % words.size()];
    if (i) caption.push_back(' ');
    caption += w;
    all.push_back(w);
  }
  Table t;
  t.caption = caption;
  const auto packed = Pack(Query{"q", "dog"}, t, {}, vocab);
  const std::vector<std::string> got(packed.tokens.tokens.begin() + 3,
                                     packed.tokens.tokens.begin() + 3 + 20);
  CHECK(got == std::vector<std::string>(all.begin(), all.begin() + 20));
  CHECK(packed.tokens.tokens[3 + 20] == "[SEP]");
}

TEST_CASE("query that cannot fit is rejected") {
  const auto vocab = testing::ToyVocab();
  Budgets b;
  b.max_len = 12;
  const PackOptions opts{b};
  CHECK_NOTHROW(Pack(Query{"q", Words("dog", 6)}, Table{}, {}, vocab, opts));
  CHECK_THROWS_AS(Pack(Query{"q", Words("dog", 7)}, Table{}, {}, vocab, opts),
                  ValidationError);
}

TEST_CASE("frame segment is configurable") {
  const auto vocab = testing::ToyVocab();
  PackOptions opts;
  opts.frame_segment = Segment::kB;
  const auto packed = Pack(Query{"q", "dog"}, Table{}, {}, vocab, opts);
  CHECK(packed.segments[0] == Segment::kB);
  CHECK(packed.segments[1] == Segment::kA);
  CHECK(packed.segments[2] == Segment::kB);
}

TEST_CASE("render and parse round trip") {
  const auto vocab = testing::ToyVocab();
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Table t = testing::RandomTable(rng, "t");
    const Query q{"q", testing::RandomPhrase(rng, 4, 1)};
    const auto packed = Pack(q, t, Slice(t, ItemKind::kRow), vocab);
    const auto record = Render(packed);
    CHECK(record["tokens"].size() == record["ids"].size());
    CHECK(record["tokens"].size() == record["segments"].size());
    CHECK(ParsePacked(nlohmann::json::parse(record.dump())) == packed);
  }
  CHECK_THROWS_AS(ParsePacked(nlohmann::json{{"tokens", {"a"}}, {"ids", {1, 2}},
                                             {"segments", {0}}}),
                  ParseError);
  CHECK_THROWS_AS(ParsePacked(nlohmann::json{{"tokens", {"a"}}, {"ids", {1}},
                                             {"segments", {2}}}),
                  ParseError);
  CHECK_THROWS_AS(ParsePacked(nlohmann::json{{"tokens", {"a"}}}), ParseError);
}

TEST_CASE("packing invariants on random inputs") {
  const auto vocab = testing::ToyVocab();
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const Table t = testing::RandomTable(rng, "t", 12, 8, 5);
    const Query q{"q", testing::RandomPhrase(rng, 8, 1)};
    Budgets b;
    b.max_len = 16 + UniformBelow(rng, 120);
    const auto kind = static_cast<ItemKind>(UniformBelow(rng, 3));
    const auto items = Slice(t, kind);
    const auto packed = Pack(q, t, items, vocab, PackOptions{b});
    const auto violations = testing::PackViolations(packed, q, t, items, vocab, b);
    CHECK_MESSAGE(violations.empty(), (violations.empty() ? "" : violations[0]));

    // Prefix stability: dropping the last item leaves everything before it.
    if (!items.empty()) {
      const std::vector<TableItem> shorter(items.begin(), items.end() - 1);
      const auto packed_shorter = Pack(q, t, shorter, vocab, PackOptions{b});
      REQUIRE(packed_shorter.size() <= packed.size());
      CHECK(std::equal(packed_shorter.tokens.tokens.begin(),
                       packed_shorter.tokens.tokens.end(),
                       packed.tokens.tokens.begin()));
    }
  }
}

}  // namespace
}  // namespace tabsearch
