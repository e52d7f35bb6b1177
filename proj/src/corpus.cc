#include "tabsearch/corpus.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "tabsearch/error.h"

namespace tabsearch {
namespace {

using nlohmann::json;

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> SplitLines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool IsBlank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Cells may be strings, numbers or null in the wild.
std::string CellText(const json& cell) {
  if (cell.is_string()) return cell.get<std::string>();
  if (cell.is_null()) return {};
  return cell.dump();
}

std::string OptionalString(const json& record, const char* key) {
  const auto it = record.find(key);
  if (it == record.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw ParseError(std::string("field '") + key + "' is not a string");
  }
  return it->get<std::string>();
}

std::vector<std::string> CellList(const json& value, const char* key) {
  if (!value.is_array()) {
    throw ParseError(std::string("field '") + key + "' is not an array");
  }
  std::vector<std::string> cells;
  cells.reserve(value.size());
  for (const auto& cell : value) cells.push_back(CellText(cell));
  return cells;
}

const json& Required(const json& record, const char* key) {
  const auto it = record.find(key);
  if (it == record.end()) {
    throw ParseError(std::string("missing field '") + key + "'");
  }
  return *it;
}

// headers_key/rows_key differ between sources.
Table TableFromRecord(const json& record, const std::string& id,
                      const char* headers_key, const char* rows_key,
                      LoadDiagnostics& diag) {
  Table table;
  table.id = id;
  if (table.id.empty()) throw ParseError("empty table id");
  table.headers = CellList(Required(record, headers_key), headers_key);
  const json& rows = Required(record, rows_key);
  if (!rows.is_array()) {
    throw ParseError(std::string("field '") + rows_key + "' is not an array");
  }
  const std::size_t width = table.headers.size();
  for (const auto& row_json : rows) {
    std::vector<std::string> row = CellList(row_json, rows_key);
    if (row.size() < width) {
      row.resize(width);
      ++diag.padded_rows;
    } else if (row.size() > width) {
      row.resize(width);
      ++diag.truncated_rows;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table ParseRecord(const json& record, TableFormat format,
                  const std::string& key_id, LoadDiagnostics& diag) {
  if (!record.is_object()) throw ParseError("record is not an object");
  switch (format) {
    case TableFormat::kCanonical: {
      Table t = TableFromRecord(record, OptionalString(record, "id"),
                                "headers", "rows", diag);
      t.caption = OptionalString(record, "caption");
      t.page_title = OptionalString(record, "page_title");
      t.section_title = OptionalString(record, "section_title");
      return t;
    }
    case TableFormat::kWikiTables: {
      std::string id = key_id.empty() ? OptionalString(record, "id") : key_id;
      Table t = TableFromRecord(record, id, "title", "data", diag);
      t.caption = OptionalString(record, "caption");
      t.page_title = OptionalString(record, "pgTitle");
      t.section_title = OptionalString(record, "secondTitle");
      return t;
    }
    case TableFormat::kWebQueryTable: {
      Table t = TableFromRecord(record, OptionalString(record, "id"),
                                "headers", "rows", diag);
      t.caption = OptionalString(record, "caption");
      t.section_title = OptionalString(record, "sub_caption");
      return t;
    }
  }
  throw ParseError("unknown table format");
}

}  // namespace

TableFormat ParseTableFormat(const std::string& name) {
  if (name == "canonical") return TableFormat::kCanonical;
  if (name == "wikitables") return TableFormat::kWikiTables;
  if (name == "webquerytable") return TableFormat::kWebQueryTable;
  throw ValidationError("unknown table format '" + name +
                        "' (expected canonical, wikitables or webquerytable)");
}

TableCollection::TableCollection(std::vector<Table> tables,
                                 LoadDiagnostics diagnostics)
    : tables_(std::move(tables)), diagnostics_(std::move(diagnostics)) {
  index_.reserve(tables_.size());
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (!index_.emplace(tables_[i].id, i).second) {
      throw ValidationError("duplicate table id '" + tables_[i].id + "'");
    }
  }
}

const Table* TableCollection::Find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &tables_[it->second];
}

TableCollection LoadTables(const std::filesystem::path& path,
                           TableFormat format) {
  const std::string text = ReadFile(path);
  std::vector<Table> tables;
  LoadDiagnostics diag;

  bool parsed_as_map = false;
  if (format == TableFormat::kWikiTables) {
    // Whole-file object keyed by table id, as WikiTables ships it.
    json whole = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (whole.is_object() && !whole.contains("id") &&
        !whole.contains("title")) {
      parsed_as_map = true;
      for (const auto& [key, record] : whole.items()) {
        try {
          tables.push_back(ParseRecord(record, format, key, diag));
        } catch (const ParseError& e) {
          diag.skipped.push_back(key + ": " + e.what());
        }
      }
    }
  }
  if (!parsed_as_map) {
    const auto lines = SplitLines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (IsBlank(lines[i])) continue;
      const std::string where = path.filename().string() + ":" +
                                std::to_string(i + 1);
      try {
        json record = json::parse(lines[i]);
        tables.push_back(ParseRecord(record, format, "", diag));
      } catch (const json::exception& e) {
        diag.skipped.push_back(where + ": " + e.what());
      } catch (const ParseError& e) {
        diag.skipped.push_back(where + ": " + e.what());
      }
    }
  }
  if (tables.empty()) {
    throw ValidationError("no valid tables in " + path.string());
  }
  return TableCollection(std::move(tables), std::move(diag));
}

std::vector<Query> LoadQueries(const std::filesystem::path& path) {
  const auto lines = SplitLines(ReadFile(path));
  std::vector<Query> queries;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (IsBlank(lines[i])) continue;
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw ParseError(where + ": expected 'id<TAB>text'");
    }
    Query q{Trim(std::string_view(lines[i]).substr(0, tab)),
            Trim(std::string_view(lines[i]).substr(tab + 1))};
    if (q.id.empty()) throw ParseError(where + ": empty query id");
    if (q.text.empty()) throw ValidationError(where + ": empty query text");
    if (!seen.insert(q.id).second) {
      throw ValidationError(where + ": duplicate query id '" + q.id + "'");
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

std::vector<Judgment> LoadQrels(const std::filesystem::path& path) {
  const auto lines = SplitLines(ReadFile(path));
  std::vector<Judgment> judgments;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (IsBlank(lines[i])) continue;
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    std::istringstream fields(lines[i]);
    std::string qid, iter, tid, grade_text, extra;
    if (!(fields >> qid >> iter >> tid >> grade_text) || (fields >> extra)) {
      throw ParseError(where + ": expected 'qid 0 table_id grade'");
    }
    int grade = 0;
    const auto [end, ec] = std::from_chars(
        grade_text.data(), grade_text.data() + grade_text.size(), grade);
    if (ec != std::errc() || end != grade_text.data() + grade_text.size()) {
      throw ParseError(where + ": grade '" + grade_text + "' is not an integer");
    }
    if (grade < 0) {
      throw ValidationError(where + ": negative grade " + grade_text);
    }
    if (!seen.emplace(qid, tid).second) {
      throw ValidationError(where + ": duplicate judgment for (" + qid + ", " +
                            tid + ")");
    }
    judgments.push_back({std::move(qid), std::move(tid), grade});
  }
  return judgments;
}

QrelsIndex IndexQrels(const std::vector<Judgment>& judgments) {
  QrelsIndex index;
  for (const auto& j : judgments) index[j.query_id][j.table_id] = j.grade;
  return index;
}

void FeatureStore::Insert(PairKey key, Eigen::VectorXd values) {
  if (values.size() != dimension_) {
    throw DimensionError("feature vector width " +
                         std::to_string(values.size()) + " != " +
                         std::to_string(dimension_));
  }
  if (!values.allFinite()) throw ValidationError("non-finite feature value");
  values_[std::move(key)] = std::move(values);
}

std::optional<Eigen::VectorXd> FeatureStore::Lookup(const PairKey& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

FeatureStore LoadFeatures(const std::filesystem::path& path) {
  const auto lines = SplitLines(ReadFile(path));
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(Trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::size_t first = 0;
  while (first < lines.size() && IsBlank(lines[first])) ++first;
  if (first == lines.size()) throw ParseError(path.string() + ": empty file");
  const auto header = split(lines[first]);
  if (header.size() < 3 || header[0] != "qid" || header[1] != "table_id") {
    throw ParseError(path.string() +
                     ": header must be 'qid,table_id,f1,...,fd'");
  }
  const int dim = static_cast<int>(header.size() - 2);
  FeatureStore store(dim);
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (IsBlank(lines[i])) continue;
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    const auto cells = split(lines[i]);
    if (cells.size() != header.size()) {
      throw ParseError(where + ": expected " + std::to_string(header.size()) +
                       " columns, got " + std::to_string(cells.size()));
    }
    Eigen::VectorXd values(dim);
    for (int k = 0; k < dim; ++k) {
      const std::string& cell = cells[k + 2];
      double v = 0.0;
      const auto [end, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || end != cell.data() + cell.size() || cell.empty()) {
        throw ParseError(where + ": non-numeric feature '" + cell + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(where + ": non-finite feature '" + cell + "'");
      }
      values[k] = v;
    }
    PairKey key{cells[0], cells[1]};
    if (store.Lookup(key)) {
      throw ValidationError(where + ": duplicate feature row");
    }
    store.Insert(std::move(key), std::move(values));
  }
  return store;
}

LengthStats SummarizeLengths(const std::vector<std::size_t>& lengths) {
  LengthStats s;
  s.count = lengths.size();
  if (lengths.empty()) return s;
  double total = 0.0;
  std::size_t over512 = 0, over128 = 0;
  for (std::size_t n : lengths) {
    total += static_cast<double>(n);
    s.max = std::max(s.max, n);
    over512 += n > 512;
    over128 += n > 128;
  }
  const double count = static_cast<double>(lengths.size());
  s.mean = total / count;
  s.fraction_over_512 = static_cast<double>(over512) / count;
  s.fraction_over_128 = static_cast<double>(over128) / count;
  return s;
}

FieldStats CorpusStats(const TableCollection& tables,
                       const std::vector<Query>& queries,
                       const WordPieceVocab& vocab,
                       const std::vector<Judgment>* pairs) {
  if (tables.size() == 0 || queries.empty()) {
    throw ValidationError("corpus_stats: empty corpus");
  }
  struct TableLengths {
    std::size_t caption, page, section, header, body;
    std::size_t all() const { return caption + page + section + header + body; }
  };
  auto measure = [&vocab](const Table& t) {
    TableLengths l{};
    l.caption = WordPieceLength(t.caption, vocab);
    l.page = WordPieceLength(t.page_title, vocab);
    l.section = WordPieceLength(t.section_title, vocab);
    for (const auto& h : t.headers) l.header += WordPieceLength(h, vocab);
    for (const auto& row : t.rows) {
      for (const auto& cell : row) l.body += WordPieceLength(cell, vocab);
    }
    return l;
  };

  std::map<std::string, std::size_t> query_len;
  std::vector<std::size_t> q_lengths;
  for (const auto& q : queries) {
    const std::size_t n = WordPieceLength(q.text, vocab);
    query_len[q.id] = n;
    q_lengths.push_back(n);
  }

  std::unordered_map<std::string, TableLengths> cache;
  auto lengths_of = [&](const Table& t) -> const TableLengths& {
    auto it = cache.find(t.id);
    if (it == cache.end()) it = cache.emplace(t.id, measure(t)).first;
    return it->second;
  };

  std::vector<std::size_t> caption, page, section, header, body, all;
  auto record = [&](const TableLengths& l, std::size_t extra) {
    caption.push_back(l.caption);
    page.push_back(l.page);
    section.push_back(l.section);
    header.push_back(l.header);
    body.push_back(l.body);
    all.push_back(l.all() + extra);
  };

  if (pairs != nullptr) {
    for (const auto& j : *pairs) {
      const Table* t = tables.Find(j.table_id);
      const auto q = query_len.find(j.query_id);
      if (t == nullptr || q == query_len.end()) {
        throw ValidationError("corpus_stats: judged pair (" + j.query_id +
                              ", " + j.table_id + ") not in corpus");
      }
      record(lengths_of(*t), q->second);
    }
    if (all.empty()) throw ValidationError("corpus_stats: no judged pairs");
  } else {
    for (const auto& t : tables.tables()) record(measure(t), 0);
  }

  FieldStats stats;
  stats.query = SummarizeLengths(q_lengths);
  stats.caption = SummarizeLengths(caption);
  stats.page_title = SummarizeLengths(page);
  stats.section_title = SummarizeLengths(section);
  stats.header = SummarizeLengths(header);
  stats.table = SummarizeLengths(body);
  stats.all = SummarizeLengths(all);
  return stats;
}

}  // namespace tabsearch
