#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "tabsearch/textproc.h"

namespace tabsearch {

struct Table {
  std::string id;
  std::string caption;
  std::string page_title;
  std::string section_title;
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;

  std::size_t num_columns() const { return headers.size(); }
  std::size_t num_rows() const { return rows.size(); }

  friend bool operator==(const Table&, const Table&) = default;
};

struct Query {
  std::string id;
  std::string text;

  friend bool operator==(const Query&, const Query&) = default;
};

struct Judgment {
  std::string query_id;
  std::string table_id;
  int grade = 0;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

// (query, table) identity used to key judgments, features and scores.
struct PairKey {
  std::string query_id;
  std::string table_id;

  friend auto operator<=>(const PairKey&, const PairKey&) = default;
  friend bool operator==(const PairKey&, const PairKey&) = default;
};

enum class TableFormat { kCanonical, kWikiTables, kWebQueryTable };

TableFormat ParseTableFormat(const std::string& name);

struct LoadDiagnostics {
  std::size_t padded_rows = 0;
  std::size_t truncated_rows = 0;
  // One message per skipped record, prefixed with its line number or key.
  std::vector<std::string> skipped;
};

class TableCollection {
 public:
  TableCollection() = default;
  TableCollection(std::vector<Table> tables, LoadDiagnostics diagnostics);

  const std::vector<Table>& tables() const { return tables_; }
  const LoadDiagnostics& diagnostics() const { return diagnostics_; }
  std::size_t size() const { return tables_.size(); }

  // nullptr when absent.
  const Table* Find(const std::string& id) const;

 private:
  std::vector<Table> tables_;
  std::unordered_map<std::string, std::size_t> index_;
  LoadDiagnostics diagnostics_;
};

// Canonical: one JSON record per line with id, caption, page_title,
// section_title, headers, rows.
// WikiTables: either a single JSON object mapping table ids to records with
// pgTitle, secondTitle, caption, title (headers) and data (rows), or the same
// records one per line carrying an "id" field.
// WebQueryTable: one JSON record per line with id, caption, sub_caption,
// headers, rows; sub_caption becomes section_title.
//
// Rows are padded with empty cells or truncated to the header width.
TableCollection LoadTables(const std::filesystem::path& path,
                           TableFormat format);

std::vector<Query> LoadQueries(const std::filesystem::path& path);

std::vector<Judgment> LoadQrels(const std::filesystem::path& path);

// qid -> table id -> grade.
using QrelsIndex = std::map<std::string, std::map<std::string, int>>;
QrelsIndex IndexQrels(const std::vector<Judgment>& judgments);

class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(int dimension) : dimension_(dimension) {}

  int dimension() const { return dimension_; }
  std::size_t size() const { return values_.size(); }

  void Insert(PairKey key, Eigen::VectorXd values);

  // Empty optional signals the pair has no additional features, which
  // switches scoring for that pair to the BERT-only head.
  std::optional<Eigen::VectorXd> Lookup(const PairKey& key) const;

  const std::map<PairKey, Eigen::VectorXd>& entries() const { return values_; }

 private:
  int dimension_ = 0;
  std::map<PairKey, Eigen::VectorXd> values_;
};

FeatureStore LoadFeatures(const std::filesystem::path& path);

struct LengthStats {
  std::size_t count = 0;
  double mean = 0.0;
  std::size_t max = 0;
  double fraction_over_512 = 0.0;
  double fraction_over_128 = 0.0;
};

LengthStats SummarizeLengths(const std::vector<std::size_t>& lengths);

struct FieldStats {
  LengthStats query;
  LengthStats caption;
  LengthStats page_title;
  LengthStats section_title;
  LengthStats header;
  LengthStats table;  // data rows only
  LengthStats all;
};

// Token counts are WordPiece counts. Header and body counts are the sums of
// their cells' counts. When `pairs` is given, table-side statistics are taken
// over the judged pairs (a table counts once per pair) and "all" adds the
// pair's query length; otherwise each table counts once and "all" covers the
// table fields only.
FieldStats CorpusStats(const TableCollection& tables,
                       const std::vector<Query>& queries,
                       const WordPieceVocab& vocab,
                       const std::vector<Judgment>* pairs = nullptr);

}  // namespace tabsearch
