#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tabsearch/corpus.h"
#include "tabsearch/embed.h"

namespace tabsearch {

enum class ItemKind { kRow, kColumn, kCell };
enum class SalienceMode { kMean, kSum, kMax, kRandom };

ItemKind ParseItemKind(const std::string& name);
SalienceMode ParseSalienceMode(const std::string& name);
std::string ToString(ItemKind kind);
std::string ToString(SalienceMode mode);

// Row index is -1 for column items, column index is -1 for row items.
struct ItemOrigin {
  int row = -1;
  int column = -1;

  friend auto operator<=>(const ItemOrigin&, const ItemOrigin&) = default;
};

struct TableItem {
  ItemKind kind = ItemKind::kRow;
  std::vector<std::string> tokens;  // simple-tokenized
  ItemOrigin origin;
  std::string raw_text;
};

struct SliceOptions {
  // Column items always start with their header cell; row items only do
  // when this is set.
  bool headers_in_rows = false;
};

// Rows: one item per data row. Columns: header cell followed by the column's
// data cells. Cells: one item per data cell. Items with no tokens are dropped.
std::vector<TableItem> Slice(const Table& table, ItemKind kind,
                             const SliceOptions& options = {});

// Precomputed query side of the salience formulas.
class SalienceScorer {
 public:
  SalienceScorer(const Query& query, const VectorStore& store);
  SalienceScorer(std::vector<std::string> query_tokens,
                 const VectorStore& store);

  // Throws std::invalid_argument for kRandom.
  double Score(const TableItem& item, SalienceMode mode) const;
  double Score(const std::vector<std::string>& item_tokens,
               SalienceMode mode) const;

 private:
  double Mean(const std::vector<std::string>& item_tokens) const;
  double Sum(const std::vector<std::string>& item_tokens) const;
  double Max(const std::vector<std::string>& item_tokens) const;

  const VectorStore* store_;
  Eigen::VectorXd query_mean_;
  // Unit-normalized in-vocabulary query vectors, one per column, in sorted
  // token order. Zero-norm vectors are kept as zero columns.
  Eigen::MatrixXd query_units_;
};

double Salience(const TableItem& item, const Query& query, SalienceMode mode,
                const VectorStore& store);

// Salience values are ordered after snapping to this grid, so values that
// agree to ~1e-9 are treated as ties and fall back to origin order.
inline constexpr double kSalienceResolution = 1e-9;
std::int64_t SalienceRankKey(double salience);

struct ScoredItem {
  TableItem item;
  double salience = 0.0;  // 0 in random mode
};

// Salience modes: descending score, ties by ascending (row, column) origin.
// Random mode: Fisher-Yates shuffle driven by mt19937_64(seed).
std::vector<ScoredItem> SelectScored(const Table& table, const Query& query,
                                     SalienceMode mode, ItemKind kind,
                                     const VectorStore& store,
                                     std::uint64_t seed,
                                     const SliceOptions& options = {});

std::vector<TableItem> Select(const Table& table, const Query& query,
                              SalienceMode mode, ItemKind kind,
                              const VectorStore& store, std::uint64_t seed,
                              const SliceOptions& options = {});

// Per-pair seed for the random baseline, mixing the run seed with both ids.
std::uint64_t PairSeed(std::uint64_t run_seed, const std::string& query_id,
                       const std::string& table_id);

}  // namespace tabsearch
