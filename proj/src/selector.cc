#include "tabsearch/selector.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>

#include "tabsearch/error.h"
#include "tabsearch/random.h"
#include "tabsearch/textproc.h"

namespace tabsearch {
namespace {

std::string JoinCells(const std::vector<std::string>& cells) {
  std::string out;
  for (const auto& c : cells) {
    if (c.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += c;
  }
  return out;
}

std::vector<std::string> SortedCopy(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  return tokens;
}

}  // namespace

ItemKind ParseItemKind(const std::string& name) {
  if (name == "row") return ItemKind::kRow;
  if (name == "col" || name == "column") return ItemKind::kColumn;
  if (name == "cell") return ItemKind::kCell;
  throw ValidationError("unknown item kind '" + name +
                        "' (expected row, col or cell)");
}

SalienceMode ParseSalienceMode(const std::string& name) {
  if (name == "mean") return SalienceMode::kMean;
  if (name == "sum") return SalienceMode::kSum;
  if (name == "max") return SalienceMode::kMax;
  if (name == "random" || name == "rand") return SalienceMode::kRandom;
  throw ValidationError("unknown salience mode '" + name +
                        "' (expected mean, sum, max or random)");
}

std::string ToString(ItemKind kind) {
  switch (kind) {
    case ItemKind::kRow: return "row";
    case ItemKind::kColumn: return "col";
    case ItemKind::kCell: return "cell";
  }
  return "?";
}

std::string ToString(SalienceMode mode) {
  switch (mode) {
    case SalienceMode::kMean: return "mean";
    case SalienceMode::kSum: return "sum";
    case SalienceMode::kMax: return "max";
    case SalienceMode::kRandom: return "random";
  }
  return "?";
}

std::vector<TableItem> Slice(const Table& table, ItemKind kind,
                             const SliceOptions& options) {
  std::vector<TableItem> items;
  auto emit = [&items, kind](std::string raw, int row, int col) {
    auto tokens = SimpleTokenize(raw);
    if (tokens.empty()) return;
    items.push_back({kind, std::move(tokens), {row, col}, std::move(raw)});
  };
  const int rows = static_cast<int>(table.num_rows());
  const int cols = static_cast<int>(table.num_columns());
  switch (kind) {
    case ItemKind::kRow:
      for (int r = 0; r < rows; ++r) {
        std::string raw = JoinCells(table.rows[r]);
        if (options.headers_in_rows) {
          std::vector<std::string> cells;
          for (int c = 0; c < cols; ++c) {
            cells.push_back(table.headers[c]);
            cells.push_back(table.rows[r][c]);
          }
          raw = JoinCells(cells);
        }
        emit(std::move(raw), r, -1);
      }
      break;
    case ItemKind::kColumn:
      for (int c = 0; c < cols; ++c) {
        std::vector<std::string> cells{table.headers[c]};
        for (int r = 0; r < rows; ++r) cells.push_back(table.rows[r][c]);
        emit(JoinCells(cells), -1, c);
      }
      break;
    case ItemKind::kCell:
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) emit(table.rows[r][c], r, c);
      }
      break;
  }
  return items;
}

SalienceScorer::SalienceScorer(const Query& query, const VectorStore& store)
    : SalienceScorer(SimpleTokenize(query.text), store) {}

SalienceScorer::SalienceScorer(std::vector<std::string> query_tokens,
                               const VectorStore& store)
    : store_(&store) {
  const auto sorted = SortedCopy(std::move(query_tokens));
  query_mean_ = MeanVector(sorted, store);
  std::vector<Eigen::VectorXd> units;
  for (const auto& token : sorted) {
    if (auto v = store.Find(token)) {
      const double n = v->norm();
      units.push_back(n > 0.0 ? Eigen::VectorXd(*v / n)
                              : Eigen::VectorXd::Zero(store.dimension()));
    }
  }
  query_units_.resize(store.dimension(), static_cast<Eigen::Index>(units.size()));
  for (std::size_t k = 0; k < units.size(); ++k) {
    query_units_.col(static_cast<Eigen::Index>(k)) = units[k];
  }
}

double SalienceScorer::Score(const TableItem& item, SalienceMode mode) const {
  return Score(item.tokens, mode);
}

double SalienceScorer::Score(const std::vector<std::string>& item_tokens,
                             SalienceMode mode) const {
  switch (mode) {
    case SalienceMode::kMean: return Mean(item_tokens);
    case SalienceMode::kSum: return Sum(item_tokens);
    case SalienceMode::kMax: return Max(item_tokens);
    case SalienceMode::kRandom: break;
  }
  throw std::invalid_argument("salience is undefined in random mode");
}

double SalienceScorer::Mean(const std::vector<std::string>& item_tokens) const {
  return Cosine(MeanVector(item_tokens, *store_), query_mean_);
}

double SalienceScorer::Sum(const std::vector<std::string>& item_tokens) const {
  double total = 0.0;
  for (const auto& token : SortedCopy(item_tokens)) {
    const auto v = store_->Find(token);
    if (!v) continue;
    const double n = v->norm();
    if (n == 0.0) continue;
    const Eigen::VectorXd sims = query_units_.transpose() * (*v / n);
    for (Eigen::Index k = 0; k < sims.size(); ++k) {
      total += std::clamp(sims[k], -1.0, 1.0);
    }
  }
  return total;
}

double SalienceScorer::Max(const std::vector<std::string>& item_tokens) const {
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& token : item_tokens) {
    const auto v = store_->Find(token);
    if (!v || query_units_.cols() == 0) continue;
    const double n = v->norm();
    any = true;
    if (n == 0.0) {
      best = std::max(best, 0.0);
      continue;
    }
    const Eigen::VectorXd sims = query_units_.transpose() * (*v / n);
    best = std::max(best, std::clamp(sims.maxCoeff(), -1.0, 1.0));
  }
  return any ? best : 0.0;
}

double Salience(const TableItem& item, const Query& query, SalienceMode mode,
                const VectorStore& store) {
  return SalienceScorer(query, store).Score(item, mode);
}

std::int64_t SalienceRankKey(double salience) {
  return static_cast<std::int64_t>(std::llround(salience / kSalienceResolution));
}

std::vector<ScoredItem> SelectScored(const Table& table, const Query& query,
                                     SalienceMode mode, ItemKind kind,
                                     const VectorStore& store,
                                     std::uint64_t seed,
                                     const SliceOptions& options) {
  std::vector<ScoredItem> scored;
  for (auto& item : Slice(table, kind, options)) {
    scored.push_back({std::move(item), 0.0});
  }
  if (mode == SalienceMode::kRandom) {
    std::mt19937_64 rng(seed);
    Shuffle(std::span<ScoredItem>(scored), rng);
    return scored;
  }
  const SalienceScorer scorer(query, store);
  std::vector<std::int64_t> keys(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    scored[i].salience = scorer.Score(scored[i].item, mode);
    keys[i] = SalienceRankKey(scored[i].salience);
  }
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] > keys[b];
    return scored[a].item.origin < scored[b].item.origin;
  });
  std::vector<ScoredItem> out;
  out.reserve(scored.size());
  for (std::size_t i : order) out.push_back(std::move(scored[i]));
  return out;
}

std::vector<TableItem> Select(const Table& table, const Query& query,
                              SalienceMode mode, ItemKind kind,
                              const VectorStore& store, std::uint64_t seed,
                              const SliceOptions& options) {
  std::vector<TableItem> items;
  for (auto& s : SelectScored(table, query, mode, kind, store, seed, options)) {
    items.push_back(std::move(s.item));
  }
  return items;
}

std::uint64_t PairSeed(std::uint64_t run_seed, const std::string& query_id,
                       const std::string& table_id) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((run_seed >> (8 * i)) & 0xFF);
  }
  std::uint64_t h = Fnv1a(std::string_view(bytes, 8));
  h = Fnv1a(query_id, h);
  h = Fnv1a(std::string_view("\0", 1), h);
  return Fnv1a(table_id, h);
}

}  // namespace tabsearch
