#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tabsearch/selector.h"
#include "tabsearch/textproc.h"

namespace tabsearch::testing {

// Direct transcription of the salience formulas in long double.
inline long double RefCosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  long double dot = 0, nu = 0, nv = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    dot += static_cast<long double>(u(i)) * v(i);
    nu += static_cast<long double>(u(i)) * u(i);
    nv += static_cast<long double>(v(i)) * v(i);
  }
  if (nu == 0 || nv == 0) return 0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline Eigen::VectorXd RefMean(const std::vector<std::string>& words,
                               const VectorStore& s) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(s.dimension());
  int n = 0;
  for (const auto& w : words) {
    if (auto v = s.Find(w)) {
      sum += *v;
      ++n;
    }
  }
  return n == 0 ? sum : Eigen::VectorXd(sum / n);
}

inline long double RefSalience(const std::vector<std::string>& item,
                               const std::vector<std::string>& query,
                               SalienceMode mode, const VectorStore& s) {
  if (mode == SalienceMode::kMean) {
    return RefCosine(RefMean(item, s), RefMean(query, s));
  }
  long double sum = 0, best = 0;
  bool any = false;
  for (const auto& k : query) {
    auto vk = s.Find(k);
    if (!vk) continue;
    for (const auto& w : item) {
      auto vw = s.Find(w);
      if (!vw) continue;
      const long double c = RefCosine(*vk, *vw);
      sum += c;
      best = any ? std::max(best, c) : c;
      any = true;
    }
  }
  return mode == SalienceMode::kSum ? sum : best;
}

struct RefItem {
  ItemOrigin origin;
  std::vector<std::string> tokens;
  long double salience = 0;
};

// Items cut cell by cell, scored in long double, and ordered by descending
// salience on the 1e-9 grid with ascending origin as the tie-break.
inline std::vector<RefItem> RefSelect(const Table& table, const Query& query,
                                      SalienceMode mode, ItemKind kind,
                                      const VectorStore& store) {
  std::vector<RefItem> items;
  auto add = [&](ItemOrigin origin, const std::vector<const std::string*>& cells) {
    RefItem item{origin, {}, 0};
    for (const auto* cell : cells) {
      for (auto& t : SimpleTokenize(*cell)) item.tokens.push_back(std::move(t));
    }
    if (!item.tokens.empty()) items.push_back(std::move(item));
  };
  const int rows = static_cast<int>(table.rows.size());
  const int cols = static_cast<int>(table.headers.size());
  if (kind == ItemKind::kRow) {
    for (int r = 0; r < rows; ++r) {
      std::vector<const std::string*> cells;
      for (int c = 0; c < cols; ++c) cells.push_back(&table.rows[r][c]);
      add({r, -1}, cells);
    }
  } else if (kind == ItemKind::kColumn) {
    for (int c = 0; c < cols; ++c) {
      std::vector<const std::string*> cells{&table.headers[c]};
      for (int r = 0; r < rows; ++r) cells.push_back(&table.rows[r][c]);
      add({-1, c}, cells);
    }
  } else {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) add({r, c}, {&table.rows[r][c]});
    }
  }
  const auto qt = SimpleTokenize(query.text);
  for (auto& item : items) item.salience = RefSalience(item.tokens, qt, mode, store);
  auto key = [](long double s) { return std::llround(s * 1e9L); };
  std::sort(items.begin(), items.end(), [&](const RefItem& a, const RefItem& b) {
    const auto ka = key(a.salience), kb = key(b.salience);
    if (ka != kb) return ka > kb;
    return a.origin < b.origin;
  });
  return items;
}

// Number of positions where Select disagrees with RefSelect.
inline int SelectMismatches(const Table& table, const Query& query,
                            SalienceMode mode, ItemKind kind,
                            const VectorStore& store) {
  const auto got = Select(table, query, mode, kind, store, 0);
  const auto want = RefSelect(table, query, mode, kind, store);
  int bad = got.size() == want.size() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
    bad += got[i].origin != want[i].origin || got[i].tokens != want[i].tokens;
  }
  return bad;
}

}  // namespace tabsearch::testing
