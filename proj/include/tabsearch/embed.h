#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "tabsearch/error.h"

namespace tabsearch {

// Cosine similarity of two dense vectors. A zero-norm operand yields 0.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar Cosine(const Eigen::MatrixBase<DerivedA>& u,
                                 const Eigen::MatrixBase<DerivedB>& v) {
  using Scalar = typename DerivedA::Scalar;
  if (u.size() != v.size()) {
    throw DimensionError("cosine: dimension mismatch " +
                         std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) return Scalar(0);
  const Scalar c = u.dot(v.template cast<Scalar>()) / (nu * nv);
  // Rounding can push |c| a hair past 1.
  return std::clamp(c, Scalar(-1), Scalar(1));
}

// Word vectors in a row-per-word matrix.
class VectorStore {
 public:
  using RowMatrix =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstRow = Eigen::Map<const Eigen::VectorXd>;

  VectorStore() = default;
  VectorStore(std::vector<std::string> words, RowMatrix vectors);

  int dimension() const { return static_cast<int>(vectors_.cols()); }
  std::size_t size() const { return words_.size(); }
  bool Contains(std::string_view word) const;

  // Empty when the word is out of vocabulary.
  std::optional<ConstRow> Find(std::string_view word) const;

  const std::vector<std::string>& words() const { return words_; }
  const RowMatrix& matrix() const { return vectors_; }

  // Number of lines dropped while loading.
  std::size_t skipped_lines() const { return skipped_lines_; }
  void set_skipped_lines(std::size_t n) { skipped_lines_ = n; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, Eigen::Index> index_;
  RowMatrix vectors_;
  std::size_t skipped_lines_ = 0;
};

// fastText text format: an optional "count dim" header, then
// "word v1 ... vdim" lines. Lines of the wrong width or with non-finite
// values are skipped. Without a header the width of the first vector line
// fixes the dimension.
VectorStore LoadVectors(const std::filesystem::path& path);

struct MeanVectorResult {
  Eigen::VectorXd mean;
  std::size_t in_vocabulary = 0;
};

// Average over the in-vocabulary words only; the zero vector when none are.
// The sum is accumulated in sorted word order, so equal multisets produce
// bit-identical means.
MeanVectorResult MeanVectorWithCount(const std::vector<std::string>& words,
                                     const VectorStore& store);

inline Eigen::VectorXd MeanVector(const std::vector<std::string>& words,
                                  const VectorStore& store) {
  return MeanVectorWithCount(words, store).mean;
}

}  // namespace tabsearch
