#include "tabsearch/embed.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace tabsearch {
namespace {

std::vector<std::string_view> SplitSpaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool ParseInt(std::string_view s, long long& out) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size();
}

bool ParseDouble(std::string_view s, double& out) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

VectorStore::VectorStore(std::vector<std::string> words, RowMatrix vectors)
    : words_(std::move(words)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(words_.size()) != vectors_.rows()) {
    throw DimensionError("vector store: word count does not match rows");
  }
  if (!vectors_.allFinite()) {
    throw ValidationError("vector store: non-finite component");
  }
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    // fastText files occasionally repeat a word; the first entry wins.
    index_.emplace(words_[i], static_cast<Eigen::Index>(i));
  }
}

bool VectorStore::Contains(std::string_view word) const {
  return index_.count(std::string(word)) != 0;
}

std::optional<VectorStore::ConstRow> VectorStore::Find(
    std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return ConstRow(vectors_.row(it->second).data(), vectors_.cols());
}

VectorStore LoadVectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vector file " + path.string());

  std::vector<std::string> words;
  std::vector<double> values;
  long long dim = -1;
  bool header_seen = false;
  std::size_t skipped = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = SplitSpaces(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      long long count = 0, declared = 0;
      if (ParseInt(fields[0], count) && ParseInt(fields[1], declared) &&
          declared > 0) {
        dim = declared;
        header_seen = true;
        continue;
      }
    }
    const long long width = static_cast<long long>(fields.size()) - 1;
    if (dim < 0 && width > 0) dim = width;
    bool ok = width == dim;
    const std::size_t mark = values.size();
    for (std::size_t k = 1; ok && k < fields.size(); ++k) {
      double v = 0.0;
      ok = ParseDouble(fields[k], v);
      values.push_back(v);
    }
    if (!ok) {
      values.resize(mark);
      ++skipped;
      std::cerr << "warning: " << path.string() << ":" << line_no
                << ": skipped vector line (expected " << dim
                << " finite values)\n";
      continue;
    }
    words.emplace_back(fields[0]);
  }
  if (words.empty()) {
    throw ValidationError("no usable vectors in " + path.string());
  }
  if (!header_seen && skipped > words.size()) {
    throw ValidationError("inconsistent vector dimension in " + path.string() +
                          " (no header; " + std::to_string(skipped) +
                          " lines disagree with the first vector's width)");
  }
  VectorStore::RowMatrix matrix = Eigen::Map<VectorStore::RowMatrix>(
      values.data(), static_cast<Eigen::Index>(words.size()),
      static_cast<Eigen::Index>(dim));
  VectorStore store(std::move(words), std::move(matrix));
  store.set_skipped_lines(skipped);
  return store;
}

MeanVectorResult MeanVectorWithCount(const std::vector<std::string>& words,
                                     const VectorStore& store) {
  MeanVectorResult result;
  result.mean = Eigen::VectorXd::Zero(store.dimension());
  std::vector<const std::string*> sorted;
  sorted.reserve(words.size());
  for (const auto& w : words) sorted.push_back(&w);
  std::sort(sorted.begin(), sorted.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  for (const std::string* w : sorted) {
    if (auto v = store.Find(*w)) {
      result.mean += *v;
      ++result.in_vocabulary;
    }
  }
  if (result.in_vocabulary > 0) {
    result.mean /= static_cast<double>(result.in_vocabulary);
  }
  return result;
}

}  // namespace tabsearch
