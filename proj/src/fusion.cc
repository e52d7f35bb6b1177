#include "tabsearch/fusion.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace tabsearch {
namespace {

constexpr const char* kHeadMagic = "tabsearch-fusion-head";
constexpr int kHeadVersion = 1;

std::string FormatDouble(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double ParseDouble(const std::string& s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ParseError("fusion head: bad number '" + s + "'");
  }
  return v;
}

std::vector<double> ReadValues(std::istringstream& in, const std::string& name,
                               std::size_t count) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("fusion head: missing '" + name + "' line");
  }
  std::istringstream fields(line);
  std::string tag;
  fields >> tag;
  if (tag != name) {
    throw ParseError("fusion head: expected '" + name + "', got '" + tag + "'");
  }
  std::vector<double> values;
  std::string token;
  while (fields >> token) values.push_back(ParseDouble(token));
  if (values.size() != count) {
    throw ParseError("fusion head: '" + name + "' has " +
                     std::to_string(values.size()) + " values, expected " +
                     std::to_string(count));
  }
  return values;
}

}  // namespace

void TrainConfig::Validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw ValidationError("learning rate must be > 0");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ValidationError("warm-up fraction must lie in [0, 1)");
  }
  if (max_steps < 0) throw ValidationError("max_steps must be >= 0");
}

std::string TrainConfig::Describe() const {
  std::ostringstream out;
  out << "epochs=" << epochs << " batch=" << batch_size
      << " lr=" << learning_rate << " warmup=" << warmup_fraction
      << " decay=" << (linear_decay ? "linear" : "none") << " seed=" << seed;
  if (max_steps > 0) out << " max_steps=" << max_steps;
  return out.str();
}

double LearningRateFactor(const TrainConfig& config, int step, int total) {
  const int warmup =
      static_cast<int>(config.warmup_fraction * static_cast<double>(total));
  if (step < warmup) {
    return static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (!config.linear_decay) return 1.0;
  return static_cast<double>(total - step) /
         static_cast<double>(std::max(1, total - warmup));
}

std::string SerializeHead(const FusionHead<double>& head) {
  std::ostringstream out;
  auto line = [&out](const char* name, auto begin, auto end) {
    out << name;
    for (auto it = begin; it != end; ++it) out << ' ' << FormatDouble(*it);
    out << '\n';
  };
  out << kHeadMagic << ' ' << kHeadVersion << '\n';
  out << "feature_dim " << head.feature_dim() << '\n';
  out << "hidden_dim " << head.hidden_dim() << '\n';
  std::vector<double> w1;
  for (Eigen::Index r = 0; r < head.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < head.w1.cols(); ++c) w1.push_back(head.w1(r, c));
  }
  line("w1", w1.begin(), w1.end());
  line("b1", head.b1.data(), head.b1.data() + head.b1.size());
  line("w2", head.w2.data(), head.w2.data() + head.w2.size());
  out << "b2 " << FormatDouble(head.b2) << '\n';
  return out.str();
}

FusionHead<double> DeserializeHead(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kHeadMagic || version != kHeadVersion) {
    throw ParseError("not a fusion head checkpoint (version " +
                     std::to_string(kHeadVersion) + ")");
  }
  std::string tag;
  int d = -1, h = -1;
  in >> tag >> d;
  if (tag != "feature_dim" || d < 0) throw ParseError("fusion head: bad feature_dim");
  in >> tag >> h;
  if (tag != "hidden_dim" || h <= 0) throw ParseError("fusion head: bad hidden_dim");
  std::string rest;
  std::getline(in, rest);

  FusionHead<double> head(d, h);
  const auto w1 = ReadValues(in, "w1", static_cast<std::size_t>(d) * d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) head.w1(r, c) = w1[static_cast<std::size_t>(r) * d + c];
  }
  const auto b1 = ReadValues(in, "b1", d);
  for (int i = 0; i < d; ++i) head.b1[i] = b1[i];
  const auto w2 = ReadValues(in, "w2", static_cast<std::size_t>(d + h));
  for (int i = 0; i < d + h; ++i) head.w2[i] = w2[i];
  head.b2 = ReadValues(in, "b2", 1)[0];
  if (!head.AllFinite()) throw ParseError("fusion head: non-finite parameter");
  return head;
}

void SaveHead(const FusionHead<double>& head, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << SerializeHead(head);
}

FusionHead<double> LoadHead(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return DeserializeHead(buffer.str());
}

}  // namespace tabsearch
