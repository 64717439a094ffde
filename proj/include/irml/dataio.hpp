#pragma once

// Dataset parsing (LIBSVM text and headed numeric CSV), seeded train/test
// splitting and the standardise-then-unit-normalise preprocessing.

#include "irml/core.hpp"
#include "irml/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace irml {

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : DataError(format(line, column, what)), line_(line), column_(column) {}

  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] std::size_t column() const { return column_; }

 private:
  static std::string format(std::size_t line, std::size_t column, const std::string& what) {
    std::ostringstream os;
    os << "line " << line;
    if (column > 0) os << ", column " << column;
    os << ": " << what;
    return os.str();
  }

  std::size_t line_;
  std::size_t column_;
};

struct RawDataset {
  LabeledDataset data;
  // Source label values mapped to -1 and +1 respectively.
  std::array<double, 2> source_labels{};
  std::ptrdiff_t declared_dim = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < text.size()) lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

// Ascending source labels become (-1, +1).
class LabelMapper {
 public:
  void observe(double label, std::size_t line) {
    if (seen_.insert(label).second && seen_.size() > 2) {
      throw ParseError(line, 0, "more than two distinct class labels");
    }
  }
  [[nodiscard]] std::array<double, 2> finish() const {
    if (seen_.size() != 2) {
      throw DataError("expected exactly two distinct class labels, found " +
                      std::to_string(seen_.size()));
    }
    return {*seen_.begin(), *seen_.rbegin()};
  }

 private:
  std::set<double> seen_;
};

inline std::vector<int> map_labels(const std::vector<double>& raw, const std::array<double, 2>& src) {
  std::vector<int> y;
  y.reserve(raw.size());
  for (double v : raw) y.push_back(v == src[0] ? -1 : +1);
  return y;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

// `label idx:val idx:val ...` with 1-based, strictly increasing indices.
// Missing entries are zero; the width is the largest index seen.
inline RawDataset parse_libsvm(std::string_view text) {
  std::vector<double> labels;
  std::vector<std::vector<std::pair<std::ptrdiff_t, double>>> rows;
  detail::LabelMapper mapper;
  std::ptrdiff_t width = 0;
  const auto lines = detail::split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto line_no = ln + 1;
    const auto line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const auto b = line.find_first_not_of(" \t", pos);
      if (b == std::string_view::npos) break;
      const auto e = line.find_first_of(" \t", b);
      tokens.push_back(line.substr(b, e == std::string_view::npos ? line.size() - b : e - b));
      pos = e == std::string_view::npos ? line.size() : e;
    }
    const auto label = detail::parse_double(tokens[0]);
    if (!label) throw ParseError(line_no, 1, "malformed label '" + std::string(tokens[0]) + "'");
    mapper.observe(*label, line_no);
    std::vector<std::pair<std::ptrdiff_t, double>> entries;
    std::ptrdiff_t last = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, t + 1, "malformed token '" + std::string(tok) + "'");
      }
      const auto idx = detail::parse_int(tok.substr(0, colon));
      const auto val = detail::parse_double(tok.substr(colon + 1));
      if (!idx || !val || *idx < 1) {
        throw ParseError(line_no, t + 1, "malformed token '" + std::string(tok) + "'");
      }
      if (*idx <= last) throw ParseError(line_no, t + 1, "feature indices must strictly increase");
      last = static_cast<std::ptrdiff_t>(*idx);
      entries.emplace_back(last - 1, *val);
    }
    width = std::max(width, last);
    labels.push_back(*label);
    rows.push_back(std::move(entries));
  }
  RawDataset out;
  out.source_labels = mapper.finish();
  out.declared_dim = width;
  out.data.x = RowMatrix::Zero(static_cast<std::ptrdiff_t>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [j, v] : rows[i]) out.data.x(static_cast<std::ptrdiff_t>(i), j) = v;
  }
  out.data.y = detail::map_labels(labels, out.source_labels);
  return out;
}

// Writes every column (zeros included) so that the width survives a re-parse.
inline std::string serialize_libsvm(const LabeledDataset& data) {
  std::string out;
  for (std::ptrdiff_t i = 0; i < data.size(); ++i) {
    out += data.y[static_cast<std::size_t>(i)] < 0 ? "-1" : "+1";
    for (std::ptrdiff_t j = 0; j < data.dim(); ++j) {
      out += ' ';
      out += std::to_string(j + 1);
      out += ':';
      out += detail::format_double(data.x(i, j));
    }
    out += '\n';
  }
  return out;
}

// Numeric CSV with a header row. `label_column` names a header field, or is a
// 0-based column index when no header field matches. Empty means the last column.
inline RawDataset parse_csv(std::string_view text, const std::string& label_column) {
  const auto lines = detail::split_lines(text);
  std::size_t ln = 0;
  while (ln < lines.size() && detail::trim(lines[ln]).empty()) ++ln;
  if (ln == lines.size()) throw DataError("CSV input is empty");

  auto split_cells = [](std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      cells.push_back(detail::trim(line.substr(pos, comma == std::string_view::npos ? line.size() - pos
                                                                                     : comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return cells;
  };

  const auto header = split_cells(detail::trim(lines[ln]));
  std::optional<std::size_t> label_idx;
  if (label_column.empty()) label_idx = header.size() - 1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_idx = c;
  }
  if (!label_idx) {
    const auto as_int = detail::parse_int(label_column);
    if (!as_int || *as_int < 0 || static_cast<std::size_t>(*as_int) >= header.size()) {
      throw UsageError("CSV label column '" + label_column + "' not found in header");
    }
    label_idx = static_cast<std::size_t>(*as_int);
  }
  const auto width = static_cast<std::ptrdiff_t>(header.size()) - 1;

  std::vector<double> labels;
  std::vector<std::vector<double>> rows;
  detail::LabelMapper mapper;
  for (++ln; ln < lines.size(); ++ln) {
    const auto line_no = ln + 1;
    const auto line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != header.size()) {
      throw ParseError(line_no, 0,
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(cells.size()));
    }
    std::vector<double> feats;
    feats.reserve(static_cast<std::size_t>(width));
    double label = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = detail::parse_double(cells[c]);
      if (!v) throw ParseError(line_no, c + 1, "non-numeric cell '" + std::string(cells[c]) + "'");
      if (c == *label_idx) {
        label = *v;
      } else {
        feats.push_back(*v);
      }
    }
    mapper.observe(label, line_no);
    labels.push_back(label);
    rows.push_back(std::move(feats));
  }
  RawDataset out;
  out.source_labels = mapper.finish();
  out.declared_dim = width;
  out.data.x.resize(static_cast<std::ptrdiff_t>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::ptrdiff_t j = 0; j < width; ++j) {
      out.data.x(static_cast<std::ptrdiff_t>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  out.data.y = detail::map_labels(labels, out.source_labels);
  return out;
}

enum class DataFormat { kLibsvm, kCsv };

inline DataFormat guess_format(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".csv") return DataFormat::kCsv;
  return DataFormat::kLibsvm;
}

inline RawDataset load_dataset(const std::string& path, DataFormat format,
                               const std::string& label_column = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    if (format == DataFormat::kCsv) return parse_csv(buf.str(), label_column);
    return parse_libsvm(buf.str());
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline constexpr int kMaxSplitRetries = 100;

// Seeded shuffle; the first ceil(n * fraction) shuffled instances train. A
// shuffle that leaves a class absent from the training part is redrawn from
// a derived stream. Both parts keep the source order.
inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                       double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("split: train fraction must lie in (0, 1)");
  }
  const auto n = data.size();
  const auto n_train = static_cast<std::ptrdiff_t>(std::ceil(static_cast<double>(n) * train_fraction));
  for (int attempt = 0; attempt < kMaxSplitRetries; ++attempt) {
    std::vector<std::ptrdiff_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::ptrdiff_t> tr(perm.begin(), perm.begin() + n_train);
    std::vector<std::ptrdiff_t> te(perm.begin() + n_train, perm.end());
    bool neg = false;
    bool pos = false;
    for (auto i : tr) (data.y[static_cast<std::size_t>(i)] < 0 ? neg : pos) = true;
    if (!(neg && pos)) continue;
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    return {data.subset(tr), data.subset(te)};
  }
  throw DataError("split: could not draw a training part containing both classes");
}

enum class StatsMode { kTrainOnly, kGlobal };

inline constexpr double kStdFloor = 1e-12;

// Per-feature standardisation followed by per-instance unit L2 norm.
struct Preprocessor {
  Vector mean;
  Vector stddev;

  static Preprocessor fit(const RowMatrix& x) {
    if (x.rows() == 0) throw UsageError("preprocess: empty training set");
    Preprocessor p;
    p.mean = x.colwise().mean().transpose();
    const RowMatrix centered = x.rowwise() - p.mean.transpose();
    p.stddev = (centered.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt().transpose();
    return p;
  }

  [[nodiscard]] RowMatrix standardize(const RowMatrix& x) const {
    RowMatrix out = x.rowwise() - mean.transpose();
    for (std::ptrdiff_t j = 0; j < out.cols(); ++j) {
      if (stddev(j) >= kStdFloor) out.col(j) /= stddev(j);
    }
    return out;
  }

  [[nodiscard]] LabeledDataset apply(const LabeledDataset& data) const {
    require_same_dim(data.dim(), mean.size(), "Preprocessor::apply");
    LabeledDataset out{standardize(data.x), data.y};
    for (std::ptrdiff_t i = 0; i < out.size(); ++i) {
      const double norm = out.x.row(i).norm();
      if (norm > 0.0) out.x.row(i) /= norm;
    }
    return out;
  }
};

inline Preprocessor fit_preprocessor(const LabeledDataset& train, const LabeledDataset& test,
                                     StatsMode mode) {
  if (mode == StatsMode::kTrainOnly || test.size() == 0) return Preprocessor::fit(train.x);
  RowMatrix all(train.size() + test.size(), train.dim());
  all << train.x, test.x;
  return Preprocessor::fit(all);
}

inline std::pair<LabeledDataset, LabeledDataset> preprocess(const LabeledDataset& train,
                                                            const LabeledDataset& test,
                                                            StatsMode mode = StatsMode::kTrainOnly) {
  const Preprocessor p = fit_preprocessor(train, test, mode);
  return {p.apply(train), test.size() == 0 ? test : p.apply(test)};
}

}  // namespace irml
