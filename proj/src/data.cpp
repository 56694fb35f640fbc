#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "smag/problems.hpp"

namespace smag {

using Triplet = Eigen::Triplet<double>;

void LabeledDataset::validate() const {
  if (features.rows() != size()) throw DimensionError("dataset: feature rows do not match label count");
  if (features.cols() != dim) throw DimensionError("dataset: feature columns do not match dimension");
  for (int l : labels) {
    if (l != 1 && l != -1) throw ParameterError("dataset: labels must be +1 or -1");
  }
  if (!sensitive.empty()) {
    if (static_cast<Index>(sensitive.size()) != size()) {
      throw DimensionError("dataset: sensitive attribute count does not match label count");
    }
    for (int a : sensitive) {
      if (a != 1 && a != -1) throw ParameterError("dataset: sensitive attributes must be +1 or -1");
    }
  }
}

double row_dot(const SparseRows& x, Index i, const RealVec& w) {
  double s = 0.0;
  for (SparseRows::InnerIterator it(x, i); it; ++it) s += it.value() * w(it.index());
  return s;
}

void add_row(const SparseRows& x, Index i, double c, RealVec& g) {
  for (SparseRows::InnerIterator it(x, i); it; ++it) g(it.index()) += c * it.value();
}

LabeledDataset subset(const LabeledDataset& data, const std::vector<Index>& rows) {
  LabeledDataset out;
  out.dim = data.dim;
  std::vector<Triplet> trip;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index i = rows[r];
    if (i < 0 || i >= data.size()) throw DimensionError("subset: row index out of range");
    for (SparseRows::InnerIterator it(data.features, i); it; ++it) {
      trip.emplace_back(static_cast<Index>(r), it.index(), it.value());
    }
    out.labels.push_back(data.labels[i]);
    if (!data.sensitive.empty()) out.sensitive.push_back(data.sensitive[i]);
  }
  out.features.resize(static_cast<Index>(rows.size()), data.dim);
  out.features.setFromTriplets(trip.begin(), trip.end());
  out.features.makeCompressed();
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data, double frac,
                                                         std::uint64_t seed) {
  if (!(frac >= 0.0 && frac <= 1.0)) throw ParameterError("split_dataset: fraction must lie in [0, 1]");
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  TokenRng r(RngStream(seed, 0x5b1171).draw());
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[r.index(i)]);
  }
  const auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(order.size())));
  std::vector<Index> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<Index> second(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  return {subset(data, first), subset(data, second)};
}

RealVec normalize_max_abs(LabeledDataset& data) {
  RealVec scale = RealVec::Ones(data.dim);
  RealVec maxabs = RealVec::Zero(data.dim);
  for (Index i = 0; i < data.features.outerSize(); ++i) {
    for (SparseRows::InnerIterator it(data.features, i); it; ++it) {
      maxabs(it.index()) = std::max(maxabs(it.index()), std::abs(it.value()));
    }
  }
  for (Index j = 0; j < data.dim; ++j) {
    if (maxabs(j) > 0.0) scale(j) = maxabs(j);
  }
  for (Index i = 0; i < data.features.outerSize(); ++i) {
    for (SparseRows::InnerIterator it(data.features, i); it; ++it) it.valueRef() /= scale(it.index());
  }
  return scale;
}

// ---------------------------------------------------------------------------
// LibSVM text format

namespace {

std::string format_parse_error(const std::string& path, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << path << ":" << line << ": " << what;
  return os.str();
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_index(const std::string& s, long long& out) {
  if (s.empty()) return false;
  for (char ch : s) {
    if (ch < '0' || ch > '9') return false;
  }
  errno = 0;
  out = std::strtoll(s.c_str(), nullptr, 10);
  return errno == 0;
}

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace

ParseError::ParseError(const std::string& path, std::size_t line, const std::string& what)
    : std::runtime_error(format_parse_error(path, line, what)), line_(line) {}

LabeledDataset load_libsvm(const std::string& path, const LibsvmOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (opts.dimension < 0) throw ParameterError("load_libsvm: dimension override must be nonnegative");

  std::vector<Triplet> trip;
  std::vector<int> labels;
  long long max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream tok(strip_comment(line));
    std::string label_s;
    if (!(tok >> label_s)) continue;  // blank or comment-only
    double label = 0.0;
    if (!parse_double(label_s, label)) throw ParseError(path, lineno, "bad label '" + label_s + "'");
    const Index row = static_cast<Index>(labels.size());
    labels.push_back(label > opts.threshold ? 1 : -1);

    long long prev = 0;
    std::string item;
    while (tok >> item) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw ParseError(path, lineno, "expected index:value, got '" + item + "'");
      const std::string key = item.substr(0, colon);
      if (key == "qid") continue;
      long long idx = 0;
      double val = 0.0;
      if (!parse_index(key, idx) || idx < 1) throw ParseError(path, lineno, "bad feature index '" + key + "'");
      if (!parse_double(item.substr(colon + 1), val)) throw ParseError(path, lineno, "bad value in '" + item + "'");
      if (idx <= prev) throw ParseError(path, lineno, "feature indices must be strictly increasing");
      if (opts.dimension > 0 && idx > opts.dimension) {
        throw ParseError(path, lineno, "feature index " + key + " exceeds dimension override");
      }
      prev = idx;
      max_index = std::max(max_index, idx);
      trip.emplace_back(row, static_cast<Index>(idx - 1), val);
    }
  }

  LabeledDataset d;
  d.dim = opts.dimension > 0 ? opts.dimension : static_cast<Index>(max_index);
  d.labels = std::move(labels);
  d.features.resize(d.size(), d.dim);
  d.features.setFromTriplets(trip.begin(), trip.end());
  d.features.makeCompressed();
  if (opts.normalize) normalize_max_abs(d);
  return d;
}

std::vector<int> load_attributes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream tok(strip_comment(line));
    std::string s;
    if (!(tok >> s)) continue;
    double v = 0.0;
    if (!parse_double(s, v) || (v != 1.0 && v != -1.0)) {
      throw ParseError(path, lineno, "attribute must be +1 or -1, got '" + s + "'");
    }
    out.push_back(v > 0 ? 1 : -1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators

namespace {

void dense_row(std::vector<Triplet>& trip, Index row, const RealVec& v) {
  for (Index j = 0; j < v.size(); ++j) trip.emplace_back(row, j, v(j));
}

LabeledDataset finish(std::vector<Triplet>& trip, std::vector<int> labels, std::vector<int> sensitive, Index d) {
  LabeledDataset out;
  out.dim = d;
  out.labels = std::move(labels);
  out.sensitive = std::move(sensitive);
  out.features.resize(out.size(), d);
  out.features.setFromTriplets(trip.begin(), trip.end());
  out.features.makeCompressed();
  return out;
}

RealVec gaussian_point(TokenRng& r, Index d, double shift) {
  RealVec v(d);
  for (Index j = 0; j < d; ++j) v(j) = r.normal();
  v(0) += shift;
  return v;
}

}  // namespace

PuData synth_gaussian_pu(Index n_pos, Index n_unl, Index d, double sep, double pi_p, std::uint64_t seed) {
  if (n_pos < 1 || n_unl < 1 || d < 1) throw ParameterError("synth_gaussian_pu: sizes must be positive");
  if (!(pi_p >= 0.0 && pi_p <= 1.0)) throw ParameterError("synth_gaussian_pu: pi_p must lie in [0, 1]");
  if (!std::isfinite(sep)) throw ParameterError("synth_gaussian_pu: sep must be finite");

  PuData out;
  RngStream pos_stream(seed, 1), unl_stream(seed, 2);
  std::vector<Triplet> trip;
  for (Index i = 0; i < n_pos; ++i) {
    TokenRng r(pos_stream.draw());
    dense_row(trip, i, gaussian_point(r, d, sep));
  }
  out.positives = finish(trip, std::vector<int>(static_cast<std::size_t>(n_pos), 1), {}, d);

  trip.clear();
  std::vector<int> truth;
  for (Index i = 0; i < n_unl; ++i) {
    TokenRng r(unl_stream.draw());
    const int y = r.uniform() < pi_p ? 1 : -1;
    truth.push_back(y);
    dense_row(trip, i, gaussian_point(r, d, y * sep));
  }
  out.unlabeled = finish(trip, std::move(truth), {}, d);
  return out;
}

LabeledDataset synth_biased_fair(Index n, Index d, std::uint64_t seed) {
  if (n < 2 || d < 4) throw ParameterError("synth_biased_fair: need n >= 2 and d >= 4");
  const Index q = d / 4;
  RngStream stream(seed, 3);
  std::vector<Triplet> trip;
  std::vector<int> labels, attrs;
  for (Index i = 0; i < n; ++i) {
    TokenRng r(stream.draw());
    const int a = r.uniform() < 0.5 ? 1 : -1;
    const int y = r.uniform() < (a == 1 ? 0.7 : 0.3) ? 1 : -1;
    RealVec v(d);
    for (Index j = 0; j < d; ++j) v(j) = r.normal();
    for (Index j = 0; j < q; ++j) v(j) += 0.6 * y;
    for (Index j = q; j < 2 * q; ++j) v(j) += 1.0 * a;
    dense_row(trip, i, v);
    labels.push_back(y);
    attrs.push_back(a);
  }
  return finish(trip, std::move(labels), std::move(attrs), d);
}

}  // namespace smag
