#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "smag/harness.hpp"

namespace smag::harness {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_num(const std::string& s, std::size_t line) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::runtime_error("trace csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::runtime_error("trace csv line " + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const std::vector<RunRecord>& rows, const MetaList& meta) {
  for (const auto& [k, v] : meta) out << "# " << k << "=" << v << "\n";
  out << kTraceHeader << "\n";
  for (const RunRecord& r : rows) {
    out << r.t << "," << fmt(r.objective) << "," << fmt(r.stationarity) << "," << fmt(r.p_t) << ","
        << fmt(r.elapsed_ms) << "," << r.seed << "\n";
  }
}

std::optional<std::string> TraceFile::find(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return std::nullopt;
}

TraceFile read_trace_csv(std::istream& in) {
  TraceFile tf;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body.erase(0, 1);
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        tf.meta.emplace_back(body, "");
      } else {
        tf.meta.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      }
      continue;
    }
    if (!header) {
      if (line != kTraceHeader) throw std::runtime_error("trace csv: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw std::runtime_error("trace csv line " + std::to_string(lineno) + ": expected 6 fields");
    RunRecord r;
    r.t = parse_u64(cells[0], lineno);
    r.objective = parse_num(cells[1], lineno);
    r.stationarity = parse_num(cells[2], lineno);
    r.p_t = parse_num(cells[3], lineno);
    r.elapsed_ms = parse_num(cells[4], lineno);
    r.seed = parse_u64(cells[5], lineno);
    tf.rows.push_back(r);
  }
  if (!header) throw std::runtime_error("trace csv: missing header");
  const bool exact = tf.find("stationarity") == std::optional<std::string>("exact_envelope_grad");
  for (RunRecord& r : tf.rows) r.stationarity_exact = exact;
  return tf;
}

std::string config_hash(const Json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json* node = &config;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) {
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    keys.push_back(key);
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override '" + path + "' descends into a non-object");
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = Json::object();
  }
  if (!node->is_object()) throw ConfigError("override '" + path + "' descends into a non-object");
  (*node)[keys.back()] = value;
}

std::filesystem::path output_root_from_env() {
  const char* env = std::getenv("SMAG_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path(".");
}

// ---------------------------------------------------------------------------

double partial_auc(const std::vector<double>& scores, const std::vector<int>& labels, double rho) {
  if (scores.size() != labels.size()) throw DimensionError("partial_auc: scores and labels differ in length");
  if (!(rho > 0.0 && rho <= 1.0)) throw ParameterError("partial_auc: rho must lie in (0, 1]");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericalError("partial_auc: non-finite score");
    (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  }
  if (pos.empty() || neg.empty()) throw ParameterError("partial_auc: need both positive and negative examples");
  std::sort(neg.begin(), neg.end(), std::greater<>());
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(rho * static_cast<double>(neg.size()) + 1e-9)));
  std::vector<double> top(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(top.begin(), top.end());
  double total = 0.0;
  for (double s : pos) {
    const auto lo = std::lower_bound(top.begin(), top.end(), s);
    const auto hi = std::upper_bound(top.begin(), top.end(), s);
    total += static_cast<double>(lo - top.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return total / (static_cast<double>(pos.size()) * static_cast<double>(k));
}

FairnessReport fairness_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                                const std::vector<int>& attrs, double threshold, double rho) {
  if (scores.size() != labels.size() || scores.size() != attrs.size()) {
    throw DimensionError("fairness_metrics: scores, labels and attributes differ in length");
  }
  struct Group {
    double n = 0, pred = 0, pos = 0, tp = 0, neg = 0, fp = 0;
  };
  Group g[2];  // [0]: a = +1, [1]: a = -1
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1 && labels[i] != -1) throw ParameterError("fairness_metrics: labels must be +1/-1");
    if (attrs[i] != 1 && attrs[i] != -1) throw ParameterError("fairness_metrics: attributes must be +1/-1");
    Group& grp = g[attrs[i] == 1 ? 0 : 1];
    const bool yhat = scores[i] > threshold;
    grp.n += 1;
    grp.pred += yhat;
    if (labels[i] == 1) {
      grp.pos += 1;
      grp.tp += yhat;
    } else {
      grp.neg += 1;
      grp.fp += yhat;
    }
  }
  const char* names[2] = {"a=+1", "a=-1"};
  for (int k = 0; k < 2; ++k) {
    if (g[k].n == 0) throw ParameterError(std::string("fairness_metrics: group ") + names[k] + " is empty");
    if (g[k].pos == 0) throw ParameterError(std::string("fairness_metrics: group ") + names[k] + " has no positive examples");
    if (g[k].neg == 0) throw ParameterError(std::string("fairness_metrics: group ") + names[k] + " has no negative examples");
  }
  FairnessReport r;
  r.dp = std::abs(g[0].pred / g[0].n - g[1].pred / g[1].n);
  const double dtpr = std::abs(g[0].tp / g[0].pos - g[1].tp / g[1].pos);
  const double dfpr = std::abs(g[0].fp / g[0].neg - g[1].fp / g[1].neg);
  r.eop = dtpr;
  r.eod = std::max(dtpr, dfpr);
  r.pauc = partial_auc(scores, labels, rho);
  return r;
}

}  // namespace smag::harness
