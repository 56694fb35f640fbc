#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "smag/harness.hpp"

using namespace smag;
using namespace smag::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("smag_harness_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json onedim_config() {
  return Json::parse(R"({
    "problem": {"kind": "onedim_dwc", "a": 1.0, "b": 0.5, "sigma": 0.2},
    "algorithm": "smag-dwc",
    "schedule": {"source": "manual", "gamma": 0.5, "eta0": 0.005, "eta1": 0.01},
    "T": 200,
    "seeds": [3, 4],
    "trace_every": 10,
    "x0": 2.0
  })");
}

// Brute-force partial AUC: every positive against the k highest-scoring
// negatives, ties counted as one half.
double pauc_oracle(const std::vector<double>& s, const std::vector<int>& l, double rho) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < s.size(); ++i) (l[i] == 1 ? pos : neg).push_back(s[i]);
  std::sort(neg.rbegin(), neg.rend());
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(rho * neg.size())));
  double acc = 0.0;
  for (double p : pos) {
    for (std::size_t j = 0; j < k; ++j) acc += p > neg[j] ? 1.0 : p == neg[j] ? 0.5 : 0.0;
  }
  return acc / static_cast<double>(pos.size() * k);
}

}  // namespace

TEST_CASE("trace CSV round-trips exactly") {
  std::vector<RunRecord> rows;
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  for (std::uint64_t t = 0; t < 20; ++t) {
    rows.push_back({t * 7, nd(gen), std::abs(nd(gen)) * 1e-9, true, t % 3 ? nd(gen) : std::nan(""), 0.0, 42});
  }
  std::stringstream ss;
  write_trace_csv(ss, rows, {{"config_hash", "abc"}, {"stationarity", "exact_envelope_grad"}});
  const TraceFile f = read_trace_csv(ss);
  CHECK(f.find("config_hash") == std::optional<std::string>("abc"));
  CHECK_FALSE(f.find("missing"));
  REQUIRE(f.rows.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(f.rows[i].t == rows[i].t);
    CHECK(f.rows[i].objective == rows[i].objective);
    CHECK(f.rows[i].stationarity == rows[i].stationarity);
    CHECK(f.rows[i].stationarity_exact);
    CHECK(std::isnan(f.rows[i].p_t) == std::isnan(rows[i].p_t));
    if (!std::isnan(rows[i].p_t)) CHECK(f.rows[i].p_t == rows[i].p_t);
    CHECK(f.rows[i].seed == 42);
  }
  std::stringstream bad("t,objective\n1,2\n");
  CHECK_THROWS(read_trace_csv(bad));
}

TEST_CASE("config hash is stable and sensitive") {
  Json a = onedim_config(), b = Json::parse(onedim_config().dump());
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b["T"] = 201;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("overrides") {
  Json c = onedim_config();
  apply_override(c, "schedule.eta0=0.01");
  CHECK(c["schedule"]["eta0"] == 0.01);
  apply_override(c, "output_dir=runs/x");
  CHECK(c["output_dir"] == "runs/x");
  apply_override(c, "seeds=[1,2,3]");
  CHECK(c["seeds"].size() == 3);
  apply_override(c, "diagnostics.gamma=0.25");
  CHECK(c["diagnostics"]["gamma"] == 0.25);
  CHECK_THROWS_AS(apply_override(c, "no_equals"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "T.x=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "a..b=1"), ConfigError);
}

TEST_CASE("experiments write traces tagged with the config hash and rerun identically") {
  const fs::path root = fresh_dir("rerun");
  std::ostringstream log;
  Json cfg = onedim_config();
  cfg["output_dir"] = "first";
  const ExperimentOutcome a = run_experiment(cfg, root, log);
  REQUIRE(a.exit_code == 0);
  cfg["output_dir"] = "second";
  const ExperimentOutcome b = run_experiment(cfg, root, log);
  REQUIRE(b.exit_code == 0);
  REQUIRE(a.seeds.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    std::ifstream in(a.seeds[i].trace_path);
    const TraceFile f = read_trace_csv(in);
    CHECK(f.find("config_hash").value_or("") == a.config_hash);
    CHECK(f.find("seed").value_or("") == std::to_string(a.seeds[i].seed));
    CHECK(f.rows.size() == 21);  // t = 0, 10, ..., 190 and the last step
    std::ifstream in2(b.seeds[i].trace_path);
    const TraceFile g = read_trace_csv(in2);
    REQUIRE(g.rows.size() == f.rows.size());
    for (std::size_t k = 0; k < f.rows.size(); ++k) {
      CHECK(f.rows[k].objective == g.rows[k].objective);
      CHECK(f.rows[k].p_t == g.rows[k].p_t);
    }
  }
  CHECK(a.config_hash != b.config_hash);  // output_dir is part of the config
  CHECK(slurp(a.summary_path).find("config_hash=" + a.config_hash) != std::string::npos);
}

TEST_CASE("experiment traces match a direct run") {
  const fs::path root = fresh_dir("direct");
  std::ostringstream log;
  Json cfg = onedim_config();
  cfg["seeds"] = {3};
  cfg["T"] = 3;
  cfg["trace_every"] = 1;
  const ExperimentOutcome out = run_experiment(cfg, root, log);
  REQUIRE(out.exit_code == 0);

  OneDimDwcParams q;
  q.a = 1.0;
  q.b = 0.5;
  q.sigma = 0.2;
  const DMaxProblem p = make_onedim_dwc(q);
  Schedule sch = manual_schedule(p.constants, Mode::dwc, 0.5, 0.005, 0.01, 3);
  RngStream rng(3, 0);
  const RunResult r = run(p, Mode::dwc, initial_state(p, RealVec::Constant(1, 2.0)), sch, rng);
  REQUIRE(out.seeds[0].trace.size() == 3);
  REQUIRE(r.trace.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out.seeds[0].trace[i].t == r.trace[i].t);
    CHECK(out.seeds[0].trace[i].objective == r.trace[i].objective);
    CHECK(out.seeds[0].trace[i].stationarity == r.trace[i].stationarity);
  }
  CHECK(out.seeds[0].final_x == r.final_state.x);
}

TEST_CASE("zero iterations yield a header-only trace and a summary note") {
  const fs::path root = fresh_dir("zero");
  std::ostringstream log;
  Json cfg = onedim_config();
  cfg["T"] = 0;
  const ExperimentOutcome out = run_experiment(cfg, root, log);
  REQUIRE(out.exit_code == 0);
  std::ifstream in(out.seeds[0].trace_path);
  CHECK(read_trace_csv(in).rows.empty());
  CHECK(slurp(out.seeds[0].trace_path).find(kTraceHeader) != std::string::npos);
  CHECK(slurp(out.summary_path).find("note=zero iterations") != std::string::npos);
  CHECK(out.seeds[0].final_x(0) == 2.0);
}

TEST_CASE("repeated seeds give identical files") {
  const fs::path root = fresh_dir("repeat");
  std::ostringstream log;
  Json cfg = onedim_config();
  cfg["seeds"] = {1, 1};
  const ExperimentOutcome out = run_experiment(cfg, root, log);
  REQUIRE(out.exit_code == 0);
  REQUIRE(out.seeds.size() == 2);
  CHECK(out.seeds[0].trace_path != out.seeds[1].trace_path);
  CHECK(slurp(out.seeds[0].trace_path) == slurp(out.seeds[1].trace_path));
}

TEST_CASE("invalid configurations are rejected with exit code 2") {
  const fs::path root = fresh_dir("invalid");
  std::ostringstream log;
  auto code = [&](const Json& c) { return run_experiment(c, root, log).exit_code; };
  Json c = onedim_config();
  c["schedule"]["gamma"] = -1.0;
  CHECK(code(c) == 2);
  c = onedim_config();
  c["typo"] = 1;
  CHECK(code(c) == 2);
  c = onedim_config();
  c["algorithm"] = "smag-minmax";
  CHECK(code(c) == 2);
  c = onedim_config();
  c["algorithm"] = "sgda";
  c["schedule"] = {{"lr", 0.1}};
  CHECK(code(c) == 2);
  c = onedim_config();
  c["schedule"] = {{"source", "theory"}, {"gamma", 0.5}};
  CHECK(code(c) == 2);
  c = onedim_config();
  c["x0"] = {1.0, 2.0};
  CHECK(code(c) == 2);
  c = onedim_config();
  c["epochs"] = 3;
  CHECK(code(c) == 2);
  c = onedim_config();
  c["problem"]["b"] = 2.0;
  CHECK(code(c) == 2);
}

TEST_CASE("manual schedules outside the theory bounds warn unless strict") {
  const fs::path root = fresh_dir("warn");
  std::ostringstream log;
  Json c = onedim_config();
  c["schedule"]["eta1"] = 10.0;
  const ExperimentOutcome out = run_experiment(c, root, log);
  REQUIRE(out.exit_code == 0);
  CHECK(slurp(out.seeds[0].trace_path).find("schedule_warning") != std::string::npos);
  c["schedule"]["strict"] = true;
  CHECK(run_experiment(c, root, log).exit_code == 2);
}

TEST_CASE("grad-check examples") {
  const Json quad = Json::parse(R"({"problem": {"kind": "quadratic_dwc", "a": 2.0, "b": 1.0, "dim": 3},
                                    "gamma": 0.5, "h": 1e-5, "n_points": 20, "seed": 1})");
  const GradCheckReport q = grad_check(quad);
  CHECK(q.points == 20);
  CHECK(q.max_rel_err < 1e-6);

  const Json onedim = Json::parse(R"({"problem": {"kind": "onedim_dwc", "a": 1.0, "b": 0.5},
                                      "gamma": 0.5, "h": 1e-5, "n_points": 20, "min_abs": 1.1, "seed": 2})");
  const GradCheckReport o = grad_check(onedim);
  CHECK(o.max_rel_err < 1e-4);

  Json bad = quad;
  bad["h"] = 0.0;
  CHECK_THROWS_AS(grad_check(bad), ConfigError);
  bad = quad;
  bad["gamma"] = -0.1;
  CHECK_THROWS_AS(grad_check(bad), ConfigError);
}

TEST_CASE("schedule printer reports intermediates and feasibility") {
  const Json cfg = Json::parse(R"({"constants": {"delta_phi": 1, "delta_psi": 1, "mu_phi": 1, "mu_psi": 1,
                                   "l_phi_yx": 1, "l_psi_zx": 1, "m_bound": 1},
                                   "gamma": 0.5, "epsilon": 0.1, "mode": "dmax"})");
  const ScheduleReport r = print_schedule(cfg);
  CHECK(r.machine["alpha"].get<double>() == doctest::Approx(0.25));
  CHECK(r.machine["tau"].get<double>() == doctest::Approx(0.00390625));
  CHECK(r.machine["nu"].get<double>() == doctest::Approx(0.125));
  CHECK(r.machine["l_f"].get<double>() == doctest::Approx(8.0));
  CHECK(r.machine["feasible"].get<bool>());
  CHECK(r.text.find("eta1") != std::string::npos);

  Json bad = cfg;
  bad["gamma"] = 2.0;  // gamma * delta >= 1
  CHECK_THROWS_AS(print_schedule(bad), ConfigError);
  bad = cfg;
  bad["constants"]["unknown"] = 1;
  CHECK_THROWS_AS(print_schedule(bad), ConfigError);
}

TEST_CASE("command line exits with 2 on an invalid schedule") {
  const fs::path dir = fresh_dir("cli");
  const fs::path cfg = dir / "sched.json";
  std::ofstream(cfg) << R"({"constants": {"delta_phi": 1}, "gamma": -0.5, "epsilon": 0.1})";
  const std::string cmd = std::string("\"") + SMAG_CLI_PATH + "\" schedule \"" + cfg.string() + "\" > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(st));
  CHECK(WEXITSTATUS(st) == 2);

  std::ofstream(cfg) << R"({"constants": {"delta_phi": 1}, "gamma": 0.5, "epsilon": 0.1})";
  const int ok = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(ok));
  CHECK(WEXITSTATUS(ok) == 0);
}

TEST_CASE("fairness examples") {
  // Group +1: 6 of 10 predicted positive; group -1: 3 of 10.
  std::vector<double> s;
  std::vector<int> l, a;
  for (int i = 0; i < 10; ++i) {
    s.push_back(i < 6 ? 1.0 : -1.0);
    l.push_back(i % 2 ? 1 : -1);
    a.push_back(1);
  }
  for (int i = 0; i < 10; ++i) {
    s.push_back(i < 3 ? 1.0 : -1.0);
    l.push_back(i % 2 ? 1 : -1);
    a.push_back(-1);
  }
  const FairnessReport r = fairness_metrics(s, l, a);
  CHECK(r.dp == doctest::Approx(0.3));
  // TPR: +1 has positives at 1,3,5 predicted (3/5); -1 has 1 (1/5).
  CHECK(r.eop == doctest::Approx(0.4));
  CHECK(r.eod == doctest::Approx(0.4));

  const std::vector<int> lab{1, 1, -1, -1, 1, -1}, att{1, -1, 1, -1, 1, -1};
  const std::vector<double> perfect{3, 2, -1, -2, 4, -3};
  const FairnessReport p = fairness_metrics(perfect, lab, att);
  CHECK(p.eop == 0.0);
  CHECK(p.pauc == 1.0);
  std::vector<double> reversed = perfect;
  for (double& v : reversed) v = -v;
  CHECK(partial_auc(reversed, lab, 0.3) == 0.0);

  // Both groups carry identical score/label multisets.
  const std::vector<double> twin{0.5, -0.2, 0.1, 0.5, -0.2, 0.1};
  const std::vector<int> tl{1, -1, 1, 1, -1, 1}, ta{1, 1, 1, -1, -1, -1};
  const FairnessReport t = fairness_metrics(twin, tl, ta);
  CHECK(t.dp == 0.0);
  CHECK(t.eop == 0.0);
  CHECK(t.eod == 0.0);

  try {
    fairness_metrics({1.0, -1.0}, {1, -1}, {1, 1});
    FAIL("expected an empty-group error");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("a=-1") != std::string::npos);
  }
}

TEST_CASE("partial AUC agrees with a brute-force count") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.4);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < 60; ++i) {
      l.push_back(coin(gen) ? 1 : -1);
      s.push_back(std::round(4 * (nd(gen) + 0.5 * l.back())) / 4);  // coarse grid forces ties
    }
    l[0] = 1;
    l[1] = -1;
    for (double rho : {0.05, 0.3, 1.0}) CHECK(partial_auc(s, l, rho) == doctest::Approx(pauc_oracle(s, l, rho)));
  }
}
