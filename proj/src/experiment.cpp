#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "smag/harness.hpp"

namespace smag::harness {

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

double num(const Json& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return j[key].get<double>();
}

std::int64_t integer(const Json& j, const char* key, std::int64_t def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
  return j[key].get<std::int64_t>();
}

bool boolean(const Json& j, const char* key, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean()) throw ConfigError(std::string("'") + key + "' must be true or false");
  return j[key].get<bool>();
}

std::string text(const Json& j, const char* key, const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

std::uint64_t ceil_div(Index a, Index b) { return static_cast<std::uint64_t>((a + b - 1) / b); }

ProblemBundle build_pu(const Json& p) {
  check_keys(p, {"kind", "pi_p", "batch_pos", "batch_unl", "data"}, "problem");
  PuParams params;
  params.pi_p = num(p, "pi_p", 0.5);
  params.batch_pos = integer(p, "batch_pos", 64);
  params.batch_unl = integer(p, "batch_unl", 64);
  if (!p.contains("data")) throw ConfigError("pu problem needs a 'data' section");
  const Json& d = p["data"];
  auto data = std::make_shared<PuData>();
  if (d.contains("synthetic")) {
    check_keys(d, {"synthetic"}, "problem.data");
    const Json& s = d["synthetic"];
    check_keys(s, {"n_pos", "n_unl", "d", "sep", "seed"}, "problem.data.synthetic");
    *data = synth_gaussian_pu(integer(s, "n_pos", 500), integer(s, "n_unl", 2000), integer(s, "d", 10),
                              num(s, "sep", 1.5), params.pi_p, static_cast<std::uint64_t>(integer(s, "seed", 0)));
  } else {
    check_keys(d, {"positives", "unlabeled", "normalize", "dimension"}, "problem.data");
    LibsvmOptions lo;
    lo.dimension = integer(d, "dimension", 0);
    lo.normalize = false;
    data->positives = load_libsvm(text(d, "positives", ""), lo);
    data->unlabeled = load_libsvm(text(d, "unlabeled", ""), lo);
    const Index dim = std::max(data->positives.dim, data->unlabeled.dim);
    data->positives.dim = data->unlabeled.dim = dim;
    data->positives.features.conservativeResize(data->positives.size(), dim);
    data->unlabeled.features.conservativeResize(data->unlabeled.size(), dim);
    if (boolean(d, "normalize", true)) {
      // One scale for both sets so that the model sees a single feature space.
      const RealVec scale = [&] {
        LabeledDataset all;
        all.dim = dim;
        std::vector<Eigen::Triplet<double>> trip;
        Index r = 0;
        for (const LabeledDataset* set : {&data->positives, &data->unlabeled}) {
          for (Index i = 0; i < set->size(); ++i, ++r) {
            for (SparseRows::InnerIterator it(set->features, i); it; ++it) trip.emplace_back(r, it.index(), it.value());
            all.labels.push_back(1);
          }
        }
        all.features.resize(r, dim);
        all.features.setFromTriplets(trip.begin(), trip.end());
        return normalize_max_abs(all);
      }();
      for (LabeledDataset* set : {&data->positives, &data->unlabeled}) {
        for (Index i = 0; i < set->features.outerSize(); ++i) {
          for (SparseRows::InnerIterator it(set->features, i); it; ++it) it.valueRef() /= scale(it.index());
        }
      }
    }
  }
  ProblemBundle b;
  b.kind = "pu";
  b.pu = data;
  b.problem = make_pu_problem(data, params);
  b.iters_per_epoch = std::max(ceil_div(data->positives.size(), params.batch_pos),
                               ceil_div(data->unlabeled.size(), params.batch_unl));
  return b;
}

ProblemBundle build_pauc(const Json& p) {
  check_keys(p, {"kind", "rho", "c", "alpha_fair", "lambda0", "batch_pos", "batch_neg", "batch_fair", "adv_radius",
                 "data", "test_fraction", "split_seed"},
             "problem");
  PaucParams params;
  params.rho = num(p, "rho", 0.3);
  params.c = num(p, "c", 1.0);
  params.alpha_fair = num(p, "alpha_fair", 0.0);
  params.lambda0 = num(p, "lambda0", 1.0);
  params.batch_pos = integer(p, "batch_pos", 32);
  params.batch_neg = integer(p, "batch_neg", 32);
  params.batch_fair = integer(p, "batch_fair", 64);
  params.adv_radius = num(p, "adv_radius", 2.0);
  params.validate();
  if (!p.contains("data")) throw ConfigError("pauc_fair problem needs a 'data' section");
  const Json& d = p["data"];
  LabeledDataset all;
  if (d.contains("synthetic")) {
    check_keys(d, {"synthetic", "normalize"}, "problem.data");
    const Json& s = d["synthetic"];
    check_keys(s, {"n", "d", "seed"}, "problem.data.synthetic");
    all = synth_biased_fair(integer(s, "n", 4000), integer(s, "d", 20), static_cast<std::uint64_t>(integer(s, "seed", 0)));
    if (boolean(d, "normalize", true)) normalize_max_abs(all);
  } else {
    check_keys(d, {"libsvm", "attributes", "normalize", "dimension", "threshold"}, "problem.data");
    LibsvmOptions lo;
    lo.dimension = integer(d, "dimension", 0);
    lo.threshold = num(d, "threshold", 0.0);
    lo.normalize = boolean(d, "normalize", true);
    all = load_libsvm(text(d, "libsvm", ""), lo);
    if (d.contains("attributes")) all.sensitive = load_attributes(text(d, "attributes", ""));
    all.validate();
  }
  const double test_fraction = num(p, "test_fraction", 0.2);
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in [0, 1)");
  auto [train, test] = split_dataset(all, 1.0 - test_fraction, static_cast<std::uint64_t>(integer(p, "split_seed", 0)));

  ProblemBundle b;
  b.kind = "pauc_fair";
  b.pauc_params = params;
  auto pd = std::make_shared<PaucData>(std::move(train));
  b.pauc_train = pd;
  if (test.size() > 0) b.pauc_test = std::move(test);
  b.problem = pauc_fair_problem(pd, params);
  b.iters_per_epoch = std::max(ceil_div(pd->n_pos(), params.batch_pos), ceil_div(pd->n_neg(), params.batch_neg));
  return b;
}

ProblemBundle simple(DMaxProblem problem, const std::string& kind) {
  ProblemBundle b;
  b.problem = std::move(problem);
  b.kind = kind;
  return b;
}

}  // namespace

ProblemBundle build_problem(const Json& p) {
  if (!p.is_object() || !p.contains("kind")) throw ConfigError("problem section needs a 'kind'");
  const std::string kind = text(p, "kind", "");
  try {
    if (kind == "onedim_dwc") {
      check_keys(p, {"kind", "a", "b", "c1", "kappa_phi", "kappa_psi", "sigma", "allow_unbounded"}, "problem");
      OneDimDwcParams q;
      q.a = num(p, "a", 1.0);
      q.b = num(p, "b", 0.5);
      q.c1 = num(p, "c1", 0.0);
      q.kappa_phi = num(p, "kappa_phi", 0.0);
      q.kappa_psi = num(p, "kappa_psi", 0.0);
      q.sigma = num(p, "sigma", 0.0);
      q.allow_unbounded = boolean(p, "allow_unbounded", false);
      return simple(make_onedim_dwc(q), kind);
    }
    if (kind == "quadratic_dwc") {
      check_keys(p, {"kind", "a", "b", "dim", "sigma"}, "problem");
      return simple(make_quadratic_dwc(num(p, "a", 1.0), num(p, "b", 0.0), integer(p, "dim", 1), num(p, "sigma", 0.0)), kind);
    }
    if (kind == "quadratic_minmax") {
      check_keys(p, {"kind", "dim", "sigma"}, "problem");
      return simple(make_quadratic_minmax(integer(p, "dim", 1), num(p, "sigma", 0.0)), kind);
    }
    if (kind == "huber_dmax") {
      check_keys(p, {"kind", "dim", "sigma"}, "problem");
      return simple(make_huber_dmax(integer(p, "dim", 1), num(p, "sigma", 0.0)), kind);
    }
    if (kind == "pu") return build_pu(p);
    if (kind == "pauc_fair") return build_pauc(p);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown problem kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

namespace {

enum class Algo { smag_dmax, smag_dwc, smag_minmax, sgd, sgda };

Algo parse_algo(const std::string& s) {
  if (s == "smag-dmax") return Algo::smag_dmax;
  if (s == "smag-dwc") return Algo::smag_dwc;
  if (s == "smag-minmax") return Algo::smag_minmax;
  if (s == "sgd") return Algo::sgd;
  if (s == "sgda") return Algo::sgda;
  throw ConfigError("unknown algorithm '" + s + "' (expected smag-dmax, smag-dwc, smag-minmax, sgd or sgda)");
}

Mode algo_mode(Algo a) {
  switch (a) {
    case Algo::smag_dwc:
      return Mode::dwc;
    case Algo::smag_minmax:
      return Mode::minmax;
    default:
      return Mode::dmax;
  }
}

bool is_smag(Algo a) { return a == Algo::smag_dmax || a == Algo::smag_dwc || a == Algo::smag_minmax; }

struct Plan {
  Json config;
  Algo algo = Algo::smag_dwc;
  ProblemBundle bundle;
  std::uint64_t t_total = 0;
  std::vector<std::uint64_t> seeds;
  std::uint64_t trace_every = 1;
  RealVec x0;
  Schedule sched;
  BaselineSchedule base_sched;
  SampleSharing sharing = SampleSharing::independent;
  bool record_wall_time = false;
  bool exact_diag = true;
  double diag_gamma = 0.0;
  ProxOptions prox;
  std::filesystem::path out_dir;
  unsigned threads = 0;
  std::vector<std::string> warnings;
};

StepDecay decay_from(const Json& s, std::uint64_t iters_per_epoch) {
  StepDecay d;
  d.factor = num(s, "decay_factor", 10.0);
  if (!(d.factor >= 1.0)) throw ConfigError("decay_factor must be at least 1");
  auto read = [&](const char* key, std::uint64_t scale) {
    if (!s.contains(key)) return;
    if (!s[key].is_array()) throw ConfigError(std::string("'") + key + "' must be an array of integers");
    for (const Json& v : s[key]) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(std::string("'") + key + "' entries must be nonnegative integers");
      }
      d.milestones.push_back(static_cast<std::uint64_t>(v.get<std::int64_t>()) * scale);
    }
  };
  read("milestones", 1);
  read("milestone_epochs", iters_per_epoch);
  std::sort(d.milestones.begin(), d.milestones.end());
  return d;
}

Plan make_plan(const Json& cfg, const std::filesystem::path& out_root) {
  check_keys(cfg,
             {"problem", "algorithm", "schedule", "T", "epochs", "seeds", "trace_every", "x0", "sharing", "output_dir",
              "record_wall_time", "threads", "diagnostics", "prox"},
             "config");
  Plan plan;
  plan.config = cfg;
  if (!cfg.contains("problem")) throw ConfigError("config needs a 'problem' section");
  if (!cfg.contains("algorithm")) throw ConfigError("config needs an 'algorithm'");
  plan.algo = parse_algo(text(cfg, "algorithm", ""));
  plan.bundle = build_problem(cfg["problem"]);
  const DMaxProblem& prob = plan.bundle.problem;

  if (cfg.contains("T") && cfg.contains("epochs")) throw ConfigError("give either 'T' or 'epochs', not both");
  if (cfg.contains("T")) {
    const std::int64_t T = integer(cfg, "T", 0);
    if (T < 0) throw ConfigError("T must be nonnegative");
    plan.t_total = static_cast<std::uint64_t>(T);
  } else if (cfg.contains("epochs")) {
    const std::int64_t e = integer(cfg, "epochs", 0);
    if (e < 0) throw ConfigError("epochs must be nonnegative");
    plan.t_total = static_cast<std::uint64_t>(e) * plan.bundle.iters_per_epoch;
  } else {
    throw ConfigError("config needs 'T' or 'epochs'");
  }

  if (cfg.contains("seeds")) {
    if (!cfg["seeds"].is_array() || cfg["seeds"].empty()) throw ConfigError("'seeds' must be a non-empty array");
    for (const Json& s : cfg["seeds"]) {
      if (!s.is_number_integer() || s.get<std::int64_t>() < 0) throw ConfigError("seeds must be nonnegative integers");
      plan.seeds.push_back(static_cast<std::uint64_t>(s.get<std::int64_t>()));
    }
  } else {
    plan.seeds = {0};
  }
  const std::int64_t every = integer(cfg, "trace_every", 1);
  if (every < 1) throw ConfigError("trace_every must be positive");
  plan.trace_every = static_cast<std::uint64_t>(every);

  plan.x0 = RealVec::Zero(prob.dim_x);
  if (cfg.contains("x0")) {
    const Json& x = cfg["x0"];
    if (x.is_number()) {
      plan.x0.setConstant(x.get<double>());
    } else if (x.is_array()) {
      if (static_cast<Index>(x.size()) != prob.dim_x) throw ConfigError("x0 has the wrong dimension");
      for (Index i = 0; i < prob.dim_x; ++i) {
        if (!x[static_cast<std::size_t>(i)].is_number()) throw ConfigError("x0 entries must be numbers");
        plan.x0(i) = x[static_cast<std::size_t>(i)].get<double>();
      }
    } else {
      throw ConfigError("x0 must be a number or an array");
    }
    if (!plan.x0.allFinite()) throw ConfigError("x0 must be finite");
  }

  const std::string sharing = text(cfg, "sharing", "independent");
  if (sharing == "shared") {
    plan.sharing = SampleSharing::shared;
  } else if (sharing != "independent") {
    throw ConfigError("sharing must be 'independent' or 'shared'");
  }
  plan.record_wall_time = boolean(cfg, "record_wall_time", false);
  const std::int64_t threads = integer(cfg, "threads", 0);
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  plan.threads = static_cast<unsigned>(threads);

  if (cfg.contains("diagnostics")) {
    const Json& d = cfg["diagnostics"];
    check_keys(d, {"exact", "gamma"}, "diagnostics");
    plan.exact_diag = boolean(d, "exact", true);
    plan.diag_gamma = num(d, "gamma", 0.0);
  }
  if (cfg.contains("prox")) {
    const Json& p = cfg["prox"];
    check_keys(p, {"tol", "max_inner"}, "prox");
    plan.prox.tol = num(p, "tol", plan.prox.tol);
    plan.prox.max_inner = integer(p, "max_inner", plan.prox.max_inner);
    if (!(plan.prox.tol > 0.0) || plan.prox.max_inner < 1) throw ConfigError("prox tol and max_inner must be positive");
  }

  if (!cfg.contains("schedule")) throw ConfigError("config needs a 'schedule' section");
  const Json& s = cfg["schedule"];
  const StepDecay decay = decay_from(s, plan.bundle.iters_per_epoch);
  try {
    if (is_smag(plan.algo)) {
      check_keys(s, {"source", "gamma", "eta0", "eta1", "epsilon", "init_gap", "milestones", "milestone_epochs",
                     "decay_factor", "strict"},
                 "schedule");
      const Mode mode = algo_mode(plan.algo);
      if (mode == Mode::minmax && prob.has_psi()) throw ConfigError("smag-minmax needs a problem without a psi component");
      if (mode == Mode::dwc && (prob.dim_y() > 0 || prob.dim_z() > 0)) {
        throw ConfigError("smag-dwc needs a problem without dual variables");
      }
      const std::string source = text(s, "source", "manual");
      if (!s.contains("gamma")) throw ConfigError("schedule needs 'gamma'");
      const double gamma = num(s, "gamma", 0.0);
      if (source == "theory") {
        if (!s.contains("epsilon")) throw ConfigError("theory schedule needs 'epsilon'");
        plan.sched = schedule_from_theory(prob.constants, gamma, num(s, "epsilon", 0.0), mode, num(s, "init_gap", 1.0));
      } else if (source == "manual") {
        if (!s.contains("eta0") || !s.contains("eta1")) throw ConfigError("manual schedule needs 'eta0' and 'eta1'");
        plan.sched = manual_schedule(prob.constants, mode, gamma, num(s, "eta0", 0.0), num(s, "eta1", 0.0),
                                     std::max<std::uint64_t>(plan.t_total, 1));
        if (s.contains("epsilon")) plan.sched.epsilon = num(s, "epsilon", 0.0);
      } else {
        throw ConfigError("schedule source must be 'theory' or 'manual'");
      }
      plan.sched.t_total = std::max<std::uint64_t>(plan.t_total, 1);
      plan.sched.decay = decay;
      plan.warnings = schedule_violations(plan.sched, prob.constants, mode);
      if (!plan.warnings.empty() && (source == "theory" || boolean(s, "strict", false))) {
        std::string msg = "schedule violates its invariants:";
        for (const auto& w : plan.warnings) msg += " " + w + ";";
        throw ConfigError(msg);
      }
    } else {
      check_keys(s, {"lr", "lr_x", "lr_y", "milestones", "milestone_epochs", "decay_factor"}, "schedule");
      plan.base_sched.lr_x = s.contains("lr_x") ? num(s, "lr_x", 0.0) : num(s, "lr", 0.0);
      plan.base_sched.lr_y = s.contains("lr_y") ? num(s, "lr_y", 0.0) : num(s, "lr", 0.0);
      if (!(plan.base_sched.lr_x > 0.0)) throw ConfigError("baseline schedule needs a positive 'lr' or 'lr_x'");
      if (plan.algo == Algo::sgda && !(plan.base_sched.lr_y > 0.0)) throw ConfigError("sgda needs a positive 'lr_y'");
      if (plan.algo == Algo::sgd && (prob.dim_y() > 0 || prob.dim_z() > 0)) {
        throw ConfigError("sgd needs a problem without dual variables");
      }
      if (plan.algo == Algo::sgda && prob.has_psi()) throw ConfigError("sgda needs a problem without a psi component");
      plan.base_sched.t_total = std::max<std::uint64_t>(plan.t_total, 1);
      plan.base_sched.decay = decay;
      if (plan.diag_gamma < 0.0) throw ConfigError("diagnostics.gamma must be nonnegative");
    }
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }

  plan.out_dir = out_root / text(cfg, "output_dir", "out");
  return plan;
}

std::string stationarity_label(const Plan& plan) {
  const DMaxProblem& p = plan.bundle.problem;
  if (is_smag(plan.algo)) {
    return plan.exact_diag && p.exact ? "exact_envelope_grad" : "proxy_G_norm";
  }
  return plan.diag_gamma > 0.0 && p.exact ? "exact_envelope_grad" : "proxy_update_norm";
}

void add_test_metrics(const Plan& plan, SeedOutcome& out) {
  const ProblemBundle& b = plan.bundle;
  if (b.kind != "pauc_fair" || !b.pauc_test) return;
  const LabeledDataset& test = *b.pauc_test;
  const RealVec s = linear_scores(out.final_x, test);
  const std::vector<double> scores(s.data(), s.data() + s.size());
  if (test.sensitive.empty()) {
    out.extra.emplace_back("test_pauc", partial_auc(scores, test.labels, b.pauc_params.rho));
    return;
  }
  const FairnessReport r = fairness_metrics(scores, test.labels, test.sensitive, 0.0, b.pauc_params.rho);
  out.extra.emplace_back("test_pauc", r.pauc);
  out.extra.emplace_back("test_dp", r.dp);
  out.extra.emplace_back("test_eop", r.eop);
  out.extra.emplace_back("test_eod", r.eod);
}

SeedOutcome run_seed(const Plan& plan, std::uint64_t seed, std::size_t index, const std::string& hash) {
  SeedOutcome out;
  out.seed = seed;
  const DMaxProblem& prob = plan.bundle.problem;
  RngStream rng(seed, 0);
  std::optional<std::uint64_t> t_bar;

  if (plan.t_total == 0) {
    out.final_x = plan.x0;
    out.returned = plan.x0;
  } else if (is_smag(plan.algo)) {
    RunOptions ro;
    ro.trace_every = plan.trace_every;
    ro.step.sharing = plan.sharing;
    ro.exact_diagnostics = plan.exact_diag;
    ro.record_wall_time = plan.record_wall_time;
    ro.prox = plan.prox;
    RunResult r = run(prob, algo_mode(plan.algo), initial_state(prob, plan.x0), plan.sched, rng, ro);
    out.trace = std::move(r.trace);
    out.final_x = r.final_state.x;
    out.returned = r.returned.size() ? r.returned : r.final_state.x;
    out.aborted = r.aborted;
    out.failure = r.failure;
    t_bar = r.t_bar;
  } else {
    const BaselineKind kind = plan.algo == Algo::sgd ? BaselineKind::sgd : BaselineKind::sgda;
    BaselineRunOptions bo;
    bo.trace_every = plan.trace_every;
    bo.sharing = plan.sharing;
    bo.diag_gamma = plan.diag_gamma;
    bo.record_wall_time = plan.record_wall_time;
    bo.prox = plan.prox;
    BaselineRunResult r = run_baseline(kind, prob, baseline_initial_state(kind, prob, plan.x0), plan.base_sched, rng, bo);
    out.trace = std::move(r.trace);
    out.final_x = r.final_state.x;
    out.returned = r.final_state.x;
    out.aborted = r.aborted;
    out.failure = r.failure;
  }

  out.final_objective = prob.objective && out.final_x.allFinite() ? prob.objective(out.final_x) : std::nan("");
  out.final_stationarity = out.trace.empty() ? std::nan("") : out.trace.back().stationarity;
  if (!out.aborted) add_test_metrics(plan, out);

  MetaList meta{{"config_hash", hash},
                {"algorithm", text(plan.config, "algorithm", "")},
                {"problem", plan.bundle.kind},
                {"seed", std::to_string(seed)},
                {"stationarity", stationarity_label(plan)},
                {"objective", plan.bundle.problem.objective ? "full_data_F" : "unavailable"},
                {"iterations", std::to_string(plan.t_total)}};
  if (t_bar) meta.emplace_back("t_bar", std::to_string(*t_bar));
  for (const auto& w : plan.warnings) meta.emplace_back("schedule_warning", w);
  meta.emplace_back("status", out.aborted ? "aborted: " + out.failure : "ok");

  std::ostringstream name;
  name << "trace_" << index << "_seed" << seed << (out.aborted ? ".partial" : "") << ".csv";
  out.trace_path = plan.out_dir / name.str();
  std::ofstream f(out.trace_path);
  if (!f) throw std::runtime_error("cannot write " + out.trace_path.string());
  write_trace_csv(f, out.trace, meta);
  return out;
}

void write_summary(const Plan& plan, const std::string& hash, const std::vector<SeedOutcome>& seeds,
                   const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# config_hash=" << hash << "\n";
  f << "# algorithm=" << text(plan.config, "algorithm", "") << "\n";
  f << "# problem=" << plan.bundle.kind << "\n";
  f << "# iterations=" << plan.t_total << "\n";
  if (plan.t_total == 0) f << "# note=zero iterations; final metrics are taken at x0\n";
  std::size_t aborted = 0;
  for (const auto& s : seeds) aborted += s.aborted;
  f << "# status=" << (aborted ? std::to_string(aborted) + " seed(s) aborted" : std::string("ok")) << "\n";
  f << "metric,mean,std,n\n";

  auto emit = [&](const std::string& name, const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu", mean, sd, v.size());
    f << name << "," << buf << "\n";
  };
  std::vector<double> obj, stat;
  for (const auto& s : seeds) {
    obj.push_back(s.final_objective);
    stat.push_back(s.final_stationarity);
  }
  emit("final_objective", obj);
  emit("final_stationarity", stat);
  if (!seeds.empty()) {
    for (std::size_t k = 0; k < seeds.front().extra.size(); ++k) {
      std::vector<double> v;
      for (const auto& s : seeds) {
        if (k < s.extra.size()) v.push_back(s.extra[k].second);
      }
      if (v.size() == seeds.size()) emit(seeds.front().extra[k].first, v);
    }
  }
}

}  // namespace

ExperimentOutcome run_experiment(const Json& config, const std::filesystem::path& out_root, std::ostream& log) {
  ExperimentOutcome res;
  Plan plan;
  try {
    plan = make_plan(config, out_root);
  } catch (const ConfigError& e) {
    res.exit_code = 2;
    res.message = std::string("invalid config: ") + e.what();
    log << res.message << "\n";
    return res;
  } catch (const ParseError& e) {
    res.exit_code = 2;
    res.message = std::string("invalid data: ") + e.what();
    log << res.message << "\n";
    return res;
  }
  for (const auto& w : plan.warnings) log << "warning: schedule " << w << "\n";

  res.config_hash = config_hash(config);
  res.output_dir = plan.out_dir;
  std::filesystem::create_directories(plan.out_dir);

  const std::size_t n = plan.seeds.size();
  res.seeds.resize(n);
  unsigned workers = plan.threads ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::string worker_error;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        res.seeds[i] = run_seed(plan, plan.seeds[i], i, res.config_hash);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (worker_error.empty()) worker_error = e.what();
        res.seeds[i].seed = plan.seeds[i];
        res.seeds[i].aborted = true;
        res.seeds[i].failure = e.what();
        res.seeds[i].final_objective = res.seeds[i].final_stationarity = std::nan("");
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < workers; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  res.summary_path = plan.out_dir / "summary.csv";
  write_summary(plan, res.config_hash, res.seeds, res.summary_path);

  std::size_t aborted = 0;
  for (const auto& s : res.seeds) {
    if (s.aborted) {
      ++aborted;
      log << "seed " << s.seed << " aborted: " << s.failure << "\n";
    }
  }
  if (aborted) {
    res.exit_code = 3;
    res.message = std::to_string(aborted) + " of " + std::to_string(n) + " seed(s) aborted";
  } else {
    res.message = "ok";
  }
  return res;
}

}  // namespace smag::harness
