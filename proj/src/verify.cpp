#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "smag/harness.hpp"

namespace smag::harness {

namespace {

double num(const Json& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return j[key].get<double>();
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON cannot hold inf; saturated values are written as strings.
Json json_num(double v) { return std::isfinite(v) ? Json(v) : Json(std::isnan(v) ? "nan" : "inf"); }

}  // namespace

GradCheckReport grad_check(const Json& config) {
  if (!config.is_object() || !config.contains("problem")) throw ConfigError("grad-check config needs a 'problem'");
  const ProblemBundle bundle = build_problem(config["problem"]);
  const DMaxProblem& prob = bundle.problem;
  if (!prob.exact) throw ConfigError("grad-check needs a test problem with exact oracles");

  GradCheckReport rep;
  rep.gamma = num(config, "gamma", 0.5);
  rep.h = num(config, "h", 1e-5);
  const double radius = num(config, "radius", 3.0);
  const double min_abs = num(config, "min_abs", 0.0);
  const double margin = num(config, "kink_margin", 10.0 * rep.h);
  const auto n_points = static_cast<int>(num(config, "n_points", 20));
  const auto seed = static_cast<std::uint64_t>(num(config, "seed", 0));
  if (!(rep.h > 0.0)) throw ConfigError("grad-check: h must be positive");
  if (!(rep.gamma > 0.0)) throw ConfigError("grad-check: gamma must be positive");
  if (!(radius > 0.0) || min_abs < 0.0 || min_abs >= radius) throw ConfigError("grad-check: need 0 <= min_abs < radius");
  if (n_points < 1) throw ConfigError("grad-check: n_points must be positive");
  const double dmax = std::max(prob.constants.delta_phi, prob.has_psi() ? prob.constants.delta_psi : 0.0);
  if (rep.gamma * dmax >= 1.0) throw ConfigError("grad-check: gamma must be below 1/delta");

  ProxOptions po;
  po.tol = 1e-12;
  RngStream stream(seed, 7);
  const int max_attempts = 1000 * n_points;
  int attempts = 0;
  while (rep.points < n_points) {
    if (++attempts > max_attempts) {
      std::ostringstream os;
      os << "grad-check: only " << rep.points << " of " << n_points << " points found away from kinks after "
         << max_attempts << " draws";
      throw std::runtime_error(os.str());
    }
    TokenRng r(stream.draw());
    RealVec x(prob.dim_x);
    for (Index i = 0; i < x.size(); ++i) {
      const double mag = min_abs + (radius - min_abs) * r.uniform();
      x(i) = r.uniform() < 0.5 ? -mag : mag;
    }
    const double kd = prob.exact->kink_distance ? prob.exact->kink_distance(x, rep.gamma)
                                                : std::numeric_limits<double>::infinity();
    if (kd < margin + rep.h) {
      ++rep.rejected;
      continue;
    }
    const RealVec g = dmax_envelope_grad(prob, x, rep.gamma, po);
    RealVec fd(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      RealVec xp = x, xm = x;
      xp(i) += rep.h;
      xm(i) -= rep.h;
      fd(i) = (dmax_envelope_value(prob, xp, rep.gamma, po) - dmax_envelope_value(prob, xm, rep.gamma, po)) / (2.0 * rep.h);
    }
    const double denom = std::max({g.norm(), fd.norm(), 1e-8});
    rep.max_rel_err = std::max(rep.max_rel_err, (g - fd).norm() / denom);
    ++rep.points;
  }
  return rep;
}

// ---------------------------------------------------------------------------

ProblemConstants constants_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("'constants' must be an object");
  ProblemConstants c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (!it->is_number()) throw ConfigError("constant '" + k + "' must be a number");
    const double v = it->get<double>();
    if (k == "delta_phi") c.delta_phi = v;
    else if (k == "delta_psi") c.delta_psi = v;
    else if (k == "mu_phi") c.mu_phi = v;
    else if (k == "mu_psi") c.mu_psi = v;
    else if (k == "l_phi_yx") c.l_phi_yx = v;
    else if (k == "l_psi_zx") c.l_psi_zx = v;
    else if (k == "m_bound") c.m_bound = v;
    else throw ConfigError("unknown constant '" + k + "'");
  }
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ScheduleReport print_schedule(const ProblemConstants& c, double gamma, double epsilon, Mode mode, double init_gap) {
  ScheduleReport rep;
  rep.schedule = schedule_from_theory(c, gamma, epsilon, mode, init_gap);
  rep.violations = schedule_violations(rep.schedule, c, mode);
  const Schedule& s = rep.schedule;

  std::ostringstream os;
  os << "mode     = " << to_string(mode) << "\n"
     << "gamma    = " << g17(s.gamma) << "\n"
     << "epsilon  = " << g17(epsilon) << "\n"
     << "alpha    = " << g17(s.alpha) << "\n"
     << "tau      = " << g17(s.tau) << "\n"
     << "nu       = " << g17(s.nu) << "\n"
     << "L_F      = " << g17(s.l_f) << "\n"
     << "eta1     = " << g17(s.eta1) << "\n"
     << "eta0     = " << g17(s.eta0) << "\n"
     << "T_bound  = " << g17(s.t_bound) << "  (initial gap surrogate " << g17(init_gap) << ")\n"
     << "feasible = " << (rep.violations.empty() ? "yes" : "no") << "\n";
  for (const auto& v : rep.violations) os << "violation: " << v << "\n";
  rep.text = os.str();

  rep.machine = Json{{"mode", to_string(mode)},
                     {"gamma", s.gamma},
                     {"epsilon", epsilon},
                     {"alpha", s.alpha},
                     {"tau", s.tau},
                     {"nu", s.nu},
                     {"l_f", s.l_f},
                     {"eta1", s.eta1},
                     {"eta0", s.eta0},
                     {"t_bound", json_num(s.t_bound)},
                     {"t_total", s.t_total},
                     {"init_gap", init_gap},
                     {"feasible", rep.violations.empty()},
                     {"violations", rep.violations}};
  return rep;
}

ScheduleReport print_schedule(const Json& config) {
  if (!config.is_object()) throw ConfigError("schedule config must be an object");
  for (auto it = config.begin(); it != config.end(); ++it) {
    const std::string& k = it.key();
    if (k != "constants" && k != "gamma" && k != "epsilon" && k != "mode" && k != "init_gap") {
      throw ConfigError("unknown key '" + k + "' in schedule config");
    }
  }
  if (!config.contains("gamma") || !config.contains("epsilon")) throw ConfigError("schedule config needs gamma and epsilon");
  const ProblemConstants c = constants_from_json(config.value("constants", Json::object()));
  if (config.contains("mode") && !config["mode"].is_string()) throw ConfigError("'mode' must be a string");
  try {
    const Mode mode = parse_mode(config.value("mode", std::string("dmax")));
    return print_schedule(c, num(config, "gamma", 0.0), num(config, "epsilon", 0.0), mode, num(config, "init_gap", 1.0));
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace smag::harness
