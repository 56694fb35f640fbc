#include "smag/smag.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace smag {

Mode parse_mode(const std::string& s) {
  if (s == "dmax") return Mode::dmax;
  if (s == "dwc") return Mode::dwc;
  if (s == "minmax") return Mode::minmax;
  throw ParameterError("unknown mode '" + s + "' (expected dmax, dwc or minmax)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::dmax:
      return "dmax";
    case Mode::dwc:
      return "dwc";
    case Mode::minmax:
      return "minmax";
  }
  return "?";
}

double StepDecay::multiplier(std::uint64_t t) const {
  double m = 1.0;
  for (std::uint64_t ms : milestones) {
    if (t >= ms) m *= factor;
  }
  return m;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool uses_psi(Mode m) { return m != Mode::minmax; }

void check_gamma_range(const ProblemConstants& c, double gamma, Mode mode) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("schedule: gamma must be positive");
  auto check = [&](double delta, const char* name) {
    if (gamma * delta >= 1.0) {
      std::ostringstream os;
      os << "schedule: gamma=" << gamma << " must be below 1/" << name << "=" << 1.0 / delta;
      throw ParameterError(os.str());
    }
  };
  check(c.delta_phi, "delta_phi");
  if (uses_psi(mode)) check(c.delta_psi, "delta_psi");
}

// Term mu^1.5 gamma^2 alpha^1.5 / (4 L); unconstrained when L = 0.
double cross_term(double mu, double gamma, double alpha, double l) {
  if (l <= 0.0) return kInf;
  return std::pow(mu, 1.5) * gamma * gamma * std::pow(alpha, 1.5) / (4.0 * l);
}

double mode_alpha(const ProblemConstants& c, double gamma, Mode mode) {
  const double sphi = 1.0 / gamma - c.delta_phi;
  const double spsi = 1.0 / gamma - c.delta_psi;
  switch (mode) {
    case Mode::dmax:
      return std::min({sphi / 4.0, spsi / 4.0, c.mu_phi, c.mu_psi});
    case Mode::dwc:
      return std::min(sphi / 2.0, spsi / 2.0);
    case Mode::minmax:
      return std::min(sphi / 2.0, c.mu_phi);
  }
  return 0.0;
}

double mode_tau(const ProblemConstants& c, double gamma, double alpha, Mode mode) {
  const double base = gamma * gamma * alpha * alpha / 4.0;
  switch (mode) {
    case Mode::dmax:
      return std::min({base, cross_term(c.mu_phi, gamma, alpha, c.l_phi_yx),
                       cross_term(c.mu_psi, gamma, alpha, c.l_psi_zx)});
    case Mode::dwc:
      return base;
    case Mode::minmax:
      return std::min(base, cross_term(c.mu_phi, gamma, alpha, c.l_phi_yx));
  }
  return 0.0;
}

double mode_lf(const ProblemConstants& c, double gamma, Mode mode) {
  return uses_psi(mode) ? smoothness_constant(c.delta_phi, c.delta_psi, gamma)
                        : smoothness_constant(c.delta_phi, c.delta_phi, gamma);
}

double nu_of(double tau, double gamma, double alpha) { return std::min(1.0, 2.0 * tau / (gamma * gamma * alpha)); }

}  // namespace

Schedule schedule_from_theory(const ProblemConstants& c, double gamma, double epsilon, Mode mode,
                              double init_gap) {
  c.validate();
  check_gamma_range(c, gamma, mode);
  if (!(epsilon > 0.0)) throw ParameterError("schedule: epsilon must be positive");
  if (!(init_gap > 0.0)) throw ParameterError("schedule: init_gap must be positive");

  Schedule s;
  s.gamma = gamma;
  s.epsilon = epsilon;
  s.alpha = mode_alpha(c, gamma, mode);
  s.tau = mode_tau(c, gamma, s.alpha, mode);
  s.nu = nu_of(s.tau, gamma, s.alpha);
  s.l_f = mode_lf(c, gamma, mode);

  const double g2 = gamma * gamma;
  const double eps2 = epsilon * epsilon;
  const double m2 = c.m_bound * c.m_bound;
  const double denom_const = mode == Mode::minmax ? 384.0 : 768.0;
  const double min_at = std::min(s.alpha, s.tau);
  const double noise_limit = std::min(1.0, g2) * min_at * s.nu * s.alpha / (denom_const * s.tau * m2) * eps2;

  const double lim_phi = g2 * (1.0 / gamma - c.delta_phi) / 2.0;
  const double lim_psi = uses_psi(mode) ? g2 * (1.0 / gamma - c.delta_psi) / 2.0 : kInf;
  const double lim_lf = 1.0 / (2.0 * s.l_f * s.tau);
  s.eta1 = std::min({lim_phi, lim_psi, lim_lf, noise_limit});
  s.eta0 = s.tau * s.eta1;

  const double lead = 16.0 * init_gap / (std::min(1.0, 1.0 / g2) * min_at * s.nu * eps2);
  const double t_phi = 2.0 / (g2 * (1.0 / gamma - c.delta_phi));
  const double t_psi = uses_psi(mode) ? 2.0 / (g2 * (1.0 / gamma - c.delta_psi)) : 0.0;
  const double t_lf = 2.0 * s.l_f * s.tau;
  const double t_noise = denom_const * s.tau * m2 / (std::min(1.0, g2) * min_at * s.nu * s.alpha * eps2);
  s.t_bound = lead * std::max({t_phi, t_psi, t_lf, t_noise});
  constexpr double kMaxT = 1.8446744073709552e19;
  s.t_total = s.t_bound >= kMaxT ? std::numeric_limits<std::uint64_t>::max()
                                 : static_cast<std::uint64_t>(std::ceil(s.t_bound));
  return s;
}

Schedule manual_schedule(const ProblemConstants& c, Mode mode, double gamma, double eta0, double eta1,
                         std::uint64_t t_total) {
  c.validate();
  check_gamma_range(c, gamma, mode);
  if (!(eta0 > 0.0) || !(eta1 > 0.0)) throw ParameterError("schedule: eta0 and eta1 must be positive");
  Schedule s;
  s.gamma = gamma;
  s.eta0 = eta0;
  s.eta1 = eta1;
  s.tau = eta0 / eta1;
  s.alpha = mode_alpha(c, gamma, mode);
  s.nu = nu_of(s.tau, gamma, s.alpha);
  s.l_f = mode_lf(c, gamma, mode);
  s.t_total = t_total;
  s.t_bound = std::numeric_limits<double>::quiet_NaN();
  return s;
}

std::vector<std::string> schedule_violations(const Schedule& s, const ProblemConstants& c, Mode mode) {
  std::vector<std::string> out;
  constexpr double rel = 1e-12;
  auto fail = [&](const std::string& msg) { out.push_back(msg); };
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be positive and finite");
  };
  positive(s.gamma, "gamma");
  positive(s.eta0, "eta0");
  positive(s.eta1, "eta1");
  positive(s.alpha, "alpha");
  positive(s.tau, "tau");
  positive(s.l_f, "l_f");
  if (!(s.nu > 0.0 && s.nu <= 1.0)) fail("nu must lie in (0, 1]");
  if (s.t_total < 1) fail("t_total must be at least 1");
  if (s.epsilon && !(*s.epsilon > 0.0)) fail("epsilon must be positive");
  if (!out.empty()) return out;

  if (std::abs(s.eta0 - s.tau * s.eta1) > rel * s.eta0) fail("eta0 != tau * eta1");
  const double g2 = s.gamma * s.gamma;
  const double lim_phi = g2 * (1.0 / s.gamma - c.delta_phi) / 2.0;
  if (s.eta1 > lim_phi * (1.0 + rel)) {
    std::ostringstream os;
    os << "eta1=" << s.eta1 << " exceeds gamma^2 (1/gamma - delta_phi)/2 = " << lim_phi;
    fail(os.str());
  }
  if (uses_psi(mode)) {
    const double lim_psi = g2 * (1.0 / s.gamma - c.delta_psi) / 2.0;
    if (s.eta1 > lim_psi * (1.0 + rel)) {
      std::ostringstream os;
      os << "eta1=" << s.eta1 << " exceeds gamma^2 (1/gamma - delta_psi)/2 = " << lim_psi;
      fail(os.str());
    }
  }
  const double lim_eta0 = 1.0 / (2.0 * s.l_f);
  if (s.eta0 > lim_eta0 * (1.0 + rel)) {
    std::ostringstream os;
    os << "eta0=" << s.eta0 << " exceeds 1/(2 L_F) = " << lim_eta0;
    fail(os.str());
  }
  return out;
}

// ---------------------------------------------------------------------------

SmagState initial_state(const DMaxProblem& problem, const RealVec& x0) {
  if (x0.size() != problem.dim_x) throw DimensionError("initial_state: x0 dimension mismatch");
  require_finite(x0, "x0");
  SmagState s;
  s.x = x0;
  s.x_phi = x0;
  s.x_psi = x0;
  s.y = project(problem.set_y, RealVec::Zero(problem.dim_y()));
  s.z = project(problem.set_z, RealVec::Zero(problem.dim_z()));
  s.last_g = RealVec::Zero(problem.dim_x);
  return s;
}

namespace {

void check_state(const DMaxProblem& p, const SmagState& s) {
  if (s.x.size() != p.dim_x || s.x_phi.size() != p.dim_x || s.x_psi.size() != p.dim_x ||
      s.y.size() != p.dim_y() || s.z.size() != p.dim_z()) {
    throw DimensionError("SMAG state dimensions do not match problem '" + p.name + "'");
  }
}

struct StepTokens {
  SampleToken phi_x, phi_y, psi_x, psi_z;
};

StepTokens draw_tokens(RngStream& rng, SampleSharing sharing) {
  std::array<SampleToken, 4> t{rng.draw(), rng.draw(), rng.draw(), rng.draw()};
  if (sharing == SampleSharing::shared) t.fill(t[0]);
  return {t[0], t[1], t[2], t[3]};
}

// x_c - eta1 (g + (x_c - x)/gamma)
RealVec prox_estimator_update(const RealVec& xc, const RealVec& x, const RealVec& g, double eta1, double gamma) {
  return xc - eta1 * (g + (xc - x) / gamma);
}

}  // namespace

SmagState smag_step(const DMaxProblem& problem, const SmagState& state, const Schedule& sched, RngStream& rng,
                    const StepOptions& opts) {
  check_state(problem, state);
  const StepTokens tok = draw_tokens(rng, opts.sharing);
  const double eta0 = sched.eta0_at(state.t);
  const double eta1 = sched.eta1_at(state.t);
  const double gamma = sched.gamma;

  SmagState next;
  const RealVec g_phi = call_phi_x(problem, state.x_phi, state.y, tok.phi_x);
  const RealVec g_y = call_phi_y(problem, state.x_phi, state.y, tok.phi_y);
  next.x_phi = prox_estimator_update(state.x_phi, state.x, g_phi, eta1, gamma);
  next.y = project(problem.set_y, state.y + eta1 * g_y);

  const RealVec g_psi = call_psi_x(problem, state.x_psi, state.z, tok.psi_x);
  const RealVec g_z = call_psi_z(problem, state.x_psi, state.z, tok.psi_z);
  next.x_psi = prox_estimator_update(state.x_psi, state.x, g_psi, eta1, gamma);
  next.z = project(problem.set_z, state.z + eta1 * g_z);

  next.last_g = (next.x_psi - next.x_phi) / gamma;
  next.x = state.x - eta0 * next.last_g;
  next.t = state.t + 1;
  require_finite(next.x, "SMAG iterate");
  return next;
}

SmagState dwc_step(const DMaxProblem& problem, const SmagState& state, const Schedule& sched, RngStream& rng,
                   const StepOptions& opts) {
  check_state(problem, state);
  const StepTokens tok = draw_tokens(rng, opts.sharing);
  const double eta0 = sched.eta0_at(state.t);
  const double eta1 = sched.eta1_at(state.t);
  const double gamma = sched.gamma;

  SmagState next;
  const RealVec g_phi = call_phi_x(problem, state.x_phi, state.y, tok.phi_x);
  next.x_phi = prox_estimator_update(state.x_phi, state.x, g_phi, eta1, gamma);
  const RealVec g_psi = call_psi_x(problem, state.x_psi, state.z, tok.psi_x);
  next.x_psi = prox_estimator_update(state.x_psi, state.x, g_psi, eta1, gamma);
  next.y = state.y;
  next.z = state.z;

  next.last_g = (next.x_psi - next.x_phi) / gamma;
  next.x = state.x - eta0 * next.last_g;
  next.t = state.t + 1;
  require_finite(next.x, "SMAG iterate");
  return next;
}

SmagState minmax_step(const DMaxProblem& problem, const SmagState& state, const Schedule& sched, RngStream& rng,
                      const StepOptions& opts) {
  check_state(problem, state);
  const StepTokens tok = draw_tokens(rng, opts.sharing);
  const double eta0 = sched.eta0_at(state.t);
  const double eta1 = sched.eta1_at(state.t);
  const double gamma = sched.gamma;

  SmagState next;
  const RealVec g_phi = call_phi_x(problem, state.x_phi, state.y, tok.phi_x);
  const RealVec g_y = call_phi_y(problem, state.x_phi, state.y, tok.phi_y);
  next.x_phi = prox_estimator_update(state.x_phi, state.x, g_phi, eta1, gamma);
  next.y = project(problem.set_y, state.y + eta1 * g_y);
  next.x_psi = state.x_psi;
  next.z = state.z;

  next.last_g = (state.x - next.x_phi) / gamma;
  next.x = state.x - eta0 * next.last_g;
  next.t = state.t + 1;
  require_finite(next.x, "SMAG iterate");
  return next;
}

SmagState mode_step(Mode mode, const DMaxProblem& problem, const SmagState& state, const Schedule& sched,
                    RngStream& rng, const StepOptions& opts) {
  switch (mode) {
    case Mode::dmax:
      return smag_step(problem, state, sched, rng, opts);
    case Mode::dwc:
      return dwc_step(problem, state, sched, rng, opts);
    case Mode::minmax:
      return minmax_step(problem, state, sched, rng, opts);
  }
  throw ParameterError("mode_step: unknown mode");
}

// ---------------------------------------------------------------------------

namespace {

bool has_prox_access(const DMaxProblem& p) {
  if (!p.exact) return false;
  const ExactAux& a = *p.exact;
  const bool phi_ok = a.prox_phi || (a.value_phi && a.subgrad_phi);
  const bool psi_ok = !p.has_psi() || a.prox_psi || (a.value_psi && a.subgrad_psi);
  return phi_ok && psi_ok;
}

bool has_potential_access(const DMaxProblem& p, Mode mode) {
  if (!has_prox_access(p)) return false;
  const ExactAux& a = *p.exact;
  if (p.dim_y() > 0 && mode != Mode::dwc && !a.best_response_y) return false;
  if (p.dim_z() > 0 && mode == Mode::dmax && !a.best_response_z) return false;
  return true;
}

}  // namespace

double potential_value(const DMaxProblem& problem, Mode mode, const RealVec& anchor, const SmagState& state,
                       const Schedule& sched, const ProxOptions& opts) {
  const ExactAux& aux = require_exact(problem, "potential_value");
  const double gamma = sched.gamma;
  const EnvelopeProxPair p = dmax_prox_points(problem, anchor, gamma, opts);

  double sum = (state.x_phi - p.phi.point).squaredNorm();
  if (mode != Mode::dwc && problem.dim_y() > 0) {
    if (!aux.best_response_y) throw CapabilityError("potential_value: missing best_response_y");
    sum += (state.y - aux.best_response_y(p.phi.point)).squaredNorm();
  }
  if (mode != Mode::minmax) {
    sum += (state.x_psi - p.psi.point).squaredNorm();
    if (mode == Mode::dmax && problem.dim_z() > 0) {
      if (!aux.best_response_z) throw CapabilityError("potential_value: missing best_response_z");
      sum += (state.z - aux.best_response_z(p.psi.point)).squaredNorm();
    }
  }
  const double coef = 2.0 * sched.eta0 / (sched.eta1 * gamma * gamma * sched.alpha);
  return coef * sum;
}

PotentialTrace potential_diagnostic(const DMaxProblem& problem, Mode mode, const std::vector<SmagState>& states,
                                    const Schedule& sched, const ProxOptions& opts) {
  const ExactAux& aux = require_exact(problem, "potential_diagnostic");
  const bool values = aux.value_phi && (!problem.has_psi() || aux.value_psi);
  PotentialTrace out;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    out.p_t.push_back(potential_value(problem, mode, states[t].x, states[t + 1], sched, opts));
    if (values) out.f_gamma_t.push_back(dmax_envelope_value(problem, states[t].x, sched.gamma, opts));
  }
  return out;
}

StepInequalities check_step_inequalities(const DMaxProblem& problem, Mode mode, const RealVec& x_t,
                                         const SmagState& next, double eta0, double gamma, double slack,
                                         const ProxOptions& opts) {
  const EnvelopeProxPair p = dmax_prox_points(problem, x_t, gamma, opts);
  const RealVec grad = (p.psi.point - p.phi.point) / gamma;
  const RealVec& g = next.last_g;

  StepInequalities r;
  r.error_lhs = (grad - g).squaredNorm();
  double est = (next.x_phi - p.phi.point).squaredNorm();
  if (mode != Mode::minmax) est += (next.x_psi - p.psi.point).squaredNorm();
  r.error_rhs = 2.0 / (gamma * gamma) * est + slack;
  r.error_bound_holds = r.error_lhs <= r.error_rhs;

  r.descent_lhs = dmax_envelope_value(problem, next.x, gamma, opts);
  r.descent_rhs = dmax_envelope_value(problem, x_t, gamma, opts) + 0.5 * eta0 * r.error_lhs -
                  0.5 * eta0 * grad.squaredNorm() - 0.25 * eta0 * g.squaredNorm() + slack;
  r.descent_holds = r.descent_lhs <= r.descent_rhs;
  return r;
}

// ---------------------------------------------------------------------------

RunResult run(const DMaxProblem& problem, Mode mode, const SmagState& init, const Schedule& sched, RngStream& rng,
              const RunOptions& opts) {
  const std::uint64_t T = sched.t_total;
  if (T < 1) throw ParameterError("run: t_total must be at least 1");
  if (opts.trace_every < 1) throw ParameterError("run: trace_every must be positive");
  check_state(problem, init);
  if (mode == Mode::dmax && !problem.has_psi()) {
    // psi absent is treated as psi = 0; allowed, nothing to do.
  }

  RunResult res;
  // t_bar first, so that the step tokens do not depend on T's parity.
  const SampleToken pick = rng.draw();
  const std::uint64_t offset = TokenRng(pick).index(T);
  res.t_bar = mode == Mode::minmax ? offset : offset + 1;

  const bool exact = opts.exact_diagnostics && has_prox_access(problem);
  const bool potential = exact && has_potential_access(problem, mode);
  const auto t0 = std::chrono::steady_clock::now();

  SmagState state = init;
  for (std::uint64_t t = 0; t < T; ++t) {
    SmagState next;
    try {
      next = mode_step(mode, problem, state, sched, rng, opts.step);
    } catch (const NumericalError& e) {
      res.aborted = true;
      std::ostringstream os;
      os << "step " << t << ": " << e.what();
      res.failure = os.str();
      res.final_state = state;
      return res;
    }

    if (mode == Mode::minmax && t == res.t_bar) {
      res.returned = state.x;
      res.anchor = state.x;
    } else if (mode != Mode::minmax && t + 1 == res.t_bar) {
      res.returned = next.x_phi;
      res.returned_psi = next.x_psi;
      res.anchor = state.x;
    }

    if (t % opts.trace_every == 0 || t + 1 == T) {
      RunRecord row;
      row.t = t;
      row.seed = rng.seed();
      row.objective = problem.objective ? problem.objective(state.x) : std::numeric_limits<double>::quiet_NaN();
      if (exact) {
        row.stationarity = dmax_envelope_grad(problem, state.x, sched.gamma, opts.prox).norm();
        row.stationarity_exact = true;
      } else {
        row.stationarity = next.last_g.norm();
      }
      row.p_t = potential ? potential_value(problem, mode, state.x, next, sched, opts.prox)
                          : std::numeric_limits<double>::quiet_NaN();
      if (opts.record_wall_time) {
        row.elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
      res.trace.push_back(row);
    }
    state = std::move(next);
  }
  res.final_state = std::move(state);
  return res;
}

}  // namespace smag
