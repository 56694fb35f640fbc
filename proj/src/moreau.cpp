#include "smag/moreau.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <sstream>

namespace smag {

namespace {

void check_gamma(double gamma, double delta) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ParameterError("prox: gamma must be positive");
  }
  if (gamma * delta >= 1.0) {
    std::ostringstream os;
    os << "prox: gamma=" << gamma << " violates gamma < 1/delta with delta=" << delta;
    throw ParameterError(os.str());
  }
}

struct Subproblem {
  const ProxObjective& f;
  const RealVec& x;
  double gamma;

  double value(const RealVec& u) const { return f.value(u) + (u - x).squaredNorm() / (2.0 * gamma); }
  RealVec subgradient(const RealVec& u) const { return f.subgradient(u) + (u - x) / gamma; }
};

// Minimizer of the strongly convex 1-D subproblem by golden-section search
// on a bracket derived from the strong-convexity bound |x - u*| <= |g|/mu.
double golden_reference(const Subproblem& sp, double mu) {
  const double x0 = sp.x(0);
  const double g = sp.subgradient(sp.x)(0);
  const double r = std::abs(g) / mu * (1.0 + 1e-9) + 1e-12;
  double lo = x0 - r, hi = x0 + r;
  constexpr double kInvPhi = 0.6180339887498949;
  RealVec u(1);
  auto h = [&](double t) {
    u(0) = t;
    return sp.value(u);
  };
  double a = hi - kInvPhi * (hi - lo);
  double b = lo + kInvPhi * (hi - lo);
  double fa = h(a), fb = h(b);
  const double width_tol = 1e-14 * std::max(1.0, std::abs(x0));
  for (int it = 0; it < 400 && (hi - lo) > width_tol; ++it) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - kInvPhi * (hi - lo);
      fa = h(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + kInvPhi * (hi - lo);
      fb = h(b);
    }
  }
  return 0.5 * (lo + hi);
}

class SubgradientSolver {
 public:
  SubgradientSolver(const Subproblem& sp, double mu) : sp_(sp), mu_(mu), u_(sp.x) {}

  // Runs `steps` iterations and returns the average of the iterates visited.
  RealVec run_epoch(std::int64_t steps) {
    RealVec sum = RealVec::Zero(u_.size());
    for (std::int64_t j = 0; j < steps; ++j) {
      const double eta = 2.0 / (mu_ * static_cast<double>(k_ + 2));
      u_ -= eta * sp_.subgradient(u_);
      sum += u_;
      ++k_;
    }
    if (!u_.allFinite()) throw NumericalError("prox: subgradient iteration diverged");
    return sum / static_cast<double>(steps);
  }

  const RealVec& iterate() const { return u_; }
  std::int64_t iterations() const { return k_; }

 private:
  const Subproblem& sp_;
  double mu_;
  RealVec u_;
  std::int64_t k_ = 0;
};

constexpr std::int64_t kFirstEpoch = 64;

}  // namespace

ProxResult prox(const ProxObjective& f, const RealVec& x, double gamma, const ProxOptions& opts) {
  check_gamma(gamma, f.delta);
  if (!(opts.tol > 0.0)) throw ParameterError("prox: tol must be positive");
  if (opts.max_inner < 1) throw ParameterError("prox: max_inner must be positive");
  require_finite(x, "prox input");

  if (opts.use_closed_form && f.closed_form) {
    ProxResult r;
    r.point = f.closed_form(x, gamma);
    require_finite(r.point, "closed-form prox");
    r.exact = true;
    return r;
  }
  if (!f.value || !f.subgradient) {
    throw CapabilityError("prox: objective has neither a closed form nor value/subgradient oracles");
  }

  const double mu = 1.0 / gamma - f.delta;
  const Subproblem sp{f, x, gamma};
  SubgradientSolver solver(sp, mu);

  const bool one_dim = x.size() == 1;
  double reference = 0.0;
  double reference_value = 0.0;
  if (!f.differentiable && one_dim) {
    reference = golden_reference(sp, mu);
    reference_value = sp.value(RealVec::Constant(1, reference));
  }

  // Candidate score: gradient norm (differentiable), gap to the 1-D
  // reference, or raw subproblem value (multi-dimensional, gap unknown).
  auto score = [&](const RealVec& c) -> double {
    if (f.differentiable) return sp.subgradient(c).norm();
    if (one_dim) return std::max(0.0, sp.value(c) - reference_value);
    return sp.value(c);
  };
  const bool score_is_residual = f.differentiable || one_dim;

  RealVec best = x;
  double best_score = score(best);
  std::int64_t epoch = kFirstEpoch;
  while (solver.iterations() < opts.max_inner) {
    if (score_is_residual && best_score <= opts.tol) break;
    const std::int64_t steps = std::min(epoch, opts.max_inner - solver.iterations());
    RealVec avg = solver.run_epoch(steps);
    for (const RealVec* c : std::initializer_list<const RealVec*>{&avg, &solver.iterate()}) {
      const double s = score(*c);
      if (s < best_score) {
        best_score = s;
        best = *c;
      }
    }
    epoch *= 2;
  }

  ProxResult r;
  r.inner_iters = solver.iterations();
  if (f.differentiable) {
    r.point = best;
    r.residual = best_score;
    r.distance_bound = best_score / mu;
  } else if (one_dim) {
    r.point = best;
    r.residual = best_score;
    r.distance_bound = std::abs(best(0) - reference);
  } else {
    // Reference re-solve with a 10x budget, continuing the same run.
    const double h_best = best_score;
    RealVec refined = best;
    double h_refined = h_best;
    std::int64_t remaining = 10 * opts.max_inner;
    std::int64_t ep = epoch;
    while (remaining > 0) {
      const std::int64_t steps = std::min(ep, remaining);
      RealVec avg = solver.run_epoch(steps);
      remaining -= steps;
      for (const RealVec* c : std::initializer_list<const RealVec*>{&avg, &solver.iterate()}) {
        const double v = sp.value(*c);
        if (v < h_refined) {
          h_refined = v;
          refined = *c;
        }
      }
      ep *= 2;
    }
    const double gap = std::max(0.0, h_best - h_refined);
    r.point = refined;
    r.residual = gap;
    r.distance_bound = std::sqrt(2.0 * gap / mu);
    r.inner_iters = solver.iterations();
  }
  r.converged = r.residual <= opts.tol;
  require_finite(r.point, "prox result");
  return r;
}

double envelope_value(const ProxObjective& f, const RealVec& x, double gamma, const ProxOptions& opts) {
  if (!f.value) throw CapabilityError("envelope_value: objective has no value oracle");
  const ProxResult r = prox(f, x, gamma, opts);
  return f.value(r.point) + (r.point - x).squaredNorm() / (2.0 * gamma);
}

RealVec envelope_grad(const ProxObjective& f, const RealVec& x, double gamma, const ProxOptions& opts) {
  const ProxResult r = prox(f, x, gamma, opts);
  return (x - r.point) / gamma;
}

// ---------------------------------------------------------------------------

namespace {

ProxObjective zero_objective() {
  ProxObjective z;
  z.value = [](const RealVec&) { return 0.0; };
  z.subgradient = [](const RealVec& u) { return RealVec::Zero(u.size()); };
  z.differentiable = true;
  z.closed_form = [](const RealVec& u, double) { return u; };
  return z;
}

ProxObjective component(const ScalarMap& value, const VecMap& subgrad, const ProxMap& closed,
                        double delta, bool differentiable, const char* name) {
  if (!closed && !(value && subgrad)) {
    throw CapabilityError(std::string("no prox access for ") + name +
                          ": need a closed-form prox or value and subgradient oracles");
  }
  ProxObjective o;
  o.value = value;
  o.subgradient = subgrad;
  o.closed_form = closed;
  o.delta = delta;
  o.differentiable = differentiable;
  return o;
}

}  // namespace

ProxObjective phi_objective(const DMaxProblem& problem) {
  const ExactAux& aux = require_exact(problem, "phi_objective");
  return component(aux.value_phi, aux.subgrad_phi, aux.prox_phi, problem.constants.delta_phi,
                   aux.phi_differentiable, "Phi");
}

ProxObjective psi_objective(const DMaxProblem& problem) {
  if (!problem.has_psi()) return zero_objective();
  const ExactAux& aux = require_exact(problem, "psi_objective");
  return component(aux.value_psi, aux.subgrad_psi, aux.prox_psi, problem.constants.delta_psi,
                   aux.psi_differentiable, "Psi");
}

EnvelopeProxPair dmax_prox_points(const DMaxProblem& problem, const RealVec& x, double gamma,
                                  const ProxOptions& opts) {
  if (x.size() != problem.dim_x) throw DimensionError("dmax_prox_points: dimension mismatch");
  return {prox(phi_objective(problem), x, gamma, opts), prox(psi_objective(problem), x, gamma, opts)};
}

RealVec dmax_envelope_grad(const DMaxProblem& problem, const RealVec& x, double gamma,
                           const ProxOptions& opts) {
  const EnvelopeProxPair p = dmax_prox_points(problem, x, gamma, opts);
  if (!p.phi.converged || !p.psi.converged) {
    throw NumericalError("dmax_envelope_grad: inner prox solve did not reach tolerance");
  }
  return (p.psi.point - p.phi.point) / gamma;
}

double dmax_envelope_value(const DMaxProblem& problem, const RealVec& x, double gamma,
                           const ProxOptions& opts) {
  const ProxObjective phi = phi_objective(problem);
  const ProxObjective psi = psi_objective(problem);
  return envelope_value(phi, x, gamma, opts) - envelope_value(psi, x, gamma, opts);
}

double smoothness_constant(double delta_phi, double delta_psi, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("smoothness_constant: gamma must be positive");
  if (delta_phi < 0.0 || delta_psi < 0.0) throw ParameterError("smoothness_constant: negative modulus");
  const double m = std::min(delta_phi, delta_psi);
  const double denom = gamma - gamma * gamma * m;
  if (!(denom > 0.0)) {
    std::ostringstream os;
    os << "smoothness_constant: gamma=" << gamma << " not below 1/min(delta)=" << 1.0 / m;
    throw ParameterError(os.str());
  }
  return 2.0 / denom;
}

double smoothness_constant(const DMaxProblem& problem, double gamma) {
  const double dphi = problem.constants.delta_phi;
  const double dpsi = problem.has_psi() ? problem.constants.delta_psi : dphi;
  return smoothness_constant(dphi, dpsi, gamma);
}

CriticalityCertificate check_nearly_critical(const DMaxProblem& problem, const RealVec& x,
                                             const RealVec& candidate, double gamma, double eps,
                                             const ProxOptions& opts) {
  if (!(eps > 0.0)) throw ParameterError("check_nearly_critical: eps must be positive");
  if (candidate.size() != x.size()) throw DimensionError("check_nearly_critical: candidate dimension");
  const EnvelopeProxPair p = dmax_prox_points(problem, x, gamma, opts);

  CriticalityCertificate c;
  c.epsilon = eps;
  c.grad_env_norm_sq = ((p.psi.point - p.phi.point) / gamma).squaredNorm();
  c.dist_phi_sq = (candidate - p.phi.point).squaredNorm();
  c.dist_psi_sq = (candidate - p.psi.point).squaredNorm();
  c.indeterminate = !p.phi.converged || !p.psi.converged;

  const double grad_limit = std::min(1.0, 1.0 / (gamma * gamma)) * eps * eps / 4.0;
  const double dist_limit = eps * eps / 4.0;
  c.certified = !c.indeterminate && c.grad_env_norm_sq <= grad_limit &&
                (c.dist_phi_sq <= dist_limit || c.dist_psi_sq <= dist_limit);
  return c;
}

}  // namespace smag
