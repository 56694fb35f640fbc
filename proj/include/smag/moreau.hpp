#ifndef SMAG_MOREAU_HPP
#define SMAG_MOREAU_HPP

#include <cstdint>

#include "smag/core.hpp"

namespace smag {

/// A deterministic, delta-weakly convex scalar function as seen by the
/// proximal machinery.
struct ProxObjective {
  ScalarMap value;
  VecMap subgradient;
  double delta = 0.0;
  bool differentiable = false;
  ProxMap closed_form;  // optional
};

struct ProxOptions {
  double tol = 1e-9;
  std::int64_t max_inner = 200000;
  bool use_closed_form = true;
};

/// Approximate proximal point.
///
/// `residual` is the gradient norm of the strongly convex subproblem for
/// differentiable f, otherwise its objective gap against a reference solve
/// (golden-section search in 1-D, a 10x budget re-solve in higher
/// dimensions). `distance_bound` converts the residual into a bound on the
/// distance to the exact prox point.
struct ProxResult {
  RealVec point;
  double residual = 0.0;
  double distance_bound = 0.0;
  std::int64_t inner_iters = 0;
  bool exact = false;
  bool converged = true;
};

ProxResult prox(const ProxObjective& f, const RealVec& x, double gamma, const ProxOptions& opts = {});

double envelope_value(const ProxObjective& f, const RealVec& x, double gamma, const ProxOptions& opts = {});
RealVec envelope_grad(const ProxObjective& f, const RealVec& x, double gamma, const ProxOptions& opts = {});

/// Phi and Psi of a problem as prox objectives, built from its exact
/// auxiliary oracles. Psi of a problem without a psi component is the zero
/// function. Throws CapabilityError when neither a closed-form prox nor a
/// value/subgradient pair is available.
ProxObjective phi_objective(const DMaxProblem& problem);
ProxObjective psi_objective(const DMaxProblem& problem);

struct EnvelopeProxPair {
  ProxResult phi;
  ProxResult psi;
};

EnvelopeProxPair dmax_prox_points(const DMaxProblem& problem, const RealVec& x, double gamma,
                                  const ProxOptions& opts = {});

/// Gradient of F_gamma = Phi_gamma - Psi_gamma:
/// (prox_{gamma Psi}(x) - prox_{gamma Phi}(x)) / gamma.
RealVec dmax_envelope_grad(const DMaxProblem& problem, const RealVec& x, double gamma,
                           const ProxOptions& opts = {});

/// F_gamma(x); requires value oracles for the present components.
double dmax_envelope_value(const DMaxProblem& problem, const RealVec& x, double gamma,
                           const ProxOptions& opts = {});

/// 2 / (gamma - gamma^2 min{delta_psi, delta_phi}).
double smoothness_constant(double delta_phi, double delta_psi, double gamma);
/// Same, taking the minimum over the components the problem actually has.
double smoothness_constant(const DMaxProblem& problem, double gamma);

struct CriticalityCertificate {
  double grad_env_norm_sq = 0.0;
  double dist_phi_sq = 0.0;
  double dist_psi_sq = 0.0;
  double epsilon = 0.0;
  bool certified = false;
  // Set when an inner prox solve missed its tolerance; never certified then.
  bool indeterminate = false;
};

/// Checks whether `candidate` is certified nearly eps-critical via the
/// envelope gradient at `x` and the candidate's distance to the prox points
/// at `x`.
CriticalityCertificate check_nearly_critical(const DMaxProblem& problem, const RealVec& x,
                                             const RealVec& candidate, double gamma, double eps,
                                             const ProxOptions& opts = {});

}  // namespace smag

#endif  // SMAG_MOREAU_HPP
