#ifndef SMAG_SMAG_HPP
#define SMAG_SMAG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smag/core.hpp"
#include "smag/moreau.hpp"

namespace smag {

/// Which reduction of the algorithm runs: general DMax (two prox estimators
/// and two duals), DWC (no duals), or WCSC min-max (no psi component).
enum class Mode { dmax, dwc, minmax };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

/// How the four per-step sample tokens (phi-x, phi-y, psi-x, psi-z) feed
/// the oracles. Four tokens are always drawn per step, in that order, so
/// that all modes consume the stream identically.
enum class SampleSharing { independent, shared };

/// Piecewise-constant step decay: step sizes are divided by `factor` at
/// each milestone iteration.
struct StepDecay {
  std::vector<std::uint64_t> milestones;
  double factor = 10.0;

  double multiplier(std::uint64_t t) const;
};

struct Schedule {
  double gamma = 0.0;
  double eta0 = 0.0;
  double eta1 = 0.0;
  double alpha = 0.0;
  double tau = 0.0;
  double nu = 0.0;
  double l_f = 0.0;
  std::uint64_t t_total = 1;
  std::optional<double> epsilon;
  // Theory lower bound on T (NaN for manual schedules).
  double t_bound = 0.0;
  StepDecay decay;

  double eta0_at(std::uint64_t t) const { return eta0 / decay.multiplier(t); }
  double eta1_at(std::uint64_t t) const { return eta1 / decay.multiplier(t); }
};

/// Closed-form step sizes that guarantee convergence to a nearly
/// eps-critical point, per mode (dmax, dwc, minmax). `init_gap` stands in for F_gamma(x0) - F* + P0
/// in the iteration bound; `t_total` is set to ceil(t_bound) saturated at
/// UINT64_MAX.
Schedule schedule_from_theory(const ProblemConstants& c, double gamma, double epsilon, Mode mode,
                              double init_gap = 1.0);

/// User-tuned steps. alpha, nu and l_f follow the same per-mode formulas;
/// tau = eta0 / eta1.
Schedule manual_schedule(const ProblemConstants& c, Mode mode, double gamma, double eta0, double eta1,
                         std::uint64_t t_total);

/// Human-readable list of violated schedule invariants (empty when feasible).
std::vector<std::string> schedule_violations(const Schedule& s, const ProblemConstants& c, Mode mode);

// ---------------------------------------------------------------------------

struct SmagState {
  RealVec x;
  RealVec x_phi;
  RealVec x_psi;
  RealVec y;
  RealVec z;
  RealVec last_g;
  std::uint64_t t = 0;
};

/// x_phi = x_psi = x0; y, z = projection of the origin onto their sets.
SmagState initial_state(const DMaxProblem& problem, const RealVec& x0);

struct StepOptions {
  SampleSharing sharing = SampleSharing::independent;
};

SmagState smag_step(const DMaxProblem& problem, const SmagState& state, const Schedule& sched, RngStream& rng,
                    const StepOptions& opts = {});
SmagState dwc_step(const DMaxProblem& problem, const SmagState& state, const Schedule& sched, RngStream& rng,
                   const StepOptions& opts = {});
SmagState minmax_step(const DMaxProblem& problem, const SmagState& state, const Schedule& sched, RngStream& rng,
                      const StepOptions& opts = {});
SmagState mode_step(Mode mode, const DMaxProblem& problem, const SmagState& state, const Schedule& sched,
                    RngStream& rng, const StepOptions& opts = {});

// ---------------------------------------------------------------------------

/// One trace row. Row t describes step t: the objective and stationarity are
/// taken at x_t, and P_t uses the estimators produced by that step.
struct RunRecord {
  std::uint64_t t = 0;
  double objective = 0.0;
  double stationarity = 0.0;
  bool stationarity_exact = false;  // ||grad F_gamma(x_t)|| vs proxy ||G_{t+1}||
  double p_t = 0.0;                 // NaN without exact auxiliary oracles
  double elapsed_ms = 0.0;
  std::uint64_t seed = 0;
};

struct RunOptions {
  std::uint64_t trace_every = 1;
  StepOptions step;
  // Use exact auxiliary oracles (when present) for the stationarity and
  // P_t columns.
  bool exact_diagnostics = true;
  bool record_wall_time = false;
  ProxOptions prox;
};

struct RunResult {
  std::vector<RunRecord> trace;
  // Returned iterate: x_phi at t_bar (dmax/dwc) or x at t_bar (minmax).
  RealVec returned;
  RealVec returned_psi;  // x_psi at t_bar (dmax/dwc only)
  // The outer iterate the returned estimators refer to: x_{t_bar - 1} for
  // dmax/dwc, x_{t_bar} for minmax.
  RealVec anchor;
  std::uint64_t t_bar = 0;
  SmagState final_state;
  bool aborted = false;
  std::string failure;
};

/// Runs sched.t_total steps. The first draw of `rng` selects t_bar
/// (uniform on {1..T} for dmax/dwc, {0..T-1} for minmax); every step then
/// draws four tokens.
RunResult run(const DMaxProblem& problem, Mode mode, const SmagState& init, const Schedule& sched,
              RngStream& rng, const RunOptions& opts = {});

// ---------------------------------------------------------------------------

struct PotentialTrace {
  std::vector<double> p_t;
  std::vector<double> f_gamma_t;  // empty without value oracles
};

/// P for one step: `anchor` is x_t, `state` holds the estimators of step t.
double potential_value(const DMaxProblem& problem, Mode mode, const RealVec& anchor, const SmagState& state,
                       const Schedule& sched, const ProxOptions& opts = {});

/// P_t over consecutive states (states[t].x anchors states[t+1]).
PotentialTrace potential_diagnostic(const DMaxProblem& problem, Mode mode, const std::vector<SmagState>& states,
                                    const Schedule& sched, const ProxOptions& opts = {});

/// The descent inequality for smooth F_gamma and the gradient-error bound,
/// evaluated for one step x_t -> next.
struct StepInequalities {
  double descent_lhs = 0.0;
  double descent_rhs = 0.0;
  double error_lhs = 0.0;
  double error_rhs = 0.0;
  bool descent_holds = false;
  bool error_bound_holds = false;
};

StepInequalities check_step_inequalities(const DMaxProblem& problem, Mode mode, const RealVec& x_t,
                                         const SmagState& next, double eta0, double gamma, double slack,
                                         const ProxOptions& opts = {});

}  // namespace smag

#endif  // SMAG_SMAG_HPP
