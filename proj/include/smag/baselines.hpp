#ifndef SMAG_BASELINES_HPP
#define SMAG_BASELINES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smag/core.hpp"
#include "smag/smag.hpp"

namespace smag {

struct BaselineState {
  RealVec x;
  std::optional<RealVec> y;  // SGDA only
  std::uint64_t t = 0;
};

/// x <- x - lr (g_phi - g_psi). Draws two tokens per step (phi, psi); with
/// shared sampling both oracles see the first one. The problem must have no
/// dual variables.
BaselineState sgd_step(const DMaxProblem& problem, const BaselineState& state, double lr, RngStream& rng,
                       SampleSharing sharing = SampleSharing::independent);

/// Simultaneous descent-ascent: both oracles are evaluated at the pre-update
/// (x, y); y is projected onto set_y. Draws two tokens per step (x, y).
BaselineState sgda_step(const DMaxProblem& problem, const BaselineState& state, double lr_x, double lr_y,
                        RngStream& rng, SampleSharing sharing = SampleSharing::independent);

struct BaselineSchedule {
  double lr_x = 0.0;
  double lr_y = 0.0;  // SGDA only
  std::uint64_t t_total = 1;
  StepDecay decay;
};

enum class BaselineKind { sgd, sgda };

struct BaselineRunOptions {
  std::uint64_t trace_every = 1;
  SampleSharing sharing = SampleSharing::independent;
  // Smoothing parameter for the exact ||grad F_gamma|| column; 0 disables it.
  double diag_gamma = 0.0;
  bool record_wall_time = false;
  ProxOptions prox;
};

struct BaselineRunResult {
  std::vector<RunRecord> trace;
  BaselineState final_state;
  bool aborted = false;
  std::string failure;
};

/// Trace rows use x_t before step t. The stationarity column is the exact
/// envelope gradient norm when diag_gamma > 0 and exact oracles exist,
/// otherwise the norm of the stochastic update direction.
BaselineRunResult run_baseline(BaselineKind kind, const DMaxProblem& problem, const BaselineState& init,
                               const BaselineSchedule& sched, RngStream& rng, const BaselineRunOptions& opts = {});

BaselineState baseline_initial_state(BaselineKind kind, const DMaxProblem& problem, const RealVec& x0);

}  // namespace smag

#endif  // SMAG_BASELINES_HPP
