#include "smag/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace smag {

namespace {

std::pair<SampleToken, SampleToken> two_tokens(RngStream& rng, SampleSharing sharing) {
  const SampleToken a = rng.draw();
  const SampleToken b = rng.draw();
  return {a, sharing == SampleSharing::shared ? a : b};
}

}  // namespace

BaselineState sgd_step(const DMaxProblem& problem, const BaselineState& state, double lr, RngStream& rng,
                       SampleSharing sharing) {
  if (!(lr > 0.0)) throw ParameterError("sgd_step: lr must be positive");
  if (problem.dim_y() != 0 || problem.dim_z() != 0) {
    throw ParameterError("sgd_step: problem '" + problem.name + "' has dual variables; use sgda");
  }
  if (state.x.size() != problem.dim_x) throw DimensionError("sgd_step: x dimension mismatch");
  const auto [t_phi, t_psi] = two_tokens(rng, sharing);
  const RealVec empty;
  const RealVec g = call_phi_x(problem, state.x, empty, t_phi) - call_psi_x(problem, state.x, empty, t_psi);
  BaselineState next;
  next.x = state.x - lr * g;
  next.t = state.t + 1;
  require_finite(next.x, "SGD iterate");
  return next;
}

BaselineState sgda_step(const DMaxProblem& problem, const BaselineState& state, double lr_x, double lr_y,
                        RngStream& rng, SampleSharing sharing) {
  if (!(lr_x > 0.0) || !(lr_y > 0.0)) throw ParameterError("sgda_step: step sizes must be positive");
  if (problem.has_psi()) throw ParameterError("sgda_step: problem '" + problem.name + "' has a psi component");
  if (!state.y) throw ParameterError("sgda_step: state has no dual iterate");
  if (state.x.size() != problem.dim_x || state.y->size() != problem.dim_y()) {
    throw DimensionError("sgda_step: state dimension mismatch");
  }
  const auto [t_x, t_y] = two_tokens(rng, sharing);
  const RealVec gx = call_phi_x(problem, state.x, *state.y, t_x);
  const RealVec gy = call_phi_y(problem, state.x, *state.y, t_y);
  BaselineState next;
  next.x = state.x - lr_x * gx;
  next.y = project(problem.set_y, *state.y + lr_y * gy);
  next.t = state.t + 1;
  require_finite(next.x, "SGDA iterate");
  return next;
}

BaselineState baseline_initial_state(BaselineKind kind, const DMaxProblem& problem, const RealVec& x0) {
  if (x0.size() != problem.dim_x) throw DimensionError("baseline_initial_state: x0 dimension mismatch");
  require_finite(x0, "x0");
  BaselineState s;
  s.x = x0;
  if (kind == BaselineKind::sgda) s.y = project(problem.set_y, RealVec::Zero(problem.dim_y()));
  return s;
}

BaselineRunResult run_baseline(BaselineKind kind, const DMaxProblem& problem, const BaselineState& init,
                               const BaselineSchedule& sched, RngStream& rng, const BaselineRunOptions& opts) {
  if (sched.t_total < 1) throw ParameterError("run_baseline: t_total must be at least 1");
  if (opts.trace_every < 1) throw ParameterError("run_baseline: trace_every must be positive");

  bool exact = opts.diag_gamma > 0.0 && problem.exact.has_value();
  if (exact) {
    const ExactAux& a = *problem.exact;
    exact = (a.prox_phi || (a.value_phi && a.subgrad_phi)) &&
            (!problem.has_psi() || a.prox_psi || (a.value_psi && a.subgrad_psi));
  }
  const auto t0 = std::chrono::steady_clock::now();

  BaselineRunResult res;
  BaselineState state = init;
  for (std::uint64_t t = 0; t < sched.t_total; ++t) {
    const double m = sched.decay.multiplier(t);
    BaselineState next;
    try {
      next = kind == BaselineKind::sgd ? sgd_step(problem, state, sched.lr_x / m, rng, opts.sharing)
                                       : sgda_step(problem, state, sched.lr_x / m, sched.lr_y / m, rng, opts.sharing);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "step " << t << ": " << e.what();
      res.aborted = true;
      res.failure = os.str();
      res.final_state = state;
      return res;
    }
    if (t % opts.trace_every == 0 || t + 1 == sched.t_total) {
      RunRecord row;
      row.t = t;
      row.seed = rng.seed();
      row.objective = problem.objective ? problem.objective(state.x) : std::numeric_limits<double>::quiet_NaN();
      if (exact) {
        row.stationarity = dmax_envelope_grad(problem, state.x, opts.diag_gamma, opts.prox).norm();
        row.stationarity_exact = true;
      } else {
        row.stationarity = (state.x - next.x).norm() / (sched.lr_x / m);
      }
      row.p_t = std::numeric_limits<double>::quiet_NaN();
      if (opts.record_wall_time) {
        row.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
      res.trace.push_back(row);
    }
    state = std::move(next);
  }
  res.final_state = std::move(state);
  return res;
}

}  // namespace smag
