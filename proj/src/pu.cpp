#include <cmath>

#include "smag/problems.hpp"

namespace smag {

void PuParams::validate() const {
  if (!(pi_p > 0.0 && pi_p < 1.0)) throw ParameterError("pu: pi_p must lie in (0, 1)");
  if (batch_pos < 1 || batch_unl < 1) throw ParameterError("pu: batch sizes must be positive");
}

namespace {

void check_data(const PuData& data, const RealVec& w) {
  if (data.positives.size() == 0) throw ParameterError("pu: positive set is empty");
  if (data.unlabeled.size() == 0) throw ParameterError("pu: unlabeled set is empty");
  if (data.positives.dim != data.unlabeled.dim) throw DimensionError("pu: positive/unlabeled dimensions differ");
  if (w.size() != data.positives.dim) throw DimensionError("pu: w dimension mismatch");
}

double hinge(double margin) { return std::max(0.0, 1.0 - margin); }

// d/dw max(0, 1 - y<w,x>) = -y x when active; the kink contributes zero.
void add_hinge_subgrad(const SparseRows& x, Index i, int y, double score, double weight, RealVec& g) {
  if (1.0 - y * score > 0.0) add_row(x, i, -y * weight, g);
}

RealVec phi_batch(const RealVec& w, const PuData& data, const PuParams& p, SampleToken token) {
  const LabeledDataset& P = data.positives;
  const LabeledDataset& U = data.unlabeled;
  RealVec g = RealVec::Zero(w.size());
  TokenRng r(token);
  const double wp = p.pi_p / static_cast<double>(p.batch_pos);
  for (Index k = 0; k < p.batch_pos; ++k) {
    const auto i = static_cast<Index>(r.index(static_cast<std::uint64_t>(P.size())));
    add_hinge_subgrad(P.features, i, +1, row_dot(P.features, i, w), wp, g);
  }
  const double wu = 1.0 / static_cast<double>(p.batch_unl);
  for (Index k = 0; k < p.batch_unl; ++k) {
    const auto i = static_cast<Index>(r.index(static_cast<std::uint64_t>(U.size())));
    add_hinge_subgrad(U.features, i, -1, row_dot(U.features, i, w), wu, g);
  }
  return g;
}

RealVec psi_batch(const RealVec& w, const PuData& data, const PuParams& p, SampleToken token) {
  const LabeledDataset& P = data.positives;
  RealVec g = RealVec::Zero(w.size());
  TokenRng r(token);
  const double wp = p.pi_p / static_cast<double>(p.batch_pos);
  for (Index k = 0; k < p.batch_pos; ++k) {
    const auto i = static_cast<Index>(r.index(static_cast<std::uint64_t>(P.size())));
    add_hinge_subgrad(P.features, i, -1, row_dot(P.features, i, w), wp, g);
  }
  return g;
}

}  // namespace

double pu_objective(const RealVec& w, const PuData& data, const PuParams& params) {
  params.validate();
  check_data(data, w);
  const LabeledDataset& P = data.positives;
  const LabeledDataset& U = data.unlabeled;
  double pos = 0.0;
  for (Index i = 0; i < P.size(); ++i) {
    const double s = row_dot(P.features, i, w);
    pos += hinge(s) - hinge(-s);
  }
  double unl = 0.0;
  for (Index i = 0; i < U.size(); ++i) unl += hinge(-row_dot(U.features, i, w));
  return params.pi_p * pos / static_cast<double>(P.size()) + unl / static_cast<double>(U.size());
}

PuSubgrads pu_component_subgrads(const RealVec& w, const PuData& data, const PuParams& params,
                                 SampleToken phi_token, SampleToken psi_token) {
  params.validate();
  check_data(data, w);
  return {phi_batch(w, data, params, phi_token), psi_batch(w, data, params, psi_token)};
}

PuSubgrads pu_full_subgrads(const RealVec& w, const PuData& data, const PuParams& params) {
  params.validate();
  check_data(data, w);
  const LabeledDataset& P = data.positives;
  const LabeledDataset& U = data.unlabeled;
  PuSubgrads out{RealVec::Zero(w.size()), RealVec::Zero(w.size())};
  const double wp = params.pi_p / static_cast<double>(P.size());
  for (Index i = 0; i < P.size(); ++i) {
    const double s = row_dot(P.features, i, w);
    add_hinge_subgrad(P.features, i, +1, s, wp, out.phi);
    add_hinge_subgrad(P.features, i, -1, s, wp, out.psi);
  }
  const double wu = 1.0 / static_cast<double>(U.size());
  for (Index i = 0; i < U.size(); ++i) {
    add_hinge_subgrad(U.features, i, -1, row_dot(U.features, i, w), wu, out.phi);
  }
  return out;
}

DMaxProblem make_pu_problem(std::shared_ptr<const PuData> data, const PuParams& params) {
  if (!data) throw ParameterError("pu: no data");
  params.validate();
  check_data(*data, RealVec::Zero(data->positives.dim));

  DMaxProblem prob;
  prob.name = "pu";
  prob.dim_x = data->positives.dim;
  prob.phi_subgrad_x = [data, params](const RealVec& w, const RealVec&, SampleToken s) {
    return phi_batch(w, *data, params, s);
  };
  prob.psi_subgrad_x = [data, params](const RealVec& w, const RealVec&, SampleToken s) {
    return psi_batch(w, *data, params, s);
  };
  prob.objective = [data, params](const RealVec& w) { return pu_objective(w, *data, params); };

  // Both components are convex. M is declared from the largest row norm.
  double rmax = 0.0;
  for (const LabeledDataset* set : {&data->positives, &data->unlabeled}) {
    for (Index i = 0; i < set->size(); ++i) rmax = std::max(rmax, set->features.row(i).norm());
  }
  prob.constants.delta_phi = 0.0;
  prob.constants.delta_psi = 0.0;
  prob.constants.m_bound = std::max(1e-12, (1.0 + params.pi_p) * rmax);
  return prob;
}

}  // namespace smag
