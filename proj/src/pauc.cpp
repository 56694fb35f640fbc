#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "smag/problems.hpp"

namespace smag {

void PaucParams::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw ParameterError("pauc: rho must lie in (0, 1]");
  if (!(c > 0.0)) throw ParameterError("pauc: c must be positive");
  if (!(alpha_fair >= 0.0)) throw ParameterError("pauc: alpha_fair must be nonnegative");
  if (!(lambda0 > 0.0)) throw ParameterError("pauc: lambda0 must be positive");
  if (batch_pos < 1 || batch_neg < 1 || batch_fair < 1) throw ParameterError("pauc: batch sizes must be positive");
  if (!(adv_radius > 0.0)) throw ParameterError("pauc: adv_radius must be positive");
}

PaucData::PaucData(LabeledDataset d) : data(std::move(d)) {
  data.validate();
  for (Index i = 0; i < data.size(); ++i) (data.labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty()) throw ParameterError("pauc: dataset has no positive rows");
  if (neg.empty()) throw ParameterError("pauc: dataset has no negative rows");
}

namespace {

double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_point(const RealVec& x, const RealVec* y, const PaucData& d) {
  if (x.size() != d.data.dim + d.n_pos()) throw DimensionError("pauc: primal dimension must be dim + n_pos");
  if (y && y->size() != 2) throw DimensionError("pauc: adversary dimension must be 2");
}

void require_attrs(const PaucData& d) {
  if (d.data.sensitive.empty()) throw ParameterError("pauc: fairness term needs sensitive attributes");
}

// Residual I(a = 1) - sigma of the adversary log-likelihood in its logit.
double fair_residual(int a, double h, const RealVec& y) { return (a == 1 ? 1.0 : 0.0) - sigmoid(y(0) * h + y(1)); }

// Accumulates the pairwise part over positives `ip` x negatives `jn` into
// (gw, gs) with weights 1/(rho |ip| |jn|) and 1/|ip|.
void pair_block(const RealVec& x, const PaucData& d, const PaucParams& p, const std::vector<Index>& ip,
                const std::vector<Index>& jn, RealVec& g) {
  const Index dim = d.data.dim;
  const SparseRows& X = d.data.features;
  const RealVec w = x.head(dim);
  std::vector<double> hn(jn.size()), cn(jn.size(), 0.0);
  for (std::size_t j = 0; j < jn.size(); ++j) hn[j] = row_dot(X, d.neg[jn[j]], w);
  const double np = static_cast<double>(ip.size()), nn = static_cast<double>(jn.size());
  const double inv = 1.0 / (p.rho * np * nn);
  for (Index k : ip) {
    const double hp = row_dot(X, d.pos[k], w);
    const double s = x(dim + k);
    double cp = 0.0;
    std::size_t active = 0;
    for (std::size_t j = 0; j < jn.size(); ++j) {
      const double m = p.c - (hp - hn[j]);
      if (m * m > s) {
        ++active;
        const double coef = -2.0 * m * inv;
        cp += coef;
        cn[j] -= coef;
      }
    }
    add_row(X, d.pos[k], cp, g);
    g(dim + k) += (1.0 - static_cast<double>(active) / (p.rho * nn)) / np;
  }
  for (std::size_t j = 0; j < jn.size(); ++j) add_row(X, d.neg[jn[j]], cn[j], g);
}

}  // namespace

double pauc_objective(const RealVec& x, const PaucData& d, const PaucParams& p) {
  check_point(x, nullptr, d);
  const Index dim = d.data.dim;
  const SparseRows& X = d.data.features;
  const RealVec w = x.head(dim);
  std::vector<double> hn(static_cast<std::size_t>(d.n_neg()));
  for (Index j = 0; j < d.n_neg(); ++j) hn[j] = row_dot(X, d.neg[j], w);
  double total = 0.0;
  for (Index i = 0; i < d.n_pos(); ++i) {
    const double hp = row_dot(X, d.pos[i], w);
    const double s = x(dim + i);
    double excess = 0.0;
    for (double h : hn) {
      const double m = p.c - (hp - h);
      excess += std::max(m * m - s, 0.0);
    }
    total += s + excess / (p.rho * static_cast<double>(d.n_neg()));
  }
  return total / static_cast<double>(d.n_pos());
}

double fair_objective(const RealVec& x, const RealVec& y, const PaucData& d) {
  check_point(x, &y, d);
  require_attrs(d);
  const RealVec w = x.head(d.data.dim);
  double total = 0.0;
  for (Index i = 0; i < d.data.size(); ++i) {
    const double z = y(0) * row_dot(d.data.features, i, w) + y(1);
    total += d.data.sensitive[i] == 1 ? log_sigmoid(z) : log_sigmoid(-z);
  }
  return total / static_cast<double>(d.data.size());
}

double pauc_fair_value(const RealVec& x, const RealVec& y, const PaucData& d, const PaucParams& p) {
  double v = pauc_objective(x, d, p) - 0.5 * p.lambda0 * y.squaredNorm();
  if (p.alpha_fair > 0.0) v += p.alpha_fair * fair_objective(x, y, d);
  return v;
}

RealVec pauc_full_grad_x(const RealVec& x, const RealVec& y, const PaucData& d, const PaucParams& p) {
  check_point(x, &y, d);
  RealVec g = RealVec::Zero(x.size());
  std::vector<Index> ip(static_cast<std::size_t>(d.n_pos())), jn(static_cast<std::size_t>(d.n_neg()));
  for (std::size_t i = 0; i < ip.size(); ++i) ip[i] = static_cast<Index>(i);
  for (std::size_t j = 0; j < jn.size(); ++j) jn[j] = static_cast<Index>(j);
  pair_block(x, d, p, ip, jn, g);
  if (p.alpha_fair > 0.0) {
    require_attrs(d);
    const Index dim = d.data.dim;
    const RealVec w = x.head(dim);
    RealVec gw = RealVec::Zero(dim);
    const double wt = p.alpha_fair * y(0) / static_cast<double>(d.data.size());
    for (Index i = 0; i < d.data.size(); ++i) {
      const double h = row_dot(d.data.features, i, w);
      add_row(d.data.features, i, wt * fair_residual(d.data.sensitive[i], h, y), gw);
    }
    g.head(dim) += gw;
  }
  return g;
}

RealVec pauc_full_grad_y(const RealVec& x, const RealVec& y, const PaucData& d, const PaucParams& p) {
  check_point(x, &y, d);
  RealVec g = -p.lambda0 * y;
  if (p.alpha_fair > 0.0) {
    require_attrs(d);
    const RealVec w = x.head(d.data.dim);
    const double wt = p.alpha_fair / static_cast<double>(d.data.size());
    for (Index i = 0; i < d.data.size(); ++i) {
      const double h = row_dot(d.data.features, i, w);
      const double r = fair_residual(d.data.sensitive[i], h, y);
      g(0) += wt * r * h;
      g(1) += wt * r;
    }
  }
  return g;
}

DMaxProblem pauc_fair_problem(std::shared_ptr<const PaucData> data, const PaucParams& params) {
  if (!data) throw ParameterError("pauc: no data");
  params.validate();
  if (params.alpha_fair > 0.0) require_attrs(*data);
  const Index dim = data->data.dim;

  DMaxProblem prob;
  prob.name = "pauc_fair";
  prob.dim_x = dim + data->n_pos();
  prob.set_y = ConstraintSet::ball(RealVec::Zero(2), params.adv_radius);

  prob.phi_subgrad_x = [data, params, dim](const RealVec& x, const RealVec& y, SampleToken s) {
    const PaucData& d = *data;
    TokenRng r(s);
    std::vector<Index> ip(static_cast<std::size_t>(params.batch_pos)), jn(static_cast<std::size_t>(params.batch_neg));
    for (Index& k : ip) k = static_cast<Index>(r.index(static_cast<std::uint64_t>(d.n_pos())));
    for (Index& k : jn) k = static_cast<Index>(r.index(static_cast<std::uint64_t>(d.n_neg())));
    RealVec g = RealVec::Zero(x.size());
    pair_block(x, d, params, ip, jn, g);
    if (params.alpha_fair > 0.0) {
      const RealVec w = x.head(dim);
      const double wt = params.alpha_fair * y(0) / static_cast<double>(params.batch_fair);
      for (Index k = 0; k < params.batch_fair; ++k) {
        const auto i = static_cast<Index>(r.index(static_cast<std::uint64_t>(d.data.size())));
        const double h = row_dot(d.data.features, i, w);
        add_row(d.data.features, i, wt * fair_residual(d.data.sensitive[i], h, y), g);
      }
    }
    return g;
  };

  prob.phi_grad_y = [data, params, dim](const RealVec& x, const RealVec& y, SampleToken s) {
    const PaucData& d = *data;
    RealVec g = -params.lambda0 * y;
    if (params.alpha_fair > 0.0) {
      TokenRng r(s);
      const RealVec w = x.head(dim);
      const double wt = params.alpha_fair / static_cast<double>(params.batch_fair);
      for (Index k = 0; k < params.batch_fair; ++k) {
        const auto i = static_cast<Index>(r.index(static_cast<std::uint64_t>(d.data.size())));
        const double h = row_dot(d.data.features, i, w);
        const double res = fair_residual(d.data.sensitive[i], h, y);
        g(0) += wt * res * h;
        g(1) += wt * res;
      }
    }
    return g;
  };

  prob.objective = [data, params](const RealVec& x) { return pauc_objective(x, *data, params); };

  // F_pauc is convex in (w, s) for the squared surrogate. The fairness term is
  // concave in w with curvature at most alpha u^2 lambda_max(E x x^T) / 4, and
  // |u| <= adv_radius on the dual ball.
  const SparseRows& X = data->data.features;
  const Eigen::MatrixXd second = Eigen::MatrixXd(X.transpose() * X) / static_cast<double>(data->data.size());
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(second, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  prob.constants.delta_phi = params.alpha_fair * params.adv_radius * params.adv_radius * lmax / 4.0;
  prob.constants.mu_phi = params.lambda0;
  // Rough, declared estimate (the dual gradient is not globally Lipschitz in w).
  prob.constants.l_phi_yx = params.alpha_fair * std::sqrt(lmax) * (1.0 + params.adv_radius);
  return prob;
}

RealVec linear_scores(const RealVec& x, const LabeledDataset& data) {
  if (x.size() < data.dim) throw DimensionError("linear_scores: parameter vector shorter than feature dimension");
  const RealVec w = x.head(data.dim);
  RealVec s(data.size());
  for (Index i = 0; i < data.size(); ++i) s(i) = row_dot(data.features, i, w);
  return s;
}

}  // namespace smag
