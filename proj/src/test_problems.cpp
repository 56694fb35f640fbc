#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "smag/problems.hpp"

namespace smag {

namespace {

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double soft_threshold(double v, double t) { return sign0(v) * std::max(std::abs(v) - t, 0.0); }

void add_noise(RealVec& g, double sigma, SampleToken token) {
  if (sigma <= 0.0) return;
  TokenRng r(token);
  for (Index i = 0; i < g.size(); ++i) g(i) += sigma * r.normal();
}

RealVec scalar_vec(double v) { return RealVec::Constant(1, v); }

double huber(double v) { return std::abs(v) <= 1.0 ? 0.5 * v * v : std::abs(v) - 0.5; }

RealVec clip_unit(const RealVec& x) { return x.cwiseMax(-1.0).cwiseMin(1.0); }

// prox of gamma * sum_i huber(x_i)
RealVec huber_prox(const RealVec& x, double gamma) {
  RealVec u(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    u(i) = std::abs(x(i)) <= 1.0 + gamma ? x(i) / (1.0 + gamma) : x(i) - gamma * sign0(x(i));
  }
  return u;
}

double coord_kink_distance(const RealVec& x, double gamma) {
  double d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < x.size(); ++i) d = std::min(d, std::abs(std::abs(x(i)) - (1.0 + gamma)));
  return d;
}

}  // namespace

DMaxProblem make_onedim_dwc(const OneDimDwcParams& p) {
  if (!(p.a > 0.0)) throw ParameterError("onedim_dwc: a must be positive");
  if (!(p.b >= 0.0)) throw ParameterError("onedim_dwc: b must be nonnegative");
  if (!(p.kappa_phi >= 0.0) || !(p.kappa_psi >= 0.0)) throw ParameterError("onedim_dwc: kappa must be nonnegative");
  if (!(p.sigma >= 0.0)) throw ParameterError("onedim_dwc: sigma must be nonnegative");
  if (!std::isfinite(p.c1)) throw ParameterError("onedim_dwc: c1 must be finite");
  if (!p.allow_unbounded && (p.b > p.a || p.kappa_phi > p.kappa_psi)) {
    throw ParameterError(
        "onedim_dwc: F = phi - psi is unbounded below (b > a or kappa_phi > kappa_psi); set allow_unbounded");
  }

  const double a = p.a, b = p.b, c = p.c1, kphi = p.kappa_phi, kpsi = p.kappa_psi, sigma = p.sigma;
  auto phi_val = [=](double x) { return a * std::abs(x - c) - 0.5 * kphi * x * x; };
  auto psi_val = [=](double x) { return b * std::abs(x) - 0.5 * kpsi * x * x; };

  DMaxProblem prob;
  prob.name = "onedim_dwc";
  prob.dim_x = 1;
  prob.phi_subgrad_x = [=](const RealVec& x, const RealVec&, SampleToken s) {
    RealVec g = scalar_vec(a * sign0(x(0) - c) - kphi * x(0));
    add_noise(g, sigma, s);
    return g;
  };
  prob.psi_subgrad_x = [=](const RealVec& x, const RealVec&, SampleToken s) {
    RealVec g = scalar_vec(b * sign0(x(0)) - kpsi * x(0));
    add_noise(g, sigma, s);
    return g;
  };
  prob.constants.delta_phi = kphi;
  prob.constants.delta_psi = kpsi;
  prob.constants.m_bound = std::sqrt(std::max(a, b) * std::max(a, b) + sigma * sigma);
  prob.objective = [=](const RealVec& x) { return phi_val(x(0)) - psi_val(x(0)); };

  ExactAux aux;
  // argmin a|u - c| + (mu/2)(u - v)^2 with mu = 1/gamma - kappa, v = x/(gamma mu)
  aux.prox_phi = [=](const RealVec& x, double gamma) {
    const double mu = 1.0 / gamma - kphi;
    const double v = x(0) / (gamma * mu);
    return scalar_vec(c + soft_threshold(v - c, a / mu));
  };
  aux.prox_psi = [=](const RealVec& x, double gamma) {
    const double mu = 1.0 / gamma - kpsi;
    return scalar_vec(soft_threshold(x(0) / (gamma * mu), b / mu));
  };
  aux.value_phi = [=](const RealVec& x) { return phi_val(x(0)); };
  aux.value_psi = [=](const RealVec& x) { return psi_val(x(0)); };
  aux.subgrad_phi = [=](const RealVec& x) { return scalar_vec(a * sign0(x(0) - c) - kphi * x(0)); };
  aux.subgrad_psi = [=](const RealVec& x) { return scalar_vec(b * sign0(x(0)) - kpsi * x(0)); };
  aux.kink_distance = [=](const RealVec& x, double gamma) {
    const double mphi = 1.0 / gamma - kphi;
    const double sites[] = {gamma * (mphi * c + a), gamma * (mphi * c - a), gamma * b, -gamma * b};
    double d = std::numeric_limits<double>::infinity();
    for (double s : sites) d = std::min(d, std::abs(x(0) - s));
    return d;
  };
  prob.exact = std::move(aux);
  return prob;
}

DMaxProblem make_quadratic_dwc(double a, double b, Index dim, double sigma) {
  if (!(a > 0.0)) throw ParameterError("quadratic_dwc: a must be positive");
  if (!(b >= 0.0) || b > a) throw ParameterError("quadratic_dwc: need 0 <= b <= a");
  if (dim < 1) throw ParameterError("quadratic_dwc: dim must be positive");
  if (!(sigma >= 0.0)) throw ParameterError("quadratic_dwc: sigma must be nonnegative");

  DMaxProblem prob;
  prob.name = "quadratic_dwc";
  prob.dim_x = dim;
  prob.phi_subgrad_x = [=](const RealVec& x, const RealVec&, SampleToken s) {
    RealVec g = a * x;
    add_noise(g, sigma, s);
    return g;
  };
  if (b > 0.0) {
    prob.psi_subgrad_x = [=](const RealVec& x, const RealVec&, SampleToken s) {
      RealVec g = b * x;
      add_noise(g, sigma, s);
      return g;
    };
  }
  prob.objective = [=](const RealVec& x) { return 0.5 * (a - b) * x.squaredNorm(); };

  ExactAux aux;
  aux.prox_phi = [=](const RealVec& x, double gamma) -> RealVec { return x / (1.0 + gamma * a); };
  aux.value_phi = [=](const RealVec& x) { return 0.5 * a * x.squaredNorm(); };
  aux.subgrad_phi = [=](const RealVec& x) -> RealVec { return a * x; };
  aux.phi_differentiable = true;
  if (b > 0.0) {
    aux.prox_psi = [=](const RealVec& x, double gamma) -> RealVec { return x / (1.0 + gamma * b); };
    aux.value_psi = [=](const RealVec& x) { return 0.5 * b * x.squaredNorm(); };
    aux.subgrad_psi = [=](const RealVec& x) -> RealVec { return b * x; };
    aux.psi_differentiable = true;
  }
  aux.kink_distance = [](const RealVec&, double) { return std::numeric_limits<double>::infinity(); };
  prob.exact = std::move(aux);
  return prob;
}

DMaxProblem make_quadratic_minmax(Index dim, double sigma) {
  if (dim < 1) throw ParameterError("quadratic_minmax: dim must be positive");
  if (!(sigma >= 0.0)) throw ParameterError("quadratic_minmax: sigma must be nonnegative");

  DMaxProblem prob;
  prob.name = "quadratic_minmax";
  prob.dim_x = dim;
  prob.phi_subgrad_x = [=](const RealVec&, const RealVec& y, SampleToken s) {
    RealVec g = y;
    add_noise(g, sigma, s);
    return g;
  };
  prob.phi_grad_y = [=](const RealVec& x, const RealVec& y, SampleToken s) {
    RealVec g = x - y;
    add_noise(g, sigma, s);
    return g;
  };
  prob.set_y = ConstraintSet::box(dim, -1.0, 1.0);
  prob.constants.delta_phi = 0.0;
  prob.constants.mu_phi = 1.0;
  prob.constants.l_phi_yx = 1.0;
  prob.constants.m_bound = std::sqrt(static_cast<double>(dim) * (1.0 + sigma * sigma));
  auto value = [](const RealVec& x) {
    double v = 0.0;
    for (Index i = 0; i < x.size(); ++i) v += huber(x(i));
    return v;
  };
  prob.objective = value;

  ExactAux aux;
  aux.prox_phi = huber_prox;
  aux.best_response_y = clip_unit;
  aux.value_phi = value;
  aux.subgrad_phi = clip_unit;
  aux.phi_differentiable = true;
  aux.kink_distance = coord_kink_distance;
  prob.exact = std::move(aux);
  return prob;
}

DMaxProblem make_huber_dmax(Index dim, double sigma) {
  DMaxProblem prob = make_quadratic_minmax(dim, sigma);
  prob.name = "huber_dmax";
  prob.psi_subgrad_x = [=](const RealVec&, const RealVec& z, SampleToken s) {
    RealVec g = z;
    add_noise(g, sigma, s);
    return g;
  };
  prob.psi_grad_z = [=](const RealVec& x, const RealVec& z, SampleToken s) {
    RealVec g = x - z;
    add_noise(g, sigma, s);
    return g;
  };
  prob.set_z = ConstraintSet::ball(RealVec::Zero(dim), 1.0);
  prob.constants.delta_psi = 0.0;
  prob.constants.mu_psi = 1.0;
  prob.constants.l_psi_zx = 1.0;

  auto norm_huber = [](const RealVec& x) { return huber(x.norm()); };
  auto phi_value = prob.exact->value_phi;
  prob.objective = [=](const RealVec& x) { return phi_value(x) - norm_huber(x); };

  ExactAux& aux = *prob.exact;
  const ConstraintSet ball = prob.set_z;
  aux.prox_psi = [](const RealVec& x, double gamma) -> RealVec {
    const double n = x.norm();
    if (n <= 1.0 + gamma) return x / (1.0 + gamma);
    return x * (1.0 - gamma / n);
  };
  aux.best_response_z = [ball](const RealVec& x) { return project(ball, x); };
  aux.value_psi = norm_huber;
  aux.subgrad_psi = [ball](const RealVec& x) { return project(ball, x); };
  aux.psi_differentiable = true;
  aux.kink_distance = [](const RealVec& x, double gamma) {
    return std::min(coord_kink_distance(x, gamma), std::abs(x.norm() - (1.0 + gamma)));
  };
  return prob;
}

}  // namespace smag
