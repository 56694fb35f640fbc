// Independent reference computations used by the unit tests. Nothing here
// calls into the library's prox or envelope code.
#ifndef SMAG_TESTS_ORACLES_HPP
#define SMAG_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "smag/smag.hpp"

namespace oracle {

inline double soft_threshold(double v, double t) {
  return v > t ? v - t : (v < -t ? v + t : 0.0);
}

/// argmin_u f(u) + (u - x)^2 / (2 gamma) over a grid of step `h` on [x - w, x + w].
inline double grid_prox(const std::function<double(double)>& f, double x, double gamma, double h = 1e-4,
                        double w = 5.0) {
  double best = x, best_v = f(x);
  const long n = static_cast<long>(std::llround(2.0 * w / h));
  for (long k = 0; k <= n; ++k) {
    const double u = x - w + static_cast<double>(k) * h;
    const double v = f(u) + (u - x) * (u - x) / (2.0 * gamma);
    if (v < best_v) {
      best_v = v;
      best = u;
    }
  }
  return best;
}

/// Grid search followed by golden-section refinement of the bracketing cell.
inline double fine_prox(const std::function<double(double)>& f, double x, double gamma) {
  const double h = 1e-3;
  const double g = grid_prox(f, x, gamma, h, 6.0);
  auto q = [&](double u) { return f(u) + (u - x) * (u - x) / (2.0 * gamma); };
  double lo = g - h, hi = g + h;
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = hi - r * (hi - lo), b = lo + r * (hi - lo);
    if (q(a) < q(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return 0.5 * (lo + hi);
}

inline double huber(double v) { return std::abs(v) <= 1.0 ? 0.5 * v * v : std::abs(v) - 0.5; }

/// 1-D Moreau envelope by dense minimization.
inline double envelope(const std::function<double(double)>& f, double x, double gamma) {
  const double u = fine_prox(f, x, gamma);
  return f(u) + (u - x) * (u - x) / (2.0 * gamma);
}

/// Mean and standard error of a running sample.
struct Moments {
  double n = 0, mean = 0, m2 = 0;
  void add(double v) {
    n += 1;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  double se() const { return std::sqrt(m2 / (n - 1) / n); }
};

// The theory schedule's formulas, evaluated term by term.
struct TheoryRef {
  double alpha, tau, nu, lf, eta1, eta0;
};

inline TheoryRef theory_ref(const smag::ProblemConstants& c, double g, double eps, smag::Mode mode) {
  using smag::Mode;
  const double inf = std::numeric_limits<double>::infinity();
  const double sphi = 1 / g - c.delta_phi, spsi = 1 / g - c.delta_psi;
  TheoryRef r{};
  auto cross = [&](double mu, double l) { return l > 0 ? std::pow(mu, 1.5) * g * g * std::pow(r.alpha, 1.5) / (4 * l) : inf; };
  if (mode == Mode::dmax) {
    r.alpha = std::min(std::min(sphi / 4, spsi / 4), std::min(c.mu_phi, c.mu_psi));
    r.tau = std::min(std::min(g * g * r.alpha * r.alpha / 4, cross(c.mu_phi, c.l_phi_yx)), cross(c.mu_psi, c.l_psi_zx));
  } else if (mode == Mode::dwc) {
    r.alpha = std::min(sphi / 2, spsi / 2);
    r.tau = g * g * r.alpha * r.alpha / 4;
  } else {
    r.alpha = std::min(sphi / 2, c.mu_phi);
    r.tau = std::min(g * g * r.alpha * r.alpha / 4, cross(c.mu_phi, c.l_phi_yx));
  }
  r.nu = std::min(1.0, 2 * r.tau / (g * g * r.alpha));
  const double dmin = mode == Mode::minmax ? c.delta_phi : std::min(c.delta_phi, c.delta_psi);
  r.lf = 2 / (g - g * g * dmin);
  const double k = mode == Mode::minmax ? 384.0 : 768.0;
  double e1 = std::min(g * g * sphi / 2, 1 / (2 * r.lf * r.tau));
  if (mode != Mode::minmax) e1 = std::min(e1, g * g * spsi / 2);
  e1 = std::min(e1, std::min(1.0, g * g) * std::min(r.alpha, r.tau) * r.nu * r.alpha * eps * eps /
                        (k * r.tau * c.m_bound * c.m_bound));
  r.eta1 = e1;
  r.eta0 = r.tau * e1;
  return r;
}

}  // namespace oracle

#endif
