#include "smag/core.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace smag {

bool all_finite(const RealVec& v) { return v.allFinite(); }

void require_finite(const RealVec& v, const std::string& what) {
  if (!v.allFinite()) {
    throw NumericalError("non-finite value in " + what);
  }
}

// ---------------------------------------------------------------------------

ConstraintSet ConstraintSet::whole_space(Index dim) {
  if (dim < 0) throw ParameterError("whole_space: negative dimension");
  ConstraintSet s;
  s.kind_ = Kind::whole_space;
  s.dim_ = dim;
  return s;
}

ConstraintSet ConstraintSet::box(RealVec lo, RealVec hi) {
  if (lo.size() != hi.size()) throw DimensionError("box: lo/hi size mismatch");
  if (!lo.allFinite() || !hi.allFinite()) throw ParameterError("box: bounds must be finite");
  if ((lo.array() > hi.array()).any()) throw ParameterError("box: lo > hi");
  ConstraintSet s;
  s.kind_ = Kind::box;
  s.dim_ = lo.size();
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

ConstraintSet ConstraintSet::box(Index dim, double lo, double hi) {
  return box(RealVec::Constant(dim, lo), RealVec::Constant(dim, hi));
}

ConstraintSet ConstraintSet::ball(RealVec center, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ParameterError("ball: radius must be positive");
  if (!center.allFinite()) throw ParameterError("ball: center must be finite");
  ConstraintSet s;
  s.kind_ = Kind::ball;
  s.dim_ = center.size();
  s.center_ = std::move(center);
  s.radius_ = radius;
  return s;
}

bool ConstraintSet::contains(const RealVec& v, double slack) const {
  if (v.size() != dim_) return false;
  switch (kind_) {
    case Kind::whole_space:
      return true;
    case Kind::box:
      return ((v.array() >= lo_.array() - slack) && (v.array() <= hi_.array() + slack)).all();
    case Kind::ball:
      return (v - center_).norm() <= radius_ + slack;
  }
  return false;
}

RealVec project(const ConstraintSet& set, const RealVec& v) {
  if (v.size() != set.dim()) {
    std::ostringstream os;
    os << "project: vector of dimension " << v.size() << " onto set of dimension " << set.dim();
    throw DimensionError(os.str());
  }
  switch (set.kind()) {
    case ConstraintSet::Kind::whole_space:
      return v;
    case ConstraintSet::Kind::box:
      return v.cwiseMax(set.lo()).cwiseMin(set.hi());
    case ConstraintSet::Kind::ball: {
      RealVec d = v - set.center();
      const double n = d.norm();
      if (n <= set.radius()) return v;
      return set.center() + d * (set.radius() / n);
    }
  }
  return v;
}

// ---------------------------------------------------------------------------

void ProblemConstants::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ParameterError(std::string("constant ") + name + " must be finite and nonnegative");
    }
  };
  nonneg(delta_phi, "delta_phi");
  nonneg(delta_psi, "delta_psi");
  nonneg(l_phi_yx, "l_phi_yx");
  nonneg(l_psi_zx, "l_psi_zx");
  if (!(mu_phi > 0.0)) throw ParameterError("constant mu_phi must be positive");
  if (!(mu_psi > 0.0)) throw ParameterError("constant mu_psi must be positive");
  if (!(m_bound > 0.0)) throw ParameterError("constant m_bound must be positive");
}

// ---------------------------------------------------------------------------

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(mix64(mix64(seed) ^ (stream_id * 0xd1b54a32d192ed03ULL))) {}

SampleToken RngStream::peek(std::uint64_t k) const { return mix64(key_ ^ mix64(k)); }

SampleToken RngStream::draw() { return peek(counter_++); }

std::uint64_t TokenRng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double TokenRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double TokenRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t TokenRng::index(std::uint64_t n) {
  if (n == 0) throw ParameterError("TokenRng::index: empty range");
  const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(m >> 64);
}

// ---------------------------------------------------------------------------

namespace {

RealVec checked(const Oracle& oracle, const RealVec& x, const RealVec& dual, SampleToken s,
                Index expect_dim, const char* what) {
  if (!oracle) return RealVec::Zero(expect_dim);
  RealVec out = oracle(x, dual, s);
  if (out.size() != expect_dim) {
    std::ostringstream os;
    os << what << " returned dimension " << out.size() << ", expected " << expect_dim;
    throw DimensionError(os.str());
  }
  require_finite(out, what);
  return out;
}

}  // namespace

RealVec call_phi_x(const DMaxProblem& p, const RealVec& x, const RealVec& y, SampleToken s) {
  return checked(p.phi_subgrad_x, x, y, s, p.dim_x, "phi_subgrad_x");
}

RealVec call_phi_y(const DMaxProblem& p, const RealVec& x, const RealVec& y, SampleToken s) {
  return checked(p.phi_grad_y, x, y, s, p.dim_y(), "phi_grad_y");
}

RealVec call_psi_x(const DMaxProblem& p, const RealVec& x, const RealVec& z, SampleToken s) {
  return checked(p.psi_subgrad_x, x, z, s, p.dim_x, "psi_subgrad_x");
}

RealVec call_psi_z(const DMaxProblem& p, const RealVec& x, const RealVec& z, SampleToken s) {
  return checked(p.psi_grad_z, x, z, s, p.dim_z(), "psi_grad_z");
}

const ExactAux& require_exact(const DMaxProblem& p, const std::string& who) {
  if (!p.exact) {
    throw CapabilityError(who + " requires exact auxiliary oracles; problem '" + p.name +
                          "' has none");
  }
  return *p.exact;
}

}  // namespace smag
