#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "smag/core.hpp"

using namespace smag;

namespace {

RealVec vec(std::initializer_list<double> v) {
  RealVec r(static_cast<Index>(v.size()));
  Index i = 0;
  for (double e : v) r(i++) = e;
  return r;
}

RealVec random_vec(std::mt19937_64& gen, Index n, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  RealVec v(n);
  for (Index i = 0; i < n; ++i) v(i) = nd(gen);
  return v;
}

}  // namespace

TEST_CASE("box projection clamps to the boundary and fixes interior points") {
  const auto box = ConstraintSet::box(1, -1.0, 1.0);
  CHECK(project(box, vec({2.0}))(0) == 1.0);
  CHECK(project(box, vec({0.5}))(0) == 0.5);
  CHECK(project(box, vec({-7.0}))(0) == -1.0);
}

TEST_CASE("ball projection rescales onto the sphere") {
  const auto ball = ConstraintSet::ball(RealVec::Zero(2), 1.0);
  const RealVec p = project(ball, vec({3.0, 4.0}));
  CHECK(p(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p(1) == doctest::Approx(0.8).epsilon(1e-15));
  const RealVec inside = vec({0.1, -0.2});
  CHECK(project(ball, inside) == inside);
}

TEST_CASE("projection rejects dimension mismatch and invalid sets") {
  CHECK_THROWS_AS(project(ConstraintSet::box(2, -1.0, 1.0), vec({1.0})), DimensionError);
  CHECK_THROWS_AS(ConstraintSet::box(vec({1.0}), vec({0.0})), ParameterError);
  CHECK_THROWS_AS(ConstraintSet::ball(RealVec::Zero(2), 0.0), ParameterError);
}

TEST_CASE("projection is idempotent and non-expansive") {
  std::mt19937_64 gen(11);
  const Index n = 5;
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  RealVec lo(n), hi(n);
  for (Index i = 0; i < n; ++i) {
    lo(i) = ud(gen) - 0.5;
    hi(i) = lo(i) + 0.1 + std::abs(ud(gen));
  }
  const ConstraintSet sets[] = {ConstraintSet::whole_space(n), ConstraintSet::box(lo, hi),
                                ConstraintSet::ball(random_vec(gen, n, 1.0), 1.3)};
  for (const auto& s : sets) {
    for (int k = 0; k < 1000; ++k) {
      const RealVec u = random_vec(gen, n, 3.0), v = random_vec(gen, n, 3.0);
      const RealVec pu = project(s, u), pv = project(s, v);
      CHECK(s.contains(pu, 1e-12));
      const RealVec ppu = project(s, pu);
      if (s.kind() == ConstraintSet::Kind::ball) {
        CHECK((ppu - pu).norm() <= 1e-12);
      } else {
        CHECK(ppu == pu);
      }
      CHECK((pu - pv).norm() <= (u - v).norm() * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("rng streams are deterministic and distinct per id") {
  RngStream a(7, 0), b(7, 0), c(7, 1);
  const auto a1 = a.draw(), a2 = a.draw();
  CHECK(a1 != a2);
  CHECK(b.draw() == a1);
  CHECK(b.draw() == a2);

  RngStream d(7, 0);
  std::vector<SampleToken> s0, s1;
  for (int k = 0; k < 100; ++k) {
    s0.push_back(d.draw());
    s1.push_back(c.draw());
  }
  CHECK(s0 != s1);
  CHECK(std::set<SampleToken>(s0.begin(), s0.end()).size() == 100);
  CHECK(d.counter() == 100);
  CHECK(d.peek(3) == s0[3]);
}

TEST_CASE("rng token sequence is pinned across platforms") {
  // Reference values from an independent SplitMix64 evaluation of the keyed
  // counter construction.
  RngStream s(7, 0);
  CHECK(s.draw() == 0xcaa6944b372d94baULL);
  CHECK(s.draw() == 0x9cd42d1744f0e31eULL);
  CHECK(s.draw() == 0x6ca3b15890436233ULL);
}

TEST_CASE("token variates have the right ranges and moments") {
  double sum = 0.0, sq = 0.0, usum = 0.0;
  const int n = 200000;
  RngStream s(3, 9);
  for (int k = 0; k < n; ++k) {
    TokenRng r(s.draw());
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    usum += u;
    const double z = r.normal();
    sum += z;
    sq += z * z;
    const auto idx = r.index(5);
    REQUIRE(idx < 5);
  }
  CHECK(usum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
  TokenRng r(1);
  CHECK_THROWS_AS(r.index(0), ParameterError);
}

TEST_CASE("oracle calls validate dimension and finiteness") {
  DMaxProblem p;
  p.dim_x = 2;
  p.phi_subgrad_x = [](const RealVec&, const RealVec&, SampleToken) { return RealVec::Zero(3).eval(); };
  CHECK_THROWS_AS(call_phi_x(p, RealVec::Zero(2), RealVec(), 0), DimensionError);
  p.phi_subgrad_x = [](const RealVec&, const RealVec&, SampleToken) {
    return RealVec::Constant(2, std::nan("")).eval();
  };
  CHECK_THROWS_AS(call_phi_x(p, RealVec::Zero(2), RealVec(), 0), NumericalError);
  // Absent oracles read as zero.
  CHECK(call_psi_x(p, RealVec::Zero(2), RealVec(), 0) == RealVec::Zero(2));
  CHECK_THROWS_AS(require_exact(p, "test"), CapabilityError);
}

TEST_CASE("problem constants reject negative or degenerate values") {
  ProblemConstants c;
  CHECK_NOTHROW(c.validate());
  c.delta_phi = -1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.mu_psi = 0.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}
