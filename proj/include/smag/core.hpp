#ifndef SMAG_CORE_HPP
#define SMAG_CORE_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace smag {

using RealVec = Eigen::VectorXd;
using Index = Eigen::Index;

// Error hierarchy. Parameter and capability errors are caller mistakes;
// numerical errors surface divergence at oracle boundaries.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool all_finite(const RealVec& v);

/// Throws NumericalError naming `what` if any entry is NaN or Inf.
void require_finite(const RealVec& v, const std::string& what);

// ---------------------------------------------------------------------------
// Constraint sets

class ConstraintSet {
 public:
  enum class Kind { whole_space, box, ball };

  static ConstraintSet whole_space(Index dim);
  static ConstraintSet box(RealVec lo, RealVec hi);
  static ConstraintSet box(Index dim, double lo, double hi);
  static ConstraintSet ball(RealVec center, double radius);

  Kind kind() const { return kind_; }
  Index dim() const { return dim_; }
  const RealVec& lo() const { return lo_; }
  const RealVec& hi() const { return hi_; }
  const RealVec& center() const { return center_; }
  double radius() const { return radius_; }

  /// Membership up to an absolute slack.
  bool contains(const RealVec& v, double slack = 1e-12) const;

 private:
  ConstraintSet() = default;

  Kind kind_ = Kind::whole_space;
  Index dim_ = 0;
  RealVec lo_, hi_, center_;
  double radius_ = 0.0;
};

/// Euclidean projection onto `set`.
RealVec project(const ConstraintSet& set, const RealVec& v);

// ---------------------------------------------------------------------------
// Problem constants (weak convexity, strong concavity, cross-Lipschitz, M)

struct ProblemConstants {
  double delta_phi = 0.0;
  double delta_psi = 0.0;
  double mu_phi = 1.0;
  double mu_psi = 1.0;
  double l_phi_yx = 0.0;
  double l_psi_zx = 0.0;
  double m_bound = 1.0;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Deterministic randomness

using SampleToken = std::uint64_t;

/// SplitMix64 finalizer. Used as the mixing function everywhere so that
/// streams are reproducible across platforms and standard libraries.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based stream keyed by (seed, stream_id). Draw k is a pure
/// function of (seed, stream_id, k).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  SampleToken draw();
  /// Token at absolute position k without advancing.
  SampleToken peek(std::uint64_t k) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline SampleToken draw_sample(RngStream& stream) { return stream.draw(); }

/// Expands one sample token into the variates an oracle needs (noise,
/// minibatch indices). Implemented without <random> distributions, whose
/// output is implementation-defined.
class TokenRng {
 public:
  explicit TokenRng(SampleToken token) : state_(token) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// DMax problem: oracle bundle

/// Stochastic oracle (primal point, dual point, sample) -> vector.
using Oracle = std::function<RealVec(const RealVec&, const RealVec&, SampleToken)>;
using VecMap = std::function<RealVec(const RealVec&)>;
using ProxMap = std::function<RealVec(const RealVec&, double gamma)>;
using ScalarMap = std::function<double(const RealVec&)>;

/// Closed-form quantities for verification problems.
struct ExactAux {
  ProxMap prox_phi;
  ProxMap prox_psi;
  VecMap best_response_y;
  VecMap best_response_z;
  ScalarMap value_phi;
  ScalarMap value_psi;
  // Deterministic subgradients of the value functions, used by the iterative
  // prox when no closed form is registered.
  VecMap subgrad_phi;
  VecMap subgrad_psi;
  bool phi_differentiable = false;
  bool psi_differentiable = false;
  // Distance from x to the nearest point where an envelope loses second
  // differentiability (prox crossing a kink of the component).
  std::function<double(const RealVec&, double gamma)> kink_distance;
};

struct DMaxProblem {
  std::string name;
  Index dim_x = 0;

  Oracle phi_subgrad_x;
  Oracle phi_grad_y;
  Oracle psi_subgrad_x;  // empty when psi is absent
  Oracle psi_grad_z;

  ConstraintSet set_y = ConstraintSet::whole_space(0);
  ConstraintSet set_z = ConstraintSet::whole_space(0);
  ProblemConstants constants;

  std::optional<ExactAux> exact;
  // Full-data objective for trace reporting (optional).
  ScalarMap objective;

  bool has_phi() const { return static_cast<bool>(phi_subgrad_x); }
  bool has_psi() const { return static_cast<bool>(psi_subgrad_x); }
  Index dim_y() const { return set_y.dim(); }
  Index dim_z() const { return set_z.dim(); }
};

// Oracle calls validated for dimension and finiteness. Absent oracles
// return zero vectors of the matching dimension.
RealVec call_phi_x(const DMaxProblem& p, const RealVec& x, const RealVec& y, SampleToken s);
RealVec call_phi_y(const DMaxProblem& p, const RealVec& x, const RealVec& y, SampleToken s);
RealVec call_psi_x(const DMaxProblem& p, const RealVec& x, const RealVec& z, SampleToken s);
RealVec call_psi_z(const DMaxProblem& p, const RealVec& x, const RealVec& z, SampleToken s);

/// Throws CapabilityError unless the problem carries exact auxiliary oracles.
const ExactAux& require_exact(const DMaxProblem& p, const std::string& who);

}  // namespace smag

#endif  // SMAG_CORE_HPP
