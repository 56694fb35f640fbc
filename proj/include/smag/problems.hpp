#ifndef SMAG_PROBLEMS_HPP
#define SMAG_PROBLEMS_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "smag/core.hpp"

namespace smag {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Closed-form test problems

struct OneDimDwcParams {
  double a = 1.0;
  double b = 0.5;
  double c1 = 0.0;          // kink location of phi
  double kappa_phi = 0.0;   // phi(x) = a|x - c1| - (kappa_phi/2) x^2
  double kappa_psi = 0.0;   // psi(x) = b|x| - (kappa_psi/2) x^2
  double sigma = 0.0;       // additive Gaussian oracle noise
  bool allow_unbounded = false;
};

/// 1-D difference of (weakly) convex absolute values with closed-form prox,
/// envelope values and kink locations.
DMaxProblem make_onedim_dwc(const OneDimDwcParams& p);

/// phi = (a/2)||x||^2, psi = (b/2)||x||^2 (absent when b = 0), b <= a.
DMaxProblem make_quadratic_dwc(double a, double b, Index dim, double sigma = 0.0);

/// phi(x, y) = <x, y> - ||y||^2/2 over Y = [-1, 1]^dim; no psi. Phi is the
/// coordinatewise Huber function and y*(x) = clip(x).
DMaxProblem make_quadratic_minmax(Index dim, double sigma = 0.0);

/// Full DMax instance: phi as in make_quadratic_minmax, and
/// psi(x, z) = <x, z> - ||z||^2/2 over the unit ball, so Psi is the Huber
/// function of ||x||.
DMaxProblem make_huber_dmax(Index dim, double sigma = 0.0);

// ---------------------------------------------------------------------------
// Data

struct LabeledDataset {
  SparseRows features;
  std::vector<int> labels;     // +1 / -1
  std::vector<int> sensitive;  // +1 / -1, empty when unavailable
  Index dim = 0;

  Index size() const { return static_cast<Index>(labels.size()); }
  void validate() const;
};

double row_dot(const SparseRows& x, Index i, const RealVec& w);
/// g += c * x_i
void add_row(const SparseRows& x, Index i, double c, RealVec& g);

/// Rows of `data` selected by `rows`, in order.
LabeledDataset subset(const LabeledDataset& data, const std::vector<Index>& rows);
/// Deterministic shuffled split; the first part holds round(frac * n) rows.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data, double frac,
                                                         std::uint64_t seed);
/// Divides each feature column by its maximum absolute value so that
/// ||x||_inf <= 1 for every row. Returns the scale factors used.
RealVec normalize_max_abs(LabeledDataset& data);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct LibsvmOptions {
  Index dimension = 0;     // 0: max index seen
  double threshold = 0.0;  // labels > threshold map to +1
  bool normalize = false;
};

LabeledDataset load_libsvm(const std::string& path, const LibsvmOptions& opts = {});
/// One +1/-1 value per line ('#' comments and blank lines skipped).
std::vector<int> load_attributes(const std::string& path);

// ---------------------------------------------------------------------------
// PU learning with the unbiased hinge risk

struct PuParams {
  double pi_p = 0.5;
  Index batch_pos = 64;
  Index batch_unl = 64;

  void validate() const;
};

struct PuData {
  LabeledDataset positives;
  LabeledDataset unlabeled;  // labels hold the hidden ground truth
};

/// Positives ~ N(+sep e1, I), negatives ~ N(-sep e1, I); each unlabeled row is
/// positive with probability pi_p.
PuData synth_gaussian_pu(Index n_pos, Index n_unl, Index d, double sep, double pi_p, std::uint64_t seed);

double pu_objective(const RealVec& w, const PuData& data, const PuParams& params);

struct PuSubgrads {
  RealVec phi;
  RealVec psi;
};

/// Minibatch subgradients of phi = pi/n+ sum l(w;x,+1) + 1/n_u sum l(w;x_u,-1)
/// and psi = pi/n+ sum l(w;x,-1). Batches are drawn with replacement: positives
/// and unlabeled rows from `phi_token`, psi's positives from `psi_token`.
PuSubgrads pu_component_subgrads(const RealVec& w, const PuData& data, const PuParams& params,
                                 SampleToken phi_token, SampleToken psi_token);
/// Full-data subgradients (same kink convention).
PuSubgrads pu_full_subgrads(const RealVec& w, const PuData& data, const PuParams& params);

DMaxProblem make_pu_problem(std::shared_ptr<const PuData> data, const PuParams& params);

// ---------------------------------------------------------------------------
// Partial AUC (CVaR form) with an adversarial fairness regularizer

struct PaucParams {
  double rho = 0.3;
  double c = 1.0;
  double alpha_fair = 0.0;
  double lambda0 = 1.0;
  Index batch_pos = 32;
  Index batch_neg = 32;
  Index batch_fair = 64;
  double adv_radius = 2.0;  // radius of the ball holding the adversary (u, b)

  void validate() const;
};

/// Positive/negative row indices of a dataset, plus its global view.
struct PaucData {
  LabeledDataset data;
  std::vector<Index> pos;
  std::vector<Index> neg;

  explicit PaucData(LabeledDataset d);
  Index n_pos() const { return static_cast<Index>(pos.size()); }
  Index n_neg() const { return static_cast<Index>(neg.size()); }
};

/// Primal x = (w, s) with s in R^{n+}; the adversary y = (u, b) predicts the
/// sensitive attribute as logistic(u <w, x> + b).
double pauc_objective(const RealVec& x, const PaucData& d, const PaucParams& p);
double fair_objective(const RealVec& x, const RealVec& y, const PaucData& d);
/// F_pauc + alpha F_fair - (lambda0/2)||y||^2
double pauc_fair_value(const RealVec& x, const RealVec& y, const PaucData& d, const PaucParams& p);

RealVec pauc_full_grad_x(const RealVec& x, const RealVec& y, const PaucData& d, const PaucParams& p);
RealVec pauc_full_grad_y(const RealVec& x, const RealVec& y, const PaucData& d, const PaucParams& p);

DMaxProblem pauc_fair_problem(std::shared_ptr<const PaucData> data, const PaucParams& params);

/// Scores <w, x_i> of every row, w taken from the first `dim` entries of x.
RealVec linear_scores(const RealVec& x, const LabeledDataset& data);

/// Binary labels whose base rate depends on a sensitive attribute:
/// P(y = 1 | a = 1) = 0.7, P(y = 1 | a = -1) = 0.3. Features carry label
/// signal in the first quarter of the coordinates and attribute signal in the
/// second quarter.
LabeledDataset synth_biased_fair(Index n, Index d, std::uint64_t seed);

}  // namespace smag

#endif  // SMAG_PROBLEMS_HPP
