#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "beliefdyn/model.hpp"
#include "beliefdyn/numerics.hpp"

namespace beliefdyn {

/// Stationary solution of Gaussian form: every personality slice is
/// rho0(p) * N(m(p), sigma2 / (2 w(p))).
struct GaussianFamilySolution {
  Axis p;
  std::vector<double> m;
  std::vector<double> w;
  std::vector<double> phi_star;
  std::vector<double> eta;
  std::vector<double> rho0;
  double sigma2 = 0.0;

  double variance(std::size_t i) const { return sigma2 / (2.0 * w[i]); }
};

/// Mean, rate and personality density of one slice at an arbitrary p.
struct GaussianSlice {
  double m = 0.0;
  double w = 1.0;
  double rho0 = 0.0;
};

struct FixedPointReport {
  std::size_t iterations = 0;
  std::vector<double> l1_deltas;
  bool converged = false;
  double final_residual = 0.0;
  double tolerance = 0.0;
};

struct FixedPointResult {
  DensityField rho;
  FixedPointReport report;
};

struct ContractionDiagnosis {
  /// False on the belief line: the bounds assume a compact belief domain and
  /// the remaining fields then describe the truncated numerical domain.
  bool applicable = false;
  bool global = false;
  bool local = false;
  double lhs = 0.0;
  double global_bound = 0.0;  // sigma2 / 8
  double local_bound = 0.0;   // sigma2 / 2
  double s_zeta = 0.0;
  double s_x = 0.0;
  double x0 = 0.0;
};

enum class FredholmMethod { Nystrom, NeumannSeries };

inline constexpr double kFixedPointTol = 1e-8;
inline constexpr std::size_t kFixedPointMaxIter = 10000;
/// Log-density entries this far below the slice maximum are flushed to zero.
inline constexpr double kLogFloor = 700.0;

/// Full drift at (p, x) by direct quadrature of the interaction over rho.
double drift_mu(const ScenarioSpec& spec, const DensityField& rho, double p, double x);

/// The stationary operator bound to a grid. Kernel tables are built once and
/// reused by every application.
class StationaryOperator {
 public:
  StationaryOperator(const ScenarioSpec& spec, Grid grid);

  /// Interaction drift (without the prejudice pull) on every grid node.
  /// `generic` forces the pairwise quadrature even when the influence is
  /// belief-independent.
  Eigen::MatrixXd interaction_drift(const DensityField& rho, bool generic = false) const;

  /// Density exp((2/sigma2) int_0^x mu_int - alpha (x-u)^2 / sigma2), normalized
  /// per slice to rho0(p). The integral starts at the x node nearest 0.
  DensityField from_drift(const Eigen::MatrixXd& mu_int) const;

  DensityField apply(const DensityField& rho, bool generic = false) const;

  /// Image of a zero interaction drift: the iteration's starting point.
  DensityField prejudice_iterate() const;

  const Grid& grid() const { return grid_; }

 private:
  ScenarioSpec spec_;
  Grid grid_;
  std::size_t anchor_ = 0;
  std::vector<double> alpha_;
  std::vector<double> u_;
  std::vector<double> rho0_;
  Eigen::MatrixXd personal_;  // personal(p_i, p_k) * w_k
  Eigen::MatrixXd distance_;  // k(|x_l - x_j|) (x_l - x_j) * w_l, row j
  bool constant_personal_ = false;
};

DensityField apply_operator_A(const ScenarioSpec& spec, const DensityField& rho);

FixedPointResult successive_approximation(const ScenarioSpec& spec, const Grid& grid,
                                          double tol = kFixedPointTol,
                                          std::size_t max_iter = kFixedPointMaxIter);

ContractionDiagnosis contraction_diagnosis(double s_zeta, double s_x, double x0, double sigma2);
ContractionDiagnosis contraction_bound_check(const ScenarioSpec& spec);
ContractionDiagnosis contraction_bound_check(const ScenarioSpec& spec, const Grid& grid);

/// Interaction mean phi*(p) under belief-independent influence on the p nodes.
std::vector<double> fredholm_phi(const ScenarioSpec& spec, const Grid& grid,
                                 FredholmMethod method = FredholmMethod::Nystrom);

/// Discrete L2 norm of the Fredholm kernel on the p axis.
double fredholm_kernel_norm(const ScenarioSpec& spec, const Axis& p_axis);

/// Scalar phi* of a product-form influence from its ratio of quadratures.
double product_phi_star(const ScenarioSpec& spec, const Axis& p_axis);

GaussianFamilySolution closed_form_product(const ScenarioSpec& spec, const Grid& grid);

/// Assembles m, w from a known phi* on the p nodes.
GaussianFamilySolution gaussian_family(const ScenarioSpec& spec, const Axis& p_axis,
                                       std::vector<double> phi_star);

/// Slice parameters at any p, consistent with the quadrature on sol.p:
/// phi(p) = (1/eta(p)) int zeta(p,q) rho0(q) m(q) dq.
GaussianSlice gaussian_slice(const ScenarioSpec& spec, const GaussianFamilySolution& sol, double p);

/// Samples the Gaussian slices on the grid (p nodes must match sol.p).
DensityField gaussian_density(const GaussianFamilySolution& sol, const Grid& grid);

/// Belief marginal with the personality integral refined `refine` times
/// between p nodes.
std::vector<double> gaussian_marginal(const ScenarioSpec& spec, const GaussianFamilySolution& sol,
                                      const Axis& x_axis, std::size_t refine = 32);

/// 1/(4 alpha) [erf((alpha+x)/sigma) + erf((alpha-x)/sigma)].
double homogeneous_closed_form(double alpha, double sigma2, double x);

/// Indices of local maxima of `values` that exceed `rel_height` times the
/// global maximum.
std::vector<std::size_t> find_modes(std::span<const double> values, double rel_height = 0.05);

/// Modes grouped into clusters: two neighbouring modes belong to one cluster
/// unless the minimum between them falls to `valley_ratio` of the lower peak
/// or below.
std::size_t count_clusters(std::span<const double> values, double valley_ratio = 0.5,
                           double rel_height = 0.05);

}  // namespace beliefdyn
