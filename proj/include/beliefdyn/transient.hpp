#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "beliefdyn/model.hpp"
#include "beliefdyn/numerics.hpp"

namespace beliefdyn {

/// phi(p, t) sampled on the personality nodes (rows) and time nodes (columns).
struct PhiPath {
  Axis p;
  std::vector<double> t;
  Eigen::MatrixXd phi;

  double t_final() const { return t.back(); }
  /// Linear interpolation in t at personality node i.
  double at(std::size_t i, double time) const;
};

struct TransientSolution {
  PhiPath path;
  InitialCondition initial;
  double sigma2 = 0.0;
  std::vector<double> alpha;
  std::vector<double> u;
  std::vector<double> rho0;
  std::vector<double> eta;
  std::vector<double> w;
  std::vector<double> m0;
  /// Convolution int_0^t exp(w (tau - t)) phi dtau on the path nodes.
  Eigen::MatrixXd conv;
  /// Self-consistency terms I0(p, t) and I1(p, t) on the path nodes.
  Eigen::MatrixXd i0;
  Eigen::MatrixXd i1;
  /// m(p, t) and var(p, t) on the path nodes.
  Eigen::MatrixXd m;
  Eigen::MatrixXd var;
};

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;
};

struct TransientOptions {
  double t_final = 0.0;  // <= 0 selects 20 / min w
  double dt = 0.0;       // <= 0 selects 0.01 / max w
};

/// Accuracy guard on the Volterra step: dt * max w must stay at or below this.
inline constexpr double kMaxStepRate = 0.5;

double default_transient_dt(const ScenarioSpec& spec, const Axis& p_axis);
double default_transient_t_final(const ScenarioSpec& spec, const Axis& p_axis);

/// Mean and variance of the Green kernel started from a point mass at x0.
MeanVar green_mean_var(const ScenarioSpec& spec, double p, double x0, const PhiPath& path, double t);

/// Marches the self-consistency equation for phi(p, t) with trapezoidal
/// closure. Uniform steps of t_final / ceil(t_final / dt).
TransientSolution solve_phi_volterra(const ScenarioSpec& spec, const Grid& grid, double t_final, double dt,
                                     const InitialCondition& init);
TransientSolution solve_transient(const ScenarioSpec& spec, const Grid& grid, const InitialCondition& init,
                                  TransientOptions options = {});

/// Slice mean and variance at time t for personality node i.
MeanVar slice_moments(const TransientSolution& sol, std::size_t i, double t);

/// rho(p, x, t) on the grid (p nodes must match the solution). Slices too
/// narrow for the x spacing are cell-averaged so mass is preserved.
DensityField density_at(const TransientSolution& sol, double t, const Grid& grid);

/// int zeta1 zeta2 rho0 alpha_bar / (s + w) over the personality axis.
double laplace_I2(const ScenarioSpec& spec, double s, const Axis& p_axis);

struct LaplaceResidual {
  double s = 0.0;
  double numeric = 0.0;   // transform of the time-domain phi
  double predicted = 0.0;  // (I0^ + I1^) / (1 - I2^)
  double relative = 0.0;
};

/// Relative residual per sample, maximized over personality nodes.
std::vector<LaplaceResidual> laplace_consistency_check(const ScenarioSpec& spec, const TransientSolution& sol,
                                                       const std::vector<double>& s_samples);

/// int_0^T exp(-s t) f(t) dt for piecewise-linear f on the nodes.
double laplace_piecewise_linear(const std::vector<double>& t, const std::vector<double>& f, double s);

}  // namespace beliefdyn
