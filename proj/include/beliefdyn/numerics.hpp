#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace beliefdyn {

struct ScenarioSpec;

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// One-dimensional node set with trapezoidal weights.
struct Axis {
  std::vector<double> nodes;
  std::vector<double> weights;

  static Axis uniform(double lo, double hi, std::size_t n);
  /// Trapezoidal weights for arbitrary strictly increasing nodes.
  static Axis from_nodes(std::vector<double> nodes);

  std::size_t size() const { return nodes.size(); }
  double lo() const { return nodes.front(); }
  double hi() const { return nodes.back(); }
  /// Index of the node closest to `v` (ties resolve to the lower index).
  std::size_t nearest(double v) const;
};

/// Tensor discretization of personality x belief space.
struct Grid {
  Axis p;
  Axis x;
};

/// Uniform grid spanning the scenario's personality domain and its
/// (possibly truncated) belief domain. Requires np, nx >= 3.
Grid make_grid(const ScenarioSpec& spec, std::size_t np, std::size_t nx);

/// Belief density sampled on a grid; row i holds rho(p_i, .).
class DensityField {
 public:
  DensityField() = default;
  explicit DensityField(Grid grid, double fill = 0.0);

  const Grid& grid() const { return grid_; }
  std::size_t np() const { return grid_.p.size(); }
  std::size_t nx() const { return grid_.x.size(); }

  double& at(std::size_t i, std::size_t j) { return values_[i * nx() + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * nx() + j]; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * nx(), nx()}; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * nx(), nx()}; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

double trapezoid(std::span<const double> values, std::span<const double> weights);

/// Sum_j x_weights[j] * rho(p_i, x_j).
double integrate_x(const DensityField& field, std::size_t p_index);
/// Belief marginal: integral over personality at every x node.
std::vector<double> marginal_x(const DensityField& field);
double total_mass(const DensityField& field);
/// Rescales to unit total mass.
DensityField normalize(const DensityField& field);
/// Discrete L1 distance on a shared grid.
double l1_distance(const DensityField& a, const DensityField& b);
/// L1 distance of two functions sampled on the same axis.
double l1_distance(std::span<const double> a, std::span<const double> b, const Axis& axis);

double erf_eval(double z);

/// Dense LU with partial pivoting; throws SingularMatrix when a pivot falls
/// below 1e-14 of its row norm.
class LuSolver {
 public:
  explicit LuSolver(const Eigen::MatrixXd& a);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

 private:
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

Eigen::VectorXd solve_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

/// Linear interpolation, clamped to the end values outside the table.
double interpolate(std::span<const double> xs, std::span<const double> ys, double x);

/// CSV with header `p,x,rho`, row-major, 17 significant digits.
void write_density_csv(std::ostream& out, const DensityField& field);
/// Reads the format written by write_density_csv; trapezoidal weights are
/// rebuilt from the nodes.
DensityField read_density_csv(std::istream& in);

}  // namespace beliefdyn
