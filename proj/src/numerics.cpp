#include "beliefdyn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "beliefdyn/errors.hpp"

namespace beliefdyn {

Axis Axis::uniform(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) {
    throw Error(Errc::DomainEmpty, fmt::format("axis [{}, {}] with {} nodes", lo, hi, n));
  }
  std::vector<double> nodes(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) nodes[k] = lo + h * static_cast<double>(k);
  nodes.back() = hi;
  Axis axis;
  axis.nodes = std::move(nodes);
  axis.weights.assign(n, h);
  axis.weights.front() = 0.5 * h;
  axis.weights.back() = 0.5 * h;
  return axis;
}

Axis Axis::from_nodes(std::vector<double> nodes) {
  if (nodes.size() < 2) throw Error(Errc::DomainEmpty, "axis needs at least two nodes");
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    if (!(nodes[k] > nodes[k - 1])) {
      throw Error(Errc::DomainEmpty, "axis nodes must be strictly increasing");
    }
  }
  Axis axis;
  axis.weights.assign(nodes.size(), 0.0);
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const double h = nodes[k] - nodes[k - 1];
    axis.weights[k - 1] += 0.5 * h;
    axis.weights[k] += 0.5 * h;
  }
  axis.nodes = std::move(nodes);
  return axis;
}

std::size_t Axis::nearest(double v) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
  if (it == nodes.begin()) return 0;
  if (it == nodes.end()) return nodes.size() - 1;
  const auto hi = static_cast<std::size_t>(it - nodes.begin());
  return (v - nodes[hi - 1] <= nodes[hi] - v) ? hi - 1 : hi;
}

DensityField::DensityField(Grid grid, double fill)
    : grid_(std::move(grid)), values_(grid_.p.size() * grid_.x.size(), fill) {}

double trapezoid(std::span<const double> values, std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) sum += weights[k] * values[k];
  return sum;
}

double integrate_x(const DensityField& field, std::size_t p_index) {
  return trapezoid(field.row(p_index), field.grid().x.weights);
}

std::vector<double> marginal_x(const DensityField& field) {
  std::vector<double> out(field.nx(), 0.0);
  const auto& wp = field.grid().p.weights;
  for (std::size_t i = 0; i < field.np(); ++i) {
    const auto row = field.row(i);
    for (std::size_t j = 0; j < field.nx(); ++j) out[j] += wp[i] * row[j];
  }
  return out;
}

double total_mass(const DensityField& field) {
  double sum = 0.0;
  const auto& wp = field.grid().p.weights;
  for (std::size_t i = 0; i < field.np(); ++i) sum += wp[i] * integrate_x(field, i);
  return sum;
}

DensityField normalize(const DensityField& field) {
  const double mass = total_mass(field);
  if (!(mass > 0.0)) throw Error(Errc::DomainEmpty, "cannot normalize a field with zero mass");
  DensityField out = field;
  for (double& v : out.values()) v /= mass;
  return out;
}

double l1_distance(const DensityField& a, const DensityField& b) {
  if (a.np() != b.np() || a.nx() != b.nx()) {
    throw Error(Errc::GridMismatch, "L1 distance between fields on different grids");
  }
  const auto& wp = a.grid().p.weights;
  const auto& wx = a.grid().x.weights;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.np(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < a.nx(); ++j) row += wx[j] * std::abs(a.at(i, j) - b.at(i, j));
    sum += wp[i] * row;
  }
  return sum;
}

double l1_distance(std::span<const double> a, std::span<const double> b, const Axis& axis) {
  double sum = 0.0;
  for (std::size_t j = 0; j < axis.size(); ++j) sum += axis.weights[j] * std::abs(a[j] - b[j]);
  return sum;
}

double erf_eval(double z) { return std::erf(z); }

LuSolver::LuSolver(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw Error(Errc::SingularMatrix, "matrix is not square");
  lu_.compute(a);
  // Pivot test against the norm of the row that was moved into that position.
  const Eigen::MatrixXd permuted = lu_.permutationP() * a;
  const Eigen::MatrixXd& factors = lu_.matrixLU();
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    const double row_norm = permuted.row(k).cwiseAbs().maxCoeff();
    if (!(std::abs(factors(k, k)) > 1e-14 * row_norm)) {
      throw Error(Errc::SingularMatrix, fmt::format("pivot {} is {:.3e}", k, factors(k, k)));
    }
  }
}

Eigen::VectorXd LuSolver::solve(const Eigen::VectorXd& b) const { return lu_.solve(b); }

Eigen::VectorXd solve_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (b.size() != a.rows()) throw Error(Errc::SingularMatrix, "right-hand side size mismatch");
  return LuSolver(a).solve(b);
}

double interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto k = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}

void write_density_csv(std::ostream& out, const DensityField& field) {
  out << "p,x,rho\n";
  const auto& g = field.grid();
  for (std::size_t i = 0; i < field.np(); ++i) {
    for (std::size_t j = 0; j < field.nx(); ++j) {
      out << fmt::format("{:.17g},{:.17g},{:.17g}\n", g.p.nodes[i], g.x.nodes[j], field.at(i, j));
    }
  }
}

DensityField read_density_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("p,x,rho", 0) != 0) {
    throw Error(Errc::InvalidConfig, "density CSV must start with header p,x,rho");
  }
  std::vector<double> ps;
  std::vector<double> xs;
  std::vector<double> rho;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
      throw Error(Errc::InvalidConfig, "malformed density CSV row: " + line);
    }
    const double p = std::stod(a);
    const double x = std::stod(b);
    if (ps.empty() || ps.back() != p) ps.push_back(p);
    if (ps.size() == 1) xs.push_back(x);
    rho.push_back(std::stod(c));
  }
  if (ps.empty() || rho.size() != ps.size() * xs.size()) {
    throw Error(Errc::InvalidConfig, "density CSV is not a full tensor grid");
  }
  Grid grid{Axis::from_nodes(ps), Axis::from_nodes(xs)};
  DensityField field(std::move(grid));
  std::copy(rho.begin(), rho.end(), field.values().begin());
  return field;
}

}  // namespace beliefdyn
