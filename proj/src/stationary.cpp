#include "beliefdyn/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "beliefdyn/errors.hpp"

namespace beliefdyn {

namespace {

double gaussian_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

double drift_mu(const ScenarioSpec& spec, const DensityField& rho, double p, double x) {
  const Grid& g = rho.grid();
  double interaction = 0.0;
  for (std::size_t i = 0; i < rho.np(); ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < rho.nx(); ++j) {
      const double d = g.x.nodes[j] - x;
      inner += g.x.weights[j] * spec.zeta(std::abs(d), p, g.p.nodes[i]) * d * rho.at(i, j);
    }
    interaction += g.p.weights[i] * inner;
  }
  return spec.alpha_bar(p) * interaction + spec.alpha(p) * (spec.prejudice(p) - x);
}

StationaryOperator::StationaryOperator(const ScenarioSpec& spec, Grid grid)
    : spec_(spec), grid_(std::move(grid)) {
  const auto np = grid_.p.size();
  const auto nx = grid_.x.size();
  anchor_ = grid_.x.nearest(0.0);
  alpha_.resize(np);
  u_.resize(np);
  rho0_.resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    const double p = grid_.p.nodes[i];
    alpha_[i] = spec_.alpha(p);
    u_[i] = spec_.prejudice(p);
    rho0_[i] = spec_.rho0(p);
  }
  constant_personal_ = spec_.zeta.personal_is_constant();
  personal_.resize(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t k = 0; k < np; ++k) {
      personal_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          spec_.zeta.personal_value(grid_.p.nodes[i], grid_.p.nodes[k]) * grid_.p.weights[k];
    }
  }
  distance_.resize(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nx));
  for (std::size_t j = 0; j < nx; ++j) {
    for (std::size_t l = 0; l < nx; ++l) {
      const double d = grid_.x.nodes[l] - grid_.x.nodes[j];
      distance_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) =
          spec_.zeta.distance_value(std::abs(d)) * d * grid_.x.weights[l];
    }
  }
}

Eigen::MatrixXd StationaryOperator::interaction_drift(const DensityField& rho, bool generic) const {
  if (rho.np() != grid_.p.size() || rho.nx() != grid_.x.size()) {
    throw Error(Errc::GridMismatch, "density does not match the operator grid");
  }
  const auto np = static_cast<Eigen::Index>(rho.np());
  const auto nx = static_cast<Eigen::Index>(rho.nx());
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> field(
      rho.values().data(), np, nx);
  Eigen::MatrixXd mu(np, nx);

  if (spec_.zeta.vanishes()) {
    mu.setZero();
    return mu;
  }

  if (spec_.zeta.belief_independent() && !generic) {
    // Linear in x: mu_int = alpha_bar (beta - eta x).
    const Eigen::Map<const Eigen::VectorXd> wx(grid_.x.weights.data(), nx);
    const Eigen::Map<const Eigen::VectorXd> xs(grid_.x.nodes.data(), nx);
    const Eigen::VectorXd mass = field * wx;
    const Eigen::VectorXd moment = field * wx.cwiseProduct(xs);
    const Eigen::VectorXd eta = personal_ * mass;
    const Eigen::VectorXd beta = personal_ * moment;
    for (Eigen::Index i = 0; i < np; ++i) {
      const double abar = 1.0 - alpha_[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < nx; ++j) mu(i, j) = abar * (beta(i) - eta(i) * xs(j));
    }
    return mu;
  }

  if (constant_personal_) {
    const Eigen::Map<const Eigen::VectorXd> wp(grid_.p.weights.data(), np);
    const Eigen::VectorXd weighted = field.transpose() * wp * personal_(0, 0) / grid_.p.weights[0];
    const Eigen::VectorXd conv = distance_ * weighted;
    for (Eigen::Index i = 0; i < np; ++i) {
      mu.row(i) = (1.0 - alpha_[static_cast<std::size_t>(i)]) * conv.transpose();
    }
    return mu;
  }

  const Eigen::MatrixXd r = personal_ * field;
  mu.noalias() = r * distance_.transpose();
  for (Eigen::Index i = 0; i < np; ++i) mu.row(i) *= 1.0 - alpha_[static_cast<std::size_t>(i)];
  return mu;
}

DensityField StationaryOperator::from_drift(const Eigen::MatrixXd& mu_int) const {
  const std::size_t np = grid_.p.size();
  const std::size_t nx = grid_.x.size();
  const auto& xs = grid_.x.nodes;
  const double sigma2 = spec_.sigma2;
  DensityField out(grid_);
  bool overflow = false;

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < np; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    std::vector<double> log_rho(nx);
    // Cumulative trapezoid of mu_int from the anchor node in both directions.
    double cum = 0.0;
    log_rho[anchor_] = 0.0;
    for (std::size_t j = anchor_ + 1; j < nx; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      cum += 0.5 * (xs[j] - xs[j - 1]) * (mu_int(ii, jj - 1) + mu_int(ii, jj));
      log_rho[j] = cum;
    }
    cum = 0.0;
    for (std::size_t j = anchor_; j-- > 0;) {
      const auto jj = static_cast<Eigen::Index>(j);
      cum -= 0.5 * (xs[j + 1] - xs[j]) * (mu_int(ii, jj + 1) + mu_int(ii, jj));
      log_rho[j] = cum;
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nx; ++j) {
      const double dx = xs[j] - u_[i];
      log_rho[j] = (2.0 / sigma2) * log_rho[j] - alpha_[i] * dx * dx / sigma2;
      peak = std::max(peak, log_rho[j]);
    }
    if (!std::isfinite(peak)) {
#pragma omp atomic write
      overflow = true;
      continue;
    }
    auto row = out.row(i);
    double mass = 0.0;
    for (std::size_t j = 0; j < nx; ++j) {
      const double shifted = log_rho[j] - peak;
      row[j] = shifted < -kLogFloor ? 0.0 : std::exp(shifted);
      mass += grid_.x.weights[j] * row[j];
    }
    const double scale = rho0_[i] / mass;
    for (double& v : row) v *= scale;
  }
  if (overflow) throw Error(Errc::OverflowGuard, "non-finite log-density in the stationary operator");
  return out;
}

DensityField StationaryOperator::apply(const DensityField& rho, bool generic) const {
  return from_drift(interaction_drift(rho, generic));
}

DensityField StationaryOperator::prejudice_iterate() const {
  return from_drift(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid_.p.size()),
                                          static_cast<Eigen::Index>(grid_.x.size())));
}

DensityField apply_operator_A(const ScenarioSpec& spec, const DensityField& rho) {
  return StationaryOperator(spec, rho.grid()).apply(rho);
}

FixedPointResult successive_approximation(const ScenarioSpec& spec, const Grid& grid, double tol,
                                          std::size_t max_iter) {
  if (!(tol > 0.0)) throw Error(Errc::InvalidConfig, "tolerance must be positive");
  const StationaryOperator op(spec, grid);
  FixedPointReport report;
  report.tolerance = tol;
  DensityField current = op.prejudice_iterate();
  DensityField next = op.apply(current);
  while (true) {
    ++report.iterations;
    const double delta = l1_distance(next, current);
    report.l1_deltas.push_back(delta);
    current = std::move(next);
    next = op.apply(current);
    if (delta <= tol || report.iterations >= max_iter) {
      report.final_residual = l1_distance(next, current);
      if (report.final_residual <= tol) {
        report.converged = true;
        break;
      }
      if (report.iterations >= max_iter) break;
    }
  }
  return {std::move(current), std::move(report)};
}

ContractionDiagnosis contraction_diagnosis(double s_zeta, double s_x, double x0, double sigma2) {
  ContractionDiagnosis d;
  d.applicable = true;
  d.s_zeta = s_zeta;
  d.s_x = s_x;
  d.x0 = x0;
  d.lhs = (x0 == 0.0 || s_zeta == 0.0) ? 0.0 : s_zeta * s_x * x0;
  d.global_bound = sigma2 / 8.0;
  d.local_bound = sigma2 / 2.0;
  d.global = d.lhs < d.global_bound;
  d.local = d.lhs < d.local_bound;
  return d;
}

ContractionDiagnosis contraction_bound_check(const ScenarioSpec& spec) {
  const Axis axis = Axis::uniform(spec.personality.lo, spec.personality.hi, kValidationNodes);
  const Interval xr = belief_range(spec, axis);
  const double s_x = std::max(std::abs(xr.lo), std::abs(xr.hi));
  const double x0 = spec.zeta.vanishes() ? 0.0 : spec.zeta.support_radius;
  ContractionDiagnosis d = contraction_diagnosis(spec.zeta.bound, s_x, x0, spec.sigma2);
  d.applicable = spec.compact_beliefs();
  return d;
}

ContractionDiagnosis contraction_bound_check(const ScenarioSpec& spec, const Grid& grid) {
  const double s_x = std::max(std::abs(grid.x.lo()), std::abs(grid.x.hi()));
  const double x0 = spec.zeta.vanishes() ? 0.0 : spec.zeta.support_radius;
  ContractionDiagnosis d = contraction_diagnosis(spec.zeta.bound, s_x, x0, spec.sigma2);
  d.applicable = spec.compact_beliefs();
  return d;
}

namespace {

struct FredholmSystem {
  std::vector<double> h;
  Eigen::MatrixXd gamma;  // Gamma(p_i, p_k), no quadrature weight
};

FredholmSystem fredholm_system(const ScenarioSpec& spec, const Axis& axis) {
  const std::size_t n = axis.size();
  const auto eta = eta_profile(spec, axis);
  std::vector<double> alpha(n), u(n), rho0(n), w(n);
  for (std::size_t k = 0; k < n; ++k) {
    alpha[k] = spec.alpha(axis.nodes[k]);
    u[k] = spec.prejudice(axis.nodes[k]);
    rho0[k] = spec.rho0(axis.nodes[k]);
    w[k] = alpha[k] + (1.0 - alpha[k]) * eta[k];
  }
  FredholmSystem sys;
  sys.h.assign(n, 0.0);
  sys.gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double hi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double z = spec.zeta.personal_value(axis.nodes[i], axis.nodes[k]) * rho0[k] / w[k];
      hi += axis.weights[k] * z * alpha[k] * u[k];
      sys.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          z * (1.0 - alpha[k]) * eta[k] / eta[i];
    }
    sys.h[i] = hi / eta[i];
  }
  return sys;
}

void require_belief_independent(const ScenarioSpec& spec) {
  if (!spec.zeta.belief_independent()) {
    throw Error(Errc::BeliefDependentZeta, "the Fredholm reduction requires belief-independent influence");
  }
}

}  // namespace

double fredholm_kernel_norm(const ScenarioSpec& spec, const Axis& p_axis) {
  require_belief_independent(spec);
  if (spec.zeta.vanishes()) return 0.0;
  const FredholmSystem sys = fredholm_system(spec, p_axis);
  double sum = 0.0;
  for (std::size_t i = 0; i < p_axis.size(); ++i) {
    for (std::size_t k = 0; k < p_axis.size(); ++k) {
      const double g = sys.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      sum += p_axis.weights[i] * p_axis.weights[k] * g * g;
    }
  }
  return std::sqrt(sum);
}

std::vector<double> fredholm_phi(const ScenarioSpec& spec, const Grid& grid, FredholmMethod method) {
  require_belief_independent(spec);
  const Axis& axis = grid.p;
  const std::size_t n = axis.size();
  if (spec.zeta.vanishes()) return std::vector<double>(n, 0.0);
  const FredholmSystem sys = fredholm_system(spec, axis);
  const auto nn = static_cast<Eigen::Index>(n);

  if (method == FredholmMethod::Nystrom) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(nn, nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
      for (Eigen::Index k = 0; k < nn; ++k) a(i, k) -= sys.gamma(i, k) * axis.weights[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd phi = solve_dense(a, Eigen::Map<const Eigen::VectorXd>(sys.h.data(), nn));
    return {phi.data(), phi.data() + n};
  }

  const double norm = fredholm_kernel_norm(spec, axis);
  if (!(norm < 1.0)) {
    throw Error(Errc::SeriesDiverges, fmt::format("kernel L2 norm {:.6g} >= 1", norm));
  }
  // Partial sums of the resolvent series: phi_{n+1} = h + int Gamma phi_n.
  const Eigen::Map<const Eigen::VectorXd> h(sys.h.data(), nn);
  const Eigen::Map<const Eigen::VectorXd> wp(axis.weights.data(), nn);
  const Eigen::MatrixXd kernel = sys.gamma * wp.asDiagonal();
  Eigen::VectorXd phi = h;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd next = h + kernel * phi;
    const double change = (next - phi).cwiseAbs().maxCoeff();
    phi = std::move(next);
    if (change <= 1e-15 * (1.0 + phi.cwiseAbs().maxCoeff())) break;
  }
  return {phi.data(), phi.data() + n};
}

double product_phi_star(const ScenarioSpec& spec, const Axis& p_axis) {
  const auto factors = spec.zeta.factors();
  if (!factors) throw Error(Errc::Unsupported, "closed form requires a product-form influence");
  if (spec.zeta.vanishes()) return 0.0;
  double eta_bar = 0.0;
  for (std::size_t k = 0; k < p_axis.size(); ++k) {
    const double q = p_axis.nodes[k];
    eta_bar += p_axis.weights[k] * factors->second(q) * spec.rho0(q);
  }
  double num = 0.0;
  double den = 1.0;
  for (std::size_t k = 0; k < p_axis.size(); ++k) {
    const double q = p_axis.nodes[k];
    const double a = spec.alpha(q);
    const double z1 = factors->first(q);
    const double z2r = factors->second(q) * spec.rho0(q);
    const double w = a + (1.0 - a) * z1 * eta_bar;
    num += p_axis.weights[k] * z2r * a * spec.prejudice(q) / w;
    den -= p_axis.weights[k] * z2r * (1.0 - a) * z1 / w;
  }
  if (den <= 1e-12) throw Error(Errc::DenominatorVanishes, fmt::format("denominator = {:.3e}", den));
  return num / (eta_bar * den);
}

GaussianFamilySolution gaussian_family(const ScenarioSpec& spec, const Axis& p_axis,
                                       std::vector<double> phi_star) {
  GaussianFamilySolution sol;
  sol.p = p_axis;
  sol.sigma2 = spec.sigma2;
  sol.eta = eta_profile(spec, p_axis);
  const std::size_t n = p_axis.size();
  sol.m.resize(n);
  sol.w.resize(n);
  sol.rho0.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = p_axis.nodes[i];
    const double a = spec.alpha(p);
    sol.w[i] = a + (1.0 - a) * sol.eta[i];
    sol.m[i] = (a * spec.prejudice(p) + (1.0 - a) * sol.eta[i] * phi_star[i]) / sol.w[i];
    sol.rho0[i] = spec.rho0(p);
  }
  sol.phi_star = std::move(phi_star);
  return sol;
}

GaussianFamilySolution closed_form_product(const ScenarioSpec& spec, const Grid& grid) {
  const double phi = product_phi_star(spec, grid.p);
  return gaussian_family(spec, grid.p, std::vector<double>(grid.p.size(), phi));
}

GaussianSlice gaussian_slice(const ScenarioSpec& spec, const GaussianFamilySolution& sol, double p) {
  double eta = 0.0;
  double weighted_mean = 0.0;
  for (std::size_t k = 0; k < sol.p.size(); ++k) {
    const double z = sol.p.weights[k] * spec.zeta.personal_value(p, sol.p.nodes[k]) * sol.rho0[k];
    eta += z;
    weighted_mean += z * sol.m[k];
  }
  const double phi = eta > 0.0 ? weighted_mean / eta : 0.0;
  const double a = spec.alpha(p);
  GaussianSlice s;
  s.w = a + (1.0 - a) * eta;
  s.m = (a * spec.prejudice(p) + (1.0 - a) * eta * phi) / s.w;
  s.rho0 = spec.rho0(p);
  return s;
}

DensityField gaussian_density(const GaussianFamilySolution& sol, const Grid& grid) {
  if (grid.p.size() != sol.p.size()) throw Error(Errc::GridMismatch, "solution and grid p nodes differ");
  DensityField out(grid);
  for (std::size_t i = 0; i < out.np(); ++i) {
    const double var = sol.variance(i);
    for (std::size_t j = 0; j < out.nx(); ++j) {
      out.at(i, j) = sol.rho0[i] * gaussian_pdf(grid.x.nodes[j], sol.m[i], var);
    }
  }
  return out;
}

std::vector<double> gaussian_marginal(const ScenarioSpec& spec, const GaussianFamilySolution& sol,
                                      const Axis& x_axis, std::size_t refine) {
  refine = std::max<std::size_t>(refine, 1);
  std::vector<double> nodes;
  nodes.reserve((sol.p.size() - 1) * refine + 1);
  for (std::size_t k = 0; k + 1 < sol.p.size(); ++k) {
    const double a = sol.p.nodes[k];
    const double b = sol.p.nodes[k + 1];
    for (std::size_t r = 0; r < refine; ++r) {
      nodes.push_back(a + (b - a) * static_cast<double>(r) / static_cast<double>(refine));
    }
  }
  nodes.push_back(sol.p.nodes.back());
  const Axis fine = Axis::from_nodes(std::move(nodes));

  std::vector<double> out(x_axis.size(), 0.0);
  for (std::size_t k = 0; k < fine.size(); ++k) {
    const GaussianSlice s = gaussian_slice(spec, sol, fine.nodes[k]);
    const double var = spec.sigma2 / (2.0 * s.w);
    const double weight = fine.weights[k] * s.rho0;
    if (weight == 0.0) continue;
    for (std::size_t j = 0; j < x_axis.size(); ++j) {
      out[j] += weight * gaussian_pdf(x_axis.nodes[j], s.m, var);
    }
  }
  return out;
}

double homogeneous_closed_form(double alpha, double sigma2, double x) {
  const double sigma = std::sqrt(sigma2);
  return (erf_eval((alpha + x) / sigma) + erf_eval((alpha - x) / sigma)) / (4.0 * alpha);
}

std::vector<std::size_t> find_modes(std::span<const double> values, double rel_height) {
  std::vector<std::size_t> modes;
  if (values.empty()) return modes;
  const double top = *std::max_element(values.begin(), values.end());
  const double floor = rel_height * top;
  const std::size_t n = values.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (values[j] < floor) continue;
    const bool left = j == 0 || values[j] > values[j - 1];
    // Plateaus count once, at their left edge.
    std::size_t k = j + 1;
    while (k < n && values[k] == values[j]) ++k;
    const bool right = k == n || values[k] < values[j];
    if (left && right) modes.push_back(j);
  }
  return modes;
}

std::size_t count_clusters(std::span<const double> values, double valley_ratio, double rel_height) {
  const auto modes = find_modes(values, rel_height);
  if (modes.empty()) return 0;
  std::size_t clusters = 1;
  for (std::size_t k = 1; k < modes.size(); ++k) {
    const std::size_t a = modes[k - 1];
    const std::size_t b = modes[k];
    const double valley = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(a),
                                            values.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    if (valley <= valley_ratio * std::min(values[a], values[b])) ++clusters;
  }
  return clusters;
}

}  // namespace beliefdyn
