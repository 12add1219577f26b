#include "beliefdyn/transient.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "beliefdyn/errors.hpp"

namespace beliefdyn {

namespace {

void require_unbounded_confidence(const ScenarioSpec& spec) {
  if (!spec.zeta.belief_independent()) {
    throw Error(Errc::BeliefDependentZeta, "transient analysis requires belief-independent influence");
  }
}

// Locates t on the time nodes: index k with t_k <= t < t_{k+1} and t - t_k.
std::pair<std::size_t, double> locate(const std::vector<double>& nodes, double t) {
  if (t < 0.0 || t > nodes.back() * (1.0 + 1e-12)) {
    throw Error(Errc::TimeOutOfRange, fmt::format("t = {} outside [0, {}]", t, nodes.back()));
  }
  if (t >= nodes.back()) return {nodes.size() - 1, 0.0};
  auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
  const auto k = static_cast<std::size_t>(it - nodes.begin()) - 1;
  return {k, t - nodes[k]};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// -expm1(-x): 1 - exp(-x) without cancellation.
double one_minus_exp(double x) { return -std::expm1(-x); }

}  // namespace

double PhiPath::at(std::size_t i, double time) const {
  const auto [k, tau] = locate(t, time);
  const auto ii = static_cast<Eigen::Index>(i);
  const auto kk = static_cast<Eigen::Index>(k);
  if (tau == 0.0) return phi(ii, kk);
  const double h = t[k + 1] - t[k];
  return phi(ii, kk) + (phi(ii, kk + 1) - phi(ii, kk)) * tau / h;
}

double default_transient_dt(const ScenarioSpec& spec, const Axis& p_axis) {
  const auto w = w_profile(spec, p_axis);
  return 0.01 / *std::max_element(w.begin(), w.end());
}

double default_transient_t_final(const ScenarioSpec& spec, const Axis& p_axis) {
  const auto w = w_profile(spec, p_axis);
  return 20.0 / *std::min_element(w.begin(), w.end());
}

MeanVar green_mean_var(const ScenarioSpec& spec, double p, double x0, const PhiPath& path, double t) {
  require_unbounded_confidence(spec);
  const auto [k_end, tau_end] = locate(path.t, t);
  const double a = spec.alpha(p);
  const double eta = spec.zeta.vanishes() ? 0.0 : eval_eta(spec, p, path.p);
  const double w = a + (1.0 - a) * eta;
  const double u = spec.prejudice(p);

  // phi(p, .) by linear interpolation between personality rows.
  const auto& pn = path.p.nodes;
  const double pc = std::clamp(p, pn.front(), pn.back());
  auto hi = static_cast<std::size_t>(std::upper_bound(pn.begin(), pn.end(), pc) - pn.begin());
  hi = std::min(hi, pn.size() - 1);
  const std::size_t lo = hi - 1;
  const double s = (pc - pn[lo]) / (pn[hi] - pn[lo]);
  auto phi_at = [&](std::size_t k) {
    const auto kk = static_cast<Eigen::Index>(k);
    return (1.0 - s) * path.phi(static_cast<Eigen::Index>(lo), kk) + s * path.phi(static_cast<Eigen::Index>(hi), kk);
  };

  double conv = 0.0;
  for (std::size_t k = 1; k <= k_end; ++k) {
    const double decay = std::exp(-w * (path.t[k] - path.t[k - 1]));
    conv = decay * conv + 0.5 * (path.t[k] - path.t[k - 1]) * (decay * phi_at(k - 1) + phi_at(k));
  }
  if (tau_end > 0.0) {
    const double h = path.t[k_end + 1] - path.t[k_end];
    const double phi_t = phi_at(k_end) + (phi_at(k_end + 1) - phi_at(k_end)) * tau_end / h;
    const double decay = std::exp(-w * tau_end);
    conv = decay * conv + 0.5 * tau_end * (decay * phi_at(k_end) + phi_t);
  }
  MeanVar out;
  out.mean = std::exp(-w * t) * x0 + one_minus_exp(w * t) * a * u / w + (1.0 - a) * eta * conv;
  out.variance = spec.sigma2 * one_minus_exp(2.0 * w * t) / (2.0 * w);
  return out;
}

TransientSolution solve_phi_volterra(const ScenarioSpec& spec, const Grid& grid, double t_final, double dt,
                                     const InitialCondition& init) {
  require_unbounded_confidence(spec);
  if (!(dt > 0.0) || !(t_final > 0.0)) {
    throw Error(Errc::InvalidConfig, "time step and horizon must be positive");
  }
  const Axis& axis = grid.p;
  const std::size_t np = axis.size();
  const auto n = static_cast<Eigen::Index>(np);

  TransientSolution sol;
  sol.initial = init;
  sol.sigma2 = spec.sigma2;
  sol.alpha.resize(np);
  sol.u.resize(np);
  sol.rho0.resize(np);
  sol.m0.resize(np);
  const bool silent = spec.zeta.vanishes();
  sol.eta = silent ? std::vector<double>(np, 0.0) : eta_profile(spec, axis);
  sol.w.resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    const double p = axis.nodes[i];
    sol.alpha[i] = spec.alpha(p);
    sol.u[i] = spec.prejudice(p);
    sol.rho0[i] = spec.rho0(p);
    sol.m0[i] = init.mean_at(spec, p);
    sol.w[i] = sol.alpha[i] + (1.0 - sol.alpha[i]) * sol.eta[i];
  }
  const double w_max = *std::max_element(sol.w.begin(), sol.w.end());
  if (dt * w_max > kMaxStepRate) {
    throw Error(Errc::StepTooLarge, fmt::format("dt * max w = {:.4g} exceeds {}", dt * w_max, kMaxStepRate));
  }

  const auto steps = static_cast<std::size_t>(std::ceil(t_final / dt - 1e-9));
  const double h = t_final / static_cast<double>(steps);
  const std::size_t nt = steps + 1;
  const auto ntt = static_cast<Eigen::Index>(nt);
  sol.path.p = axis;
  sol.path.t.resize(nt);
  for (std::size_t k = 0; k < nt; ++k) sol.path.t[k] = h * static_cast<double>(k);
  sol.path.t.back() = t_final;

  // z(i, k) = w_k zeta(p_i, p_k) rho0(p_k) / eta(p_i).
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n);
  if (!silent) {
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t k = 0; k < np; ++k) {
        z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            axis.weights[k] * spec.zeta.personal_value(axis.nodes[i], axis.nodes[k]) * sol.rho0[k] / sol.eta[i];
      }
    }
  }
  Eigen::VectorXd coupling(n);  // alpha_bar eta on the influencing side
  Eigen::VectorXd decay(n);
  Eigen::VectorXd w(n);
  Eigen::VectorXd m0(n);
  Eigen::VectorXd target(n);  // alpha u / w
  for (std::size_t k = 0; k < np; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    coupling(kk) = (1.0 - sol.alpha[k]) * sol.eta[k];
    w(kk) = sol.w[k];
    decay(kk) = std::exp(-sol.w[k] * h);
    m0(kk) = sol.m0[k];
    target(kk) = sol.alpha[k] * sol.u[k] / sol.w[k];
  }
  const Eigen::MatrixXd a = z * coupling.asDiagonal();
  const LuSolver lu(Eigen::MatrixXd::Identity(n, n) - 0.5 * h * a);

  sol.path.phi.resize(n, ntt);
  sol.conv.resize(n, ntt);
  sol.i0.resize(n, ntt);
  sol.i1.resize(n, ntt);
  sol.m.resize(n, ntt);
  sol.var.resize(n, ntt);

  for (std::size_t step = 0; step < nt; ++step) {
    const auto kk = static_cast<Eigen::Index>(step);
    const double t = sol.path.t[step];
    Eigen::VectorXd fade(n);
    Eigen::VectorXd rise(n);
    for (Eigen::Index q = 0; q < n; ++q) {
      fade(q) = std::exp(-w(q) * t);
      rise(q) = one_minus_exp(w(q) * t);
    }
    sol.i0.col(kk) = z * fade.cwiseProduct(m0);
    sol.i1.col(kk) = z * rise.cwiseProduct(target);
    if (step == 0) {
      sol.path.phi.col(0) = sol.i0.col(0);
      sol.conv.col(0).setZero();
    } else {
      const Eigen::VectorXd carried =
          decay.cwiseProduct(sol.conv.col(kk - 1) + 0.5 * h * sol.path.phi.col(kk - 1));
      const Eigen::VectorXd rhs = sol.i0.col(kk) + sol.i1.col(kk) + a * carried;
      sol.path.phi.col(kk) = lu.solve(rhs);
      sol.conv.col(kk) = carried + 0.5 * h * sol.path.phi.col(kk);
    }
    for (Eigen::Index q = 0; q < n; ++q) {
      sol.m(q, kk) = fade(q) * m0(q) + rise(q) * target(q) + coupling(q) * sol.conv(q, kk);
      const double fade2 = std::exp(-2.0 * w(q) * t);
      sol.var(q, kk) = fade2 * init.variance_at() + spec.sigma2 * one_minus_exp(2.0 * w(q) * t) / (2.0 * w(q));
    }
  }
  return sol;
}

TransientSolution solve_transient(const ScenarioSpec& spec, const Grid& grid, const InitialCondition& init,
                                  TransientOptions options) {
  require_unbounded_confidence(spec);
  const double dt = options.dt > 0.0 ? options.dt : default_transient_dt(spec, grid.p);
  const double t_final = options.t_final > 0.0 ? options.t_final : default_transient_t_final(spec, grid.p);
  return solve_phi_volterra(spec, grid, t_final, dt, init);
}

MeanVar slice_moments(const TransientSolution& sol, std::size_t i, double t) {
  const auto [k, tau] = locate(sol.path.t, t);
  const auto ii = static_cast<Eigen::Index>(i);
  const auto kk = static_cast<Eigen::Index>(k);
  if (tau == 0.0) return {sol.m(ii, kk), sol.var(ii, kk)};
  const double w = sol.w[i];
  const double h = sol.path.t[k + 1] - sol.path.t[k];
  const double phi_k = sol.path.phi(ii, kk);
  const double phi_t = phi_k + (sol.path.phi(ii, kk + 1) - phi_k) * tau / h;
  const double decay = std::exp(-w * tau);
  const double conv = decay * sol.conv(ii, kk) + 0.5 * tau * (decay * phi_k + phi_t);
  MeanVar out;
  out.mean = std::exp(-w * t) * sol.m0[i] + one_minus_exp(w * t) * sol.alpha[i] * sol.u[i] / w +
             (1.0 - sol.alpha[i]) * sol.eta[i] * conv;
  out.variance = std::exp(-2.0 * w * t) * sol.initial.variance_at() +
                 sol.sigma2 * one_minus_exp(2.0 * w * t) / (2.0 * w);
  return out;
}

DensityField density_at(const TransientSolution& sol, double t, const Grid& grid) {
  if (grid.p.size() != sol.path.p.size()) {
    throw Error(Errc::GridMismatch, "grid p nodes differ from the transient solution");
  }
  DensityField out(grid);
  const auto& xs = grid.x.nodes;
  const std::size_t nx = xs.size();
  double spacing = 0.0;
  for (std::size_t j = 1; j < nx; ++j) spacing = std::max(spacing, xs[j] - xs[j - 1]);

  for (std::size_t i = 0; i < out.np(); ++i) {
    const MeanVar mv = slice_moments(sol, i, t);
    const double sd = std::sqrt(mv.variance);
    auto row = out.row(i);
    if (sd >= 2.0 * spacing) {
      const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * mv.variance);
      for (std::size_t j = 0; j < nx; ++j) {
        const double zz = xs[j] - mv.mean;
        row[j] = sol.rho0[i] * norm * std::exp(-0.5 * zz * zz / mv.variance);
      }
      continue;
    }
    // Cell averages over [midpoint_{j-1}, midpoint_j]; a zero variance is a step.
    auto cdf = [&mv, sd](double edge) {
      if (sd == 0.0) return edge < mv.mean ? 0.0 : 1.0;
      return normal_cdf((edge - mv.mean) / sd);
    };
    double left = cdf(xs.front());
    for (std::size_t j = 0; j < nx; ++j) {
      const double right_edge = j + 1 < nx ? 0.5 * (xs[j] + xs[j + 1]) : xs.back();
      const double right = j + 1 < nx ? cdf(right_edge) : 1.0;
      const double mass = j == 0 ? right : right - left;
      row[j] = sol.rho0[i] * mass / grid.x.weights[j];
      left = right;
    }
  }
  return out;
}

double laplace_I2(const ScenarioSpec& spec, double s, const Axis& p_axis) {
  const auto factors = spec.zeta.factors();
  if (!factors || !spec.zeta.belief_independent()) {
    throw Error(Errc::Unsupported, "the Laplace reduction requires a product-form influence");
  }
  if (spec.zeta.vanishes()) return 0.0;
  double eta_bar = 0.0;
  for (std::size_t k = 0; k < p_axis.size(); ++k) {
    eta_bar += p_axis.weights[k] * factors->second(p_axis.nodes[k]) * spec.rho0(p_axis.nodes[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < p_axis.size(); ++k) {
    const double p = p_axis.nodes[k];
    const double a = spec.alpha(p);
    const double z1 = factors->first(p);
    const double w = a + (1.0 - a) * z1 * eta_bar;
    const double den = s + w;
    if (std::abs(den) <= 1e-14 * std::max(1.0, std::abs(s))) {
      throw Error(Errc::PoleOnPath, fmt::format("s + w(p) vanishes at p = {}", p));
    }
    sum += p_axis.weights[k] * z1 * factors->second(p) * spec.rho0(p) * (1.0 - a) / den;
  }
  return sum;
}

double laplace_piecewise_linear(const std::vector<double>& t, const std::vector<double>& f, double s) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double h = t[k + 1] - t[k];
    const double ea = std::exp(-s * t[k]);
    const double x = s * h;
    // int_0^h exp(-s tau) dtau and int_0^h exp(-s tau) tau dtau, factored by e^{-s t_k}.
    const double flat = one_minus_exp(x) / s;
    const double ramp = (one_minus_exp(x) - x * std::exp(-x)) / (s * s);
    sum += ea * (f[k] * flat + (f[k + 1] - f[k]) / h * ramp);
  }
  return sum;
}

std::vector<LaplaceResidual> laplace_consistency_check(const ScenarioSpec& spec, const TransientSolution& sol,
                                                       const std::vector<double>& s_samples) {
  const double t_final = sol.path.t_final();
  for (const double s : s_samples) {
    if (!(s > 0.0)) throw Error(Errc::InvalidConfig, "Laplace samples must be positive");
    if (std::exp(-s * t_final) >= 1e-10) {
      throw Error(Errc::PathTooShort,
                  fmt::format("exp(-{} * {}) >= 1e-10; extend t_final beyond {:.4g}", s, t_final,
                              std::log(1e10) / s));
    }
  }
  std::vector<LaplaceResidual> out;
  const std::size_t np = sol.path.p.size();
  const std::size_t nt = sol.path.t.size();
  std::vector<double> series(nt);
  auto transform_row = [&](const Eigen::MatrixXd& m, std::size_t i, double s) {
    for (std::size_t k = 0; k < nt; ++k) {
      series[k] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    return laplace_piecewise_linear(sol.path.t, series, s);
  };
  for (const double s : s_samples) {
    const double i2 = laplace_I2(spec, s, sol.path.p);
    LaplaceResidual worst{s, 0.0, 0.0, -1.0};
    for (std::size_t i = 0; i < np; ++i) {
      if (!(sol.eta[i] > 0.0) && !spec.zeta.vanishes()) continue;
      const double numeric = transform_row(sol.path.phi, i, s);
      const double predicted = (transform_row(sol.i0, i, s) + transform_row(sol.i1, i, s)) / (1.0 - i2);
      const double scale = std::max(std::abs(numeric), std::abs(predicted));
      // Both sides vanishing to rounding counts as exact agreement.
      const double rel = scale < 1e-13 ? 0.0 : std::abs(numeric - predicted) / std::max(std::abs(predicted), 1e-12);
      if (rel > worst.relative) worst = {s, numeric, predicted, rel};
    }
    out.push_back(worst);
  }
  return out;
}

}  // namespace beliefdyn
