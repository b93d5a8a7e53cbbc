#pragma once

// Time-stepping engines and their comparisons: the heavy-ball recursion, the
// truncated memoryless (one-step) recursion, numerical integration of the
// modified equation, the principal (Hessian-filtered) iteration, closed-form
// solutions for 1-D quadratics, and the least-squares modified loss.

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hb/bseries.hpp"
#include "hb/coefficients.hpp"
#include "hb/losses.hpp"
#include "hb/util.hpp"

namespace hb {

struct DivergedError : std::runtime_error {
  int last_finite_index;
  DivergedError(int idx, const std::string& what)
      : std::runtime_error(what), last_finite_index(idx) {}
};

inline constexpr double kDivergenceNorm = 1e8;

// ---------------------------------------------------------------------------
// Run configuration shared by all engines. When `family` is set the run is
// mini-batch: step s uses batch oracle s mod C (current permutation of the
// family), and the initial velocity is forced to zero.

struct RunConfig {
  double beta = 0.5;
  double h = 0.01;
  double horizon = 1.0;
  int order = 2;  // truncation order p for memoryless / modified-equation runs
  Vec theta0;
  Vec v0;  // empty means zero
  OraclePtr loss;                           // full-batch loss (always set)
  std::shared_ptr<MiniBatchFamily> family;  // set for mini-batch runs
  int substeps = 16;       // RK4 substeps per interval of length h
  std::string loss_tag;    // free-form label folded into the config hash
  std::uint64_t seed = 0;  // permutation seed already applied, for the hash

  bool full_batch() const { return !family; }

  int steps() const { return static_cast<int>(std::floor(horizon / h + 1e-9)); }

  void validate() const {
    if (!(beta >= 0.0 && beta < 1.0))
      throw std::invalid_argument("RunConfig: beta must lie in [0, 1)");
    if (!(h > 0.0 && h < 0.5))
      throw std::invalid_argument("RunConfig: h must lie in (0, 1/2)");
    if (steps() < 1)
      throw std::invalid_argument("RunConfig: horizon must cover one step");
    if (!loss) throw std::invalid_argument("RunConfig: loss not set");
    if (theta0.empty() ||
        static_cast<int>(theta0.size()) != loss->dim())
      throw std::invalid_argument("RunConfig: theta0 dimension mismatch");
    if (!v0.empty() && v0.size() != theta0.size())
      throw std::invalid_argument("RunConfig: v0 dimension mismatch");
    if (family && !v0.empty())
      for (double v : v0)
        if (v != 0.0)
          throw std::invalid_argument(
              "RunConfig: mini-batch runs require v0 = 0");
    if (order < 1 || order > 4)
      throw std::invalid_argument("RunConfig: order must lie in [1, 4]");
    if (substeps < 1)
      throw std::invalid_argument("RunConfig: substeps must be positive");
  }

  Vec initial_velocity() const { return v0.empty() ? zeros(theta0.size()) : v0; }

  // Loss sequence indexed by step: constant for full-batch, cyclic batches
  // for mini-batch (oracles are materialized once, so repeated lookups are
  // cheap and deterministic).
  LossSequence losses() const {
    if (full_batch()) return constant_losses(loss);
    auto batches = std::make_shared<std::vector<OraclePtr>>();
    for (int k = 0; k < family->batch_count(); ++k)
      batches->push_back(family->batch_oracle(k));
    return [batches](int s) {
      return (*batches)[s % static_cast<int>(batches->size())];
    };
  }

  std::string hash_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "beta=" << beta << ";h=" << h << ";T=" << horizon
       << ";p=" << order << ";substeps=" << substeps << ";seed=" << seed
       << ";loss=" << loss_tag << ";theta0=";
    for (double v : theta0) os << v << ",";
    os << ";v0=";
    for (double v : v0) os << v << ",";
    if (family)
      os << ";B=" << family->batch_size() << ";P=" << family->sample_count();
    return os.str();
  }
  std::uint64_t config_hash() const { return fnv1a(hash_string()); }
};

struct Trajectory {
  std::string engine;
  std::uint64_t config_hash = 0;
  std::vector<double> times;       // t_n = n h
  std::vector<Vec> states;         // theta^{(n)}
  std::vector<Vec> velocities;     // v^{(n)} where the engine has one
};

namespace detail {

inline void check_state(const Vec& theta, int n) {
  if (!all_finite(theta) || norm2(theta) > kDivergenceNorm)
    throw DivergedError(n - 1, "iterate diverged at step " + std::to_string(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Heavy-ball recursion. Both the full-batch and the mini-batch versions share
//   v^{(n+1)} = beta v^{(n)} - grad L^{(n)}(theta^{(n)}),
//   theta^{(n+1)} = theta^{(n)} + h v^{(n+1)},
// which reproduces theta^{(n+1)} = theta^{(n)} - h grad L + h beta v^{(n)}
// for a constant loss and the cumulative mini-batch form when v^{(0)} = 0.

inline Trajectory hb_run(const RunConfig& cfg) {
  cfg.validate();
  LossSequence losses = cfg.losses();
  Trajectory traj{"hb", cfg.config_hash(), {}, {}, {}};
  Vec theta = cfg.theta0, v = cfg.initial_velocity();
  traj.times.push_back(0.0);
  traj.states.push_back(theta);
  traj.velocities.push_back(v);
  const int n_steps = cfg.steps();
  for (int n = 0; n < n_steps; ++n) {
    Vec g = losses(n)->contract(theta, 1, {});
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = cfg.beta * v[i] - g[i];
    axpy(cfg.h, v, theta);
    detail::check_state(theta, n + 1);
    traj.times.push_back((n + 1) * cfg.h);
    traj.states.push_back(theta);
    traj.velocities.push_back(v);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Memoryless (one-step) recursion truncated at order p:
//   theta^{(n+1)} = theta^{(n)} + sum_{j=1}^{p} h^j f_j^{(n)}(theta^{(n)}).

inline Trajectory memoryless_run(const RunConfig& cfg) {
  cfg.validate();
  LossSequence losses = cfg.losses();
  Trajectory traj{"memoryless", cfg.config_hash(), {}, {}, {}};
  Vec theta = cfg.theta0;
  traj.times.push_back(0.0);
  traj.states.push_back(theta);
  const int n_steps = cfg.steps();
  for (int n = 0; n < n_steps; ++n) {
    CompensatedVec inc(theta.size());
    if (cfg.full_batch()) {
      WeightTable wt(cfg.beta, n);
      for (int j = 1; j <= cfg.order; ++j)
        inc.add(std::pow(cfg.h, j),
                f_full_batch(cfg.beta, n, *cfg.loss, theta, j, &wt));
    } else {
      CoefficientContext ctx(cfg.beta, n, losses, theta);
      for (int j = 1; j <= cfg.order; ++j)
        inc.add(std::pow(cfg.h, j), f_treesum(ctx, j));
    }
    theta = vsum(theta, inc.sum);
    detail::check_state(theta, n + 1);
    traj.times.push_back((n + 1) * cfg.h);
    traj.states.push_back(theta);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Modified equation. On each interval [t_n, t_{n+1}] integrate
//   theta' = sum_{i=0}^{p-1} h^i fbar_{i+1}^{(n)}(theta)
// with RK4 substeps. Three routes for the right-hand side:
//   FiniteN  — exact step-dependent coefficients. Full-batch uses the
//              tree-indexed series (scalar weights, then the BEA recursion on
//              numeric series); mini-batch (p <= 3) uses finite-difference
//              Lie derivatives of the recursive coefficients.
//   Limiting — the n -> infinity full-batch series, frozen across steps.

enum class OdeRoute { FiniteN, Limiting };

namespace detail {

// Full-batch increment series at interval n: alpha(leaf) = -sum_{k<=n} beta^k,
// alpha(tau) = -beta w_{tau,1}^{(n)} / sigma(tau) for |tau| >= 2.
inline NumericSeries full_batch_increment_series(double beta, int n,
                                                 int order) {
  NumericSeries s(order);
  double geom = 0.0, bpow = 1.0;
  for (int k = 0; k <= n; ++k) {
    geom += bpow;
    bpow *= beta;
  }
  s.coeffs.emplace(RootedTree(), -geom);
  if (n >= 1) {
    WeightTable wt(beta, n);
    for (int m = 2; m <= order; ++m)
      for (const RootedTree& t : enumerate_trees(m))
        s.coeffs.emplace(
            t, -beta * wt.weights(t)[1] / symmetry_coefficient(t));
  }
  return s;
}

inline NumericSeries numeric_bea(const NumericSeries& f) {
  return bea_series(f, [](int i) { return -1.0 / factorial(i); });
}

// One RK4 pass over [0, h] with `substeps` stages of an autonomous field.
inline Vec rk4_integrate(const std::function<Vec(const Vec&)>& rhs,
                         Vec theta, double h, int substeps) {
  const double dt = h / substeps;
  for (int s = 0; s < substeps; ++s) {
    Vec k1 = rhs(theta);
    Vec x2 = theta;
    axpy(0.5 * dt, k1, x2);
    Vec k2 = rhs(x2);
    Vec x3 = theta;
    axpy(0.5 * dt, k2, x3);
    Vec k3 = rhs(x3);
    Vec x4 = theta;
    axpy(dt, k3, x4);
    Vec k4 = rhs(x4);
    for (std::size_t i = 0; i < theta.size(); ++i)
      theta[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return theta;
}

// Mini-batch fbar_j^{(n)} (j <= 3) as callable fields, using fourth-order
// central differences for the Lie derivatives D_k w = grad w [fbar_k].
struct MiniBatchBea {
  double beta;
  int n;
  LossSequence losses;
  int order;

  Vec f(int j, const Vec& theta) const {
    CoefficientContext ctx(beta, n, losses, theta);
    return f_treesum(ctx, j);
  }
  Vec fbar(int j, const Vec& theta) const {
    if (j == 1) return f(1, theta);
    if (j == 2) {
      Vec u = fbar1_at(theta);
      Vec d = lie(1, [this](const Vec& x) { return fbar(1, x); }, theta, u);
      Vec r = f(2, theta);
      axpy(-0.5, d, r);
      return r;
    }
    // j == 3: fbar3 = f3 - (D1 fbar2 + D2 fbar1)/2 - D1 D1 fbar1 / 6.
    Vec r = f(3, theta);
    Vec d12 = lie(1, [this](const Vec& x) { return fbar(2, x); }, theta,
                  fbar1_at(theta));
    Vec d21 = lie(2, [this](const Vec& x) { return fbar(1, x); }, theta,
                  fbar(2, theta));
    Vec d11 = lie(1,
                  [this](const Vec& x) {
                    return lie(1, [this](const Vec& y) { return fbar(1, y); },
                               x, fbar1_at(x));
                  },
                  theta, fbar1_at(theta));
    axpy(-0.5, d12, r);
    axpy(-0.5, d21, r);
    axpy(-1.0 / 6.0, d11, r);
    return r;
  }
  Vec rhs(const Vec& theta, double h) const {
    CompensatedVec acc(theta.size());
    for (int j = 1; j <= order; ++j)
      acc.add(std::pow(h, j - 1), fbar(j, theta));
    return acc.sum;
  }

 private:
  Vec fbar1_at(const Vec& theta) const { return f(1, theta); }
  Vec lie(int /*k*/, const std::function<Vec(const Vec&)>& w, const Vec& theta,
          const Vec& dir) const {
    double step = std::pow(2.2e-16, 0.25) * (1.0 + norm2(theta));
    return fd_directional(w, theta, dir, step);
  }
};

}  // namespace detail

inline Trajectory modified_ode_run(const RunConfig& cfg,
                                   OdeRoute route = OdeRoute::FiniteN) {
  cfg.validate();
  Trajectory traj{"modified-ode", cfg.config_hash(), {}, {}, {}};
  Vec theta = cfg.theta0;
  traj.times.push_back(0.0);
  traj.states.push_back(theta);
  const int n_steps = cfg.steps();
  NumericSeries limit(cfg.order);
  if (route == OdeRoute::Limiting)
    limit = to_numeric(limiting_bea_series(cfg.order), cfg.beta);
  LossSequence losses = cfg.losses();
  for (int n = 0; n < n_steps; ++n) {
    std::function<Vec(const Vec&)> rhs;
    if (route == OdeRoute::Limiting) {
      rhs = [&](const Vec& x) {
        return scaled(eval_series(limit, cfg.h, x, *cfg.loss), 1.0 / cfg.h);
      };
    } else if (cfg.full_batch()) {
      NumericSeries fbar = detail::numeric_bea(
          detail::full_batch_increment_series(cfg.beta, n, cfg.order));
      rhs = [&, fbar](const Vec& x) {
        return scaled(eval_series(fbar, cfg.h, x, *cfg.loss), 1.0 / cfg.h);
      };
    } else {
      if (cfg.order > 3)
        throw CapabilityError(
            "modified_ode_run: mini-batch route supports order <= 3");
      detail::MiniBatchBea bea{cfg.beta, n, losses, cfg.order};
      rhs = [&, bea](const Vec& x) { return bea.rhs(x, cfg.h); };
    }
    theta = detail::rk4_integrate(rhs, theta, cfg.h, cfg.substeps);
    detail::check_state(theta, n + 1);
    traj.times.push_back((n + 1) * cfg.h);
    traj.states.push_back(theta);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Error measures and convergence-order estimation.

inline double global_error(const Trajectory& a, const Trajectory& b) {
  if (a.states.size() != b.states.size())
    throw std::invalid_argument("global_error: trajectory length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i)
    m = std::max(m, norm2(vdiff(a.states[i], b.states[i])));
  return m;
}

// Least-squares slope of log(err) against log(h).
inline double order_estimate(const std::vector<double>& hs,
                             const std::vector<double>& errs) {
  if (hs.size() != errs.size() || hs.size() < 3)
    throw std::invalid_argument("order_estimate: need matching grids, >= 3");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) {
    double x = std::log(hs[i]), y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// 1-D quadratic (L = theta^2 / 2) closed forms. The two characteristic roots
//   lambda_{+-} = (1 + beta - h +- sqrt((1 - beta - h)^2 - 4 beta h)) / 2
// may be complex; the principal branch of sqrt/log is used throughout.

struct QuadRoots {
  std::complex<double> plus, minus;
};

inline QuadRoots quad_roots(double beta, double h) {
  std::complex<double> disc((1 - beta - h) * (1 - beta - h) - 4 * beta * h,
                            0.0);
  std::complex<double> s = std::sqrt(disc);
  return {(1.0 + beta - h + s) / 2.0, (1.0 + beta - h - s) / 2.0};
}

// Exact heavy-ball iterate (theta^{(n)}, v^{(n)}) for L = theta^2 / 2.
inline std::pair<double, double> quad_closed_form(double theta0, double v0,
                                                  double beta, double h,
                                                  int n) {
  auto [lp, lm] = quad_roots(beta, h);
  std::complex<double> den = lp - lm;
  std::complex<double> lpn = std::pow(lp, n), lmn = std::pow(lm, n);
  std::complex<double> th =
      (((1.0 - h - lm) * theta0 + h * beta * v0) * lpn +
       ((lp + h - 1.0) * theta0 - h * beta * v0) * lmn) /
      den;
  std::complex<double> vv = (((beta - lm) * v0 - theta0) * lpn +
                             (theta0 + (lp - beta) * v0) * lmn) /
                            den;
  return {th.real(), vv.real()};
}

// Initial velocity placing (theta0, v0) on the invariant manifold
// theta^{(n)} = lambda_+^n theta0, valid when lambda_+ is real.
inline double quad_manifold_velocity(double theta0, double beta, double h) {
  auto [lp, lm] = quad_roots(beta, h);
  return ((lp.real() + h - 1.0) / (h * beta)) * theta0;
}

// Velocity/position ratio of the second (oscillatory-window) manifold
// theta^{(n)} = lambda_-^n theta0, for (1 + sqrt(beta))^2 < h < 2 + 2 beta.
inline double quad_second_manifold_ratio(double beta, double h) {
  auto [lp, lm] = quad_roots(beta, h);
  return (h + lm.real() - 1.0) / (h * beta);
}

// Continuous interpolation theta(t) = theta0 exp((t/h) log lambda) of the
// manifold iterate; branch = +1 picks lambda_+, -1 picks lambda_-.
inline std::complex<double> quad_manifold_flow(double theta0, double beta,
                                               double h, double t,
                                               int branch = +1) {
  auto [lp, lm] = quad_roots(beta, h);
  std::complex<double> l = branch >= 0 ? lp : lm;
  return theta0 * std::exp((t / h) * std::log(l));
}

// ---------------------------------------------------------------------------
// Principal iteration: theta^{(n+1)} = theta - h sigma_beta(h H(theta)) g,
// with sigma_beta(z) = 2 / (1 - beta + z + sqrt((1-beta-z)^2 - 4 beta z)).
// The matrix function requires h * specnorm(H) < R_beta = (1 - sqrt(beta))^2.

inline double radius_of_convergence(double beta) {
  double r = 1.0 - std::sqrt(beta);
  return r * r;
}

inline double sigma_beta(double beta, double z) {
  double disc = (1 - beta - z) * (1 - beta - z) - 4 * beta * z;
  if (disc < 0.0)
    throw CapabilityError("sigma_beta: argument beyond the branch point");
  return 2.0 / (1 - beta + z + std::sqrt(disc));
}

namespace detail {

inline Eigen::MatrixXd hessian_matrix(const DerivativeOracle& oracle,
                                      const Vec& theta) {
  const int d = oracle.dim();
  Eigen::MatrixXd m(d, d);
  for (int j = 0; j < d; ++j) {
    Vec e = zeros(d);
    e[j] = 1.0;
    Vec col = oracle.contract(theta, 2, {e});
    for (int i = 0; i < d; ++i) m(i, j) = col[i];
  }
  return 0.5 * (m + m.transpose());
}

}  // namespace detail

inline Trajectory principal_iteration_run(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.full_batch())
    throw std::invalid_argument("principal_iteration_run: full-batch only");
  Trajectory traj{"principal-iteration", cfg.config_hash(), {}, {}, {}};
  Vec theta = cfg.theta0;
  traj.times.push_back(0.0);
  traj.states.push_back(theta);
  const double rbeta = radius_of_convergence(cfg.beta);
  const int d = cfg.loss->dim();
  const int n_steps = cfg.steps();
  for (int n = 0; n < n_steps; ++n) {
    Eigen::MatrixXd hess = detail::hessian_matrix(*cfg.loss, theta);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
    double spec = 0.0;
    for (int i = 0; i < d; ++i)
      spec = std::max(spec, std::fabs(eig.eigenvalues()[i]));
    if (cfg.h * spec >= rbeta) {
      std::ostringstream os;
      os << "principal_iteration_run: h * specnorm(Hessian) = "
         << cfg.h * spec << " >= R_beta = " << rbeta;
      throw CapabilityError(os.str());
    }
    Vec g = cfg.loss->contract(theta, 1, {});
    Eigen::VectorXd gv(d);
    for (int i = 0; i < d; ++i) gv[i] = g[i];
    Eigen::VectorXd w = eig.eigenvectors().transpose() * gv;
    for (int i = 0; i < d; ++i)
      w[i] *= sigma_beta(cfg.beta, cfg.h * eig.eigenvalues()[i]);
    Eigen::VectorXd filtered = eig.eigenvectors() * w;
    for (int i = 0; i < d; ++i) theta[i] -= cfg.h * filtered[i];
    detail::check_state(theta, n + 1);
    traj.times.push_back((n + 1) * cfg.h);
    traj.states.push_back(theta);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Principal flow for a quadratic loss L = theta' A theta / 2 - b' theta:
// per eigenmode x_i of A with eigenvalue a_i,
//   x_i(t) = x_i(0) exp((t/h) log lambda_+(h a_i)),
// reported in complex arithmetic (principal branch throughout).

struct ComplexTrajectory {
  std::string engine;
  std::uint64_t config_hash = 0;
  std::vector<double> times;
  std::vector<std::vector<std::complex<double>>> states;
};

inline ComplexTrajectory principal_flow_quadratic(const RunConfig& cfg,
                                                  const Mat& a, const Vec& b) {
  cfg.validate();
  const int d = static_cast<int>(cfg.theta0.size());
  Eigen::MatrixXd am(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) am(i, j) = a[i][j];
  Eigen::VectorXd bv(d);
  for (int i = 0; i < d; ++i) bv[i] = b[i];
  Eigen::VectorXd star = am.fullPivLu().solve(bv);
  if ((am * star - bv).norm() > 1e-10 * (1.0 + bv.norm()))
    throw std::invalid_argument(
        "principal_flow_quadratic: singular quadratic form");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(am);
  Eigen::VectorXd x0(d);
  for (int i = 0; i < d; ++i) x0[i] = cfg.theta0[i] - star[i];
  Eigen::VectorXd modes = eig.eigenvectors().transpose() * x0;
  ComplexTrajectory traj{"principal-flow", cfg.config_hash(), {}, {}};
  const int n_steps = cfg.steps();
  for (int n = 0; n <= n_steps; ++n) {
    double t = n * cfg.h;
    Eigen::VectorXcd xc(d);
    for (int i = 0; i < d; ++i) {
      auto [lp, lm] = quad_roots(cfg.beta, cfg.h * eig.eigenvalues()[i]);
      xc[i] = modes[i] * std::exp((t / cfg.h) * std::log(lp));
    }
    Eigen::VectorXcd th = eig.eigenvectors() * xc;
    std::vector<std::complex<double>> row(d);
    for (int i = 0; i < d; ++i) row[i] = th[i] + star[i];
    traj.times.push_back(t);
    traj.states.push_back(std::move(row));
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Least-squares modified loss: with M = X'X / N and theta* the normal-
// equation solution, Ltilde(theta) = (theta - theta*)' sigma_beta(h M) M
// (theta - theta*) / 2. Reports the per-eigenvalue filter gains and a plain
// gradient-descent trajectory on Ltilde.

struct LstsqModified {
  Vec theta_star;
  std::vector<std::pair<double, double>> gains;  // (eigenvalue, sigma gain)
  Trajectory traj;
};

inline LstsqModified least_squares_modified(const Mat& x, const Vec& y,
                                            const RunConfig& cfg) {
  cfg.validate();
  const int n_rows = static_cast<int>(x.size());
  const int d = static_cast<int>(x[0].size());
  Eigen::MatrixXd xm(n_rows, d);
  Eigen::VectorXd yv(n_rows);
  for (int p = 0; p < n_rows; ++p) {
    yv[p] = y[p];
    for (int j = 0; j < d; ++j) xm(p, j) = x[p][j];
  }
  Eigen::MatrixXd m = xm.transpose() * xm / n_rows;
  Eigen::VectorXd rhs = xm.transpose() * yv / n_rows;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double rbeta = radius_of_convergence(cfg.beta);
  if (cfg.h * eig.eigenvalues().cwiseAbs().maxCoeff() >= rbeta)
    throw CapabilityError(
        "least_squares_modified: h * specnorm(X'X/N) >= R_beta");
  Eigen::VectorXd star = m.fullPivLu().solve(rhs);
  LstsqModified out;
  out.theta_star.assign(star.data(), star.data() + d);
  Eigen::VectorXd gains(d);
  for (int i = 0; i < d; ++i) {
    gains[i] = sigma_beta(cfg.beta, cfg.h * eig.eigenvalues()[i]);
    out.gains.emplace_back(eig.eigenvalues()[i], gains[i]);
  }
  out.traj = Trajectory{"lstsq-gd", cfg.config_hash(), {}, {}, {}};
  Eigen::VectorXd theta(d);
  for (int i = 0; i < d; ++i) theta[i] = cfg.theta0[i];
  const int n_steps = cfg.steps();
  for (int n = 0; n <= n_steps; ++n) {
    out.traj.times.push_back(n * cfg.h);
    out.traj.states.emplace_back(theta.data(), theta.data() + d);
    if (n == n_steps) break;
    // grad Ltilde = U sigma(h Lambda) Lambda U' (theta - theta*).
    Eigen::VectorXd w = eig.eigenvectors().transpose() * (theta - star);
    for (int i = 0; i < d; ++i) w[i] *= gains[i] * eig.eigenvalues()[i];
    theta -= cfg.h * (eig.eigenvectors() * w);
  }
  return out;
}

}  // namespace hb
