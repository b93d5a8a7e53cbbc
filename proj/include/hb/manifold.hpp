#pragma once

// Invariant-manifold computation for 1-D losses: the fixed point g_h of
//   T g (zeta) = (1 / (h (1 - beta))) (L'(zeta) - L'(theta)) + beta g(theta),
// where theta is the preimage of zeta under
//   zeta = theta - h / (1 - beta) L'(theta) + h^2 beta g(theta),
// solved by Picard iteration on a uniform grid with cubic interpolation, plus
// the attractivity diagnostic for off-manifold heavy-ball runs.

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "hb/losses.hpp"
#include "hb/util.hpp"

namespace hb {

// Scalar function on a uniform grid with Catmull-Rom cubic interpolation.
// Queries outside the grid are answered by linear extrapolation from the
// boundary and flagged. (Plain clamping would distort the fixed-point sweep:
// the preimage map expands by 1 / lambda_+, so queries near the grid edge
// routinely overshoot it by a few percent.)
struct GridFunction {
  double xmin = 0.0, dx = 1.0;
  std::vector<double> vals;
  mutable bool clamped = false;  // an out-of-range query occurred

  double xmax() const { return xmin + dx * (vals.size() - 1); }

  double eval(double x) const { return interp(x, false); }
  double deriv(double x) const { return interp(x, true); }

 private:
  double interp(double x, bool want_deriv) const {
    const int n = static_cast<int>(vals.size());
    double over = 0.0;
    if (x < xmin || x > xmax()) {
      clamped = true;
      double xc = std::min(std::max(x, xmin), xmax());
      over = x - xc;
      x = xc;
    }
    int i = static_cast<int>(std::floor((x - xmin) / dx));
    i = std::min(std::max(i, 0), n - 2);
    double u = (x - (xmin + i * dx)) / dx;
    // Ghost points by linear reflection so the boundary intervals (and the
    // boundary tangents feeding the extrapolation) are exact on linear data.
    auto at = [&](int k) {
      if (k < 0) return 2.0 * vals[0] - vals[-k];
      if (k >= n) return 2.0 * vals[n - 1] - vals[2 * n - 2 - k];
      return vals[k];
    };
    double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
    // Catmull-Rom basis: value and derivative with respect to x.
    double a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
    double b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    double c = 0.5 * (p2 - p0);
    double d = (3 * a * u * u + 2 * b * u + c) / dx;
    if (want_deriv) return d;
    return ((a * u + b) * u + c) * u + p1 + d * over;
  }
};

struct ManifoldResult {
  GridFunction g;
  int iterations = 0;
  double final_update = 0.0;  // sup-norm of the last Picard update
  double residual = 0.0;      // sup invariance residual on verification grid
  bool converged = false;
  bool clamp_events = false;
  int newton_failures = 0;
};

namespace detail {

// Solve F(theta) = map(theta) - zeta = 0 with Newton steps safeguarded by a
// sign-change bracket (bisection fallback when a step leaves the bracket).
inline double solve_preimage(const std::function<double(double)>& map,
                             const std::function<double(double)>& dmap,
                             double zeta, bool& failed) {
  auto f = [&](double th) { return map(th) - zeta; };
  double width = 1e-2 * (1.0 + std::fabs(zeta));
  double lo = zeta - width, hi = zeta + width;
  for (int k = 0; k < 60 && f(lo) * f(hi) > 0.0; ++k) {
    width *= 2.0;
    lo = zeta - width;
    hi = zeta + width;
  }
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0.0) {
    failed = true;
    return zeta;
  }
  if (flo > 0.0) {
    std::swap(lo, hi);
    std::swap(flo, fhi);
  }
  double theta = zeta;
  for (int it = 0; it < 100; ++it) {
    double val = f(theta);
    if (std::fabs(val) < 1e-14 * (1.0 + std::fabs(zeta))) return theta;
    if (val < 0.0)
      lo = theta;
    else
      hi = theta;
    double der = dmap(theta);
    double next = std::fabs(der) > 1e-14 ? theta - val / der : 0.5 * (lo + hi);
    if ((next - lo) * (next - hi) >= 0.0) next = 0.5 * (lo + hi);
    if (std::fabs(next - theta) < 1e-16 * (1.0 + std::fabs(zeta)))
      return next;
    theta = next;
  }
  failed = true;
  return theta;
}

}  // namespace detail

inline ManifoldResult manifold_fixed_point(const DerivativeOracle& loss,
                                           double beta, double h,
                                           double radius,
                                           int grid_points = 2001,
                                           int max_iters = 500,
                                           double tol = 1e-10) {
  if (loss.dim() != 1)
    throw CapabilityError("manifold_fixed_point: 1-D losses only");
  if (!(beta > 0.0 && beta < 1.0) || !(h > 0.0))
    throw std::invalid_argument("manifold_fixed_point: parameter range");
  if (grid_points < 5)
    throw std::invalid_argument("manifold_fixed_point: grid too coarse");
  auto lp = [&](double th) { return loss.contract({th}, 1, {})[0]; };
  auto lpp = [&](double th) { return loss.contract({th}, 2, {{1.0}})[0]; };

  ManifoldResult out;
  out.g.xmin = -radius;
  out.g.dx = 2.0 * radius / (grid_points - 1);
  out.g.vals.assign(grid_points, 0.0);

  const double c1 = h / (1.0 - beta);
  for (int it = 1; it <= max_iters; ++it) {
    GridFunction next = out.g;
    auto map = [&](double th) {
      return th - c1 * lp(th) + h * h * beta * out.g.eval(th);
    };
    auto dmap = [&](double th) {
      return 1.0 - c1 * lpp(th) + h * h * beta * out.g.deriv(th);
    };
    double update = 0.0;
    for (int i = 0; i < grid_points; ++i) {
      double zeta = out.g.xmin + i * out.g.dx;
      bool failed = false;
      double theta = detail::solve_preimage(map, dmap, zeta, failed);
      if (failed) ++out.newton_failures;
      double tg = (lp(zeta) - lp(theta)) / (h * (1.0 - beta)) +
                  beta * out.g.eval(theta);
      update = std::max(update, std::fabs(tg - next.vals[i]));
      next.vals[i] = tg;
    }
    out.g.vals.swap(next.vals);
    out.iterations = it;
    out.final_update = update;
    if (update < tol) {
      out.converged = true;
      break;
    }
  }

  // Invariance residual of the defining relation on a finer interior grid:
  //   -L'(zeta)/(1-beta) + h g(zeta) = -L'(theta)/(1-beta) + h beta g(theta)
  // with zeta the forward image of theta.
  const int fine = 2 * grid_points - 1;
  const double rv = 0.9 * radius;
  for (int i = 0; i < fine; ++i) {
    double theta = -rv + 2.0 * rv * i / (fine - 1);
    double gth = out.g.eval(theta);
    double zeta = theta - c1 * lp(theta) + h * h * beta * gth;
    double lhs = -lp(zeta) / (1.0 - beta) + h * out.g.eval(zeta);
    double rhs = -lp(theta) / (1.0 - beta) + h * beta * gth;
    out.residual = std::max(out.residual, std::fabs(lhs - rhs));
  }
  out.clamp_events = out.g.clamped;
  return out;
}

// Attractivity diagnostic: run heavy ball from (theta0, v0) and report
//   r_n = | v^{(n)} + L'(theta^{(n)}) / (1 - beta) - h g(theta^{(n)}) |,
// checking r_n <= rate^n r_0 + atol. The additive floor covers the accuracy
// of the discretized g: the geometric bound drops below it within ~40 steps.
struct AttractivityReport {
  std::vector<double> r;
  bool satisfied = true;
};

inline AttractivityReport manifold_attractivity(const DerivativeOracle& loss,
                                                const GridFunction& g,
                                                double beta, double h,
                                                double theta0, double v0,
                                                int nmax, double rate,
                                                double atol = 1e-8) {
  if (loss.dim() != 1)
    throw CapabilityError("manifold_attractivity: 1-D losses only");
  AttractivityReport rep;
  double theta = theta0, v = v0;
  auto lp = [&](double th) { return loss.contract({th}, 1, {})[0]; };
  auto dist = [&](double th, double vel) {
    return std::fabs(vel + lp(th) / (1.0 - beta) - h * g.eval(th));
  };
  rep.r.push_back(dist(theta, v));
  double bound = rep.r[0];
  for (int n = 1; n <= nmax; ++n) {
    double grad = lp(theta);
    v = beta * v - grad;
    theta += h * v;
    bound *= rate;
    double rn = dist(theta, v);
    rep.r.push_back(rn);
    if (rn > bound + atol) rep.satisfied = false;
  }
  return rep;
}

// Closed-form manifold slope for the 1-D quadratic L = theta^2 / 2:
//   g_h(theta) = -4 theta / ((1 - beta) ((1 - beta + s)^2 - h^2)),
// s = sqrt((1 - beta - h)^2 - 4 beta h), valid for h < (1 - sqrt(beta))^2.
inline double quad_manifold_slope(double beta, double h) {
  double disc = (1 - beta - h) * (1 - beta - h) - 4 * beta * h;
  if (disc < 0.0)
    throw CapabilityError("quad_manifold_slope: h beyond the branch point");
  double s = std::sqrt(disc);
  return -4.0 / ((1 - beta) * ((1 - beta + s) * (1 - beta + s) - h * h));
}

}  // namespace hb
