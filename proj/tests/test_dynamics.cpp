#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "hb/beta_polynomials.hpp"
#include "hb/dynamics.hpp"
#include "hb/losses.hpp"

using hb::Mat;
using hb::RunConfig;
using hb::Trajectory;
using hb::Vec;

namespace {

hb::OraclePtr quad1d(double a) {
  return std::make_shared<hb::QuadraticLoss>(Mat{{a}}, Vec{0.0});
}

hb::OraclePtr quartic2d() {
  nlohmann::json params = {{"c", {0.5, 0.25}},
                           {"A", {{1.0, 0.2}, {0.2, 1.5}}},
                           {"b", {0.0, 0.1}}};
  return hb::builtin_loss("quartic", params);
}

RunConfig base_config(hb::OraclePtr loss, Vec theta0) {
  RunConfig cfg;
  cfg.loss = std::move(loss);
  cfg.theta0 = std::move(theta0);
  return cfg;
}

}  // namespace

TEST_CASE("heavy ball on a 1-D quadratic matches the closed form") {
  RunConfig cfg = base_config(quad1d(1.0), {1.3});
  cfg.beta = 0.7;
  cfg.h = 0.02;
  cfg.horizon = 2.0;  // 100 steps
  cfg.v0 = {-0.4};
  Trajectory traj = hb::hb_run(cfg);
  REQUIRE(traj.states.size() == 101);
  for (int n = 0; n <= 100; ++n) {
    auto [th, vv] = hb::quad_closed_form(1.3, -0.4, cfg.beta, cfg.h, n);
    CHECK(std::fabs(traj.states[n][0] - th) <= 1e-12 * (1 + std::fabs(th)));
    CHECK(std::fabs(traj.velocities[n][0] - vv) <= 1e-12 * (1 + std::fabs(vv)));
  }
}

TEST_CASE("manifold initial velocity gives pure lambda_+ decay") {
  const double beta = 0.7, h = 0.02, theta0 = 0.9;
  RunConfig cfg = base_config(quad1d(1.0), {theta0});
  cfg.beta = beta;
  cfg.h = h;
  cfg.horizon = 1.0;
  cfg.v0 = {hb::quad_manifold_velocity(theta0, beta, h)};
  Trajectory traj = hb::hb_run(cfg);
  auto [lp, lm] = hb::quad_roots(beta, h);
  REQUIRE(lp.imag() == 0.0);
  // Reference value of the principal root at these parameters.
  CHECK(lp.real() == Catch::Approx(0.914833).margin(1e-6));
  double expect = theta0;
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    CHECK(std::fabs(traj.states[n][0] - expect) <= 1e-11);
    expect *= lp.real();
  }
  // The continuous interpolation hits the iterates at t = n h.
  std::complex<double> at5 = hb::quad_manifold_flow(theta0, beta, h, 5 * h);
  CHECK(std::fabs(at5.real() - traj.states[5][0]) <= 1e-11);
  CHECK(std::fabs(at5.imag()) <= 1e-14);
}

TEST_CASE("memoryless steps on a quadratic match the v-coefficient formula") {
  Mat a{{1.2, 0.3}, {0.3, 0.8}};
  auto loss = std::make_shared<hb::QuadraticLoss>(a, Vec{0.1, -0.2});
  RunConfig cfg = base_config(loss, {0.6, -0.4});
  cfg.beta = 0.5;
  cfg.h = 0.05;
  cfg.horizon = 0.25;  // 5 steps
  cfg.order = 4;
  Trajectory traj = hb::memoryless_run(cfg);
  // Manual recursion: theta += sum_j h^j f_j with
  //   f_1 = -(sum_{k<=n} beta^k) g,  f_m = -beta v_{m,1}^{(n)} A^{m-1} g.
  Vec theta = cfg.theta0;
  for (int n = 0; n < 5; ++n) {
    Vec g = loss->contract(theta, 1, {});
    double geo = 0, bp = 1;
    for (int k = 0; k <= n; ++k, bp *= cfg.beta) geo += bp;
    Vec inc = hb::scaled(g, -cfg.h * geo);
    Vec ag = g;
    for (int m = 2; m <= cfg.order; ++m) {
      Vec next = hb::zeros(2);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) next[i] += a[i][j] * ag[j];
      ag = next;
      if (n >= 1) {
        double v = hb::v_finite(m, n, 1).eval_double(cfg.beta);
        hb::axpy(-cfg.beta * v * std::pow(cfg.h, m), ag, inc);
      }
    }
    theta = hb::vsum(theta, inc);
    for (int i = 0; i < 2; ++i)
      CHECK(traj.states[n + 1][i] == Catch::Approx(theta[i]).margin(1e-13));
  }
}

TEST_CASE("beta = 0, order 1 memoryless run is exactly gradient descent") {
  RunConfig cfg = base_config(quartic2d(), {0.4, -0.3});
  cfg.beta = 0.0;
  cfg.h = 0.05;
  cfg.horizon = 0.5;
  cfg.order = 1;
  Trajectory mem = hb::memoryless_run(cfg);
  Trajectory ball = hb::hb_run(cfg);  // beta = 0 heavy ball is GD too
  CHECK(hb::global_error(mem, ball) <= 1e-14);
}

TEST_CASE("memoryless truncation converges at order p (quick grid)") {
  for (int p : {2, 3}) {
    std::vector<double> hs{0.02, 0.01, 0.005}, errs;
    for (double h : hs) {
      RunConfig cfg = base_config(quartic2d(), {0.4, -0.3});
      cfg.beta = 0.5;
      cfg.h = h;
      cfg.horizon = 0.3;
      cfg.order = p;
      errs.push_back(hb::global_error(hb::hb_run(cfg), hb::memoryless_run(cfg)));
    }
    double slope = hb::order_estimate(hs, errs);
    CHECK(slope >= p - 0.3);
  }
}

TEST_CASE("modified equation tracks heavy ball at order p") {
  for (int p : {2, 3}) {
    std::vector<double> hs{0.02, 0.01, 0.005}, errs;
    for (double h : hs) {
      RunConfig cfg = base_config(quartic2d(), {0.4, -0.3});
      cfg.beta = 0.5;
      cfg.h = h;
      cfg.horizon = 0.3;
      cfg.order = p;
      errs.push_back(
          hb::global_error(hb::hb_run(cfg), hb::modified_ode_run(cfg)));
    }
    double slope = hb::order_estimate(hs, errs);
    CHECK(slope >= p - 0.3);
  }
}

TEST_CASE("limiting-route modified equation is first-order accurate") {
  // The frozen n -> infinity coefficients miss the O(beta^n) startup layer,
  // which contributes an O(h) global error; check the error still shrinks
  // roughly linearly.
  std::vector<double> hs{0.02, 0.01, 0.005}, errs;
  for (double h : hs) {
    RunConfig cfg = base_config(quartic2d(), {0.4, -0.3});
    cfg.beta = 0.5;
    cfg.h = h;
    cfg.horizon = 0.3;
    cfg.order = 2;
    errs.push_back(hb::global_error(
        hb::hb_run(cfg), hb::modified_ode_run(cfg, hb::OdeRoute::Limiting)));
  }
  CHECK(hb::order_estimate(hs, errs) >= 0.7);
}

TEST_CASE("mini-batch engines: shared recursion and capability limits") {
  Mat x{{1.0, 0.1}, {0.3, -0.8}, {-0.5, 0.6}, {0.9, 0.4}};
  Vec y{0.2, -0.4, 0.5, 0.1};
  auto fam = std::make_shared<hb::MiniBatchFamily>(hb::lstsq_family(x, y, 2));
  fam->shuffle(11);
  RunConfig cfg = base_config(fam->full_loss(), {0.3, -0.1});
  cfg.family = fam;
  cfg.beta = 0.6;
  cfg.h = 0.02;
  cfg.horizon = 0.2;
  cfg.order = 2;
  Trajectory ball = hb::hb_run(cfg);
  Trajectory mem = hb::memoryless_run(cfg);
  CHECK(hb::global_error(ball, mem) <= 10 * cfg.h * cfg.h);
  // Mini-batch modified equation is capped at order 3.
  cfg.order = 4;
  CHECK_THROWS_AS(hb::modified_ode_run(cfg), hb::CapabilityError);
  // Nonzero v0 is rejected for mini-batch runs.
  cfg.order = 2;
  cfg.v0 = {0.1, 0.0};
  CHECK_THROWS_AS(hb::hb_run(cfg), std::invalid_argument);
}

TEST_CASE("order_estimate recovers an exact power law") {
  std::vector<double> hs{0.1, 0.05, 0.025, 0.0125}, errs;
  for (double h : hs) errs.push_back(3.7 * std::pow(h, 2.5));
  CHECK(hb::order_estimate(hs, errs) == Catch::Approx(2.5).margin(1e-12));
  CHECK_THROWS_AS(hb::order_estimate({0.1, 0.05}, {1.0, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("divergence raises DivergedError with the last finite index") {
  RunConfig cfg = base_config(quad1d(400.0), {1.0});
  cfg.beta = 0.5;
  cfg.h = 0.4;
  cfg.horizon = 20.0;
  try {
    hb::hb_run(cfg);
    FAIL("expected divergence");
  } catch (const hb::DivergedError& e) {
    CHECK(e.last_finite_index >= 0);
    CHECK(e.last_finite_index < cfg.steps());
  }
}

TEST_CASE("sigma_beta values and branch point") {
  const double beta = 0.7;
  CHECK(hb::sigma_beta(beta, 0.0) == Catch::Approx(1.0 / (1 - beta)));
  double rb = hb::radius_of_convergence(beta);
  CHECK(rb == Catch::Approx((1 - std::sqrt(beta)) * (1 - std::sqrt(beta))));
  CHECK_NOTHROW(hb::sigma_beta(beta, 0.99 * rb));
  CHECK_THROWS_AS(hb::sigma_beta(beta, 1.01 * rb), hb::CapabilityError);
}

TEST_CASE("quadratic exactness: manifold HB, principal iteration, flow") {
  // Diagonal quadratic with distinct eigenvalues; theta* = A^{-1} b.
  Mat a{{1.0, 0.0}, {0.0, 0.5}};
  Vec b{0.2, -0.1};
  auto loss = std::make_shared<hb::QuadraticLoss>(a, b);
  const double beta = 0.7, h = 0.02;
  Vec star{0.2, -0.2};
  Vec theta0{0.9, 0.5};
  // Per-mode manifold velocity (modes are the coordinates here).
  Vec v0(2);
  for (int i = 0; i < 2; ++i) {
    auto [lp, lm] = hb::quad_roots(beta, h * a[i][i]);
    v0[i] = (lp.real() - 1.0 + h * a[i][i]) / (h * beta) * (theta0[i] - star[i]);
  }
  RunConfig cfg = base_config(loss, theta0);
  cfg.beta = beta;
  cfg.h = h;
  cfg.horizon = 2.0;
  cfg.v0 = v0;
  Trajectory ball = hb::hb_run(cfg);
  Trajectory principal = hb::principal_iteration_run(cfg);
  hb::ComplexTrajectory flow = hb::principal_flow_quadratic(cfg, a, b);
  REQUIRE(flow.states.size() == ball.states.size());
  CHECK(hb::global_error(ball, principal) <= 1e-10);
  for (std::size_t n = 0; n < ball.states.size(); ++n)
    for (int i = 0; i < 2; ++i) {
      CHECK(std::fabs(flow.states[n][i].real() - ball.states[n][i]) <= 1e-10);
      CHECK(std::fabs(flow.states[n][i].imag()) <= 1e-12);
    }
}

TEST_CASE("principal iteration enforces the convergence radius") {
  RunConfig cfg = base_config(quad1d(2.0), {1.0});
  cfg.beta = 0.7;  // R_beta ~ 0.0268 < h * 2 = 0.04
  cfg.h = 0.02;
  cfg.horizon = 0.1;
  CHECK_THROWS_WITH(hb::principal_iteration_run(cfg),
                    Catch::Matchers::ContainsSubstring("R_beta"));
}

TEST_CASE("least-squares modified loss: gains and flow agreement") {
  Mat x{{1.0, 0.2}, {-0.4, 0.9}, {0.6, -0.5}, {0.3, 0.8}};
  Vec y{0.5, -0.2, 0.3, 0.7};
  RunConfig cfg;
  cfg.loss = std::make_shared<hb::QuadraticLoss>(Mat{{1.0, 0.0}, {0.0, 1.0}},
                                                 Vec{0.0, 0.0});
  cfg.theta0 = {0.8, -0.6};
  cfg.beta = 0.5;
  cfg.h = 0.05;
  cfg.horizon = 1.0;
  hb::LstsqModified mod = hb::least_squares_modified(x, y, cfg);
  // theta* solves the normal equations M theta* = X'y / N.
  const int n_rows = 4;
  Mat m(2, Vec(2, 0.0));
  Vec rhs(2, 0.0);
  for (int p = 0; p < n_rows; ++p)
    for (int i = 0; i < 2; ++i) {
      rhs[i] += x[p][i] * y[p] / n_rows;
      for (int j = 0; j < 2; ++j) m[i][j] += x[p][i] * x[p][j] / n_rows;
    }
  for (int i = 0; i < 2; ++i) {
    double res = -rhs[i];
    for (int j = 0; j < 2; ++j) res += m[i][j] * mod.theta_star[j];
    CHECK(std::fabs(res) <= 1e-12);
  }
  // Gains are sigma_beta at the eigenvalues of M.
  for (auto [lam, gain] : mod.gains)
    CHECK(gain == Catch::Approx(hb::sigma_beta(cfg.beta, cfg.h * lam)));
  // GD on the modified loss reproduces the principal flow for L_M.
  hb::ComplexTrajectory flow = hb::principal_flow_quadratic(cfg, m, rhs);
  REQUIRE(flow.states.size() == mod.traj.states.size());
  for (std::size_t n = 0; n < flow.states.size(); ++n)
    for (int i = 0; i < 2; ++i)
      CHECK(std::fabs(flow.states[n][i].real() - mod.traj.states[n][i]) <=
            1e-10);
}

TEST_CASE("config hashes are stable and sensitive") {
  RunConfig a = base_config(quad1d(1.0), {1.0});
  a.loss_tag = "quad1";
  RunConfig b = a;
  CHECK(a.config_hash() == b.config_hash());
  b.h = 0.011;
  CHECK(a.config_hash() != b.config_hash());
  b = a;
  b.loss_tag = "quad2";
  CHECK(a.config_hash() != b.config_hash());
}
