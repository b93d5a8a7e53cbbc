#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hb/beta_polynomials.hpp"
#include "hb/rooted_trees.hpp"

using hb::BetaRational;
using hb::Poly;
using hb::Rational;
using hb::ShiftPolynomial;

namespace {

BetaRational br(int num) { return BetaRational(Rational(num)); }

// Direct numeric evaluation of v_{m,l}^{(n)} from the defining double sum.
double v_direct(int m, int l, int n, double beta) {
  if (m == 1) {
    double s = 0, bp = 1;
    for (int b = 0; b <= n - l; ++b, bp *= beta) s += bp;
    return s;
  }
  double s = 0, bp = 1;
  for (int b = 0; b <= n - l; ++b, bp *= beta) {
    double inner = 0;
    for (int l1 = 1; l1 <= l + b; ++l1) inner += v_direct(m - 1, l1, n, beta);
    s += bp * inner;
  }
  return s;
}

// Eulerian number triangle A(n, k).
long long eulerian_number(int n, int k) {
  if (k < 0 || k >= n) return n == 0 && k == 0 ? 1 : 0;
  if (n == 1) return k == 0 ? 1 : 0;
  return (k + 1) * eulerian_number(n - 1, k) +
         (n - k) * eulerian_number(n - 1, k - 1);
}

}  // namespace

TEST_CASE("polynomial and rational-function arithmetic basics") {
  Poly omb = hb::one_minus_beta_pow(1);
  CHECK(omb.eval(Rational(1, 2)) == Rational(1, 2));
  CHECK(hb::one_minus_beta_pow(3).eval(Rational(1, 3)) ==
        Rational(8, 27));
  Poly p = omb * omb * Poly::monomial(2, Rational(5));
  CHECK(hb::div_exact_one_minus_beta(hb::div_exact_one_minus_beta(p)) ==
        Poly::monomial(2, Rational(5)));
  CHECK_THROWS_AS(hb::div_exact_one_minus_beta(Poly::monomial(1)),
                  std::invalid_argument);
  // Normalization cancels shared (1-beta) factors.
  BetaRational r(omb * Poly::monomial(1), 2);
  CHECK(r.den_pow == 1);
  CHECK(r.eval(Rational(1, 2)) == Rational(1));
}

TEST_CASE("geometric moments and exp_sum against partial sums") {
  // S[P](l) = sum_{b>=0} beta^b P(l+b) for P(x) = x^2 + 3x, beta = 1/2,
  // compared with direct summation to b = 500 (tail below 1e-140).
  ShiftPolynomial p =
      ShiftPolynomial::monomial(2, br(1)) + ShiftPolynomial::monomial(1, br(3));
  ShiftPolynomial s = hb::exp_sum(p);
  for (int l = 1; l <= 4; ++l) {
    double direct = 0;
    double bp = 1;
    for (int b = 0; b <= 500; ++b, bp *= 0.5) {
      double x = l + b;
      direct += bp * (x * x + 3 * x);
    }
    double exact = s.eval(Rational(l)).eval_double(0.5);
    CHECK(std::fabs(exact - direct) < 1e-12 * (1 + std::fabs(direct)));
  }
}

TEST_CASE("Faulhaber partial sums") {
  ShiftPolynomial sq = ShiftPolynomial::monomial(2, br(1));
  ShiftPolynomial q = hb::partial_sum(sq);
  // sum_{x=1}^{L} x^2 = L(L+1)(2L+1)/6.
  for (int L = 0; L <= 7; ++L)
    CHECK(q.eval(Rational(L)).eval(Rational(1, 3)) ==
          Rational(L * (L + 1) * (2 * L + 1), 6));
}

TEST_CASE("Narayana polynomials") {
  CHECK(hb::to_string(hb::narayana(1)) == "1");
  CHECK(hb::to_string(hb::narayana(2)) == "1+b");
  CHECK(hb::to_string(hb::narayana(3)) == "1+3b+b^2");
  // Coefficient of beta^{m-k} is C(m,k) C(m,k-1) / m.
  for (int m = 1; m <= 7; ++m) {
    BetaRational n = hb::narayana(m);
    REQUIRE(n.den_pow == 0);
    for (int k = 1; k <= m; ++k)
      CHECK(n.num.c[m - k] ==
            hb::binomial(m, k) * hb::binomial(m, k - 1) / Rational(m));
    // Evaluation at 1 gives the Catalan number.
    CHECK(n.eval(Rational(1)) ==
          hb::binomial(2 * m, m) / Rational(m + 1));
  }
}

TEST_CASE("Eulerian polynomials against the triangle recursion") {
  for (int m = 1; m <= 7; ++m) {
    BetaRational a = hb::eulerian(m);
    REQUIRE(a.den_pow == 0);
    for (int k = 0; k < m; ++k)
      CHECK(a.num.c[k] == Rational(eulerian_number(m, k)));
  }
}

TEST_CASE("v coefficients: finite n against direct summation") {
  for (double beta : {0.3, 0.8})
    for (int m = 1; m <= 4; ++m)
      for (int n : {3, 6})
        for (int l = 1; l <= n; ++l) {
          double exact = hb::v_finite(m, n, l).eval_double(beta);
          double direct = v_direct(m, l, n, beta);
          CHECK(std::fabs(exact - direct) <= 1e-12 * (1 + std::fabs(direct)));
        }
}

TEST_CASE("v limit: closed Narayana form and finite-n convergence") {
  // v_{m+1}^inf = N_m(beta) / (1-beta)^{2m+1}.
  for (int m = 1; m <= 6; ++m) {
    BetaRational expect = hb::narayana(m).div_omb(2 * m + 1);
    CHECK(hb::v_inf(m + 1) == expect);
  }
  CHECK(hb::v_inf(1) == BetaRational(Poly(Rational(1)), 1));
  // Finite n approaches the limit.
  double lim = hb::v_inf(3).eval_double(0.5);
  double fin = hb::v_finite(3, 60, 1).eval_double(0.5);
  CHECK(std::fabs(lim - fin) < 1e-12);
}

TEST_CASE("q coefficients and the Eulerian limit") {
  // q_{m,1}^inf = A_{m-1} / (1-beta)^{2m-1}.
  for (int m = 2; m <= 7; ++m) {
    BetaRational q = hb::q_inf(m).eval(Rational(1));
    CHECK(q == hb::eulerian(m - 1).div_omb(2 * m - 1));
  }
  // Finite-n value approaches the limit.
  double lim = hb::q_inf(3).eval(Rational(1)).eval_double(0.4);
  double fin = hb::q_finite(3, 1, 80).eval_double(0.4);
  CHECK(std::fabs(lim - fin) < 1e-12);
}

TEST_CASE("e coefficients: leaves, chains, rakes") {
  CHECK(hb::e_coefficient(hb::RootedTree()) ==
        ShiftPolynomial::constant(Rational(1)));
  // e_{chain(2), l} = beta + (1-beta) l.
  ShiftPolynomial e2 = hb::e_coefficient(hb::chain(2));
  CHECK(e2.eval(Rational(1)) == br(1));
  CHECK(e2.c.size() == 2);
  CHECK(e2.c[0] == BetaRational(Poly::monomial(1), 0));
  CHECK(e2.c[1] == BetaRational(hb::one_minus_beta_pow(1), 0));
  // At l = 1: chains give Narayana, rakes give Eulerian.
  for (int m = 2; m <= 7; ++m) {
    CHECK(hb::e_coefficient(hb::chain(m)).eval(Rational(1)) ==
          hb::narayana(m - 1));
    CHECK(hb::e_coefficient(hb::rake(m)).eval(Rational(1)) ==
          hb::eulerian(m - 1));
  }
  // Degree in l is at most m - 1 and coefficients are polynomials in beta.
  for (int m = 1; m <= 5; ++m)
    for (const hb::RootedTree& t : hb::enumerate_trees(m)) {
      ShiftPolynomial e = hb::e_coefficient(t);
      CHECK(e.degree() <= m - 1);
      for (const BetaRational& c : e.c) CHECK(c.den_pow == 0);
    }
}

TEST_CASE("z coefficients") {
  // z_2^inf = -(1+beta) / (2 (1-beta)^3).
  Poly num;
  num.c = {Rational(-1, 2), Rational(-1, 2)};
  CHECK(hb::z_inf(2) == BetaRational(num, 3));
  // z_1^inf = -1/(1-beta).
  CHECK(hb::z_inf(1) == BetaRational(Poly(Rational(-1)), 1));
}

TEST_CASE("generating functions match the coefficient families") {
  // g_k = v_{k+1}^inf, gbar_k = z_{k+1}^inf, sigma_k = 1_{k=0} + beta g_k.
  auto g = hb::generating_series(hb::SeriesKind::g, 12);
  auto gbar = hb::generating_series(hb::SeriesKind::gbar, 10);
  auto sigma = hb::generating_series(hb::SeriesKind::sigma, 12);
  BetaRational beta(Poly::monomial(1), 0);
  for (int k = 0; k <= 12; ++k) {
    CHECK(g[k] == hb::v_inf(k + 1));
    BetaRational expect = beta * g[k];
    if (k == 0) expect = expect + br(1);
    CHECK(sigma[k] == expect);
  }
  for (int k = 0; k <= 10; ++k) CHECK(gbar[k] == hb::z_inf(k + 1));
  // Numeric cross-check of g via its quadratic equation at beta = 0.3.
  double x = 0.05, b = 0.3;
  double gv = 0;
  for (int k = 12; k >= 0; --k) gv = gv * x + g[k].eval_double(b);
  CHECK(std::fabs(b * x * gv * gv + (x - (1 - b)) * gv + 1) < 1e-9);
}

TEST_CASE("psi coefficients") {
  // Closed forms: psi_eq = -b (1 - b^n (1+b) + b^{2n+1}) / ((1-b)^2 (1+b)),
  // psi_neq = (-2 b^2 + 2 n (1-b^2) b^{n+1} + 2 b^{2n+2}) / ((1-b)^3 (1+b)).
  for (int n : {1, 2, 5, 9}) {
    auto [eq, neq] = hb::psi_coefficients(n);
    Poly b = Poly::monomial(1);
    Poly eq_num = (Poly(Rational(1)) - Poly::monomial(n) -
                   Poly::monomial(n + 1) + Poly::monomial(2 * n + 1)) *
                  Rational(-1);
    eq_num = eq_num * b;
    Poly neq_num = Poly::monomial(2, Rational(-2)) +
                   (Poly::monomial(n + 1) - Poly::monomial(n + 3)) *
                       Rational(2 * n) +
                   Poly::monomial(2 * n + 2, Rational(2));
    // Both closed forms carry a (1+b) factor to cancel.
    BetaRational eq_expect(hb::div_exact_one_plus_beta(eq_num), 2);
    BetaRational neq_expect(hb::div_exact_one_plus_beta(neq_num), 3);
    CHECK(eq == eq_expect);
    CHECK(neq == neq_expect);
  }
  // n = 1: psi_eq = -beta exactly.
  auto [eq1, neq1] = hb::psi_coefficients(1);
  CHECK(eq1 == BetaRational(Poly::monomial(1, Rational(-1)), 0));
  // Limits: psi_eq + psi_neq -> -beta/(1-beta)^3 and
  // psi_eq -> -beta/((1-beta)^2 (1+beta)).
  auto [eq200, neq200] = hb::psi_coefficients(200);
  double bval = 0.5;
  double tot = eq200.eval_double(bval) + neq200.eval_double(bval);
  CHECK(std::fabs(tot + bval / std::pow(1 - bval, 3)) < 1e-10);
  CHECK(std::fabs(eq200.eval_double(bval) +
                  bval / (std::pow(1 - bval, 2) * (1 + bval))) < 1e-10);
}

TEST_CASE("pretty printing") {
  CHECK(hb::to_string(hb::v_inf(1)) == "(1)/(1-b)");
  CHECK(hb::to_string(hb::v_inf(3)) == "(1+b)/(1-b)^5");
  CHECK(hb::to_string(hb::narayana(3)) == "1+3b+b^2");
  CHECK(hb::to_string(hb::e_coefficient(hb::chain(2))) == "[b] + [1-b]*l");
}
