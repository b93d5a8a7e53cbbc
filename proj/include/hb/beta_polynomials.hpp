#pragma once

// Exact arithmetic in beta: polynomials with rational coefficients, rational
// functions with (1-beta)-power denominators, and polynomials in the shift
// variable l with such coefficients. On top of that, closed forms for the
// coefficient families e_{tau,l}, Narayana N_m, Eulerian A_m, v, q, z, psi,
// and the three generating functions g_beta, gbar_beta, sigma_beta.
//
// Everything here is exact; floating point enters only through eval_double.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hb/rooted_trees.hpp"

namespace hb {

using Rational = boost::multiprecision::cpp_rational;

inline Rational binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  boost::multiprecision::cpp_int num = 1, den = 1;
  for (int i = 0; i < k; ++i) {
    num *= n - i;
    den *= i + 1;
  }
  return Rational(num, den);
}

// ---------------------------------------------------------------------------
// Poly: polynomial in beta, coefficient of beta^k at index k.

struct Poly {
  std::vector<Rational> c;

  Poly() = default;
  explicit Poly(Rational constant) : c{std::move(constant)} { trim(); }
  static Poly monomial(int k, Rational coeff = 1) {
    Poly p;
    p.c.assign(k + 1, Rational(0));
    p.c[k] = std::move(coeff);
    p.trim();
    return p;
  }

  void trim() {
    while (!c.empty() && c.back() == 0) c.pop_back();
  }
  bool is_zero() const { return c.empty(); }
  int degree() const { return static_cast<int>(c.size()) - 1; }

  Rational eval(const Rational& x) const {
    Rational r = 0;
    for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
    return r;
  }
  double eval_double(double x) const {
    double r = 0;
    for (std::size_t i = c.size(); i-- > 0;)
      r = r * x + static_cast<double>(c[i]);
    return r;
  }

  friend Poly operator+(const Poly& a, const Poly& b) {
    Poly r = a;
    if (r.c.size() < b.c.size()) r.c.resize(b.c.size(), Rational(0));
    for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] += b.c[i];
    r.trim();
    return r;
  }
  friend Poly operator-(const Poly& a, const Poly& b) {
    Poly r = a;
    if (r.c.size() < b.c.size()) r.c.resize(b.c.size(), Rational(0));
    for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] -= b.c[i];
    r.trim();
    return r;
  }
  friend Poly operator*(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return Poly();
    Poly r;
    r.c.assign(a.c.size() + b.c.size() - 1, Rational(0));
    for (std::size_t i = 0; i < a.c.size(); ++i)
      for (std::size_t j = 0; j < b.c.size(); ++j) r.c[i + j] += a.c[i] * b.c[j];
    r.trim();
    return r;
  }
  friend Poly operator*(const Poly& a, const Rational& s) {
    Poly r = a;
    for (auto& x : r.c) x *= s;
    r.trim();
    return r;
  }
  friend bool operator==(const Poly& a, const Poly& b) { return a.c == b.c; }
  friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }

  Poly derivative() const {
    Poly r;
    for (std::size_t i = 1; i < c.size(); ++i)
      r.c.push_back(c[i] * Rational(static_cast<int>(i)));
    r.trim();
    return r;
  }
};

// (1-beta)^k as a Poly.
inline Poly one_minus_beta_pow(int k) {
  Poly r(Rational(1));
  Poly base;
  base.c = {Rational(1), Rational(-1)};
  for (int i = 0; i < k; ++i) r = r * base;
  return r;
}

// Exact division of p by (1-beta); throws unless p(1) == 0.
inline Poly div_exact_one_minus_beta(const Poly& p) {
  if (p.is_zero()) return p;
  if (p.eval(1) != 0)
    throw std::invalid_argument("div_exact_one_minus_beta: not divisible");
  // p = (1-beta) q  =>  q_0 = p_0, q_i = q_{i-1} + p_i.
  Poly q;
  q.c.assign(p.c.size() - 1, Rational(0));
  Rational acc = 0;
  for (std::size_t i = 0; i + 1 < p.c.size(); ++i) {
    acc += p.c[i];
    q.c[i] = acc;
  }
  q.trim();
  return q;
}

// Exact division of p by (1+beta); throws unless p(-1) == 0.
inline Poly div_exact_one_plus_beta(const Poly& p) {
  if (p.is_zero()) return p;
  if (p.eval(-1) != 0)
    throw std::invalid_argument("div_exact_one_plus_beta: not divisible");
  // p = (1+beta) q  =>  q_0 = p_0, q_i = p_i - q_{i-1}.
  Poly q;
  q.c.assign(p.c.size() - 1, Rational(0));
  Rational prev = 0;
  for (std::size_t i = 0; i + 1 < p.c.size(); ++i) {
    q.c[i] = p.c[i] - prev;
    prev = q.c[i];
  }
  q.trim();
  return q;
}

// ---------------------------------------------------------------------------
// BetaRational: numerator / (1-beta)^den_pow, kept normalized.

struct BetaRational {
  Poly num;
  int den_pow = 0;

  BetaRational() = default;
  BetaRational(Poly n, int k) : num(std::move(n)), den_pow(k) { normalize(); }
  explicit BetaRational(Rational constant)
      : num(Poly(std::move(constant))), den_pow(0) {}

  void normalize() {
    if (num.is_zero()) {
      den_pow = 0;
      return;
    }
    while (den_pow > 0 && num.eval(1) == 0) {
      num = div_exact_one_minus_beta(num);
      --den_pow;
    }
  }
  bool is_zero() const { return num.is_zero(); }

  Rational eval(const Rational& beta) const {
    Rational d = 1, omb = Rational(1) - beta;
    for (int i = 0; i < den_pow; ++i) d *= omb;
    if (d == 0) throw std::invalid_argument("BetaRational: pole at beta=1");
    return num.eval(beta) / d;
  }
  double eval_double(double beta) const {
    return num.eval_double(beta) / std::pow(1.0 - beta, den_pow);
  }

  friend BetaRational operator+(const BetaRational& a, const BetaRational& b) {
    int k = std::max(a.den_pow, b.den_pow);
    return BetaRational(a.num * one_minus_beta_pow(k - a.den_pow) +
                            b.num * one_minus_beta_pow(k - b.den_pow),
                        k);
  }
  friend BetaRational operator-(const BetaRational& a, const BetaRational& b) {
    int k = std::max(a.den_pow, b.den_pow);
    return BetaRational(a.num * one_minus_beta_pow(k - a.den_pow) -
                            b.num * one_minus_beta_pow(k - b.den_pow),
                        k);
  }
  friend BetaRational operator*(const BetaRational& a, const BetaRational& b) {
    return BetaRational(a.num * b.num, a.den_pow + b.den_pow);
  }
  friend BetaRational operator*(const BetaRational& a, const Rational& s) {
    return BetaRational(a.num * s, a.den_pow);
  }
  friend bool operator==(const BetaRational& a, const BetaRational& b) {
    return a.den_pow == b.den_pow && a.num == b.num;
  }
  friend bool operator!=(const BetaRational& a, const BetaRational& b) {
    return !(a == b);
  }

  BetaRational neg() const { return *this * Rational(-1); }
  // Division by (1-beta)^k.
  BetaRational div_omb(int k) const { return BetaRational(num, den_pow + k); }

  // d/dbeta: num'/(1-b)^k + k num/(1-b)^{k+1}.
  BetaRational derivative() const {
    Poly omb;
    omb.c = {Rational(1), Rational(-1)};
    return BetaRational(num.derivative() * omb + num * Rational(den_pow),
                        den_pow + 1);
  }
};

// ---------------------------------------------------------------------------
// ShiftPolynomial: polynomial in the shift variable l, coefficient of l^j at
// index j, with BetaRational coefficients.

struct ShiftPolynomial {
  std::vector<BetaRational> c;

  ShiftPolynomial() = default;
  explicit ShiftPolynomial(BetaRational constant) : c{std::move(constant)} {
    trim();
  }
  static ShiftPolynomial constant(Rational r) {
    return ShiftPolynomial(BetaRational(std::move(r)));
  }
  static ShiftPolynomial monomial(int j, BetaRational coeff) {
    ShiftPolynomial p;
    p.c.assign(j + 1, BetaRational());
    p.c[j] = std::move(coeff);
    p.trim();
    return p;
  }

  void trim() {
    while (!c.empty() && c.back().is_zero()) c.pop_back();
  }
  bool is_zero() const { return c.empty(); }
  int degree() const { return static_cast<int>(c.size()) - 1; }

  BetaRational eval(const Rational& l) const {
    BetaRational r;
    for (std::size_t i = c.size(); i-- > 0;)
      r = r * BetaRational(l) + c[i];
    return r;
  }

  friend ShiftPolynomial operator+(const ShiftPolynomial& a,
                                   const ShiftPolynomial& b) {
    ShiftPolynomial r = a;
    if (r.c.size() < b.c.size()) r.c.resize(b.c.size());
    for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] = r.c[i] + b.c[i];
    r.trim();
    return r;
  }
  friend ShiftPolynomial operator*(const ShiftPolynomial& a,
                                   const ShiftPolynomial& b) {
    if (a.is_zero() || b.is_zero()) return ShiftPolynomial();
    ShiftPolynomial r;
    r.c.assign(a.c.size() + b.c.size() - 1, BetaRational());
    for (std::size_t i = 0; i < a.c.size(); ++i)
      for (std::size_t j = 0; j < b.c.size(); ++j)
        r.c[i + j] = r.c[i + j] + a.c[i] * b.c[j];
    r.trim();
    return r;
  }
  friend ShiftPolynomial operator*(const ShiftPolynomial& a,
                                   const BetaRational& s) {
    ShiftPolynomial r = a;
    for (auto& x : r.c) x = x * s;
    r.trim();
    return r;
  }
  friend bool operator==(const ShiftPolynomial& a, const ShiftPolynomial& b) {
    return a.c == b.c;
  }
};

// ---------------------------------------------------------------------------
// exp_sum: S[P](l) = sum_{b>=0} beta^b P(l+b), exact.
//
// Expanding P(l+b) = sum_j c_j sum_r C(j,r) l^r b^{j-r} reduces the task to
// the geometric moments M_t = sum_{b>=0} beta^b b^t, with M_0 = (1-beta)^{-1}
// and M_t = beta d/dbeta M_{t-1} (equivalently the binomial-basis identity
// sum_b beta^b C(b+j,j) = (1-beta)^{-(j+1)}).

inline std::vector<BetaRational> geometric_moments(int up_to) {
  std::vector<BetaRational> m;
  m.reserve(up_to + 1);
  m.emplace_back(Poly(Rational(1)), 1);  // 1/(1-beta)
  Poly beta = Poly::monomial(1);
  for (int t = 1; t <= up_to; ++t)
    m.push_back(BetaRational(m.back().derivative().num * beta,
                             m.back().derivative().den_pow));
  return m;
}

inline ShiftPolynomial exp_sum(const ShiftPolynomial& p) {
  if (p.is_zero()) return p;
  int deg = p.degree();
  std::vector<BetaRational> moments = geometric_moments(deg);
  ShiftPolynomial s;
  s.c.assign(deg + 1, BetaRational());
  for (int r = 0; r <= deg; ++r) {
    BetaRational acc;
    for (int j = r; j <= deg; ++j)
      acc = acc + p.c[j] * moments[j - r] * binomial(j, r);
    s.c[r] = acc;
  }
  s.trim();
  return s;
}

// ---------------------------------------------------------------------------
// Faulhaber partial sums: Q(L) = sum_{x=1}^{L} P(x) as a polynomial in L.

// S_j(L) = sum_{x=1}^{L} x^j with rational coefficients, via the recurrence
// sum_{i=0}^{j} C(j+1,i) S_i(L) = (L+1)^{j+1} - 1.
inline std::vector<std::vector<Rational>> faulhaber_table(int up_to) {
  std::vector<std::vector<Rational>> s(up_to + 1);
  for (int j = 0; j <= up_to; ++j) {
    // rhs = (L+1)^{j+1} - 1 as coefficients in L.
    std::vector<Rational> rhs(j + 2, Rational(0));
    for (int r = 0; r <= j + 1; ++r) rhs[r] = binomial(j + 1, r);
    rhs[0] -= 1;
    for (int i = 0; i < j; ++i) {
      Rational cji = binomial(j + 1, i);
      for (std::size_t r = 0; r < s[i].size(); ++r) rhs[r] -= cji * s[i][r];
    }
    Rational inv = Rational(1) / Rational(j + 1);
    for (auto& x : rhs) x *= inv;
    while (!rhs.empty() && rhs.back() == 0) rhs.pop_back();
    s[j] = std::move(rhs);
  }
  return s;
}

inline ShiftPolynomial partial_sum(const ShiftPolynomial& p) {
  if (p.is_zero()) return p;
  int deg = p.degree();
  auto faul = faulhaber_table(deg);
  ShiftPolynomial q;
  for (int j = 0; j <= deg; ++j) {
    ShiftPolynomial sj;
    for (std::size_t r = 0; r < faul[j].size(); ++r)
      sj.c.push_back(BetaRational(faul[j][r]));
    sj.trim();
    q = q + sj * p.c[j];
  }
  return q;
}

// ---------------------------------------------------------------------------
// e-coefficients (Definition e-coef):
//   e_{tau,l} = (1-beta)^{ell+1} sum_{b>=0} beta^b prod_s sum_{ls<=l+b} e_{tau_s,ls}
// with e_{leaf,l} = 1.

inline ShiftPolynomial e_coefficient(const RootedTree& t) {
  if (t.children().empty()) return ShiftPolynomial::constant(1);
  ShiftPolynomial prod = ShiftPolynomial::constant(1);
  for (const RootedTree& child : t.children())
    prod = prod * partial_sum(e_coefficient(child));
  ShiftPolynomial s = exp_sum(prod);
  int ell = static_cast<int>(t.children().size());
  return s * BetaRational(one_minus_beta_pow(ell + 1), 0);
}

// ---------------------------------------------------------------------------
// Narayana and Eulerian polynomials.

inline BetaRational narayana(int m) {
  if (m < 1) throw std::invalid_argument("narayana: m must be >= 1");
  Poly p;
  p.c.assign(m, Rational(0));
  for (int k = 1; k <= m; ++k)
    p.c[m - k] += binomial(m, k) * binomial(m, k - 1) / Rational(m);
  p.trim();
  return BetaRational(std::move(p), 0);
}

inline BetaRational eulerian(int m) {
  if (m < 1) throw std::invalid_argument("eulerian: m must be >= 1");
  // A_m = (1-beta)^{m+1} sum_{j>=1} j^m beta^{j-1}
  //     = (1-beta)^{m+1} sum_{b>=0} (b+1)^m beta^b = (1-b)^{m+1} S[x^m](1).
  ShiftPolynomial xm = ShiftPolynomial::monomial(m, BetaRational(Rational(1)));
  BetaRational s = exp_sum(xm).eval(1);
  BetaRational a = s * BetaRational(one_minus_beta_pow(m + 1), 0);
  if (a.den_pow != 0)
    throw std::logic_error("eulerian: expected polynomial result");
  return a;
}

// ---------------------------------------------------------------------------
// v coefficients (Corollary principal-coef; Appendix vm-l-rec):
//   v_{1,l}^{(n)} = sum_{b=0}^{n-l} beta^b,
//   v_{m,l}^{(n)} = sum_{b=0}^{n-l} beta^b sum_{l1=1}^{l+b} v_{m-1,l1}^{(n)},
//   v_m^{(n)} = v_{m,1}^{(n)};  limits v_1^inf = (1-beta)^{-1},
//   v_m^inf = v_{m-1}^inf/(1-b) + b/(1-b) sum_{j=1}^{m-1} v_j^inf v_{m-j}^inf.

inline BetaRational v_finite(int m, int n, int l) {
  if (m < 1 || l < 1 || l > n)
    throw std::invalid_argument("v_finite: need m >= 1 and 1 <= l <= n");
  Poly beta = Poly::monomial(1);
  std::vector<std::vector<Poly>> dp(m + 1, std::vector<Poly>(n + 1));
  for (int ll = 1; ll <= n; ++ll) {
    Poly s;
    for (int b = 0; b <= n - ll; ++b) s = s + Poly::monomial(b);
    dp[1][ll] = s;
  }
  for (int mm = 2; mm <= m; ++mm) {
    // prefix[L] = sum_{l1=1}^{L} dp[mm-1][l1]
    std::vector<Poly> prefix(n + 1);
    for (int L = 1; L <= n; ++L) prefix[L] = prefix[L - 1] + dp[mm - 1][L];
    for (int ll = 1; ll <= n; ++ll) {
      Poly s, bpow(Rational(1));
      for (int b = 0; b <= n - ll; ++b) {
        s = s + bpow * prefix[ll + b];
        bpow = bpow * beta;
      }
      dp[mm][ll] = s;
    }
  }
  return BetaRational(dp[m][l], 0);
}

inline BetaRational v_inf(int m) {
  if (m < 1) throw std::invalid_argument("v_inf: m must be >= 1");
  std::vector<BetaRational> v(m + 1);
  v[1] = BetaRational(Poly(Rational(1)), 1);
  BetaRational beta(Poly::monomial(1), 0);
  for (int mm = 2; mm <= m; ++mm) {
    BetaRational acc = v[mm - 1].div_omb(1);
    BetaRational cross;
    for (int j = 1; j <= mm - 1; ++j) cross = cross + v[j] * v[mm - j];
    v[mm] = acc + (beta * cross).div_omb(1);
  }
  return v[m];
}

// ---------------------------------------------------------------------------
// q coefficients (Corollary eulerian; Appendix proof):
//   q_{m,l}^{(n)} = sum_{b=0}^{n-l} beta^b (sum_{l1=1}^{l+b} v_{1,l1}^{(n)})^{m-1},
//   q_{m,l}^inf   = (1-beta)^{-(m-1)} sum_{b>=0} beta^b (l+b)^{m-1}.

inline BetaRational q_finite(int m, int l, int n) {
  if (m < 1 || l < 1 || l > n)
    throw std::invalid_argument("q_finite: need m >= 1 and 1 <= l <= n");
  Poly beta = Poly::monomial(1);
  // v_{1,l1}^{(n)} = sum_{b=0}^{n-l1} beta^b; prefix over l1.
  std::vector<Poly> prefix(n + 1);
  for (int l1 = 1; l1 <= n; ++l1) {
    Poly s;
    for (int b = 0; b <= n - l1; ++b) s = s + Poly::monomial(b);
    prefix[l1] = prefix[l1 - 1] + s;
  }
  Poly acc, bpow(Rational(1));
  for (int b = 0; b <= n - l; ++b) {
    Poly inner(Rational(1));
    for (int r = 0; r < m - 1; ++r) inner = inner * prefix[l + b];
    acc = acc + bpow * inner;
    bpow = bpow * beta;
  }
  return BetaRational(acc, 0);
}

inline ShiftPolynomial q_inf(int m) {
  if (m < 1) throw std::invalid_argument("q_inf: m must be >= 1");
  ShiftPolynomial s = exp_sum(
      ShiftPolynomial::monomial(m - 1, BetaRational(Rational(1))));
  for (auto& coeff : s.c) coeff = coeff.div_omb(m - 1);
  return s;
}

// ---------------------------------------------------------------------------
// Truncated formal power series with BetaRational coefficients (index = power
// of x). Used for z_inf and the generating functions.

namespace series {

using Series = std::vector<BetaRational>;

inline Series mul(const Series& a, const Series& b, int order) {
  Series r(order + 1);
  for (int i = 0; i <= order; ++i)
    for (int j = 0; i + j <= order && j < static_cast<int>(b.size()); ++j)
      if (i < static_cast<int>(a.size()))
        r[i + j] = r[i + j] + a[i] * b[j];
  return r;
}

// log(1 + u) for a series u with u_0 = 0, truncated at `order`.
inline Series log1p(const Series& u, int order) {
  Series r(order + 1), upow = u;
  upow.resize(order + 1);
  Rational sign = 1;
  for (int l = 1; l <= order; ++l) {
    for (int i = 0; i <= order; ++i)
      r[i] = r[i] + upow[i] * (sign / Rational(l));
    upow = mul(upow, u, order);
    sign = -sign;
  }
  return r;
}

}  // namespace series

// z_m^inf by the signed composition formula (Eq. z-coef-rec) with
// p_1 = -1/(1-beta), p_k = -beta v_k^inf (k >= 2).
inline BetaRational z_inf(int m) {
  if (m < 1) throw std::invalid_argument("z_inf: m must be >= 1");
  series::Series p(m + 1);
  p[1] = BetaRational(Poly(Rational(-1)), 1);
  BetaRational beta(Poly::monomial(1), 0);
  for (int k = 2; k <= m; ++k) p[k] = (beta * v_inf(k)).neg();
  // sum_l (-1)^{l+1}/l sum_{k_1+...+k_l=m} p_{k_1}...p_{k_l} = [x^m] log(1+P).
  return series::log1p(p, m)[m];
}

enum class SeriesKind { g, gbar, sigma };

// Coefficients 0..order of the requested generating function, obtained by
// algebraic recursions from the defining equations (never floating point):
//   g:     beta x g^2 + (x - (1-beta)) g + 1 = 0,
//   sigma: x sigma^2 - x sigma - (1-beta) sigma + 1 = 0,
//   gbar:  x gbar = log(1 - x (1 + beta g(x))).
inline std::vector<BetaRational> generating_series(SeriesKind kind, int order) {
  if (order < 0 || order > 16)
    throw std::invalid_argument("generating_series: order out of range");
  BetaRational beta(Poly::monomial(1), 0);
  auto g_series = [&](int ord) {
    series::Series g(ord + 1);
    g[0] = BetaRational(Poly(Rational(1)), 1);
    for (int m = 1; m <= ord; ++m) {
      BetaRational conv;
      for (int i = 0; i <= m - 1; ++i) conv = conv + g[i] * g[m - 1 - i];
      g[m] = (g[m - 1] + beta * conv).div_omb(1);
    }
    return g;
  };
  switch (kind) {
    case SeriesKind::g:
      return g_series(order);
    case SeriesKind::sigma: {
      series::Series s(order + 1);
      s[0] = BetaRational(Poly(Rational(1)), 1);
      for (int m = 1; m <= order; ++m) {
        BetaRational conv;
        for (int i = 0; i <= m - 1; ++i) conv = conv + s[i] * s[m - 1 - i];
        s[m] = (conv - s[m - 1]).div_omb(1);
      }
      return s;
    }
    case SeriesKind::gbar: {
      // u = x (1 + beta g(x)); x gbar = log(1 - u), so gbar_k = [x^{k+1}].
      series::Series g = g_series(order + 1);
      series::Series u(order + 2);
      u[1] = BetaRational(Rational(1));
      for (int k = 1; k <= order + 1; ++k)
        u[k] = u[k] + beta * g[k - 1];
      series::Series negu(order + 2);
      for (std::size_t i = 0; i < u.size(); ++i) negu[i] = u[i].neg();
      series::Series lg = series::log1p(negu, order + 1);
      std::vector<BetaRational> out(order + 1);
      for (int k = 0; k <= order; ++k) out[k] = lg[k + 1];
      return out;
    }
  }
  throw std::logic_error("generating_series: unreachable");
}

// ---------------------------------------------------------------------------
// psi coefficients at finite n (Appendix D, Lemma SwTWil), by direct
// summation of the defining double/triple sums; both are plain polynomials
// in beta. The paper's closed forms with (1+beta)(1-beta)^k denominators are
// equal after exact cancellation and serve as test oracles.

inline std::pair<BetaRational, BetaRational> psi_coefficients(int n) {
  if (n < 1) throw std::invalid_argument("psi_coefficients: n must be >= 1");
  // Count monomial multiplicities with plain integers first; the summand is
  // always -beta^degree, so building the polynomials once at the end avoids
  // O(n^3) big-rational polynomial additions.
  std::vector<long long> meq(2 * n, 0), mtot(2 * n, 0);
  for (int b = 0; b <= n - 1; ++b) {
    for (int lp = 1; lp <= b + 1; ++lp) {
      // psi_eq collects the terms with equal batch indices: b' = b + 1 - l'.
      ++meq[1 + b + b + 1 - lp];
      for (int bp = 0; bp <= n - lp; ++bp) ++mtot[1 + b + bp];
    }
  }
  Poly eq, tot;
  eq.c.assign(2 * n, Rational(0));
  tot.c.assign(2 * n, Rational(0));
  for (int k = 0; k < 2 * n; ++k) {
    eq.c[k] = Rational(-meq[k]);
    tot.c[k] = Rational(-mtot[k]);
  }
  eq.trim();
  tot.trim();
  return {BetaRational(eq, 0), BetaRational(tot - eq, 0)};
}

// ---------------------------------------------------------------------------
// Pretty-printing for CLI output: "1+3b+b^2", "(1+b)/(1-b)^3", etc.

inline std::string to_string(const Poly& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (std::size_t k = 0; k < p.c.size(); ++k) {
    if (p.c[k] == 0) continue;
    Rational a = p.c[k];
    if (!first) os << (a > 0 ? "+" : "-");
    else if (a < 0) os << "-";
    first = false;
    Rational mag = a > 0 ? a : Rational(-a);
    bool need_coeff = (mag != 1) || k == 0;
    if (need_coeff) {
      if (denominator(mag) == 1) os << numerator(mag);
      else os << "(" << numerator(mag) << "/" << denominator(mag) << ")";
    }
    if (k >= 1) {
      os << "b";
      if (k >= 2) os << "^" << k;
    }
  }
  return os.str();
}

inline std::string to_string(const BetaRational& r) {
  if (r.den_pow == 0) return to_string(r.num);
  std::ostringstream os;
  os << "(" << to_string(r.num) << ")/(1-b)";
  if (r.den_pow >= 2) os << "^" << r.den_pow;
  return os.str();
}

inline std::string to_string(const ShiftPolynomial& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  for (std::size_t j = 0; j < p.c.size(); ++j) {
    if (p.c[j].is_zero()) continue;
    if (os.tellp() > 0) os << " + ";
    os << "[" << to_string(p.c[j]) << "]";
    if (j >= 1) {
      os << "*l";
      if (j >= 2) os << "^" << j;
    }
  }
  return os.str();
}

}  // namespace hb
