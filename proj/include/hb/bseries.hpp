#pragma once

// Tree-indexed formal series: subtree convolution (composition), grafting
// (pre-Lie / Lie derivative), the fixed-point coefficients a(tau), g(tau),
// and the full-batch limiting memoryless/BEA series.
//
// Coefficient convention: a TreeSeries with coefficient map alpha represents
//   c(empty) * theta + sum_{tau != empty} h^{|tau|} alpha(tau) F(tau)(theta),
// where F(tau) = grad^{ell+1} L [F(tau_1), ..., F(tau_ell)] is the elementary
// differential. All normalization (the paper's h^{|tau|}/|tau|! g(tau) and
// -beta e_{tau,1}/sigma(tau) conventions) is absorbed into alpha at
// construction, so products need no extra symmetry factors.

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hb/beta_polynomials.hpp"
#include "hb/losses.hpp"
#include "hb/rooted_trees.hpp"
#include "hb/util.hpp"

namespace hb {

template <class C>
struct TreeSeries {
  int order = 0;                  // truncation: trees with |tau| <= order kept
  C empty_coeff{};                // coefficient of the empty tree
  std::map<RootedTree, C> coeffs;

  explicit TreeSeries(int ord) : order(ord) {}

  C at(const RootedTree& t) const {
    auto it = coeffs.find(t);
    return it == coeffs.end() ? C{} : it->second;
  }
  void add(const RootedTree& t, const C& v) {
    if (t.vertex_count() > order) return;
    auto [it, inserted] = coeffs.emplace(t, v);
    if (!inserted) it->second = it->second + v;
  }
};

using ExactSeries = TreeSeries<BetaRational>;
using NumericSeries = TreeSeries<double>;

// Attach `sub` as a new child of the vertex of `t` addressed by `path`.
inline RootedTree attach_at(const RootedTree& t, const VertexPath& path,
                            std::size_t depth, const RootedTree& sub) {
  std::vector<RootedTree> ch = t.children();
  if (depth == path.size()) {
    ch.push_back(sub);
  } else {
    int i = path[depth];
    ch[i] = attach_at(ch[i], path, depth + 1, sub);
  }
  return RootedTree(std::move(ch));
}

// All root-to-vertex paths of t (root = empty path), canonical child order.
inline std::vector<VertexPath> all_vertex_paths(const RootedTree& t) {
  std::vector<VertexPath> out{{}};
  for (std::size_t i = 0; i < t.children().size(); ++i)
    for (VertexPath p : all_vertex_paths(t.children()[i])) {
      p.insert(p.begin(), static_cast<int>(i));
      out.push_back(std::move(p));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Subtree convolution (composition rule of Sec. 4.2):
//   (a*c)(tau) = sum over markings m of c(tau_0^m) a(tau_1^m)...a(tau_|m|^m),
//   (a*c)(empty) = c(empty).
// Operates on raw coefficient maps (the a/g/l maps themselves, no sigma).

inline ExactSeries subtree_convolution(const ExactSeries& a,
                                       const ExactSeries& c) {
  if (a.order != c.order)
    throw std::invalid_argument("subtree_convolution: order mismatch");
  ExactSeries r(a.order);
  r.empty_coeff = c.empty_coeff;
  for (int m = 1; m <= r.order; ++m)
    for (const RootedTree& t : enumerate_trees(m)) {
      // The c(empty) a(tau) term corresponds to cutting the whole tree.
      BetaRational acc = c.empty_coeff * a.at(t);
      for (const Marking& mk : enumerate_markings(t)) {
        BetaRational term = c.at(mk.remainder);
        for (const RootedTree& cut : mk.cut_subtrees) term = term * a.at(cut);
        acc = acc + term;
      }
      if (!acc.is_zero()) r.coeffs.emplace(t, std::move(acc));
    }
  return r;
}

// ---------------------------------------------------------------------------
// Fixed-point coefficients a(tau), g(tau) of Sec. 4.2, bottom-up in |tau|:
//   g(tau) = (1-b)^{-2} a(tau_1)...a(tau_ell)
//            - (1-b)^{-1} sum_{nonempty markings} g(tau_0^m) prod a(tau_i^m),
//   a(empty) = 1, a(leaf) = -1/(1-b), a(tau) = beta g(tau) for |tau| >= 2,
//   g(empty) = g(leaf) = 0.

inline std::pair<ExactSeries, ExactSeries> solve_a_g(int truncation) {
  if (truncation < 1 || truncation > 8)
    throw std::invalid_argument("solve_a_g: truncation out of range [1, 8]");
  ExactSeries a(truncation), g(truncation);
  a.empty_coeff = BetaRational(Rational(1));
  BetaRational beta(Poly::monomial(1), 0);
  BetaRational minus_inv_omb(Poly(Rational(-1)), 1);  // -1/(1-beta)
  a.coeffs.emplace(RootedTree(), minus_inv_omb);
  // g(leaf) = 0: leave absent.
  for (int m = 2; m <= truncation; ++m)
    for (const RootedTree& t : enumerate_trees(m)) {
      BetaRational prod = BetaRational(Rational(1));
      for (const RootedTree& child : t.children()) prod = prod * a.at(child);
      BetaRational gt = prod.div_omb(2);
      for (const Marking& mk : enumerate_markings(t)) {
        if (mk.size() == 0) continue;
        BetaRational term = g.at(mk.remainder);
        if (term.is_zero()) continue;
        for (const RootedTree& cut : mk.cut_subtrees) term = term * a.at(cut);
        gt = gt - term.div_omb(1);
      }
      g.coeffs.emplace(t, gt);
      a.coeffs.emplace(t, beta * gt);
    }
  return {std::move(a), std::move(g)};
}

// ---------------------------------------------------------------------------
// Grafting (pre-Lie product): the Lie derivative of the vector-field series f
// along the vector-field series b. If f = sum alpha_f(tau) F(tau) and
// b = sum alpha_b(s) F(s), then nabla f [b] = sum over pairs and over vertices
// v of tau of alpha_f(tau) alpha_b(s) F(tau with s attached at v) — the plain
// product rule applied to the nested contraction, no symmetry factors.

template <class C>
TreeSeries<C> graft(const TreeSeries<C>& f, const TreeSeries<C>& b) {
  if (f.order != b.order)
    throw std::invalid_argument("graft: order mismatch");
  TreeSeries<C> r(f.order);
  for (const auto& [tf, cf] : f.coeffs) {
    std::vector<VertexPath> paths = all_vertex_paths(tf);
    for (const auto& [tb, cb] : b.coeffs) {
      if (tf.vertex_count() + tb.vertex_count() > r.order) continue;
      C prod = cf * cb;
      for (const VertexPath& p : paths) r.add(attach_at(tf, p, 0, tb), prod);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Full-batch limiting memoryless series: the n -> infinity increment series
//   sum_{j >= 1} h^j f_j^inf = sum_{tau} h^{|tau|} (a(tau)/sigma(tau)) F(tau),
// since f_1^inf = -(1-b)^{-1} grad L = a(leaf) F(leaf) and, for m >= 2,
// f_m^inf = -beta sum_tau E^inf[tau,1]/sigma(tau) with -beta e = a.

inline ExactSeries limiting_memoryless_series(int order) {
  if (order < 1 || order > 6)
    throw std::invalid_argument(
        "limiting_memoryless_series: order out of range [1, 6]");
  auto [a, g] = solve_a_g(order);
  ExactSeries s(order);
  for (const auto& [t, c] : a.coeffs)
    s.coeffs.emplace(
        t, c * (Rational(1) / Rational(symmetry_coefficient(t))));
  return s;
}

// The size-j homogeneous part of a series (trees with exactly j vertices).
template <class C>
TreeSeries<C> homogeneous_part(const TreeSeries<C>& s, int j) {
  TreeSeries<C> r(s.order);
  for (const auto& [t, c] : s.coeffs)
    if (t.vertex_count() == j) r.coeffs.emplace(t, c);
  return r;
}

// Full-batch limiting BEA series: sum_j h^j fbar_j^inf via Eq. (bea-coef-def)
//   fbar_j = f_j - sum_{i=2}^{j} 1/i! sum_{k_1+...+k_i=j, k >= 1}
//            D_{k_1} ... D_{k_{i-1}} fbar_{k_i},
// with D_k = Lie derivative along fbar_k (applied rightmost first). The
// homogeneous pieces fbar_j are returned merged into one series (tree sizes
// partition the terms).

// Core BEA recursion, shared by the exact (limiting) and numeric (finite-n)
// paths. `minus_inv_fact(i)` must return the coefficient -1/i! in C.
template <class C, class MinusInvFact>
TreeSeries<C> bea_series(const TreeSeries<C>& f, MinusInvFact minus_inv_fact) {
  const int order = f.order;
  std::vector<TreeSeries<C>> fbar;  // fbar[j] = size-j part, index 0 unused
  fbar.reserve(order + 1);
  fbar.emplace_back(order);
  for (int j = 1; j <= order; ++j) {
    TreeSeries<C> fj = homogeneous_part(f, j);
    // Compositions (k_1, ..., k_i) of j with i >= 2 parts, each >= 1.
    std::vector<int> parts;
    auto rec = [&](auto&& self, int remaining) -> void {
      if (remaining == 0) {
        int i = static_cast<int>(parts.size());
        if (i < 2) return;
        TreeSeries<C> w = fbar[parts[i - 1]];
        for (int t = i - 2; t >= 0; --t) w = graft(w, fbar[parts[t]]);
        C coeff = minus_inv_fact(i);
        for (const auto& [tt, cc] : w.coeffs) fj.add(tt, cc * coeff);
        return;
      }
      for (int k = 1; k <= remaining && k < j; ++k) {
        parts.push_back(k);
        self(self, remaining - k);
        parts.pop_back();
      }
    };
    rec(rec, j);
    fbar.push_back(std::move(fj));
  }
  TreeSeries<C> out(order);
  for (int j = 1; j <= order; ++j)
    for (const auto& [t, c] : fbar[j].coeffs) out.add(t, c);
  return out;
}

inline ExactSeries limiting_bea_series(int order) {
  if (order < 1 || order > 6)
    throw std::invalid_argument(
        "limiting_bea_series: order out of range [1, 6]");
  return bea_series(limiting_memoryless_series(order), [](int i) {
    Rational fact = 1;
    for (int r = 2; r <= i; ++r) fact *= r;
    return BetaRational(Rational(-1) / fact);
  });
}

// ---------------------------------------------------------------------------
// Numeric evaluation.

inline NumericSeries to_numeric(const ExactSeries& s, double beta) {
  NumericSeries r(s.order);
  r.empty_coeff = 0.0;
  for (const auto& [t, c] : s.coeffs) r.coeffs.emplace(t, c.eval_double(beta));
  return r;
}

// Elementary differential F(tau)(theta) by recursive contraction.
inline Vec elementary_differential(const RootedTree& t, const Vec& theta,
                                   const DerivativeOracle& oracle) {
  std::vector<Vec> child_vals;
  child_vals.reserve(t.children().size());
  for (const RootedTree& c : t.children())
    child_vals.push_back(elementary_differential(c, theta, oracle));
  return oracle.contract(theta, static_cast<int>(t.children().size()) + 1,
                         child_vals);
}

// sum_tau h^{|tau|} alpha(tau) F(tau)(theta); the empty-tree coefficient is
// ignored (vector-field series only).
inline Vec eval_series(const NumericSeries& s, double h, const Vec& theta,
                       const DerivativeOracle& oracle) {
  std::map<std::string, Vec> memo;
  CompensatedVec acc(theta.size());
  for (const auto& [t, c] : s.coeffs) {
    auto it = memo.find(t.canonical_key());
    if (it == memo.end())
      it = memo.emplace(t.canonical_key(),
                        elementary_differential(t, theta, oracle))
               .first;
    acc.add(c * std::pow(h, t.vertex_count()), it->second);
  }
  return acc.sum;
}

}  // namespace hb
