#pragma once

// Finite-n numeric evaluation of the E[tau,l,n] expressions, the history
// coefficients Theta_m^{(n)}[a], and the memoryless iteration coefficients
// f_m^{(n)} — by both the tree-sum theorem and the literal recursion — plus
// marking-identity checks and exhaustive permutation averaging of f_2.
//
// Key cost fact used throughout: E[tau,l,n] = g_tau(l) + beta E[tau,l+1,n]
// where g_tau(j) = grad^{ell+1} L^{(n-j)} [P[tau_1,j], ..., P[tau_ell,j]] and
// P[tau',j] = sum_{l'<=j} E[tau',l',n], so one backward sweep in l computes a
// whole column with O(n) oracle calls per tree.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hb/beta_polynomials.hpp"
#include "hb/bseries.hpp"
#include "hb/losses.hpp"
#include "hb/rooted_trees.hpp"
#include "hb/util.hpp"

namespace hb {

using LossSequence = std::function<OraclePtr(int)>;  // s -> oracle for L^{(s)}

inline LossSequence constant_losses(OraclePtr oracle) {
  return [oracle](int) { return oracle; };
}

class CoefficientContext {
 public:
  CoefficientContext(double beta, int n, LossSequence losses, Vec theta)
      : beta_(beta), n_(n), losses_(std::move(losses)), theta_(std::move(theta)) {
    if (n_ < 0) throw std::invalid_argument("CoefficientContext: n < 0");
    if (beta_ <= 0.0 || beta_ >= 1.0)
      throw std::invalid_argument("CoefficientContext: beta must be in (0,1)");
  }
  CoefficientContext(double beta, int n, OraclePtr full_batch, Vec theta)
      : CoefficientContext(beta, n, constant_losses(std::move(full_batch)),
                           std::move(theta)) {}

  double beta() const { return beta_; }
  int n() const { return n_; }
  const Vec& theta() const { return theta_; }
  OraclePtr loss(int s) const { return losses_(s); }
  const LossSequence& losses() const { return losses_; }
  int dim() const { return static_cast<int>(theta_.size()); }

  struct Column {
    std::vector<Vec> e;       // e[l], l = 1..ntilde (index 0 unused)
    std::vector<Vec> prefix;  // prefix[j] = sum_{l<=j} e[l], j = 0..ntilde
  };

  // E[tau, l, ntilde] for all l at once; memoized per (ntilde, tree).
  const Column& column(const RootedTree& t, int ntilde) {
    auto& per_n = memo_[ntilde];
    auto it = per_n.find(t.canonical_key());
    if (it != per_n.end()) return it->second;
    // Children first (their prefixes feed g_tau).
    std::vector<const Column*> child_cols;
    child_cols.reserve(t.children().size());
    for (const RootedTree& c : t.children())
      child_cols.push_back(&column(c, ntilde));
    Column col;
    col.e.assign(ntilde + 1, Vec());
    col.prefix.assign(ntilde + 1, zeros(theta_.size()));
    const int ell = static_cast<int>(t.children().size());
    for (int l = ntilde; l >= 1; --l) {
      std::vector<Vec> dirs;
      dirs.reserve(ell);
      for (const Column* cc : child_cols) dirs.push_back(cc->prefix[l]);
      Vec g = losses_(ntilde - l)->contract(theta_, ell + 1, dirs);
      if (l == ntilde) {
        col.e[l] = std::move(g);
      } else {
        col.e[l] = std::move(g);
        axpy(beta_, col.e[l + 1], col.e[l]);
      }
    }
    for (int j = 1; j <= ntilde; ++j) {
      col.prefix[j] = col.prefix[j - 1];
      axpy(1.0, col.e[j], col.prefix[j]);
    }
    return per_n.emplace(t.canonical_key(), std::move(col)).first->second;
  }

  // Cache for the jfjl-route history terms (they are re-requested heavily by
  // the literal recursion).
  std::map<std::pair<int, int>, Vec> history_memo;

 private:
  double beta_;
  int n_;
  LossSequence losses_;
  Vec theta_;
  std::map<int, std::map<std::string, Column>> memo_;
};

// E[tau, l, n](theta), Eq. (e-tau-def).
inline Vec e_eval(CoefficientContext& ctx, const RootedTree& t, int l) {
  if (l < 1 || l > ctx.n())
    throw std::invalid_argument("e_eval: need 1 <= l <= n");
  return ctx.column(t, ctx.n()).e[l];
}

// f_m^{(n)}(theta) by the tree-sum form (Theorem nomem-coef):
//   f_1 = -sum_{k=0}^{n} beta^k grad L^{(n-k)},
//   f_m = -beta sum_{tau in A~[m]} E[tau,1,n] / sigma(tau),  m >= 2.
inline Vec f_treesum(CoefficientContext& ctx, int m) {
  if (m < 1) throw std::invalid_argument("f_treesum: m must be >= 1");
  const int n = ctx.n();
  if (m == 1) {
    // = grad L^{(n)} + beta E[leaf,1,n], computed as one direct sweep.
    Vec r = ctx.loss(n)->contract(ctx.theta(), 1, {});
    if (n >= 1) axpy(ctx.beta(), ctx.column(RootedTree(), n).e[1], r);
    return scaled(r, -1.0);
  }
  CompensatedVec acc(ctx.dim());
  if (n >= 1)
    for (const RootedTree& t : enumerate_trees(m))
      acc.add(1.0 / static_cast<double>(symmetry_coefficient(t)),
              ctx.column(t, n).e[1]);
  return scaled(acc.sum, -ctx.beta());
}

// Theta_m^{(n)}[k] by the tree form (Eq. histcoef-m-n-k-ind):
//   Theta_m[k] = sum_{l=1}^{k} sum_{tau in A~[m]} E[tau,l,n] / sigma(tau).
inline Vec theta_history_tree(CoefficientContext& ctx, int m, int a) {
  if (m < 1 || a < 1 || a > ctx.n())
    throw std::invalid_argument("theta_history_tree: need m >= 1, 1 <= a <= n");
  CompensatedVec acc(ctx.dim());
  for (const RootedTree& t : enumerate_trees(m))
    acc.add(1.0 / static_cast<double>(symmetry_coefficient(t)),
            ctx.column(t, ctx.n()).prefix[a]);
  return acc.sum;
}

// ---------------------------------------------------------------------------
// Full-batch scalar weights: when all losses are equal, E[tau,l,n] factors as
// w_{tau,l}^{(n)}(beta) F(tau)(theta) with theta-independent scalar weights
// obeying the same backward recursion. Used by the trajectory engines.

class WeightTable {
 public:
  WeightTable(double beta, int n) : beta_(beta), n_(n) {}

  // w[l] for l = 1..n (index 0 unused).
  const std::vector<double>& weights(const RootedTree& t) {
    auto it = memo_.find(t.canonical_key());
    if (it != memo_.end()) return it->second.w;
    std::vector<const Entry*> child_entries;
    for (const RootedTree& c : t.children()) {
      weights(c);
      child_entries.push_back(&memo_.at(c.canonical_key()));
    }
    Entry e;
    e.w.assign(n_ + 1, 0.0);
    e.prefix.assign(n_ + 1, 0.0);
    for (int l = n_; l >= 1; --l) {
      double g = 1.0;
      for (const Entry* ce : child_entries) g *= ce->prefix[l];
      e.w[l] = g + (l < n_ ? beta_ * e.w[l + 1] : 0.0);
    }
    for (int j = 1; j <= n_; ++j) e.prefix[j] = e.prefix[j - 1] + e.w[j];
    return memo_.emplace(t.canonical_key(), std::move(e)).first->second.w;
  }

 private:
  struct Entry {
    std::vector<double> w, prefix;
  };
  double beta_;
  int n_;
  std::map<std::string, Entry> memo_;
};

// Full-batch f_m^{(n)}(theta) via scalar weights + one elementary
// differential per tree. Equal to f_treesum with a constant loss sequence.
inline Vec f_full_batch(double beta, int n, const DerivativeOracle& oracle,
                        const Vec& theta, int m, WeightTable* table = nullptr) {
  if (m == 1) {
    double w = 0.0, bpow = 1.0;
    for (int k = 0; k <= n; ++k) {
      w += bpow;
      bpow *= beta;
    }
    return scaled(oracle.contract(theta, 1, {}), -w);
  }
  WeightTable local(beta, n);
  WeightTable& wt = table ? *table : local;
  CompensatedVec acc(theta.size());
  if (n >= 1)
    for (const RootedTree& t : enumerate_trees(m))
      acc.add(wt.weights(t)[1] /
                  static_cast<double>(symmetry_coefficient(t)),
              elementary_differential(t, theta, oracle));
  return scaled(acc.sum, -beta);
}

// ---------------------------------------------------------------------------
// Literal recursion (Eqs. nomem-coef-def / jfjl).
//
// The index set K_{i,l} collects the argument multiplicities (k_0,...,k_l):
// k_0 + ... + k_l = i counts the derivative slots, and the tail must satisfy
// the graded constraint k_1 + 2 k_2 + ... + l k_l = l so that a term with j,
// i, l and arguments Theta_{c+1} (k_c times each) carries exactly h^{i+j+l}.
// (Multiplicity counted with grading; the unweighted reading would drop e.g.
// the grad f_1 [Theta_3] term at m = 4 and is inconsistent with the tree
// form.) k_0 = i - (k_1 + ... + k_l) is then determined.

namespace detail {

// All tails (k_1,...,k_l) >= 0 with k_1 + 2 k_2 + ... + l k_l = l.
inline void for_each_tail(int l, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> tail(l, 0);
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == l) {
      if (remaining == 0) fn(tail);
      return;
    }
    const int w = pos + 1;  // grading weight of k_{pos+1}
    for (int k = 0; w * k <= remaining; ++k) {
      tail[pos] = k;
      self(self, pos + 1, remaining - w * k);
    }
  };
  if (l == 0) {
    fn(tail);  // the single empty tail (k_0 alone)
    return;
  }
  rec(rec, 0, l);
}

inline double factorial(int k) {
  double f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// 4th-order central directional derivative of F along u.
inline Vec fd_directional(const std::function<Vec(const Vec&)>& f,
                          const Vec& theta, const Vec& u, double step) {
  auto shift = [&](double c) {
    Vec x = theta;
    axpy(c * step, u, x);
    return f(x);
  };
  Vec p1 = shift(1), m1 = shift(-1), p2 = shift(2), m2 = shift(-2);
  Vec r = zeros(theta.size());
  axpy(8.0, p1, r);
  axpy(-8.0, m1, r);
  axpy(-1.0, p2, r);
  axpy(1.0, m2, r);
  return scaled(r, 1.0 / (12.0 * step));
}

// Nested i-fold directional derivative grad^i F(theta)[u_1,...,u_i] by FD.
inline Vec fd_multi(const std::function<Vec(const Vec&)>& f, const Vec& theta,
                    const std::vector<Vec>& dirs, std::size_t upto,
                    double scale) {
  if (upto == 0) return f(theta);
  double step =
      std::pow(2.2e-16, 1.0 / (static_cast<double>(upto) + 3.0)) * scale;
  const Vec& u = dirs[upto - 1];
  auto inner = [&](const Vec& x) { return fd_multi(f, x, dirs, upto - 1, scale); };
  return fd_directional(inner, theta, u, step);
}

}  // namespace detail

// grad^i f_j^{(n')}(theta)[dirs]: analytic for j = 1, FD otherwise.
inline Vec grad_f(double beta, int n_index, const LossSequence& losses,
                  const Vec& theta, int j, const std::vector<Vec>& dirs) {
  const int i = static_cast<int>(dirs.size());
  if (j == 1) {
    // f_1^{(n')} = -sum_k beta^k grad L^{(n'-k)}; its i-th derivative
    // contracts grad^{i+1} L^{(n'-k)} with the directions.
    CompensatedVec acc(theta.size());
    double bpow = 1.0;
    for (int k = 0; k <= n_index; ++k) {
      acc.add(-bpow, losses(n_index - k)->contract(theta, i + 1, dirs));
      bpow *= beta;
    }
    return acc.sum;
  }
  if (i == 0) {
    CoefficientContext sub(beta, n_index, losses, theta);
    return f_treesum(sub, j);
  }
  if (i > 2)
    throw CapabilityError("grad_f: FD nesting limited to two levels for j >= 2");
  double scale = 1.0 + norm2(theta);
  auto f = [&](const Vec& x) {
    CoefficientContext sub(beta, n_index, losses, x);
    return f_treesum(sub, j);
  };
  return detail::fd_multi(f, theta, dirs, dirs.size(), scale);
}

// Theta_m^{(n)}[a] by the literal recursion Eq. (jfjl).
inline Vec theta_history(CoefficientContext& ctx, int m, int a);

namespace detail {

inline Vec theta_history_impl(CoefficientContext& ctx, int m, int a) {
  const int n = ctx.n();
  CompensatedVec acc(ctx.dim());
  for (int s = 1; s <= a; ++s) {
    // The recursion closes over strictly smaller history orders, so this
    // terminates; f_j itself (the j = m, i = l = 0 term) comes from the
    // tree-sum route in a sub-context at iteration index n - s.
    std::vector<Vec> hist(m);  // hist[t] = Theta_{t+1}[s], t = 0..m-2
    for (int t = 1; t <= m - 1; ++t) hist[t - 1] = theta_history(ctx, t, s);
    for (int j = 1; j <= m; ++j)
      for (int l = 0; m - j - l >= 0; ++l) {
        int i = m - j - l;
        if (i == 0 && l > 0) continue;  // no tail fits in zero slots
        for_each_tail(l, [&](const std::vector<int>& tail) {
          int k0 = i;
          for (int t = 1; t <= l; ++t) k0 -= tail[t - 1];
          if (k0 < 0) return;
          double denom = factorial(k0);
          std::vector<Vec> dirs;
          for (int c = 0; c < k0; ++c) dirs.push_back(hist[0]);
          for (int t = 1; t <= l; ++t) {
            denom *= factorial(tail[t - 1]);
            for (int c = 0; c < tail[t - 1]; ++c) dirs.push_back(hist[t]);
          }
          Vec term = grad_f(ctx.beta(), n - s, ctx.losses(), ctx.theta(), j, dirs);
          acc.add(-1.0 / denom, term);
        });
      }
  }
  return acc.sum;
}

}  // namespace detail

inline Vec theta_history(CoefficientContext& ctx, int m, int a) {
  if (m < 1 || a < 1 || a > ctx.n())
    throw std::invalid_argument("theta_history: need m >= 1, 1 <= a <= n");
  if (m > 4) throw CapabilityError("theta_history: m > 4 not supported");
  auto key = std::make_pair(m, a);
  auto it = ctx.history_memo.find(key);
  if (it != ctx.history_memo.end()) return it->second;
  Vec v = detail::theta_history_impl(ctx, m, a);
  ctx.history_memo.emplace(key, v);
  return v;
}

// f_m^{(n)}(theta) by the literal recursion Eq. (nomem-coef-def). Only the
// loss is differentiated here (analytically); FD enters through the history
// terms' grad^i f_j factors.
inline Vec f_recursive(CoefficientContext& ctx, int m) {
  if (m < 1) throw std::invalid_argument("f_recursive: m must be >= 1");
  if (m > 4) throw CapabilityError("f_recursive: m > 4 not supported");
  const int n = ctx.n();
  if (m == 1) {
    CompensatedVec acc(ctx.dim());
    double bpow = 1.0;
    for (int k = 0; k <= n; ++k) {
      acc.add(-bpow, ctx.loss(n - k)->contract(ctx.theta(), 1, {}));
      bpow *= ctx.beta();
    }
    return acc.sum;
  }
  CompensatedVec acc(ctx.dim());
  double bpow = ctx.beta();
  for (int k = 1; k <= n; ++k) {
    std::vector<Vec> hist(m - 1);
    for (int t = 1; t <= m - 1; ++t) hist[t - 1] = theta_history(ctx, t, k);
    for (int l = 0; l <= m - 1; ++l) {
      int i = m - 1 - l;
      if (i == 0 && l > 0) continue;
      detail::for_each_tail(l, [&](const std::vector<int>& tail) {
        int k0 = i;
        for (int t = 1; t <= l; ++t) k0 -= tail[t - 1];
        if (k0 < 0) return;
        double denom = detail::factorial(k0);
        std::vector<Vec> dirs;
        for (int c = 0; c < k0; ++c) dirs.push_back(hist[0]);
        for (int t = 1; t <= l; ++t) {
          denom *= detail::factorial(tail[t - 1]);
          for (int c = 0; c < tail[t - 1]; ++c) dirs.push_back(hist[t]);
        }
        Vec term =
            ctx.loss(n - k)->contract(ctx.theta(), i + 1, dirs);
        acc.add(-bpow / denom, term);
      });
    }
    bpow *= ctx.beta();
  }
  return acc.sum;
}

// ---------------------------------------------------------------------------
// Marked-tree expression Emark[tau, mrk, a, ntilde -> n] (Sec. 4.1): follow
// the E[tau_0^mrk, a, ntilde] structure; at the parent of each marked vertex,
// raise the derivative order by one and insert sum_{l'=1}^{l} E[tau_mrk,l',n]
// as an extra argument, where l = n - ntilde.

namespace detail {

inline Vec emark_eval(CoefficientContext& ctx, const RootedTree& t,
                      const std::set<VertexPath>& mrk, int a, int ntilde) {
  const int n = ctx.n();
  const int l_outer = n - ntilde;
  const int dim = ctx.dim();
  const int nch = static_cast<int>(t.children().size());
  // Split children into marked and unmarked; collect sub-markings.
  std::vector<bool> marked(nch, false);
  std::vector<std::set<VertexPath>> sub(nch);
  for (const VertexPath& p : mrk) {
    if (p.size() == 1) {
      marked[p[0]] = true;
    } else {
      VertexPath q(p.begin() + 1, p.end());
      sub[p[0]].insert(std::move(q));
    }
  }
  // Marked-child arguments are b-independent: sum_{l'=1}^{l_outer} E[.,l',n].
  std::vector<Vec> marked_arg(nch);
  for (int c = 0; c < nch; ++c)
    if (marked[c])
      marked_arg[c] = ctx.column(t.children()[c], n).prefix[l_outer];
  CompensatedVec acc(dim);
  double bpow = 1.0;
  for (int b = 0; b <= ntilde - a; ++b) {
    std::vector<Vec> dirs;
    dirs.reserve(nch);
    for (int c = 0; c < nch; ++c) {
      if (marked[c]) {
        dirs.push_back(marked_arg[c]);
      } else if (sub[c].empty()) {
        // Plain subtree: prefix of E columns at level ntilde.
        dirs.push_back(ctx.column(t.children()[c], ntilde).prefix[a + b]);
      } else {
        Vec p = zeros(dim);
        for (int l1 = 1; l1 <= a + b; ++l1)
          axpy(1.0, emark_eval(ctx, t.children()[c], sub[c], l1, ntilde), p);
        dirs.push_back(std::move(p));
      }
    }
    acc.add(bpow, ctx.loss(ntilde - a - b)->contract(ctx.theta(), nch + 1, dirs));
    bpow *= ctx.beta();
  }
  return acc.sum;
}

}  // namespace detail

inline Vec emark(CoefficientContext& ctx, const RootedTree& t,
                 const Marking& mk, int a, int ntilde) {
  std::set<VertexPath> paths(mk.paths.begin(), mk.paths.end());
  return detail::emark_eval(ctx, t, paths, a, ntilde);
}

// Residuals of Lemma sum-over-markings and Eq. (nJdufq); returns the larger.
inline double marking_identity_check(CoefficientContext& ctx,
                                     const RootedTree& t, int l, int a) {
  const int n = ctx.n();
  if (t.vertex_count() > 4)
    throw std::invalid_argument("marking_identity_check: |t| <= 4 required");
  if (l < 1 || a < 1 || l + a > n)
    throw std::invalid_argument("marking_identity_check: need l + a <= n");
  // (1) E[tau, l+a, n] = sum over markings of Emark[tau, mrk, a, n-l -> n].
  Vec lhs = e_eval(ctx, t, l + a);
  CompensatedVec rhs(ctx.dim());
  for (const Marking& mk : enumerate_markings(t))
    rhs.add(1.0, emark(ctx, t, mk, a, n - l));
  double r1 = norm_inf(vdiff(lhs, rhs.sum));
  // (2) grad^{ell+1} L^{(n-l)}[prefixes at l] + beta E[tau,l+1,n] = E[tau,l,n].
  double r2 = 0.0;
  if (l + 1 <= n) {
    std::vector<Vec> dirs;
    for (const RootedTree& c : t.children())
      dirs.push_back(ctx.column(c, n).prefix[l]);
    Vec one_step = ctx.loss(n - l)->contract(
        ctx.theta(), static_cast<int>(t.children().size()) + 1, dirs);
    axpy(ctx.beta(), e_eval(ctx, t, l + 1), one_step);
    r2 = norm_inf(vdiff(one_step, e_eval(ctx, t, l)));
  }
  return std::max(r1, r2);
}

// ---------------------------------------------------------------------------
// Exhaustive permutation averaging of f_2^{(n)} (Appendix D): average over
// all P! permutations of the sample order, against the Lemma SwTWil
// prediction assembled from psi_coefficients and Lemma lpaUyF.

struct PermutationAverage {
  Vec mean;        // exhaustive average of f_2^{(n)}
  Vec prediction;  // (psi_= + psi_!=) H g + (...) grad tr Sigma
  int permutations = 0;
};

inline PermutationAverage permutation_average_f2(const MiniBatchFamily& family,
                                                 const Vec& theta, int n,
                                                 double beta) {
  const int p_total = family.sample_count();
  const int b_size = family.batch_size();
  if (p_total > 8)
    throw CapabilityError("permutation_average_f2: P <= 8 required");
  if (family.batch_count() != n + 1)
    throw std::invalid_argument(
        "permutation_average_f2: need (n + 1) * B = P batches");
  MiniBatchFamily work = family;
  std::vector<int> pi(p_total);
  for (int i = 0; i < p_total; ++i) pi[i] = i;
  CompensatedVec acc(theta.size());
  int count = 0;
  do {
    work.set_permutation(pi);
    // Batch k is consumed at step k: L^{(s)} = batch s of this permutation.
    std::vector<OraclePtr> batches;
    for (int k = 0; k <= n; ++k) batches.push_back(work.batch_oracle(k));
    CoefficientContext ctx(
        beta, n, [&batches](int s) { return batches.at(s); }, theta);
    acc.add(1.0, f_treesum(ctx, 2));
    ++count;
  } while (std::next_permutation(pi.begin(), pi.end()));
  PermutationAverage out;
  out.permutations = count;
  out.mean = scaled(acc.sum, 1.0 / count);
  // Prediction: E_pi f_2 = (psi_= + psi_!=) grad^2 L grad L
  //   + (psi_= (C-1) - psi_!=) / (2 (C B - 1)) * grad tr Sigma.
  double pe = 0.0, pn = 0.0;  // both psi's vanish at n = 0 (f_2^{(0)} = 0)
  if (n >= 1) {
    auto [psi_eq, psi_neq] = psi_coefficients(n);
    pe = psi_eq.eval_double(beta);
    pn = psi_neq.eval_double(beta);
  }
  OraclePtr full = family.full_loss();
  Vec grad = full->contract(theta, 1, {});
  Vec hgrad = full->contract(theta, 2, {grad});
  Vec gtr = grad_trace_covariance(family, theta);
  const double c_cnt = n + 1.0;
  out.prediction = scaled(hgrad, pe + pn);
  axpy((pe * (c_cnt - 1.0) - pn) / (2.0 * (c_cnt * b_size - 1.0)), gtr,
       out.prediction);
  return out;
}

}  // namespace hb
