#pragma once

// Derivative oracles for test losses, mini-batch families with permutation
// schedules, and the empirical gradient covariance.
//
// An oracle supplies contracted derivative tensors: contract(theta, k, dirs)
// with k-1 direction vectors returns the vector
//   [nabla^k L(theta)][u_1, ..., u_{k-1}]  (free index = result index).
// contract(theta, 1, {}) is the gradient.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hb/util.hpp"

#include "json.hpp"

namespace hb {

// Thrown when an operation exceeds what an implementation can provide
// (derivative order, problem size, convergence-radius violations, ...).
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DerivativeOracle {
 public:
  virtual ~DerivativeOracle() = default;
  virtual int dim() const = 0;
  virtual int max_order() const = 0;
  virtual double value(const Vec& theta) const = 0;
  virtual Vec contract(const Vec& theta, int k,
                       const std::vector<Vec>& dirs) const = 0;

 protected:
  void check_call(const Vec& theta, int k, const std::vector<Vec>& dirs) const {
    if (static_cast<int>(theta.size()) != dim())
      throw std::invalid_argument("oracle: theta dimension mismatch");
    if (k < 1) throw std::invalid_argument("oracle: derivative order < 1");
    if (k > max_order())
      throw CapabilityError("oracle: derivative order " + std::to_string(k) +
                            " exceeds supported order");
    if (static_cast<int>(dirs.size()) != k - 1)
      throw std::invalid_argument("oracle: need k-1 direction vectors");
  }
};

using OraclePtr = std::shared_ptr<const DerivativeOracle>;

// ---------------------------------------------------------------------------
// Multivariate polynomial loss: sum of monomial terms c * prod theta_i^{e_i}.
// All derivatives are closed-form; orders above the degree vanish exactly.

class PolynomialLoss : public DerivativeOracle {
 public:
  struct Term {
    double coeff;
    std::vector<int> exps;  // one exponent per coordinate
  };

  PolynomialLoss(int dim, std::vector<Term> terms)
      : dim_(dim), terms_(std::move(terms)) {
    for (const Term& t : terms_)
      if (static_cast<int>(t.exps.size()) != dim_)
        throw std::invalid_argument("PolynomialLoss: exponent size mismatch");
  }

  int dim() const override { return dim_; }
  int max_order() const override { return 32; }

  double value(const Vec& theta) const override {
    double s = 0;
    for (const Term& t : terms_) s += t.coeff * monomial(theta, t.exps);
    return s;
  }

  Vec contract(const Vec& theta, int k,
               const std::vector<Vec>& dirs) const override {
    check_call(theta, k, dirs);
    // Differentiate along each direction, then take the gradient of what is
    // left; monomials stay monomials throughout.
    std::vector<Term> cur = terms_;
    for (const Vec& u : dirs) {
      std::vector<Term> next;
      next.reserve(cur.size() * dim_);
      for (const Term& t : cur)
        for (int j = 0; j < dim_; ++j)
          if (t.exps[j] > 0 && u[j] != 0.0) {
            Term d = t;
            d.coeff *= t.exps[j] * u[j];
            d.exps[j] -= 1;
            next.push_back(std::move(d));
          }
      cur = std::move(next);
    }
    Vec r = zeros(dim_);
    for (const Term& t : cur)
      for (int i = 0; i < dim_; ++i)
        if (t.exps[i] > 0) {
          std::vector<int> e = t.exps;
          e[i] -= 1;
          r[i] += t.coeff * t.exps[i] * monomial(theta, e);
        }
    return r;
  }

 private:
  static double monomial(const Vec& theta, const std::vector<int>& e) {
    double p = 1;
    for (std::size_t i = 0; i < e.size(); ++i)
      for (int t = 0; t < e[i]; ++t) p *= theta[i];
    return p;
  }

  int dim_;
  std::vector<Term> terms_;
};

// ---------------------------------------------------------------------------
// Quadratic loss 1/2 theta^T A theta - b^T theta + c0 with symmetric A.

class QuadraticLoss : public DerivativeOracle {
 public:
  QuadraticLoss(Mat a, Vec b, double c0 = 0.0)
      : a_(std::move(a)), b_(std::move(b)), c0_(c0) {
    const std::size_t d = a_.size();
    if (b_.size() != d)
      throw std::invalid_argument("QuadraticLoss: size mismatch");
    for (std::size_t i = 0; i < d; ++i) {
      if (a_[i].size() != d)
        throw std::invalid_argument("QuadraticLoss: A not square");
      for (std::size_t j = 0; j < d; ++j)
        if (a_[i][j] != a_[j][i])
          throw std::invalid_argument("QuadraticLoss: A not symmetric");
    }
  }

  const Mat& matrix() const { return a_; }
  const Vec& linear() const { return b_; }

  int dim() const override { return static_cast<int>(a_.size()); }
  int max_order() const override { return 32; }

  double value(const Vec& theta) const override {
    double s = c0_;
    for (int i = 0; i < dim(); ++i) {
      s -= b_[i] * theta[i];
      for (int j = 0; j < dim(); ++j) s += 0.5 * theta[i] * a_[i][j] * theta[j];
    }
    return s;
  }

  Vec contract(const Vec& theta, int k,
               const std::vector<Vec>& dirs) const override {
    check_call(theta, k, dirs);
    if (k >= 3) return zeros(dim());
    const Vec& x = (k == 1) ? theta : dirs[0];
    Vec r = zeros(dim());
    for (int i = 0; i < dim(); ++i) {
      for (int j = 0; j < dim(); ++j) r[i] += a_[i][j] * x[j];
      if (k == 1) r[i] -= b_[i];
    }
    return r;
  }

 private:
  Mat a_;
  Vec b_;
  double c0_;
};

// ---------------------------------------------------------------------------
// Bounded-derivative sinusoid a * sum_i cos(omega * theta_i). The derivative
// tensors are diagonal: the only nonzero entries are (i, i, ..., i).

class SinusoidLoss : public DerivativeOracle {
 public:
  SinusoidLoss(int dim, double amplitude, double omega)
      : dim_(dim), a_(amplitude), w_(omega) {}

  int dim() const override { return dim_; }
  int max_order() const override { return 32; }

  double value(const Vec& theta) const override {
    double s = 0;
    for (double t : theta) s += a_ * std::cos(w_ * t);
    return s;
  }

  Vec contract(const Vec& theta, int k,
               const std::vector<Vec>& dirs) const override {
    check_call(theta, k, dirs);
    Vec r(dim_);
    double wk = std::pow(w_, k);
    for (int i = 0; i < dim_; ++i) {
      // d^k/dx^k cos(w x) = w^k cos(w x + k pi/2).
      double v = a_ * wk * std::cos(w_ * theta[i] + k * M_PI_2);
      for (const Vec& u : dirs) v *= u[i];
      r[i] = v;
    }
    return r;
  }

 private:
  int dim_;
  double a_, w_;
};

// ---------------------------------------------------------------------------
// Mean of several oracles (used for batch losses and the full-batch mean).

class MeanOracle : public DerivativeOracle {
 public:
  explicit MeanOracle(std::vector<OraclePtr> members)
      : members_(std::move(members)) {
    if (members_.empty())
      throw std::invalid_argument("MeanOracle: no members");
  }

  int dim() const override { return members_.front()->dim(); }
  int max_order() const override {
    int m = members_.front()->max_order();
    for (const auto& o : members_) m = std::min(m, o->max_order());
    return m;
  }
  double value(const Vec& theta) const override {
    double s = 0;
    for (const auto& o : members_) s += o->value(theta);
    return s / members_.size();
  }
  Vec contract(const Vec& theta, int k,
               const std::vector<Vec>& dirs) const override {
    Vec r = zeros(dim());
    for (const auto& o : members_) axpy(1.0, o->contract(theta, k, dirs), r);
    return scaled(r, 1.0 / members_.size());
  }

 private:
  std::vector<OraclePtr> members_;
};

// ---------------------------------------------------------------------------
// Mini-batch family: P per-sample oracles, batch size B, batch count C = P/B,
// a permutation pi of {0..P-1}. Batch k is the mean of samples
// pi[kB], ..., pi[kB+B-1]; batching is a view, so re-permuting is O(1).

class MiniBatchFamily {
 public:
  MiniBatchFamily(std::vector<OraclePtr> samples, int batch_size)
      : samples_(std::move(samples)), batch_size_(batch_size) {
    if (batch_size_ < 1 ||
        static_cast<int>(samples_.size()) % batch_size_ != 0)
      throw std::invalid_argument("MiniBatchFamily: P must be a multiple of B");
    permutation_.resize(samples_.size());
    std::iota(permutation_.begin(), permutation_.end(), 0);
  }

  int sample_count() const { return static_cast<int>(samples_.size()); }
  int batch_size() const { return batch_size_; }
  int batch_count() const { return sample_count() / batch_size_; }
  const std::vector<int>& permutation() const { return permutation_; }
  const std::vector<OraclePtr>& samples() const { return samples_; }

  void set_permutation(std::vector<int> pi) {
    if (static_cast<int>(pi.size()) != sample_count())
      throw std::invalid_argument("MiniBatchFamily: permutation size");
    permutation_ = std::move(pi);
  }
  void shuffle(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::shuffle(permutation_.begin(), permutation_.end(), rng);
  }

  OraclePtr batch_oracle(int k) const {
    if (k < 0 || k >= batch_count())
      throw std::invalid_argument("MiniBatchFamily: batch index");
    std::vector<OraclePtr> members;
    members.reserve(batch_size_);
    for (int r = 0; r < batch_size_; ++r)
      members.push_back(samples_[permutation_[k * batch_size_ + r]]);
    return std::make_shared<MeanOracle>(std::move(members));
  }

  OraclePtr full_loss() const {
    return std::make_shared<MeanOracle>(samples_);
  }

 private:
  std::vector<OraclePtr> samples_;
  int batch_size_;
  std::vector<int> permutation_;
};

// Empirical covariance of per-sample gradients (Eq. empirical-covariance):
// Sigma_ij = (1/P) sum_p d_i(l_p - L) d_j(l_p - L), population-normalized.
inline Mat empirical_covariance(const MiniBatchFamily& family,
                                const Vec& theta) {
  const int d = family.samples().front()->dim();
  Vec mean_grad = family.full_loss()->contract(theta, 1, {});
  Mat sigma(d, Vec(d, 0.0));
  for (const auto& s : family.samples()) {
    Vec g = vdiff(s->contract(theta, 1, {}), mean_grad);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) sigma[i][j] += g[i] * g[j];
  }
  for (auto& row : sigma)
    for (double& x : row) x /= family.sample_count();
  return sigma;
}

// Gradient of trace Sigma(theta), computed analytically:
// tr Sigma = (1/P) sum_p ||grad l_p - grad L||^2, so
// grad tr Sigma = (2/P) sum_p (hess l_p - hess L)(grad l_p - grad L).
inline Vec grad_trace_covariance(const MiniBatchFamily& family,
                                 const Vec& theta) {
  const int d = family.samples().front()->dim();
  OraclePtr full = family.full_loss();
  Vec mean_grad = full->contract(theta, 1, {});
  Vec r = zeros(d);
  for (const auto& s : family.samples()) {
    Vec g = vdiff(s->contract(theta, 1, {}), mean_grad);
    axpy(2.0, s->contract(theta, 2, {g}), r);
    axpy(-2.0, full->contract(theta, 2, {g}), r);
  }
  return scaled(r, 1.0 / family.sample_count());
}

// ---------------------------------------------------------------------------
// Built-in losses by name, with JSON-style parameters:
//   quadratic: {"A": [[...]], "b": [...]}
//   quartic:   {"c": [...], "A": [[...]], "b": [...]}   sum c_i x_i^4 + quadratic
//   coupled:   fixed coupled cubic-quartic polynomial in dimension "dimension"
//   sinusoid:  {"dimension": d, "amplitude": a, "omega": w}
//   lstsq:     {"X": [[...]], "y": [...]}   -> handled by lstsq_family below

inline Mat parse_matrix(const nlohmann::json& j) {
  Mat m;
  for (const auto& row : j) m.push_back(row.get<Vec>());
  return m;
}

inline OraclePtr builtin_loss(const std::string& name,
                              const nlohmann::json& params) {
  if (name == "quadratic") {
    return std::make_shared<QuadraticLoss>(parse_matrix(params.at("A")),
                                           params.at("b").get<Vec>());
  }
  if (name == "quartic") {
    Vec c = params.at("c").get<Vec>();
    Mat a = parse_matrix(params.at("A"));
    Vec b = params.at("b").get<Vec>();
    int d = static_cast<int>(c.size());
    std::vector<PolynomialLoss::Term> terms;
    for (int i = 0; i < d; ++i) {
      std::vector<int> e(d, 0);
      e[i] = 4;
      terms.push_back({c[i], e});
      std::vector<int> e1(d, 0);
      e1[i] = 1;
      terms.push_back({-b[i], e1});
      for (int j = 0; j < d; ++j) {
        std::vector<int> e2(d, 0);
        e2[i] += 1;
        e2[j] += 1;
        terms.push_back({0.5 * a[i][j], e2});
      }
    }
    return std::make_shared<PolynomialLoss>(d, std::move(terms));
  }
  if (name == "coupled") {
    // Coupled cubic-quartic polynomial with nontrivial third and fourth
    // derivatives in every coordinate pair.
    int d = params.value("dimension", 2);
    std::vector<PolynomialLoss::Term> terms;
    for (int i = 0; i < d; ++i) {
      std::vector<int> e4(d, 0), e2(d, 0);
      e4[i] = 4;
      e2[i] = 2;
      terms.push_back({0.25, e4});
      terms.push_back({0.5, e2});
      for (int j = i + 1; j < d; ++j) {
        std::vector<int> e31(d, 0), e22(d, 0), e21(d, 0);
        e31[i] = 3;
        e31[j] = 1;
        e22[i] = 2;
        e22[j] = 2;
        e21[i] = 2;
        e21[j] = 1;
        terms.push_back({0.1, e31});
        terms.push_back({0.15, e22});
        terms.push_back({0.2, e21});
      }
    }
    return std::make_shared<PolynomialLoss>(d, std::move(terms));
  }
  if (name == "sinusoid") {
    return std::make_shared<SinusoidLoss>(params.value("dimension", 1),
                                          params.value("amplitude", 1.0),
                                          params.value("omega", 1.0));
  }
  throw std::invalid_argument("builtin_loss: unknown loss '" + name + "'");
}

// Per-sample least-squares family: l_p(theta) = 1/2 (x_p^T theta - y_p)^2.
inline MiniBatchFamily lstsq_family(const Mat& x, const Vec& y,
                                    int batch_size) {
  if (x.size() != y.size())
    throw std::invalid_argument("lstsq_family: X rows must match y");
  std::vector<OraclePtr> samples;
  for (std::size_t p = 0; p < x.size(); ++p) {
    const Vec& row = x[p];
    const int d = static_cast<int>(row.size());
    Mat a(d, Vec(d, 0.0));
    Vec b(d, 0.0);
    for (int i = 0; i < d; ++i) {
      b[i] = y[p] * row[i];
      for (int j = 0; j < d; ++j) a[i][j] = row[i] * row[j];
    }
    samples.push_back(
        std::make_shared<QuadraticLoss>(a, b, 0.5 * y[p] * y[p]));
  }
  return MiniBatchFamily(std::move(samples), batch_size);
}

// Resolve a loss config document to either a full-batch oracle or a
// mini-batch family (when "name" == "lstsq" or per-sample specs are given).
struct LossConfig {
  OraclePtr full;                       // always set
  std::shared_ptr<MiniBatchFamily> family;  // set for per-sample configs
};

inline LossConfig load_loss_config(const nlohmann::json& j,
                                   int batch_size_hint = 1) {
  LossConfig cfg;
  std::string name = j.at("name").get<std::string>();
  if (name == "lstsq") {
    auto fam = std::make_shared<MiniBatchFamily>(
        lstsq_family(parse_matrix(j.at("X")), j.at("y").get<Vec>(),
                     j.value("batch_size", batch_size_hint)));
    cfg.family = fam;
    cfg.full = fam->full_loss();
    return cfg;
  }
  cfg.full = builtin_loss(name, j);
  return cfg;
}

}  // namespace hb
