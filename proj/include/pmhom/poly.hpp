#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "pmhom/error.hpp"

namespace pmhom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Exponents = std::vector<int>;

inline int total_degree(const Exponents& e) { return std::accumulate(e.begin(), e.end(), 0); }

// Vector-valued polynomial in `arity` variables with `codomain` components.
// Each component is a sorted list of monomials with distinct exponents.
class SparsePolynomial {
 public:
  struct Monomial {
    double coeff;
    Exponents exps;
    bool operator==(const Monomial&) const = default;
  };

  SparsePolynomial() = default;
  SparsePolynomial(int arity, int codomain) : arity_(arity), comps_(codomain) {}

  int arity() const { return arity_; }
  int codomain() const { return static_cast<int>(comps_.size()); }
  const std::vector<Monomial>& component(int c) const { return comps_.at(c); }

  SparsePolynomial& add(int comp, double coeff, const Exponents& exps) {
    if (static_cast<int>(exps.size()) != arity_)
      throw ValidationError("monomial exponent length " + std::to_string(exps.size()) +
                            " differs from arity " + std::to_string(arity_));
    if (std::any_of(exps.begin(), exps.end(), [](int e) { return e < 0; }))
      throw ValidationError("negative exponent");
    if (coeff == 0.0) return *this;
    auto& list = comps_.at(comp);
    auto it = std::lower_bound(list.begin(), list.end(), exps,
                               [](const Monomial& m, const Exponents& e) { return m.exps < e; });
    if (it != list.end() && it->exps == exps) {
      it->coeff += coeff;
      if (it->coeff == 0.0) list.erase(it);
    } else {
      list.insert(it, Monomial{coeff, exps});
    }
    return *this;
  }

  bool is_zero() const {
    return std::all_of(comps_.begin(), comps_.end(), [](const auto& c) { return c.empty(); });
  }

  std::size_t size() const {
    std::size_t s = 0;
    for (const auto& c : comps_) s += c.size();
    return s;
  }

  // Degree shared by every monomial, or nullopt for mixed or empty.
  std::optional<int> homogeneous_degree() const {
    std::optional<int> d;
    for (const auto& c : comps_)
      for (const auto& m : c) {
        int k = total_degree(m.exps);
        if (d && *d != k) return std::nullopt;
        d = k;
      }
    return d;
  }

  int max_degree() const {
    int d = -1;
    for (const auto& c : comps_)
      for (const auto& m : c) d = std::max(d, total_degree(m.exps));
    return d;
  }

  void eval_into(const double* z, double* out) const {
    for (std::size_t c = 0; c < comps_.size(); ++c) {
      double acc = 0.0;
      for (const auto& m : comps_[c]) {
        double v = m.coeff;
        for (int i = 0; i < arity_; ++i)
          for (int e = 0; e < m.exps[i]; ++e) v *= z[i];
        acc += v;
      }
      out[c] = acc;
    }
  }

  Vec operator()(const Vec& z) const {
    Vec out(codomain());
    eval_into(z.data(), out.data());
    return out;
  }

  // codomain x arity
  Mat jacobian(const Vec& z) const {
    Mat J = Mat::Zero(codomain(), arity_);
    for (std::size_t c = 0; c < comps_.size(); ++c)
      for (const auto& m : comps_[c])
        for (int k = 0; k < arity_; ++k) {
          if (m.exps[k] == 0) continue;
          double v = m.coeff * m.exps[k];
          for (int i = 0; i < arity_; ++i) {
            int e = m.exps[i] - (i == k ? 1 : 0);
            for (int r = 0; r < e; ++r) v *= z[i];
          }
          J(static_cast<Eigen::Index>(c), k) += v;
        }
    return J;
  }

  SparsePolynomial diff(int var) const {
    SparsePolynomial out(arity_, codomain());
    for (int c = 0; c < codomain(); ++c)
      for (const auto& m : comps_[c]) {
        if (m.exps[var] == 0) continue;
        Exponents e = m.exps;
        --e[var];
        out.add(c, m.coeff * m.exps[var], e);
      }
    return out;
  }

  // Jacobian as a polynomial with codomain*arity components, row-major.
  SparsePolynomial jacobian_poly() const {
    SparsePolynomial out(arity_, codomain() * arity_);
    for (int k = 0; k < arity_; ++k) {
      SparsePolynomial d = diff(k);
      for (int c = 0; c < codomain(); ++c)
        for (const auto& m : d.comps_[c]) out.add(c * arity_ + k, m.coeff, m.exps);
    }
    return out;
  }

  SparsePolynomial degree_part(int d) const {
    SparsePolynomial out(arity_, codomain());
    for (int c = 0; c < codomain(); ++c)
      for (const auto& m : comps_[c])
        if (total_degree(m.exps) == d) out.add(c, m.coeff, m.exps);
    return out;
  }

  // Keeps monomials not involving variables >= k and drops those variables: p(x, 0).
  SparsePolynomial restrict_prefix(int k) const {
    SparsePolynomial out(k, codomain());
    for (int c = 0; c < codomain(); ++c)
      for (const auto& m : comps_[c]) {
        if (std::any_of(m.exps.begin() + k, m.exps.end(), [](int e) { return e != 0; })) continue;
        out.add(c, m.coeff, Exponents(m.exps.begin(), m.exps.begin() + k));
      }
    return out;
  }

  // Components [from, from + count).
  SparsePolynomial slice(int from, int count) const {
    SparsePolynomial out(arity_, count);
    for (int c = 0; c < count; ++c) out.comps_[c] = comps_.at(from + c);
    return out;
  }

  // Adds trailing variables that do not appear.
  SparsePolynomial widen(int new_arity) const {
    SparsePolynomial out(new_arity, codomain());
    for (int c = 0; c < codomain(); ++c)
      for (const auto& m : comps_[c]) {
        Exponents e = m.exps;
        e.resize(new_arity, 0);
        out.add(c, m.coeff, e);
      }
    return out;
  }

  static SparsePolynomial stack(std::span<const SparsePolynomial> parts) {
    if (parts.empty()) return {};
    SparsePolynomial out(parts.front().arity(), 0);
    for (const auto& p : parts) {
      if (p.arity() != out.arity_) throw ValidationError("stack: arity mismatch");
      for (const auto& c : p.comps_) out.comps_.push_back(c);
    }
    return out;
  }

  static SparsePolynomial variable(int arity, int var) {
    SparsePolynomial out(arity, 1);
    Exponents e(arity, 0);
    e[var] = 1;
    out.add(0, 1.0, e);
    return out;
  }

  static SparsePolynomial constant(int arity, double v) {
    SparsePolynomial out(arity, 1);
    out.add(0, v, Exponents(arity, 0));
    return out;
  }

  SparsePolynomial& operator+=(const SparsePolynomial& o) {
    check_same_shape(o);
    for (int c = 0; c < codomain(); ++c)
      for (const auto& m : o.comps_[c]) add(c, m.coeff, m.exps);
    return *this;
  }
  SparsePolynomial& operator-=(const SparsePolynomial& o) { return *this += o * -1.0; }
  friend SparsePolynomial operator+(SparsePolynomial a, const SparsePolynomial& b) { return a += b; }
  friend SparsePolynomial operator-(SparsePolynomial a, const SparsePolynomial& b) { return a -= b; }
  friend SparsePolynomial operator*(SparsePolynomial a, double s) {
    if (s == 0.0) return SparsePolynomial(a.arity_, a.codomain());
    for (auto& c : a.comps_)
      for (auto& m : c) m.coeff *= s;
    return a;
  }

  // Componentwise product with a scalar polynomial (codomain 1).
  SparsePolynomial times(const SparsePolynomial& s) const {
    if (s.codomain() != 1 || s.arity() != arity_) throw ValidationError("times: shape mismatch");
    SparsePolynomial out(arity_, codomain());
    for (int c = 0; c < codomain(); ++c)
      for (const auto& a : comps_[c])
        for (const auto& b : s.comps_[0]) {
          Exponents e(arity_);
          for (int i = 0; i < arity_; ++i) e[i] = a.exps[i] + b.exps[i];
          out.add(c, a.coeff * b.coeff, e);
        }
    return out;
  }

  // Substitutes variable i by subs (codomain == arity of this); terms above
  // max_degree in the new variables are dropped.
  SparsePolynomial compose(const SparsePolynomial& subs, int max_degree = 1 << 20) const {
    if (subs.codomain() != arity_) throw ValidationError("compose: substitution size mismatch");
    const int a = subs.arity();
    std::vector<std::vector<SparsePolynomial>> powers(arity_);
    auto truncate = [&](const SparsePolynomial& p) {
      SparsePolynomial t(a, p.codomain());
      for (int c = 0; c < p.codomain(); ++c)
        for (const auto& m : p.comps_[c])
          if (total_degree(m.exps) <= max_degree) t.add(c, m.coeff, m.exps);
      return t;
    };
    auto power = [&](int var, int e) -> const SparsePolynomial& {
      auto& list = powers[var];
      if (list.empty()) list.push_back(constant(a, 1.0));
      while (static_cast<int>(list.size()) <= e)
        list.push_back(truncate(list.back().times(subs.slice(var, 1))));
      return list[e];
    };
    SparsePolynomial out(a, codomain());
    for (int c = 0; c < codomain(); ++c)
      for (const auto& m : comps_[c]) {
        SparsePolynomial term = constant(a, m.coeff);
        for (int i = 0; i < arity_; ++i)
          if (m.exps[i] > 0) term = truncate(term.times(power(i, m.exps[i])));
        for (const auto& t : term.comps_[0]) out.add(c, t.coeff, t.exps);
      }
    return out;
  }

  bool operator==(const SparsePolynomial&) const = default;

  bool approx_equal(const SparsePolynomial& o, double tol) const {
    if (o.arity_ != arity_ || o.codomain() != codomain()) return false;
    SparsePolynomial d = *this - o;
    for (const auto& c : d.comps_)
      for (const auto& m : c)
        if (std::abs(m.coeff) > tol) return false;
    return true;
  }

 private:
  void check_same_shape(const SparsePolynomial& o) const {
    if (o.arity_ != arity_ || o.codomain() != codomain())
      throw ValidationError("polynomial shape mismatch");
  }

  int arity_ = 0;
  std::vector<std::vector<Monomial>> comps_;
};

// Evaluates a polynomial with codomain rows*cols as a row-major matrix.
inline Mat eval_matrix(const SparsePolynomial& p, const Vec& x, int rows, int cols) {
  Vec v = p(x);
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r, c) = v(r * cols + c);
  return out;
}

}  // namespace pmhom
