#pragma once

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmhom/domain.hpp"
#include "pmhom/error.hpp"
#include "pmhom/interp.hpp"
#include "pmhom/poly.hpp"
#include "pmhom/settings.hpp"

namespace pmhom {

// Tensor-product interpolation grid on the cross-section Sigma = V ∩ {|x| = 1}.
class CrossSectionGrid {
 public:
  // `pad` widens non-periodic chart axes beyond the cone (radians).
  CrossSectionGrid(const DomainSpec& domain, int nodes, InterpScheme scheme, double pad = 0.0)
      : domain_(domain), scheme_(scheme), pad_(pad) {
    const int n = domain.n();
    if (n == 1) {
      for (double s : domain.line_signs()) {
        Vec u(1);
        u(0) = s;
        nodes_.push_back(u / domain.norm_x()(u));
      }
      return;
    }
    int per_axis = n == 2 ? nodes : std::max(9, nodes / 8);
    for (auto ax : domain.chart_axes()) {
      if (!ax.periodic) {
        ax.lo -= pad;
        ax.hi += pad;
      }
      axes_.emplace_back(ax, per_axis, scheme);
    }
    std::vector<int> idx(axes_.size(), 0);
    const int total = node_total();
    for (int k = 0; k < total; ++k) {
      std::vector<double> theta(axes_.size());
      int rest = k;
      for (int a = static_cast<int>(axes_.size()) - 1; a >= 0; --a) {
        theta[a] = axes_[a].nodes()[rest % axes_[a].size()];
        rest /= axes_[a].size();
      }
      nodes_.push_back(domain.direction(theta));
    }
  }

  const DomainSpec& domain() const { return domain_; }
  InterpScheme scheme() const { return scheme_; }
  double pad() const { return pad_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Vec>& nodes() const { return nodes_; }
  const std::vector<Axis1D>& axes() const { return axes_; }

  // Interpolation weights for direction x (any positive multiple allowed).
  void weights_at(const Vec& x, std::vector<double>& w) const {
    const int total = node_count();
    if (domain_.n() == 1) {
      w.assign(total, 0.0);
      auto signs = domain_.line_signs();
      for (int k = 0; k < total; ++k)
        if ((x(0) > 0) == (signs[k] > 0)) w[k] = 1.0;
      return;
    }
    auto theta = domain_.chart_coords(x);
    thread_local std::vector<std::vector<double>> per_axis;
    per_axis.resize(axes_.size());
    for (std::size_t a = 0; a < axes_.size(); ++a) axes_[a].basis(theta[a], per_axis[a]);
    if (axes_.size() == 1) {
      w = per_axis[0];
      return;
    }
    w.assign(total, 0.0);
    for (int k = 0; k < total; ++k) {
      double v = 1.0;
      int rest = k;
      for (int a = static_cast<int>(axes_.size()) - 1; a >= 0 && v != 0.0; --a) {
        v *= per_axis[a][rest % axes_[a].size()];
        rest /= axes_[a].size();
      }
      w[k] = v;
    }
  }

  // Max over components and axis-lines of the per-axis error estimate.
  double error_estimate(const Mat& values) const {
    if (domain_.n() == 1) return 0.0;
    double worst = 0.0;
    const int total = node_count();
    for (std::size_t a = 0; a < axes_.size(); ++a) {
      int stride = 1;
      for (std::size_t b = a + 1; b < axes_.size(); ++b) stride *= axes_[b].size();
      const int len = axes_[a].size();
      std::vector<double> line(len);
      for (int start = 0; start < total; ++start) {
        if ((start / stride) % len != 0) continue;
        for (Eigen::Index c = 0; c < values.rows(); ++c) {
          for (int i = 0; i < len; ++i) line[i] = values(c, start + i * stride);
          worst = std::max(worst, axes_[a].error_estimate(line));
        }
      }
    }
    return worst;
  }

 private:
  int node_total() const {
    int t = 1;
    for (const auto& a : axes_) t *= a.size();
    return t;
  }

  DomainSpec domain_;
  InterpScheme scheme_;
  double pad_ = 0.0;
  std::vector<Axis1D> axes_;
  std::vector<Vec> nodes_;
};

using GridPtr = std::shared_ptr<const CrossSectionGrid>;

enum class TermKind { polynomial, closed_form, lazy, interpolant, sum };

inline std::string to_string(TermKind k) {
  switch (k) {
    case TermKind::polynomial: return "polynomial";
    case TermKind::closed_form: return "closed-form";
    case TermKind::lazy: return "lazy";
    case TermKind::interpolant: return "interpolant";
    case TermKind::sum: return "sum";
  }
  return "?";
}

using PointFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

// Homogeneous function h(lambda x) = lambda^d h(x) on the cone V.  Immutable,
// cheap to copy.
class HomogeneousTerm {
 public:
  struct Impl {
    virtual ~Impl() = default;
    double degree = 0;
    int in_dim = 0;
    int out_dim = 0;
    double error_bound = 0.0;
    virtual TermKind kind() const = 0;
    virtual Vec eval(const Vec& x) const = 0;
    virtual std::optional<Mat> exact_jacobian(const Vec&) const { return std::nullopt; }
    virtual const SparsePolynomial* poly_ptr() const { return nullptr; }
  };

  HomogeneousTerm() = default;
  explicit HomogeneousTerm(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  static HomogeneousTerm zero(double degree, int in_dim, int out_dim) {
    return polynomial(SparsePolynomial(in_dim, out_dim), degree);
  }

  static HomogeneousTerm polynomial(SparsePolynomial p, double degree) {
    struct Poly : Impl {
      SparsePolynomial poly;
      TermKind kind() const override { return TermKind::polynomial; }
      Vec eval(const Vec& x) const override { return poly(x); }
      std::optional<Mat> exact_jacobian(const Vec& x) const override { return poly.jacobian(x); }
      const SparsePolynomial* poly_ptr() const override { return &poly; }
    };
    if (!p.is_zero()) {
      auto d = p.homogeneous_degree();
      if (!d || *d != degree)
        throw ValidationError(fmt::format("polynomial term is not homogeneous of degree {}", degree));
    }
    auto impl = std::make_shared<Poly>();
    impl->degree = degree;
    impl->in_dim = p.arity();
    impl->out_dim = p.codomain();
    impl->poly = std::move(p);
    return HomogeneousTerm(impl);
  }

  static HomogeneousTerm function(TermKind kind, double degree, int in_dim, int out_dim, PointFn f,
                                  JacobianFn jac = {}, double error_bound = 0.0) {
    struct Fn : Impl {
      TermKind k;
      PointFn f;
      JacobianFn jac;
      TermKind kind() const override { return k; }
      Vec eval(const Vec& x) const override { return f(x); }
      std::optional<Mat> exact_jacobian(const Vec& x) const override {
        if (!jac) return std::nullopt;
        return jac(x);
      }
    };
    auto impl = std::make_shared<Fn>();
    impl->degree = degree;
    impl->in_dim = in_dim;
    impl->out_dim = out_dim;
    impl->error_bound = error_bound;
    impl->k = kind;
    impl->f = std::move(f);
    impl->jac = std::move(jac);
    return HomogeneousTerm(impl);
  }

  static HomogeneousTerm closed_form(double degree, int in_dim, int out_dim, PointFn f, JacobianFn jac = {}) {
    return function(TermKind::closed_form, degree, in_dim, out_dim, std::move(f), std::move(jac));
  }

  static HomogeneousTerm interpolant(GridPtr grid, double degree, Mat values, double error_bound) {
    struct Interp : Impl {
      GridPtr grid;
      Mat values;
      TermKind kind() const override { return TermKind::interpolant; }
      Vec eval(const Vec& x) const override {
        const DomainSpec& dom = grid->domain();
        double r = dom.norm_x()(x);
        if (r == 0.0) return Vec::Zero(out_dim);
        thread_local std::vector<double> w;
        grid->weights_at(x, w);
        Vec acc = Vec::Zero(out_dim);
        for (std::size_t k = 0; k < w.size(); ++k)
          if (w[k] != 0.0) acc += w[k] * values.col(static_cast<Eigen::Index>(k));
        return std::pow(r, degree) * acc;
      }
    };
    auto impl = std::make_shared<Interp>();
    impl->degree = degree;
    impl->in_dim = grid->domain().n();
    impl->out_dim = static_cast<int>(values.rows());
    impl->error_bound = error_bound;
    impl->grid = std::move(grid);
    impl->values = std::move(values);
    return HomogeneousTerm(impl);
  }

  // Sum of terms of equal degree.
  static HomogeneousTerm sum(std::vector<HomogeneousTerm> parts) {
    if (parts.empty()) throw ValidationError("empty sum");
    if (parts.size() == 1) return parts.front();
    const double d = parts.front().degree();
    SparsePolynomial poly(parts.front().in_dim(), parts.front().out_dim());
    std::vector<HomogeneousTerm> rest;
    for (auto& p : parts) {
      if (std::abs(p.degree() - d) > 1e-12) throw ValidationError("sum of terms with different degrees");
      if (p.as_polynomial()) poly += *p.as_polynomial();
      else rest.push_back(p);
    }
    if (rest.empty()) return polynomial(poly, d);
    if (!poly.is_zero()) rest.push_back(polynomial(poly, d));
    if (rest.size() == 1) return rest.front();
    struct Sum : Impl {
      std::vector<HomogeneousTerm> parts;
      TermKind kind() const override { return TermKind::sum; }
      Vec eval(const Vec& x) const override {
        Vec acc = parts.front()(x);
        for (std::size_t i = 1; i < parts.size(); ++i) acc += parts[i](x);
        return acc;
      }
    };
    auto impl = std::make_shared<Sum>();
    impl->degree = d;
    impl->in_dim = rest.front().in_dim();
    impl->out_dim = rest.front().out_dim();
    for (const auto& p : rest) impl->error_bound += p.error_bound();
    impl->parts = std::move(rest);
    return HomogeneousTerm(impl);
  }

  bool valid() const { return static_cast<bool>(impl_); }
  double degree() const { return impl_->degree; }
  int in_dim() const { return impl_->in_dim; }
  int out_dim() const { return impl_->out_dim; }
  TermKind kind() const { return impl_->kind(); }
  double error_bound() const { return impl_->error_bound; }
  const Impl& impl() const { return *impl_; }

  const SparsePolynomial* as_polynomial() const {
    return impl_ ? impl_->poly_ptr() : nullptr;
  }

  bool is_zero_polynomial() const {
    const auto* p = as_polynomial();
    return p && p->is_zero();
  }

  Vec operator()(const Vec& x) const { return impl_->eval(x); }

  std::optional<Mat> exact_jacobian(const Vec& x) const { return impl_->exact_jacobian(x); }

  HomogeneousTerm scaled(double s) const {
    if (const auto* p = as_polynomial()) return polynomial(*p * s, degree());
    HomogeneousTerm self = *this;
    return closed_form(degree(), in_dim(), out_dim(), [self, s](const Vec& x) { return Vec(s * self(x)); });
  }

 private:
  std::shared_ptr<const Impl> impl_;
};

// Checks x ∈ V before evaluating.
inline Vec eval_term(const HomogeneousTerm& h, const Vec& x, const DomainSpec& domain) {
  if (!domain.in_cone(x)) throw OutOfDomain("point outside the cone V");
  return h(x);
}

// Jacobian (out_dim x in_dim): exact when available, else central differences
// with step fd_rel * |x|.
inline Mat differentiate_term(const HomogeneousTerm& h, const Vec& x, double fd_rel = 1e-5) {
  if (auto J = h.exact_jacobian(x)) return *J;
  const int n = h.in_dim();
  Mat J(h.out_dim(), n);
  const double step = fd_rel * std::max(x.norm(), 1e-300);
  for (int i = 0; i < n; ++i) {
    Vec xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    try {
      J.col(i) = (h(xp) - h(xm)) / (2.0 * step);
    } catch (const StaleInterpolant&) {
      throw NearBoundary("finite-difference stencil leaves the interpolation patch");
    }
  }
  return J;
}

// A(x) t(x) with A a polynomial matrix field (rows x cols, row-major) of degree
// deg_A; the product rule gives the Jacobian.
inline HomogeneousTerm matrix_times(const SparsePolynomial& A, int rows, int cols, double deg_A,
                                    const HomogeneousTerm& t, double fd_rel = 1e-5) {
  if (t.is_zero_polynomial() || A.is_zero())
    return HomogeneousTerm::zero(deg_A + t.degree(), t.in_dim(), rows);
  if (const auto* tp = t.as_polynomial()) {
    SparsePolynomial out(t.in_dim(), rows);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        SparsePolynomial prod = A.slice(r * cols + c, 1).times(tp->slice(c, 1));
        for (const auto& mono : prod.component(0)) out.add(r, mono.coeff, mono.exps);
      }
    return HomogeneousTerm::polynomial(out, deg_A + t.degree());
  }
  SparsePolynomial dA = A.jacobian_poly();
  const int n = t.in_dim();
  auto value = [A, rows, cols, t](const Vec& x) -> Vec { return eval_matrix(A, x, rows, cols) * t(x); };
  auto jac = [A, dA, rows, cols, t, n, fd_rel](const Vec& x) -> Mat {
    Vec tv = t(x);
    Mat J = eval_matrix(A, x, rows, cols) * differentiate_term(t, x, fd_rel);
    Vec d = dA(x);  // entry (r*cols + c)*n + l
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        for (int l = 0; l < n; ++l) J(r, l) += d((r * cols + c) * n + l) * tv(c);
    return J;
  };
  return HomogeneousTerm::closed_form(deg_A + t.degree(), n, rows, value, jac);
}

// Evaluates `h` at the grid nodes and returns the interpolant term.
inline HomogeneousTerm materialize(const HomogeneousTerm& h, const GridPtr& grid) {
  if (h.kind() == TermKind::polynomial || h.kind() == TermKind::interpolant) return h;
  Mat values(h.out_dim(), grid->node_count());
  for (int k = 0; k < grid->node_count(); ++k) values.col(k) = h(grid->nodes()[k]);
  double err = grid->error_estimate(values) + h.error_bound();
  return HomogeneousTerm::interpolant(grid, h.degree(), std::move(values), err);
}

// Node values of an interpolant term (or evaluation at the nodes otherwise).
inline Mat node_values(const HomogeneousTerm& h, const CrossSectionGrid& grid) {
  Mat values(h.out_dim(), grid.node_count());
  for (int k = 0; k < grid.node_count(); ++k) values.col(k) = h(grid.nodes()[k]);
  return values;
}

// Finite sum of homogeneous terms keyed by degree.
class GradedFunction {
 public:
  GradedFunction() = default;
  GradedFunction(int in_dim, int out_dim, double remainder_order = 0)
      : in_dim_(in_dim), out_dim_(out_dim), remainder_order_(remainder_order) {}

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  double remainder_order() const { return remainder_order_; }
  void set_remainder_order(double r) { remainder_order_ = r; }
  const std::map<double, HomogeneousTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  // Adds a term; equal degrees are merged into a sum.
  void add(const HomogeneousTerm& t) {
    if (t.in_dim() != in_dim_ || t.out_dim() != out_dim_) throw ValidationError("graded term shape mismatch");
    auto it = terms_.find(t.degree());
    if (it == terms_.end()) terms_.emplace(t.degree(), t);
    else it->second = HomogeneousTerm::sum({it->second, t});
    remainder_order_ = std::max(remainder_order_, t.degree());
  }

  const HomogeneousTerm* at(double degree) const {
    auto it = terms_.find(degree);
    return it == terms_.end() ? nullptr : &it->second;
  }

  Vec operator()(const Vec& x) const {
    Vec acc = Vec::Zero(out_dim_);
    for (const auto& [d, t] : terms_)
      if (!t.is_zero_polynomial()) acc += t(x);
    return acc;
  }

  Mat jacobian(const Vec& x, double fd_rel = 1e-5) const {
    Mat J = Mat::Zero(out_dim_, in_dim_);
    for (const auto& [d, t] : terms_)
      if (!t.is_zero_polynomial()) J += differentiate_term(t, x, fd_rel);
    return J;
  }

  std::set<double> degrees() const {
    std::set<double> s;
    for (const auto& [d, t] : terms_)
      if (!t.is_zero_polynomial()) s.insert(d);
    return s;
  }

  bool all_polynomial() const {
    for (const auto& [d, t] : terms_)
      if (!t.as_polynomial()) return false;
    return true;
  }

  SparsePolynomial as_polynomial() const {
    SparsePolynomial s(in_dim_, out_dim_);
    for (const auto& [d, t] : terms_) s += *t.as_polynomial();
    return s;
  }

  GradedFunction without(double degree) const {
    GradedFunction g = *this;
    g.terms_.erase(degree);
    return g;
  }

  bool operator==(const GradedFunction& o) const = delete;

 private:
  int in_dim_ = 0;
  int out_dim_ = 0;
  double remainder_order_ = 0;
  std::map<double, HomogeneousTerm> terms_;
};

// Degree bookkeeping for compositions, truncated at a cap.
using DegreeSet = std::set<double>;

inline DegreeSet degree_sum(const DegreeSet& a, const DegreeSet& b, double cap) {
  DegreeSet out;
  for (double x : a)
    for (double y : b)
      if (x + y <= cap + 1e-9) out.insert(x + y);
  return out;
}

// Degrees of k-fold products of elements of `base`.
inline DegreeSet degree_power(const DegreeSet& base, int k, double cap) {
  DegreeSet out{0.0};
  for (int i = 0; i < k; ++i) out = degree_sum(out, base, cap);
  return out;
}

// Degrees of P(z) for a polynomial with monomials x^a y^b, |a|, |b| given,
// when x has degree set dx and y has degree set dy.
inline DegreeSet degrees_of_polynomial_composition(const SparsePolynomial& P, int n, const DegreeSet& dx,
                                                   const DegreeSet& dy, double cap) {
  DegreeSet out;
  std::set<std::pair<int, int>> seen;
  for (int c = 0; c < P.codomain(); ++c)
    for (const auto& mono : P.component(c)) {
      int ax = 0, ay = 0;
      for (int i = 0; i < static_cast<int>(mono.exps.size()); ++i) (i < n ? ax : ay) += mono.exps[i];
      if (!seen.insert({ax, ay}).second) continue;
      DegreeSet s = degree_sum(degree_power(dx, ax, cap), degree_power(dy, ay, cap), cap);
      out.insert(s.begin(), s.end());
    }
  return out;
}

// Degrees of h(x + delta(x)) - h(x) with deg h = d and delta of degrees dd (all > 1).
inline DegreeSet degrees_of_shift(double d, const DegreeSet& dd, double cap) {
  DegreeSet shifts;
  for (double e : dd) shifts.insert(e - 1.0);
  DegreeSet out;
  DegreeSet acc{0.0};
  for (int k = 1; k < 64; ++k) {
    acc = degree_sum(acc, shifts, cap - d);
    if (acc.empty()) break;
    for (double s : acc) out.insert(d + s);
  }
  return out;
}

struct ExtractionResult {
  HomogeneousTerm term;
  double fit_residual = 0.0;  // relative to the largest sampled value
  double condition = 0.0;
};

inline std::vector<double> radius_ladder(double rho, const Tolerances& tol) {
  std::vector<double> l;
  double r = tol.ladder_top * rho;
  for (int i = 0; i < tol.ladder_count; ++i, r *= tol.ladder_ratio) l.push_back(r);
  return l;
}

// Degree-d component of f = sum_k f_k + rest by least squares along a radius
// ladder at every grid node.
inline ExtractionResult extract_homogeneous(const PointFn& f, int out_dim, double d,
                                            std::vector<double> present, const GridPtr& grid,
                                            const std::vector<double>& lambdas) {
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                present.end());
  auto pos = std::find_if(present.begin(), present.end(), [d](double v) { return std::abs(v - d) < 1e-12; });
  if (pos == present.end()) throw ValidationError("target degree not among present degrees");
  const int nl = static_cast<int>(lambdas.size());
  const int max_cols = std::max(1, nl - 2);
  if (static_cast<int>(present.size()) > max_cols) present.resize(max_cols);
  pos = std::find_if(present.begin(), present.end(), [d](double v) { return std::abs(v - d) < 1e-12; });
  if (pos == present.end()) throw IllConditionedExtraction("ladder too short for the declared degrees");
  const int target = static_cast<int>(pos - present.begin());
  const int nc = static_cast<int>(present.size());
  const double lmax = *std::max_element(lambdas.begin(), lambdas.end());

  Mat A(nl, nc);
  for (int i = 0; i < nl; ++i)
    for (int k = 0; k < nc; ++k) A(i, k) = std::pow(lambdas[i] / lmax, present[k]);
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double cond = sv(0) / sv(sv.size() - 1);
  if (!(cond < 1e13)) throw IllConditionedExtraction(fmt::format("Vandermonde condition {:.3g}", cond));

  const int nn = grid->node_count();
  Mat values(out_dim, nn);
  double worst_res = 0.0, scale = 0.0;
  Mat rhs(nl, out_dim);
  for (int k = 0; k < nn; ++k) {
    const Vec& u = grid->nodes()[k];
    for (int i = 0; i < nl; ++i) rhs.row(i) = f(lambdas[i] * u).transpose();
    Mat coef = svd.solve(rhs);
    Mat res = A * coef - rhs;
    worst_res = std::max(worst_res, res.cwiseAbs().maxCoeff());
    scale = std::max(scale, rhs.cwiseAbs().maxCoeff());
    values.col(k) = coef.row(target).transpose() / std::pow(lmax, d);
  }
  double rel = scale > 0 ? worst_res / scale : 0.0;
  if (rel > 1e-2)
    throw FitResidualTooLarge(fmt::format("relative fit residual {:.3g} at degree {}", rel, d));
  double err = grid->error_estimate(values) + rel * values.cwiseAbs().maxCoeff();
  return {HomogeneousTerm::interpolant(grid, d, std::move(values), err), rel, cond};
}

// Portable table: header lines then one row per node (chart coordinates, values).
inline std::string term_table(const HomogeneousTerm& h, const CrossSectionGrid& grid, const std::string& label) {
  std::ostringstream os;
  os << "# term " << label << "\n";
  os << "degree " << fmt::format("{:.17g}", h.degree()) << "\n";
  os << "kind " << to_string(h.kind()) << "\n";
  os << "error_bound " << fmt::format("{:.6e}", h.error_bound()) << "\n";
  os << "in_dim " << h.in_dim() << "\nout_dim " << h.out_dim() << "\n";
  os << "nodes " << grid.node_count() << "\n";
  Mat values = node_values(h, grid);
  for (int k = 0; k < grid.node_count(); ++k) {
    const Vec& u = grid.nodes()[k];
    std::vector<double> theta;
    if (grid.domain().n() == 1) theta.push_back(u(0) > 0 ? 1.0 : -1.0);
    else theta = grid.domain().chart_coords(u);
    std::string row;
    for (double t : theta) row += fmt::format("{:.17g} ", t);
    for (Eigen::Index c = 0; c < values.rows(); ++c) row += fmt::format("{:.17g} ", values(c, k));
    row.pop_back();
    os << row << "\n";
  }
  return os.str();
}

struct TermTable {
  double degree = 0;
  int in_dim = 0;
  int out_dim = 0;
  double error_bound = 0;
  std::vector<std::vector<double>> chart;
  Mat values;
};

inline TermTable read_term_table(std::istream& is) {
  TermTable t;
  std::string key;
  int nodes = -1;
  for (std::string line; std::getline(is, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ls >> key;
    if (key == "degree") ls >> t.degree;
    else if (key == "kind") continue;
    else if (key == "error_bound") ls >> t.error_bound;
    else if (key == "in_dim") ls >> t.in_dim;
    else if (key == "out_dim") ls >> t.out_dim;
    else if (key == "nodes") {
      ls >> nodes;
      break;
    } else throw ParseError("bad table key '" + key + "'");
  }
  if (nodes < 0) throw ParseError("table without node count");
  const int coords = t.in_dim == 1 ? 1 : t.in_dim - 1;
  t.values.resize(t.out_dim, nodes);
  for (int k = 0; k < nodes; ++k) {
    std::vector<double> row(coords + t.out_dim);
    for (double& v : row)
      if (!(is >> v)) throw ParseError("truncated table");
    t.chart.emplace_back(row.begin(), row.begin() + coords);
    for (int c = 0; c < t.out_dim; ++c) t.values(c, k) = row[coords + c];
  }
  return t;
}

}  // namespace pmhom
