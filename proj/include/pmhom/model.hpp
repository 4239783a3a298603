#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "pmhom/domain.hpp"
#include "pmhom/error.hpp"
#include "pmhom/poly.hpp"

namespace pmhom {

enum class Block { x, y };

inline std::string to_string(Block b) { return b == Block::x ? "x" : "y"; }

// Named black-box remainders F^{>r}.  Each returns a scalar added to the first
// component of its block and is only valid on a ball of radius `valid_radius`.
struct Remainder {
  std::string name;
  double valid_radius;
  std::function<double(const Vec& z, int order)> eval;
};

namespace detail {

// Tail of a power series sum_k c_k s^k past `order`, summed directly.
template <class Coeff>
double series_tail(double s, int order, Coeff coeff) {
  double acc = 0.0;
  double pw = std::pow(s, order + 1);
  for (int k = order + 1; k < order + 60; ++k) {
    double term = coeff(k) * pw;
    acc += term;
    if (std::abs(term) < 1e-18 * std::abs(acc) && k > order + 3) break;
    pw *= s;
  }
  return acc;
}

inline double inv_factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f /= i;
  return f;
}

}  // namespace detail

inline const std::vector<Remainder>& remainder_registry() {
  static const std::vector<Remainder> registry = {
      {"sin-tail", 1.0,
       [](const Vec& z, int order) {
         return detail::series_tail(z(0), order, [](int k) {
           if (k % 2 == 0) return 0.0;
           return ((k / 2) % 2 == 0 ? 1.0 : -1.0) * detail::inv_factorial(k);
         });
       }},
      {"exp-tail", 1.0,
       [](const Vec& z, int order) {
         return detail::series_tail(z(0), order, [](int k) { return detail::inv_factorial(k); });
       }},
  };
  return registry;
}

inline const Remainder& find_remainder(const std::string& name) {
  for (const auto& r : remainder_registry())
    if (r.name == name) return r;
  throw ValidationError("unknown remainder '" + name + "'");
}

// F(x, y) = (x + p + f, y + q + g) with f, g stored by degree.
struct MapSpec {
  int n = 0;
  int m = 0;
  int N = 2;
  int M = 2;
  int r = 2;
  SparsePolynomial p;
  SparsePolynomial q;
  std::map<int, SparsePolynomial> higher_x;
  std::map<int, SparsePolynomial> higher_y;
  std::string remainder_x;
  std::string remainder_y;

  int L() const { return std::min(M, N); }
  int arity() const { return n + m; }

  SparsePolynomial f() const { return sum_of(higher_x, n); }
  SparsePolynomial g() const { return sum_of(higher_y, m); }

  // p(x, 0) and the Jacobian blocks D_x p, D_y p, D_y q at y = 0 (row-major).
  SparsePolynomial pa() const { return p.restrict_prefix(n); }
  SparsePolynomial dxp0() const { return restrict_cols(p, 0, n); }
  SparsePolynomial dyp0() const { return restrict_cols(p, n, m); }
  SparsePolynomial dyq0() const { return restrict_cols(q, n, m); }

  void validate() const;

  bool operator==(const MapSpec&) const = default;

  // Rows of the Jacobian of `poly` restricted to columns [from, from+count), at y = 0.
  SparsePolynomial restrict_cols(const SparsePolynomial& poly, int from, int count) const {
    SparsePolynomial jac = poly.jacobian_poly();
    SparsePolynomial out(n + m, poly.codomain() * count);
    for (int r0 = 0; r0 < poly.codomain(); ++r0)
      for (int c = 0; c < count; ++c)
        for (const auto& mono : jac.component(r0 * (n + m) + from + c))
          out.add(r0 * count + c, mono.coeff, mono.exps);
    return out.restrict_prefix(n);
  }

 private:
  SparsePolynomial sum_of(const std::map<int, SparsePolynomial>& blocks, int codomain) const {
    SparsePolynomial s(n + m, codomain);
    for (const auto& [d, poly] : blocks) s += poly;
    return s;
  }
};

struct ForcingTerm {
  int degree = 0;
  int harmonic = 0;  // 0: time-independent
  bool sine = false;
  SparsePolynomial poly;
  bool operator==(const ForcingTerm&) const = default;
};

// T-periodic field X = (p + f(x,y,t), q + g(x,y,t)); f, g truncated Fourier series in t.
struct FieldSpec {
  MapSpec base;  // p, q, n, m, N, M, r; higher_x/higher_y unused
  double T = 1.0;
  std::vector<ForcingTerm> forcing_x;
  std::vector<ForcingTerm> forcing_y;

  double omega() const { return 2.0 * std::numbers::pi / T; }

  int max_harmonic() const {
    int k = 0;
    for (const auto* list : {&forcing_x, &forcing_y})
      for (const auto& f : *list) k = std::max(k, f.harmonic);
    return k;
  }

  Vec forcing(Block b, const Vec& z, double t) const {
    const auto& list = b == Block::x ? forcing_x : forcing_y;
    Vec out = Vec::Zero(b == Block::x ? base.n : base.m);
    for (const auto& f : list) {
      double phase = f.harmonic == 0 ? 1.0
                     : f.sine ? std::sin(f.harmonic * omega() * t)
                              : std::cos(f.harmonic * omega() * t);
      out += phase * f.poly(z);
    }
    return out;
  }

  void validate() const;

  bool operator==(const FieldSpec&) const = default;
};

inline void validate_graded_block(const SparsePolynomial& poly, int arity, int codomain, int degree,
                                  const std::string& name) {
  if (poly.arity() != arity || poly.codomain() != codomain)
    throw ValidationError(name + " has wrong shape");
  if (poly.is_zero()) return;
  auto d = poly.homogeneous_degree();
  if (!d || *d != degree)
    throw ValidationError(name + " not homogeneous of degree " + std::to_string(degree));
}

inline bool vanishes_on_y_zero(const SparsePolynomial& q, int n) {
  for (int c = 0; c < q.codomain(); ++c)
    for (const auto& mono : q.component(c)) {
      int ydeg = 0;
      for (std::size_t i = n; i < mono.exps.size(); ++i) ydeg += mono.exps[i];
      if (ydeg == 0) return false;
    }
  return true;
}

inline void MapSpec::validate() const {
  if (n < 1 || m < 1) throw ValidationError("n and m must be positive");
  if (N < 2) throw ValidationError("N must be at least 2");
  if (M < 2) throw ValidationError("M must be at least 2");
  if (r < N) throw ValidationError("r must be at least N");
  validate_graded_block(p, n + m, n, N, "p");
  validate_graded_block(q, n + m, m, M, "q");
  if (!vanishes_on_y_zero(q, n)) throw ValidationError("q(x,0) does not vanish");
  for (const auto& [d, poly] : higher_x) {
    if (d <= N || d > r) throw ValidationError("f degree " + std::to_string(d) + " outside (N, r]");
    validate_graded_block(poly, n + m, n, d, "f degree " + std::to_string(d));
  }
  for (const auto& [d, poly] : higher_y) {
    if (d <= M || d > r) throw ValidationError("g degree " + std::to_string(d) + " outside (M, r]");
    validate_graded_block(poly, n + m, m, d, "g degree " + std::to_string(d));
  }
  if (!remainder_x.empty()) find_remainder(remainder_x);
  if (!remainder_y.empty()) find_remainder(remainder_y);
}

inline void FieldSpec::validate() const {
  if (!(T > 0)) throw ValidationError("period T must be positive");
  MapSpec autonomous = base;
  autonomous.higher_x.clear();
  autonomous.higher_y.clear();
  autonomous.validate();
  const int a = base.n + base.m;
  for (const auto& f : forcing_x) {
    if (f.degree <= base.N) throw ValidationError("x forcing degree must exceed N");
    validate_graded_block(f.poly, a, base.n, f.degree, "x forcing");
    if (f.harmonic < 0) throw ValidationError("negative harmonic");
  }
  for (const auto& f : forcing_y) {
    if (f.degree <= base.M) throw ValidationError("y forcing degree must exceed M");
    validate_graded_block(f.poly, a, base.m, f.degree, "y forcing");
    if (f.harmonic < 0) throw ValidationError("negative harmonic");
  }
}

// Nonlinear part of F (everything but the identity), split by block.
struct MapNonlinear {
  Vec x;
  Vec y;
};

inline MapNonlinear map_nonlinear(const MapSpec& F, const Vec& z) {
  MapNonlinear out{F.p(z), F.q(z)};
  for (const auto& [d, poly] : F.higher_x) out.x += poly(z);
  for (const auto& [d, poly] : F.higher_y) out.y += poly(z);
  for (auto [name, target] : {std::pair{&F.remainder_x, &out.x}, std::pair{&F.remainder_y, &out.y}}) {
    if (name->empty()) continue;
    const Remainder& rem = find_remainder(*name);
    if (z.norm() > rem.valid_radius) throw OutOfDomain("remainder " + *name + " rejects point");
    (*target)(0) += rem.eval(z, F.r);
  }
  return out;
}

inline Vec evaluate_map(const MapSpec& F, const Vec& z) {
  MapNonlinear nl = map_nonlinear(F, z);
  Vec out(F.n + F.m);
  out.head(F.n) = z.head(F.n) + nl.x;
  out.tail(F.m) = z.tail(F.m) + nl.y;
  return out;
}

struct GradedPiece {
  int degree;
  Block block;
  SparsePolynomial poly;
};

// Stored homogeneous pieces, x-block then y-block, increasing degree in each.
inline std::vector<GradedPiece> homogeneous_parts(const MapSpec& F) {
  std::vector<GradedPiece> out;
  out.push_back({F.N, Block::x, F.p});
  for (const auto& [d, poly] : F.higher_x) out.push_back({d, Block::x, poly});
  out.push_back({F.M, Block::y, F.q});
  for (const auto& [d, poly] : F.higher_y) out.push_back({d, Block::y, poly});
  return out;
}

}  // namespace pmhom
