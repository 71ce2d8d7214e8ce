#pragma once

// Curvature pipeline: Christoffel symbols, Riemann, Ricci, scalar curvature,
// trace-free Ricci, Weyl, covariant derivatives of arbitrary tensor fields,
// the Plebanski tensor and the conformally-flat Bianchi residual.
//
// Conventions: R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb}
//                          + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb},
// Ricci R_{bd} = R^a_{bad}, and cov_deriv stores the derivative slot FIRST:
// (nabla T)_{c s1...sr} = nabla_c T_{s1...sr}.

#include "kundt/expr.hpp"
#include "kundt/metric.hpp"
#include "kundt/tensor.hpp"
#include "kundt/tensor_field.hpp"

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

namespace kundt {

namespace detail {

// Symbolic determinant via Laplace expansion, memoized on the column mask.
inline Expr sym_det(const std::vector<Expr>& m, int n) {
  std::map<unsigned, Expr> memo;
  auto rec = [&](auto&& self, unsigned colmask) -> Expr {
    int cols = __builtin_popcount(colmask);
    if (cols == 0) return one_expr();
    auto it = memo.find(colmask);
    if (it != memo.end()) return it->second;
    int row = n - cols;
    std::vector<Expr> terms;
    int sign = 1;
    for (int c = 0; c < n; ++c) {
      if (!(colmask & (1u << c))) continue;
      const Expr& entry = m[row * n + c];
      if (!is_zero(entry)) {
        Expr sub = self(self, colmask & ~(1u << c));
        Expr t = mul(entry, sub);
        terms.push_back(sign > 0 ? t : neg(t));
      }
      sign = -sign;
    }
    Expr r = add(std::move(terms));
    memo.emplace(colmask, r);
    return r;
  };
  return rec(rec, (1u << n) - 1u);
}

inline Expr sym_minor(const std::vector<Expr>& m, int n, int drop_row, int drop_col) {
  std::vector<Expr> sub;
  sub.reserve((n - 1) * (n - 1));
  for (int i = 0; i < n; ++i) {
    if (i == drop_row) continue;
    for (int j = 0; j < n; ++j) {
      if (j == drop_col) continue;
      sub.push_back(m[i * n + j]);
    }
  }
  return sym_det(sub, n - 1);
}

}  // namespace detail

// Symbolic inverse of a symmetric Expr matrix (adjugate over determinant).
inline TensorFieldExpr symbolic_inverse_metric(const MetricSpec& spec) {
  const int n = spec.dim();
  std::vector<Expr> m(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i * n + j] = spec.at(i, j);
  Expr det = detail::sym_det(m, n);
  Expr invdet = inverse(det);
  TensorFieldExpr ginv(n, {Variance::Up, Variance::Up});
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Expr cof = detail::sym_minor(m, n, i, j);
      if ((i + j) % 2 != 0) cof = neg(cof);
      Expr e = mul(cof, invdet);
      ginv.set({i, j}, e);
      ginv.set({j, i}, e);
    }
  return ginv;
}

class CurvatureBundle {
 public:
  explicit CurvatureBundle(MetricSpec spec) : spec_(std::move(spec)) {}

  const MetricSpec& metric() const { return spec_; }
  int dim() const { return spec_.dim(); }

  const TensorFieldExpr& g() const {
    return lazy(g_, [this] {
      const int n = spec_.dim();
      TensorFieldExpr f(n, {Variance::Down, Variance::Down});
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) f.set({i, j}, spec_.at(i, j));
      return f;
    });
  }

  const TensorFieldExpr& ginv() const {
    return lazy(ginv_, [this] { return symbolic_inverse_metric(spec_); });
  }

  // Gamma^a_{bc}, slots (up, down, down), symmetric in (b,c).
  const TensorFieldExpr& christoffel() const {
    return lazy(christoffel_, [this] {
      const int n = spec_.dim();
      const TensorFieldExpr& gi = ginv();
      DiffCache cache;
      // dg[d][b][c] = d_d g_{bc}
      std::vector<Expr> dg(static_cast<std::size_t>(n) * n * n);
      for (int d = 0; d < n; ++d)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            dg[(static_cast<std::size_t>(d) * n + b) * n + c] = diff(spec_.at(b, c), d, cache);
      auto dgat = [&](int d, int b, int c) -> const Expr& {
        return dg[(static_cast<std::size_t>(d) * n + b) * n + c];
      };
      TensorFieldExpr gamma(n, {Variance::Up, Variance::Down, Variance::Down});
      Expr half = constant(Rational(1, 2));
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = b; c < n; ++c) {
            std::vector<Expr> terms;
            for (int d = 0; d < n; ++d) {
              const Expr& gad = gi.at({a, d});
              if (is_zero(gad)) continue;
              Expr inner = add({dgat(b, d, c), dgat(c, d, b), neg(dgat(d, b, c))});
              if (is_zero(inner)) continue;
              terms.push_back(mul(gad, inner));
            }
            Expr e = mul(half, add(std::move(terms)));
            gamma.set({a, b, c}, e);
            gamma.set({a, c, b}, e);
          }
      return gamma;
    });
  }

  // R^a_{bcd}, slots (up, down, down, down).
  const TensorFieldExpr& riemann_up() const {
    return lazy(riemann_up_, [this] {
      const int n = spec_.dim();
      const TensorFieldExpr& ga = christoffel();
      DiffCache cache;
      TensorFieldExpr rm(n, {Variance::Up, Variance::Down, Variance::Down, Variance::Down});
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            for (int d = c + 1; d < n; ++d) {
              std::vector<Expr> terms;
              terms.push_back(diff(ga.at({a, d, b}), c, cache));
              terms.push_back(neg(diff(ga.at({a, c, b}), d, cache)));
              for (int e = 0; e < n; ++e) {
                terms.push_back(mul(ga.at({a, c, e}), ga.at({e, d, b})));
                terms.push_back(neg(mul(ga.at({a, d, e}), ga.at({e, c, b}))));
              }
              Expr v = add(std::move(terms));
              rm.set({a, b, c, d}, v);
              rm.set({a, b, d, c}, neg(v));
            }
      return rm;
    });
  }

  // R_{abcd}, all slots down.
  const TensorFieldExpr& riemann() const {
    return lazy(riemann_, [this] {
      TensorFieldExpr rm = field_raise_lower(riemann_up(), 0, g());
      check_cap(rm, "Riemann");
      return rm;
    });
  }

  const TensorFieldExpr& ricci() const {
    return lazy(ricci_, [this] { return field_contract(riemann_up(), 0, 2); });
  }

  const TensorFieldExpr& ricci_scalar() const {
    return lazy(rscalar_, [this] {
      const TensorFieldExpr& ric = ricci();
      const TensorFieldExpr& gi = ginv();
      std::vector<Expr> terms;
      for (int b = 0; b < dim(); ++b)
        for (int d = 0; d < dim(); ++d) {
          Expr t = mul(gi.at({b, d}), ric.at({b, d}));
          if (!is_zero(t)) terms.push_back(t);
        }
      return TensorFieldExpr::scalar(dim(), add(std::move(terms)));
    });
  }

  // S_{ab} = R_{ab} - (R/n) g_{ab}
  const TensorFieldExpr& tracefree_ricci() const {
    return lazy(s_, [this] {
      Expr rn = mul(constant(Rational(1, dim())), ricci_scalar().at({}));
      return field_sub(ricci(), field_scale(rn, g()));
    });
  }

  // C_{abcd}; identically zero in dimension 3.
  const TensorFieldExpr& weyl() const {
    return lazy(weyl_, [this] {
      const int n = dim();
      if (n == 3)
        return TensorFieldExpr(
            n, {Variance::Down, Variance::Down, Variance::Down, Variance::Down});
      const TensorFieldExpr& rm = riemann();
      const TensorFieldExpr& ric = ricci();
      const TensorFieldExpr& gg = g();
      Expr rs = ricci_scalar().at({});
      Expr c1 = constant(Rational(1, n - 2));
      Expr c2 = mul(constant(Rational(1, static_cast<long long>(n - 1) * (n - 2))), rs);
      TensorFieldExpr out(n, {Variance::Down, Variance::Down, Variance::Down, Variance::Down});
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d) {
              Expr ricterm = add({mul(gg.at({a, c}), ric.at({b, d})),
                                  neg(mul(gg.at({a, d}), ric.at({b, c}))),
                                  neg(mul(gg.at({b, c}), ric.at({a, d}))),
                                  mul(gg.at({b, d}), ric.at({a, c}))});
              Expr gterm = sub(mul(gg.at({a, c}), gg.at({b, d})), mul(gg.at({a, d}), gg.at({b, c})));
              out.set({a, b, c, d}, add({rm.at({a, b, c, d}), neg(mul(c1, ricterm)), mul(c2, gterm)}));
            }
      check_cap(out, "Weyl");
      return out;
    });
  }

  // Coordinate covariant derivative; the new (down) slot comes FIRST.
  TensorFieldExpr cov_deriv(const TensorFieldExpr& t) const {
    const int n = dim();
    const int r = t.rank();
    if (r + 1 > 7) throw NodeCapError("covariant derivative rank ceiling (7) exceeded");
    const TensorFieldExpr& ga = christoffel();
    DiffCache cache;
    std::vector<Variance> var;
    var.push_back(Variance::Down);
    var.insert(var.end(), t.variance().begin(), t.variance().end());
    std::vector<int> idx(r), src(r);
    const std::size_t count = t.components().size();
    std::vector<Expr> comp(count * n);
    for (std::size_t f = 0; f < count; ++f) {
      std::size_t rem = f;
      for (int s = r - 1; s >= 0; --s) {
        idx[s] = static_cast<int>(rem % n);
        rem /= n;
      }
      for (int c = 0; c < n; ++c) {
        std::vector<Expr> terms;
        Expr dpart = diff(t[idx], c, cache);
        if (!is_zero(dpart)) terms.push_back(dpart);
        for (int i = 0; i < r; ++i) {
          src = idx;
          for (int e = 0; e < n; ++e) {
            src[i] = e;
            if (t.variance(i) == Variance::Up) {
              Expr gamma = ga.at({idx[i], c, e});
              if (is_zero(gamma)) continue;
              Expr val = t[src];
              if (is_zero(val)) continue;
              terms.push_back(mul(gamma, val));
            } else {
              Expr gamma = ga.at({e, c, idx[i]});
              if (is_zero(gamma)) continue;
              Expr val = t[src];
              if (is_zero(val)) continue;
              terms.push_back(neg(mul(gamma, val)));
            }
          }
        }
        comp[static_cast<std::size_t>(c) * count + f] = add(std::move(terms));
      }
    }
    TensorFieldExpr result(n, std::move(var), std::move(comp));
    check_cap(result, "covariant derivative");
    return result;
  }

  // nabla^m Rm for 0 <= m <= 3 (rank 4+m, all down).
  const TensorFieldExpr& nabla_rm(int m) const {
    if (m < 0 || m > 3) throw NodeCapError("nabla^m Rm supported only for m <= 3");
    return lazy(nabla_rm_[m], [this, m]() -> TensorFieldExpr {
      if (m == 0) return riemann();
      return cov_deriv(nabla_rm(m - 1));
    });
  }

  const TensorFieldExpr& nabla_s(int m) const {
    if (m < 0 || m > 3) throw NodeCapError("nabla^m S supported only for m <= 3");
    return lazy(nabla_s_[m], [this, m]() -> TensorFieldExpr {
      if (m == 0) return tracefree_ricci();
      return cov_deriv(nabla_s(m - 1));
    });
  }

  const TensorFieldExpr& nabla_weyl(int m) const {
    if (m < 0 || m > 3) throw NodeCapError("nabla^m C supported only for m <= 3");
    return lazy(nabla_weyl_[m], [this, m]() -> TensorFieldExpr {
      if (m == 0) return weyl();
      return cov_deriv(nabla_weyl(m - 1));
    });
  }

  MetricAtPoint metric_at(const Point& p) const { return metric_at_point(spec_, p); }

 private:
  template <typename F>
  const TensorFieldExpr& lazy(std::optional<TensorFieldExpr>& slot, F&& build) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (!slot) slot.emplace(build());
    return *slot;
  }

  static void check_cap(const TensorFieldExpr& f, const char* what) {
    std::size_t n = f.node_count();
    if (n > kExprNodeCap)
      throw NodeCapError(std::string(what) + " exceeds the expression node cap (" +
                         std::to_string(n) + " nodes)");
  }

  MetricSpec spec_;
  mutable std::recursive_mutex mu_;
  mutable std::optional<TensorFieldExpr> g_, ginv_, christoffel_, riemann_up_, riemann_, ricci_,
      rscalar_, s_, weyl_;
  mutable std::array<std::optional<TensorFieldExpr>, 4> nabla_rm_, nabla_s_, nabla_weyl_;
};

// Plebanski tensor of a symmetric trace-free S at a point (dimension 4):
//   P^{ab}_{cd} = S^[a_[c S^b]_d] + delta^[a_[c S_d]e S^b]e
//                 - (1/6) delta^[a_[c delta^b]_d] S^ef S_ef,
// returned with all indices down.
inline TensorValue plebanski(const TensorValue& s, const MetricAtPoint& m) {
  if (s.dim() != 4) throw TensorError("plebanski: dimension must be 4");
  if (s.rank() != 2) throw TensorError("plebanski: rank-2 tensor expected");
  TensorValue sd = with_all_down(s, m);
  double scale = std::max(sd.norm_inf(), 1e-300);
  TensorValue su = raise_lower(sd, 0, m);  // S^a_b
  double trace = 0.0, asym = 0.0;
  for (int a = 0; a < 4; ++a) {
    trace += su.at({a, a});
    for (int b = 0; b < 4; ++b) asym = std::max(asym, std::abs(sd.at({a, b}) - sd.at({b, a})));
  }
  if (std::abs(trace) / scale > 1e-9 || asym / scale > 1e-9)
    throw TensorError("plebanski: input must be symmetric and trace-free");

  TensorValue s2(4, {Variance::Down, Variance::Down});  // S_ae S_b{}^e
  TensorValue sup = with_all_up(sd, m);
  double s2scalar = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double v = 0.0;
      for (int e = 0; e < 4; ++e)
        for (int f = 0; f < 4; ++f) v += sd.at({a, e}) * m.ginv.at({e, f}) * sd.at({b, f});
      s2.at({a, b}) = v;
      s2scalar += sd.at({a, b}) * sup.at({a, b});
    }

  auto core = [&](auto&& entry) {
    TensorValue t(4, {Variance::Down, Variance::Down, Variance::Down, Variance::Down});
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c)
          for (int d = 0; d < 4; ++d) t.at({a, b, c, d}) = entry(a, b, c, d);
    return antisymmetrize(antisymmetrize(t, {0, 1}), {2, 3});
  };

  TensorValue t1 = core([&](int a, int b, int c, int d) { return sd.at({a, c}) * sd.at({b, d}); });
  TensorValue t2 =
      core([&](int a, int b, int c, int d) { return m.g.at({a, c}) * s2.at({d, b}); });
  TensorValue t3 =
      core([&](int a, int b, int c, int d) { return m.g.at({a, c}) * m.g.at({b, d}); });
  TensorValue p = t1;
  p += t2;
  p -= (s2scalar / 6.0) * t3;
  return p;
}

// Residual of nabla_[a S_b]c + (1/12) nabla_[a R g_b]c (dimension 4).
inline TensorValue bianchi_cf_residual(const CurvatureBundle& bundle, const Point& p) {
  if (bundle.dim() != 4) throw TensorError("bianchi_cf_residual: dimension must be 4");
  TensorValue ds = bundle.cov_deriv(bundle.tracefree_ricci()).eval(p);
  TensorValue dr = bundle.cov_deriv(bundle.ricci_scalar()).eval(p);
  TensorValue g = bundle.g().eval(p);
  TensorValue term2 = tensor_product(dr, g);  // slots (a, b, c)
  TensorValue total = antisymmetrize(ds, {0, 1});
  total += (1.0 / 12.0) * antisymmetrize(term2, {0, 1});
  return total;
}

}  // namespace kundt
