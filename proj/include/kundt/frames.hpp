#pragma once

// Null frames (k, l, m_2, ..., m_{n-1}): deterministic completion from a null
// vector, frame transformations (boost, spin, null rotation), frame
// components of tensors, rigid frame fields and their connection
// coefficients, and the 4D complex frame.

#include "kundt/geometry.hpp"
#include "kundt/metric.hpp"
#include "kundt/tensor.hpp"
#include "kundt/tensor_field.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>

namespace kundt {

struct FrameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Frame labels: 0 <-> k, 1 <-> l, j in {2,...,n-1} <-> m_j.
struct NullFrame {
  int dim = 0;
  std::vector<TensorValue> e;  // rank-1 up vectors
  MetricAtPoint m;

  const TensorValue& k() const { return e[0]; }
  const TensorValue& l() const { return e[1]; }
  const TensorValue& spatial(int j) const { return e[j]; }  // j >= 2

  double inner(int a, int b) const { return m.inner(e[a], e[b]); }

  // Residual of the null-frame normalization conditions.
  double normalization_residual() const {
    double r = 0.0;
    for (int a = 0; a < dim; ++a)
      for (int b = a; b < dim; ++b) {
        double expected = 0.0;
        if ((a == 0 && b == 1)) expected = 1.0;
        if (a == b && a >= 2) expected = 1.0;
        r = std::max(r, std::abs(inner(a, b) - expected));
      }
    return r;
  }

  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double v) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    };
    for (const auto& vec : e)
      for (double c : vec.components()) mix(c);
    return h;
  }
};

namespace detail {

inline double euclid2(const TensorValue& v) {
  double s = 0.0;
  for (double c : v.components()) s += c * c;
  return s;
}

// Deterministic timelike reference direction at a point.
inline TensorValue canonical_timelike(const MetricAtPoint& m) {
  const int n = m.dim();
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = m.g.at({i, j});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  int neg = -1;
  for (int i = 0; i < n; ++i)
    if (es.eigenvalues()[i] < 0) neg = i;
  if (neg < 0) throw FrameError("metric has no timelike direction");
  TensorValue t(n, {Variance::Up});
  for (int i = 0; i < n; ++i) t.at({i}) = es.eigenvectors()(i, neg);
  for (int i = 0; i < n; ++i) {
    if (std::abs(t.at({i})) > 1e-9) {
      if (t.at({i}) < 0)
        for (double& c : t.components()) c = -c;
      break;
    }
  }
  return t;
}

}  // namespace detail

// Deterministic frame completion. Reference timelike t (the seed if given,
// chart-canonical otherwise); l = t/a - (g(t,t)/(2 a^2)) k with a = g(k,t);
// remaining chart basis vectors Gram-Schmidt'ed against {k,l} in fixed index
// order, near-degenerate candidates dropped at 1e-8 relative.
inline NullFrame complete_null_frame(const TensorValue& k, const MetricAtPoint& m,
                                     const std::optional<TensorValue>& seed = std::nullopt) {
  const int n = m.dim();
  if (k.rank() != 1 || k.dim() != n) throw FrameError("k must be a rank-1 vector");
  double kk = m.inner(k, k);
  double kscale = detail::euclid2(k);
  if (kscale == 0.0) throw FrameError("k is zero");
  if (std::abs(kk) > 1e-10 * std::max(1.0, kscale))
    throw FrameError("k is not null (g(k,k) = " + std::to_string(kk) + ")");

  TensorValue t = seed ? *seed : detail::canonical_timelike(m);
  double a = m.inner(k, t);
  double tt = m.inner(t, t);
  if (seed && (std::abs(a) < 1e-10 * std::sqrt(std::max(1.0, kscale * detail::euclid2(t))) || tt >= 0.0))
    throw FrameError("seed vector is degenerate with k or not timelike");
  if (std::abs(a) < 1e-14) throw FrameError("reference direction degenerate with k");

  TensorValue l = t;
  l *= 1.0 / a;
  TensorValue kterm = k;
  kterm *= tt / (2.0 * a * a);
  l -= kterm;

  NullFrame f;
  f.dim = n;
  f.m = m;
  f.e.push_back(k);
  f.e.push_back(l);
  double gscale = m.g.norm_inf();
  for (int b = 0; b < n && static_cast<int>(f.e.size()) < n; ++b) {
    TensorValue v(n, {Variance::Up});
    v.at({b}) = 1.0;
    TensorValue adj = k;
    adj *= m.inner(v, l);
    v -= adj;
    adj = l;
    adj *= m.inner(v, k);
    v -= adj;
    for (std::size_t j = 2; j < f.e.size(); ++j) {
      adj = f.e[j];
      adj *= m.inner(v, f.e[j]);
      v -= adj;
    }
    double vv = m.inner(v, v);
    if (vv <= 1e-16 * std::max(1.0, detail::euclid2(v) * gscale)) continue;
    v *= 1.0 / std::sqrt(vv);
    f.e.push_back(v);
  }
  if (static_cast<int>(f.e.size()) != n)
    throw FrameError("frame completion failed: not enough independent spatial directions");
  return f;
}

// k -> k, l -> l - (1/2) z.z k + z^j m_j, m_j -> m_j - z_j k.
inline NullFrame null_rotation(const NullFrame& f, std::span<const double> z) {
  if (static_cast<int>(z.size()) != f.dim - 2) throw FrameError("null_rotation: wrong z size");
  NullFrame out = f;
  double z2 = 0.0;
  for (double zi : z) z2 += zi * zi;
  TensorValue l = f.e[1];
  TensorValue kterm = f.e[0];
  kterm *= 0.5 * z2;
  l -= kterm;
  for (int j = 2; j < f.dim; ++j) {
    TensorValue mj = f.e[j];
    mj *= z[j - 2];
    l += mj;
  }
  out.e[1] = l;
  for (int j = 2; j < f.dim; ++j) {
    TensorValue mj = f.e[j];
    TensorValue kj = f.e[0];
    kj *= z[j - 2];
    mj -= kj;
    out.e[j] = mj;
  }
  return out;
}

inline NullFrame null_rotation(const NullFrame& f, std::initializer_list<double> z) {
  return null_rotation(f, std::span<const double>(z.begin(), z.size()));
}

inline NullFrame boost(const NullFrame& f, double lambda) {
  if (lambda == 0.0) throw FrameError("boost: lambda must be non-zero");
  NullFrame out = f;
  out.e[0] *= lambda;
  out.e[1] *= 1.0 / lambda;
  return out;
}

inline NullFrame spin(const NullFrame& f, const Eigen::MatrixXd& r) {
  const int s = f.dim - 2;
  if (r.rows() != s || r.cols() != s) throw FrameError("spin: wrong rotation size");
  if ((r * r.transpose() - Eigen::MatrixXd::Identity(s, s)).cwiseAbs().maxCoeff() > 1e-10)
    throw FrameError("spin: matrix is not orthogonal");
  NullFrame out = f;
  for (int i = 0; i < s; ++i) {
    TensorValue v(f.dim, {Variance::Up});
    for (int j = 0; j < s; ++j) {
      TensorValue mj = f.e[2 + j];
      mj *= r(i, j);
      v += mj;
    }
    out.e[2 + i] = v;
  }
  return out;
}

// Frame components T_alpha = T(e_{a1},...,e_{ar}) of the all-down form of T.
inline TensorValue frame_components(const TensorValue& t, const NullFrame& f) {
  if (t.dim() != f.dim) throw FrameError("frame_components: dimension mismatch");
  TensorValue down = with_all_down(t, f.m);
  const int n = f.dim;
  const int r = t.rank();
  // transform slot by slot: T'_{...alpha...} = sum_a E[alpha][a] T_{...a...}
  TensorValue cur = down;
  for (int slot = 0; slot < r; ++slot) {
    TensorValue next(n, cur.variance());
    std::vector<int> idx(r), src(r);
    for (std::size_t fidx = 0; fidx < next.components().size(); ++fidx) {
      next.unflatten(fidx, idx);
      src = idx;
      double sum = 0.0;
      for (int a = 0; a < n; ++a) {
        src[slot] = a;
        sum += f.e[idx[slot]].at({a}) * cur[src];
      }
      next.components()[fidx] = sum;
    }
    cur = next;
  }
  return cur;
}

// Inverse transform: coordinate components from frame components, using the
// dual coframe theta^0 = l_flat, theta^1 = k_flat, theta^j = m_j_flat.
inline TensorValue coordinate_components(const TensorValue& frame_comps, const NullFrame& f) {
  const int n = f.dim;
  const int r = frame_comps.rank();
  std::vector<TensorValue> theta;
  theta.push_back(raise_lower(f.e[1], 0, f.m));
  theta.push_back(raise_lower(f.e[0], 0, f.m));
  for (int j = 2; j < n; ++j) theta.push_back(raise_lower(f.e[j], 0, f.m));
  TensorValue cur = frame_comps;
  for (int slot = 0; slot < r; ++slot) {
    TensorValue next(n, cur.variance());
    std::vector<int> idx(r), src(r);
    for (std::size_t fidx = 0; fidx < next.components().size(); ++fidx) {
      next.unflatten(fidx, idx);
      src = idx;
      double sum = 0.0;
      for (int alpha = 0; alpha < n; ++alpha) {
        src[slot] = alpha;
        sum += theta[alpha].at({idx[slot]}) * cur[src];
      }
      next.components()[fidx] = sum;
    }
    cur = next;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// 4D complex frame (k, l, m, mbar), m = (e2 - i e3)/sqrt(2).

using Complex = std::complex<double>;

struct ComplexVector {
  std::vector<Complex> c;  // up components
  Complex dot(const TensorValue& lowered) const {
    Complex s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * lowered.components()[i];
    return s;
  }
};

struct ComplexFrame {
  NullFrame base;
  ComplexVector k, l, m, mbar;
};

inline ComplexFrame np_frame(const NullFrame& f) {
  if (f.dim != 4) throw FrameError("np_frame: dimension must be 4");
  ComplexFrame cf;
  cf.base = f;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  cf.k.c.resize(4);
  cf.l.c.resize(4);
  cf.m.c.resize(4);
  cf.mbar.c.resize(4);
  for (int a = 0; a < 4; ++a) {
    cf.k.c[a] = f.e[0].at({a});
    cf.l.c[a] = f.e[1].at({a});
    cf.m.c[a] = inv_sqrt2 * Complex(f.e[2].at({a}), -f.e[3].at({a}));
    cf.mbar.c[a] = std::conj(cf.m.c[a]);
  }
  return cf;
}

inline Complex complex_inner(const MetricAtPoint& m, const ComplexVector& u, const ComplexVector& v) {
  Complex s = 0.0;
  const int n = m.dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += m.g.at({i, j}) * u.c[i] * v.c[j];
  return s;
}

// ---------------------------------------------------------------------------
// Rigid frame fields: the pointwise completion applied in closed form, with
// the discrete choices fixed at an anchor point.

struct FrameField {
  int dim = 0;
  std::vector<TensorFieldExpr> e;  // rank-1 up fields

  NullFrame eval(const Point& p, const MetricAtPoint& m) const {
    NullFrame f;
    f.dim = dim;
    f.m = m;
    for (const auto& field : e) f.e.push_back(field.eval(p));
    return f;
  }
};

namespace detail {

inline Expr field_inner_expr(const TensorFieldExpr& g, const TensorFieldExpr& u,
                             const TensorFieldExpr& v) {
  const int n = g.dim();
  std::vector<Expr> terms;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Expr t = mul(g.at({i, j}), u.at({i}), v.at({j}));
      if (!is_zero(t)) terms.push_back(t);
    }
  return add(std::move(terms));
}

inline TensorFieldExpr basis_field(int dim, int b) {
  TensorFieldExpr f(dim, {Variance::Up});
  f.set({b}, one_expr());
  return f;
}

// Smooth timelike reference field: a chart basis vector that is timelike at
// the anchor, or t = d_a + c d_b built on a null coordinate pair (g_bb == 0).
inline TensorFieldExpr timelike_reference_field(const CurvatureBundle& bundle, const Point& anchor) {
  const MetricSpec& spec = bundle.metric();
  const int n = spec.dim();
  MetricAtPoint m = bundle.metric_at(anchor);
  for (int b = 0; b < n; ++b)
    if (m.g.at({b, b}) < -0.05 * std::max(1.0, m.g.norm_inf())) return basis_field(n, b);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b || !is_zero(spec.at(b, b))) continue;
      if (std::abs(m.g.at({a, b})) < 1e-6) continue;
      Expr c = neg(mul(add(spec.at(a, a), one_expr()),
                       inverse(mul(constant(2), spec.at(a, b)))));
      TensorFieldExpr t(n, {Variance::Up});
      t.set({a}, one_expr());
      t.set({b}, c);
      return t;
    }
  throw FrameError("no smooth timelike reference field found for this chart");
}

}  // namespace detail

// Closed-form frame completion around a null vector field. If m2_fixed is
// given it is used (verbatim) as the first spatial vector; it must be unit
// and orthogonal to k on the chart.
inline FrameField complete_null_frame_field(const CurvatureBundle& bundle,
                                            const TensorFieldExpr& k_field, const Point& anchor,
                                            const std::optional<TensorFieldExpr>& m2_fixed =
                                                std::nullopt) {
  const int n = bundle.dim();
  const TensorFieldExpr& g = bundle.g();
  TensorFieldExpr t = detail::timelike_reference_field(bundle, anchor);
  Expr a = detail::field_inner_expr(g, k_field, t);
  Expr tt = detail::field_inner_expr(g, t, t);
  // l = t/a - (tt/(2 a^2)) k
  TensorFieldExpr l = field_sub(field_scale(inverse(a), t),
                                field_scale(mul(tt, inverse(mul(constant(2), a, a))), k_field));

  FrameField f;
  f.dim = n;
  f.e.push_back(k_field);
  f.e.push_back(l);

  auto orthogonalize = [&](TensorFieldExpr v) {
    v = field_sub(v, field_scale(detail::field_inner_expr(g, v, l), k_field));
    v = field_sub(v, field_scale(detail::field_inner_expr(g, v, k_field), f.e[1]));
    for (std::size_t j = 2; j < f.e.size(); ++j)
      v = field_sub(v, field_scale(detail::field_inner_expr(g, v, f.e[j]), f.e[j]));
    return v;
  };

  MetricAtPoint m_anchor = bundle.metric_at(anchor);
  if (m2_fixed) {
    f.e.push_back(*m2_fixed);
    TensorValue m2p = m2_fixed->eval(anchor);
    if (std::abs(m_anchor.inner(m2p, m2p) - 1.0) > 1e-8)
      throw FrameError("fixed m2 field is not unit at the anchor point");
    TensorValue kp = k_field.eval(anchor);
    if (std::abs(m_anchor.inner(m2p, kp)) > 1e-8 * std::max(1.0, detail::euclid2(kp)))
      throw FrameError("fixed m2 field is not orthogonal to k at the anchor point");
  }
  for (int b = 0; b < n && static_cast<int>(f.e.size()) < n; ++b) {
    TensorFieldExpr v = orthogonalize(detail::basis_field(n, b));
    Expr vv = detail::field_inner_expr(g, v, v);
    double vv_anchor = eval(vv, anchor.x);
    if (vv_anchor <= 1e-12) continue;
    f.e.push_back(field_scale(inverse(sqrt_(vv)), v));
  }
  if (static_cast<int>(f.e.size()) != n)
    throw FrameError("frame field completion failed: not enough spatial directions");
  return f;
}

// Null rotation of a frame field with an Expr parameter in the m2 direction:
// k -> k, l -> l - (1/2) z^2 k + z m2, m2 -> m2 - z k, others fixed.
inline FrameField null_rotation_field(const FrameField& f, const Expr& z) {
  FrameField out = f;
  Expr half_z2 = mul(constant(Rational(1, 2)), z, z);
  out.e[1] = field_add(field_sub(f.e[1], field_scale(half_z2, f.e[0])), field_scale(z, f.e[2]));
  out.e[2] = field_sub(f.e[2], field_scale(z, f.e[0]));
  return out;
}

// Connection coefficients Gamma_{alpha beta gamma} = g(e_alpha, nabla_gamma e_beta)
// of a rigid frame field, evaluated at p. Rigidity is checked via the
// antisymmetry Gamma_{alpha beta gamma} = -Gamma_{beta alpha gamma}.
inline TensorValue frame_connection(const FrameField& ff, const CurvatureBundle& bundle,
                                    const Point& p, double tol = 1e-9) {
  const int n = ff.dim;
  MetricAtPoint m = bundle.metric_at(p);
  NullFrame f = ff.eval(p, m);
  if (f.normalization_residual() > 1e-8)
    throw FrameError("frame field is not normalized at evaluation point");
  std::vector<TensorValue> de;  // (deriv c, comp^b) per frame vector
  for (int beta = 0; beta < n; ++beta) de.push_back(bundle.cov_deriv(ff.e[beta]).eval(p));
  TensorValue gamma(n, {Variance::Down, Variance::Down, Variance::Down});
  for (int alpha = 0; alpha < n; ++alpha)
    for (int beta = 0; beta < n; ++beta)
      for (int gma = 0; gma < n; ++gma) {
        double sum = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
              sum += f.e[alpha].at({a}) * m.g.at({a, b}) * de[beta].at({c, b}) * f.e[gma].at({c});
        gamma.at({alpha, beta, gma}) = sum;
      }
  double scale = std::max(1.0, gamma.norm_inf());
  for (int alpha = 0; alpha < n; ++alpha)
    for (int beta = 0; beta < n; ++beta)
      for (int gma = 0; gma < n; ++gma)
        if (std::abs(gamma.at({alpha, beta, gma}) + gamma.at({beta, alpha, gma})) > tol * scale)
          throw FrameError("frame field is not rigid within tolerance");
  return gamma;
}

}  // namespace kundt
