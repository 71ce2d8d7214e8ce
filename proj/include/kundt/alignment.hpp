#pragma once

// Boost weights, boost order and null alignment types relative to a null
// direction; Newman-Penrose scalars; 4D Weyl principal null directions; the
// eigenstructure of the trace-free Ricci tensor.

#include "kundt/frames.hpp"
#include "kundt/geometry.hpp"
#include "kundt/tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <map>
#include <optional>

namespace kundt {

struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bw(a1...ar) = sum_i (delta_{ai,0} - delta_{ai,1})
inline int boost_weight(std::span<const int> multi_index) {
  int bw = 0;
  for (int a : multi_index) {
    if (a == 0)
      ++bw;
    else if (a == 1)
      --bw;
  }
  return bw;
}
inline int boost_weight(std::initializer_list<int> mi) {
  return boost_weight(std::span<const int>(mi.begin(), mi.size()));
}

struct AlignmentReport {
  std::optional<int> bo;                        // nullopt <=> zero tensor
  std::vector<std::pair<int, double>> weights;  // weight -> max |component|
  std::string label;                            // zero | not-special | II-or-more-special | III | N
  double tol_abs = 1e-10;
  double tol_rel = 1e-9;
  bool sampled = false;
  bool stable = true;    // same result under a second frame completion
  bool marginal = false;  // leading component within 10x of the threshold

  bool is_zero() const { return !bo.has_value(); }
};

inline std::string alignment_label(std::optional<int> bo) {
  if (!bo) return "zero";
  if (*bo > 0) return "not-special";
  if (*bo == 0) return "II-or-more-special";
  if (*bo == -1) return "III";
  return "N";
}

namespace detail {

struct WeightScan {
  std::map<int, double> max_abs;
  double norm = 0.0;
};

inline WeightScan scan_weights(const TensorValue& frame_comps) {
  WeightScan ws;
  const int r = frame_comps.rank();
  std::vector<int> idx(r);
  for (std::size_t f = 0; f < frame_comps.components().size(); ++f) {
    frame_comps.unflatten(f, idx);
    int b = boost_weight(idx);
    double v = std::abs(frame_comps.components()[f]);
    auto [it, fresh] = ws.max_abs.emplace(b, v);
    if (!fresh) it->second = std::max(it->second, v);
    ws.norm = std::max(ws.norm, v);
  }
  return ws;
}

inline std::optional<int> bo_from_scan(const WeightScan& ws, double tol_abs, double tol_rel,
                                       bool* marginal = nullptr) {
  double threshold = tol_abs + tol_rel * ws.norm;
  if (ws.norm <= tol_abs) return std::nullopt;
  std::optional<int> bo;
  for (const auto& [b, v] : ws.max_abs)
    if (v > threshold) bo = bo ? std::max(*bo, b) : b;
  if (marginal && bo) {
    double lead = ws.max_abs.at(*bo);
    // check if any weight above bo sits just below threshold, or the leading
    // weight sits just above it
    *marginal = lead <= 10.0 * threshold;
    for (const auto& [b, v] : ws.max_abs)
      if (b > *bo && v > threshold / 10.0) *marginal = true;
  }
  return bo;
}

}  // namespace detail

// Boost order of T along the null direction generated by f.k(). The result is
// independent of the completion; this is cross-checked with a second (null
// rotated) completion of the same k.
inline AlignmentReport boost_order(const TensorValue& t, const NullFrame& f, double tol_abs = 1e-10,
                                   double tol_rel = 1e-9, bool cross_check = true) {
  AlignmentReport rep;
  rep.tol_abs = tol_abs;
  rep.tol_rel = tol_rel;
  TensorValue tf = frame_components(t, f);
  auto ws = detail::scan_weights(tf);
  rep.bo = detail::bo_from_scan(ws, tol_abs, tol_rel, &rep.marginal);
  for (const auto& [b, v] : ws.max_abs) rep.weights.emplace_back(b, v);
  if (cross_check && t.rank() > 0) {
    std::vector<double> z(f.dim - 2);
    for (int i = 0; i < f.dim - 2; ++i) z[i] = 0.37 + 0.11 * i;
    NullFrame f2 = null_rotation(f, z);
    auto ws2 = detail::scan_weights(frame_components(t, f2));
    auto bo2 = detail::bo_from_scan(ws2, tol_abs, tol_rel);
    rep.stable = (bo2 == rep.bo);
    if (!rep.stable && bo2 && (!rep.bo || *bo2 > *rep.bo)) rep.bo = bo2;
  }
  rep.label = alignment_label(rep.bo);
  return rep;
}

// Spectral decomposition T = sum_b (T)_b; parts returned in coordinate
// components, keyed by boost weight b (component weight convention:
// T_alpha carries weight +bw(alpha), so (T)_b collects bw(alpha) = b).
inline std::map<int, TensorValue> boost_decomposition(const TensorValue& t, const NullFrame& f) {
  TensorValue tf = frame_components(t, f);
  const int r = t.rank();
  std::map<int, TensorValue> parts;
  std::vector<int> idx(r);
  for (std::size_t fl = 0; fl < tf.components().size(); ++fl) {
    if (tf.components()[fl] == 0.0) continue;
    tf.unflatten(fl, idx);
    int b = boost_weight(idx);
    auto it = parts.find(b);
    if (it == parts.end()) it = parts.emplace(b, TensorValue(f.dim, tf.variance())).first;
    it->second.components()[fl] = tf.components()[fl];
  }
  std::map<int, TensorValue> out;
  for (auto& [b, part] : parts) out.emplace(b, coordinate_components(part, f));
  return out;
}

// ---------------------------------------------------------------------------
// Weyl-like symmetry residuals: pair antisymmetry, pair swap, cyclic
// identity, tracelessness. Normalized by the sup norm of W.

inline double weyl_like_residual(const TensorValue& w, const MetricAtPoint& m) {
  if (w.rank() != 4) throw AlignmentError("weyl_like_residual: rank-4 tensor expected");
  TensorValue wd = with_all_down(w, m);
  const int n = w.dim();
  double scale = std::max(wd.norm_inf(), 1e-300);
  double r = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double v = wd.at({a, b, c, d});
          r = std::max(r, std::abs(v + wd.at({b, a, c, d})));
          r = std::max(r, std::abs(v + wd.at({a, b, d, c})));
          r = std::max(r, std::abs(v - wd.at({c, d, a, b})));
          r = std::max(r, std::abs(v + wd.at({a, c, d, b}) + wd.at({a, d, b, c})));
        }
  // trace W_{abc}^b
  TensorValue up = raise_lower(wd, 1, m);
  TensorValue tr = contract(up, 1, 3);
  r = std::max(r, tr.norm_inf());
  return r / scale;
}

// ---------------------------------------------------------------------------
// Newman-Penrose scalars of a Weyl-like tensor in a 4D complex frame.

struct NPScalars {
  std::array<Complex, 5> psi{};  // Psi_0 ... Psi_4
  const Complex& operator[](int i) const { return psi[i]; }
};

inline Complex contract4(const TensorValue& w_down, const ComplexVector& v1,
                         const ComplexVector& v2, const ComplexVector& v3,
                         const ComplexVector& v4) {
  Complex s = 0.0;
  const int n = w_down.dim();
  std::vector<int> idx(4);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          idx = {a, b, c, d};
          double comp = w_down[idx];
          if (comp == 0.0) continue;
          s += comp * v1.c[a] * v2.c[b] * v3.c[c] * v4.c[d];
        }
  return s;
}

// Psi_0 = W_{abcd} k^a m^b k^c m^d        Psi_1 = W_{abcd} k^a l^b k^c m^d
// Psi_2 = W_{abcd} k^a m^b l^c mbar^d     Psi_3 = W_{abcd} l^a k^b mbar^c l^d
// Psi_4 = W_{abcd} l^a mbar^b l^c mbar^d
inline NPScalars np_scalars(const TensorValue& w, const ComplexFrame& cf, const MetricAtPoint& m,
                            double symmetry_tol = 1e-9) {
  if (w.dim() != 4) throw AlignmentError("np_scalars: dimension must be 4");
  double sym = weyl_like_residual(w, m);
  if (sym > symmetry_tol)
    throw AlignmentError("np_scalars: tensor violates Weyl-like symmetries (residual " +
                         std::to_string(sym) + ")");
  TensorValue wd = with_all_down(w, m);
  NPScalars out;
  out.psi[0] = contract4(wd, cf.k, cf.m, cf.k, cf.m);
  out.psi[1] = contract4(wd, cf.k, cf.l, cf.k, cf.m);
  out.psi[2] = contract4(wd, cf.k, cf.m, cf.l, cf.mbar);
  out.psi[3] = contract4(wd, cf.l, cf.k, cf.mbar, cf.l);
  out.psi[4] = contract4(wd, cf.l, cf.mbar, cf.l, cf.mbar);
  return out;
}

// ---------------------------------------------------------------------------
// Principal null directions of a 4D Weyl-like tensor. The rotated scalar
// Psi_0'(z) for k'(z) = k + zbar m + z mbar - |z|^2 l, m'(z) = m - z l is a
// degree-4 polynomial in z; its roots (plus a root at infinity per missing
// degree, corresponding to l) give the PNDs. Coefficients are recovered by
// interpolation at the 5th roots of unity, then validated at extra points.

struct PrincipalNullDirection {
  TensorValue direction;  // null vector, unit Euclidean norm, sign-fixed
  int multiplicity = 1;
};

namespace detail {

inline ComplexVector rotated_k(const ComplexFrame& cf, Complex z) {
  ComplexVector out;
  out.c.resize(4);
  double z2 = std::norm(z);
  for (int a = 0; a < 4; ++a)
    out.c[a] = cf.k.c[a] + std::conj(z) * cf.m.c[a] + z * cf.mbar.c[a] - z2 * cf.l.c[a];
  return out;
}

inline ComplexVector rotated_m(const ComplexFrame& cf, Complex z) {
  ComplexVector out;
  out.c.resize(4);
  for (int a = 0; a < 4; ++a) out.c[a] = cf.m.c[a] - z * cf.l.c[a];
  return out;
}

inline Complex psi0_at(const TensorValue& wd, const ComplexFrame& cf, Complex z) {
  ComplexVector k = rotated_k(cf, z);
  ComplexVector m = rotated_m(cf, z);
  return contract4(wd, k, m, k, m);
}

inline TensorValue normalize_direction(TensorValue v) {
  double n2 = 0.0;
  for (double c : v.components()) n2 += c * c;
  if (n2 > 0) v *= 1.0 / std::sqrt(n2);
  for (double c : v.components()) {
    if (std::abs(c) > 1e-9) {
      if (c < 0)
        for (double& x : v.components()) x = -x;
      break;
    }
  }
  return v;
}

}  // namespace detail

inline std::vector<PrincipalNullDirection> weyl_pnd_4d(const TensorValue& w,
                                                       const MetricAtPoint& m,
                                                       const NullFrame& start,
                                                       double cluster_radius = 1e-6) {
  if (w.dim() != 4) throw AlignmentError("weyl_pnd_4d: dimension must be 4");
  TensorValue wd = with_all_down(w, m);
  double scale = wd.norm_inf();
  if (scale <= 1e-14) throw AlignmentError("weyl_pnd_4d: zero tensor has no principal directions");
  ComplexFrame cf = np_frame(start);

  // interpolate the quartic at the 5th roots of unity
  Eigen::MatrixXcd vand(5, 5);
  Eigen::VectorXcd rhs(5);
  for (int i = 0; i < 5; ++i) {
    double ang = 2.0 * M_PI * i / 5.0;
    Complex z(std::cos(ang), std::sin(ang));
    Complex zp = 1.0;
    for (int j = 0; j < 5; ++j) {
      vand(i, j) = zp;
      zp *= z;
    }
    rhs(i) = detail::psi0_at(wd, cf, z);
  }
  Eigen::VectorXcd coef = vand.fullPivLu().solve(rhs);
  // validate holomorphy of Psi_0'(z) at off-grid points
  for (Complex z : {Complex(0.31, 0.77), Complex(-1.21, 0.43), Complex(0.05, -1.63)}) {
    Complex pred = 0.0, zp = 1.0;
    for (int j = 0; j < 5; ++j) {
      pred += coef(j) * zp;
      zp *= z;
    }
    Complex actual = detail::psi0_at(wd, cf, z);
    if (std::abs(pred - actual) > 1e-7 * scale * (1.0 + std::pow(std::abs(z), 4)))
      throw AlignmentError("weyl_pnd_4d: rotated scalar is not a quartic (input not Weyl-like?)");
  }

  double cmax = 0.0;
  for (int j = 0; j < 5; ++j) cmax = std::max(cmax, std::abs(coef(j)));
  int deg = -1;
  for (int j = 4; j >= 0; --j)
    if (std::abs(coef(j)) > 1e-9 * cmax) {
      deg = j;
      break;
    }
  std::vector<Complex> roots;
  if (deg >= 1) {
    Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -coef(i) / coef(deg);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp);
    for (int i = 0; i < deg; ++i) roots.push_back(es.eigenvalues()(i));
  }

  // cluster finite roots
  std::vector<std::pair<Complex, int>> clusters;
  std::sort(roots.begin(), roots.end(), [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  for (Complex z : roots) {
    bool merged = false;
    for (auto& [center, count] : clusters)
      if (std::abs(z - center) <= cluster_radius * (1.0 + std::abs(center))) {
        center = (center * static_cast<double>(count) + z) / static_cast<double>(count + 1);
        ++count;
        merged = true;
        break;
      }
    if (!merged) clusters.emplace_back(z, 1);
  }

  std::vector<PrincipalNullDirection> out;
  for (const auto& [z, count] : clusters) {
    ComplexVector kc = detail::rotated_k(cf, z);
    TensorValue dir(4, {Variance::Up});
    for (int a = 0; a < 4; ++a) dir.at({a}) = kc.c[a].real();
    PrincipalNullDirection pnd;
    pnd.direction = detail::normalize_direction(dir);
    pnd.multiplicity = count;
    out.push_back(std::move(pnd));
  }
  if (deg < 4) {
    PrincipalNullDirection pnd;  // root(s) at infinity: l
    pnd.direction = detail::normalize_direction(start.e[1]);
    pnd.multiplicity = 4 - deg;
    out.push_back(std::move(pnd));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.multiplicity != b.multiplicity) return a.multiplicity > b.multiplicity;
    return a.direction.components() < b.direction.components();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Eigenstructure of S viewed as an endomorphism S^a_b.

struct SEigenReport {
  bool zero = false;
  std::vector<Complex> eigenvalues;
  std::vector<TensorValue> null_eigendirections;  // up vectors, normalized
  std::optional<double> lambda;                   // eigenvalue along the null direction
  int dim_timelike_eigenspace = 0;                // generalized eigenspace of lambda
  bool lambda_in_spatial_spectrum = false;
  bool generic_type_II = false;
  bool tachyonic_type_d = false;  // P(S) = 0 (dimension 4)
  std::optional<TensorValue> u;   // unit spacelike u with S = lambda_u (uu - h/3)
  double lambda_u = 0.0;
};

inline SEigenReport s_eigenstructure(const TensorValue& s, const MetricAtPoint& m,
                                     double tol = 1e-9) {
  const int n = s.dim();
  if (s.rank() != 2) throw AlignmentError("s_eigenstructure: rank-2 tensor expected");
  TensorValue sd = with_all_down(s, m);
  SEigenReport rep;
  double scale = sd.norm_inf();
  if (scale <= tol) {
    rep.zero = true;
    return rep;
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (std::abs(sd.at({a, b}) - sd.at({b, a})) > 1e-8 * scale)
        throw AlignmentError("s_eigenstructure: tensor is not symmetric");

  Eigen::MatrixXd a_mat(n, n);
  TensorValue su = raise_lower(sd, 0, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a_mat(i, j) = su.at({i, j});
  Eigen::EigenSolver<Eigen::MatrixXd> es(a_mat);
  for (int i = 0; i < n; ++i) rep.eigenvalues.push_back(es.eigenvalues()(i));

  double gscale = m.g.norm_inf();
  // real eigenvalues, deduplicated
  std::vector<double> revals;
  for (int i = 0; i < n; ++i) {
    Complex ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) > 1e-8 * (1.0 + scale)) continue;
    bool dup = false;
    for (double r : revals)
      if (std::abs(r - ev.real()) <= 1e-8 * (1.0 + scale)) dup = true;
    if (!dup) revals.push_back(ev.real());
  }
  std::sort(revals.begin(), revals.end());

  for (double lam : revals) {
    // null space of (A - lam I)
    Eigen::MatrixXd b_mat = a_mat - lam * Eigen::MatrixXd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b_mat, Eigen::ComputeFullV);
    double smax = svd.singularValues()(0);
    std::vector<Eigen::VectorXd> kerbasis;
    for (int i = 0; i < n; ++i)
      if (svd.singularValues()(i) <= 1e-8 * std::max(smax, 1.0))
        kerbasis.push_back(svd.matrixV().col(i));
    if (kerbasis.empty()) continue;
    // find null directions inside the eigenspace
    std::vector<Eigen::VectorXd> nulls;
    Eigen::MatrixXd gm(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gm(i, j) = m.g.at({i, j});
    if (kerbasis.size() == 1) {
      const auto& v = kerbasis[0];
      if (std::abs(v.dot(gm * v)) <= 1e-7 * std::max(1.0, gscale)) nulls.push_back(v);
    } else {
      int d = static_cast<int>(kerbasis.size());
      Eigen::MatrixXd q(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) q(i, j) = kerbasis[i].dot(gm * kerbasis[j]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qes(q);
      // pair the most negative with the most positive restricted directions
      double mu_min = qes.eigenvalues()(0), mu_max = qes.eigenvalues()(d - 1);
      auto combine = [&](int i, double wi, int j, double wj) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
        for (int b = 0; b < d; ++b)
          v += (wi * qes.eigenvectors()(b, i) + wj * qes.eigenvectors()(b, j)) * kerbasis[b];
        return v;
      };
      if (mu_min < -1e-9 && mu_max > 1e-9) {
        nulls.push_back(combine(0, std::sqrt(mu_max), d - 1, std::sqrt(-mu_min)));
        nulls.push_back(combine(0, std::sqrt(mu_max), d - 1, -std::sqrt(-mu_min)));
      } else {
        for (int i = 0; i < d; ++i)
          if (std::abs(qes.eigenvalues()(i)) <= 1e-7 * std::max(1.0, gscale)) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
            for (int b = 0; b < d; ++b) v += qes.eigenvectors()(b, i) * kerbasis[b];
            nulls.push_back(v);
          }
      }
    }
    if (nulls.empty()) continue;
    if (!rep.lambda) {
      rep.lambda = lam;
      // generalized eigenspace dimension: n - rank((A - lam I)^n)
      Eigen::MatrixXd p_mat = Eigen::MatrixXd::Identity(n, n);
      for (int i = 0; i < n; ++i) p_mat = p_mat * b_mat;
      Eigen::JacobiSVD<Eigen::MatrixXd> psvd(p_mat);
      double pmax = psvd.singularValues()(0);
      int rank = 0;
      for (int i = 0; i < n; ++i)
        if (psvd.singularValues()(i) > 1e-8 * std::max(pmax, 1.0)) ++rank;
      rep.dim_timelike_eigenspace = n - rank;
    }
    for (const auto& v : nulls) {
      TensorValue dir(n, {Variance::Up});
      for (int i = 0; i < n; ++i) dir.at({i}) = v(i);
      rep.null_eigendirections.push_back(detail::normalize_direction(dir));
    }
  }

  if (rep.lambda) {
    // spatial block spectrum in a frame completing the null eigendirection
    NullFrame f = complete_null_frame(rep.null_eigendirections.front(), m);
    TensorValue sf = frame_components(sd, f);
    Eigen::MatrixXd spatial(n - 2, n - 2);
    for (int i = 0; i < n - 2; ++i)
      for (int j = 0; j < n - 2; ++j) spatial(i, j) = sf.at({i + 2, j + 2});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ses(spatial);
    for (int i = 0; i < n - 2; ++i)
      if (std::abs(ses.eigenvalues()(i) - *rep.lambda) <= 1e-7 * (1.0 + scale))
        rep.lambda_in_spatial_spectrum = true;
    rep.generic_type_II = (rep.dim_timelike_eigenspace == 2) && !rep.lambda_in_spatial_spectrum;
  }

  if (n == 4) {
    TensorValue p = plebanski(sd, m);
    if (p.norm_inf() <= 1e-10 * std::max(1.0, scale * scale)) {
      rep.tachyonic_type_d = true;
      // u u = (3 S / lambda + g)/4 with lambda = +-sqrt(1.5 S.S)
      TensorValue sup = with_all_up(sd, m);
      double ss = 0.0;
      for (std::size_t i = 0; i < sd.components().size(); ++i)
        ss += sd.components()[i] * sup.components()[i];
      double lam = std::sqrt(std::max(0.0, 1.5 * ss));
      for (double sign : {1.0, -1.0}) {
        double l0 = sign * lam;
        if (l0 == 0.0) continue;
        Eigen::MatrixXd uu(4, 4);
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) uu(a, b) = 0.25 * (3.0 * sd.at({a, b}) / l0 + m.g.at({a, b}));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ues(uu);
        int top = 3;
        double mu = ues.eigenvalues()(top);
        Eigen::MatrixXd rank1 = mu * ues.eigenvectors().col(top) * ues.eigenvectors().col(top).transpose();
        if (mu > 0 && (uu - rank1).cwiseAbs().maxCoeff() <= 1e-7 * std::max(1.0, uu.cwiseAbs().maxCoeff())) {
          TensorValue uvec(4, {Variance::Down});
          for (int a = 0; a < 4; ++a) uvec.at({a}) = std::sqrt(mu) * ues.eigenvectors()(a, top);
          TensorValue uup = raise_lower(uvec, 0, m);
          rep.u = detail::normalize_direction(uup);
          // rescale to unit spacelike norm
          double un = m.inner(*rep.u, *rep.u);
          if (un > 0) {
            TensorValue scaled = *rep.u;
            scaled *= 1.0 / std::sqrt(un);
            rep.u = scaled;
          }
          rep.lambda_u = l0;
          break;
        }
      }
    }
  }
  return rep;
}

}  // namespace kundt
