#pragma once

// Optical quantities of a null vector field: kappa_i = (nabla_0 k)_i,
// rho_ij = (nabla_j k)_i, the expansion/shear/twist split, and the
// geodesic / Kundt / Robinson-Trautman classification.

#include "kundt/frames.hpp"
#include "kundt/geometry.hpp"
#include "kundt/tensor.hpp"

#include <string>

namespace kundt {

struct CongruenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CongruenceReport {
  int dim = 0;
  std::vector<double> kappa;              // size n-2
  std::vector<double> rho;                // (n-2)x(n-2), row-major rho_ij
  double theta = 0.0;                     // tr rho / (n-2)
  std::vector<double> shear;              // symmetric trace-free part
  std::vector<double> twist;              // antisymmetric part
  bool geodesic = false;
  bool twist_free = false;
  bool shear_free = false;
  bool expansion_free = false;
  bool kundt = false;
  bool robinson_trautman = false;
  std::vector<std::string> marginal;      // quantities within 10x of the tolerance
  double tol = 1e-9;
  std::uint64_t frame_fingerprint = 0;

  int s() const { return dim - 2; }
  double rho_at(int i, int j) const { return rho[i * s() + j]; }
  double kappa_norm() const {
    double m = 0.0;
    for (double k : kappa) m = std::max(m, std::abs(k));
    return m;
  }
  double rho_norm() const {
    double m = 0.0;
    for (double r : rho) m = std::max(m, std::abs(r));
    return m;
  }
  double shear_norm() const {
    double m = 0.0;
    for (double v : shear) m = std::max(m, std::abs(v));
    return m;
  }
  double twist_norm() const {
    double m = 0.0;
    for (double v : twist) m = std::max(m, std::abs(v));
    return m;
  }
};

// kappa_i = m_i . (nabla_k k), rho_ij = m_i . (nabla_{m_j} k); frame f must
// complete k(p). The field is checked to be null at p and at finite-difference
// offsets around it.
inline CongruenceReport kappa_rho(const TensorFieldExpr& k_field, const CurvatureBundle& bundle,
                                  const Point& p, const NullFrame& f, double tol = 1e-9) {
  const int n = bundle.dim();
  if (k_field.rank() != 1 || k_field.variance(0) != Variance::Up)
    throw CongruenceError("kappa_rho: k must be a rank-1 up field");
  TensorValue kp = k_field.eval(p);
  double kscale = 0.0;
  for (double c : kp.components()) kscale = std::max(kscale, std::abs(c));
  if (kscale == 0.0) throw CongruenceError("kappa_rho: k vanishes at the point");
  {
    TensorValue dk = f.e[0];
    dk -= kp;
    if (dk.norm_inf() > 1e-9 * kscale)
      throw CongruenceError("kappa_rho: frame does not complete k at the point");
  }
  // null check at p and offsets
  const double h = 1e-4;
  for (int off = -1; off <= 2 * n - 1; ++off) {
    Point q = p;
    if (off >= 0) {
      int coord = off / 2;
      q.x[coord] += (off % 2 == 0 ? h : -h);
      q.exact.reset();
    }
    try {
      MetricAtPoint mq = bundle.metric_at(q);
      TensorValue kq = k_field.eval(q);
      double norm = mq.inner(kq, kq);
      double sc = 0.0;
      for (double c : kq.components()) sc = std::max(sc, std::abs(c));
      if (std::abs(norm) > 1e-6 * std::max(1.0, sc * sc))
        throw CongruenceError("kappa_rho: k is not null near the point (g(k,k) = " +
                              std::to_string(norm) + ")");
    } catch (const SingularMetricError&) {
      if (off < 0) throw;  // offsets may leave the chart box; the point itself may not
    }
  }

  TensorValue dk = bundle.cov_deriv(k_field).eval(p);  // (deriv c, comp^b)
  TensorValue dkf = frame_components(dk, f);           // (beta, alpha), all lowered
  CongruenceReport rep;
  rep.dim = n;
  rep.tol = tol;
  rep.frame_fingerprint = f.fingerprint();
  const int s = n - 2;
  rep.kappa.resize(s);
  rep.rho.resize(s * s);
  for (int i = 0; i < s; ++i) rep.kappa[i] = dkf.at({0, i + 2});
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) rep.rho[i * s + j] = dkf.at({j + 2, i + 2});
  double trace = 0.0;
  for (int i = 0; i < s; ++i) trace += rep.rho_at(i, i);
  rep.theta = trace / s;
  rep.shear.resize(s * s);
  rep.twist.resize(s * s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) {
      double sym = 0.5 * (rep.rho_at(i, j) + rep.rho_at(j, i));
      double asym = 0.5 * (rep.rho_at(i, j) - rep.rho_at(j, i));
      rep.shear[i * s + j] = sym - (i == j ? rep.theta : 0.0);
      rep.twist[i * s + j] = asym;
    }

  auto flag = [&](double value, const std::string& name) {
    if (value <= tol) {
      if (value > tol / 10.0) rep.marginal.push_back(name);
      return true;
    }
    if (value <= 10.0 * tol) rep.marginal.push_back(name);
    return false;
  };
  rep.geodesic = flag(rep.kappa_norm(), "kappa");
  rep.twist_free = flag(rep.twist_norm(), "twist");
  rep.shear_free = flag(rep.shear_norm(), "shear");
  rep.expansion_free = flag(std::abs(rep.theta), "theta");
  rep.kundt = rep.kappa_norm() <= tol && rep.rho_norm() <= tol;
  rep.robinson_trautman =
      rep.geodesic && rep.twist_free && rep.shear_free && std::abs(rep.theta) > tol;
  return rep;
}

// Rank-4 residual of k_[a (nabla_b] k_[c) k_d].
inline TensorValue kundt_tensor_residual(const TensorFieldExpr& k_field,
                                         const CurvatureBundle& bundle, const Point& p) {
  MetricAtPoint m = bundle.metric_at(p);
  TensorValue kp = k_field.eval(p);
  TensorValue klow = raise_lower(kp, 0, m);
  TensorValue dk = bundle.cov_deriv(k_field).eval(p);  // (b, ^c)
  TensorValue dklow = raise_lower(dk, 1, m);           // (b, c)
  TensorValue t = tensor_product(klow, tensor_product(dklow, klow));  // (a, b, c, d)
  return antisymmetrize(antisymmetrize(t, {0, 1}), {2, 3});
}

inline std::string classify_congruence(const CongruenceReport& rep) {
  if (rep.kundt) return "Kundt";
  if (rep.robinson_trautman) return "Robinson-Trautman";
  if (rep.geodesic) return "geodesic-only";
  return "generic";
}

}  // namespace kundt
