#pragma once

// The boost-order bilinear machinery: the 2-form valued map phi(X,Y), the
// screen-space bracket <T|k|Q> (definition route and closed-form frame
// expansion), the curvature subspace K_N^c with its dimension d_N^c, and the
// factorization-identity checker for covariant derivatives.

#include "kundt/alignment.hpp"
#include "kundt/frames.hpp"
#include "kundt/geometry.hpp"
#include "kundt/tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <complex>
#include <functional>
#include <map>
#include <string>

namespace kundt {

struct BilinearError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BracketDomainError : BilinearError {
  using BilinearError::BilinearError;
};

// Element of the screen quotient c_perp/c in the basis {pi(m_j)}.
struct QuotientVector {
  std::vector<double> w;  // components j = 2..n-1
  std::uint64_t frame_fingerprint = 0;

  double norm_inf() const {
    double m = 0.0;
    for (double c : w) m = std::max(m, std::abs(c));
    return m;
  }
  double norm2() const {
    double s = 0.0;
    for (double c : w) s += c * c;
    return std::sqrt(s);
  }
};

// phi(X,Y)_{ab} = sum_i X_{c1..b(i)..cr} Y^{c1..}_a^{..cr}
//              -        X_{c1..a(i)..cr} Y^{c1..}_b^{..cr}
// (slot i of Y lowered, all others raised and contracted against X).
inline TensorValue phi(const TensorValue& x, const TensorValue& y, const MetricAtPoint& m) {
  if (x.rank() != y.rank()) throw BilinearError("phi: rank mismatch");
  if (x.dim() != y.dim()) throw BilinearError("phi: dimension mismatch");
  const int n = x.dim();
  const int r = x.rank();
  TensorValue xd = with_all_down(x, m);
  TensorValue out(n, {Variance::Down, Variance::Down});
  if (r == 0) return out;
  std::vector<int> xi(r), yi(r);
  const std::size_t loops = ipow(n, r - 1);
  for (int slot = 0; slot < r; ++slot) {
    TensorValue ymod = with_all_up(y, m);
    ymod = raise_lower(ymod, slot, m);  // slot down, rest up
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        double mba = 0.0;  // M_slot(b, a) = X[..b..] Ymod[..a..]
        for (std::size_t f = 0; f < loops; ++f) {
          std::size_t rem = f;
          for (int s = r - 1; s >= 0; --s) {
            if (s == slot) continue;
            int v = static_cast<int>(rem % n);
            rem /= n;
            xi[s] = v;
            yi[s] = v;
          }
          xi[slot] = b;
          yi[slot] = a;
          mba += xd[xi] * ymod[yi];
        }
        out.at({a, b}) += mba;
        out.at({b, a}) -= mba;
      }
  }
  return out;
}

// <T|k|Q>^a = pi(phi(T,Q)^{ab} l_b); components against pi(m_j) are
// w_j = phi_{cd} m_j^c l^d.
inline QuotientVector bracket_via_phi(const TensorValue& t, const NullFrame& f,
                                      const TensorValue& q) {
  TensorValue p = phi(t, q, f.m);
  const int n = f.dim;
  QuotientVector out;
  out.frame_fingerprint = f.fingerprint();
  out.w.assign(n - 2, 0.0);
  for (int j = 2; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < n; ++c)
      for (int d = 0; d < n; ++d) s += p.at({c, d}) * f.e[j].at({c}) * f.e[1].at({d});
    out.w[j - 2] = s;
  }
  return out;
}

struct BracketResult {
  QuotientVector value;
  int bo_t = 0;
  int bo_q = 0;
  bool zero_tensor = false;  // T vanished within tolerance; value is zero
};

// Definition route with the domain condition bo(Q) <= -bo(T)-1 measured and
// enforced.
inline BracketResult bracket(const TensorValue& t, const NullFrame& f, const TensorValue& q,
                             double tol_abs = 1e-10, double tol_rel = 1e-9) {
  BracketResult out;
  AlignmentReport at = boost_order(t, f, tol_abs, tol_rel);
  AlignmentReport aq = boost_order(q, f, tol_abs, tol_rel);
  if (at.is_zero()) {
    out.zero_tensor = true;
    out.value.w.assign(f.dim - 2, 0.0);
    out.value.frame_fingerprint = f.fingerprint();
    return out;
  }
  out.bo_t = *at.bo;
  out.bo_q = aq.is_zero() ? -q.rank() : *aq.bo;
  if (!aq.is_zero() && out.bo_q > -out.bo_t - 1)
    throw BracketDomainError("bracket: bo(Q) = " + std::to_string(out.bo_q) +
                             " exceeds the domain bound " + std::to_string(-out.bo_t - 1));
  out.value = bracket_via_phi(t, f, q);
  return out;
}

// Monomial Q = e_{a1} ... e_{ar} identified by its multi-index; bo(Q) = -bw.
struct Monomial {
  std::vector<int> labels;
  int bw() const { return boost_weight(labels); }
};

inline TensorValue monomial_tensor(const Monomial& mono, const NullFrame& f) {
  TensorValue out = TensorValue::scalar(1.0);
  bool first = true;
  for (int a : mono.labels) {
    TensorValue lowered = raise_lower(f.e[a], 0, f.m);
    out = first ? lowered : tensor_product(out, lowered);
    first = false;
  }
  return out;
}

// Closed-form frame expansion (valid for bw(alpha) >= s+1 with s = bo(T)):
//   <T|k|e_{a1}...e_{ar}>_j = sum_i ( delta^j_{ai} T_{alpha_i 1}
//                                    - delta^0_{ai} T_{alpha_i}{}^j ).
// Returns the zero vector when bw(alpha) > s+1.
inline QuotientVector bracket_monomial_framed(const TensorValue& t_frame, const NullFrame& f,
                                              const Monomial& mono, int s) {
  const int n = f.dim;
  if (static_cast<int>(mono.labels.size()) != t_frame.rank())
    throw BilinearError("bracket_monomial: rank mismatch");
  const int bw = mono.bw();
  QuotientVector out;
  out.frame_fingerprint = f.fingerprint();
  out.w.assign(n - 2, 0.0);
  if (bw < s + 1)
    throw BracketDomainError("bracket_monomial: bw(alpha) = " + std::to_string(bw) +
                             " below the domain bound " + std::to_string(s + 1));
  if (bw > s + 1) return out;
  std::vector<int> idx(mono.labels.begin(), mono.labels.end());
  for (std::size_t i = 0; i < mono.labels.size(); ++i) {
    const int ai = mono.labels[i];
    if (ai >= 2) {
      idx[i] = 1;
      out.w[ai - 2] += t_frame[idx];
      idx[i] = ai;
    } else if (ai == 0) {
      for (int j = 2; j < n; ++j) {
        idx[i] = j;
        out.w[j - 2] -= t_frame[idx];  // spatial up equals spatial down
      }
      idx[i] = ai;
    }
  }
  return out;
}

inline QuotientVector bracket_monomial(const TensorValue& t, const NullFrame& f,
                                       const Monomial& mono, std::optional<int> s_measured =
                                                                 std::nullopt) {
  TensorValue tf = frame_components(t, f);
  int s;
  if (s_measured) {
    s = *s_measured;
  } else {
    AlignmentReport rep = boost_order(t, f);
    if (rep.is_zero()) {
      QuotientVector out;
      out.frame_fingerprint = f.fingerprint();
      out.w.assign(f.dim - 2, 0.0);
      return out;
    }
    s = *rep.bo;
  }
  return bracket_monomial_framed(tf, f, mono, s);
}

// Complex monomial labels for the 4D surjectivity formula: 0,1 as usual,
// 'm' and 'mbar' expand into (e2 -+ i e3)/sqrt(2).
enum class NPLabel { K, L, M, MBar };

inline std::vector<Complex> quotient_of_complex_vector(NPLabel v) {
  // pi(m) components against {pi(m_2), pi(m_3)}
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  if (v == NPLabel::M) return {Complex(inv_sqrt2, 0), Complex(0, -inv_sqrt2)};
  if (v == NPLabel::MBar) return {Complex(inv_sqrt2, 0), Complex(0, inv_sqrt2)};
  throw BilinearError("quotient_of_complex_vector: spatial label expected");
}

inline std::vector<Complex> bracket_monomial_complex(const TensorValue& t_frame,
                                                     const NullFrame& f,
                                                     std::span<const NPLabel> labels, int s) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  std::vector<std::vector<std::pair<int, Complex>>> expansions;
  for (NPLabel lab : labels) {
    switch (lab) {
      case NPLabel::K:
        expansions.push_back({{0, Complex(1, 0)}});
        break;
      case NPLabel::L:
        expansions.push_back({{1, Complex(1, 0)}});
        break;
      case NPLabel::M:
        expansions.push_back({{2, Complex(inv_sqrt2, 0)}, {3, Complex(0, -inv_sqrt2)}});
        break;
      case NPLabel::MBar:
        expansions.push_back({{2, Complex(inv_sqrt2, 0)}, {3, Complex(0, inv_sqrt2)}});
        break;
    }
  }
  std::vector<Complex> out(f.dim - 2, Complex(0, 0));
  const int r = static_cast<int>(labels.size());
  std::vector<int> choice(r, 0);
  for (;;) {
    Monomial mono;
    Complex coeff(1, 0);
    for (int i = 0; i < r; ++i) {
      mono.labels.push_back(expansions[i][choice[i]].first);
      coeff *= expansions[i][choice[i]].second;
    }
    QuotientVector qv = bracket_monomial_framed(t_frame, f, mono, s);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += coeff * qv.w[j];
    int pos = r - 1;
    while (pos >= 0) {
      if (++choice[pos] < static_cast<int>(expansions[pos].size())) break;
      choice[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// K_N^c and d_N^c

struct NamedGenerator {
  std::string name;
  TensorValue value;
};

struct KSubspaceResult {
  int d = 0;
  std::vector<QuotientVector> basis;  // orthonormal in the screen metric
  std::vector<std::pair<std::string, std::optional<int>>> generator_bos;
  std::uint64_t frame_fingerprint = 0;
  std::string policy;
  bool lower_bound = true;  // the generator set is a subset of C_{r,N}
};

// Span of all bracket images of the generators against monomials in B_r^{-1}.
// Only monomials with bw(alpha) = bo(T)+1 >= 1 contribute.
inline KSubspaceResult k_subspace_from_generators(std::vector<NamedGenerator> generators,
                                                  const NullFrame& f, double rank_tol = 1e-8,
                                                  double tol_abs = 1e-10, double tol_rel = 1e-9) {
  std::sort(generators.begin(), generators.end(),
            [](const NamedGenerator& a, const NamedGenerator& b) { return a.name < b.name; });
  const int n = f.dim;
  KSubspaceResult out;
  out.frame_fingerprint = f.fingerprint();
  std::vector<QuotientVector> columns;
  for (const auto& gen : generators) {
    AlignmentReport rep = boost_order(gen.value, f, tol_abs, tol_rel);
    out.generator_bos.emplace_back(gen.name, rep.bo);
    if (rep.is_zero()) continue;
    const int s = *rep.bo;
    if (s + 1 < 1) continue;  // admissible monomials must lie in B^{-1}
    const int r = gen.value.rank();
    if (s + 1 > r) continue;  // no multi-index reaches that weight
    TensorValue tf = frame_components(gen.value, f);
    std::vector<int> idx(r, 0);
    const std::size_t total = ipow(n, r);
    for (std::size_t fl = 0; fl < total; ++fl) {
      std::size_t rem = fl;
      for (int sdx = r - 1; sdx >= 0; --sdx) {
        idx[sdx] = static_cast<int>(rem % n);
        rem /= n;
      }
      if (boost_weight(idx) != s + 1) continue;
      Monomial mono;
      mono.labels = idx;
      QuotientVector qv = bracket_monomial_framed(tf, f, mono, s);
      if (qv.norm_inf() > 0.0) columns.push_back(std::move(qv));
    }
  }
  if (columns.empty()) return out;
  Eigen::MatrixXd a_mat(n - 2, static_cast<int>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (int i = 0; i < n - 2; ++i) a_mat(i, static_cast<int>(c)) = columns[c].w[i];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a_mat, Eigen::ComputeFullU);
  double smax = svd.singularValues()(0);
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) >= rank_tol * smax && smax > 0) ++out.d;
  for (int i = 0; i < out.d; ++i) {
    QuotientVector b;
    b.frame_fingerprint = out.frame_fingerprint;
    b.w.resize(n - 2);
    for (int j = 0; j < n - 2; ++j) b.w[j] = svd.matrixU()(j, i);
    out.basis.push_back(std::move(b));
  }
  return out;
}

// Generator policies for C_{r,N}. "curvature-basic": Rm, its derivatives to
// order N-1, Ric, S and C. "products-2" additionally takes pairwise products
// contracted down to rank <= 6 (leading contraction pattern, a documented
// lower-bound choice).
inline std::vector<NamedGenerator> curvature_generators(const CurvatureBundle& bundle,
                                                        const Point& p, int n_order,
                                                        const std::string& policy =
                                                            "curvature-basic") {
  if (n_order < 1 || n_order > 3) throw BilinearError("curvature_generators: N must be 1..3");
  std::vector<NamedGenerator> gens;
  gens.push_back({"Rm", bundle.riemann().eval(p)});
  gens.push_back({"Ric", bundle.ricci().eval(p)});
  gens.push_back({"S", bundle.tracefree_ricci().eval(p)});
  if (bundle.dim() >= 4) gens.push_back({"C", bundle.weyl().eval(p)});
  for (int m = 1; m < n_order; ++m)
    gens.push_back({"D" + std::to_string(m) + "Rm", bundle.nabla_rm(m).eval(p)});
  if (policy == "products-2") {
    MetricAtPoint mp = bundle.metric_at(p);
    std::size_t base_count = gens.size();
    for (std::size_t i = 0; i < base_count; ++i)
      for (std::size_t j = i; j < base_count; ++j) {
        TensorValue prod = tensor_product(gens[i].value, gens[j].value);
        int guard = 0;
        while (prod.rank() > 6 && guard++ < 8) {
          int cut = gens[i].value.rank();  // first slot of the j-factor
          TensorValue raised = raise_lower(prod, cut - 1, mp);
          prod = contract(raised, cut - 1, cut);
        }
        if (prod.rank() >= 1 && prod.rank() <= 6)
          gens.push_back({gens[i].name + "*" + gens[j].name, std::move(prod)});
      }
  } else if (policy != "curvature-basic") {
    throw BilinearError("unknown generator policy '" + policy + "'");
  }
  return gens;
}

inline KSubspaceResult k_subspace(const CurvatureBundle& bundle, const NullFrame& f,
                                  const Point& p, int n_order,
                                  const std::string& policy = "curvature-basic",
                                  double rank_tol = 1e-8) {
  KSubspaceResult out =
      k_subspace_from_generators(curvature_generators(bundle, p, n_order, policy), f, rank_tol);
  out.policy = policy;
  return out;
}

// ---------------------------------------------------------------------------
// Factorization identity: X^a (nabla_a T_{c...}) Q^{c...} =
//   pi(X^a nabla_a k^b) <T|k|Q>_b  for bo(T) = s, Q in B^{-s-1}.

struct FactorizationData {
  TensorValue t_frame;   // frame components of T
  TensorValue dt_frame;  // frame components of nabla T (derivative slot first)
  TensorValue dk_frame;  // frame components of nabla k (derivative slot first)
  int s = 0;             // measured bo(T)
  std::uint64_t frame_fingerprint = 0;
};

inline FactorizationData factorization_data(const TensorFieldExpr& t_field,
                                            const TensorFieldExpr& k_field,
                                            const CurvatureBundle& bundle, const NullFrame& f,
                                            const Point& p, int s_measured) {
  FactorizationData d;
  d.t_frame = frame_components(t_field.eval(p), f);
  d.dt_frame = frame_components(bundle.cov_deriv(t_field).eval(p), f);
  d.dk_frame = frame_components(bundle.cov_deriv(k_field).eval(p), f);
  d.s = s_measured;
  d.frame_fingerprint = f.fingerprint();
  return d;
}

struct FactorizationCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  // |lhs-rhs| / (1 + |lhs| + |rhs|)
};

// One rigorous relation: X = e_beta, Q the monomial alpha.
inline FactorizationCheck factorization_check(const FactorizationData& d, const NullFrame& f,
                                              const Monomial& mono, int beta) {
  FactorizationCheck out;
  std::vector<int> didx;
  didx.push_back(beta);
  didx.insert(didx.end(), mono.labels.begin(), mono.labels.end());
  out.lhs = d.dt_frame[didx];
  QuotientVector qv = bracket_monomial_framed(d.t_frame, f, mono, d.s);
  double rhs = 0.0;
  for (int j = 2; j < f.dim; ++j) rhs += d.dk_frame.at({beta, j}) * qv.w[j - 2];
  out.rhs = rhs;
  out.residual = std::abs(out.lhs - out.rhs) / (1.0 + std::abs(out.lhs) + std::abs(out.rhs));
  return out;
}

}  // namespace kundt
