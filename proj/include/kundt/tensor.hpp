#pragma once

// Dense multi-index component arrays at a point: products, contractions,
// permutations, (anti)symmetrization, index raising/lowering.
// Row-major linearization, first slot slowest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kundt {

enum class Variance : std::uint8_t { Up, Down };

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  while (e-- > 0) r *= base;
  return r;
}

class TensorValue {
 public:
  TensorValue() = default;
  TensorValue(int dim, std::vector<Variance> variance)
      : dim_(dim), var_(std::move(variance)), comp_(ipow(dim, static_cast<int>(var_.size())), 0.0) {}
  TensorValue(int dim, std::vector<Variance> variance, std::vector<double> components)
      : dim_(dim), var_(std::move(variance)), comp_(std::move(components)) {
    if (comp_.size() != ipow(dim_, rank())) throw TensorError("component count does not match dim^rank");
  }

  static TensorValue scalar(double v) { return TensorValue(1, {}, {v}); }

  int dim() const { return dim_; }
  int rank() const { return static_cast<int>(var_.size()); }
  const std::vector<Variance>& variance() const { return var_; }
  Variance variance(int slot) const { return var_.at(slot); }
  const std::vector<double>& components() const { return comp_; }
  std::vector<double>& components() { return comp_; }

  double operator[](std::span<const int> idx) const { return comp_[flat(idx)]; }
  double& operator[](std::span<const int> idx) { return comp_[flat(idx)]; }
  double at(std::initializer_list<int> idx) const { return comp_[flat(std::span<const int>(idx.begin(), idx.size()))]; }
  double& at(std::initializer_list<int> idx) { return comp_[flat(std::span<const int>(idx.begin(), idx.size()))]; }

  std::size_t flat(std::span<const int> idx) const {
    std::size_t f = 0;
    for (int i : idx) f = f * dim_ + static_cast<std::size_t>(i);
    return f;
  }

  void unflatten(std::size_t f, std::span<int> idx) const {
    for (int s = rank() - 1; s >= 0; --s) {
      idx[s] = static_cast<int>(f % dim_);
      f /= dim_;
    }
  }

  double norm_inf() const {
    double m = 0.0;
    for (double c : comp_) m = std::max(m, std::abs(c));
    return m;
  }

  double norm2() const {
    double s = 0.0;
    for (double c : comp_) s += c * c;
    return std::sqrt(s);
  }

  TensorValue& operator+=(const TensorValue& o) {
    check_shape(o);
    for (std::size_t i = 0; i < comp_.size(); ++i) comp_[i] += o.comp_[i];
    return *this;
  }
  TensorValue& operator-=(const TensorValue& o) {
    check_shape(o);
    for (std::size_t i = 0; i < comp_.size(); ++i) comp_[i] -= o.comp_[i];
    return *this;
  }
  TensorValue& operator*=(double s) {
    for (double& c : comp_) c *= s;
    return *this;
  }
  friend TensorValue operator+(TensorValue a, const TensorValue& b) { return a += b; }
  friend TensorValue operator-(TensorValue a, const TensorValue& b) { return a -= b; }
  friend TensorValue operator*(double s, TensorValue a) { return a *= s; }

 private:
  void check_shape(const TensorValue& o) const {
    if (dim_ != o.dim_ || var_ != o.var_) throw TensorError("tensor shape mismatch");
  }

  int dim_ = 0;
  std::vector<Variance> var_;
  std::vector<double> comp_;
};

inline TensorValue tensor_product(const TensorValue& a, const TensorValue& b) {
  if (a.dim() != b.dim() && a.rank() > 0 && b.rank() > 0)
    throw TensorError("tensor_product: dimension mismatch");
  int dim = a.rank() > 0 ? a.dim() : b.dim();
  std::vector<Variance> var = a.variance();
  var.insert(var.end(), b.variance().begin(), b.variance().end());
  TensorValue out(dim, std::move(var));
  const std::size_t nb = b.components().size();
  for (std::size_t i = 0; i < a.components().size(); ++i)
    for (std::size_t j = 0; j < nb; ++j)
      out.components()[i * nb + j] = a.components()[i] * b.components()[j];
  return out;
}

inline TensorValue contract(const TensorValue& t, int slot1, int slot2) {
  const int r = t.rank();
  if (slot1 == slot2 || slot1 < 0 || slot2 < 0 || slot1 >= r || slot2 >= r)
    throw TensorError("contract: invalid slots");
  if (t.variance(slot1) == t.variance(slot2))
    throw TensorError("contract: slots must have opposite variance");
  if (slot1 > slot2) std::swap(slot1, slot2);
  const int d = t.dim();
  std::vector<Variance> var;
  for (int s = 0; s < r; ++s)
    if (s != slot1 && s != slot2) var.push_back(t.variance(s));
  TensorValue out(d, std::move(var));
  std::vector<int> oidx(r - 2), idx(r);
  const std::size_t n = out.components().size();
  for (std::size_t f = 0; f < n; ++f) {
    out.unflatten(f, oidx);
    int p = 0;
    for (int s = 0; s < r; ++s)
      if (s != slot1 && s != slot2) idx[s] = oidx[p++];
    double sum = 0.0;
    for (int c = 0; c < d; ++c) {
      idx[slot1] = c;
      idx[slot2] = c;
      sum += t[idx];
    }
    out.components()[f] = sum;
  }
  return out;
}

// sigma maps output slot -> input slot: out[i1..ir] = in[i_{sigma(1)}...].
inline TensorValue permute(const TensorValue& t, std::span<const int> sigma) {
  const int r = t.rank();
  if (static_cast<int>(sigma.size()) != r) throw TensorError("permute: wrong permutation size");
  std::vector<bool> seen(r, false);
  for (int s : sigma) {
    if (s < 0 || s >= r || seen[s]) throw TensorError("permute: not a permutation");
    seen[s] = true;
  }
  std::vector<Variance> var(r);
  for (int s = 0; s < r; ++s) var[s] = t.variance(sigma[s]);
  TensorValue out(t.dim(), std::move(var));
  std::vector<int> oidx(r), idx(r);
  for (std::size_t f = 0; f < out.components().size(); ++f) {
    out.unflatten(f, oidx);
    for (int s = 0; s < r; ++s) idx[sigma[s]] = oidx[s];
    out.components()[f] = t[idx];
  }
  return out;
}

inline TensorValue permute(const TensorValue& t, std::initializer_list<int> sigma) {
  return permute(t, std::span<const int>(sigma.begin(), sigma.size()));
}

namespace detail {

template <typename Fn>
void for_each_permutation(std::vector<int> elems, Fn&& fn) {
  std::sort(elems.begin(), elems.end());
  // iterate in lexicographic order with parity tracking via explicit count
  std::vector<int> base = elems;
  do {
    // parity of the permutation mapping base -> elems
    std::vector<int> perm(elems.size());
    std::vector<bool> used(elems.size(), false);
    for (std::size_t i = 0; i < elems.size(); ++i)
      for (std::size_t j = 0; j < base.size(); ++j)
        if (!used[j] && base[j] == elems[i]) {
          perm[i] = static_cast<int>(j);
          used[j] = true;
          break;
        }
    int sign = 1;
    std::vector<bool> visited(perm.size(), false);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      if (visited[i]) continue;
      int len = 0;
      for (std::size_t j = i; !visited[j]; j = perm[j]) {
        visited[j] = true;
        ++len;
      }
      if (len % 2 == 0) sign = -sign;
    }
    fn(elems, sign);
  } while (std::next_permutation(elems.begin(), elems.end()));
}

inline TensorValue sym_impl(const TensorValue& t, std::span<const int> slots, bool anti) {
  const int r = t.rank();
  for (int s : slots) {
    if (s < 0 || s >= r) throw TensorError("symmetrize: invalid slot");
    if (t.variance(s) != t.variance(slots[0]))
      throw TensorError("symmetrize: slots must share variance");
  }
  std::vector<int> slot_list(slots.begin(), slots.end());
  TensorValue out(t.dim(), t.variance());
  double count = 0;
  for_each_permutation(slot_list, [&](const std::vector<int>& arrangement, int sign) {
    std::vector<int> sigma(r);
    std::iota(sigma.begin(), sigma.end(), 0);
    for (std::size_t i = 0; i < slot_list.size(); ++i) sigma[slot_list[i]] = arrangement[i];
    TensorValue p = permute(t, sigma);
    double w = anti ? sign : 1.0;
    for (std::size_t f = 0; f < out.components().size(); ++f)
      out.components()[f] += w * p.components()[f];
    count += 1;
  });
  for (double& c : out.components()) c /= count;
  return out;
}

}  // namespace detail

inline TensorValue symmetrize(const TensorValue& t, std::span<const int> slots) {
  return detail::sym_impl(t, slots, false);
}
inline TensorValue antisymmetrize(const TensorValue& t, std::span<const int> slots) {
  return detail::sym_impl(t, slots, true);
}
inline TensorValue symmetrize(const TensorValue& t, std::initializer_list<int> slots) {
  return detail::sym_impl(t, std::span<const int>(slots.begin(), slots.size()), false);
}
inline TensorValue antisymmetrize(const TensorValue& t, std::initializer_list<int> slots) {
  return detail::sym_impl(t, std::span<const int>(slots.begin(), slots.size()), true);
}

// Metric (and inverse) evaluated at a point.
struct MetricAtPoint {
  TensorValue g;     // rank-2 down
  TensorValue ginv;  // rank-2 up
  double det = 0.0;

  int dim() const { return g.dim(); }

  double inner(const TensorValue& u, const TensorValue& v) const {
    if (u.rank() != 1 || v.rank() != 1) throw TensorError("inner: rank-1 vectors expected");
    const int d = g.dim();
    double s = 0.0;
    if (u.variance(0) != v.variance(0)) {
      for (int i = 0; i < d; ++i) s += u.at({i}) * v.at({i});
      return s;
    }
    const TensorValue& metric = (u.variance(0) == Variance::Up) ? g : ginv;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s += metric.at({i, j}) * u.at({i}) * v.at({j});
    return s;
  }
};

// Contract `slot` of t with the metric (lower) or inverse metric (raise).
inline TensorValue raise_lower(const TensorValue& t, int slot, const MetricAtPoint& m) {
  const int r = t.rank();
  if (slot < 0 || slot >= r) throw TensorError("raise_lower: invalid slot");
  const bool lowering = t.variance(slot) == Variance::Up;
  const TensorValue& metric = lowering ? m.g : m.ginv;
  const int d = t.dim();
  std::vector<Variance> var = t.variance();
  var[slot] = lowering ? Variance::Down : Variance::Up;
  TensorValue out(d, std::move(var));
  std::vector<int> idx(r), src(r);
  for (std::size_t f = 0; f < out.components().size(); ++f) {
    out.unflatten(f, idx);
    src = idx;
    double sum = 0.0;
    for (int c = 0; c < d; ++c) {
      src[slot] = c;
      sum += metric.at({idx[slot], c}) * t[src];
    }
    out.components()[f] = sum;
  }
  return out;
}

inline TensorValue with_all_down(const TensorValue& t, const MetricAtPoint& m) {
  TensorValue out = t;
  for (int s = 0; s < t.rank(); ++s)
    if (out.variance(s) == Variance::Up) out = raise_lower(out, s, m);
  return out;
}

inline TensorValue with_all_up(const TensorValue& t, const MetricAtPoint& m) {
  TensorValue out = t;
  for (int s = 0; s < t.rank(); ++s)
    if (out.variance(s) == Variance::Down) out = raise_lower(out, s, m);
  return out;
}

inline TensorValue kronecker_delta(int dim) {
  TensorValue d(dim, {Variance::Up, Variance::Down});
  for (int i = 0; i < dim; ++i) d.at({i, i}) = 1.0;
  return d;
}

inline TensorValue zero_tensor(int dim, std::vector<Variance> var) {
  return TensorValue(dim, std::move(var));
}

}  // namespace kundt
