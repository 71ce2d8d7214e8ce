#pragma once

// Tensor fields with closed-form components: dense arrays of Expr with the
// same shape laws as TensorValue, a cached evaluation tape, and the field
// operations the curvature pipeline needs.

#include "kundt/expr.hpp"
#include "kundt/metric.hpp"
#include "kundt/tensor.hpp"

#include <memory>
#include <mutex>

namespace kundt {

class TensorFieldExpr {
 public:
  TensorFieldExpr() = default;
  TensorFieldExpr(int dim, std::vector<Variance> variance)
      : dim_(dim), var_(std::move(variance)), comp_(ipow(dim, static_cast<int>(var_.size())), zero_expr()) {}
  TensorFieldExpr(int dim, std::vector<Variance> variance, std::vector<Expr> components)
      : dim_(dim), var_(std::move(variance)), comp_(std::move(components)) {
    if (comp_.size() != ipow(dim_, rank()))
      throw TensorError("field component count does not match dim^rank");
  }

  static TensorFieldExpr scalar(int dim, Expr e) {
    TensorFieldExpr f(dim, {});
    f.comp_[0] = std::move(e);
    return f;
  }

  int dim() const { return dim_; }
  int rank() const { return static_cast<int>(var_.size()); }
  const std::vector<Variance>& variance() const { return var_; }
  Variance variance(int slot) const { return var_.at(slot); }
  const std::vector<Expr>& components() const { return comp_; }
  std::vector<Expr>& components() {
    cache_.reset();
    return comp_;
  }

  const Expr& operator[](std::span<const int> idx) const { return comp_[flat(idx)]; }
  const Expr& at(std::initializer_list<int> idx) const {
    return comp_[flat(std::span<const int>(idx.begin(), idx.size()))];
  }
  void set(std::span<const int> idx, const Expr& e) {
    cache_.reset();
    comp_[flat(idx)] = e;
  }
  void set(std::initializer_list<int> idx, const Expr& e) {
    set(std::span<const int>(idx.begin(), idx.size()), e);
  }

  std::size_t flat(std::span<const int> idx) const {
    std::size_t f = 0;
    for (int i : idx) f = f * dim_ + static_cast<std::size_t>(i);
    return f;
  }

  std::size_t node_count() const { return count_nodes(std::span<const Expr>(comp_)); }

  TensorValue eval(const Point& p) const {
    ensure_tape();
    std::vector<double> slots;
    cache_->tape->eval(p.x, slots);
    std::vector<double> vals(comp_.size());
    for (std::size_t i = 0; i < comp_.size(); ++i) vals[i] = slots[cache_->tape->root_slot(i)];
    return TensorValue(dim_, var_, std::move(vals));
  }

 private:
  struct Cache {
    std::unique_ptr<Tape> tape;
  };

  void ensure_tape() const {
    std::lock_guard<std::mutex> lock(mu_);
    if (!cache_) {
      auto c = std::make_shared<Cache>();
      c->tape = std::make_unique<Tape>(std::span<const Expr>(comp_));
      cache_ = std::move(c);
    }
  }

  int dim_ = 0;
  std::vector<Variance> var_;
  std::vector<Expr> comp_;
  mutable std::mutex mu_;
  mutable std::shared_ptr<Cache> cache_;

 public:
  TensorFieldExpr(const TensorFieldExpr& o) : dim_(o.dim_), var_(o.var_), comp_(o.comp_) {}
  TensorFieldExpr& operator=(const TensorFieldExpr& o) {
    dim_ = o.dim_;
    var_ = o.var_;
    comp_ = o.comp_;
    cache_.reset();
    return *this;
  }
  TensorFieldExpr(TensorFieldExpr&& o) noexcept
      : dim_(o.dim_), var_(std::move(o.var_)), comp_(std::move(o.comp_)), cache_(std::move(o.cache_)) {}
  TensorFieldExpr& operator=(TensorFieldExpr&& o) noexcept {
    dim_ = o.dim_;
    var_ = std::move(o.var_);
    comp_ = std::move(o.comp_);
    cache_ = std::move(o.cache_);
    return *this;
  }
};

inline TensorFieldExpr field_product(const TensorFieldExpr& a, const TensorFieldExpr& b) {
  if (a.dim() != b.dim() && a.rank() > 0 && b.rank() > 0)
    throw TensorError("field_product: dimension mismatch");
  int dim = a.rank() > 0 ? a.dim() : b.dim();
  std::vector<Variance> var = a.variance();
  var.insert(var.end(), b.variance().begin(), b.variance().end());
  std::vector<Expr> comp;
  comp.reserve(a.components().size() * b.components().size());
  for (const auto& x : a.components())
    for (const auto& y : b.components()) comp.push_back(mul(x, y));
  return TensorFieldExpr(dim, std::move(var), std::move(comp));
}

inline TensorFieldExpr field_contract(const TensorFieldExpr& t, int slot1, int slot2) {
  const int r = t.rank();
  if (slot1 == slot2 || slot1 < 0 || slot2 < 0 || slot1 >= r || slot2 >= r)
    throw TensorError("field_contract: invalid slots");
  if (t.variance(slot1) == t.variance(slot2))
    throw TensorError("field_contract: slots must have opposite variance");
  if (slot1 > slot2) std::swap(slot1, slot2);
  const int d = t.dim();
  std::vector<Variance> var;
  for (int s = 0; s < r; ++s)
    if (s != slot1 && s != slot2) var.push_back(t.variance(s));
  TensorFieldExpr out(d, var);
  std::vector<int> oidx(r - 2), idx(r);
  const std::size_t n = out.components().size();
  std::vector<Expr> comp(n);
  for (std::size_t f = 0; f < n; ++f) {
    // unflatten
    std::size_t rem = f;
    for (int s = r - 3; s >= 0; --s) {
      oidx[s] = static_cast<int>(rem % d);
      rem /= d;
    }
    int p = 0;
    for (int s = 0; s < r; ++s)
      if (s != slot1 && s != slot2) idx[s] = oidx[p++];
    std::vector<Expr> terms;
    terms.reserve(d);
    for (int c = 0; c < d; ++c) {
      idx[slot1] = c;
      idx[slot2] = c;
      terms.push_back(t[idx]);
    }
    comp[f] = add(std::move(terms));
  }
  return TensorFieldExpr(d, std::move(var), std::move(comp));
}

inline TensorFieldExpr field_permute(const TensorFieldExpr& t, std::span<const int> sigma) {
  const int r = t.rank();
  if (static_cast<int>(sigma.size()) != r) throw TensorError("field_permute: wrong size");
  std::vector<Variance> var(r);
  for (int s = 0; s < r; ++s) var[s] = t.variance(sigma[s]);
  TensorFieldExpr out(t.dim(), var);
  std::vector<int> oidx(r), idx(r);
  std::vector<Expr> comp(out.components().size());
  for (std::size_t f = 0; f < comp.size(); ++f) {
    std::size_t rem = f;
    for (int s = r - 1; s >= 0; --s) {
      oidx[s] = static_cast<int>(rem % t.dim());
      rem /= t.dim();
    }
    for (int s = 0; s < r; ++s) idx[sigma[s]] = oidx[s];
    comp[f] = t[idx];
  }
  return TensorFieldExpr(t.dim(), std::move(var), std::move(comp));
}

inline TensorFieldExpr field_permute(const TensorFieldExpr& t, std::initializer_list<int> sigma) {
  return field_permute(t, std::span<const int>(sigma.begin(), sigma.size()));
}

inline TensorFieldExpr field_add(const TensorFieldExpr& a, const TensorFieldExpr& b) {
  if (a.dim() != b.dim() || a.variance() != b.variance())
    throw TensorError("field_add: shape mismatch");
  std::vector<Expr> comp(a.components().size());
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = add(a.components()[i], b.components()[i]);
  return TensorFieldExpr(a.dim(), a.variance(), std::move(comp));
}

inline TensorFieldExpr field_sub(const TensorFieldExpr& a, const TensorFieldExpr& b) {
  if (a.dim() != b.dim() || a.variance() != b.variance())
    throw TensorError("field_sub: shape mismatch");
  std::vector<Expr> comp(a.components().size());
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = sub(a.components()[i], b.components()[i]);
  return TensorFieldExpr(a.dim(), a.variance(), std::move(comp));
}

inline TensorFieldExpr field_scale(const Expr& s, const TensorFieldExpr& a) {
  std::vector<Expr> comp(a.components().size());
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = mul(s, a.components()[i]);
  return TensorFieldExpr(a.dim(), a.variance(), std::move(comp));
}

// Contract `slot` with the (inverse) metric field to flip its variance.
inline TensorFieldExpr field_raise_lower(const TensorFieldExpr& t, int slot,
                                         const TensorFieldExpr& metric_or_inverse) {
  const int r = t.rank();
  if (slot < 0 || slot >= r) throw TensorError("field_raise_lower: invalid slot");
  TensorFieldExpr prod = field_product(metric_or_inverse, t);
  // metric slots are (0,1); contract slot 1 with the target slot, then move
  // the remaining metric slot into the target position.
  TensorFieldExpr contracted = field_contract(prod, 1, 2 + slot);
  // resulting slot order: (metric slot, t-slots without `slot`)
  std::vector<int> sigma(r);
  for (int out_slot = 0, src = 1; out_slot < r; ++out_slot) {
    if (out_slot == slot)
      sigma[out_slot] = 0;
    else
      sigma[out_slot] = src++;
  }
  return field_permute(contracted, sigma);
}

}  // namespace kundt
