#pragma once

// Scalar expression kernel: immutable, hash-consed expression DAGs with
// exact rational constants, symbolic differentiation and pointwise
// evaluation (double path and exact rational path).

#include <boost/functional/hash.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kundt {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& q) { return q.template convert_to<double>(); }

enum class ExprKind : std::uint8_t {
  Constant,
  Var,
  Neg,
  Exp,
  Log,
  Sin,
  Cos,
  Sinh,
  Cosh,
  Sqrt,
  Inverse,
  Add,  // n-ary
  Mul,  // n-ary
  Pow,  // integer exponent
};

class ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : ExprError {
  std::size_t offset;
  ParseError(std::size_t off, const std::string& msg)
      : ExprError("parse error at byte " + std::to_string(off) + ": " + msg), offset(off) {}
};

struct DomainError : ExprError {
  Expr subtree;  // offending subexpression, printable via to_string
  DomainError(std::string msg, Expr where) : ExprError(std::move(msg)), subtree(std::move(where)) {}
};

struct NodeCapError : ExprError {
  using ExprError::ExprError;
};

// Hard cap on unique reachable nodes of any tensor field expression.
inline constexpr std::size_t kExprNodeCap = 1'000'000;

class ExprNode {
 public:
  ExprKind kind;
  Rational value;          // Constant only
  double dval = 0.0;       // cached double of `value`
  int var = -1;            // Var only
  long long expo = 0;      // Pow only
  std::vector<Expr> kids;
  std::size_t hash = 0;

  ExprNode(ExprKind k, Rational v, int vr, long long xp, std::vector<Expr> ch)
      : kind(k), value(std::move(v)), var(vr), expo(xp), kids(std::move(ch)) {
    dval = to_double(value);
    std::size_t h = static_cast<std::size_t>(kind) * 0x9e3779b97f4a7c15ull;
    boost::hash_combine(h, var);
    boost::hash_combine(h, expo);
    if (kind == ExprKind::Constant) boost::hash_combine(h, boost::hash<Rational>{}(value));
    for (const auto& c : kids) boost::hash_combine(h, reinterpret_cast<std::uintptr_t>(c.get()));
    hash = h;
  }

  bool same_shape(const ExprNode& o) const {
    if (kind != o.kind || var != o.var || expo != o.expo || kids.size() != o.kids.size()) return false;
    for (std::size_t i = 0; i < kids.size(); ++i)
      if (kids[i].get() != o.kids[i].get()) return false;
    if (kind == ExprKind::Constant && value != o.value) return false;
    return true;
  }
};

// Global intern pool. Nodes are immutable and shared; structurally equal
// trees are pointer-equal, which keeps derivative closures compact.
class ExprPool {
 public:
  static ExprPool& instance() {
    static ExprPool pool;
    return pool;
  }

  Expr intern(ExprNode&& n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto range = table_.equal_range(n.hash);
    for (auto it = range.first; it != range.second; ++it)
      if (it->second->same_shape(n)) return it->second;
    auto e = std::make_shared<const ExprNode>(std::move(n));
    table_.emplace(e->hash, e);
    return e;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return table_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_multimap<std::size_t, Expr> table_;
};

inline Expr intern(ExprNode&& n) { return ExprPool::instance().intern(std::move(n)); }

inline bool is_const(const Expr& e) { return e->kind == ExprKind::Constant; }
inline bool is_zero(const Expr& e) { return is_const(e) && e->value == 0; }
inline bool is_one(const Expr& e) { return is_const(e) && e->value == 1; }

inline Expr constant(Rational q) {
  return intern(ExprNode(ExprKind::Constant, std::move(q), -1, 0, {}));
}
inline Expr constant(long long n) { return constant(Rational(n)); }
inline Expr zero_expr() { return constant(0); }
inline Expr one_expr() { return constant(1); }

inline Expr variable(int index) {
  if (index < 0) throw ExprError("variable index must be non-negative");
  return intern(ExprNode(ExprKind::Var, Rational(0), index, 0, {}));
}

inline Expr neg(const Expr& e) {
  if (is_const(e)) return constant(-e->value);
  if (e->kind == ExprKind::Neg) return e->kids[0];
  return intern(ExprNode(ExprKind::Neg, Rational(0), -1, 0, {e}));
}

// n-ary sum; flattens nested sums, folds constants, drops zeros.
inline Expr add(std::vector<Expr> terms) {
  std::vector<Expr> out;
  Rational c(0);
  for (auto& t : terms) {
    if (t->kind == ExprKind::Add) {
      for (const auto& k : t->kids) {
        if (is_const(k))
          c += k->value;
        else
          out.push_back(k);
      }
    } else if (is_const(t)) {
      c += t->value;
    } else {
      out.push_back(std::move(t));
    }
  }
  if (c != 0) out.insert(out.begin(), constant(std::move(c)));
  if (out.empty()) return zero_expr();
  if (out.size() == 1) return out[0];
  return intern(ExprNode(ExprKind::Add, Rational(0), -1, 0, std::move(out)));
}
inline Expr add(const Expr& a, const Expr& b) { return add(std::vector<Expr>{a, b}); }
inline Expr sub(const Expr& a, const Expr& b) { return add(a, neg(b)); }

// n-ary product; flattens, folds constants, annihilates on zero.
inline Expr mul(std::vector<Expr> factors) {
  std::vector<Expr> out;
  Rational c(1);
  for (auto& f : factors) {
    if (f->kind == ExprKind::Mul) {
      for (const auto& k : f->kids) {
        if (is_const(k))
          c *= k->value;
        else
          out.push_back(k);
      }
    } else if (is_const(f)) {
      c *= f->value;
    } else {
      out.push_back(std::move(f));
    }
  }
  if (c == 0) return zero_expr();
  if (c != 1) out.insert(out.begin(), constant(std::move(c)));
  if (out.empty()) return one_expr();
  if (out.size() == 1) return out[0];
  return intern(ExprNode(ExprKind::Mul, Rational(0), -1, 0, std::move(out)));
}
inline Expr mul(const Expr& a, const Expr& b) { return mul(std::vector<Expr>{a, b}); }
inline Expr mul(const Expr& a, const Expr& b, const Expr& c) {
  return mul(std::vector<Expr>{a, b, c});
}

inline Rational rational_pow(const Rational& q, long long n) {
  if (n == 0) return Rational(1);
  BigInt num = boost::multiprecision::numerator(q);
  BigInt den = boost::multiprecision::denominator(q);
  unsigned long long m = static_cast<unsigned long long>(n < 0 ? -n : n);
  BigInt pn = boost::multiprecision::pow(num, static_cast<unsigned>(m));
  BigInt pd = boost::multiprecision::pow(den, static_cast<unsigned>(m));
  if (n < 0) std::swap(pn, pd);
  return Rational(pn, pd);
}

inline Expr pow_int(const Expr& base, long long n) {
  if (n == 0) return one_expr();
  if (n == 1) return base;
  if (is_const(base)) {
    if (base->value == 0 && n < 0) throw DomainError("0 raised to a negative power", base);
    return constant(rational_pow(base->value, n));
  }
  if (base->kind == ExprKind::Pow) return pow_int(base->kids[0], base->expo * n);
  return intern(ExprNode(ExprKind::Pow, Rational(0), -1, n, {base}));
}

inline Expr inverse(const Expr& e) {
  if (is_const(e)) {
    if (e->value == 0) throw DomainError("division by constant zero", e);
    return constant(Rational(boost::multiprecision::denominator(e->value),
                             boost::multiprecision::numerator(e->value)));
  }
  if (e->kind == ExprKind::Inverse) return e->kids[0];
  return intern(ExprNode(ExprKind::Inverse, Rational(0), -1, 0, {e}));
}

inline Expr div_expr(const Expr& a, const Expr& b) { return mul(a, inverse(b)); }

inline Expr unary(ExprKind k, const Expr& e) {
  // exact identity folds only
  if (is_const(e)) {
    const Rational& v = e->value;
    switch (k) {
      case ExprKind::Exp:
        if (v == 0) return one_expr();
        break;
      case ExprKind::Log:
        if (v == 1) return zero_expr();
        break;
      case ExprKind::Sin:
      case ExprKind::Sinh:
        if (v == 0) return zero_expr();
        break;
      case ExprKind::Cos:
      case ExprKind::Cosh:
        if (v == 0) return one_expr();
        break;
      case ExprKind::Sqrt:
        if (v == 0) return zero_expr();
        if (v == 1) return one_expr();
        break;
      default:
        break;
    }
  }
  return intern(ExprNode(k, Rational(0), -1, 0, {e}));
}

inline Expr exp_(const Expr& e) { return unary(ExprKind::Exp, e); }
inline Expr log_(const Expr& e) { return unary(ExprKind::Log, e); }
inline Expr sin_(const Expr& e) { return unary(ExprKind::Sin, e); }
inline Expr cos_(const Expr& e) { return unary(ExprKind::Cos, e); }
inline Expr sinh_(const Expr& e) { return unary(ExprKind::Sinh, e); }
inline Expr cosh_(const Expr& e) { return unary(ExprKind::Cosh, e); }
inline Expr sqrt_(const Expr& e) { return unary(ExprKind::Sqrt, e); }

// ---------------------------------------------------------------------------
// Differentiation (exact, with per-call memoization across the shared DAG)

class DiffCache {
 public:
  Expr* find(const ExprNode* n, int v) {
    auto it = map_.find(Key{n, v});
    return it == map_.end() ? nullptr : &it->second;
  }
  void put(const ExprNode* n, int v, Expr d) { map_.emplace(Key{n, v}, std::move(d)); }

 private:
  struct Key {
    const ExprNode* n;
    int v;
    bool operator==(const Key& o) const { return n == o.n && v == o.v; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = std::hash<const void*>{}(k.n);
      boost::hash_combine(h, k.v);
      return h;
    }
  };
  std::unordered_map<Key, Expr, KeyHash> map_;
};

inline Expr diff(const Expr& e, int v, DiffCache& cache) {
  if (Expr* hit = cache.find(e.get(), v)) return *hit;
  Expr d;
  switch (e->kind) {
    case ExprKind::Constant:
      d = zero_expr();
      break;
    case ExprKind::Var:
      d = (e->var == v) ? one_expr() : zero_expr();
      break;
    case ExprKind::Neg:
      d = neg(diff(e->kids[0], v, cache));
      break;
    case ExprKind::Add: {
      std::vector<Expr> terms;
      terms.reserve(e->kids.size());
      for (const auto& k : e->kids) terms.push_back(diff(k, v, cache));
      d = add(std::move(terms));
      break;
    }
    case ExprKind::Mul: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < e->kids.size(); ++i) {
        Expr di = diff(e->kids[i], v, cache);
        if (is_zero(di)) continue;
        std::vector<Expr> factors;
        factors.reserve(e->kids.size());
        for (std::size_t j = 0; j < e->kids.size(); ++j) factors.push_back(i == j ? di : e->kids[j]);
        terms.push_back(mul(std::move(factors)));
      }
      d = add(std::move(terms));
      break;
    }
    case ExprKind::Pow: {
      Expr du = diff(e->kids[0], v, cache);
      d = mul(constant(e->expo), pow_int(e->kids[0], e->expo - 1), du);
      break;
    }
    case ExprKind::Inverse: {
      Expr du = diff(e->kids[0], v, cache);
      d = neg(mul(du, inverse(mul(e->kids[0], e->kids[0]))));
      break;
    }
    case ExprKind::Exp:
      d = mul(e, diff(e->kids[0], v, cache));
      break;
    case ExprKind::Log:
      d = mul(diff(e->kids[0], v, cache), inverse(e->kids[0]));
      break;
    case ExprKind::Sin:
      d = mul(cos_(e->kids[0]), diff(e->kids[0], v, cache));
      break;
    case ExprKind::Cos:
      d = neg(mul(sin_(e->kids[0]), diff(e->kids[0], v, cache)));
      break;
    case ExprKind::Sinh:
      d = mul(cosh_(e->kids[0]), diff(e->kids[0], v, cache));
      break;
    case ExprKind::Cosh:
      d = mul(sinh_(e->kids[0]), diff(e->kids[0], v, cache));
      break;
    case ExprKind::Sqrt:
      d = mul(constant(Rational(1, 2)), diff(e->kids[0], v, cache), inverse(e));
      break;
  }
  cache.put(e.get(), v, d);
  return d;
}

inline Expr diff(const Expr& e, int v) {
  DiffCache cache;
  return diff(e, v, cache);
}

// ---------------------------------------------------------------------------
// Node counting

inline void collect_nodes(const Expr& e, std::unordered_set<const ExprNode*>& seen) {
  if (!seen.insert(e.get()).second) return;
  for (const auto& k : e->kids) collect_nodes(k, seen);
}

inline std::size_t count_nodes(std::span<const Expr> roots) {
  std::unordered_set<const ExprNode*> seen;
  for (const auto& r : roots) collect_nodes(r, seen);
  return seen.size();
}

inline std::size_t count_nodes(const Expr& e) { return count_nodes(std::span<const Expr>(&e, 1)); }

// ---------------------------------------------------------------------------
// Printing

std::string to_string(const Expr& e, std::span<const std::string> coords);

namespace detail {

inline std::string coord_name(int v, std::span<const std::string> coords) {
  if (v >= 0 && static_cast<std::size_t>(v) < coords.size()) return coords[v];
  return "x" + std::to_string(v);
}

inline int print_prec(const ExprNode& n) {
  switch (n.kind) {
    case ExprKind::Add:
      return 1;
    case ExprKind::Mul:
    case ExprKind::Inverse:
      return 2;
    case ExprKind::Neg:
      return 3;
    case ExprKind::Pow:
      return 4;
    default:
      return 5;
  }
}

inline void print_rec(const Expr& e, std::span<const std::string> coords, int parent_prec,
                      std::string& out) {
  const int prec = print_prec(*e);
  const bool parens = prec < parent_prec;
  if (parens) out += '(';
  switch (e->kind) {
    case ExprKind::Constant: {
      const Rational& q = e->value;
      BigInt num = boost::multiprecision::numerator(q);
      BigInt den = boost::multiprecision::denominator(q);
      out += num.str();
      if (den != 1) {
        out += '/';
        out += den.str();
      }
      break;
    }
    case ExprKind::Var:
      out += coord_name(e->var, coords);
      break;
    case ExprKind::Neg:
      out += '-';
      print_rec(e->kids[0], coords, prec + 1, out);
      break;
    case ExprKind::Add:
      for (std::size_t i = 0; i < e->kids.size(); ++i) {
        const Expr& k = e->kids[i];
        if (i == 0) {
          print_rec(k, coords, prec, out);
        } else if (k->kind == ExprKind::Neg) {
          out += " - ";
          print_rec(k->kids[0], coords, prec + 1, out);
        } else {
          out += " + ";
          print_rec(k, coords, prec, out);
        }
      }
      break;
    case ExprKind::Mul:
      for (std::size_t i = 0; i < e->kids.size(); ++i) {
        const Expr& k = e->kids[i];
        if (i == 0) {
          if (k->kind == ExprKind::Inverse) {
            out += "1/";
            print_rec(k->kids[0], coords, prec + 1, out);
          } else {
            print_rec(k, coords, prec + 1, out);
          }
        } else if (k->kind == ExprKind::Inverse) {
          out += '/';
          print_rec(k->kids[0], coords, prec + 1, out);
        } else {
          out += '*';
          print_rec(k, coords, prec + 1, out);
        }
      }
      break;
    case ExprKind::Inverse:
      out += "1/";
      print_rec(e->kids[0], coords, prec + 1, out);
      break;
    case ExprKind::Pow:
      print_rec(e->kids[0], coords, prec + 1, out);
      out += '^';
      out += std::to_string(e->expo);
      break;
    case ExprKind::Exp:
    case ExprKind::Log:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Sinh:
    case ExprKind::Cosh:
    case ExprKind::Sqrt: {
      static const char* names[] = {"exp", "log", "sin", "cos", "sinh", "cosh", "sqrt"};
      out += names[static_cast<int>(e->kind) - static_cast<int>(ExprKind::Exp)];
      out += '(';
      print_rec(e->kids[0], coords, 0, out);
      out += ')';
      break;
    }
  }
  if (parens) out += ')';
}

}  // namespace detail

inline std::string to_string(const Expr& e, std::span<const std::string> coords) {
  std::string out;
  detail::print_rec(e, coords, 0, out);
  return out;
}

inline std::string to_string(const Expr& e) {
  return to_string(e, std::span<const std::string>{});
}

// ---------------------------------------------------------------------------
// Evaluation tape: one pass over the shared DAG in topological order.

class Tape {
 public:
  explicit Tape(std::span<const Expr> roots) { build(roots); }
  explicit Tape(const Expr& root) { build(std::span<const Expr>(&root, 1)); }

  std::size_t size() const { return ops_.size(); }

  // Evaluates every node; `slots` is resized to size(). Root i's value is
  // slots[root_slot(i)].
  void eval(std::span<const double> xs, std::vector<double>& slots) const {
    slots.resize(ops_.size());
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      const TOp& op = ops_[i];
      double r = 0.0;
      switch (op.kind) {
        case ExprKind::Constant:
          r = op.cval;
          break;
        case ExprKind::Var:
          if (op.var < 0 || static_cast<std::size_t>(op.var) >= xs.size())
            throw DomainError("point dimension too small for expression", nodes_[i]);
          r = xs[op.var];
          break;
        case ExprKind::Neg:
          r = -slots[op.a];
          break;
        case ExprKind::Exp:
          r = std::exp(slots[op.a]);
          break;
        case ExprKind::Log: {
          double u = slots[op.a];
          if (!(u > 0.0)) throw DomainError("log of non-positive value", nodes_[i]);
          r = std::log(u);
          break;
        }
        case ExprKind::Sin:
          r = std::sin(slots[op.a]);
          break;
        case ExprKind::Cos:
          r = std::cos(slots[op.a]);
          break;
        case ExprKind::Sinh:
          r = std::sinh(slots[op.a]);
          break;
        case ExprKind::Cosh:
          r = std::cosh(slots[op.a]);
          break;
        case ExprKind::Sqrt: {
          double u = slots[op.a];
          if (u < 0.0) throw DomainError("sqrt of negative value", nodes_[i]);
          r = std::sqrt(u);
          break;
        }
        case ExprKind::Inverse: {
          double u = slots[op.a];
          if (u == 0.0) throw DomainError("division by zero (pole)", nodes_[i]);
          r = 1.0 / u;
          break;
        }
        case ExprKind::Add: {
          double s = 0.0;
          for (int j = 0; j < op.argn; ++j) s += slots[args_[op.argb + j]];
          r = s;
          break;
        }
        case ExprKind::Mul: {
          double p = 1.0;
          for (int j = 0; j < op.argn; ++j) p *= slots[args_[op.argb + j]];
          r = p;
          break;
        }
        case ExprKind::Pow: {
          double u = slots[op.a];
          if (u == 0.0 && op.expo < 0) throw DomainError("zero base with negative power", nodes_[i]);
          r = std::pow(u, static_cast<double>(op.expo));
          break;
        }
      }
      slots[i] = r;
    }
  }

  int root_slot(std::size_t i) const { return roots_[i]; }
  std::size_t root_count() const { return roots_.size(); }

 private:
  struct TOp {
    ExprKind kind;
    int a = -1;
    int argb = 0, argn = 0;
    int var = -1;
    double cval = 0.0;
    long long expo = 0;
  };

  void build(std::span<const Expr> roots) {
    std::unordered_map<const ExprNode*, int> index;
    std::vector<std::pair<Expr, bool>> stack;  // (node, children-done)
    for (const auto& root : roots) {
      if (index.count(root.get())) {
        roots_.push_back(index[root.get()]);
        continue;
      }
      stack.emplace_back(root, false);
      while (!stack.empty()) {
        auto [node, done] = stack.back();
        stack.pop_back();
        if (index.count(node.get())) continue;
        if (!done) {
          stack.emplace_back(node, true);
          for (const auto& k : node->kids)
            if (!index.count(k.get())) stack.emplace_back(k, false);
        } else {
          TOp op;
          op.kind = node->kind;
          op.var = node->var;
          op.cval = node->dval;
          op.expo = node->expo;
          if (node->kind == ExprKind::Add || node->kind == ExprKind::Mul) {
            op.argb = static_cast<int>(args_.size());
            op.argn = static_cast<int>(node->kids.size());
            for (const auto& k : node->kids) args_.push_back(index.at(k.get()));
          } else if (!node->kids.empty()) {
            op.a = index.at(node->kids[0].get());
          }
          index[node.get()] = static_cast<int>(ops_.size());
          ops_.push_back(op);
          nodes_.push_back(node);
        }
      }
      roots_.push_back(index.at(root.get()));
    }
  }

  std::vector<TOp> ops_;
  std::vector<int> args_;
  std::vector<Expr> nodes_;
  std::vector<int> roots_;
};

inline double eval(const Expr& e, std::span<const double> xs) {
  Tape tape(e);
  std::vector<double> slots;
  tape.eval(xs, slots);
  return slots[tape.root_slot(0)];
}

// Exact rational evaluation; nullopt when the tree leaves the rational ring.
inline std::optional<Rational> eval_exact(const Expr& e, std::span<const Rational> xs) {
  switch (e->kind) {
    case ExprKind::Constant:
      return e->value;
    case ExprKind::Var:
      if (e->var < 0 || static_cast<std::size_t>(e->var) >= xs.size())
        throw DomainError("point dimension too small for expression", e);
      return xs[e->var];
    case ExprKind::Neg: {
      auto u = eval_exact(e->kids[0], xs);
      if (!u) return std::nullopt;
      return -*u;
    }
    case ExprKind::Add: {
      Rational s(0);
      for (const auto& k : e->kids) {
        auto u = eval_exact(k, xs);
        if (!u) return std::nullopt;
        s += *u;
      }
      return s;
    }
    case ExprKind::Mul: {
      Rational p(1);
      for (const auto& k : e->kids) {
        auto u = eval_exact(k, xs);
        if (!u) return std::nullopt;
        p *= *u;
      }
      return p;
    }
    case ExprKind::Pow: {
      auto u = eval_exact(e->kids[0], xs);
      if (!u) return std::nullopt;
      if (*u == 0 && e->expo < 0) throw DomainError("zero base with negative power", e);
      return rational_pow(*u, e->expo);
    }
    case ExprKind::Inverse: {
      auto u = eval_exact(e->kids[0], xs);
      if (!u) return std::nullopt;
      if (*u == 0) throw DomainError("division by zero (pole)", e);
      return Rational(boost::multiprecision::denominator(*u), boost::multiprecision::numerator(*u));
    }
    default:
      return std::nullopt;  // transcendental node
  }
}

// ---------------------------------------------------------------------------
// Parser.  Grammar:
//   expr   := term  (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := "-" factor | atom ("^" integer)?
//   atom   := number | ident | ident "(" expr ")" | "(" expr ")"
// Functions: exp log sin cos sinh cosh sqrt.   -x^2 parses as -(x^2).

class ExprParser {
 public:
  ExprParser(std::string_view text, std::span<const std::string> coords)
      : text_(text), coords_(coords) {}

  Expr parse() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError(pos_, "unexpected trailing input");
    return e;
  }

 private:
  std::string_view text_;
  std::span<const std::string> coords_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  bool consume(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  static bool ident_start(unsigned char c) {
    return std::isalpha(c) || c == '_' || c >= 0x80;
  }
  static bool ident_char(unsigned char c) {
    return std::isalnum(c) || c == '_' || c >= 0x80;
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (consume('+'))
        e = add(e, parse_term());
      else if (consume('-'))
        e = sub(e, parse_term());
      else
        return e;
    }
  }

  Expr parse_term() {
    Expr e = parse_factor();
    for (;;) {
      if (consume('*'))
        e = mul(e, parse_factor());
      else if (consume('/'))
        e = div_expr(e, parse_factor());
      else
        return e;
    }
  }

  Expr parse_factor() {
    if (consume('-')) return neg(parse_factor());
    Expr e = parse_atom();
    if (consume('^')) {
      long long n = parse_int_exponent();
      e = pow_int(e, n);
    }
    return e;
  }

  long long parse_int_exponent() {
    skip_ws();
    std::size_t start = pos_;
    bool negative = false;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
      negative = text_[pos_] == '-';
      ++pos_;
    }
    if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
      throw ParseError(pos_, "expected integer exponent");
    long long v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == '.' || ident_start(text_[pos_])))
      throw ParseError(start, "exponent must be an integer literal");
    return negative ? -v : v;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!consume(')')) throw ParseError(pos_, "expected ')'");
      return e;
    }
    if (c == '-') {
      ++pos_;
      return neg(parse_atom());
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (ident_start(static_cast<unsigned char>(c))) return parse_ident();
    throw ParseError(pos_, std::string("unexpected character '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    BigInt int_part = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      int_part = int_part * 10 + (text_[pos_] - '0');
      ++pos_;
    }
    Rational value(int_part);
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      BigInt frac = 0, scale = 1;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        frac = frac * 10 + (text_[pos_] - '0');
        scale *= 10;
        ++pos_;
      }
      value += Rational(frac, scale);
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      bool eneg = false;
      if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
        eneg = text_[pos_] == '-';
        ++pos_;
      }
      if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
        throw ParseError(pos_, "malformed exponent in number literal");
      long long k = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        k = k * 10 + (text_[pos_] - '0');
        ++pos_;
      }
      Rational p = rational_pow(Rational(10), eneg ? -k : k);
      value *= p;
    }
    if (pos_ == start) throw ParseError(start, "malformed number");
    return constant(std::move(value));
  }

  Expr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && ident_char(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    static const std::unordered_map<std::string, ExprKind> functions = {
        {"exp", ExprKind::Exp},   {"log", ExprKind::Log},   {"sin", ExprKind::Sin},
        {"cos", ExprKind::Cos},   {"sinh", ExprKind::Sinh}, {"cosh", ExprKind::Cosh},
        {"sqrt", ExprKind::Sqrt}};
    if (peek('(')) {
      auto fn = functions.find(name);
      if (fn == functions.end()) throw ParseError(start, "unknown function '" + name + "'");
      ++pos_;
      Expr arg = parse_expr();
      if (!consume(')')) throw ParseError(pos_, "expected ')'");
      return unary(fn->second, arg);
    }
    for (std::size_t i = 0; i < coords_.size(); ++i)
      if (coords_[i] == name) return variable(static_cast<int>(i));
    throw ParseError(start, "unknown identifier '" + name + "'");
  }
};

inline Expr parse_expr(std::string_view text, std::span<const std::string> coords) {
  return ExprParser(text, coords).parse();
}

}  // namespace kundt
