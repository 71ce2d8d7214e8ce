#pragma once

// Built-in metric + congruence fixtures with reference properties. Every
// entry carries a designated null field k, a safe evaluation box and the
// expected classification results, which the test suite re-derives.

#include "kundt/expr.hpp"
#include "kundt/geometry.hpp"
#include "kundt/metric.hpp"
#include "kundt/tensor_field.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <random>

namespace kundt {

struct CatalogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReferenceProperty {
  std::string key;
  std::string expected;
  std::string source;  // "by-construction" or "pipeline-audit"
};

struct CatalogEntry {
  std::string name;
  std::string description;
  MetricSpec metric;
  std::vector<Expr> k_components;                  // designated congruence field
  std::vector<std::pair<double, double>> box;      // safe coordinate ranges
  std::vector<ReferenceProperty> expected;

  TensorFieldExpr k_field() const {
    TensorFieldExpr f(metric.dim(), {Variance::Up});
    for (int i = 0; i < metric.dim(); ++i) f.set({i}, k_components[i]);
    return f;
  }

  Point random_point(std::mt19937_64& rng) const {
    Point p;
    for (const auto& [lo, hi] : box) {
      std::uniform_real_distribution<double> dist(lo, hi);
      p.x.push_back(dist(rng));
    }
    return p;
  }

  Point center_point() const {
    Point p;
    for (const auto& [lo, hi] : box) p.x.push_back(0.5 * (lo + hi));
    return p;
  }
};

namespace detail {

inline CatalogEntry make_entry(std::string name, std::string description, int dim,
                               std::vector<std::string> coords,
                               std::vector<std::tuple<int, int, std::string>> components,
                               std::vector<std::string> k_exprs,
                               std::vector<std::pair<double, double>> box,
                               std::vector<ReferenceProperty> expected) {
  CatalogEntry e;
  e.name = std::move(name);
  e.description = std::move(description);
  e.metric = MetricSpec(dim, coords);
  for (const auto& [i, j, text] : components) e.metric.set(i, j, parse_expr(text, coords));
  for (const auto& text : k_exprs) e.k_components.push_back(parse_expr(text, coords));
  e.box = std::move(box);
  e.expected = std::move(expected);
  return e;
}

inline std::map<std::string, CatalogEntry> build_catalog() {
  std::map<std::string, CatalogEntry> cat;
  auto put = [&cat](CatalogEntry e) { cat.emplace(e.name, std::move(e)); };

  put(make_entry("minkowski3", "3D Minkowski space, chart (t,x,y)", 3, {"t", "x", "y"},
                 {{0, 0, "-1"}, {1, 1, "1"}, {2, 2, "1"}}, {"1", "1", "0"},
                 {{-2, 2}, {-2, 2}, {-2, 2}},
                 {{"congruence", "Kundt", "by-construction"},
                  {"curvature", "zero", "by-construction"}}));

  put(make_entry("minkowski4", "4D Minkowski space, chart (t,x,y,z)", 4, {"t", "x", "y", "z"},
                 {{0, 0, "-1"}, {1, 1, "1"}, {2, 2, "1"}, {3, 3, "1"}}, {"1", "1", "0", "0"},
                 {{-2, 2}, {-2, 2}, {-2, 2}, {-2, 2}},
                 {{"congruence", "Kundt", "by-construction"},
                  {"curvature", "zero", "by-construction"}}));

  // vacuum pp-wave: g = 2 du dv + (x^2-y^2) du^2 + dx^2 + dy^2, k = d_v
  put(make_entry("ppwave4", "vacuum pp-wave, H = x^2 - y^2", 4, {"u", "v", "x", "y"},
                 {{0, 0, "x^2 - y^2"}, {0, 1, "1"}, {2, 2, "1"}, {3, 3, "1"}},
                 {"0", "1", "0", "0"}, {{-2, 2}, {-2, 2}, {0.5, 2}, {-2, -0.5}},
                 {{"congruence", "Kundt", "pipeline-audit"},
                  {"weyl_bo", "-2", "pipeline-audit"},
                  {"ricci", "zero", "pipeline-audit"}}));

  // 3D pp-wave with matter: S is type N w.r.t. d_v
  put(make_entry("ppwave3", "3D pp-wave, H = x^2 (1+u)", 3, {"u", "v", "x"},
                 {{0, 0, "x^2*(1+u)"}, {0, 1, "1"}, {2, 2, "1"}}, {"0", "1", "0"},
                 {{-0.5, 2}, {-2, 2}, {0.5, 2}},
                 {{"congruence", "Kundt", "pipeline-audit"},
                  {"s_bo", "-2", "pipeline-audit"}}));

  // conformally flat pp-wave with matter: C = 0, S type N w.r.t. d_v
  put(make_entry("ppwavecf4", "conformally flat pp-wave, H = (x^2+y^2)(1+u)/2", 4,
                 {"u", "v", "x", "y"},
                 {{0, 0, "(x^2 + y^2)*(1+u)/2"}, {0, 1, "1"}, {2, 2, "1"}, {3, 3, "1"}},
                 {"0", "1", "0", "0"}, {{-0.5, 2}, {-2, 2}, {0.5, 2}, {0.5, 2}},
                 {{"congruence", "Kundt", "pipeline-audit"},
                  {"weyl", "zero", "pipeline-audit"},
                  {"s_bo", "-2", "pipeline-audit"}}));

  // Kundt gyraton: g = 2du(dv + H du + W dx) + dx^2 + dy^2; Ricci and Weyl
  // of genuine type III w.r.t. d_v
  put(make_entry("kundt4", "Kundt gyraton, H = (x^2-y^2)/2 + u x, W = x*y", 4,
                 {"u", "v", "x", "y"},
                 {{0, 0, "x^2 - y^2 + 2*u*x"}, {0, 1, "1"}, {0, 2, "x*y"}, {2, 2, "1"},
                  {3, 3, "1"}},
                 {"0", "1", "0", "0"}, {{-2, 2}, {-2, 2}, {0.5, 2}, {0.5, 2}},
                 {{"congruence", "Kundt", "pipeline-audit"},
                  {"s_bo", "-1", "pipeline-audit"},
                  {"weyl_bo", "-1", "pipeline-audit"}}));

  // Kundt wave over the hyperbolic plane: S of generic type II (dim E = 2)
  put(make_entry("kundtgen4", "Kundt wave on the hyperbolic plane, H = (x^2+y^2)/2", 4,
                 {"u", "v", "x", "y"},
                 {{0, 0, "x^2 + y^2"}, {0, 1, "1"}, {2, 2, "1/y^2"}, {3, 3, "1/y^2"}},
                 {"0", "1", "0", "0"}, {{-1, 1}, {-1, 1}, {-1, 1}, {0.5, 2}},
                 {{"congruence", "Kundt", "pipeline-audit"},
                  {"s_generic_type_ii", "true", "pipeline-audit"}}));

  put(make_entry("schwarzschild", "Schwarzschild exterior, M = 1", 4, {"t", "r", "th", "ph"},
                 {{0, 0, "-(1 - 2/r)"},
                  {1, 1, "1/(1 - 2/r)"},
                  {2, 2, "r^2"},
                  {3, 3, "r^2*sin(th)^2"}},
                 {"1/(1 - 2/r)", "1", "0", "0"},
                 {{-1, 1}, {2.5, 10}, {0.7, 2.4}, {-3, 3}},
                 {{"congruence", "Robinson-Trautman", "pipeline-audit"},
                  {"ricci", "zero", "pipeline-audit"},
                  {"weyl_bo", "0", "pipeline-audit"}}));

  // warped product dx^2 + f(x) (3D Minkowski), f = 1 + e^{2x}; S is the
  // tachyonic form lambda (uu - h/3) with u = d_x, and C = 0
  put(make_entry("warped4", "warped product dx^2 + (1+e^(2x)) eta_3", 4, {"x", "t", "y", "z"},
                 {{0, 0, "1"},
                  {1, 1, "-(1 + exp(2*x))"},
                  {2, 2, "1 + exp(2*x)"},
                  {3, 3, "1 + exp(2*x)"}},
                 {"0", "1", "1", "0"}, {{-1, 1}, {-2, 2}, {-2, 2}, {-2, 2}},
                 {{"weyl", "zero", "pipeline-audit"},
                  {"s_tachyonic", "true", "pipeline-audit"},
                  {"congruence", "Kundt", "pipeline-audit"}}));

  // conformally flat with generic (perfect-fluid type) S: g = e^{2t} eta
  put(make_entry("confflat4", "conformally flat e^(2t) eta", 4, {"t", "x", "y", "z"},
                 {{0, 0, "-exp(2*t)"},
                  {1, 1, "exp(2*t)"},
                  {2, 2, "exp(2*t)"},
                  {3, 3, "exp(2*t)"}},
                 {"1", "1", "0", "0"}, {{-1, 1}, {-1, 1}, {-1, 1}, {-1, 1}},
                 {{"weyl", "zero", "pipeline-audit"},
                  {"s_nonzero", "true", "pipeline-audit"}}));

  return cat;
}

}  // namespace detail

class Catalog {
 public:
  static const Catalog& instance() {
    static Catalog cat;
    return cat;
  }

  const CatalogEntry& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw CatalogError("unknown catalog metric '" + name + "'");
    return it->second;
  }

  std::vector<std::string> list() const {
    std::vector<std::string> names;
    for (const auto& [name, entry] : entries_) names.push_back(name);
    return names;
  }

  // One shared curvature bundle per entry; bundles are immutable.
  std::shared_ptr<const CurvatureBundle> bundle(const std::string& name) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = bundles_.find(name);
    if (it != bundles_.end()) return it->second;
    auto b = std::make_shared<CurvatureBundle>(get(name).metric);
    bundles_.emplace(name, b);
    return b;
  }

 private:
  Catalog() : entries_(detail::build_catalog()) {}
  std::map<std::string, CatalogEntry> entries_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::shared_ptr<const CurvatureBundle>> bundles_;
};

}  // namespace kundt
