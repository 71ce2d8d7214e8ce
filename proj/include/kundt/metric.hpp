#pragma once

// Metric specifications: coordinate chart plus closed-form component
// expressions, the line-based metric file format, and pointwise evaluation.

#include "kundt/expr.hpp"
#include "kundt/tensor.hpp"

#include <Eigen/Dense>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace kundt {

struct Point {
  std::vector<double> x;
  std::optional<std::vector<Rational>> exact;

  Point() = default;
  explicit Point(std::vector<double> xs) : x(std::move(xs)) {}
  Point(std::initializer_list<double> xs) : x(xs) {}
  static Point exact_point(std::vector<Rational> q) {
    Point p;
    p.exact = std::move(q);
    p.x.reserve(p.exact->size());
    for (const auto& r : *p.exact) p.x.push_back(to_double(r));
    return p;
  }
  std::size_t size() const { return x.size(); }
};

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularMetricError : MetricError {
  using MetricError::MetricError;
};

class MetricSpec {
 public:
  MetricSpec() = default;
  MetricSpec(int dim, std::vector<std::string> coords)
      : dim_(dim), coords_(std::move(coords)), comp_(dim * dim, zero_expr()) {
    if (dim_ < 3) throw MetricError("metric dimension must be at least 3");
    if (static_cast<int>(coords_.size()) != dim_) throw MetricError("coords/dim mismatch");
  }

  int dim() const { return dim_; }
  const std::vector<std::string>& coords() const { return coords_; }
  const std::string& signature() const { return signature_; }
  void set_signature(std::string s) { signature_ = std::move(s); }

  const Expr& at(int i, int j) const { return comp_[i * dim_ + j]; }

  void set(int i, int j, const Expr& e) {
    if (i < 0 || j < 0 || i >= dim_ || j >= dim_) throw MetricError("component index out of range");
    comp_[i * dim_ + j] = e;
    comp_[j * dim_ + i] = e;
  }

  int coord_index(const std::string& name) const {
    for (int i = 0; i < dim_; ++i)
      if (coords_[i] == name) return i;
    return -1;
  }

 private:
  int dim_ = 0;
  std::vector<std::string> coords_;
  std::vector<Expr> comp_;
  std::string signature_ = "lorentzian(-,+,...,+)";
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace detail

// Metric file format (UTF-8, line-based, '#' comments):
//   dim = <n>
//   coords = <name> <name> ...
//   g[<i>][<j>] = <expr>     (0-based, i <= j; one triangle)
inline MetricSpec parse_metric(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int dim = -1;
  std::vector<std::string> coords;
  std::optional<MetricSpec> spec;
  std::vector<bool> assigned;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw MetricError("line " + std::to_string(lineno) + ": expected '='");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key == "dim") {
      dim = std::stoi(value);
      if (dim < 3) throw MetricError("dim must be at least 3");
    } else if (key == "coords") {
      std::istringstream cs(value);
      std::string name;
      while (cs >> name) coords.push_back(name);
    } else if (key.size() > 1 && key[0] == 'g') {
      if (!spec) {
        if (dim < 0 || coords.empty())
          throw MetricError("line " + std::to_string(lineno) +
                            ": dim and coords must precede components");
        if (static_cast<int>(coords.size()) != dim)
          throw MetricError("coords count does not match dim");
        spec.emplace(dim, coords);
        assigned.assign(static_cast<std::size_t>(dim) * dim, false);
      }
      int i = -1, j = -1;
      if (std::sscanf(key.c_str(), "g[%d][%d]", &i, &j) != 2)
        throw MetricError("line " + std::to_string(lineno) + ": malformed component key '" + key +
                          "'");
      if (i < 0 || j < 0 || i >= dim || j >= dim)
        throw MetricError("line " + std::to_string(lineno) + ": component index out of range");
      Expr e;
      try {
        e = parse_expr(value, coords);
      } catch (const ParseError& pe) {
        throw MetricError("line " + std::to_string(lineno) + ": " + pe.what());
      }
      int a = std::min(i, j), b = std::max(i, j);
      std::size_t slot = static_cast<std::size_t>(a) * dim + b;
      if (assigned[slot] && spec->at(a, b).get() != e.get())
        throw MetricError("line " + std::to_string(lineno) + ": conflicting symmetric assignment g[" +
                          std::to_string(a) + "][" + std::to_string(b) + "]");
      assigned[slot] = true;
      spec->set(a, b, e);
    } else {
      throw MetricError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!spec) {
    if (dim < 0 || static_cast<int>(coords.size()) != dim)
      throw MetricError("metric file missing dim/coords");
    spec.emplace(dim, coords);
  }
  return *spec;
}

inline std::string serialize_metric(const MetricSpec& m) {
  std::ostringstream out;
  out << "dim = " << m.dim() << "\n";
  out << "coords =";
  for (const auto& c : m.coords()) out << ' ' << c;
  out << "\n";
  for (int i = 0; i < m.dim(); ++i)
    for (int j = i; j < m.dim(); ++j)
      if (!is_zero(m.at(i, j)))
        out << "g[" << i << "][" << j << "] = " << to_string(m.at(i, j), m.coords()) << "\n";
  return out.str();
}

// Evaluates the metric at a point; checks invertibility and Lorentzian
// signature (exactly one negative eigenvalue).
inline MetricAtPoint metric_at_point(const MetricSpec& m, const Point& p) {
  const int d = m.dim();
  if (static_cast<int>(p.size()) != d) throw MetricError("point dimension mismatch");
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = eval(m.at(i, j), p.x);
  double scale = g.cwiseAbs().maxCoeff();
  double det = g.determinant();
  if (scale == 0.0 || std::abs(det) < 1e-12 * std::pow(scale, d))
    throw SingularMetricError("metric is singular at evaluation point");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  int negatives = 0;
  for (int i = 0; i < d; ++i)
    if (es.eigenvalues()[i] < 0) ++negatives;
  if (negatives != 1)
    throw SingularMetricError("metric is not Lorentzian at evaluation point (" +
                              std::to_string(negatives) + " negative eigenvalues)");
  Eigen::MatrixXd gi = g.inverse();
  MetricAtPoint out;
  out.g = TensorValue(d, {Variance::Down, Variance::Down});
  out.ginv = TensorValue(d, {Variance::Up, Variance::Up});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      out.g.at({i, j}) = g(i, j);
      out.ginv.at({i, j}) = gi(i, j);
    }
  out.det = det;
  return out;
}

}  // namespace kundt
