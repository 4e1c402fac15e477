#ifndef PWAVE_FAMILIES_HPP
#define PWAVE_FAMILIES_HPP

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pwave/expr.hpp"
#include "pwave/tensor.hpp"

namespace pwave::families {

enum class Family { M0, M1, M2, M3, M4, M5, M6 };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Reference to a registered scalar function of the point. For a univariate
// entry, deriv is the derivative order to take before evaluating; polynomial
// entries always use deriv == 0 and register their partials as new entries.
struct FuncRef {
  int id = -1;
  int deriv = 0;
};

// coeff * prod coord^exp * prod funcs, the building block of every metric and
// Christoffel component in the catalog.
struct Term {
  double coeff = 1.0;
  std::vector<std::pair<int, int>> monomial;  // (coordinate, exponent)
  std::vector<FuncRef> funcs;
};

// Registry of the family's coefficient functions. Univariate entries evaluate
// an Expr jet at one coordinate; polynomial entries evaluate a Poly on the
// leading coordinates. Partial derivatives of polynomial entries are
// registered on demand, so tables that are still being differentiated must be
// owned exclusively; specs freeze theirs behind a shared const pointer.
class FunctionTable {
 public:
  int add_univariate(expr::Expr f, int arg_coord, std::string name);
  int add_poly(expr::Poly p, std::string name);

  int size() const { return static_cast<int>(entries_.size()); }
  bool is_poly(int id) const;
  int arg_coord(int id) const;
  const std::string& name(int id) const;
  const expr::Expr& univariate(int id) const;
  const expr::Poly& poly(int id) const;

  double eval(const FuncRef& f, std::span<const double> point) const;

  // Registers (memoized) the partial of a polynomial entry; returns -1 when
  // the partial vanishes identically.
  int poly_partial(int id, int coord);

  // Largest coordinate index the entry can depend on.
  int dependence(int id) const;

 private:
  struct Entry {
    std::string name;
    std::optional<expr::Expr> uni;
    int arg = -1;
    std::optional<expr::Poly> poly;
  };
  std::vector<Entry> entries_;
  std::map<std::pair<int, int>, int> partial_memo_;
};

// Finite sum of Terms with exact differentiation and pointwise evaluation.
class TermPoly {
 public:
  TermPoly() = default;
  explicit TermPoly(std::vector<Term> terms) : terms_(std::move(terms)) { normalize(); }

  bool empty() const { return terms_.empty(); }
  const std::vector<Term>& terms() const { return terms_; }

  TermPoly& operator+=(const TermPoly& o);
  TermPoly operator*(const TermPoly& o) const;
  TermPoly scaled(double s) const;

  // Exact d/d coord; polynomial partials are registered in the given table.
  TermPoly d(int coord, FunctionTable& table) const;

  double eval(std::span<const double> point, const FunctionTable& table) const;

  // Largest coordinate index the value can depend on; -1 for constants.
  int dependence(const FunctionTable& table) const;

  // Merges like terms and drops exact zeros.
  void normalize();

 private:
  std::vector<Term> terms_;
};

// Pointwise-exact Christoffel catalog: entries(i,j,k) carries Gamma_ij^k as a
// TermPoly; mirrored storage keeps (i,j) and (j,i) both present.
class TermChristoffel {
 public:
  TermChristoffel() = default;
  explicit TermChristoffel(int dim) : dim_(dim) {}

  int dim() const { return dim_; }

  void add(int i, int j, int k, Term t);         // mirrors automatically
  void add(int i, int j, int k, TermPoly poly);  // mirrors automatically
  const TermPoly* find(int i, int j, int k) const;

  struct Entry {
    int i, j, k;
    const TermPoly* poly;
  };
  std::vector<Entry> entries() const;

  // Gamma_ij^k for all i,j at fixed output k; dense dim x dim matrix.
  Eigen::MatrixXd eval_output(int k, std::span<const double> point,
                              const FunctionTable& table) const;

 private:
  int dim_ = 0;
  std::map<std::array<int, 3>, TermPoly> map_;
};

// Metric and its inverse as symbolic fields.
struct SymbolicMetric {
  int dim = 0;
  std::map<std::array<int, 2>, TermPoly> g;
  std::map<std::array<int, 2>, TermPoly> ginv;
};

struct ManifoldSpec {
  Family family = Family::M1;
  int dim = 0;
  int p = 0;  // M2/M3/M5 size parameter
  int k = 0;  // M0 size parameter
  int s = 0;  // M6 size parameter
  std::pair<int, int> signature;  // (negative, positive) eigenvalue counts
  std::vector<std::string> coords;
  std::shared_ptr<const FunctionTable> table;
  TermChristoffel christoffel;
  SymbolicMetric metric;
  std::vector<std::string> warnings;  // recorded hypothesis violations

  std::vector<expr::Expr> funcs;   // univariate data (meaning varies by family)
  std::vector<expr::Poly> psi;     // M2: upper triangle row-major
  std::optional<expr::Poly> poly_f;  // M3 potential
};

ManifoldSpec build_m0(int k, std::vector<expr::Expr> f);
ManifoldSpec build_m1(expr::Expr f);
ManifoldSpec build_m2(int p, std::vector<expr::Poly> psi_upper);
ManifoldSpec build_m3(int p, expr::Poly f);
ManifoldSpec build_m4(expr::Expr f);
ManifoldSpec build_m5(int p, expr::Expr f);
ManifoldSpec build_m6(int s, std::vector<expr::Expr> f);

// {"family":"M1","f":"y^2"} and friends; ConfigError on anything malformed.
ManifoldSpec build_from_config(const nlohmann::json& config);
ManifoldSpec build_from_file(const std::string& path);

tensor::MetricAtPoint metric_at(const ManifoldSpec& m, std::span<const double> point);

// Gamma_ij^k as a rank-3 tensor, slots (lower, lower, upper).
tensor::Tensor christoffel_at(const ManifoldSpec& m, std::span<const double> point);

}  // namespace pwave::families

#endif
