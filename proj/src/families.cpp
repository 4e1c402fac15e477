#include "pwave/families.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pwave::families {

std::string family_name(Family f) {
  switch (f) {
    case Family::M0: return "M0";
    case Family::M1: return "M1";
    case Family::M2: return "M2";
    case Family::M3: return "M3";
    case Family::M4: return "M4";
    case Family::M5: return "M5";
    case Family::M6: return "M6";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  for (Family f : {Family::M0, Family::M1, Family::M2, Family::M3, Family::M4,
                   Family::M5, Family::M6})
    if (family_name(f) == name) return f;
  throw ConfigError("unknown family '" + name + "'");
}

// ---------------------------------------------------------------------------
// FunctionTable

int FunctionTable::add_univariate(expr::Expr f, int arg_coord, std::string name) {
  Entry e;
  e.name = std::move(name);
  e.uni = std::move(f);
  e.arg = arg_coord;
  entries_.push_back(std::move(e));
  return static_cast<int>(entries_.size()) - 1;
}

int FunctionTable::add_poly(expr::Poly p, std::string name) {
  Entry e;
  e.name = std::move(name);
  e.poly = std::move(p);
  entries_.push_back(std::move(e));
  return static_cast<int>(entries_.size()) - 1;
}

bool FunctionTable::is_poly(int id) const {
  return entries_.at(static_cast<std::size_t>(id)).poly.has_value();
}

int FunctionTable::arg_coord(int id) const {
  return entries_.at(static_cast<std::size_t>(id)).arg;
}

const std::string& FunctionTable::name(int id) const {
  return entries_.at(static_cast<std::size_t>(id)).name;
}

const expr::Expr& FunctionTable::univariate(int id) const {
  return *entries_.at(static_cast<std::size_t>(id)).uni;
}

const expr::Poly& FunctionTable::poly(int id) const {
  return *entries_.at(static_cast<std::size_t>(id)).poly;
}

double FunctionTable::eval(const FuncRef& f, std::span<const double> point) const {
  const Entry& e = entries_.at(static_cast<std::size_t>(f.id));
  if (e.poly) {
    if (f.deriv != 0) throw DimError("polynomial FuncRef must carry deriv 0");
    return e.poly->eval(point);
  }
  const double x = point[static_cast<std::size_t>(e.arg)];
  return e.uni->at(x, f.deriv).derivative(f.deriv);
}

int FunctionTable::poly_partial(int id, int coord) {
  const auto key = std::make_pair(id, coord);
  if (auto it = partial_memo_.find(key); it != partial_memo_.end()) return it->second;
  const Entry& e = entries_.at(static_cast<std::size_t>(id));
  if (!e.poly) throw DimError("poly_partial on a univariate entry");
  int result = -1;
  if (coord < e.poly->nvars()) {
    expr::Poly d = e.poly->partial(coord);
    if (!d.is_zero())
      result = add_poly(std::move(d), e.name + "_" + std::to_string(coord + 1));
  }
  partial_memo_[key] = result;
  return result;
}

int FunctionTable::dependence(int id) const {
  const Entry& e = entries_.at(static_cast<std::size_t>(id));
  if (e.poly) {
    int dep = -1;
    for (auto& [expo, c] : e.poly->terms()) {
      (void)c;
      for (int v = 0; v < static_cast<int>(expo.size()); ++v)
        if (expo[static_cast<std::size_t>(v)] > 0) dep = std::max(dep, v);
    }
    return dep;
  }
  return e.uni->uses_variable() ? e.arg : -1;
}

// ---------------------------------------------------------------------------
// TermPoly

namespace {

void canonicalize(Term& t) {
  std::sort(t.monomial.begin(), t.monomial.end());
  std::vector<std::pair<int, int>> merged;
  for (auto& [c, e] : t.monomial) {
    if (e == 0) continue;
    if (!merged.empty() && merged.back().first == c)
      merged.back().second += e;
    else
      merged.emplace_back(c, e);
  }
  t.monomial = std::move(merged);
  std::sort(t.funcs.begin(), t.funcs.end(),
            [](const FuncRef& a, const FuncRef& b) {
              return std::tie(a.id, a.deriv) < std::tie(b.id, b.deriv);
            });
}

bool same_shape(const Term& a, const Term& b) {
  if (a.monomial != b.monomial) return false;
  if (a.funcs.size() != b.funcs.size()) return false;
  for (std::size_t i = 0; i < a.funcs.size(); ++i)
    if (a.funcs[i].id != b.funcs[i].id || a.funcs[i].deriv != b.funcs[i].deriv)
      return false;
  return true;
}

bool shape_less(const Term& a, const Term& b) {
  if (a.monomial != b.monomial) return a.monomial < b.monomial;
  auto key = [](const FuncRef& f) { return std::make_pair(f.id, f.deriv); };
  return std::lexicographical_compare(
      a.funcs.begin(), a.funcs.end(), b.funcs.begin(), b.funcs.end(),
      [&](const FuncRef& x, const FuncRef& y) { return key(x) < key(y); });
}

}  // namespace

void TermPoly::normalize() {
  for (Term& t : terms_) canonicalize(t);
  std::sort(terms_.begin(), terms_.end(), shape_less);
  std::vector<Term> merged;
  for (Term& t : terms_) {
    if (!merged.empty() && same_shape(merged.back(), t))
      merged.back().coeff += t.coeff;
    else
      merged.push_back(std::move(t));
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const Term& t) { return t.coeff == 0.0; }),
               merged.end());
  terms_ = std::move(merged);
}

TermPoly& TermPoly::operator+=(const TermPoly& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  normalize();
  return *this;
}

TermPoly TermPoly::operator*(const TermPoly& o) const {
  std::vector<Term> out;
  for (const Term& a : terms_)
    for (const Term& b : o.terms_) {
      Term t;
      t.coeff = a.coeff * b.coeff;
      t.monomial = a.monomial;
      t.monomial.insert(t.monomial.end(), b.monomial.begin(), b.monomial.end());
      t.funcs = a.funcs;
      t.funcs.insert(t.funcs.end(), b.funcs.begin(), b.funcs.end());
      out.push_back(std::move(t));
    }
  return TermPoly(std::move(out));
}

TermPoly TermPoly::scaled(double s) const {
  std::vector<Term> out = terms_;
  for (Term& t : out) t.coeff *= s;
  return TermPoly(std::move(out));
}

TermPoly TermPoly::d(int coord, FunctionTable& table) const {
  std::vector<Term> out;
  for (const Term& t : terms_) {
    // monomial factor
    for (std::size_t mi = 0; mi < t.monomial.size(); ++mi) {
      auto [c, e] = t.monomial[mi];
      if (c != coord || e == 0) continue;
      Term dt = t;
      dt.coeff *= e;
      dt.monomial[mi].second = e - 1;
      out.push_back(std::move(dt));
    }
    // function factors
    for (std::size_t fi = 0; fi < t.funcs.size(); ++fi) {
      const FuncRef& f = t.funcs[fi];
      if (table.is_poly(f.id)) {
        int pid = table.poly_partial(f.id, coord);
        if (pid < 0) continue;
        Term dt = t;
        dt.funcs[fi] = FuncRef{pid, 0};
        out.push_back(std::move(dt));
      } else {
        if (table.arg_coord(f.id) != coord) continue;
        Term dt = t;
        dt.funcs[fi].deriv = f.deriv + 1;
        out.push_back(std::move(dt));
      }
    }
  }
  return TermPoly(std::move(out));
}

double TermPoly::eval(std::span<const double> point, const FunctionTable& table) const {
  double s = 0.0;
  for (const Term& t : terms_) {
    double v = t.coeff;
    for (auto& [c, e] : t.monomial)
      for (int r = 0; r < e; ++r) v *= point[static_cast<std::size_t>(c)];
    for (const FuncRef& f : t.funcs) v *= table.eval(f, point);
    s += v;
  }
  return s;
}

int TermPoly::dependence(const FunctionTable& table) const {
  int dep = -1;
  for (const Term& t : terms_) {
    for (auto& [c, e] : t.monomial)
      if (e > 0) dep = std::max(dep, c);
    for (const FuncRef& f : t.funcs) dep = std::max(dep, table.dependence(f.id));
  }
  return dep;
}

// ---------------------------------------------------------------------------
// TermChristoffel

void TermChristoffel::add(int i, int j, int k, Term t) {
  add(i, j, k, TermPoly({std::move(t)}));
}

void TermChristoffel::add(int i, int j, int k, TermPoly poly) {
  if (poly.empty()) return;
  map_[{k, i, j}] += poly;
  if (i != j) map_[{k, j, i}] += poly;
}

const TermPoly* TermChristoffel::find(int i, int j, int k) const {
  auto it = map_.find({k, i, j});
  return it == map_.end() ? nullptr : &it->second;
}

std::vector<TermChristoffel::Entry> TermChristoffel::entries() const {
  std::vector<Entry> out;
  out.reserve(map_.size());
  for (auto& [key, poly] : map_) out.push_back({key[1], key[2], key[0], &poly});
  return out;
}

Eigen::MatrixXd TermChristoffel::eval_output(int k, std::span<const double> point,
                                             const FunctionTable& table) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
  auto lo = map_.lower_bound({k, 0, 0});
  auto hi = map_.lower_bound({k + 1, 0, 0});
  for (auto it = lo; it != hi; ++it)
    out(it->first[1], it->first[2]) = it->second.eval(point, table);
  return out;
}

// ---------------------------------------------------------------------------
// Shared builder helpers

namespace {

Term term1(double coeff) {
  Term t;
  t.coeff = coeff;
  return t;
}

Term term_mono(double coeff, std::initializer_list<std::pair<int, int>> mono) {
  Term t;
  t.coeff = coeff;
  t.monomial = mono;
  return t;
}

Term term_func(double coeff, FuncRef f) {
  Term t;
  t.coeff = coeff;
  t.funcs = {f};
  return t;
}

Term term_mono_func(double coeff, std::initializer_list<std::pair<int, int>> mono, FuncRef f) {
  Term t;
  t.coeff = coeff;
  t.monomial = mono;
  t.funcs = {f};
  return t;
}

void set_metric(SymbolicMetric& m, int i, int j, TermPoly p) {
  if (p.empty()) return;
  m.g[{i, j}] += p;
  if (i != j) m.g[{j, i}] += p;
}

void set_ginv(SymbolicMetric& m, int i, int j, TermPoly p) {
  if (p.empty()) return;
  m.ginv[{i, j}] += p;
  if (i != j) m.ginv[{j, i}] += p;
}

TermPoly one() { return TermPoly({term1(1.0)}); }

// Sampled scalar hypothesis sweep over a coordinate range.
bool everywhere_positive(const expr::Expr& f, int deriv, double lo, double hi) {
  for (int i = 0; i <= 40; ++i) {
    const double x = lo + (hi - lo) * i / 40.0;
    if (!(f.at(x, deriv).derivative(deriv) > 0.0)) return false;
  }
  return true;
}

bool somewhere_zero(const expr::Expr& f, int deriv, double lo, double hi) {
  for (int i = 0; i <= 40; ++i) {
    const double x = lo + (hi - lo) * i / 40.0;
    if (std::abs(f.at(x, deriv).derivative(deriv)) < 1e-12) return true;
  }
  return false;
}

// The M0 construction also underlies M1; the z-coefficient functions are
// general Expr data in y.
ManifoldSpec build_m0_core(Family tag, int k, std::vector<expr::Expr> f) {
  if (k < 0) throw ConfigError("M0 needs k >= 0");
  if (static_cast<int>(f.size()) != k + 1)
    throw ConfigError("M0 needs k+1 coefficient functions f0..fk");

  ManifoldSpec m;
  m.family = tag;
  m.k = k;
  m.dim = 4 + k;
  m.signature = {2, 2 + k};

  const int X = 0, Y = 1;
  const auto Z = [&](int i) { return 1 + i; };  // z_i for i = 1..k
  const int YT = k + 2, XT = k + 3;

  m.coords = {"x", "y"};
  for (int i = 1; i <= k; ++i) m.coords.push_back("z" + std::to_string(i));
  m.coords.push_back("yt");
  m.coords.push_back("xt");

  FunctionTable table;
  std::vector<int> fid(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i)
    fid[static_cast<std::size_t>(i)] =
        table.add_univariate(f[static_cast<std::size_t>(i)], Y, "f" + std::to_string(i));

  TermChristoffel gamma(m.dim);
  // nabla_x dx = {f0' + sum f_i' z_i} dyt + sum f_i dz_i
  TermPoly dF;  // f0' + sum f_i' z_i
  dF += TermPoly({term_func(1.0, {fid[0], 1})});
  for (int i = 1; i <= k; ++i)
    dF += TermPoly({term_mono_func(1.0, {{Z(i), 1}}, {fid[static_cast<std::size_t>(i)], 1})});
  gamma.add(X, X, YT, dF);
  for (int i = 1; i <= k; ++i)
    gamma.add(X, X, Z(i), TermPoly({term_func(1.0, {fid[static_cast<std::size_t>(i)], 0})}));
  // nabla_y dx = -{f0' + sum f_i' z_i} dxt
  gamma.add(X, Y, XT, dF.scaled(-1.0));
  // nabla_{z_i} dx = -f_i dxt
  for (int i = 1; i <= k; ++i)
    gamma.add(X, Z(i), XT, TermPoly({term_func(-1.0, {fid[static_cast<std::size_t>(i)], 0})}));
  m.christoffel = gamma;

  SymbolicMetric sm;
  sm.dim = m.dim;
  TermPoly gxx;  // -2 f0 - 2 sum f_i z_i
  gxx += TermPoly({term_func(-2.0, {fid[0], 0})});
  for (int i = 1; i <= k; ++i)
    gxx += TermPoly({term_mono_func(-2.0, {{Z(i), 1}}, {fid[static_cast<std::size_t>(i)], 0})});
  set_metric(sm, X, X, gxx);
  set_metric(sm, X, XT, one());
  set_metric(sm, Y, YT, one());
  for (int i = 1; i <= k; ++i) set_metric(sm, Z(i), Z(i), one());

  set_ginv(sm, X, XT, one());
  set_ginv(sm, Y, YT, one());
  for (int i = 1; i <= k; ++i) set_ginv(sm, Z(i), Z(i), one());
  set_ginv(sm, XT, XT, gxx.scaled(-1.0));  // 2F
  m.metric = std::move(sm);

  m.funcs = std::move(f);
  m.table = std::make_shared<const FunctionTable>(std::move(table));
  return m;
}

// Shared core for the balanced-signature pair M2/M3: psi is the full p x p
// symmetric matrix of polynomial entries in x_1..x_p.
ManifoldSpec build_m2_core(Family tag, int p, std::vector<std::vector<expr::Poly>> psi) {
  if (p < 2) throw ConfigError("M2/M3 need p >= 2");

  ManifoldSpec m;
  m.family = tag;
  m.p = p;
  m.dim = 2 * p;
  m.signature = {p, p};
  for (int i = 1; i <= p; ++i) m.coords.push_back("x" + std::to_string(i));
  for (int i = 1; i <= p; ++i) m.coords.push_back("y" + std::to_string(i));

  FunctionTable table;
  std::vector<std::vector<int>> pid(static_cast<std::size_t>(p),
                                    std::vector<int>(static_cast<std::size_t>(p), -1));
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      const auto& q = psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (q.is_zero()) continue;
      int id = table.add_poly(q, "psi" + std::to_string(i + 1) + std::to_string(j + 1));
      pid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = id;
      pid[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = id;
    }

  const auto partial = [&](int i, int j, int c) -> int {
    int id = pid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return id < 0 ? -1 : table.poly_partial(id, c);
  };

  TermChristoffel gamma(m.dim);
  // Gamma_{x_i x_j}^{y_k} = (d_j psi_ik + d_i psi_jk - d_k psi_ij) / 2
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j)
      for (int k = 0; k < p; ++k) {
        TermPoly sum;
        if (int id = partial(i, k, j); id >= 0)
          sum += TermPoly({term_func(0.5, {id, 0})});
        if (int id = partial(j, k, i); id >= 0)
          sum += TermPoly({term_func(0.5, {id, 0})});
        if (int id = partial(i, j, k); id >= 0)
          sum += TermPoly({term_func(-0.5, {id, 0})});
        gamma.add(i, j, p + k, sum);
      }
  m.christoffel = gamma;

  SymbolicMetric sm;
  sm.dim = m.dim;
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      int id = pid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (id >= 0) set_metric(sm, i, j, TermPoly({term_func(1.0, {id, 0})}));
    }
  for (int i = 0; i < p; ++i) set_metric(sm, i, p + i, one());
  // inverse: [[0, I], [I, -psi]]
  for (int i = 0; i < p; ++i) set_ginv(sm, i, p + i, one());
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      int id = pid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (id >= 0) set_ginv(sm, p + i, p + j, TermPoly({term_func(-1.0, {id, 0})}));
    }
  m.metric = std::move(sm);

  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j)
      m.psi.push_back(psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  m.table = std::make_shared<const FunctionTable>(std::move(table));
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Family builders

ManifoldSpec build_m0(int k, std::vector<expr::Expr> f) {
  return build_m0_core(Family::M0, k, std::move(f));
}

ManifoldSpec build_m1(expr::Expr f) {
  std::vector<expr::Expr> data;
  data.push_back(expr::parse("0", f.variable()));
  data.push_back(expr::parse(f.variable(), f.variable()));
  data.push_back(f);
  ManifoldSpec m = build_m0_core(Family::M1, 2, std::move(data));
  m.funcs = {std::move(f)};
  if (!everywhere_positive(m.funcs[0], 2, -2.0, 2.0))
    m.warnings.push_back(
        "f'' is not positive throughout [-2,2]; normalized-basis and 0-model "
        "routines require f''(y) > 0 at their basepoint");
  return m;
}

ManifoldSpec build_m2(int p, std::vector<expr::Poly> psi_upper) {
  const std::size_t want = static_cast<std::size_t>(p) * (p + 1) / 2;
  if (psi_upper.size() != want)
    throw ConfigError("M2 needs p(p+1)/2 upper-triangle entries for psi");
  std::vector<std::vector<expr::Poly>> psi(
      static_cast<std::size_t>(p),
      std::vector<expr::Poly>(static_cast<std::size_t>(p), expr::Poly(p)));
  std::size_t at = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = psi_upper[at];
      psi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = psi_upper[at];
      ++at;
    }
  return build_m2_core(Family::M2, p, std::move(psi));
}

ManifoldSpec build_m3(int p, expr::Poly f) {
  if (f.nvars() != p) throw ConfigError("M3 potential must use exactly p variables");
  std::vector<expr::Poly> grad;
  for (int i = 0; i < p; ++i) grad.push_back(f.partial(i));
  std::vector<std::vector<expr::Poly>> psi(
      static_cast<std::size_t>(p),
      std::vector<expr::Poly>(static_cast<std::size_t>(p), expr::Poly(p)));
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          grad[static_cast<std::size_t>(i)] * grad[static_cast<std::size_t>(j)];
  ManifoldSpec m = build_m2_core(Family::M3, p, std::move(psi));
  m.family = Family::M3;
  m.poly_f = std::move(f);

  // Hessian at the origin decides which half of the dichotomy applies there.
  Eigen::MatrixXd h(p, p);
  std::vector<double> origin(static_cast<std::size_t>(p), 0.0);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      h(i, j) = m.poly_f->partial(i).partial(j).eval(origin);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const double lead = es.eigenvalues().cwiseAbs().maxCoeff();
  for (int i = 0; i < p; ++i)
    if (lead == 0.0 || std::abs(es.eigenvalues()[i]) < 1e-10 * lead) {
      m.warnings.push_back(
          "Hessian of f is degenerate at the origin; spectral dichotomy "
          "statements assume a definite or nondegenerate Hessian");
      break;
    }
  return m;
}

ManifoldSpec build_m4(expr::Expr f) {
  ManifoldSpec m;
  m.family = Family::M4;
  m.dim = 4;
  m.signature = {2, 2};
  m.coords = {"x1", "x2", "y1", "y2"};

  const int X1 = 0, X2 = 1, Y1 = 2, Y2 = 3;
  FunctionTable table;
  const int fid = table.add_univariate(f, X2, "f");

  TermChristoffel gamma(m.dim);
  gamma.add(X1, X1, Y2, TermPoly({term_func(1.0, {fid, 1})}));
  gamma.add(X1, X2, Y1, TermPoly({term_func(-1.0, {fid, 1})}));
  m.christoffel = gamma;

  SymbolicMetric sm;
  sm.dim = m.dim;
  set_metric(sm, X1, X1, TermPoly({term_func(-2.0, {fid, 0})}));
  set_metric(sm, X1, Y1, one());
  set_metric(sm, X2, Y2, one());
  set_ginv(sm, X1, Y1, one());
  set_ginv(sm, X2, Y2, one());
  set_ginv(sm, Y1, Y1, TermPoly({term_func(2.0, {fid, 0})}));
  m.metric = std::move(sm);

  m.funcs = {std::move(f)};
  if (somewhere_zero(m.funcs[0], 2, -2.0, 2.0) || somewhere_zero(m.funcs[0], 3, -2.0, 2.0))
    m.warnings.push_back(
        "f'' or f''' vanishes somewhere on [-2,2]; the derivative-ratio "
        "invariants need both nonzero at their basepoint");
  m.table = std::make_shared<const FunctionTable>(std::move(table));
  return m;
}

ManifoldSpec build_m5(int p, expr::Expr f) {
  if (p < 0) throw ConfigError("M5 needs p >= 0");
  ManifoldSpec m;
  m.family = Family::M5;
  m.p = p;
  m.dim = 2 * p + 6;
  m.signature = {p + 3, p + 3};

  const int X = 0, Y = 1;
  const auto Z = [&](int i) { return 2 + i; };          // z_i for i = 0..p
  const int XB = p + 3, YB = p + 4;
  const auto ZB = [&](int i) { return p + 5 + i; };

  m.coords = {"x", "y"};
  for (int i = 0; i <= p; ++i) m.coords.push_back("z" + std::to_string(i));
  m.coords.push_back("xb");
  m.coords.push_back("yb");
  for (int i = 0; i <= p; ++i) m.coords.push_back("zb" + std::to_string(i));

  FunctionTable table;
  const int fid = table.add_univariate(f, Y, "f");

  // dPhi/dy = f' + sum (i+1) y^i z_i with Phi = f + sum y^{i+1} z_i
  TermPoly dphi({term_func(1.0, {fid, 1})});
  for (int i = 0; i <= p; ++i)
    dphi += TermPoly({term_mono(i + 1.0, {{Y, i}, {Z(i), 1}})});

  TermChristoffel gamma(m.dim);
  gamma.add(X, X, YB, dphi);
  for (int i = 0; i <= p; ++i)
    gamma.add(X, X, ZB(i), TermPoly({term_mono(1.0, {{Y, i + 1}})}));
  gamma.add(X, Y, XB, dphi.scaled(-1.0));
  for (int i = 0; i <= p; ++i)
    gamma.add(X, Z(i), XB, TermPoly({term_mono(-1.0, {{Y, i + 1}})}));
  m.christoffel = gamma;

  SymbolicMetric sm;
  sm.dim = m.dim;
  TermPoly gxx({term_func(-2.0, {fid, 0})});
  for (int i = 0; i <= p; ++i) gxx += TermPoly({term_mono(-2.0, {{Y, i + 1}, {Z(i), 1}})});
  set_metric(sm, X, X, gxx);
  set_metric(sm, X, XB, one());
  set_metric(sm, Y, YB, one());
  for (int i = 0; i <= p; ++i) set_metric(sm, Z(i), ZB(i), one());
  set_ginv(sm, X, XB, one());
  set_ginv(sm, Y, YB, one());
  for (int i = 0; i <= p; ++i) set_ginv(sm, Z(i), ZB(i), one());
  set_ginv(sm, XB, XB, gxx.scaled(-1.0));
  m.metric = std::move(sm);

  m.funcs = {std::move(f)};
  if (!everywhere_positive(m.funcs[0], p + 3, 0.25, 2.0) ||
      !everywhere_positive(m.funcs[0], p + 4, 0.25, 2.0))
    m.warnings.push_back(
        "f^(p+3) or f^(p+4) is not positive throughout [0.25,2]; the "
        "derivative-ratio invariants need both positive at their basepoint");
  m.table = std::make_shared<const FunctionTable>(std::move(table));
  return m;
}

ManifoldSpec build_m6(int s, std::vector<expr::Expr> f) {
  if (s < 2) throw ConfigError("M6 needs s >= 2");
  if (static_cast<int>(f.size()) != s)
    throw ConfigError("M6 needs exactly s coefficient functions");

  ManifoldSpec m;
  m.family = Family::M6;
  m.s = s;
  m.dim = 3 * s;
  m.signature = {2 * s, s};

  const auto U = [&](int i) { return i; };
  const auto T = [&](int i) { return s + i; };
  const auto V = [&](int i) { return 2 * s + i; };

  for (int i = 1; i <= s; ++i) m.coords.push_back("u" + std::to_string(i));
  for (int i = 1; i <= s; ++i) m.coords.push_back("t" + std::to_string(i));
  for (int i = 1; i <= s; ++i) m.coords.push_back("v" + std::to_string(i));

  FunctionTable table;
  std::vector<int> fid(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i)
    fid[static_cast<std::size_t>(i)] =
        table.add_univariate(f[static_cast<std::size_t>(i)], U(i), "f" + std::to_string(i + 1));

  // (f_l' - t_l) recurs throughout the table.
  const auto slope = [&](int l, double sign) {
    TermPoly p({term_func(sign, {fid[static_cast<std::size_t>(l)], 1})});
    p += TermPoly({term_mono(-sign, {{T(l), 1}})});
    return p;
  };

  TermChristoffel gamma(m.dim);
  for (int i = 0; i < s; ++i) {
    for (int l = 0; l < s; ++l)
      gamma.add(U(i), U(i), T(l), TermPoly({term_mono(1.0, {{U(l), 1}})}));
    for (int l = 0; l < s; ++l)
      gamma.add(U(i), U(i), V(l), slope(l, l == i ? -1.0 : 1.0));
    for (int j = i + 1; j < s; ++j) {
      gamma.add(U(i), U(j), V(j), slope(i, -1.0));
      gamma.add(U(i), U(j), V(i), slope(j, -1.0));
    }
    for (int j = 0; j < s; ++j)
      gamma.add(U(i), T(j), V(i), TermPoly({term_mono(1.0, {{U(j), 1}})}));
  }
  m.christoffel = gamma;

  SymbolicMetric sm;
  sm.dim = m.dim;
  TermPoly guu;  // -2 sum f_j + 2 sum u_j t_j
  for (int j = 0; j < s; ++j) {
    guu += TermPoly({term_func(-2.0, {fid[static_cast<std::size_t>(j)], 0})});
    guu += TermPoly({term_mono(2.0, {{U(j), 1}, {T(j), 1}})});
  }
  for (int i = 0; i < s; ++i) {
    set_metric(sm, U(i), U(i), guu);
    set_metric(sm, U(i), V(i), one());
    set_metric(sm, T(i), T(i), TermPoly({term1(-1.0)}));
    set_ginv(sm, U(i), V(i), one());
    set_ginv(sm, T(i), T(i), TermPoly({term1(-1.0)}));
    set_ginv(sm, V(i), V(i), guu.scaled(-1.0));
  }
  m.metric = std::move(sm);

  m.funcs = std::move(f);
  if (s == 2)
    m.warnings.push_back(
        "s = 2: several operator-rank statements for this family are made "
        "for s >= 3");
  m.table = std::make_shared<const FunctionTable>(std::move(table));
  return m;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::vector<std::string> coord_vars(int p) {
  std::vector<std::string> v;
  for (int i = 1; i <= p; ++i) v.push_back("x" + std::to_string(i));
  return v;
}

int require_int(const nlohmann::json& c, const char* key) {
  if (!c.contains(key) || !c[key].is_number_integer())
    throw ConfigError(std::string("config needs integer '") + key + "'");
  return c[key].get<int>();
}

std::string require_string(const nlohmann::json& c, const char* key) {
  if (!c.contains(key) || !c[key].is_string())
    throw ConfigError(std::string("config needs string '") + key + "'");
  return c[key].get<std::string>();
}

std::vector<std::string> require_string_array(const nlohmann::json& c, const char* key) {
  if (!c.contains(key) || !c[key].is_array())
    throw ConfigError(std::string("config needs array '") + key + "'");
  std::vector<std::string> out;
  for (const auto& e : c[key]) {
    if (!e.is_string()) throw ConfigError(std::string("'") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

ManifoldSpec build_from_config(const nlohmann::json& config) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  const Family fam = family_from_name(require_string(config, "family"));
  switch (fam) {
    case Family::M0: {
      const int k = require_int(config, "k");
      std::vector<expr::Expr> f;
      for (const auto& src : require_string_array(config, "f"))
        f.push_back(expr::parse(src, "y"));
      return build_m0(k, std::move(f));
    }
    case Family::M1:
      return build_m1(expr::parse(require_string(config, "f"), "y"));
    case Family::M2: {
      const int p = require_int(config, "p");
      if (p < 2) throw ConfigError("M2 needs p >= 2");
      const auto vars = coord_vars(p);
      std::vector<expr::Poly> psi;
      for (const auto& src : require_string_array(config, "psi"))
        psi.push_back(expr::parse_poly(src, vars));
      return build_m2(p, std::move(psi));
    }
    case Family::M3: {
      const int p = require_int(config, "p");
      if (p < 2) throw ConfigError("M3 needs p >= 2");
      const auto vars = coord_vars(p);
      return build_m3(p, expr::parse_poly(require_string(config, "f"), vars));
    }
    case Family::M4:
      return build_m4(expr::parse(require_string(config, "f"), "y"));
    case Family::M5: {
      const int p = require_int(config, "p");
      return build_m5(p, expr::parse(require_string(config, "f"), "y"));
    }
    case Family::M6: {
      const int s = require_int(config, "s");
      std::vector<expr::Expr> f;
      for (const auto& src : require_string_array(config, "f"))
        f.push_back(expr::parse(src, "u"));
      return build_m6(s, std::move(f));
    }
  }
  throw ConfigError("unhandled family");
}

ManifoldSpec build_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json c;
  try {
    in >> c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return build_from_config(c);
}

// ---------------------------------------------------------------------------
// Pointwise evaluation

tensor::MetricAtPoint metric_at(const ManifoldSpec& m, std::span<const double> point) {
  if (static_cast<int>(point.size()) != m.dim)
    throw DimError("point arity does not match manifold dimension");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m.dim, m.dim);
  for (auto& [key, poly] : m.metric.g) g(key[0], key[1]) = poly.eval(point, *m.table);
  return tensor::MetricAtPoint::from_matrix(g);
}

tensor::Tensor christoffel_at(const ManifoldSpec& m, std::span<const double> point) {
  if (static_cast<int>(point.size()) != m.dim)
    throw DimError("point arity does not match manifold dimension");
  tensor::Tensor out(m.dim, 3,
                     {tensor::Variance::Lower, tensor::Variance::Lower,
                      tensor::Variance::Upper});
  for (const auto& e : m.christoffel.entries())
    out.at(e.i, e.j, e.k) = e.poly->eval(point, *m.table);
  return out;
}

}  // namespace pwave::families
