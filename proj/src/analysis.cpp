#include "pwave/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

namespace pwave::analysis {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double endo_norm(const Eigen::MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

// ||A^m|| / max(1, ||A||^m)
double nilpotency_residual(const Eigen::MatrixXd& a) {
  const int m = static_cast<int>(a.rows());
  Eigen::MatrixXd p = a;
  for (int i = 1; i < m; ++i) p = p * a;
  return endo_norm(p) / std::max(1.0, std::pow(endo_norm(a), m));
}

void require_family(const families::ManifoldSpec& spec, families::Family want,
                    const char* what) {
  if (spec.family != want)
    throw ConfigError(std::string(what) + " needs a " + families::family_name(want) + " spec");
}

double univariate_deriv(const expr::Expr& f, double x, int order) {
  return f.at(x, order).derivative(order);
}

}  // namespace

tensor::Endo jacobi(const geometry::CurvatureJet& jet, std::span<const double> xi) {
  const int m = jet.metric.dim;
  if (static_cast<int>(xi.size()) != m) throw DimError("vector arity does not match jet");
  const tensor::Tensor& r = jet.mixed[0];
  tensor::Endo out;
  out.basepoint = jet.point;
  out.matrix = Eigen::MatrixXd::Zero(m, m);
  for (int l = 0; l < m; ++l)
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          s += r.at(i, j, k, l) * xi[static_cast<std::size_t>(j)] * xi[static_cast<std::size_t>(k)];
      out.matrix(l, i) = s;
    }
  return out;
}

tensor::Endo szabo(const geometry::CurvatureJet& jet, std::span<const double> xi) {
  const int m = jet.metric.dim;
  if (static_cast<int>(xi.size()) != m) throw DimError("vector arity does not match jet");
  if (jet.order() < 1) throw DimError("Szabo operator needs a first-derivative jet");
  const tensor::Tensor& dr = jet.mixed[1];
  tensor::Endo out;
  out.basepoint = jet.point;
  out.matrix = Eigen::MatrixXd::Zero(m, m);
  for (int l = 0; l < m; ++l)
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          for (int n = 0; n < m; ++n)
            s += dr.at(i, j, k, l, n) * xi[static_cast<std::size_t>(j)] *
                 xi[static_cast<std::size_t>(k)] * xi[static_cast<std::size_t>(n)];
      out.matrix(l, i) = s;
    }
  return out;
}

tensor::Endo skew_op(const geometry::CurvatureJet& jet, std::span<const double> e1,
                     std::span<const double> e2) {
  const int m = jet.metric.dim;
  if (static_cast<int>(e1.size()) != m || static_cast<int>(e2.size()) != m)
    throw DimError("plane vectors do not match jet");
  const double n1 = jet.metric.inner(e1, e1);
  const double n2 = jet.metric.inner(e2, e2);
  const double ip = jet.metric.inner(e1, e2);
  if (std::abs(std::abs(n1) - 1.0) > 1e-9 || std::abs(std::abs(n2) - 1.0) > 1e-9 ||
      std::abs(ip) > 1e-9)
    throw PlaneError("plane spanning pair is not orthonormal");

  const tensor::Tensor& r = jet.mixed[0];
  tensor::Endo out;
  out.basepoint = jet.point;
  out.matrix = Eigen::MatrixXd::Zero(m, m);
  for (int l = 0; l < m; ++l)
    for (int k = 0; k < m; ++k) {
      double s = 0.0;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          s += r.at(i, j, k, l) * e1[static_cast<std::size_t>(i)] * e2[static_cast<std::size_t>(j)];
      out.matrix(l, k) = s;
    }
  return out;
}

NilpotencyReport nilpotency_report(const families::ManifoldSpec& spec,
                                   std::span<const double> point, int samples, unsigned seed) {
  if (samples < 1) throw DimError("nilpotency report needs at least one sample");
  const geometry::CurvatureJet jet = geometry::nabla_r(spec, point, 1);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);

  NilpotencyReport rep;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd xi = random_unit_vector(jet.metric, rng);
    const tensor::Endo j = jacobi(jet, as_span(xi));
    const tensor::Endo sz = szabo(jet, as_span(xi));
    const int sign = coin(rng) ? 1 : -1;
    const auto [e1, e2] = random_orthonormal_plane(jet.metric, rng, sign);
    const tensor::Endo sk = skew_op(jet, as_span(e1), as_span(e2));

    rep.jacobi_residual = std::max(rep.jacobi_residual, nilpotency_residual(j.matrix));
    rep.szabo_residual = std::max(rep.szabo_residual, nilpotency_residual(sz.matrix));
    rep.skew_residual = std::max(rep.skew_residual, nilpotency_residual(sk.matrix));
    if (s == 0) {
      rep.jacobi_ranks = tensor::rank_sequence(j);
      rep.szabo_ranks = tensor::rank_sequence(sz);
      rep.skew_ranks = tensor::rank_sequence(sk);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Contraction schemas

int WeylSchema::max_order() const {
  int mo = 0;
  for (const auto& f : factors) mo = std::max(mo, f.order);
  return mo;
}

namespace {

struct SchemaCursor {
  const std::string& s;
  std::size_t i = 0;

  void skip_ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eat(char c) {
    skip_ws();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  void expect(char c, const char* where) {
    if (!eat(c))
      throw SchemaError(std::string("expected '") + c + "' in " + where + " near position " +
                        std::to_string(i));
  }
};

WeylFactor parse_factor(const std::string& text) {
  SchemaCursor cur{text};
  cur.skip_ws();
  if (cur.i >= text.size() || text[cur.i] != 'R')
    throw SchemaError("factor must start with R near position " + std::to_string(cur.i));
  ++cur.i;
  cur.expect('[', "derivative order");
  cur.skip_ws();
  std::size_t start = cur.i;
  while (cur.i < text.size() && std::isdigit(static_cast<unsigned char>(text[cur.i]))) ++cur.i;
  if (cur.i == start) throw SchemaError("missing derivative order near position " + std::to_string(cur.i));
  WeylFactor f;
  f.order = std::stoi(text.substr(start, cur.i - start));
  cur.expect(']', "derivative order");
  cur.expect('(', "label list");

  std::vector<std::string> head, tail;
  bool in_tail = false;
  for (;;) {
    cur.skip_ws();
    start = cur.i;
    while (cur.i < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[cur.i])) || text[cur.i] == '_'))
      ++cur.i;
    if (cur.i == start)
      throw SchemaError("missing label near position " + std::to_string(cur.i));
    (in_tail ? tail : head).push_back(text.substr(start, cur.i - start));
    cur.skip_ws();
    if (cur.eat(',')) continue;
    if (!in_tail && cur.eat('|')) {
      in_tail = true;
      continue;
    }
    cur.expect(')', "label list");
    break;
  }
  cur.skip_ws();
  if (cur.i != text.size())
    throw SchemaError("trailing input after factor near position " + std::to_string(cur.i));

  if (head.size() != 4)
    throw SchemaError("a factor takes 4 curvature labels, got " + std::to_string(head.size()));
  if (static_cast<int>(tail.size()) != f.order)
    throw SchemaError("derivative labels do not match order " + std::to_string(f.order));
  f.labels = std::move(head);
  f.labels.insert(f.labels.end(), tail.begin(), tail.end());
  return f;
}

}  // namespace

WeylSchema WeylSchema::parse(const std::string& text) {
  WeylSchema schema;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t next = text.find(';', pos);
    if (next == std::string::npos) next = text.size();
    const std::string chunk = text.substr(pos, next - pos);
    if (chunk.find_first_not_of(" \t") == std::string::npos)
      throw SchemaError("empty factor in schema");
    schema.factors.push_back(parse_factor(chunk));
    if (next == text.size()) break;
    pos = next + 1;
  }
  if (schema.factors.empty()) throw SchemaError("schema has no factors");

  std::map<std::string, int> counts;
  for (const auto& f : schema.factors)
    for (const auto& l : f.labels) ++counts[l];
  for (const auto& [label, count] : counts)
    if (count != 2)
      throw SchemaError("label '" + label + "' appears " + std::to_string(count) +
                        " times, need exactly 2");
  return schema;
}

WeylSchema WeylSchema::builtin(const std::string& name) {
  if (name == "tau") return parse("R[0](a,b,b,a)");
  if (name == "rho2") return parse("R[0](a,b,c,a);R[0](d,b,c,d)");
  if (name == "R2") return parse("R[0](a,b,c,d);R[0](a,b,c,d)");
  if (name == "gradR2") return parse("R[1](a,b,c,d|e);R[1](a,b,c,d|e)");
  throw SchemaError("unknown builtin schema '" + name + "'");
}

WeylSchema random_schema(std::mt19937_64& rng, int max_factors, int max_order) {
  std::uniform_int_distribution<int> nfd(1, max_factors);
  std::uniform_int_distribution<int> nud(0, max_order);
  const int nf = nfd(rng);
  std::vector<int> orders(static_cast<std::size_t>(nf));
  int slots = 0;
  do {
    slots = 0;
    for (auto& o : orders) {
      o = nud(rng);
      slots += 4 + o;
    }
  } while (slots % 2 != 0);

  std::vector<std::string> labels;
  for (int i = 0; i < slots / 2; ++i) {
    labels.push_back("l" + std::to_string(i));
    labels.push_back("l" + std::to_string(i));
  }
  std::shuffle(labels.begin(), labels.end(), rng);

  WeylSchema schema;
  std::size_t pos = 0;
  for (const int o : orders) {
    WeylFactor f;
    f.order = o;
    for (int s = 0; s < 4 + o; ++s) f.labels.push_back(labels[pos++]);
    schema.factors.push_back(std::move(f));
  }
  return schema;
}

double weyl_eval(const geometry::CurvatureJet& jet, const WeylSchema& schema) {
  if (schema.factors.empty()) throw SchemaError("schema has no factors");
  if (schema.max_order() > jet.order())
    throw DimError("jet order too low for schema");
  std::vector<tensor::Tensor> factors;
  std::vector<tensor::Labels> labels;
  for (const auto& f : schema.factors) {
    factors.push_back(jet.lowered[static_cast<std::size_t>(f.order)]);
    labels.push_back(f.labels);
  }
  return tensor::contract(factors, labels, jet.metric);
}

double weyl_eval(const families::ManifoldSpec& spec, std::span<const double> point,
                 const WeylSchema& schema) {
  return weyl_eval(geometry::nabla_r(spec, point, schema.max_order()), schema);
}

// ---------------------------------------------------------------------------
// Invariants

double alpha16(const families::ManifoldSpec& spec, std::span<const double> point) {
  require_family(spec, families::Family::M1, "alpha16");
  const double fp = univariate_deriv(spec.funcs[0], point[1], 1);
  return std::abs(fp) / std::sqrt(1.0 + fp * fp);
}

namespace {

// Largest Euclidean residual of the candidate basis after projecting out the
// span of `drop` (orthonormal columns).
Eigen::VectorXd complementary_pick(const std::vector<Eigen::VectorXd>& basis,
                                   const std::vector<Eigen::VectorXd>& drop,
                                   const char* what) {
  Eigen::VectorXd best;
  double best_norm = -1.0;
  for (const auto& v : basis) {
    Eigen::VectorXd r = v;
    for (const auto& n : drop) r -= n.dot(v) * n;
    if (r.norm() > best_norm) {
      best_norm = r.norm();
      best = r;
    }
  }
  if (best_norm < 1e-8) throw ModelError(std::string(what) + " has no complementary direction");
  return best / best_norm;
}

}  // namespace

double alpha16_model(const geometry::CurvatureJet& jet) {
  const int m = jet.metric.dim;
  const tensor::Tensor& r = jet.lowered[0];
  if (jet.order() < 1) throw DimError("model recovery needs a first-derivative jet");
  const tensor::Tensor& dr = jet.lowered[1];

  Eigen::MatrixXd a(m * m * m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) a((i * m + j) * m + k, l) = r.at(i, j, k, l);

  Eigen::MatrixXd b(2 * m * m * m * m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l)
          for (int n = 0; n < m; ++n) {
            const int row = ((i * m + j) * m + k) * m + l;
            b(row, n) = dr.at(i, j, k, l, n);                             // eta in the last slot
            b(m * m * m * m + ((i * m + j) * m + k) * m + n, l) = dr.at(i, j, k, l, n);  // eta in slot 4
          }

  const auto ker_r = tensor::kernel_basis(a);
  const auto ker_dr = tensor::kernel_basis(b);
  Eigen::MatrixXd stacked(a.rows() + b.rows(), m);
  stacked << a, b;
  const auto common = tensor::kernel_basis(stacked);
  if (ker_r.size() != 3 || ker_dr.size() != 3 || common.size() != 2)
    throw ModelError("kernel dimensions are not (3,3) with a 2-dimensional intersection");

  const Eigen::VectorXd z1 = complementary_pick(ker_dr, common, "ker(nabla R)");
  const Eigen::VectorXd z2 = complementary_pick(ker_r, common, "ker(R)");
  const double n1 = jet.metric.inner(as_span(z1), as_span(z1));
  const double n2 = jet.metric.inner(as_span(z2), as_span(z2));
  if (std::abs(n1) < 1e-10 || std::abs(n2) < 1e-10)
    throw ModelError("kernel representative is null");
  const double ip = jet.metric.inner(as_span(z1), as_span(z2));
  return std::abs(ip) / std::sqrt(std::abs(n1) * std::abs(n2));
}

double alpha_ratio(RatioKind kind, const expr::Expr& f, int p, int k, double y,
                   bool literal_form) {
  if (kind == RatioKind::M4) {
    if (p < 2) throw DimError("ratio invariant needs p >= 2");
    const expr::Jet jf = f.at(y, p + 2);
    const double d2 = jf.derivative(2);
    const double d3 = jf.derivative(3);
    const double dp2 = jf.derivative(p + 2);
    if (literal_form) return dp2 * std::pow(d2, p - 1) * std::pow(d3, p);
    if (d3 == 0.0) throw DomainError("third derivative vanishes at the point");
    return dp2 * std::pow(d2, p - 1) / std::pow(d3, p);
  }
  if (k < 2) throw DimError("ratio invariant needs k >= 2");
  const expr::Jet jf = f.at(y, k + p + 3);
  const double dp3 = jf.derivative(p + 3);
  const double dp4 = jf.derivative(p + 4);
  const double dk = jf.derivative(k + p + 3);
  if (dp4 == 0.0) throw DomainError("derivative of order p+4 vanishes at the point");
  return dk * std::pow(dp3, k - 1) / std::pow(dp4, k);
}

double alpha4(const families::ManifoldSpec& spec, int p, std::span<const double> point,
              bool literal_form) {
  require_family(spec, families::Family::M4, "alpha4");
  return alpha_ratio(RatioKind::M4, spec.funcs[0], p, 0, point[1], literal_form);
}

double alpha5(const families::ManifoldSpec& spec, int k, std::span<const double> point) {
  require_family(spec, families::Family::M5, "alpha5");
  return alpha_ratio(RatioKind::M5, spec.funcs[0], spec.p, k, point[1]);
}

double alpha3(const families::ManifoldSpec& spec, std::span<const double> point) {
  require_family(spec, families::Family::M3, "alpha3");
  const int p = spec.p;
  const expr::Poly& f = *spec.poly_f;
  const std::span<const double> xs(point.data(), static_cast<std::size_t>(p));

  Eigen::MatrixXd h(p, p);
  for (int i = 0; i < p; ++i) {
    const expr::Poly fi = f.partial(i);
    for (int j = 0; j < p; ++j) h(i, j) = fi.partial(j).eval(xs);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  int neg = 0, pos = 0;
  for (int i = 0; i < p; ++i) {
    if (es.eigenvalues()(i) > 1e-10 * scale) ++pos;
    else if (es.eigenvalues()(i) < -1e-10 * scale) ++neg;
  }
  if (neg != p && pos != p) throw DomainError("Hessian is not definite at the point");
  const Eigen::MatrixXd hinv = h.inverse();

  const tensor::Tensor dr = geometry::nabla_r(spec, point, 1).lowered[1];
  tensor::Tensor s(p, 5);
  std::vector<int> idx(5);
  for (std::size_t q = 0; q < s.size(); ++q) {
    s.unflat(q, idx);
    s.data()[q] = dr.at(idx[0], idx[1], idx[2], idx[3], idx[4]);
  }
  tensor::Tensor u = s;
  for (int slot = 0; slot < 5; ++slot) u = tensor::mode_multiply(u, slot, hinv);
  double total = 0.0;
  for (std::size_t q = 0; q < s.size(); ++q) total += u.data()[q] * s.data()[q];
  return total;
}

double alpha6(const families::ManifoldSpec& spec, std::span<const double> point) {
  require_family(spec, families::Family::M6, "alpha6");
  double total = 0.0;
  for (int i = 0; i < spec.s; ++i) {
    const double u = point[static_cast<std::size_t>(i)];
    const double d3 = univariate_deriv(spec.funcs[static_cast<std::size_t>(i)], u, 3);
    total += (d3 + 4.0 * u) * (d3 + 4.0 * u);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Adapted basis of the 6-dimensional family

NormalizedBasisM1 NormalizedBasisM1::normalized() const {
  NormalizedBasisM1 out = *this;
  out.z1 = z1 - fprime * z2;
  return out;
}

NormalizedBasisM1 normalized_basis_m1(const families::ManifoldSpec& spec,
                                      std::span<const double> point) {
  require_family(spec, families::Family::M1, "the adapted basis");
  const double yv = point[1], z1v = point[2], z2v = point[3];
  const expr::Jet jf = spec.funcs[0].at(yv, 3);
  const double f0 = jf.derivative(0);
  const double f1 = jf.derivative(1);
  const double f2 = jf.derivative(2);
  const double f3 = jf.derivative(3);
  if (f2 <= 0.0) throw HypothesisError("second derivative must be positive at the point");

  NormalizedBasisM1 b;
  b.fprime = f1;
  b.eps2 = f3 * z2v / (3.0 * f2);
  b.eps1 = 0.5 * (f2 * z2v - 2.0 * b.eps2 * f1);
  const double w = 1.0 + f1 * f1;
  b.c3 = 1.0 / std::sqrt(w);
  b.c2 = w / f2;
  b.c1 = std::sqrt(f2) * std::pow(w, -0.75);

  const double bigf = yv * z1v + f0 * z2v;
  b.x = Eigen::VectorXd::Zero(6);
  b.x(0) = b.c1;
  b.x(5) = b.c1 * bigf;  // -(1/2) g(dx,dx) = F
  b.xt = Eigen::VectorXd::Zero(6);
  b.xt(5) = 1.0 / b.c1;
  b.y = Eigen::VectorXd::Zero(6);
  b.y(1) = b.c2;
  b.y(2) = -b.c2 * b.eps1;
  b.y(3) = -b.c2 * b.eps2;
  b.y(4) = -0.5 * b.c2 * (b.eps1 * b.eps1 + b.eps2 * b.eps2);
  b.yt = Eigen::VectorXd::Zero(6);
  b.yt(4) = 1.0 / b.c2;
  b.z1 = Eigen::VectorXd::Zero(6);
  b.z1(2) = b.c3;
  b.z1(3) = b.c3 * f1;
  b.z1(4) = b.c3 * (b.eps1 + f1 * b.eps2);
  b.z2 = Eigen::VectorXd::Zero(6);
  b.z2(2) = -b.c3 * f1;
  b.z2(3) = b.c3;
  b.z2(4) = b.c3 * (b.eps2 - f1 * b.eps1);
  return b;
}

SubspaceSet w_subspaces(const geometry::CurvatureJet& jet) {
  const int m = jet.metric.dim;
  if (m != 6) throw ModelError("subspace analysis expects a 6-dimensional jet");
  if (jet.order() < 1) throw DimError("subspace analysis needs a first-derivative jet");
  const tensor::Tensor& r = jet.mixed[0];
  const tensor::Tensor& dr = jet.mixed[1];

  SubspaceSet ws;
  {
    Eigen::MatrixXd cols(m, m * m * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l) cols(l, (i * m + j) * m + k) = r.at(i, j, k, l);
    ws.w1 = tensor::span_basis(cols);
  }
  {
    Eigen::MatrixXd cols(m, m * m * m * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          for (int n = 0; n < m; ++n)
            for (int l = 0; l < m; ++l)
              cols(l, ((i * m + j) * m + k) * m + n) = dr.at(i, j, k, l, n);
    ws.w2 = tensor::span_basis(cols);
  }
  {
    Eigen::MatrixXd cols(m, static_cast<int>(ws.w1.size()) * m * m);
    int col = 0;
    for (const auto& w : ws.w1)
      for (int a = 0; a < m; ++a)
        for (int c = 0; c < m; ++c) {
          for (int l = 0; l < m; ++l) {
            double s = 0.0;
            for (int bidx = 0; bidx < m; ++bidx) s += r.at(a, bidx, c, l) * w(bidx);
            cols(l, col) = s;
          }
          ++col;
        }
    ws.w3 = tensor::span_basis(cols);
  }
  {
    Eigen::MatrixXd rows(m * m * m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l)
          for (int k = 0; k < m; ++k) rows((i * m + j) * m + l, k) = r.at(i, j, k, l);
    ws.w4 = tensor::kernel_basis(rows);
  }
  {
    Eigen::MatrixXd rows(m * m * m * m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l)
          for (int n = 0; n < m; ++n)
            for (int k = 0; k < m; ++k)
              rows(((i * m + j) * m + l) * m + n, k) = dr.at(i, j, k, l, n);
    ws.w5 = tensor::kernel_basis(rows);
  }

  if (ws.w1.size() != 3 || ws.w2.size() != 3 || ws.w3.size() != 2 || ws.w4.size() != 3 ||
      ws.w5.size() != 3)
    throw ModelError("subspace dimensions differ from (3,3,2,3,3)");
  return ws;
}

namespace {

// Direction of the one-dimensional quotient space basis mod w3, expressed in
// the (z1, z2) plane of the adapted basis; returns the two coefficients.
std::pair<double, double> quotient_direction(const std::vector<Eigen::VectorXd>& space,
                                             const std::vector<Eigen::VectorXd>& w3,
                                             const NormalizedBasisM1& basis) {
  Eigen::VectorXd best;
  double best_norm = -1.0;
  for (const auto& v : space) {
    Eigen::VectorXd r = v;
    for (const auto& n : w3) r -= n.dot(v) * n;
    if (r.norm() > best_norm) {
      best_norm = r.norm();
      best = r;
    }
  }
  if (best_norm < 1e-10) throw ModelError("quotient space is degenerate");

  Eigen::MatrixXd span(6, 2 + static_cast<int>(w3.size()));
  span.col(0) = basis.z1;
  span.col(1) = basis.z2;
  for (std::size_t i = 0; i < w3.size(); ++i) span.col(2 + static_cast<int>(i)) = w3[i];
  const Eigen::VectorXd coef = span.colPivHouseholderQr().solve(best);
  if ((span * coef - best).norm() > 1e-8 * std::max(1.0, best.norm()))
    throw ModelError("quotient direction leaves the expected plane");
  return {coef(0), coef(1)};
}

}  // namespace

double quotient_slope_product(const SubspaceSet& ws, const NormalizedBasisM1& basis) {
  const auto [u1, u2] = quotient_direction(ws.w2, ws.w3, basis);  // along f' z1 + z2
  const auto [w1, w2] = quotient_direction(ws.w5, ws.w3, basis);  // along z1 - f' z2
  if (std::abs(u2) < 1e-12 || std::abs(w1) < 1e-12)
    throw ModelError("quotient slope is unreadable");
  return (u1 / u2) * (-w2 / w1);
}

HomogeneityReport homogeneity_probe(const families::ManifoldSpec& spec, const std::string& id,
                                    std::span<const std::vector<double>> points) {
  std::string base = id;
  int arg = -1;
  if (const std::size_t colon = id.find(':'); colon != std::string::npos) {
    base = id.substr(0, colon);
    try {
      arg = std::stoi(id.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad invariant argument in '" + id + "'");
    }
  }

  HomogeneityReport rep;
  rep.id = id;
  for (const auto& pt : points) {
    if (static_cast<int>(pt.size()) != spec.dim)
      throw DimError("probe point arity does not match manifold");
    double v = 0.0;
    if (base == "alpha16") v = alpha16(spec, pt);
    else if (base == "alpha3") v = alpha3(spec, pt);
    else if (base == "alpha4") v = alpha4(spec, arg < 0 ? 2 : arg, pt);
    else if (base == "alpha5") v = alpha5(spec, arg < 0 ? 2 : arg, pt);
    else if (base == "alpha6") v = alpha6(spec, pt);
    else throw ConfigError("unknown invariant id '" + id + "'");
    rep.values.push_back(v);
  }
  if (!rep.values.empty()) {
    const auto [lo, hi] = std::minmax_element(rep.values.begin(), rep.values.end());
    rep.spread = *hi - *lo;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Basis utilities

geometry::CurvatureJet basis_change(const geometry::CurvatureJet& jet, const Eigen::MatrixXd& b) {
  const int m = jet.metric.dim;
  if (b.rows() != m || b.cols() != m) throw DimError("basis matrix has wrong shape");
  const Eigen::MatrixXd bt = b.transpose();
  const Eigen::MatrixXd binv = b.inverse();

  geometry::CurvatureJet out;
  out.point = jet.point;
  out.metric = tensor::MetricAtPoint::from_matrix(bt * jet.metric.g * b);
  for (int nu = 0; nu <= jet.order(); ++nu) {
    tensor::Tensor low = jet.lowered[static_cast<std::size_t>(nu)];
    for (int s = 0; s < low.rank(); ++s) low = tensor::mode_multiply(low, s, bt);
    out.lowered.push_back(std::move(low));
    tensor::Tensor mix = jet.mixed[static_cast<std::size_t>(nu)];
    for (int s = 0; s < mix.rank(); ++s)
      mix = tensor::mode_multiply(mix, s, s == 3 ? binv : bt);
    out.mixed.push_back(std::move(mix));
  }
  return out;
}

Eigen::MatrixXd random_pseudo_orthogonal(const tensor::MetricAtPoint& metric,
                                         std::mt19937_64& rng) {
  const int m = metric.dim;
  std::uniform_real_distribution<double> unif(-0.4, 0.4);
  Eigen::MatrixXd k(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) k(i, j) = unif(rng);
  k = 0.5 * (k - k.transpose().eval());

  Eigen::MatrixXd a = metric.ginv * k;
  const double norm = endo_norm(a);
  if (norm > 0.8) a *= 0.8 / norm;

  // exp by scaling and squaring with a short Taylor tail
  int halvings = 0;
  while (endo_norm(a) > 0.25) {
    a *= 0.5;
    ++halvings;
  }
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(m, m);
  for (int n = 1; n <= 24; ++n) {
    term = term * a / n;
    result += term;
  }
  for (int i = 0; i < halvings; ++i) result = result * result;
  return result;
}

namespace {

// Columns form a frame with pairing(E_i, E_j) = sign(lambda_i) delta_ij, so a
// vector of prescribed causal type can be built by scaling coefficient blocks
// instead of rejection sampling; that stays reliable when the metric entries
// are large and one type occupies a thin sliver of the Euclidean sphere.
struct SignFrame {
  Eigen::MatrixXd frame;
  std::vector<int> signs;
};

SignFrame sign_frame(const Eigen::MatrixXd& pairing, double degenerate_tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pairing);
  const int m = static_cast<int>(pairing.rows());
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  SignFrame out;
  out.frame.resize(m, m);
  for (int i = 0; i < m; ++i) {
    const double lam = es.eigenvalues()(i);
    if (std::abs(lam) < degenerate_tol * scale)
      throw DomainError("pairing is too close to degenerate for unit sampling");
    out.frame.col(i) = es.eigenvectors().col(i) / std::sqrt(std::abs(lam));
    out.signs.push_back(lam > 0.0 ? 1 : -1);
  }
  return out;
}

// Gaussian coefficients over the frame with the block matching `sign` rescaled
// so the pairing comes out exactly at sign * 1.
Eigen::VectorXd unit_from_frame(const SignFrame& sf, std::mt19937_64& rng, int sign) {
  const int m = static_cast<int>(sf.signs.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int tries = 0; tries < 64; ++tries) {
    Eigen::VectorXd c(m);
    for (int i = 0; i < m; ++i) c(i) = gauss(rng);
    double same = 0.0, other = 0.0;
    for (int i = 0; i < m; ++i) {
      if (sf.signs[i] == sign) same += c(i) * c(i);
      else other += c(i) * c(i);
    }
    if (same < 1e-12) continue;  // wanted block drawn at zero; redraw
    const double factor = std::sqrt((1.0 + other) / same);
    for (int i = 0; i < m; ++i)
      if (sf.signs[i] == sign) c(i) *= factor;
    return sf.frame * c;
  }
  throw DomainError("could not sample a unit vector of the requested kind");
}

}  // namespace

Eigen::VectorXd random_unit_vector(const tensor::MetricAtPoint& metric, std::mt19937_64& rng,
                                   int want_sign) {
  int sign = want_sign;
  if (sign == 0) {
    std::uniform_int_distribution<int> coin(0, 1);
    sign = coin(rng) ? 1 : -1;
  }
  const SignFrame sf = sign_frame(metric.g, 1e-14);
  if (std::count(sf.signs.begin(), sf.signs.end(), sign) == 0)
    throw DomainError("metric signature admits no vector of the requested kind");
  return unit_from_frame(sf, rng, sign);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> random_orthonormal_plane(
    const tensor::MetricAtPoint& metric, std::mt19937_64& rng, int want_sign) {
  int sign = want_sign;
  if (sign == 0) {
    std::uniform_int_distribution<int> coin(0, 1);
    sign = coin(rng) ? 1 : -1;
  }
  const int m = metric.dim;
  const Eigen::VectorXd e1 = random_unit_vector(metric, rng, sign);
  const double q1 = e1.dot(metric.g * e1);  // +-1

  // Basis of the pairing-orthogonal complement of e1, then the same sign-frame
  // construction on the restricted pairing.
  const Eigen::VectorXd ge1 = metric.g * e1;
  Eigen::MatrixXd raw(m, m);
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(m, i);
    raw.col(i) = v - (ge1(i) / q1) * e1;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(raw);
  if (qr.rank() != m - 1)
    throw DomainError("could not span the complement of the first plane vector");
  const Eigen::MatrixXd comp =
      Eigen::MatrixXd(qr.householderQ()).leftCols(m - 1);
  Eigen::MatrixXd basis(m, m - 1);
  for (int i = 0; i < m - 1; ++i) {
    Eigen::VectorXd v = comp.col(i);
    basis.col(i) = v - (ge1.dot(v) / q1) * e1;  // re-project: Q mixes in e1
  }
  const Eigen::MatrixXd restricted = basis.transpose() * metric.g * basis;
  SignFrame sf;
  try {
    sf = sign_frame(restricted, 1e-12);
  } catch (const DomainError&) {
    throw DomainError("could not sample an orthonormal plane of the requested kind");
  }
  if (std::count(sf.signs.begin(), sf.signs.end(), sign) == 0)
    throw DomainError("could not sample an orthonormal plane of the requested kind");
  return {e1, basis * unit_from_frame(sf, rng, sign)};
}

}  // namespace pwave::analysis
