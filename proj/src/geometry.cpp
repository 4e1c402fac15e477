#include "pwave/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace pwave::geometry {

namespace {

using families::FunctionTable;
using families::TermPoly;

// Sparse symbolic tensor: multi-index -> TermPoly. Plane wave structure keeps
// these tiny even though the dense shapes grow as dim^(4+nu).
struct SparseSym {
  int rank = 0;
  std::map<std::vector<int>, TermPoly> comp;

  void add(std::vector<int> key, const TermPoly& p) {
    if (p.empty()) return;
    comp[std::move(key)] += p;
  }

  void drop_empty() {
    for (auto it = comp.begin(); it != comp.end();)
      it = it->second.empty() ? comp.erase(it) : std::next(it);
  }
};

struct GammaEntry {
  int i, j, k;
  TermPoly poly;
};

}  // namespace

struct SymbolicCurvature::Impl {
  int dim = 0;
  int order = 0;
  families::Family family;
  FunctionTable table;  // private extension of the spec's table
  std::vector<GammaEntry> gamma;
  std::vector<std::vector<GammaEntry>> gamma_by_out;  // index by k
  std::map<std::array<int, 2>, TermPoly> g, ginv;
  std::vector<SparseSym> lowered;  // nabla^i R
  std::vector<SparseSym> mixed;    // slot 3 raised

  void build();
  SparseSym mixed_curvature();
  SparseSym lower_last(const SparseSym& rmix);
  SparseSym covariant_derivative(const SparseSym& t);
  SparseSym raise_slot3(const SparseSym& t);
};

SparseSym SymbolicCurvature::Impl::mixed_curvature() {
  SparseSym r;
  r.rank = 4;
  // derivative part: +d_d Gamma_ab^c at (d,a,b,c), -d_d Gamma_ab^c at (a,d,b,c)
  for (const auto& e : gamma) {
    for (int d = 0; d < dim; ++d) {
      TermPoly dp = e.poly.d(d, table);
      if (dp.empty()) continue;
      r.add({d, e.i, e.j, e.k}, dp);
      r.add({e.i, d, e.j, e.k}, dp.scaled(-1.0));
    }
  }
  // quadratic part: +Gamma_in^l Gamma_jk^n at (i,j,k,l), minus the i<->j swap
  for (const auto& e1 : gamma) {
    const int i = e1.i, n = e1.j, l = e1.k;
    for (const auto& e2 : gamma_by_out[static_cast<std::size_t>(n)]) {
      TermPoly prod = e1.poly * e2.poly;
      if (prod.empty()) continue;
      r.add({i, e2.i, e2.j, l}, prod);
      r.add({e2.i, i, e2.j, l}, prod.scaled(-1.0));
    }
  }
  r.drop_empty();
  return r;
}

SparseSym SymbolicCurvature::Impl::lower_last(const SparseSym& rmix) {
  SparseSym out;
  out.rank = 4;
  for (const auto& [key, poly] : rmix.comp) {
    const int l = key[3];
    for (const auto& [gk, gp] : g) {
      if (gk[0] != l) continue;
      std::vector<int> nk = key;
      nk[3] = gk[1];
      out.add(std::move(nk), poly * gp);
    }
  }
  out.drop_empty();
  return out;
}

SparseSym SymbolicCurvature::Impl::covariant_derivative(const SparseSym& t) {
  SparseSym out;
  out.rank = t.rank + 1;
  for (const auto& [key, poly] : t.comp) {
    // coordinate derivative, appended slot
    for (int l = 0; l < dim; ++l) {
      TermPoly dp = poly.d(l, table);
      if (dp.empty()) continue;
      std::vector<int> nk = key;
      nk.push_back(l);
      out.add(std::move(nk), dp);
    }
    // -Gamma corrections, one per covariant slot
    for (int s = 0; s < t.rank; ++s) {
      const int rr = key[static_cast<std::size_t>(s)];
      for (const auto& e : gamma_by_out[static_cast<std::size_t>(rr)]) {
        std::vector<int> nk = key;
        nk[static_cast<std::size_t>(s)] = e.j;
        nk.push_back(e.i);
        out.add(std::move(nk), (e.poly * poly).scaled(-1.0));
      }
    }
  }
  out.drop_empty();
  return out;
}

SparseSym SymbolicCurvature::Impl::raise_slot3(const SparseSym& t) {
  SparseSym out;
  out.rank = t.rank;
  for (const auto& [key, poly] : t.comp) {
    const int m = key[3];
    for (const auto& [gk, gp] : ginv) {
      if (gk[0] != m) continue;
      std::vector<int> nk = key;
      nk[3] = gk[1];
      out.add(std::move(nk), poly * gp);
    }
  }
  out.drop_empty();
  return out;
}

void SymbolicCurvature::Impl::build() {
  gamma_by_out.assign(static_cast<std::size_t>(dim), {});
  for (const auto& e : gamma) gamma_by_out[static_cast<std::size_t>(e.k)].push_back(e);

  SparseSym rmix = mixed_curvature();
  lowered.push_back(lower_last(rmix));
  mixed.push_back(std::move(rmix));
  for (int nu = 1; nu <= order; ++nu) {
    lowered.push_back(covariant_derivative(lowered.back()));
    mixed.push_back(raise_slot3(lowered.back()));
  }
}

SymbolicCurvature::SymbolicCurvature(const families::ManifoldSpec& spec, int order)
    : impl_(std::make_unique<Impl>()) {
  if (order < 0) throw DimError("curvature order must be non-negative");
  impl_->dim = spec.dim;
  impl_->order = order;
  impl_->family = spec.family;
  impl_->table = *spec.table;
  for (const auto& e : spec.christoffel.entries())
    impl_->gamma.push_back({e.i, e.j, e.k, *e.poly});
  impl_->g = spec.metric.g;
  impl_->ginv = spec.metric.ginv;
  impl_->build();
}

SymbolicCurvature::~SymbolicCurvature() = default;
SymbolicCurvature::SymbolicCurvature(SymbolicCurvature&&) noexcept = default;
SymbolicCurvature& SymbolicCurvature::operator=(SymbolicCurvature&&) noexcept = default;

int SymbolicCurvature::order() const { return impl_->order; }
int SymbolicCurvature::dim() const { return impl_->dim; }

CurvatureJet SymbolicCurvature::eval(std::span<const double> point) const {
  const Impl& im = *impl_;
  if (static_cast<int>(point.size()) != im.dim)
    throw DimError("point arity does not match manifold dimension");

  CurvatureJet jet;
  jet.point.assign(point.begin(), point.end());

  Eigen::MatrixXd gm = Eigen::MatrixXd::Zero(im.dim, im.dim);
  for (const auto& [key, poly] : im.g) gm(key[0], key[1]) = poly.eval(point, im.table);
  jet.metric = tensor::MetricAtPoint::from_matrix(gm);

  for (int nu = 0; nu <= im.order; ++nu) {
    const int rank = 4 + nu;
    tensor::Tensor low(im.dim, rank);
    for (const auto& [key, poly] : im.lowered[static_cast<std::size_t>(nu)].comp)
      low[key] = poly.eval(point, im.table);
    jet.lowered.push_back(std::move(low));

    std::vector<tensor::Variance> var(static_cast<std::size_t>(rank),
                                      tensor::Variance::Lower);
    var[3] = tensor::Variance::Upper;
    tensor::Tensor mix(im.dim, rank, var);
    for (const auto& [key, poly] : im.mixed[static_cast<std::size_t>(nu)].comp)
      mix[key] = poly.eval(point, im.table);
    jet.mixed.push_back(std::move(mix));
  }
  return jet;
}

std::vector<std::string> SymbolicCurvature::structural_violations() const {
  std::vector<std::string> out;
  for (int nu = 0; nu <= impl_->order; ++nu) {
    for (const auto& [key, poly] : impl_->mixed[static_cast<std::size_t>(nu)].comp) {
      (void)poly;
      const int upper = key[3];
      int maxlow = -1;
      for (std::size_t s = 0; s < key.size(); ++s)
        if (s != 3) maxlow = std::max(maxlow, key[s]);
      if (upper <= maxlow) {
        std::ostringstream os;
        os << "nabla^" << nu << " R component (";
        for (std::size_t s = 0; s < key.size(); ++s) os << (s ? "," : "") << key[s];
        os << ") violates triangularity";
        out.push_back(os.str());
      }
    }
  }
  return out;
}

tensor::Tensor curvature_at(const families::ManifoldSpec& spec, std::span<const double> point) {
  return SymbolicCurvature(spec, 0).eval(point).lowered[0];
}

CurvatureJet nabla_r(const families::ManifoldSpec& spec, std::span<const double> point,
                     int order) {
  return SymbolicCurvature(spec, order).eval(point);
}

Eigen::MatrixXd ricci(const CurvatureJet& jet) {
  const int m = jet.metric.dim;
  const tensor::Tensor& r = jet.lowered[0];
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) {
      double s = 0.0;
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < m; ++l) s += jet.metric.ginv(i, l) * r.at(i, j, k, l);
      rho(j, k) = s;
    }
  return rho;
}

double scalar_curvature(const CurvatureJet& jet) {
  const Eigen::MatrixXd rho = ricci(jet);
  return (jet.metric.ginv.array() * rho.array()).sum();
}

Eigen::MatrixXd ricci_at(const families::ManifoldSpec& spec, std::span<const double> point) {
  return ricci(nabla_r(spec, point, 0));
}

double scalar_at(const families::ManifoldSpec& spec, std::span<const double> point) {
  return scalar_curvature(nabla_r(spec, point, 0));
}

// ---------------------------------------------------------------------------
// Finite-difference pipeline

namespace {

std::vector<double> shifted(std::span<const double> p, int coord, double h) {
  std::vector<double> q(p.begin(), p.end());
  q[static_cast<std::size_t>(coord)] += h;
  return q;
}

double step1(std::span<const double> p, int coord) {
  return 1e-5 * std::max(1.0, std::abs(p[static_cast<std::size_t>(coord)]));
}

// Steps for differentiating fields that are themselves FD results (Gamma has
// noise ~1e-9 for |g|~100).  Coarse step + Richardson keeps noise/h and the
// truncation term simultaneously small; plain central at 1e-4 loses ~1e-5.
double step2(std::span<const double> p, int coord) {
  return 4e-3 * std::max(1.0, std::abs(p[static_cast<std::size_t>(coord)]));
}

double step_nabla(std::span<const double> p, int coord) {
  return 2e-2 * std::max(1.0, std::abs(p[static_cast<std::size_t>(coord)]));
}

// (4*C(h/2) - C(h))/3 for a tensor-valued field along one coordinate.
template <typename F>
tensor::Tensor richardson_diff(const F& field, std::span<const double> p, int coord, double h) {
  const tensor::Tensor hi1 = field(shifted(p, coord, h));
  const tensor::Tensor lo1 = field(shifted(p, coord, -h));
  const tensor::Tensor hi2 = field(shifted(p, coord, h / 2.0));
  const tensor::Tensor lo2 = field(shifted(p, coord, -h / 2.0));
  tensor::Tensor d(hi1.dim(), hi1.rank(), hi1.variance());
  for (std::size_t q = 0; q < d.size(); ++q) {
    const double coarse = (hi1.data()[q] - lo1.data()[q]) / (2.0 * h);
    const double fine = (hi2.data()[q] - lo2.data()[q]) / h;
    d.data()[q] = (4.0 * fine - coarse) / 3.0;
  }
  return d;
}

// Gamma_ij^k from first differences of the metric.
tensor::Tensor fd_christoffel(const MetricFun& gfun, std::span<const double> p) {
  const Eigen::MatrixXd g0 = gfun(p);
  const int m = static_cast<int>(g0.rows());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g0);
  if (!lu.isInvertible()) throw SingularMetricError("metric not invertible at FD point");
  const Eigen::MatrixXd ginv = lu.inverse();

  std::vector<Eigen::MatrixXd> dg;
  for (int l = 0; l < m; ++l) {
    const double h = step1(p, l);
    dg.push_back((gfun(shifted(p, l, h)) - gfun(shifted(p, l, -h))) / (2.0 * h));
  }
  tensor::Tensor out(m, 3,
                     {tensor::Variance::Lower, tensor::Variance::Lower,
                      tensor::Variance::Upper});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < m; ++c) {
        double s = 0.0;
        for (int k = 0; k < m; ++k)
          s += 0.5 * ginv(c, k) * (dg[static_cast<std::size_t>(i)](j, k) +
                                   dg[static_cast<std::size_t>(j)](i, k) -
                                   dg[static_cast<std::size_t>(k)](i, j));
        out.at(i, j, c) = s;
      }
  return out;
}

// Lowered curvature from second differences.
tensor::Tensor fd_curvature(const MetricFun& gfun, std::span<const double> p) {
  const Eigen::MatrixXd g0 = gfun(p);
  const int m = static_cast<int>(g0.rows());
  const tensor::Tensor gam = fd_christoffel(gfun, p);

  std::vector<tensor::Tensor> dgam;
  const auto gam_field = [&gfun](std::span<const double> q) {
    return fd_christoffel(gfun, q);
  };
  for (int l = 0; l < m; ++l)
    dgam.push_back(richardson_diff(gam_field, p, l, step2(p, l)));

  tensor::Tensor rl(m, 4);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) {
          double s = dgam[static_cast<std::size_t>(i)].at(j, k, l) -
                     dgam[static_cast<std::size_t>(j)].at(i, k, l);
          for (int n = 0; n < m; ++n)
            s += gam.at(i, n, l) * gam.at(j, k, n) - gam.at(j, n, l) * gam.at(i, k, n);
          // lower the result index against g as we assemble
          rl.at(i, j, k, l) = s;
        }
  tensor::Tensor lowered(m, 4);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int mm = 0; mm < m; ++mm) {
          double s = 0.0;
          for (int l = 0; l < m; ++l) s += rl.at(i, j, k, l) * g0(l, mm);
          lowered.at(i, j, k, mm) = s;
        }
  return lowered;
}

// nu-th covariant derivative field, recursively by central differences.
tensor::Tensor fd_nabla(const MetricFun& gfun, std::span<const double> p, int nu) {
  if (nu == 0) return fd_curvature(gfun, p);
  const tensor::Tensor prev = fd_nabla(gfun, p, nu - 1);
  const int m = prev.dim();
  const int rank = prev.rank();
  const tensor::Tensor gam = fd_christoffel(gfun, p);

  tensor::Tensor out(m, rank + 1);
  std::vector<int> key(static_cast<std::size_t>(rank + 1));
  const auto prev_field = [&gfun, nu](std::span<const double> q) {
    return fd_nabla(gfun, q, nu - 1);
  };
  for (int l = 0; l < m; ++l) {
    const tensor::Tensor diff = richardson_diff(prev_field, p, l, step_nabla(p, l));
    std::vector<int> base(static_cast<std::size_t>(rank));
    for (std::size_t q = 0; q < prev.size(); ++q) {
      prev.unflat(q, base);
      for (int s = 0; s < rank; ++s) key[static_cast<std::size_t>(s)] = base[static_cast<std::size_t>(s)];
      key[static_cast<std::size_t>(rank)] = l;
      double v = diff.data()[q];
      for (int s = 0; s < rank; ++s) {
        const int save = base[static_cast<std::size_t>(s)];
        for (int r = 0; r < m; ++r) {
          base[static_cast<std::size_t>(s)] = r;
          v -= gam.at(l, save, r) * prev[base];
        }
        base[static_cast<std::size_t>(s)] = save;
      }
      out[key] = v;
    }
  }
  return out;
}

}  // namespace

CurvatureJet fd_pipeline(const MetricFun& gfun, std::span<const double> point, int order) {
  if (order < 0 || order > 2)
    throw DimError("fd_pipeline supports orders 0..2");
  CurvatureJet jet;
  jet.point.assign(point.begin(), point.end());
  jet.metric = tensor::MetricAtPoint::from_matrix(gfun(point));
  for (int nu = 0; nu <= order; ++nu) {
    tensor::Tensor low = fd_nabla(gfun, point, nu);
    tensor::Tensor mix = tensor::raise_slot(low, 3, jet.metric);
    jet.lowered.push_back(std::move(low));
    jet.mixed.push_back(std::move(mix));
  }
  return jet;
}

// ---------------------------------------------------------------------------
// Structure verification

PlaneWaveReport is_plane_wave_form(const families::ManifoldSpec& spec, int samples,
                                   unsigned seed, double tol) {
  PlaneWaveReport rep;
  const auto& table = *spec.table;

  for (const auto& e : spec.christoffel.entries()) {
    if (e.k <= std::max(e.i, e.j)) {
      std::ostringstream os;
      os << "Gamma(" << e.i << "," << e.j << ")^" << e.k << " sits at or below the diagonal";
      rep.violations.push_back(os.str());
    }
    const int dep = e.poly->dependence(table);
    if (dep >= e.k) {
      std::ostringstream os;
      os << "Gamma(" << e.i << "," << e.j << ")^" << e.k << " depends on coordinate " << dep;
      rep.violations.push_back(os.str());
    }
  }

  SymbolicCurvature sym(spec, 2);
  for (auto& v : sym.structural_violations()) rep.violations.push_back(v);

  // FD cross-check of the catalog at sampled points.
  const MetricFun gfun = [&spec](std::span<const double> q) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(spec.dim, spec.dim);
    for (const auto& [key, poly] : spec.metric.g)
      g(key[0], key[1]) = poly.eval(q, *spec.table);
    return g;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int s = 0; s < samples; ++s) {
    std::vector<double> pt(static_cast<std::size_t>(spec.dim));
    for (double& c : pt) c = unif(rng);
    const tensor::Tensor closed = families::christoffel_at(spec, pt);
    const tensor::Tensor fd = fd_christoffel(gfun, pt);
    double diff = 0.0;
    for (std::size_t q = 0; q < closed.size(); ++q)
      diff = std::max(diff, std::abs(closed.data()[q] - fd.data()[q]));
    if (diff > tol) {
      std::ostringstream os;
      os << "closed-form Christoffel deviates from finite differences by " << diff
         << " at sample " << s;
      rep.violations.push_back(os.str());
    }
  }

  rep.ok = rep.violations.empty();
  return rep;
}

PlaneWaveReport triangularity_violations(const CurvatureJet& jet, double tol) {
  PlaneWaveReport rep;
  for (int nu = 0; nu <= jet.order(); ++nu) {
    const tensor::Tensor& mix = jet.mixed[static_cast<std::size_t>(nu)];
    std::vector<int> key(static_cast<std::size_t>(mix.rank()));
    for (std::size_t q = 0; q < mix.size(); ++q) {
      if (std::abs(mix.data()[q]) <= tol) continue;
      mix.unflat(q, key);
      const int upper = key[3];
      int maxlow = -1;
      for (std::size_t s = 0; s < key.size(); ++s)
        if (s != 3) maxlow = std::max(maxlow, key[s]);
      if (upper <= maxlow) {
        std::ostringstream os;
        os << "nabla^" << nu << " R component (";
        for (std::size_t s = 0; s < key.size(); ++s) os << (s ? "," : "") << key[s];
        os << ") = " << mix.data()[q] << " violates triangularity";
        rep.violations.push_back(os.str());
      }
    }
  }
  rep.ok = rep.violations.empty();
  return rep;
}

}  // namespace pwave::geometry
