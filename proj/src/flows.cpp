#include "pwave/flows.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace pwave::flows {

namespace {

using families::TermChristoffel;

// Christoffel entries bucketed by output coordinate; the triangular structure
// guarantees every entry in bucket k reads only coordinates and velocity
// components of index < k.
std::vector<std::vector<TermChristoffel::Entry>> by_output(const families::ManifoldSpec& spec) {
  std::vector<std::vector<TermChristoffel::Entry>> out(static_cast<std::size_t>(spec.dim));
  for (const auto& e : spec.christoffel.entries())
    out[static_cast<std::size_t>(e.k)].push_back(e);
  return out;
}

// Cumulative composite Simpson over a uniform grid: out[i] = integral up to
// node i, out[0] = 0. Odd interior nodes use the 3-point half-panel rule; a
// trailing odd node uses its backward variant. Signed h integrates leftward.
std::vector<double> cumulative_simpson(const std::vector<double>& f, double h) {
  const std::size_t n = f.size() - 1;
  std::vector<double> out(f.size(), 0.0);
  if (n == 0) return out;
  if (n == 1) {  // single interval: trapezoid is all there is
    out[1] = 0.5 * h * (f[0] + f[1]);
    return out;
  }
  for (std::size_t i = 0; i + 2 <= n; i += 2) {
    out[i + 1] = out[i] + h / 12.0 * (5.0 * f[i] + 8.0 * f[i + 1] - f[i + 2]);
    out[i + 2] = out[i] + h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
  }
  if (n % 2 == 1)
    out[n] = out[n - 1] + h / 12.0 * (-f[n - 2] + 8.0 * f[n - 1] + 5.0 * f[n]);
  return out;
}

double uniform_step(const Curve& c) {
  const int n = c.nodes() - 1;
  if (n < 1) throw DimError("curve needs at least two nodes");
  const double h = (c.t.back() - c.t.front()) / n;
  for (int i = 0; i < n; ++i)
    if (std::abs(c.t[static_cast<std::size_t>(i + 1)] - c.t[static_cast<std::size_t>(i)] - h) >
        1e-9 * std::max(1.0, std::abs(h) * n))
      throw DimError("curve grid is not uniform");
  return h;
}

void check_point_arity(const families::ManifoldSpec& spec, std::span<const double> x,
                       const char* what) {
  if (static_cast<int>(x.size()) != spec.dim)
    throw DimError(std::string(what) + " arity does not match manifold dimension");
}

Curve geodesic_rk4(const families::ManifoldSpec& spec, std::span<const double> x0,
                   std::span<const double> v0, double t1, int steps) {
  const int m = spec.dim;
  const auto buckets = by_output(spec);
  const auto& table = *spec.table;
  const auto acc = [&](const std::vector<double>& x, const std::vector<double>& v,
                       std::vector<double>& a) {
    for (int k = 0; k < m; ++k) {
      double s = 0.0;
      for (const auto& e : buckets[static_cast<std::size_t>(k)])
        s += v[static_cast<std::size_t>(e.i)] * v[static_cast<std::size_t>(e.j)] *
             e.poly->eval(x, table);
      a[static_cast<std::size_t>(k)] = -s;
    }
  };

  const double h = t1 / steps;
  Curve c;
  c.t.resize(static_cast<std::size_t>(steps + 1));
  c.x.assign(static_cast<std::size_t>(steps + 1), std::vector<double>(x0.begin(), x0.end()));
  c.v.assign(static_cast<std::size_t>(steps + 1), std::vector<double>(v0.begin(), v0.end()));

  std::vector<double> x(x0.begin(), x0.end()), v(v0.begin(), v0.end());
  std::vector<double> a1(m), a2(m), a3(m), a4(m), xs(m), vs(m);
  for (int i = 0; i <= steps; ++i) {
    c.t[static_cast<std::size_t>(i)] = h * i;
    c.x[static_cast<std::size_t>(i)] = x;
    c.v[static_cast<std::size_t>(i)] = v;
    if (i == steps) break;

    acc(x, v, a1);
    for (int k = 0; k < m; ++k) {
      xs[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] + 0.5 * h * v[static_cast<std::size_t>(k)];
      vs[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)] + 0.5 * h * a1[static_cast<std::size_t>(k)];
    }
    acc(xs, vs, a2);
    std::vector<double> v2 = vs;
    for (int k = 0; k < m; ++k) {
      xs[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] + 0.5 * h * v2[static_cast<std::size_t>(k)];
      vs[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)] + 0.5 * h * a2[static_cast<std::size_t>(k)];
    }
    acc(xs, vs, a3);
    std::vector<double> v3 = vs;
    for (int k = 0; k < m; ++k) {
      xs[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] + h * v3[static_cast<std::size_t>(k)];
      vs[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)] + h * a3[static_cast<std::size_t>(k)];
    }
    acc(xs, vs, a4);
    for (int k = 0; k < m; ++k) {
      x[static_cast<std::size_t>(k)] += h / 6.0 *
          (v[static_cast<std::size_t>(k)] + 2.0 * v2[static_cast<std::size_t>(k)] +
           2.0 * v3[static_cast<std::size_t>(k)] + vs[static_cast<std::size_t>(k)]);
      v[static_cast<std::size_t>(k)] += h / 6.0 *
          (a1[static_cast<std::size_t>(k)] + 2.0 * a2[static_cast<std::size_t>(k)] +
           2.0 * a3[static_cast<std::size_t>(k)] + a4[static_cast<std::size_t>(k)]);
    }
  }
  return c;
}

}  // namespace

Curve geodesic_ivp(const families::ManifoldSpec& spec, std::span<const double> x0,
                   std::span<const double> v0, double t1, int steps, Integrator method) {
  check_point_arity(spec, x0, "initial point");
  check_point_arity(spec, v0, "initial velocity");
  if (steps < 1) throw DimError("geodesic_ivp needs at least one step");
  if (!std::isfinite(t1)) throw DimError("geodesic_ivp needs finite t1");
  if (method == Integrator::RK4) return geodesic_rk4(spec, x0, v0, t1, steps);

  const int m = spec.dim;
  const std::size_t nn = static_cast<std::size_t>(steps) + 1;
  const double h = t1 / steps;
  const auto buckets = by_output(spec);
  const auto& table = *spec.table;

  Curve c;
  c.t.resize(nn);
  c.x.assign(nn, std::vector<double>(static_cast<std::size_t>(m)));
  c.v.assign(nn, std::vector<double>(static_cast<std::size_t>(m)));
  for (std::size_t i = 0; i < nn; ++i) {
    c.t[i] = h * static_cast<double>(i);
    for (int k = 0; k < m; ++k) {
      c.x[i][static_cast<std::size_t>(k)] = x0[static_cast<std::size_t>(k)] + v0[static_cast<std::size_t>(k)] * c.t[i];
      c.v[i][static_cast<std::size_t>(k)] = v0[static_cast<std::size_t>(k)];
    }
  }

  std::vector<double> w(nn);
  for (int k = 0; k < m; ++k) {
    const auto& bucket = buckets[static_cast<std::size_t>(k)];
    if (bucket.empty()) continue;  // coordinate stays linear
    for (std::size_t i = 0; i < nn; ++i) {
      double s = 0.0;
      for (const auto& e : bucket)
        s += c.v[i][static_cast<std::size_t>(e.i)] * c.v[i][static_cast<std::size_t>(e.j)] *
             e.poly->eval(c.x[i], table);
      w[i] = s;
    }
    const std::vector<double> i1 = cumulative_simpson(w, h);
    const std::vector<double> i2 = cumulative_simpson(i1, h);
    for (std::size_t i = 0; i < nn; ++i) {
      c.x[i][static_cast<std::size_t>(k)] = x0[static_cast<std::size_t>(k)] +
          v0[static_cast<std::size_t>(k)] * c.t[i] - i2[i];
      c.v[i][static_cast<std::size_t>(k)] = v0[static_cast<std::size_t>(k)] - i1[i];
    }
  }
  return c;
}

BvpResult geodesic_bvp(const families::ManifoldSpec& spec, std::span<const double> p,
                       std::span<const double> q, int steps) {
  check_point_arity(spec, p, "start point");
  check_point_arity(spec, q, "end point");
  if (steps < 2) throw DimError("geodesic_bvp needs at least two steps");

  const int m = spec.dim;
  const std::size_t nn = static_cast<std::size_t>(steps) + 1;
  const double h = 1.0 / steps;
  const auto buckets = by_output(spec);
  const auto& table = *spec.table;

  BvpResult r;
  r.v0.assign(static_cast<std::size_t>(m), 0.0);
  Curve& c = r.curve;
  c.t.resize(nn);
  c.x.assign(nn, std::vector<double>(static_cast<std::size_t>(m)));
  c.v.assign(nn, std::vector<double>(static_cast<std::size_t>(m)));
  for (std::size_t i = 0; i < nn; ++i) c.t[i] = h * static_cast<double>(i);

  std::vector<double> w(nn);
  for (int k = 0; k < m; ++k) {
    const auto& bucket = buckets[static_cast<std::size_t>(k)];
    double extra = 0.0;
    std::vector<double> i1(nn, 0.0), i2(nn, 0.0);
    if (!bucket.empty()) {
      for (std::size_t i = 0; i < nn; ++i) {
        double s = 0.0;
        for (const auto& e : bucket)
          s += c.v[i][static_cast<std::size_t>(e.i)] * c.v[i][static_cast<std::size_t>(e.j)] *
               e.poly->eval(c.x[i], table);
        w[i] = s;
      }
      i1 = cumulative_simpson(w, h);
      i2 = cumulative_simpson(i1, h);
      extra = i2.back();
    }
    const double v0k = q[static_cast<std::size_t>(k)] - p[static_cast<std::size_t>(k)] + extra;
    r.v0[static_cast<std::size_t>(k)] = v0k;
    for (std::size_t i = 0; i < nn; ++i) {
      c.x[i][static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k)] + v0k * c.t[i] - i2[i];
      c.v[i][static_cast<std::size_t>(k)] = v0k - i1[i];
    }
  }
  return r;
}

double max_geodesic_residual(const families::ManifoldSpec& spec, const Curve& c) {
  check_point_arity(spec, c.x.empty() ? std::span<const double>{} : std::span<const double>(c.x.front()),
                    "curve point");
  const double h = uniform_step(c);
  const auto buckets = by_output(spec);
  const auto& table = *spec.table;
  const int n = c.nodes() - 1;
  double worst = 0.0;
  for (int i = 1; i < n; ++i) {
    const auto& xm = c.x[static_cast<std::size_t>(i - 1)];
    const auto& x0 = c.x[static_cast<std::size_t>(i)];
    const auto& xp = c.x[static_cast<std::size_t>(i + 1)];
    for (int k = 0; k < spec.dim; ++k) {
      double r = (xp[static_cast<std::size_t>(k)] - 2.0 * x0[static_cast<std::size_t>(k)] +
                  xm[static_cast<std::size_t>(k)]) / (h * h);
      for (const auto& e : buckets[static_cast<std::size_t>(k)])
        r += c.v[static_cast<std::size_t>(i)][static_cast<std::size_t>(e.i)] *
             c.v[static_cast<std::size_t>(i)][static_cast<std::size_t>(e.j)] *
             e.poly->eval(x0, table);
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

namespace {

std::vector<std::vector<double>> transport_rk4(const families::ManifoldSpec& spec,
                                               const Curve& curve, std::span<const double> a0) {
  const int m = spec.dim;
  const int n = curve.nodes() - 1;
  if (n % 2 != 0) throw DimError("RK4 transport needs an even interval count");
  const double h = uniform_step(curve);
  const auto& table = *spec.table;
  const auto entries = spec.christoffel.entries();

  // f(node state) with gamma, gamma' read off stored nodes
  const auto deriv = [&](const std::vector<double>& a, const std::vector<double>& x,
                         const std::vector<double>& v, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& e : entries)
      out[static_cast<std::size_t>(e.k)] -= e.poly->eval(x, table) *
          a[static_cast<std::size_t>(e.i)] * v[static_cast<std::size_t>(e.j)];
  };

  std::vector<std::vector<double>> a(static_cast<std::size_t>(n + 1),
                                     std::vector<double>(a0.begin(), a0.end()));
  std::vector<double> k1(m), k2(m), k3(m), k4(m), tmp(m);
  for (int i = 0; i + 2 <= n; i += 2) {
    const auto& cur = a[static_cast<std::size_t>(i)];
    const auto& x0 = curve.x[static_cast<std::size_t>(i)];
    const auto& v0 = curve.v[static_cast<std::size_t>(i)];
    const auto& x1 = curve.x[static_cast<std::size_t>(i + 1)];
    const auto& v1 = curve.v[static_cast<std::size_t>(i + 1)];
    const auto& x2 = curve.x[static_cast<std::size_t>(i + 2)];
    const auto& v2 = curve.v[static_cast<std::size_t>(i + 2)];

    // full step of size 2h across the node pair
    deriv(cur, x0, v0, k1);
    for (int k = 0; k < m; ++k) tmp[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)] + h * k1[static_cast<std::size_t>(k)];
    deriv(tmp, x1, v1, k2);
    for (int k = 0; k < m; ++k) tmp[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)] + h * k2[static_cast<std::size_t>(k)];
    deriv(tmp, x1, v1, k3);
    for (int k = 0; k < m; ++k) tmp[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)] + 2.0 * h * k3[static_cast<std::size_t>(k)];
    deriv(tmp, x2, v2, k4);
    auto& nxt = a[static_cast<std::size_t>(i + 2)];
    for (int k = 0; k < m; ++k)
      nxt[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)] + h / 3.0 *
          (k1[static_cast<std::size_t>(k)] + 2.0 * k2[static_cast<std::size_t>(k)] +
           2.0 * k3[static_cast<std::size_t>(k)] + k4[static_cast<std::size_t>(k)]);

    // midpoint fill: one step of size h with linearly interpolated midpoint;
    // local only, the pair chain above never reads it
    std::vector<double> xm(static_cast<std::size_t>(m)), vm(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      xm[static_cast<std::size_t>(k)] = 0.5 * (x0[static_cast<std::size_t>(k)] + x1[static_cast<std::size_t>(k)]);
      vm[static_cast<std::size_t>(k)] = 0.5 * (v0[static_cast<std::size_t>(k)] + v1[static_cast<std::size_t>(k)]);
    }
    deriv(cur, x0, v0, k1);
    for (int k = 0; k < m; ++k) tmp[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)] + 0.5 * h * k1[static_cast<std::size_t>(k)];
    deriv(tmp, xm, vm, k2);
    for (int k = 0; k < m; ++k) tmp[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)] + 0.5 * h * k2[static_cast<std::size_t>(k)];
    deriv(tmp, xm, vm, k3);
    for (int k = 0; k < m; ++k) tmp[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)] + h * k3[static_cast<std::size_t>(k)];
    deriv(tmp, x1, v1, k4);
    auto& mid = a[static_cast<std::size_t>(i + 1)];
    for (int k = 0; k < m; ++k)
      mid[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k)] + h / 6.0 *
          (k1[static_cast<std::size_t>(k)] + 2.0 * k2[static_cast<std::size_t>(k)] +
           2.0 * k3[static_cast<std::size_t>(k)] + k4[static_cast<std::size_t>(k)]);
  }
  return a;
}

}  // namespace

std::vector<std::vector<double>> parallel_transport(const families::ManifoldSpec& spec,
                                                    const Curve& curve,
                                                    std::span<const double> a0,
                                                    Integrator method) {
  if (curve.dim() != spec.dim) throw DimError("curve dimension does not match manifold");
  check_point_arity(spec, a0, "transported vector");
  if (method == Integrator::RK4) return transport_rk4(spec, curve, a0);

  const int m = spec.dim;
  const std::size_t nn = static_cast<std::size_t>(curve.nodes());
  const double h = uniform_step(curve);
  const auto buckets = by_output(spec);
  const auto& table = *spec.table;

  std::vector<std::vector<double>> a(nn, std::vector<double>(a0.begin(), a0.end()));
  std::vector<double> u(nn);
  for (int k = 0; k < m; ++k) {
    const auto& bucket = buckets[static_cast<std::size_t>(k)];
    if (bucket.empty()) continue;
    for (std::size_t i = 0; i < nn; ++i) {
      double s = 0.0;
      for (const auto& e : bucket)
        s += e.poly->eval(curve.x[i], table) * a[i][static_cast<std::size_t>(e.i)] *
             curve.v[i][static_cast<std::size_t>(e.j)];
      u[i] = s;
    }
    const std::vector<double> acc = cumulative_simpson(u, h);
    for (std::size_t i = 0; i < nn; ++i)
      a[i][static_cast<std::size_t>(k)] = a0[static_cast<std::size_t>(k)] - acc[i];
  }
  return a;
}

HolonomyElement holonomy_loop(const families::ManifoldSpec& spec, const Curve& loop,
                              Integrator method) {
  if (loop.dim() != spec.dim) throw DimError("loop dimension does not match manifold");
  if (loop.nodes() < 2) throw LoopError("loop needs at least two nodes");
  double gap = 0.0;
  for (int k = 0; k < spec.dim; ++k)
    gap = std::max(gap, std::abs(loop.x.front()[static_cast<std::size_t>(k)] -
                                 loop.x.back()[static_cast<std::size_t>(k)]));
  if (gap >= 1e-12) throw LoopError("loop endpoints differ");

  const int m = spec.dim;
  HolonomyElement h;
  h.basepoint = loop.x.front();
  h.matrix = Eigen::MatrixXd::Zero(m, m);
  std::vector<double> e(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    e[static_cast<std::size_t>(i)] = 1.0;
    const auto a = parallel_transport(spec, loop, e, method);
    for (int j = 0; j < m; ++j) h.matrix(i, j) = a.back()[static_cast<std::size_t>(j)];
    e[static_cast<std::size_t>(i)] = 0.0;
  }

  for (int i = 0; i < m; ++i) {
    h.unipotent_residual = std::max(h.unipotent_residual, std::abs(h.matrix(i, i) - 1.0));
    for (int j = 0; j < i; ++j)
      h.unipotent_residual = std::max(h.unipotent_residual, std::abs(h.matrix(i, j)));
  }
  const Eigen::MatrixXd g0 = families::metric_at(spec, h.basepoint).g;
  h.metric_residual = (h.matrix * g0 * h.matrix.transpose() - g0).cwiseAbs().maxCoeff();
  return h;
}

Curve SmoothLoop::sample(int steps) const {
  if (steps < 1) throw DimError("loop sampling needs at least one step");
  Curve c;
  const std::size_t nn = static_cast<std::size_t>(steps) + 1;
  c.t.resize(nn);
  c.x.resize(nn);
  c.v.resize(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    const double t = static_cast<double>(i) / steps;
    c.t[i] = t;
    c.x[i] = pos(t);
    c.v[i] = vel(t);
  }
  return c;
}

SmoothLoop rectangle_loop(std::vector<double> base, int ci, int cj, double si, double sj) {
  const int m = static_cast<int>(base.size());
  if (ci < 0 || cj < 0 || ci >= m || cj >= m || ci == cj)
    throw DimError("rectangle loop needs two distinct coordinate axes");

  // smoothed ramp: phi(0)=0, phi(1)=1, phi'(0)=phi'(1)=0
  const auto phi = [](double u) { return 0.5 * (1.0 - std::cos(std::numbers::pi * u)); };
  const auto dphi = [](double u) { return 0.5 * std::numbers::pi * std::sin(std::numbers::pi * u); };

  SmoothLoop loop;
  loop.pos = [=](double t) {
    std::vector<double> x = base;
    const double s = 4.0 * t;
    if (s < 1.0) {
      x[static_cast<std::size_t>(ci)] += si * phi(s);
    } else if (s < 2.0) {
      x[static_cast<std::size_t>(ci)] += si;
      x[static_cast<std::size_t>(cj)] += sj * phi(s - 1.0);
    } else if (s < 3.0) {
      x[static_cast<std::size_t>(ci)] += si * (1.0 - phi(s - 2.0));
      x[static_cast<std::size_t>(cj)] += sj;
    } else {
      x[static_cast<std::size_t>(cj)] += sj * (1.0 - phi(s - 3.0));
    }
    return x;
  };
  loop.vel = [=](double t) {
    std::vector<double> v(base.size(), 0.0);
    const double s = 4.0 * t;
    if (s < 1.0) {
      v[static_cast<std::size_t>(ci)] = 4.0 * si * dphi(s);
    } else if (s < 2.0) {
      v[static_cast<std::size_t>(cj)] = 4.0 * sj * dphi(s - 1.0);
    } else if (s < 3.0) {
      v[static_cast<std::size_t>(ci)] = -4.0 * si * dphi(s - 2.0);
    } else {
      v[static_cast<std::size_t>(cj)] = -4.0 * sj * dphi(s - 3.0);
    }
    return v;
  };
  return loop;
}

SmoothLoop fourier_loop(int dim, std::vector<double> base, unsigned seed, double amplitude) {
  if (static_cast<int>(base.size()) != dim) throw DimError("loop base has wrong arity");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int harmonics = 3;
  std::vector<std::vector<double>> cosc(static_cast<std::size_t>(dim)),
      sinc(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k)
    for (int h = 1; h <= harmonics; ++h) {
      cosc[static_cast<std::size_t>(k)].push_back(amplitude * unif(rng) / (harmonics * h));
      sinc[static_cast<std::size_t>(k)].push_back(amplitude * unif(rng) / (harmonics * h));
    }

  constexpr double tau = 2.0 * std::numbers::pi;
  SmoothLoop loop;
  loop.pos = [=](double t) {
    std::vector<double> x = base;
    for (int k = 0; k < dim; ++k)
      for (int h = 1; h <= harmonics; ++h)
        x[static_cast<std::size_t>(k)] +=
            cosc[static_cast<std::size_t>(k)][static_cast<std::size_t>(h - 1)] * (std::cos(tau * h * t) - 1.0) +
            sinc[static_cast<std::size_t>(k)][static_cast<std::size_t>(h - 1)] * std::sin(tau * h * t);
    return x;
  };
  loop.vel = [=](double t) {
    std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
    for (int k = 0; k < dim; ++k)
      for (int h = 1; h <= harmonics; ++h)
        v[static_cast<std::size_t>(k)] += tau * h *
            (-cosc[static_cast<std::size_t>(k)][static_cast<std::size_t>(h - 1)] * std::sin(tau * h * t) +
             sinc[static_cast<std::size_t>(k)][static_cast<std::size_t>(h - 1)] * std::cos(tau * h * t));
    return v;
  };
  return loop;
}

Eigen::MatrixXd rk4_frame_transport(const families::ManifoldSpec& spec, const SmoothLoop& loop,
                                    int steps) {
  const int m = spec.dim;
  if (steps < 1) throw DimError("frame transport needs at least one step");
  const auto& table = *spec.table;
  const auto entries = spec.christoffel.entries();

  // row convention: A' = -A M(s) with M_pk = sum_q Gamma_pq^k gamma'_q
  const auto slope = [&](double t) {
    const std::vector<double> x = loop.pos(t);
    const std::vector<double> v = loop.vel(t);
    Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(m, m);
    for (const auto& e : entries)
      mm(e.i, e.k) += e.poly->eval(x, table) * v[static_cast<std::size_t>(e.j)];
    return mm;
  };

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
  const double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    const double t = h * i;
    const Eigen::MatrixXd k1 = -a * slope(t);
    const Eigen::MatrixXd k2 = -(a + 0.5 * h * k1) * slope(t + 0.5 * h);
    const Eigen::MatrixXd k3 = -(a + 0.5 * h * k2) * slope(t + 0.5 * h);
    const Eigen::MatrixXd k4 = -(a + h * k3) * slope(t + h);
    a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return a;
}

void write_curve_csv(const Curve& c, std::ostream& out) {
  const int m = c.dim();
  out << "t";
  for (int k = 1; k <= m; ++k) out << ",x" << k;
  for (int k = 1; k <= m; ++k) out << ",v" << k;
  out << "\n";
  char buf[64];
  for (int i = 0; i < c.nodes(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", c.t[static_cast<std::size_t>(i)]);
    out << buf;
    for (int k = 0; k < m; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", c.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
      out << ',' << buf;
    }
    for (int k = 0; k < m; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", c.v[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
      out << ',' << buf;
    }
    out << "\n";
  }
}

void write_curve_csv(const Curve& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_curve_csv(c, out);
}

Curve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty curve file");

  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) head.push_back(tok);
  }
  if (head.size() < 3 || head[0] != "t" || head.size() % 2 == 0)
    throw ConfigError("malformed curve header");
  const int m = static_cast<int>((head.size() - 1) / 2);

  Curve c;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw ConfigError("bad number in curve file at row " + std::to_string(row));
      }
      if (used != tok.size())
        throw ConfigError("bad number in curve file at row " + std::to_string(row));
      vals.push_back(v);
    }
    if (static_cast<int>(vals.size()) != 1 + 2 * m)
      throw ConfigError("wrong column count in curve file at row " + std::to_string(row));
    c.t.push_back(vals[0]);
    c.x.emplace_back(vals.begin() + 1, vals.begin() + 1 + m);
    c.v.emplace_back(vals.begin() + 1 + m, vals.end());
  }
  if (c.t.size() < 2) throw ConfigError("curve file needs at least two rows");
  return c;
}

}  // namespace pwave::flows
