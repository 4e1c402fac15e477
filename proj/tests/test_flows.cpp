#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <pwave/errors.hpp>
#include <pwave/families.hpp>
#include <pwave/flows.hpp>
#include <pwave/geometry.hpp>

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

using namespace pwave;
using families::ManifoldSpec;

namespace {

ManifoldSpec from_json(const char* text) {
  return families::build_from_config(nlohmann::json::parse(text));
}

const char* kM1 = R"js({"family":"M1","f":"y^2"})js";
const char* kM2Flat = R"js({"family":"M2","p":2,"psi":["0","0","0"]})js";
// psi depending only on x1 would be flat (the transported correction is an
// exact form); x2^4 keeps genuine curvature inside the loop
const char* kM2Quartic = R"js({"family":"M2","p":2,"psi":["x2^4","0","0"]})js";

double metric_pairing(const ManifoldSpec& m, std::span<const double> x,
                      std::span<const double> a, std::span<const double> b) {
  const Eigen::MatrixXd g = families::metric_at(m, x).g;
  double s = 0.0;
  for (int i = 0; i < m.dim; ++i)
    for (int j = 0; j < m.dim; ++j)
      s += a[static_cast<std::size_t>(i)] * g(i, j) * b[static_cast<std::size_t>(j)];
  return s;
}

}  // namespace

TEST_CASE("quadrature and RK4 integrate the same geodesic") {
  const ManifoldSpec m = from_json(kM1);
  const std::vector<double> x0 = {0.1, -0.3, 0.5, 0.2, 0.0, 0.4};
  const std::vector<double> v0 = {1.0, 0.7, -0.2, 0.3, 0.1, -0.5};
  const flows::Curve a = flows::geodesic_ivp(m, x0, v0, 2.0, 2000);
  const flows::Curve b = flows::geodesic_ivp(m, x0, v0, 2.0, 2000, flows::Integrator::RK4);
  REQUIRE(a.nodes() == 2001);
  double diff = 0.0;
  for (int i = 0; i < m.dim; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    diff = std::max(diff, std::abs(a.x.back()[ii] - b.x.back()[ii]));
  }
  CHECK(diff < 1e-6);
  CHECK(flows::max_geodesic_residual(m, a) < 1e-5);
  CHECK(flows::max_geodesic_residual(m, b) < 1e-5);
}

TEST_CASE("flat manifold and sourceless velocities give straight lines") {
  const ManifoldSpec flat = from_json(kM2Flat);
  const std::vector<double> x0 = {0.2, -0.4, 1.0, 0.0};
  const std::vector<double> v0 = {0.5, 1.5, -1.0, 2.0};
  const flows::Curve c = flows::geodesic_ivp(flat, x0, v0, 3.0, 300);
  for (int k = 0; k <= 300; k += 50)
    for (int i = 0; i < 4; ++i) {
      const auto ki = static_cast<std::size_t>(k);
      const auto ii = static_cast<std::size_t>(i);
      CHECK(c.x[ki][ii] == doctest::Approx(x0[ii] + c.t[ki] * v0[ii]).epsilon(1e-12));
      CHECK(c.v[ki][ii] == doctest::Approx(v0[ii]).epsilon(1e-12));
    }

  // all Christoffel source pairs involve dx; kill the x-velocity and the
  // curved family integrates straight lines too
  const ManifoldSpec m1 = from_json(kM1);
  const std::vector<double> y0 = {0.7, -0.2, 0.3, 0.5, 0.1, 0.9};
  const std::vector<double> w0 = {0.0, 1.2, -0.4, 0.6, 0.2, -0.8};
  const flows::Curve s = flows::geodesic_ivp(m1, y0, w0, 2.0, 100);
  for (int i = 0; i < 6; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    CHECK(s.x.back()[ii] == doctest::Approx(y0[ii] + 2.0 * w0[ii]).epsilon(1e-10));
  }
}

TEST_CASE("two-point problem hits the target and degenerates cleanly") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const ManifoldSpec m = from_json(kM1);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> p(6), q(6);
    for (auto& z : p) z = u(rng);
    for (auto& z : q) z = u(rng);
    const flows::BvpResult r = flows::geodesic_bvp(m, p, q, 4000);
    for (int i = 0; i < 6; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      CHECK(std::abs(r.curve.x.back()[ii] - q[ii]) < 1e-8);
      CHECK(std::abs(r.curve.x.front()[ii] - p[ii]) < 1e-14);
    }
    CHECK(flows::max_geodesic_residual(m, r.curve) < 1e-5);
  }

  const std::vector<double> p = {0.3, 0.1, -0.2, 0.5, 0.0, 0.7};
  const flows::BvpResult same = flows::geodesic_bvp(m, p, p, 100);
  for (double vi : same.v0) CHECK(std::abs(vi) < 1e-12);
}

TEST_CASE("parallel transport preserves pairings and fixes the top slot") {
  const ManifoldSpec m = from_json(kM1);
  const std::vector<double> x0 = {0.0, 0.2, -0.1, 0.4, 0.0, 0.0};
  const std::vector<double> v0 = {1.0, 0.5, 0.3, -0.2, 0.1, 0.2};
  const flows::Curve c = flows::geodesic_ivp(m, x0, v0, 1.5, 1500);

  const std::vector<double> a0 = {0.3, -0.7, 0.2, 0.9, -0.5, 0.4};
  const std::vector<double> b0 = {1.1, 0.6, -0.3, 0.0, 0.2, -0.9};
  const auto at = flows::parallel_transport(m, c, a0);
  const auto bt = flows::parallel_transport(m, c, b0);
  REQUIRE(static_cast<int>(at.size()) == c.nodes());
  const double want = metric_pairing(m, x0, a0, b0);
  const double got = metric_pairing(m, c.x.back(), at.back(), bt.back());
  CHECK(got == doctest::Approx(want).epsilon(1e-7));

  // last coordinate vector never sources any Christoffel term
  std::vector<double> top(6, 0.0);
  top.back() = 1.0;
  const auto tt = flows::parallel_transport(m, c, top);
  for (int i = 0; i < 6; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    CHECK(tt.back()[ii] == doctest::Approx(top[ii]).epsilon(1e-14));
  }

  // frame transport only adds strictly-higher components: e_i stays monic
  for (int i = 0; i < 6; ++i) {
    std::vector<double> e(6, 0.0);
    e[static_cast<std::size_t>(i)] = 1.0;
    const auto et = flows::parallel_transport(m, c, e);
    CHECK(et.back()[static_cast<std::size_t>(i)] == doctest::Approx(1.0).epsilon(1e-12));
    for (int j = 0; j < i; ++j)
      CHECK(std::abs(et.back()[static_cast<std::size_t>(j)]) < 1e-12);
  }

  // RK4 route agrees with the quadrature route
  const auto rk = flows::parallel_transport(m, c, a0, flows::Integrator::RK4);
  for (int i = 0; i < 6; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    CHECK(std::abs(rk.back()[ii] - at.back()[ii]) < 1e-8);
  }

  flows::Curve odd = c;
  odd.t.resize(4);
  odd.x.resize(4);
  odd.v.resize(4);
  CHECK_THROWS_AS((void)flows::parallel_transport(m, odd, a0, flows::Integrator::RK4),
                  DimError);
}

TEST_CASE("holonomy of the flat manifold is the identity") {
  const ManifoldSpec flat = from_json(kM2Flat);
  const flows::SmoothLoop loop =
      flows::fourier_loop(4, {0.0, 0.0, 0.0, 0.0}, 7, 0.8);
  const flows::HolonomyElement h = flows::holonomy_loop(flat, loop.sample(400));
  CHECK((h.matrix - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loop transport matches the independent frame oracle") {
  const ManifoldSpec m = from_json(kM1);
  const flows::SmoothLoop loop =
      flows::rectangle_loop({0.0, 0.1, 0.2, -0.1, 0.0, 0.0}, 0, 1, 0.8, 0.6);
  const flows::HolonomyElement h = flows::holonomy_loop(m, loop.sample(2000));
  const Eigen::MatrixXd oracle = flows::rk4_frame_transport(m, loop, 2000);
  CHECK((h.matrix - oracle).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(h.unipotent_residual < 1e-7);
  CHECK(h.metric_residual < 1e-7);
}

TEST_CASE("quartic block loop produces an antisymmetric off-block") {
  const ManifoldSpec m = from_json(kM2Quartic);
  const flows::SmoothLoop loop = flows::rectangle_loop({0.3, -0.2, 0.0, 0.0}, 0, 1, 1.0, 0.7);
  const flows::HolonomyElement h = flows::holonomy_loop(m, loop.sample(4000));
  // rows are transported basis vectors: H = [[I, b ],[0, I]] with b antisymmetric
  Eigen::MatrixXd b = h.matrix.block(0, 2, 2, 2);
  CHECK((b + b.transpose()).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(b.cwiseAbs().maxCoeff() > 1e-4);  // genuinely non-trivial holonomy
  CHECK(h.metric_residual < 1e-7);

  // reversed traversal inverts the element
  flows::SmoothLoop rev;
  rev.pos = [&loop](double s) { return loop.pos(1.0 - s); };
  rev.vel = [&loop](double s) {
    auto v = loop.vel(1.0 - s);
    for (auto& z : v) z = -z;
    return v;
  };
  const flows::HolonomyElement hr = flows::holonomy_loop(m, rev.sample(4000));
  CHECK((h.matrix * hr.matrix - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("transport error drops by at least the expected order under refinement") {
  const ManifoldSpec m = from_json(kM2Quartic);
  const flows::SmoothLoop loop = flows::rectangle_loop({0.3, -0.2, 0.0, 0.0}, 0, 1, 1.0, 0.7);
  const Eigen::MatrixXd ref = flows::rk4_frame_transport(m, loop, 16000);
  const flows::HolonomyElement coarse = flows::holonomy_loop(m, loop.sample(500));
  const flows::HolonomyElement fine = flows::holonomy_loop(m, loop.sample(1000));
  const double ec = (coarse.matrix - ref).cwiseAbs().maxCoeff();
  const double ef = (fine.matrix - ref).cwiseAbs().maxCoeff();
  CHECK(ec / ef > 3.0);
}

TEST_CASE("open curves are rejected as loops") {
  const ManifoldSpec m = from_json(kM1);
  const std::vector<double> x0 = {0.0, 0.2, -0.1, 0.4, 0.0, 0.0};
  const std::vector<double> v0 = {1.0, 0.5, 0.3, -0.2, 0.1, 0.2};
  const flows::Curve open_curve = flows::geodesic_ivp(m, x0, v0, 1.0, 100);
  CHECK_THROWS_AS((void)flows::holonomy_loop(m, open_curve), LoopError);
}

TEST_CASE("curve files round-trip bit-exactly") {
  const ManifoldSpec m = from_json(kM1);
  const std::vector<double> x0 = {0.1, -0.3, 0.5, 0.2, 0.0, 0.4};
  const std::vector<double> v0 = {1.0, 0.7, -0.2, 0.3, 0.1, -0.5};
  const flows::Curve c = flows::geodesic_ivp(m, x0, v0, 1.0, 37);
  const std::string path = "/tmp/pwave_test_curve.csv";
  flows::write_curve_csv(c, path);
  const flows::Curve back = flows::read_curve_csv(path);
  REQUIRE(back.nodes() == c.nodes());
  for (int k = 0; k < c.nodes(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    CHECK(back.t[kk] == c.t[kk]);
    for (int i = 0; i < 6; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      CHECK(back.x[kk][ii] == c.x[kk][ii]);
      CHECK(back.v[kk][ii] == c.v[kk][ii]);
    }
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS((void)flows::read_curve_csv("/tmp/pwave_missing_curve.csv"), ConfigError);
}
