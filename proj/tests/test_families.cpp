#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "pwave/families.hpp"
#include "pwave/geometry.hpp"

using namespace pwave;
using families::ManifoldSpec;

namespace {

ManifoldSpec from_json(const char* text) {
  return families::build_from_config(nlohmann::json::parse(text));
}

}  // namespace

TEST_CASE("two-step family: frozen connection and metric") {
  // F = y z1, coords (x, y, z1, yt, xt)
  const ManifoldSpec m = from_json(R"js({"family":"M0","k":1,"f":["0","y"]})js");
  CHECK(m.dim == 5);
  CHECK(m.signature == std::pair<int, int>(2, 3));

  const std::vector<double> pt = {0.0, 2.0, 3.0, 0.0, 0.0};
  const auto gamma = families::christoffel_at(m, pt);
  CHECK(gamma.at(0, 0, 3) == doctest::Approx(3.0));   // f1' z1
  CHECK(gamma.at(0, 0, 2) == doctest::Approx(2.0));   // f1
  CHECK(gamma.at(0, 1, 4) == doctest::Approx(-3.0));
  CHECK(gamma.at(1, 0, 4) == doctest::Approx(-3.0));  // symmetric in the lower pair
  CHECK(gamma.at(0, 2, 4) == doctest::Approx(-2.0));
  CHECK(gamma.at(1, 1, 2) == 0.0);

  const auto metric = families::metric_at(m, pt);
  CHECK(metric.g(0, 0) == doctest::Approx(-12.0));
  CHECK(metric.g(0, 4) == 1.0);
  CHECK(metric.g(1, 3) == 1.0);
  CHECK(metric.g(2, 2) == 1.0);
  CHECK(metric.neg == 2);
  CHECK(metric.pos == 3);
  // stored symbolic inverse matches the numeric one
  CHECK((metric.g * metric.ginv - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("six-dimensional specialization") {
  const ManifoldSpec m = from_json(R"js({"family":"M1","f":"y^2"})js");
  CHECK(m.dim == 6);
  CHECK(m.signature == std::pair<int, int>(2, 4));
  CHECK(m.warnings.empty());

  const std::vector<double> pt = {0.0, 1.0, 3.0, 1.0, 0.0, 0.0};
  const auto metric = families::metric_at(m, pt);
  CHECK(metric.g(0, 0) == doctest::Approx(-8.0));  // -2 (y z1 + f z2)

  const auto gamma = families::christoffel_at(m, pt);
  CHECK(gamma.at(0, 0, 4) == doctest::Approx(5.0));  // z1 + 2 y z2
  CHECK(gamma.at(0, 0, 2) == doctest::Approx(1.0));  // y
  CHECK(gamma.at(0, 0, 3) == doctest::Approx(1.0));  // f
  CHECK(gamma.at(0, 1, 5) == doctest::Approx(-5.0));

  // f with f'' < 0 somewhere gets flagged
  const ManifoldSpec flagged = from_json(R"js({"family":"M1","f":"sin(y)"})js");
  CHECK(!flagged.warnings.empty());
}

TEST_CASE("symmetric-coefficient family and its gradient specialization") {
  const ManifoldSpec m2 = from_json(R"js({"family":"M2","p":2,"psi":["x1^2","0","0"]})js");
  CHECK(m2.dim == 4);
  CHECK(m2.signature == std::pair<int, int>(2, 2));

  const std::vector<double> pt = {2.0, 1.0, 0.0, 3.0};
  const auto gamma = families::christoffel_at(m2, pt);
  CHECK(gamma.at(0, 0, 2) == doctest::Approx(2.0));  // (1/2) d1 psi11 = x1
  CHECK(gamma.at(0, 1, 2) == 0.0);

  const auto metric = families::metric_at(m2, pt);
  CHECK(metric.g(0, 0) == doctest::Approx(4.0));
  CHECK(metric.g(0, 2) == 1.0);
  CHECK(metric.g(1, 3) == 1.0);
  CHECK(metric.neg == 2);

  // gradient form: psi_ij = di f * dj f reproduced through the M2 route
  const ManifoldSpec m3 = from_json(R"js({"family":"M3","p":2,"f":"x1^2+x2^2"})js");
  const ManifoldSpec same = from_json(
      R"js({"family":"M2","p":2,"psi":["4*x1^2","4*x1*x2","4*x2^2"]})js");
  const std::vector<double> q = {0.7, -0.4, 1.0, 2.0};
  const auto ga = families::christoffel_at(m3, q);
  const auto gb = families::christoffel_at(same, q);
  for (std::size_t i = 0; i < ga.size(); ++i)
    CHECK(ga.data()[i] == doctest::Approx(gb.data()[i]).epsilon(1e-13));

  // degenerate Hessian at the origin is flagged
  const ManifoldSpec cubic = from_json(R"js({"family":"M3","p":2,"f":"x1^3+x2^3"})js");
  CHECK(!cubic.warnings.empty());
}

TEST_CASE("four-dimensional ratio family") {
  const ManifoldSpec m = from_json(R"js({"family":"M4","f":"exp(y)"})js");
  CHECK(m.dim == 4);
  CHECK(m.signature == std::pair<int, int>(2, 2));

  const std::vector<double> pt = {0.5, 0.7, 0.0, 0.0};
  const double fp = std::exp(0.7);  // f' at x2
  const auto gamma = families::christoffel_at(m, pt);
  CHECK(gamma.at(0, 0, 3) == doctest::Approx(fp));
  CHECK(gamma.at(0, 1, 2) == doctest::Approx(-fp));
  CHECK(gamma.at(1, 0, 2) == doctest::Approx(-fp));

  const auto metric = families::metric_at(m, pt);
  CHECK(metric.g(0, 0) == doctest::Approx(-2.0 * std::exp(0.7)));
  CHECK(metric.g(0, 2) == 1.0);
  CHECK(metric.g(1, 3) == 1.0);
}

TEST_CASE("polynomial-weight family") {
  const ManifoldSpec m = from_json(R"js({"family":"M5","p":1,"f":"y^3"})js");
  CHECK(m.dim == 8);
  CHECK(m.signature == std::pair<int, int>(4, 4));

  // coords (x, y, z0, z1, xb, yb, zb0, zb1)
  const std::vector<double> pt = {0.0, 0.5, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0};
  const auto gamma = families::christoffel_at(m, pt);
  CHECK(gamma.at(0, 0, 5) == doctest::Approx(3.75));  // 3y^2 + z0 + 2 y z1
  CHECK(gamma.at(0, 0, 6) == doctest::Approx(0.5));   // y
  CHECK(gamma.at(0, 0, 7) == doctest::Approx(0.25));  // y^2
  CHECK(gamma.at(0, 2, 4) == doctest::Approx(-0.5));

  const auto metric = families::metric_at(m, pt);
  CHECK(metric.g(0, 0) == doctest::Approx(-2.25));  // -2 (f + y z0 + y^2 z1)
  CHECK(metric.neg == 4);
  CHECK(metric.pos == 4);
}

TEST_CASE("triple-block family") {
  const ManifoldSpec m =
      from_json(R"js({"family":"M6","s":3,"f":["u^4","u^4","u^4"]})js");
  CHECK(m.dim == 9);
  CHECK(m.signature == std::pair<int, int>(6, 3));
  CHECK(m.warnings.empty());

  // coords (u1,u2,u3, t1,t2,t3, v1,v2,v3)
  const std::vector<double> pt = {1.0, 0.5, 0.0, 0.2, 0.0, 1.0, 0.0, 0.0, 0.0};
  const auto gamma = families::christoffel_at(m, pt);
  CHECK(gamma.at(0, 0, 3) == doctest::Approx(1.0));   // u1
  CHECK(gamma.at(0, 0, 4) == doctest::Approx(0.5));   // u2
  CHECK(gamma.at(0, 0, 5) == doctest::Approx(0.0));   // u3
  CHECK(gamma.at(0, 0, 6) == doctest::Approx(-3.8));  // -(f1' - t1)
  CHECK(gamma.at(0, 0, 7) == doctest::Approx(0.5));   // +(f2' - t2)
  CHECK(gamma.at(0, 1, 7) == doctest::Approx(-3.8));  // -(f1' - t1)
  CHECK(gamma.at(0, 1, 6) == doctest::Approx(-0.5));  // -(f2' - t2)
  CHECK(gamma.at(0, 4, 6) == doctest::Approx(0.5));   // u2

  const auto metric = families::metric_at(m, pt);
  CHECK(metric.neg == 6);
  CHECK(metric.pos == 3);

  const ManifoldSpec small = from_json(R"js({"family":"M6","s":2,"f":["u^2","u^2"]})js");
  CHECK(!small.warnings.empty());
}

TEST_CASE("connection only ever climbs the coordinate order") {
  for (const char* text : {
           R"js({"family":"M0","k":2,"f":["sin(y)","y^2","exp(y)"]})js",
           R"js({"family":"M1","f":"y^2"})js",
           R"js({"family":"M2","p":2,"psi":["x1^2+x2","x1*x2","x2^2"]})js",
           R"js({"family":"M3","p":2,"f":"x1^2+x2^2+x1^3"})js",
           R"js({"family":"M4","f":"exp(y)"})js",
           R"js({"family":"M5","p":1,"f":"y^3"})js",
           R"js({"family":"M6","s":3,"f":["u^4","u^3","u^2"]})js",
       }) {
    CAPTURE(text);
    const ManifoldSpec m = from_json(text);
    const auto report = geometry::is_plane_wave_form(m, 5, 1);
    for (const auto& v : report.violations) CAPTURE(v);
    CHECK(report.ok);
  }
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(from_json(R"js({"family":"M1"})js"), ConfigError);
  CHECK_THROWS_AS(from_json(R"js({"family":"M9","f":"y"})js"), ConfigError);
  CHECK_THROWS_AS(from_json(R"js({"family":"M2","p":2,"psi":["x1^2"]})js"), ConfigError);
  CHECK_THROWS_AS(from_json(R"js({"family":"M2","p":1,"psi":["x1^2"]})js"), ConfigError);
  CHECK_THROWS_AS(from_json(R"js({"family":"M0","k":1,"f":["y"]})js"), ConfigError);
  CHECK_THROWS_AS(from_json(R"js({"family":"M6","s":0,"f":[]})js"), ConfigError);
  CHECK_THROWS_AS(from_json(R"js("M1")js"), ConfigError);
  CHECK_THROWS_AS(from_json(R"js({"family":"M1","f":"y^^2"})js"), ParseError);

  const ManifoldSpec m = from_json(R"js({"family":"M1","f":"y^2"})js");
  CHECK_THROWS_AS((void)families::metric_at(m, std::vector<double>{0.0, 1.0}), DimError);
  CHECK_THROWS_AS((void)families::christoffel_at(m, std::vector<double>{0.0}), DimError);
}
