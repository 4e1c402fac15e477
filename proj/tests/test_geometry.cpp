#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "pwave/families.hpp"
#include "pwave/geometry.hpp"

using namespace pwave;
using families::ManifoldSpec;

namespace {

ManifoldSpec from_json(const char* text) {
  return families::build_from_config(nlohmann::json::parse(text));
}

std::vector<double> random_point(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  std::vector<double> p(static_cast<std::size_t>(dim));
  for (auto& x : p) x = unif(rng);
  return p;
}

const char* kConfigs[] = {
    R"js({"family":"M0","k":2,"f":["sin(y)","y^2","exp(y)"]})js",
    R"js({"family":"M1","f":"y^2"})js",
    R"js({"family":"M2","p":2,"psi":["x1^2+x2","x1*x2","x2^2"]})js",
    R"js({"family":"M3","p":2,"f":"x1^2+x2^2+x1^3"})js",
    R"js({"family":"M4","f":"exp(y)"})js",
    R"js({"family":"M5","p":1,"f":"y^3"})js",
    R"js({"family":"M6","s":3,"f":["u^4","u^3","u^2"]})js",
};

}  // namespace

TEST_CASE("frozen curvature of the six-dimensional family") {
  const ManifoldSpec m = from_json(R"js({"family":"M1","f":"y^2"})js");
  const std::vector<double> pt = {0.0, 1.0, 3.0, 1.0, 0.0, 0.0};
  const geometry::CurvatureJet jet = geometry::nabla_r(m, pt, 1);
  const tensor::Tensor& r = jet.lowered[0];

  // x=0, y=1, z1=2, z2=3; f'' z2 = 2, f' = 2
  CHECK(r.at(0, 1, 1, 0) == doctest::Approx(2.0));
  CHECK(r.at(0, 1, 2, 0) == doctest::Approx(1.0));
  CHECK(r.at(0, 1, 3, 0) == doctest::Approx(2.0));
  CHECK(r.at(1, 0, 1, 0) == doctest::Approx(-2.0));
  CHECK(r.at(0, 1, 0, 1) == doctest::Approx(-2.0));

  const tensor::Tensor& dr = jet.lowered[1];
  CHECK(dr.at(0, 1, 1, 0, 3) == doctest::Approx(2.0));  // d_{z2} slot
  CHECK(dr.at(0, 1, 3, 0, 1) == doctest::Approx(2.0));  // d_y slot
  CHECK(dr.at(0, 1, 1, 0, 1) == doctest::Approx(0.0));  // f''' = 0

  // pair symmetries of the lowered tensor
  const int d = m.dim;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          CHECK(r.at(i, j, k, l) == doctest::Approx(-r.at(j, i, k, l)).epsilon(1e-13));
          CHECK(r.at(i, j, k, l) == doctest::Approx(-r.at(i, j, l, k)).epsilon(1e-13));
          CHECK(r.at(i, j, k, l) == doctest::Approx(r.at(k, l, i, j)).epsilon(1e-13));
        }
}

TEST_CASE("first and second Bianchi identities") {
  std::mt19937_64 rng(3);
  for (const char* text : {kConfigs[1], kConfigs[6]}) {
    CAPTURE(text);
    const ManifoldSpec m = from_json(text);
    const auto pt = random_point(m.dim, rng);
    const geometry::CurvatureJet jet = geometry::nabla_r(m, pt, 1);
    const int d = m.dim;
    double worst1 = 0.0, worst2 = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) {
            worst1 = std::max(worst1,
                              std::abs(jet.lowered[0].at(i, j, k, l) +
                                       jet.lowered[0].at(j, k, i, l) +
                                       jet.lowered[0].at(k, i, j, l)));
            for (int n = 0; n < d; ++n)
              worst2 = std::max(worst2,
                                std::abs(jet.lowered[1].at(i, j, k, l, n) +
                                         jet.lowered[1].at(j, n, k, l, i) +
                                         jet.lowered[1].at(n, i, k, l, j)));
          }
    CHECK(worst1 < 1e-9);
    CHECK(worst2 < 1e-9);
  }
}

TEST_CASE("Ricci tensor and scalar vanish identically") {
  std::mt19937_64 rng(11);
  for (const char* text : kConfigs) {
    CAPTURE(text);
    const ManifoldSpec m = from_json(text);
    for (int rep = 0; rep < 3; ++rep) {
      const auto pt = random_point(m.dim, rng);
      CHECK(geometry::ricci_at(m, pt).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(geometry::scalar_at(m, pt)) < 1e-12);
    }
  }
}

TEST_CASE("closed-form curvature matches the finite-difference route") {
  std::mt19937_64 rng(17);
  for (const char* text : kConfigs) {
    CAPTURE(text);
    const ManifoldSpec m = from_json(text);
    const geometry::MetricFun gfun = [&m](std::span<const double> x) {
      return families::metric_at(m, x).g;
    };
    for (int rep = 0; rep < 3; ++rep) {
      const auto pt = random_point(m.dim, rng);
      const geometry::CurvatureJet sym = geometry::nabla_r(m, pt, 1);
      const geometry::CurvatureJet fd = geometry::fd_pipeline(gfun, pt, 1);
      double diff0 = 0.0, diff1 = 0.0;
      for (std::size_t q = 0; q < sym.lowered[0].size(); ++q)
        diff0 = std::max(diff0, std::abs(sym.lowered[0].data()[q] - fd.lowered[0].data()[q]));
      for (std::size_t q = 0; q < sym.lowered[1].size(); ++q)
        diff1 = std::max(diff1, std::abs(sym.lowered[1].data()[q] - fd.lowered[1].data()[q]));
      CHECK(diff0 < 1e-6);
      CHECK(diff1 < 1e-4);
    }
  }
}

TEST_CASE("sphere control chart: positive scalar curvature, no triangular structure") {
  const geometry::MetricFun sphere = [](std::span<const double> x) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
    g(0, 0) = 1.0;
    g(1, 1) = std::sin(x[0]) * std::sin(x[0]);
    return g;
  };
  const std::vector<double> pt = {1.0, 0.5};
  const geometry::CurvatureJet jet = geometry::fd_pipeline(sphere, pt, 0);
  CHECK(geometry::scalar_curvature(jet) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK_FALSE(geometry::triangularity_violations(jet).ok);

  const ManifoldSpec m1 = from_json(R"js({"family":"M1","f":"y^2"})js");
  const std::vector<double> q = {0.3, 1.0, -0.2, 0.7, 0.0, 0.1};
  CHECK(geometry::triangularity_violations(geometry::nabla_r(m1, q, 2)).ok);
}

TEST_CASE("derivative slots only reference lower coordinates") {
  for (const char* text : kConfigs) {
    CAPTURE(text);
    const ManifoldSpec m = from_json(text);
    geometry::SymbolicCurvature sc(m, 2);
    CHECK(sc.structural_violations().empty());
  }
}

// The triple-block family couples the blocks through the shared scalar in
// g(u_i,u_i).  That coupling puts Σ_m u_m² into R(U_a,U_b,U_b,U_a) and hence
// 2u_l into ∇_{u_l}R(U_a,U_b,U_b,U_a) for l ∉ {a,b} — independent of the f_i.
// So ∇R vanishes exactly on the u=0 locus and nowhere else once s ≥ 3, even
// when every f_i''' + 4u_i ≡ 0.  (Cross-checked symbolically with sympy.)
TEST_CASE("triple-block family: parallel curvature exactly on the u=0 locus") {
  const ManifoldSpec m = from_json(
      R"js({"family":"M6","s":3,"f":["-(u^4)/6","-(u^4)/6","-(u^4)/6"]})js");

  const std::vector<double> origin_u = {0.0, 0.0, 0.0, 0.2, 0.0, -0.5, 1.0, 0.0, 0.3};
  CHECK(geometry::nabla_r(m, origin_u, 1).lowered[1].max_abs() < 1e-12);

  const std::vector<double> pt = {0.4, -1.1, 0.9, 0.2, 0.0, -0.5, 1.0, 0.0, 0.3};
  const geometry::CurvatureJet jet = geometry::nabla_r(m, pt, 1);
  const tensor::Tensor& r = jet.lowered[0];
  const tensor::Tensor& dr = jet.lowered[1];
  // R(U_0,U_1,U_1,U_0) = f_0'' + f_1'' + |u|^2 = -(u_0^2 + u_1^2) + u_2^2
  CHECK(r.at(0, 1, 1, 0) == doctest::Approx(-0.56).epsilon(1e-12));
  CHECK(r.at(0, 1, 0, 4) == doctest::Approx(1.0).epsilon(1e-12));   // R(U_0,U_1,U_0,T_1)
  CHECK(r.at(0, 1, 3, 1) == doctest::Approx(1.0).epsilon(1e-12));   // R(U_0,U_1,T_0,U_1)
  CHECK(dr.at(0, 1, 1, 0, 2) == doctest::Approx(2.0 * 0.9).epsilon(1e-12));
  CHECK(dr.at(0, 2, 2, 0, 1) == doctest::Approx(2.0 * -1.1).epsilon(1e-12));
  CHECK(std::abs(dr.at(0, 1, 1, 0, 0)) < 1e-12);  // f''' + 4u summand cancels
  CHECK(dr.max_abs() == doctest::Approx(2.2).epsilon(1e-12));

  // with generic f the same slot carries f'''(u_0) + 4u_0
  const ManifoldSpec m2 =
      from_json(R"js({"family":"M6","s":3,"f":["u^4","u^4","u^4"]})js");
  const geometry::CurvatureJet jet2 = geometry::nabla_r(m2, pt, 1);
  CHECK(jet2.lowered[1].at(0, 1, 1, 0, 0) ==
        doctest::Approx(24.0 * 0.4 + 4.0 * 0.4).epsilon(1e-12));
}

TEST_CASE("degenerate metric input is rejected") {
  const geometry::MetricFun bad = [](std::span<const double>) {
    return Eigen::MatrixXd::Zero(2, 2).eval();
  };
  CHECK_THROWS_AS((void)geometry::fd_pipeline(bad, std::vector<double>{0.0, 0.0}, 0),
                  SingularMetricError);
}
