#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "pwave/tensor.hpp"

using namespace pwave;
using tensor::Labels;
using tensor::Tensor;

namespace {

// Independent oracle: sum over every index assignment, one free pair per
// label, linked through ginv. Exponential cost, fine at small sizes.
double naive_contract(const std::vector<Tensor>& factors, const std::vector<Labels>& labels,
                      const tensor::MetricAtPoint& metric) {
  struct Slot {
    int factor, pos;
  };
  std::map<std::string, std::vector<Slot>> pairs;
  for (std::size_t f = 0; f < factors.size(); ++f)
    for (std::size_t p = 0; p < labels[f].size(); ++p)
      pairs[labels[f][p]].push_back({static_cast<int>(f), static_cast<int>(p)});

  const int m = metric.dim;
  const int npairs = static_cast<int>(pairs.size());
  std::vector<std::string> order;
  for (const auto& [name, slots] : pairs) {
    REQUIRE(slots.size() == 2);
    order.push_back(name);
  }

  // odometer over 2*npairs indices
  std::vector<int> idx(static_cast<std::size_t>(2 * npairs), 0);
  double total = 0.0;
  for (;;) {
    std::vector<std::vector<int>> midx(factors.size());
    for (std::size_t f = 0; f < factors.size(); ++f)
      midx[f].resize(labels[f].size());
    double weight = 1.0;
    for (int q = 0; q < npairs; ++q) {
      const auto& slots = pairs[order[static_cast<std::size_t>(q)]];
      const int u = idx[static_cast<std::size_t>(2 * q)];
      const int w = idx[static_cast<std::size_t>(2 * q + 1)];
      weight *= metric.ginv(u, w);
      midx[static_cast<std::size_t>(slots[0].factor)][static_cast<std::size_t>(slots[0].pos)] = u;
      midx[static_cast<std::size_t>(slots[1].factor)][static_cast<std::size_t>(slots[1].pos)] = w;
    }
    double prod = weight;
    for (std::size_t f = 0; f < factors.size(); ++f) prod *= factors[f][midx[f]];
    total += prod;

    int carry = static_cast<int>(idx.size()) - 1;
    while (carry >= 0 && ++idx[static_cast<std::size_t>(carry)] == m)
      idx[static_cast<std::size_t>(carry--)] = 0;
    if (carry < 0) break;
  }
  return total;
}

tensor::MetricAtPoint random_spd_metric(int m, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = unif(rng);
  return tensor::MetricAtPoint::from_matrix(a * a.transpose() +
                                            Eigen::MatrixXd::Identity(m, m));
}

Tensor random_tensor(int m, int rank, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Tensor t(m, rank);
  for (auto& v : t.data()) v = unif(rng);
  return t;
}

}  // namespace

TEST_CASE("metric trace against itself gives the dimension") {
  const auto metric =
      tensor::MetricAtPoint::from_matrix(Eigen::MatrixXd::Identity(4, 4));
  Tensor g(4, 2);
  for (int i = 0; i < 4; ++i) g.at(i, i) = 1.0;
  const std::vector<Tensor> factors = {g};
  const std::vector<Labels> labels = {{"a", "a"}};
  CHECK(tensor::contract(factors, labels, metric) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("contract matches the naive oracle on random data") {
  const auto metric = random_spd_metric(3, 7);

  SUBCASE("two rank-3 factors, all labels across") {
    const std::vector<Tensor> factors = {random_tensor(3, 3, 11), random_tensor(3, 3, 12)};
    const std::vector<Labels> labels = {{"a", "b", "c"}, {"a", "b", "c"}};
    const double got = tensor::contract(factors, labels, metric);
    const double want = naive_contract(factors, labels, metric);
    CHECK(got == doctest::Approx(want).epsilon(1e-11));
  }

  SUBCASE("labels repeated inside one factor") {
    const std::vector<Tensor> factors = {random_tensor(3, 3, 21), random_tensor(3, 3, 22)};
    const std::vector<Labels> labels = {{"a", "a", "b"}, {"b", "c", "c"}};
    const double got = tensor::contract(factors, labels, metric);
    const double want = naive_contract(factors, labels, metric);
    CHECK(got == doctest::Approx(want).epsilon(1e-11));
  }

  SUBCASE("three factors of mixed rank") {
    const std::vector<Tensor> factors = {random_tensor(3, 2, 31), random_tensor(3, 4, 32),
                                         random_tensor(3, 2, 33)};
    const std::vector<Labels> labels = {{"a", "b"}, {"a", "b", "d", "e"}, {"d", "e"}};
    const double got = tensor::contract(factors, labels, metric);
    const double want = naive_contract(factors, labels, metric);
    CHECK(got == doctest::Approx(want).epsilon(1e-11));
  }
}

TEST_CASE("contract rejects malformed schemas") {
  const auto metric =
      tensor::MetricAtPoint::from_matrix(Eigen::MatrixXd::Identity(3, 3));
  const std::vector<Tensor> factors = {random_tensor(3, 2, 5)};
  CHECK_THROWS_AS(tensor::contract(factors, std::vector<Labels>{{"a", "b"}}, metric),
                  SchemaError);
  CHECK_THROWS_AS(tensor::contract(factors, std::vector<Labels>{{"a"}}, metric), SchemaError);
  CHECK_THROWS_AS(tensor::contract(factors, std::vector<Labels>{}, metric), SchemaError);
}

TEST_CASE("mode multiply acts on one slot only") {
  Tensor t(2, 2);
  t.at(0, 0) = 1.0;
  t.at(0, 1) = 2.0;
  t.at(1, 0) = 3.0;
  t.at(1, 1) = 4.0;
  Eigen::MatrixXd m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;  // swap
  const Tensor s0 = tensor::mode_multiply(t, 0, m);
  CHECK(s0.at(0, 0) == 3.0);
  CHECK(s0.at(0, 1) == 4.0);
  CHECK(s0.at(1, 0) == 1.0);
  const Tensor s1 = tensor::mode_multiply(t, 1, m);
  CHECK(s1.at(0, 0) == 2.0);
  CHECK(s1.at(1, 1) == 3.0);
}

TEST_CASE("raise_slot flips variance and is inverted by the metric") {
  const auto metric = random_spd_metric(3, 99);
  Tensor t = random_tensor(3, 3, 100);
  const Tensor up = tensor::raise_slot(t, 1, metric);
  CHECK(up.variance()[1] == tensor::Variance::Upper);
  CHECK_THROWS_AS(tensor::raise_slot(up, 1, metric), DimError);
  // lower back by hand
  Tensor back = tensor::mode_multiply(up, 1, metric.g);
  for (std::size_t q = 0; q < t.size(); ++q)
    CHECK(back.data()[q] == doctest::Approx(t.data()[q]).epsilon(1e-12));
}

TEST_CASE("index bookkeeping round-trips") {
  const Tensor t(5, 3);
  std::vector<int> idx(3);
  for (std::size_t q = 0; q < t.size(); ++q) {
    t.unflat(q, idx);
    CHECK(t.flat(idx) == q);
  }
  CHECK_THROWS_AS((void)t.flat(std::vector<int>{0, 1}), DimError);
  CHECK_THROWS_AS((void)t.flat(std::vector<int>{0, 1, 5}), DimError);
}

TEST_CASE("metric factory validates and counts signs") {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(0, 0) = -1.0;
  g(1, 1) = -2.0;
  g(2, 2) = 3.0;
  const auto metric = tensor::MetricAtPoint::from_matrix(g);
  CHECK(metric.neg == 2);
  CHECK(metric.pos == 1);
  CHECK(metric.inner(std::vector<double>{1, 0, 0}, std::vector<double>{1, 0, 0}) == -1.0);

  Eigen::MatrixXd bad = g;
  bad(0, 1) = 0.5;  // asymmetric
  CHECK_THROWS_AS(tensor::MetricAtPoint::from_matrix(bad), DimError);
  g(2, 2) = 0.0;
  CHECK_THROWS_AS(tensor::MetricAtPoint::from_matrix(g), SingularMetricError);
}

TEST_CASE("kernel and span bases agree with hand counts") {
  Eigen::MatrixXd a(2, 3);
  a << 1, 0, 0, 0, 1, 0;
  const auto ker = tensor::kernel_basis(a);
  REQUIRE(ker.size() == 1);
  CHECK(std::abs(ker[0](2)) == doctest::Approx(1.0));

  Eigen::MatrixXd cols(3, 4);
  cols.col(0) << 1, 0, 0;
  cols.col(1) << 2, 0, 0;
  cols.col(2) << 0, 3, 0;
  cols.col(3) << 1, 1, 0;
  CHECK(tensor::span_basis(cols).size() == 2);
  CHECK(tensor::numeric_rank(cols) == 2);
}

TEST_CASE("rank sequence fingerprints a nilpotent Jordan block") {
  tensor::Endo n;
  n.matrix = Eigen::MatrixXd::Zero(4, 4);
  n.matrix(0, 1) = 1.0;
  n.matrix(1, 2) = 1.0;
  n.matrix(2, 3) = 1.0;
  const std::vector<int> want = {3, 2, 1, 0};
  CHECK(tensor::rank_sequence(n) == want);

  tensor::Endo two;  // blocks of size 2+2
  two.matrix = Eigen::MatrixXd::Zero(4, 4);
  two.matrix(0, 1) = 1.0;
  two.matrix(2, 3) = 1.0;
  const std::vector<int> want2 = {2, 0, 0, 0};
  CHECK(tensor::rank_sequence(two) == want2);
}
