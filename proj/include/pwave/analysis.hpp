#ifndef PWAVE_ANALYSIS_HPP
#define PWAVE_ANALYSIS_HPP

#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pwave/expr.hpp"
#include "pwave/families.hpp"
#include "pwave/geometry.hpp"
#include "pwave/tensor.hpp"

namespace pwave::analysis {

// J(xi): x -> R(x,xi)xi. Built from the jet's mixed curvature tensor.
tensor::Endo jacobi(const geometry::CurvatureJet& jet, std::span<const double> xi);

// S(xi): x -> (nabla_xi R)(x,xi)xi. Needs jet order >= 1.
tensor::Endo szabo(const geometry::CurvatureJet& jet, std::span<const double> xi);

// R(pi): x -> R(e1,e2)x for an orthonormal pair: |g(e1,e1)| = |g(e2,e2)| = 1
// and g(e1,e2) = 0, each to 1e-9; PlaneError otherwise.
tensor::Endo skew_op(const geometry::CurvatureJet& jet, std::span<const double> e1,
                     std::span<const double> e2);

// Scaled nilpotency residuals ||A^m|| / max(1, ||A||^m) over random unit
// vectors and orthonormal planes; rank sequences recorded from the first
// sample as a Jordan-type fingerprint.
struct NilpotencyReport {
  int samples = 0;
  double jacobi_residual = 0.0;
  double szabo_residual = 0.0;
  double skew_residual = 0.0;
  std::vector<int> jacobi_ranks, szabo_ranks, skew_ranks;
};
NilpotencyReport nilpotency_report(const families::ManifoldSpec& spec,
                                   std::span<const double> point, int samples, unsigned seed);

// Full-contraction schema: factors are covariant derivatives of curvature,
// each slot carries a label, every label occurs exactly twice across the
// schema and contributes one inverse-metric pairing.
struct WeylFactor {
  int order = 0;
  std::vector<std::string> labels;  // 4 + order entries
};

struct WeylSchema {
  std::vector<WeylFactor> factors;

  int max_order() const;

  // Text form: factors joined by ';', each `R[nu](a,b,c,d|j1,...,jnu)`; the
  // '|' part is absent when nu = 0. SchemaError with a reason on bad input.
  static WeylSchema parse(const std::string& text);

  // tau, rho2, R2, gradR2.
  static WeylSchema builtin(const std::string& name);
};

// Well-formed random schema: 1..max_factors factors, orders <= max_order,
// labels paired uniformly at random across all slots.
WeylSchema random_schema(std::mt19937_64& rng, int max_factors = 3, int max_order = 2);

double weyl_eval(const geometry::CurvatureJet& jet, const WeylSchema& schema);
double weyl_eval(const families::ManifoldSpec& spec, std::span<const double> point,
                 const WeylSchema& schema);

// |f'| / sqrt(1 + f'^2) in closed form on the 6-dimensional specialized
// family (the one built from a single f with F = y z1 + f z2).
double alpha16(const families::ManifoldSpec& spec, std::span<const double> point);

// Same quantity recovered from curvature data alone: representatives of
// ker(nabla R) and ker(R) complementary to their intersection, then
// |g(Z1',Z2')| / (|Z1'| |Z2'|). ModelError when the kernel dimensions are not
// (3,3) with a 2-dimensional intersection.
double alpha16_model(const geometry::CurvatureJet& jet);

// Derivative-ratio invariants of the two one-function families.
// M4 kind: f^(p+2) (f'')^(p-1) / (f''')^p with p >= 2; the printed form of
// the source has the denominator exponent -p, exposed via literal_form.
// M5 kind: f^(k+p+3) (f^(p+3))^(k-1) / (f^(p+4))^k with k >= 2.
enum class RatioKind { M4, M5 };
double alpha_ratio(RatioKind kind, const expr::Expr& f, int p, int k, double y,
                   bool literal_form = false);
double alpha4(const families::ManifoldSpec& spec, int p, std::span<const double> point,
              bool literal_form = false);
double alpha5(const families::ManifoldSpec& spec, int k, std::span<const double> point);

// Ten-index contraction of nabla R against five copies of the inverse
// Hessian on the gradient-product family; DomainError unless the Hessian is
// definite at the point.
double alpha3(const families::ManifoldSpec& spec, std::span<const double> point);

// sum_i (f_i'''(u_i) + 4 u_i)^2 on the triple-block family.
double alpha6(const families::ManifoldSpec& spec, std::span<const double> point);

// Curvature-adapted basis of the 6-dimensional family at a point with
// f'' > 0 (HypothesisError otherwise). Stored vectors are the direct
// construction; normalized() applies z1 -> z1 - f' z2, after which the only
// nonzero model entries are R(X,Y,Z1,X) = 1 and
// nablaR(X,Y,Y,X;Z2) = nablaR(X,Y,Z2,X;Y) = 1.
struct NormalizedBasisM1 {
  Eigen::VectorXd x, y, z1, z2, yt, xt;
  double eps1 = 0.0, eps2 = 0.0;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double fprime = 0.0;

  NormalizedBasisM1 normalized() const;
};
NormalizedBasisM1 normalized_basis_m1(const families::ManifoldSpec& spec,
                                      std::span<const double> point);

// Range/kernel subspaces of the (3,1)-variance curvature operators:
// w1 = Range R, w2 = Range nabla R, w3 = Span{R(.,R(.,.).).}, w4 = ker R,
// w5 = ker nabla R. ModelError unless dims come out (3,3,2,3,3).
struct SubspaceSet {
  std::vector<Eigen::VectorXd> w1, w2, w3, w4, w5;
};
SubspaceSet w_subspaces(const geometry::CurvatureJet& jet);

// Reads the residual directions of w2 and w5 modulo w3 in the (z1,z2) plane
// of the given basis; their slope product recovers (f')^2.
double quotient_slope_product(const SubspaceSet& ws, const NormalizedBasisM1& basis);

// Evaluates one invariant over several points; a spread above tolerance
// certifies a homogeneity failure, constancy certifies nothing. Ids:
// alpha16, alpha3, alpha4[:p], alpha5[:k], alpha6.
struct HomogeneityReport {
  std::string id;
  std::vector<double> values;
  double spread = 0.0;
};
HomogeneityReport homogeneity_probe(const families::ManifoldSpec& spec, const std::string& id,
                                    std::span<const std::vector<double>> points);

// Pullback of the whole jet under the basis b (columns are the new basis
// vectors): covariant slots see b, the raised slot sees b^-1, the metric
// becomes b^T g b.
geometry::CurvatureJet basis_change(const geometry::CurvatureJet& jet, const Eigen::MatrixXd& b);

// exp(g^-1 K) for random skew K: preserves g exactly (up to round-off).
Eigen::MatrixXd random_pseudo_orthogonal(const tensor::MetricAtPoint& metric,
                                         std::mt19937_64& rng);

// Rejection-sampled unit vector: Gaussian components, keep |g(v,v)| > 0.1,
// normalize to g(v,v) = +-1. want_sign > 0 forces spacelike, < 0 timelike.
Eigen::VectorXd random_unit_vector(const tensor::MetricAtPoint& metric, std::mt19937_64& rng,
                                   int want_sign = 0);

// Orthonormal pair with both legs of the same unit sign (random when
// want_sign = 0); g(e1,e2) = 0 by construction.
std::pair<Eigen::VectorXd, Eigen::VectorXd> random_orthonormal_plane(
    const tensor::MetricAtPoint& metric, std::mt19937_64& rng, int want_sign = 0);

}  // namespace pwave::analysis

#endif
