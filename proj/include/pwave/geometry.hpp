#ifndef PWAVE_GEOMETRY_HPP
#define PWAVE_GEOMETRY_HPP

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pwave/families.hpp"
#include "pwave/tensor.hpp"

namespace pwave::geometry {

// Curvature data frozen at one point: lowered[i] is the i-th covariant
// derivative of R as a fully lowered rank-(4+i) tensor, and mixed[i] is the
// same tensor with the fourth curvature slot raised (the affine variant).
struct CurvatureJet {
  std::vector<double> point;
  tensor::MetricAtPoint metric;
  std::vector<tensor::Tensor> lowered;
  std::vector<tensor::Tensor> mixed;

  int order() const { return static_cast<int>(lowered.size()) - 1; }
  const tensor::Tensor& r() const { return lowered[0]; }
};

// Builds the curvature tensor and its covariant derivatives symbolically from
// a family's Christoffel catalog, once; evaluation per point is then exact up
// to round-off. Construction cost grows with the requested order.
class SymbolicCurvature {
 public:
  SymbolicCurvature(const families::ManifoldSpec& spec, int order);
  ~SymbolicCurvature();
  SymbolicCurvature(SymbolicCurvature&&) noexcept;
  SymbolicCurvature& operator=(SymbolicCurvature&&) noexcept;

  int order() const;
  int dim() const;

  CurvatureJet eval(std::span<const double> point) const;

  // Structural triangularity violations of the mixed tensors: entries whose
  // contravariant index fails to exceed every covariant index. Exact, no
  // evaluation involved.
  std::vector<std::string> structural_violations() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Lowered curvature tensor R(d_i, d_j, d_k, d_l) at a point.
tensor::Tensor curvature_at(const families::ManifoldSpec& spec, std::span<const double> point);

// Curvature plus nu covariant derivatives at a point.
CurvatureJet nabla_r(const families::ManifoldSpec& spec, std::span<const double> point, int order);

Eigen::MatrixXd ricci(const CurvatureJet& jet);
double scalar_curvature(const CurvatureJet& jet);
Eigen::MatrixXd ricci_at(const families::ManifoldSpec& spec, std::span<const double> point);
double scalar_at(const families::ManifoldSpec& spec, std::span<const double> point);

// Independent finite-difference route from a raw metric callable; no use of
// the closed-form Christoffel catalog. Noise grows with order; order <= 2.
using MetricFun = std::function<Eigen::MatrixXd(std::span<const double>)>;
CurvatureJet fd_pipeline(const MetricFun& gfun, std::span<const double> point, int order);

struct PlaneWaveReport {
  bool ok = true;
  std::vector<std::string> violations;
};

// Verifies the defining structure on a family spec: Christoffel entries only
// above the diagonal, dependence limited to lower coordinates, and mixed
// nabla^nu R triangular for nu <= 2. Structure checks are exact; the sampled
// finite-difference cross-check of Gamma uses the given tolerance.
PlaneWaveReport is_plane_wave_form(const families::ManifoldSpec& spec, int samples,
                                   unsigned seed, double tol = 1e-6);

// Numeric triangularity scan of an already-computed jet; used for control
// metrics that do not come from a family spec.
PlaneWaveReport triangularity_violations(const CurvatureJet& jet, double tol = 1e-9);

}  // namespace pwave::geometry

#endif
