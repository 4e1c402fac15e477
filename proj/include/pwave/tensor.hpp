#ifndef PWAVE_TENSOR_HPP
#define PWAVE_TENSOR_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pwave/errors.hpp"

namespace pwave::tensor {

enum class Variance : std::uint8_t { Lower, Upper };

// Dense multi-index array over one tangent space, row-major, with a variance
// flag per slot. Everything downstream stores curvature fully lowered and
// raises slots explicitly when an operator needs them.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int dim, int rank);
  Tensor(int dim, int rank, std::vector<Variance> variance);

  int dim() const { return dim_; }
  int rank() const { return rank_; }
  const std::vector<Variance>& variance() const { return variance_; }
  std::vector<Variance>& variance() { return variance_; }

  double& operator[](std::span<const int> idx) { return data_[flat(idx)]; }
  double operator[](std::span<const int> idx) const { return data_[flat(idx)]; }

  template <class... I>
  double& at(I... idx) {
    const int buf[] = {static_cast<int>(idx)...};
    return data_[flat(buf)];
  }
  template <class... I>
  double at(I... idx) const {
    const int buf[] = {static_cast<int>(idx)...};
    return data_[flat(buf)];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  double max_abs() const;

  std::size_t flat(std::span<const int> idx) const;
  // Inverse of flat(); writes the multi-index for a linear position.
  void unflat(std::size_t pos, std::span<int> idx) const;

 private:
  int dim_ = 0;
  int rank_ = 0;
  std::vector<Variance> variance_;
  std::vector<double> data_;
};

// Metric and its inverse frozen at a single point.
struct MetricAtPoint {
  int dim = 0;
  Eigen::MatrixXd g;
  Eigen::MatrixXd ginv;
  int neg = 0;  // eigenvalue signs: signature is (neg, pos)
  int pos = 0;

  // Validates symmetry, inverts, and counts eigenvalue signs. Throws
  // SingularMetricError when an eigenvalue sits at zero within tol.
  static MetricAtPoint from_matrix(const Eigen::MatrixXd& g, double tol = 1e-12);

  double inner(std::span<const double> a, std::span<const double> b) const;
};

// Endomorphism of the tangent space at basepoint, coordinate basis.
struct Endo {
  Eigen::MatrixXd matrix;
  std::vector<double> basepoint;
};

// One label per slot of each factor; a label occurring twice marks the pair
// of slots joined by one inverse-metric factor.
using Labels = std::vector<std::string>;

// Full contraction of lowered factors: every label must occur exactly twice
// across all slots and the result is the scalar obtained by summing factor
// products against one ginv per label pair. Implemented as pairwise
// reductions; the naive all-assignments sum is kept as a test oracle only.
double contract(std::span<const Tensor> factors, std::span<const Labels> labels,
                const MetricAtPoint& metric);

// T'[..i..] = sum_j M(i,j) T[..j..] along the given slot.
Tensor mode_multiply(const Tensor& t, int slot, const Eigen::MatrixXd& m);

// Contracts ginv into one slot, flipping its variance to Upper.
Tensor raise_slot(const Tensor& t, int slot, const MetricAtPoint& metric);

// Orthonormal basis of the numerical null space {v : |Av| <= tol*|A|*|v|}.
// A zero matrix yields the full space.
std::vector<Eigen::VectorXd> kernel_basis(const Eigen::MatrixXd& a, double tol = 1e-8);
std::vector<Eigen::VectorXd> kernel_basis(const Endo& a, double tol = 1e-8);

// Numerical rank with the same tol*sigma_max cutoff (1 when sigma_max is 0).
int numeric_rank(const Eigen::MatrixXd& a, double tol = 1e-8);

// Ranks of A^1, A^2, ..., A^dim, each thresholded against its own largest
// singular value. The Jordan-type fingerprint used by the operator probes.
std::vector<int> rank_sequence(const Endo& a, double tol = 1e-8);

// Orthonormal basis of the column span of a (columns are vectors).
std::vector<Eigen::VectorXd> span_basis(const Eigen::MatrixXd& a, double tol = 1e-8);

}  // namespace pwave::tensor

#endif
