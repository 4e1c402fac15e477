#include "pwave/tensor.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace pwave::tensor {

Tensor::Tensor(int dim, int rank)
    : Tensor(dim, rank, std::vector<Variance>(rank, Variance::Lower)) {}

Tensor::Tensor(int dim, int rank, std::vector<Variance> variance)
    : dim_(dim), rank_(rank), variance_(std::move(variance)) {
  if (dim < 1) throw DimError("tensor dimension must be positive");
  if (rank < 0) throw DimError("tensor rank must be non-negative");
  if (static_cast<int>(variance_.size()) != rank)
    throw DimError("variance list does not match rank");
  std::size_t n = 1;
  for (int r = 0; r < rank; ++r) n *= static_cast<std::size_t>(dim);
  data_.assign(n, 0.0);
}

std::size_t Tensor::flat(std::span<const int> idx) const {
  if (static_cast<int>(idx.size()) != rank_)
    throw DimError("index arity does not match tensor rank");
  std::size_t pos = 0;
  for (int r = 0; r < rank_; ++r) {
    if (idx[r] < 0 || idx[r] >= dim_) throw DimError("tensor index out of range");
    pos = pos * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(idx[r]);
  }
  return pos;
}

void Tensor::unflat(std::size_t pos, std::span<int> idx) const {
  for (int r = rank_ - 1; r >= 0; --r) {
    idx[r] = static_cast<int>(pos % static_cast<std::size_t>(dim_));
    pos /= static_cast<std::size_t>(dim_);
  }
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

MetricAtPoint MetricAtPoint::from_matrix(const Eigen::MatrixXd& g, double tol) {
  if (g.rows() != g.cols() || g.rows() < 1)
    throw DimError("metric must be a square matrix");
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, g.cwiseAbs().maxCoeff()))
    throw DimError("metric must be symmetric");

  MetricAtPoint m;
  m.dim = static_cast<int>(g.rows());
  m.g = 0.5 * (g + g.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.g);
  const auto& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < m.dim; ++i) {
    if (std::abs(ev[i]) <= tol * scale)
      throw SingularMetricError("metric eigenvalue vanishes at this point");
    (ev[i] < 0 ? m.neg : m.pos)++;
  }
  m.ginv = m.g.inverse();
  return m;
}

double MetricAtPoint::inner(std::span<const double> a, std::span<const double> b) const {
  if (static_cast<int>(a.size()) != dim || static_cast<int>(b.size()) != dim)
    throw DimError("vector length does not match metric dimension");
  double s = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) s += g(i, j) * a[i] * b[j];
  return s;
}

Tensor mode_multiply(const Tensor& t, int slot, const Eigen::MatrixXd& m) {
  if (slot < 0 || slot >= t.rank()) throw DimError("mode slot out of range");
  if (m.rows() != t.dim() || m.cols() != t.dim())
    throw DimError("mode matrix does not match tensor dimension");
  Tensor out(t.dim(), t.rank(), t.variance());
  const int d = t.dim();
  std::vector<int> idx(static_cast<std::size_t>(t.rank()));
  // stride of the slot in the row-major layout
  std::size_t stride = 1;
  for (int r = t.rank() - 1; r > slot; --r) stride *= static_cast<std::size_t>(d);
  const std::size_t n = t.size();
  for (std::size_t posof_zero = 0; posof_zero < n; ++posof_zero) {
    t.unflat(posof_zero, idx);
    if (idx[slot] != 0) continue;  // visit each fiber once, at slot index 0
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j)
        s += m(i, j) * t.data()[posof_zero + stride * static_cast<std::size_t>(j)];
      out.data()[posof_zero + stride * static_cast<std::size_t>(i)] = s;
    }
  }
  return out;
}

Tensor raise_slot(const Tensor& t, int slot, const MetricAtPoint& metric) {
  if (t.dim() != metric.dim) throw DimError("tensor and metric dimensions differ");
  if (t.variance()[static_cast<std::size_t>(slot)] != Variance::Lower)
    throw DimError("slot is already contravariant");
  Tensor out = mode_multiply(t, slot, metric.ginv);
  out.variance()[static_cast<std::size_t>(slot)] = Variance::Upper;
  return out;
}

namespace {

// Work item during pairwise contraction: a tensor plus its live labels.
struct Piece {
  Tensor t;
  Labels lab;
};

// Traces out slots a < b (plain index identification; the ginv for the pair
// must already have been absorbed by raising one of the two slots).
Tensor trace_pair(const Tensor& t, int a, int b) {
  const int d = t.dim();
  std::vector<Variance> var;
  for (int r = 0; r < t.rank(); ++r)
    if (r != a && r != b) var.push_back(t.variance()[static_cast<std::size_t>(r)]);
  Tensor out(d, t.rank() - 2, var);
  std::vector<int> oidx(static_cast<std::size_t>(out.rank()));
  std::vector<int> tidx(static_cast<std::size_t>(t.rank()));
  for (std::size_t p = 0; p < out.size(); ++p) {
    out.unflat(p, oidx);
    int w = 0;
    for (int r = 0; r < t.rank(); ++r)
      if (r != a && r != b) tidx[static_cast<std::size_t>(r)] = oidx[static_cast<std::size_t>(w++)];
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      tidx[static_cast<std::size_t>(a)] = c;
      tidx[static_cast<std::size_t>(b)] = c;
      s += t[tidx];
    }
    out.data()[p] = s;
  }
  return out;
}

// Collapses repeated labels inside one piece to scalars-free form.
void self_contract(Piece& p, const MetricAtPoint& metric) {
  for (;;) {
    int a = -1, b = -1;
    for (std::size_t i = 0; i < p.lab.size() && a < 0; ++i)
      for (std::size_t j = i + 1; j < p.lab.size(); ++j)
        if (p.lab[i] == p.lab[j]) {
          a = static_cast<int>(i);
          b = static_cast<int>(j);
          break;
        }
    if (a < 0) return;
    Tensor raised = raise_slot(p.t, b, metric);
    p.t = trace_pair(raised, a, b);
    Labels keep;
    for (std::size_t r = 0; r < p.lab.size(); ++r)
      if (static_cast<int>(r) != a && static_cast<int>(r) != b) keep.push_back(p.lab[r]);
    p.lab = std::move(keep);
  }
}

// Contracts every shared label between two pieces; one ginv per pair is
// absorbed by raising the slot on the right factor.
Piece tensordot(const Piece& pa, const Piece& pb, const MetricAtPoint& metric) {
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < pa.lab.size(); ++i)
    for (std::size_t j = 0; j < pb.lab.size(); ++j)
      if (pa.lab[i] == pb.lab[j]) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));

  Tensor b = pb.t;
  for (auto& pr : pairs) b = raise_slot(b, pr.second, metric);

  const int d = pa.t.dim();
  std::vector<int> afree, bfree;
  for (int r = 0; r < static_cast<int>(pa.lab.size()); ++r) {
    bool shared = false;
    for (auto& pr : pairs)
      if (pr.first == r) shared = true;
    if (!shared) afree.push_back(r);
  }
  for (int r = 0; r < static_cast<int>(pb.lab.size()); ++r) {
    bool shared = false;
    for (auto& pr : pairs)
      if (pr.second == r) shared = true;
    if (!shared) bfree.push_back(r);
  }

  Piece out;
  std::vector<Variance> var;
  for (int r : afree) var.push_back(pa.t.variance()[static_cast<std::size_t>(r)]);
  for (int r : bfree) var.push_back(b.variance()[static_cast<std::size_t>(r)]);
  out.t = Tensor(d, static_cast<int>(afree.size() + bfree.size()), var);
  for (int r : afree) out.lab.push_back(pa.lab[static_cast<std::size_t>(r)]);
  for (int r : bfree) out.lab.push_back(pb.lab[static_cast<std::size_t>(r)]);

  const int nc = static_cast<int>(pairs.size());
  std::size_t ncomb = 1;
  for (int c = 0; c < nc; ++c) ncomb *= static_cast<std::size_t>(d);

  std::vector<int> aidx(pa.lab.size()), bidx(pb.lab.size()), oidx(out.lab.size()),
      cidx(static_cast<std::size_t>(nc));
  for (std::size_t p = 0; p < out.t.size(); ++p) {
    out.t.unflat(p, oidx);
    int w = 0;
    for (int r : afree) aidx[static_cast<std::size_t>(r)] = oidx[static_cast<std::size_t>(w++)];
    for (int r : bfree) bidx[static_cast<std::size_t>(r)] = oidx[static_cast<std::size_t>(w++)];
    double s = 0.0;
    for (std::size_t comb = 0; comb < ncomb; ++comb) {
      std::size_t rem = comb;
      for (int c = nc - 1; c >= 0; --c) {
        cidx[static_cast<std::size_t>(c)] = static_cast<int>(rem % static_cast<std::size_t>(d));
        rem /= static_cast<std::size_t>(d);
      }
      for (int c = 0; c < nc; ++c) {
        aidx[static_cast<std::size_t>(pairs[static_cast<std::size_t>(c)].first)] =
            cidx[static_cast<std::size_t>(c)];
        bidx[static_cast<std::size_t>(pairs[static_cast<std::size_t>(c)].second)] =
            cidx[static_cast<std::size_t>(c)];
      }
      s += pa.t[aidx] * b[bidx];
    }
    out.t.data()[p] = s;
  }
  return out;
}

}  // namespace

double contract(std::span<const Tensor> factors, std::span<const Labels> labels,
                const MetricAtPoint& metric) {
  if (factors.size() != labels.size())
    throw SchemaError("one label list required per factor");
  if (factors.empty()) throw SchemaError("contraction needs at least one factor");

  std::map<std::string, int> count;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (factors[f].dim() != metric.dim)
      throw DimError("factor dimension does not match metric");
    if (static_cast<int>(labels[f].size()) != factors[f].rank())
      throw SchemaError("label list arity does not match factor rank");
    for (int r = 0; r < factors[f].rank(); ++r) {
      if (factors[f].variance()[static_cast<std::size_t>(r)] != Variance::Lower)
        throw SchemaError("contract expects fully lowered factors");
      count[labels[f][static_cast<std::size_t>(r)]]++;
    }
  }
  for (auto& [name, c] : count)
    if (c != 2) throw SchemaError("label '" + name + "' occurs " + std::to_string(c) +
                                  " times; full contraction needs exactly 2");

  std::vector<Piece> pieces;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    pieces.push_back({factors[f], labels[f]});
    self_contract(pieces.back(), metric);
  }

  // Reduce greedily, always joining the pair with the most shared labels so
  // intermediate ranks stay small.
  while (pieces.size() > 1) {
    std::size_t bi = 0, bj = 1;
    int best = -1;
    for (std::size_t i = 0; i < pieces.size(); ++i)
      for (std::size_t j = i + 1; j < pieces.size(); ++j) {
        int shared = 0;
        for (auto& la : pieces[i].lab)
          for (auto& lb : pieces[j].lab)
            if (la == lb) ++shared;
        if (shared > best) {
          best = shared;
          bi = i;
          bj = j;
        }
      }
    Piece merged = tensordot(pieces[bi], pieces[bj], metric);
    self_contract(merged, metric);
    pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(bj));
    pieces[bi] = std::move(merged);
  }

  if (!pieces[0].lab.empty()) throw SchemaError("labels left open after contraction");
  return pieces[0].t.data()[0];
}

std::vector<Eigen::VectorXd> kernel_basis(const Eigen::MatrixXd& a, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  std::vector<Eigen::VectorXd> out;
  const int n = static_cast<int>(a.cols());
  const int nsv = static_cast<int>(sv.size());
  for (int i = 0; i < n; ++i) {
    const double s = i < nsv ? sv[i] : 0.0;
    if (smax == 0.0 || s <= tol * smax) out.push_back(svd.matrixV().col(i));
  }
  return out;
}

std::vector<Eigen::VectorXd> kernel_basis(const Endo& a, double tol) {
  return kernel_basis(a.matrix, tol);
}

int numeric_rank(const Eigen::MatrixXd& a, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  const double cut = tol * (smax > 0.0 ? smax : 1.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++rank;
  return rank;
}

std::vector<int> rank_sequence(const Endo& a, double tol) {
  const int n = static_cast<int>(a.matrix.rows());
  if (a.matrix.cols() != n) throw DimError("rank_sequence needs a square matrix");
  std::vector<int> out;
  Eigen::MatrixXd p = a.matrix;
  for (int k = 1; k <= n; ++k) {
    out.push_back(numeric_rank(p, tol));
    p = p * a.matrix;
  }
  return out;
}

std::vector<Eigen::VectorXd> span_basis(const Eigen::MatrixXd& a, double tol) {
  if (a.cols() == 0) return {};
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < sv.size(); ++i)
    if (smax > 0.0 && sv[i] > tol * smax) out.push_back(svd.matrixU().col(i));
  return out;
}

}  // namespace pwave::tensor
