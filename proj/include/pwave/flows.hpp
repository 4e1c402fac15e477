#ifndef PWAVE_FLOWS_HPP
#define PWAVE_FLOWS_HPP

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pwave/families.hpp"

namespace pwave::flows {

// Sampled curve on a uniform parameter grid with positions and velocities per
// node. Velocities come from the integrator, never from differencing.
struct Curve {
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  std::vector<std::vector<double>> v;

  int nodes() const { return static_cast<int>(t.size()); }
  int dim() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }
};

// Quadrature: stage-by-stage cumulative Simpson on the triangular system,
// solving coordinates in increasing order (each stage needs only lower ones).
// RK4: classical Runge-Kutta on the full first-order system; independent
// route kept as an oracle against convention bugs.
enum class Integrator { Quadrature, RK4 };

// Geodesic with gamma(0)=x0, gamma'(0)=v0 on [0,t1] with `steps` intervals.
// Complete for family specs, so t1 of any magnitude is legal.
Curve geodesic_ivp(const families::ManifoldSpec& spec, std::span<const double> x0,
                   std::span<const double> v0, double t1, int steps,
                   Integrator method = Integrator::Quadrature);

struct BvpResult {
  std::vector<double> v0;
  Curve curve;
};

// Unique geodesic with gamma(0)=p, gamma(1)=q. Stage k determines the initial
// velocity component by one double quadrature over the already-known lower
// coordinates; no iteration.
BvpResult geodesic_bvp(const families::ManifoldSpec& spec, std::span<const double> p,
                       std::span<const double> q, int steps);

// max over interior nodes and coordinates of |x'' + Gamma(x', x')| using
// centered second differences of the stored positions.
double max_geodesic_residual(const families::ManifoldSpec& spec, const Curve& c);

// Parallel transport of a0 along the curve; returns the components at every
// node. Quadrature solves the triangular recursion coordinate by coordinate;
// RK4 needs an even interval count (it steps over node pairs).
std::vector<std::vector<double>> parallel_transport(const families::ManifoldSpec& spec,
                                                    const Curve& curve,
                                                    std::span<const double> a0,
                                                    Integrator method = Integrator::Quadrature);

// Holonomy sample. Row i of `matrix` holds the components of the transported
// i-th coordinate vector, so the containment statement reads: unit diagonal,
// zeros below. In this convention the isometry property is H g H^T = g at the
// basepoint.
struct HolonomyElement {
  Eigen::MatrixXd matrix;
  std::vector<double> basepoint;
  double unipotent_residual = 0.0;  // max |H_ii - 1| and |H_ij|, i > j
  double metric_residual = 0.0;     // ||H g H^T - g||_inf at the basepoint
};

// Transports the full coordinate frame around the loop. LoopError unless the
// endpoints agree to 1e-12.
HolonomyElement holonomy_loop(const families::ManifoldSpec& spec, const Curve& loop,
                              Integrator method = Integrator::Quadrature);

// Analytic loop on parameter [0,1]; sample() puts it on a uniform grid.
struct SmoothLoop {
  std::function<std::vector<double>(double)> pos;
  std::function<std::vector<double>(double)> vel;
  Curve sample(int steps) const;
};

// Rectangle in the (ci,cj) coordinate plane with side lengths si, sj, traversed
// with a smoothed profile so velocities vanish at the corners; sampling with a
// multiple of 4 intervals puts the corners on grid nodes.
SmoothLoop rectangle_loop(std::vector<double> base, int ci, int cj, double si, double sj);

// Random closed loop: three Fourier harmonics per coordinate, coefficient
// magnitudes bounded by `amplitude`, closed by construction.
SmoothLoop fourier_loop(int dim, std::vector<double> base, unsigned seed, double amplitude);

// Independent transport oracle: RK4 of the frame equation along the analytic
// loop (no shared quadrature machinery). Returns the holonomy matrix in the
// same row convention as HolonomyElement.
Eigen::MatrixXd rk4_frame_transport(const families::ManifoldSpec& spec, const SmoothLoop& loop,
                                    int steps);

// CSV with header t,x1,...,xm,v1,...,vm, one row per node, 17 significant
// digits. read throws ConfigError on malformed input.
void write_curve_csv(const Curve& c, std::ostream& out);
void write_curve_csv(const Curve& c, const std::string& path);
Curve read_curve_csv(const std::string& path);

}  // namespace pwave::flows

#endif
