#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "prmix/grid.hpp"
#include "prmix/kernels.hpp"
#include "prmix/particles.hpp"
#include "prmix/rng.hpp"

namespace prmix {

// A pointwise-evaluable, nonnegative density with a batched entry point
// (points are columns). Wraps grids, particle mixtures, and weighted KDEs.
struct DensityEstimate {
  int dim = 0;
  std::function<void(const Eigen::MatrixXd& points, Eigen::VectorXd& out)> eval_batch;

  double operator()(const Eigen::VectorXd& x) const;
  Eigen::VectorXd eval(const Eigen::MatrixXd& points) const;
};

// Gridded mixing density, evaluated by multilinear interpolation.
DensityEstimate grid_estimate(const GridDensity& grid);

// Mixture density of the weighted cloud over the data space:
//   (1/T) sum_t k(x | U_t) delta_t.
// Euclidean kernels only (batch points are data-space columns).
DensityEstimate particle_mixture_estimate(const ParticleSet& state, const KernelModel& kernel);

// Same mixture density at a single observation of any kind.
double mixture_density_particle(const Observation& x, const ParticleSet& state,
                                const KernelModel& kernel);

// Mixture density of a gridded mixing estimate at many points at once; the
// isotropic-Gaussian tensor-grid case runs as a matrix contraction.
Eigen::VectorXd mixture_density_quadrature_batch(const Eigen::MatrixXd& points,
                                                 const GridDensity& state,
                                                 const KernelModel& kernel);
DensityEstimate quadrature_mixture_estimate(const GridDensity& state, const KernelModel& kernel);

// Draws from the mixture represented by a gridded mixing density: pick a grid
// node by its probability mass, then draw from the kernel at that node.
std::function<Eigen::VectorXd(RngStream&)> quadrature_mixture_sampler(const GridDensity& state,
                                                                      const KernelModel& kernel);

// Weight-averaged Gaussian-product KDE of the particle coordinates.
DensityEstimate weighted_kde_estimate(const ParticleSet& state, const Eigen::VectorXd& bandwidth);
Eigen::VectorXd weighted_kde(const ParticleSet& state, const Eigen::VectorXd& bandwidth,
                             const Eigen::MatrixXd& eval_points);

// Per-dimension rule-of-thumb bandwidth 1.06 * sd_j * ESS^(-1/5), with the
// weighted standard deviation and the effective sample size standing in for
// the raw count.
Eigen::VectorXd silverman_bandwidth(const ParticleSet& state);

// Trapezoid integral of |a - b| over the evaluation grid.
double l1_distance(const DensityEstimate& a, const DensityEstimate& b, const GridDensity& grid);

struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int flagged = 0;  // points where a density hit the floor
  int n = 0;
};

// Monte Carlo Kullback-Leibler divergence using draws from the reference:
//   (1/n) sum log(ref(Z_j) / approx(Z_j)),  Z_j ~ ref.
KlEstimate kl_divergence_mc(const DensityEstimate& reference,
                            const std::function<Eigen::VectorXd(RngStream&)>& ref_sampler,
                            const DensityEstimate& approx, int n_mc, RngStream& rng);

// Quadrature variant on an explicit grid (preferred for 1-d problems):
//   integral of ref * log(ref / approx).
KlEstimate kl_divergence_quadrature(const DensityEstimate& reference,
                                    const DensityEstimate& approx, const GridDensity& xgrid);

// {"name":..., "value":..., "std_error":..., "flagged_points":...}
std::string metric_json(const std::string& name, double value, double std_error = 0.0,
                        int flagged_points = 0);
std::string metric_json(const std::string& name, const KlEstimate& kl);

// Conditional mark density at a location, normalized on the mark grid:
//   g(x | s) proportional to
//   sum_t delta_t * marginal_t(s) * N(log(x-2) | cond_t(s)) / (x-2).
Eigen::VectorXd conditional_mark_density(double s1, double s2, const Eigen::VectorXd& mark_grid,
                                         const ParticleSet& state, const KernelModel& kernel);

// Gaussian KDE of the marks of all observations within `radius` of the
// location, normalized on the mark grid. Benchmark overlay only.
Eigen::VectorXd empirical_mark_density(const Dataset& data, double s1, double s2, double radius,
                                       double bandwidth, const Eigen::VectorXd& mark_grid);

}  // namespace prmix
