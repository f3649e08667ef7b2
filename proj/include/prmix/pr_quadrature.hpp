#pragma once

#include <span>
#include <vector>

#include "prmix/grid.hpp"
#include "prmix/kernels.hpp"
#include "prmix/observation.hpp"
#include "prmix/weights.hpp"

namespace prmix {

// Core recursion update on grid values, given the kernel already evaluated at
// every grid point. Returns the normalizing constant
//   m = sum_g k_g * p_g * cw_g,
// and replaces p with (1-w) p + w k p / m, renormalized to absorb drift.
// Throws degeneracy_error (see prticle.hpp) when m underflows.
double pr_quadrature_step_with_kvals(Eigen::VectorXd& values, const Eigen::VectorXd& cell_weights,
                                     std::span<const double> kvals, double w);

// One recursion step for observation x with step weight w; returns m.
double pr_quadrature_step(GridDensity& state, const Observation& x, double w,
                          const KernelModel& kernel);

struct QuadratureRunResult {
  GridDensity density;
  std::vector<double> m_values;
};

// Full pass over the data in order, with step weights from the schedule
// (continuing from any steps the state has already absorbed counts as a fresh
// run here; the grid carries no step counter).
QuadratureRunResult run_pr_quadrature(const Dataset& data, GridDensity state,
                                      const WeightSchedule& schedule, const KernelModel& kernel);

// Mixture density of the gridded mixing estimate at x:
//   sum_g k(x | u_g) p_g cw_g.
double mixture_density_quadrature(const Observation& x, const GridDensity& state,
                                  const KernelModel& kernel);

}  // namespace prmix
