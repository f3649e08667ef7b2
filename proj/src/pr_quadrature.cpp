#include "prmix/pr_quadrature.hpp"

#include <stdexcept>
#include <vector>

#include "prmix/numeric.hpp"
#include "prmix/prticle.hpp"

namespace prmix {

double pr_quadrature_step_with_kvals(Eigen::VectorXd& values, const Eigen::VectorXd& cell_weights,
                                     std::span<const double> kvals, double w) {
  if (!(w > 0.0 && w < 1.0))
    throw std::invalid_argument("pr_quadrature_step: w must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(values.size());
  if (kvals.size() != n || static_cast<std::size_t>(cell_weights.size()) != n)
    throw std::invalid_argument("pr_quadrature_step: size mismatch");

  std::vector<double> terms(n);
  for (std::size_t g = 0; g < n; ++g) terms[g] = kvals[g] * values[g] * cell_weights[g];
  const double m = pairwise_sum(terms);
  if (m < kDensityFloor)
    throw degeneracy_error("quadrature update: normalizing constant underflow", 0, 0.0);

  for (std::size_t g = 0; g < n; ++g)
    values[g] = (1.0 - w) * values[g] + w * kvals[g] * values[g] / m;

  // Trapezoid-exact in real arithmetic; divide out the residual drift.
  for (std::size_t g = 0; g < n; ++g) terms[g] = values[g] * cell_weights[g];
  values /= pairwise_sum(terms);
  return m;
}

double pr_quadrature_step(GridDensity& state, const Observation& x, double w,
                          const KernelModel& kernel) {
  if (kernel.mixing_dim() != state.dim())
    throw std::invalid_argument("pr_quadrature_step: kernel/grid dimension mismatch");
  const KernelEvalCache cache(kernel, state.points());
  std::vector<double> kvals(state.size());
  cache.eval_all(x, kvals);
  return pr_quadrature_step_with_kvals(state.values(), state.cell_weights(), kvals, w);
}

QuadratureRunResult run_pr_quadrature(const Dataset& data, GridDensity state,
                                      const WeightSchedule& schedule, const KernelModel& kernel) {
  QuadratureRunResult out;
  if (data.empty()) {
    out.density = std::move(state);
    return out;
  }
  if (kernel.mixing_dim() != state.dim())
    throw std::invalid_argument("run_pr_quadrature: kernel/grid dimension mismatch");

  const KernelEvalCache cache(kernel, state.points());
  std::vector<double> kvals(state.size());
  out.m_values.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    cache.eval_all(data[i], kvals);
    try {
      out.m_values.push_back(pr_quadrature_step_with_kvals(
          state.values(), state.cell_weights(), kvals, schedule.weight_at(i + 1)));
    } catch (const degeneracy_error&) {
      throw degeneracy_error("quadrature run: normalizing constant underflow",
                             static_cast<int>(i + 1), 0.0);
    }
  }
  out.density = std::move(state);
  return out;
}

double mixture_density_quadrature(const Observation& x, const GridDensity& state,
                                  const KernelModel& kernel) {
  std::vector<double> terms(state.size());
  const KernelEvalCache cache(kernel, state.points());
  std::vector<double> kvals(state.size());
  cache.eval_all(x, kvals);
  for (std::size_t g = 0; g < state.size(); ++g)
    terms[g] = kvals[g] * state.values()[g] * state.cell_weights()[g];
  return pairwise_sum(terms);
}

}  // namespace prmix
