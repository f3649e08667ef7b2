#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prmix/kernels.hpp"
#include "prmix/observation.hpp"
#include "prmix/particles.hpp"
#include "prmix/weights.hpp"

namespace prmix {

// Raised when a normalizing constant underflows or the weight population has
// collapsed; carries the 1-based step index at which the run failed.
class degeneracy_error : public std::runtime_error {
 public:
  degeneracy_error(const std::string& what, int step_index, double ess_value)
      : std::runtime_error(what), step_index_(step_index), ess_value_(ess_value) {}

  int step_index() const { return step_index_; }
  double ess_value() const { return ess_value_; }

 private:
  int step_index_;
  double ess_value_;
};

// Core weight update given kernel values at every particle. Returns the Monte
// Carlo normalizing constant
//   m_hat = (1/T) sum_t k_t * delta_t      (pairwise summation)
// and applies delta_t <- delta_t * [1 + w (k_t / m_hat - 1)]. When
// p_at_particles is non-null, the density recursion
//   p_t <- (1-w) p_t + w k_t p_t / m_hat
// is carried along. The update leaves (1/T) sum delta = 1 invariant in real
// arithmetic.
double prticle_step_with_kvals(Eigen::VectorXd& deltas, std::span<const double> kvals, double w,
                               Eigen::VectorXd* p_at_particles = nullptr);

// One filter step for observation x with step weight w.
double prticle_step(ParticleSet& state, const Observation& x, double w,
                    const KernelModel& kernel, const KernelEvalCache& cache,
                    std::span<double> kval_buffer);

struct PrticleRunResult {
  ParticleSet state;
  std::vector<double> m_hats;
};

using StepObserver = std::function<void(int step, const ParticleSet& state, double m_hat)>;

// Sequential filter pass over the data. Step i uses w = weight_at(step_count
// + i), so a resumed state continues its schedule. After every step the
// mean-one identity (tolerance 1e-9) and strict weight positivity are
// enforced, and the run aborts with degeneracy_error when the weight
// population collapses (ESS < 3 with T >= 3).
PrticleRunResult run_prticle(const Dataset& data, ParticleSet state,
                             const WeightSchedule& schedule, const KernelModel& kernel,
                             const StepObserver& observer = {});

// Filter runs over n_perms random reorderings of the data, each starting from
// the same particles with unit weights; the returned state carries the
// pointwise average of the final weight vectors (still mean one).
ParticleSet permutation_average(const Dataset& data, const ParticleSet& base_state,
                                const WeightSchedule& schedule, const KernelModel& kernel,
                                int n_perms, std::uint64_t seed);

}  // namespace prmix
