#include "prmix/prticle.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "prmix/numeric.hpp"

namespace prmix {

double prticle_step_with_kvals(Eigen::VectorXd& deltas, std::span<const double> kvals, double w,
                               Eigen::VectorXd* p_at_particles) {
  if (!(w > 0.0 && w < 1.0))
    throw std::invalid_argument("prticle_step: w must lie in (0, 1)");
  const auto T = static_cast<std::size_t>(deltas.size());
  if (kvals.size() != T) throw std::invalid_argument("prticle_step: kernel value size mismatch");

  std::vector<double> terms(T);
  for (std::size_t t = 0; t < T; ++t) terms[t] = kvals[t] * deltas[static_cast<Eigen::Index>(t)];
  const double m_hat = pairwise_sum(terms) / static_cast<double>(T);
  if (m_hat < kDensityFloor)
    throw degeneracy_error("prticle step: normalizing constant underflow", 0, 0.0);

  for (std::size_t t = 0; t < T; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    if (p_at_particles) {
      const double p = (*p_at_particles)[i];
      (*p_at_particles)[i] = (1.0 - w) * p + w * kvals[t] * p / m_hat;
    }
    deltas[i] *= 1.0 + w * (kvals[t] / m_hat - 1.0);
  }
  return m_hat;
}

double prticle_step(ParticleSet& state, const Observation& x, double w,
                    const KernelModel& kernel, const KernelEvalCache& cache,
                    std::span<double> kval_buffer) {
  if (cache.size() != state.size() || kval_buffer.size() != state.size())
    throw std::invalid_argument("prticle_step: cache/buffer size mismatch");
  (void)kernel;
  cache.eval_all(x, kval_buffer);
  Eigen::VectorXd* p = state.tracks_density() ? &state.density_at_particles() : nullptr;
  const double m_hat = prticle_step_with_kvals(state.deltas(), kval_buffer, w, p);
  state.set_step_count(state.step_count() + 1);
  return m_hat;
}

namespace {

// Mean-one identity, strict positivity, and collapse detection after a step.
void check_invariants(const ParticleSet& state, int step) {
  const auto& d = state.deltas();
  const auto T = static_cast<std::size_t>(d.size());
  std::vector<double> terms(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double v = d[static_cast<Eigen::Index>(t)];
    if (!(v > 0.0))
      throw degeneracy_error("prticle run: non-positive weight at step " + std::to_string(step),
                             step, 0.0);
    terms[t] = v;
  }
  const double mean = pairwise_sum(terms) / static_cast<double>(T);
  if (std::abs(mean - 1.0) > 1e-9)
    throw std::runtime_error("prticle run: weight mean drifted from 1 at step " +
                             std::to_string(step));
  if (T >= 3) {
    const double e = ess(state);
    if (e < 3.0)
      throw degeneracy_error("prticle run: weight population collapsed (ESS < 3) at step " +
                                 std::to_string(step),
                             step, e);
  }
}

}  // namespace

PrticleRunResult run_prticle(const Dataset& data, ParticleSet state,
                             const WeightSchedule& schedule, const KernelModel& kernel,
                             const StepObserver& observer) {
  PrticleRunResult out;
  out.m_hats.reserve(data.size());
  if (!data.empty()) {
    const KernelEvalCache cache(kernel, state.particles());
    std::vector<double> kvals(state.size());
    const int offset = state.step_count();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int step = offset + static_cast<int>(i) + 1;
      const double w = schedule.weight_at(step);
      cache.eval_all(data[i], kvals);
      Eigen::VectorXd* p = state.tracks_density() ? &state.density_at_particles() : nullptr;
      double m_hat;
      try {
        m_hat = prticle_step_with_kvals(state.deltas(), kvals, w, p);
      } catch (const degeneracy_error& e) {
        throw degeneracy_error(std::string(e.what()) + " at step " + std::to_string(step), step,
                               0.0);
      }
      state.set_step_count(step);
      check_invariants(state, step);
      out.m_hats.push_back(m_hat);
      if (observer) observer(step, state, m_hat);
    }
  }
  out.state = std::move(state);
  return out;
}

ParticleSet permutation_average(const Dataset& data, const ParticleSet& base_state,
                                const WeightSchedule& schedule, const KernelModel& kernel,
                                int n_perms, std::uint64_t seed) {
  if (n_perms < 1) throw std::invalid_argument("permutation_average: n_perms must be >= 1");

  Eigen::VectorXd accum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(base_state.size()));
  for (int p = 0; p < n_perms; ++p) {
    ParticleSet run_state = base_state;
    run_state.reset_weights();
    const Dataset permuted =
        (data.size() > 1) ? permute_dataset(data, seed + static_cast<std::uint64_t>(p)) : data;
    try {
      accum += run_prticle(permuted, std::move(run_state), schedule, kernel).state.deltas();
    } catch (const degeneracy_error& e) {
      throw degeneracy_error(std::string(e.what()) + " (permutation " + std::to_string(p) + ")",
                             e.step_index(), e.ess_value());
    }
  }

  ParticleSet out = base_state;
  out.reset_weights();
  out.deltas() = accum / static_cast<double>(n_perms);
  out.set_step_count(static_cast<int>(data.size()));
  return out;
}

}  // namespace prmix
