#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "prmix/kernels.hpp"
#include "prmix/particles.hpp"
#include "prmix/prticle.hpp"
#include "prmix/samplers.hpp"
#include "prmix/weights.hpp"

namespace prmix {

struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double source_ess = 0.0;
};

// Weight-averaged mean and covariance of a point cloud:
//   mu    = (1/T) sum_t U_t delta_t
//   Sigma = (1/T) sum_t (U_t - mu)(U_t - mu)' delta_t
// Proper weighted moments because the weights have mean one.
MomentSummary weighted_moments(std::span<const Eigen::VectorXd> points,
                               const Eigen::VectorXd& deltas);

// Raw-coordinate moments of a fitted particle set; refuses when ESS < 3.
MomentSummary weighted_moments(const ParticleSet& state);

// Multivariate Student-t proposal matched to a moment summary. The scale is
// inflate * Sigma * (df-2)/df, so the proposal covariance equals
// inflate * Sigma; near-singular summaries get a small diagonal boost.
struct StudentTSampler {
  Eigen::VectorXd location;
  Eigen::MatrixXd scale;
  double df = 0.0;

  Eigen::VectorXd sample(RngStream& rng) const;
  double density(const Eigen::VectorXd& x) const;
  P0Sampler as_p0() const;

  // cached factorization
  Eigen::MatrixXd chol_lower;
  double log_norm = 0.0;
};

StudentTSampler refresh_sampler(const MomentSummary& moments, double df, double inflate);

struct RefreshDiagnostics {
  double ess_pass1 = 0.0;
  double ess_pass2 = 0.0;
  MomentSummary moments;  // pass-1 summary (unconstrained parametrization)
  std::size_t T = 0;
  double df = 0.0;
  double inflate = 0.0;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

struct RefreshRunResult {
  ParticleSet state;
  std::vector<double> m_hats;  // from the final pass
  RefreshDiagnostics diagnostics;
};

// Two-pass (or more) filter run: fit from the initial sampler, summarize the
// weighted cloud in the unconstrained parametrization, rebuild the proposal
// as a Student-t around that summary, and rerun from scratch on the same
// data. Draws that map outside the valid mixing region are rejected with a
// total retry budget of 100*T per pass. Refreshed passes keep the initial
// cloud size unless pass2_T is nonzero.
RefreshRunResult run_with_refresh(const Dataset& data, const P0Sampler& initial_sampler,
                                  std::size_t T, const WeightSchedule& schedule,
                                  const KernelModel& kernel, double df, double inflate,
                                  std::uint64_t seed, int rounds = 1, std::size_t pass2_T = 0);

}  // namespace prmix
