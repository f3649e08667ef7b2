#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "prmix/rng.hpp"
#include "prmix/samplers.hpp"

namespace prmix {

// A fixed cloud of mixing-support points with multiplicative filter weights.
// The weights are kept on the linear scale with mean exactly one; that
// self-normalization pins their magnitude, so the population can neither
// overflow nor underflow as a whole.
class ParticleSet {
 public:
  ParticleSet() = default;
  ParticleSet(std::vector<Eigen::VectorXd> particles, bool track_density = false,
              const P0Sampler* p0 = nullptr);

  std::size_t size() const { return particles_.size(); }
  int dim() const { return particles_.empty() ? 0 : static_cast<int>(particles_[0].size()); }

  const std::vector<Eigen::VectorXd>& particles() const { return particles_; }
  const Eigen::VectorXd& deltas() const { return deltas_; }
  Eigen::VectorXd& deltas() { return deltas_; }

  int step_count() const { return step_count_; }
  void set_step_count(int n) { step_count_ = n; }

  bool tracks_density() const { return track_density_; }
  const Eigen::VectorXd& density_at_particles() const { return p_at_particles_; }
  Eigen::VectorXd& density_at_particles() { return p_at_particles_; }

  void reset_weights();

  // One row per particle: coordinates, then the weight.
  void write_csv(std::ostream& os) const;
  // {T, step_count, ess, mean, covariance} as a JSON object string.
  std::string summary_json() const;

 private:
  std::vector<Eigen::VectorXd> particles_;
  Eigen::VectorXd deltas_;
  Eigen::VectorXd p_at_particles_;
  bool track_density_ = false;
  int step_count_ = 0;
};

// T iid draws from p0, unit weights, deterministic given the stream state.
// With track_density the p0 density at each particle is recorded as the
// starting point of the density recursion (p0 must then expose a density).
ParticleSet init_particles(const P0Sampler& p0, std::size_t T, RngStream& rng,
                           bool track_density = false);

// (sum w)^2 / sum w^2: the equivalent number of equally weighted particles,
// always in [1, T].
double ess(const ParticleSet& state);

}  // namespace prmix
