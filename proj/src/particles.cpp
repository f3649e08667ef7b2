#include "prmix/particles.hpp"

#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "prmix/io.hpp"
#include "prmix/numeric.hpp"
#include "prmix/refresh.hpp"

namespace prmix {

ParticleSet::ParticleSet(std::vector<Eigen::VectorXd> particles, bool track_density,
                         const P0Sampler* p0)
    : particles_(std::move(particles)), track_density_(track_density) {
  if (particles_.empty()) throw std::invalid_argument("ParticleSet: need at least one particle");
  for (const auto& p : particles_)
    if (p.size() != particles_[0].size())
      throw std::invalid_argument("ParticleSet: inconsistent particle dimensions");
  deltas_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(particles_.size()));
  if (track_density_) {
    if (!p0 || !p0->density)
      throw std::invalid_argument("ParticleSet: density tracking needs a p0 density");
    p_at_particles_.resize(static_cast<Eigen::Index>(particles_.size()));
    for (std::size_t t = 0; t < particles_.size(); ++t)
      p_at_particles_[static_cast<Eigen::Index>(t)] = p0->density(particles_[t]);
  }
}

void ParticleSet::reset_weights() {
  deltas_.setOnes();
  step_count_ = 0;
}

void ParticleSet::write_csv(std::ostream& os) const {
  for (int j = 0; j < dim(); ++j) os << "u" << (j + 1) << ",";
  os << "delta\n";
  for (std::size_t t = 0; t < size(); ++t) {
    for (int j = 0; j < dim(); ++j) os << fmt_double(particles_[t][j]) << ",";
    os << fmt_double(deltas_[static_cast<Eigen::Index>(t)]) << "\n";
  }
}

std::string ParticleSet::summary_json() const {
  const MomentSummary m = weighted_moments(particles_, deltas_);
  std::ostringstream os;
  os << "{\"T\":" << size() << ",\"step_count\":" << step_count_
     << ",\"ess\":" << fmt_double(ess(*this)) << ",\"mean\":[";
  for (Eigen::Index j = 0; j < m.mean.size(); ++j)
    os << (j ? "," : "") << fmt_double(m.mean[j]);
  os << "],\"covariance\":[";
  for (Eigen::Index i = 0; i < m.covariance.rows(); ++i)
    for (Eigen::Index j = 0; j < m.covariance.cols(); ++j)
      os << ((i || j) ? "," : "") << fmt_double(m.covariance(i, j));
  os << "]}";
  return os.str();
}

ParticleSet init_particles(const P0Sampler& p0, std::size_t T, RngStream& rng,
                           bool track_density) {
  if (T < 1) throw std::invalid_argument("init_particles: T must be >= 1");
  if (!p0.draw) throw std::invalid_argument("init_particles: p0 has no draw function");
  std::vector<Eigen::VectorXd> particles;
  particles.reserve(T);
  for (std::size_t t = 0; t < T; ++t) particles.push_back(p0.draw(rng));
  return ParticleSet(std::move(particles), track_density, &p0);
}

double ess(const ParticleSet& state) {
  const auto& d = state.deltas();
  std::vector<double> sums(static_cast<std::size_t>(d.size()));
  std::vector<double> sqs(static_cast<std::size_t>(d.size()));
  for (Eigen::Index t = 0; t < d.size(); ++t) {
    sums[static_cast<std::size_t>(t)] = d[t];
    sqs[static_cast<std::size_t>(t)] = d[t] * d[t];
  }
  const double s = pairwise_sum(sums);
  const double s2 = pairwise_sum(sqs);
  return s * s / s2;
}

}  // namespace prmix
