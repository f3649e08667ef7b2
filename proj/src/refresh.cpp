#include "prmix/refresh.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "prmix/io.hpp"

namespace prmix {

MomentSummary weighted_moments(std::span<const Eigen::VectorXd> points,
                               const Eigen::VectorXd& deltas) {
  const auto T = points.size();
  if (T == 0 || static_cast<std::size_t>(deltas.size()) != T)
    throw std::invalid_argument("weighted_moments: empty cloud or size mismatch");
  const auto dim = points[0].size();
  const double T_inv = 1.0 / static_cast<double>(T);

  MomentSummary out;
  out.mean = Eigen::VectorXd::Zero(dim);
  for (std::size_t t = 0; t < T; ++t)
    out.mean += points[t] * deltas[static_cast<Eigen::Index>(t)];
  out.mean *= T_inv;

  out.covariance = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t t = 0; t < T; ++t) {
    const Eigen::VectorXd r = points[t] - out.mean;
    out.covariance.noalias() += deltas[static_cast<Eigen::Index>(t)] * (r * r.transpose());
  }
  out.covariance *= T_inv;

  const double s = deltas.sum();
  out.source_ess = s * s / deltas.squaredNorm();
  return out;
}

MomentSummary weighted_moments(const ParticleSet& state) {
  if (state.size() >= 3 && ess(state) < 3.0)
    throw degeneracy_error("weighted_moments: ESS below 3, summary would be meaningless",
                           state.step_count(), ess(state));
  return weighted_moments(state.particles(), state.deltas());
}

Eigen::VectorXd StudentTSampler::sample(RngStream& rng) const {
  Eigen::VectorXd z(location.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
  const double chi2 = rng.chi_squared(df);
  return location + (chol_lower * z) * std::sqrt(df / chi2);
}

double StudentTSampler::density(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd r = x - location;
  const Eigen::VectorXd y = chol_lower.triangularView<Eigen::Lower>().solve(r);
  const double q = y.squaredNorm();
  const double d = static_cast<double>(location.size());
  return std::exp(log_norm - 0.5 * (df + d) * std::log1p(q / df));
}

P0Sampler StudentTSampler::as_p0() const {
  P0Sampler p0;
  p0.dim = static_cast<int>(location.size());
  StudentTSampler self = *this;
  p0.draw = [self](RngStream& rng) { return self.sample(rng); };
  p0.density = [self](const Eigen::VectorXd& x) { return self.density(x); };
  return p0;
}

StudentTSampler refresh_sampler(const MomentSummary& moments, double df, double inflate) {
  if (!(df > 2.0)) throw std::invalid_argument("refresh_sampler: df must exceed 2");
  if (!(inflate >= 1.0)) throw std::invalid_argument("refresh_sampler: inflate must be >= 1");
  if (!moments.mean.allFinite() || !moments.covariance.allFinite())
    throw std::invalid_argument("refresh_sampler: non-finite moments");

  StudentTSampler t;
  t.location = moments.mean;
  t.df = df;
  t.scale = inflate * moments.covariance * (df - 2.0) / df;

  const auto d = t.scale.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(t.scale);
  if (llt.info() != Eigen::Success) {
    const double bump = 1e-8 * t.scale.trace() / static_cast<double>(d) + 1e-12;
    t.scale += bump * Eigen::MatrixXd::Identity(d, d);
    llt.compute(t.scale);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("refresh_sampler: scale matrix cannot be factorized");
  }
  t.chol_lower = llt.matrixL();

  const double dd = static_cast<double>(d);
  const double log_det = 2.0 * t.chol_lower.diagonal().array().log().sum();
  t.log_norm = std::lgamma(0.5 * (df + dd)) - std::lgamma(0.5 * df) -
               0.5 * dd * std::log(df * std::numbers::pi) - 0.5 * log_det;
  return t;
}

std::string RefreshDiagnostics::to_json() const {
  std::ostringstream os;
  os << "{\"ess_pass1\":" << fmt_double(ess_pass1) << ",\"ess_pass2\":" << fmt_double(ess_pass2)
     << ",\"T\":" << T << ",\"mean\":[";
  for (Eigen::Index j = 0; j < moments.mean.size(); ++j)
    os << (j ? "," : "") << fmt_double(moments.mean[j]);
  os << "],\"covariance\":[";
  for (Eigen::Index i = 0; i < moments.covariance.rows(); ++i)
    for (Eigen::Index j = 0; j < moments.covariance.cols(); ++j)
      os << ((i || j) ? "," : "") << fmt_double(moments.covariance(i, j));
  os << "],\"df\":" << fmt_double(df) << ",\"inflate\":" << fmt_double(inflate)
     << ",\"seed\":" << seed << "}";
  return os.str();
}

namespace {

// Rejection-filter draws from the unconstrained proposal back into the valid
// mixing region.
P0Sampler constrained_proposal(const StudentTSampler& t, const KernelModel& kernel,
                               std::size_t T) {
  P0Sampler p0;
  p0.dim = kernel.mixing_dim();
  const std::size_t budget = 100 * T;
  p0.draw = [t, kernel, budget](RngStream& rng) {
    for (std::size_t attempt = 0; attempt < budget; ++attempt) {
      const Eigen::VectorXd u = kernel.from_unconstrained(t.sample(rng));
      if (kernel.valid_mixing_point(u)) return u;
    }
    throw std::runtime_error("refresh proposal: rejection budget exhausted");
  };
  return p0;
}

}  // namespace

RefreshRunResult run_with_refresh(const Dataset& data, const P0Sampler& initial_sampler,
                                  std::size_t T, const WeightSchedule& schedule,
                                  const KernelModel& kernel, double df, double inflate,
                                  std::uint64_t seed, int rounds, std::size_t pass2_T) {
  if (rounds < 0) throw std::invalid_argument("run_with_refresh: rounds must be >= 0");
  const std::size_t refreshed_T = pass2_T ? pass2_T : T;

  RefreshRunResult out;
  out.diagnostics.T = T;
  out.diagnostics.df = df;
  out.diagnostics.inflate = inflate;
  out.diagnostics.seed = seed;

  RngStream init_rng(seed, /*stream_id=*/1);
  ParticleSet particles = init_particles(initial_sampler, T, init_rng);
  PrticleRunResult pass;
  try {
    pass = run_prticle(data, std::move(particles), schedule, kernel);
  } catch (const degeneracy_error& e) {
    throw degeneracy_error(std::string("initial pass: ") + e.what(), e.step_index(),
                           e.ess_value());
  }
  out.diagnostics.ess_pass1 = ess(pass.state);

  for (int round = 1; round <= rounds; ++round) {
    // Summarize pass in the unconstrained parametrization.
    std::vector<Eigen::VectorXd> unconstrained;
    unconstrained.reserve(pass.state.size());
    for (const auto& u : pass.state.particles())
      unconstrained.push_back(kernel.to_unconstrained(u));
    if (pass.state.size() >= 3 && ess(pass.state) < 3.0)
      throw degeneracy_error("run_with_refresh: pass collapsed before summary",
                             pass.state.step_count(), ess(pass.state));
    const MomentSummary moments = weighted_moments(unconstrained, pass.state.deltas());
    if (round == 1) out.diagnostics.moments = moments;

    const StudentTSampler proposal = refresh_sampler(moments, df, inflate);
    const P0Sampler refreshed = constrained_proposal(proposal, kernel, refreshed_T);

    RngStream round_rng(seed, /*stream_id=*/1 + static_cast<std::uint64_t>(round));
    ParticleSet fresh = init_particles(refreshed, refreshed_T, round_rng);
    try {
      pass = run_prticle(data, std::move(fresh), schedule, kernel);
    } catch (const degeneracy_error& e) {
      throw degeneracy_error("refresh failure (round " + std::to_string(round) + "): " + e.what(),
                             e.step_index(), e.ess_value());
    }
  }

  out.diagnostics.ess_pass2 = ess(pass.state);
  out.m_hats = std::move(pass.m_hats);
  out.state = std::move(pass.state);
  return out;
}

}  // namespace prmix
