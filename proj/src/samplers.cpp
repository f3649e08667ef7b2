#include "prmix/samplers.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace prmix {

P0Sampler uniform_box_sampler(std::vector<std::pair<double, double>> bounds) {
  if (bounds.empty()) throw std::invalid_argument("uniform_box_sampler: empty bounds");
  double volume = 1.0;
  for (const auto& [lo, hi] : bounds) {
    if (!(lo < hi)) throw std::invalid_argument("uniform_box_sampler: lo must be < hi");
    volume *= hi - lo;
  }
  const int dim = static_cast<int>(bounds.size());
  const double dens = 1.0 / volume;

  P0Sampler s;
  s.dim = dim;
  s.draw = [bounds](RngStream& rng) {
    Eigen::VectorXd u(bounds.size());
    for (std::size_t j = 0; j < bounds.size(); ++j)
      u[j] = bounds[j].first + (bounds[j].second - bounds[j].first) * rng.uniform_open();
    return u;
  };
  s.density = [bounds, dens](const Eigen::VectorXd& u) {
    for (std::size_t j = 0; j < bounds.size(); ++j)
      if (u[j] < bounds[j].first || u[j] > bounds[j].second) return 0.0;
    return dens;
  };
  return s;
}

Eigen::Vector3d sample_uniform_sphere(RngStream& rng) {
  for (;;) {
    Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    const double n = z.norm();
    if (n > 1e-12) return z / n;
  }
}

double sample_scaled_beta(double a, double b, double lo, double hi, RngStream& rng) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("sample_scaled_beta: a, b must be > 0");
  if (!(lo < hi)) throw std::invalid_argument("sample_scaled_beta: lo must be < hi");
  return lo + (hi - lo) * rng.beta(a, b);
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  return rng.gamma(shape, rate);
}

Eigen::VectorXd sample_mvnormal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                RngStream& rng) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sample_mvnormal: covariance not positive definite");
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
  return mean + llt.matrixL() * z;
}

Eigen::VectorXd sample_mvt(const Eigen::VectorXd& location, const Eigen::MatrixXd& scale,
                           double df, RngStream& rng) {
  if (!(df > 0.0)) throw std::invalid_argument("sample_mvt: df must be positive");
  const Eigen::VectorXd g = sample_mvnormal(Eigen::VectorXd::Zero(location.size()), scale, rng);
  const double chi2 = rng.chi_squared(df);
  return location + g * std::sqrt(df / chi2);
}

Dataset sample_mixture_data(const MixingSampler& true_mixing, const KernelModel& kernel,
                            int n, RngStream& rng, std::vector<Eigen::VectorXd>* latents) {
  if (n < 0) throw std::invalid_argument("sample_mixture_data: n must be nonnegative");
  Dataset data;
  if (latents) latents->clear();
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd u = true_mixing(rng);
    data.push_back(kernel.simulate(u, rng));
    if (latents) latents->push_back(std::move(u));
  }
  return data;
}

}  // namespace prmix
