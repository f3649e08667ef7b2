#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>
#include <vector>

#include "prmix/kernels.hpp"
#include "prmix/observation.hpp"
#include "prmix/rng.hpp"

namespace prmix {

// An initial-guess sampler over the mixing support: a draw function plus an
// optional density evaluator (needed only when density-at-particle tracking
// is on).
struct P0Sampler {
  int dim = 0;
  std::function<Eigen::VectorXd(RngStream&)> draw;
  std::function<double(const Eigen::VectorXd&)> density;  // may be empty
};

// Uniform over an axis-aligned box; draws land in the open box, so strictly
// positive lower bounds on variances come for free.
P0Sampler uniform_box_sampler(std::vector<std::pair<double, double>> bounds);

Eigen::Vector3d sample_uniform_sphere(RngStream& rng);

// lo + (hi - lo) * Beta(a, b).
double sample_scaled_beta(double a, double b, double lo, double hi, RngStream& rng);

double sample_gamma(double shape, double rate, RngStream& rng);

Eigen::VectorXd sample_mvnormal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                RngStream& rng);

// Multivariate Student-t with the given location/scale; covariance is
// scale * df / (df - 2) for df > 2.
Eigen::VectorXd sample_mvt(const Eigen::VectorXd& location, const Eigen::MatrixXd& scale,
                           double df, RngStream& rng);

using MixingSampler = std::function<Eigen::VectorXd(RngStream&)>;

// Two-stage hierarchy: U_i iid from the mixing distribution, X_i | U_i from
// the kernel. Latent draws are optionally retained.
Dataset sample_mixture_data(const MixingSampler& true_mixing, const KernelModel& kernel,
                            int n, RngStream& rng,
                            std::vector<Eigen::VectorXd>* latents = nullptr);

}  // namespace prmix
