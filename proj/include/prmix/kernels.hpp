#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "prmix/observation.hpp"
#include "prmix/rng.hpp"

namespace prmix {

// Evaluations below this are clamped so that exact zeros never poison a
// weight-update ratio.
inline constexpr double kDensityFloor = 1e-300;

enum class KernelFamily {
  gaussian_iso,
  gaussian_bivariate_full,
  angular_gaussian_sphere,
  marked_pp_trivariate,
};

// ---------------------------------------------------------------------------
// Free evaluators
// ---------------------------------------------------------------------------

// N_d(x | u, sigma2 * I_d).
double eval_gaussian_iso(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double sigma2);

// Bivariate normal with mixing point (mu1, mu2, sigma1^2, sigma2^2, rho).
double eval_gaussian_bivariate_full(const Eigen::Vector2d& x, const Eigen::VectorXd& point);

// Rotation taking (0,0,1) onto mu, assembled from the spherical coordinates
// theta (polar angle from +z) and phi (azimuth):
//   [ cos(t)cos(p)  -sin(p)  sin(t)cos(p) ]
//   [ cos(t)sin(p)   cos(p)  sin(t)sin(p) ]
//   [   -sin(t)        0        cos(t)    ]
Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& mu);

// Angular Gaussian density on the unit sphere, concentration axis mu:
//   k(x | mu, beta) = (1/(4pi)) |S|^(-1/2) (x' S^(-1) x)^(-3/2),
// with S = Q_mu diag(1, 1, beta^(-2)) Q_mu'. Normalized: the density of
// z/|z| with z ~ N_3(0, S), so it integrates to 1 over the sphere.
double eval_angular_gaussian(const Eigen::Vector3d& x, const Eigen::Vector3d& mu, double beta);

// Trivariate normal kernel for marked locations, mixing point layout
// (mu1, mu2, mu3, log s1^2, log s2^2, log s3^2, r12, r13, r23):
//   N_3(logit(s1/200), logit(s2/200), log(mark-2) | mu, Sigma) / J(s, mark)
// where J is the full change-of-variables factor, so the kernel integrates to
// 1 over (0,200)^2 x (2, inf).
double eval_marked_pp_kernel(const MarkedPoint& p, const Eigen::VectorXd& point);

// Closed-form split of the marked kernel at a fixed location: the normal
// conditional of log(mark-2) given the transformed location, and the
// marginal location density (Jacobian included).
struct MarkConditional {
  double cond_mean = 0.0;
  double cond_var = 0.0;
  double marginal_weight = 0.0;
};
MarkConditional conditional_mark_component(double s1, double s2, const Eigen::VectorXd& point);

// ---------------------------------------------------------------------------
// Kernel model
// ---------------------------------------------------------------------------

// Identifies the kernel family plus its fixed hyperparameters, evaluates
// k(x|u), validates mixing points, maps them to/from the unconstrained
// parametrization used for moment summaries, and simulates forward draws.
class KernelModel {
 public:
  static KernelModel gaussian_iso(int data_dim, double sigma2);
  static KernelModel gaussian_bivariate_full();
  static KernelModel angular_gaussian_sphere();
  // reduced = true pins the three correlations at zero (6 active coordinates).
  static KernelModel marked_pp(bool reduced = false);

  KernelFamily family() const { return family_; }
  bool reduced() const { return reduced_; }
  int data_dim() const { return data_dim_; }
  int mixing_dim() const { return mixing_dim_; }
  double sigma2() const { return sigma2_; }

  // k(x|u), clamped below at kDensityFloor.
  double eval(const Observation& x, const Eigen::VectorXd& u) const;

  bool valid_mixing_point(const Eigen::VectorXd& u) const;

  // Map to the Euclidean parametrization used by moment summaries: variances
  // and concentrations on the log scale, correlations raw, sphere locations
  // through the 3-d embedding.
  Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& u) const;
  // Inverse map; sphere locations are projected back by normalization. The
  // result may still fail valid_mixing_point (e.g. correlations outside
  // (-1,1)) and must be rejection-filtered by the caller.
  Eigen::VectorXd from_unconstrained(const Eigen::VectorXd& v) const;

  // One draw from k(.|u).
  Observation simulate(const Eigen::VectorXd& u, RngStream& rng) const;

 private:
  KernelModel() = default;

  KernelFamily family_ = KernelFamily::gaussian_iso;
  int data_dim_ = 1;
  int mixing_dim_ = 1;
  double sigma2_ = 1.0;
  bool reduced_ = false;
};

// Precomputed per-point factorizations for repeated kernel evaluation over a
// fixed collection of mixing points (a particle cloud or a quadrature grid).
// Points are validated once at construction; eval_all is branch-free.
class KernelEvalCache {
 public:
  KernelEvalCache(const KernelModel& kernel, std::span<const Eigen::VectorXd> points);

  std::size_t size() const { return size_; }

  // Writes k(x | points[t]) into out[t] for every cached point.
  void eval_all(const Observation& x, std::span<double> out) const;

 private:
  KernelFamily family_;
  std::size_t size_ = 0;
  double sigma2_ = 1.0;
  int data_dim_ = 1;
  // Column blocks, one row per point; contents depend on the family.
  Eigen::MatrixXd mu_;        // means / sphere axes
  Eigen::MatrixXd lambda_;    // packed symmetric inverse covariance
  Eigen::VectorXd log_norm_;  // per-point log normalizing constant
  Eigen::VectorXd scale_;     // family-specific extra column (e.g. beta)
};

}  // namespace prmix
