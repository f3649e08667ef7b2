#include "prmix/kernels.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace prmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double clamp_density(double v) { return v < kDensityFloor ? kDensityFloor : v; }

// (mu, Sigma) from the 9-coordinate marked-point layout; correlations are
// taken as zero when the point carries only 6 coordinates.
void unpack_marked(const Eigen::VectorXd& point, Eigen::Vector3d& mu, Eigen::Matrix3d& sigma) {
  if (point.size() != 9 && point.size() != 6)
    throw std::invalid_argument("marked kernel: mixing point must have 6 or 9 coordinates");
  mu = point.head<3>();
  const Eigen::Vector3d sd = (0.5 * point.segment<3>(3).array()).exp();
  double r12 = 0.0, r13 = 0.0, r23 = 0.0;
  if (point.size() == 9) {
    r12 = point[6];
    r13 = point[7];
    r23 = point[8];
  }
  sigma << sd[0] * sd[0], r12 * sd[0] * sd[1], r13 * sd[0] * sd[2],
      r12 * sd[0] * sd[1], sd[1] * sd[1], r23 * sd[1] * sd[2],
      r13 * sd[0] * sd[2], r23 * sd[1] * sd[2], sd[2] * sd[2];
}

double logit(double q) { return std::log(q / (1.0 - q)); }

}  // namespace

// ---------------------------------------------------------------------------
// Free evaluators
// ---------------------------------------------------------------------------

double eval_gaussian_iso(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double sigma2) {
  if (x.size() != u.size())
    throw std::invalid_argument("eval_gaussian_iso: dimension mismatch");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("eval_gaussian_iso: sigma2 must be positive");
  const double d = static_cast<double>(x.size());
  const double q = (x - u).squaredNorm() / sigma2;
  return clamp_density(std::exp(-0.5 * (q + d * (kLog2Pi + std::log(sigma2)))));
}

double eval_gaussian_bivariate_full(const Eigen::Vector2d& x, const Eigen::VectorXd& point) {
  if (point.size() != 5)
    throw std::invalid_argument("eval_gaussian_bivariate_full: expected 5 coordinates");
  const double s1sq = point[2], s2sq = point[3], rho = point[4];
  if (!(s1sq > 0.0) || !(s2sq > 0.0) || !(std::abs(rho) < 1.0))
    throw std::invalid_argument("eval_gaussian_bivariate_full: covariance not positive definite");
  const double s1 = std::sqrt(s1sq), s2 = std::sqrt(s2sq);
  const double dx = (x[0] - point[0]) / s1;
  const double dy = (x[1] - point[1]) / s2;
  const double om = 1.0 - rho * rho;
  const double q = (dx * dx - 2.0 * rho * dx * dy + dy * dy) / om;
  return clamp_density(std::exp(-0.5 * q) / (2.0 * std::numbers::pi * s1 * s2 * std::sqrt(om)));
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& mu) {
  if (std::abs(mu.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("rotation_matrix: mu must have unit norm");
  const double ct = std::clamp(mu[2], -1.0, 1.0);
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  // Azimuth is arbitrary at the poles; zero keeps the matrix well-defined.
  double cp = 1.0, sp = 0.0;
  if (st > 1e-15) {
    const double phi = std::atan2(mu[1], mu[0]);
    cp = std::cos(phi);
    sp = std::sin(phi);
  }
  Eigen::Matrix3d q;
  q << ct * cp, -sp, st * cp,
      ct * sp, cp, st * sp,
      -st, 0.0, ct;
  return q;
}

double eval_angular_gaussian(const Eigen::Vector3d& x, const Eigen::Vector3d& mu, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("eval_angular_gaussian: beta must be positive");
  if (std::abs(x.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("eval_angular_gaussian: x must have unit norm");
  const Eigen::Matrix3d q = rotation_matrix(mu);
  const Eigen::Vector3d y = q.transpose() * x;
  const double form = y[0] * y[0] + y[1] * y[1] + beta * beta * y[2] * y[2];
  const double c = 1.0 / (4.0 * std::numbers::pi);
  return clamp_density(c * beta / (form * std::sqrt(form)));
}

double eval_marked_pp_kernel(const MarkedPoint& p, const Eigen::VectorXd& point) {
  const Observation obs = Observation::marked(p);
  Eigen::Vector3d mu;
  Eigen::Matrix3d sigma;
  unpack_marked(point, mu, sigma);
  const Eigen::LLT<Eigen::Matrix3d> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("eval_marked_pp_kernel: covariance not positive definite");
  const Eigen::Vector3d r = obs.transformed() - mu;
  const double q = r.dot(llt.solve(r));
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return clamp_density(
      std::exp(-0.5 * (q + 3.0 * kLog2Pi + log_det) - obs.log_jacobian()));
}

MarkConditional conditional_mark_component(double s1, double s2, const Eigen::VectorXd& point) {
  if (!(s1 > 0.0 && s1 < kMarkedExtent && s2 > 0.0 && s2 < kMarkedExtent))
    throw std::invalid_argument("conditional_mark_component: location outside (0, 200)^2");
  Eigen::Vector3d mu;
  Eigen::Matrix3d sigma;
  unpack_marked(point, mu, sigma);

  const Eigen::Matrix2d a = sigma.topLeftCorner<2, 2>();
  const Eigen::Vector2d b = sigma.topRightCorner<2, 1>();
  const Eigen::LLT<Eigen::Matrix2d> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("conditional_mark_component: covariance not positive definite");

  const double q1 = s1 / kMarkedExtent, q2 = s2 / kMarkedExtent;
  const Eigen::Vector2d z(logit(q1), logit(q2));
  const Eigen::Vector2d resid = z - mu.head<2>();
  const Eigen::Vector2d a_inv_resid = llt.solve(resid);

  MarkConditional out;
  out.cond_mean = mu[2] + b.dot(a_inv_resid);
  out.cond_var = sigma(2, 2) - b.dot(llt.solve(b));

  const double quad = resid.dot(a_inv_resid);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_jac = std::log(kMarkedExtent * q1 * (1.0 - q1)) +
                         std::log(kMarkedExtent * q2 * (1.0 - q2));
  out.marginal_weight = std::exp(-0.5 * (quad + 2.0 * kLog2Pi + log_det) - log_jac);
  return out;
}

// ---------------------------------------------------------------------------
// KernelModel
// ---------------------------------------------------------------------------

KernelModel KernelModel::gaussian_iso(int data_dim, double sigma2) {
  if (data_dim < 1) throw std::invalid_argument("gaussian_iso: data_dim must be >= 1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("gaussian_iso: sigma2 must be positive");
  KernelModel k;
  k.family_ = KernelFamily::gaussian_iso;
  k.data_dim_ = data_dim;
  k.mixing_dim_ = data_dim;
  k.sigma2_ = sigma2;
  return k;
}

KernelModel KernelModel::gaussian_bivariate_full() {
  KernelModel k;
  k.family_ = KernelFamily::gaussian_bivariate_full;
  k.data_dim_ = 2;
  k.mixing_dim_ = 5;
  return k;
}

KernelModel KernelModel::angular_gaussian_sphere() {
  KernelModel k;
  k.family_ = KernelFamily::angular_gaussian_sphere;
  k.data_dim_ = 3;
  k.mixing_dim_ = 4;
  return k;
}

KernelModel KernelModel::marked_pp(bool reduced) {
  KernelModel k;
  k.family_ = KernelFamily::marked_pp_trivariate;
  k.data_dim_ = 3;
  k.mixing_dim_ = reduced ? 6 : 9;
  k.reduced_ = reduced;
  return k;
}

double KernelModel::eval(const Observation& x, const Eigen::VectorXd& u) const {
  switch (family_) {
    case KernelFamily::gaussian_iso:
      return eval_gaussian_iso(x.coords(), u, sigma2_);
    case KernelFamily::gaussian_bivariate_full:
      return eval_gaussian_bivariate_full(x.coords().head<2>(), u);
    case KernelFamily::angular_gaussian_sphere:
      return eval_angular_gaussian(x.coords().head<3>(), u.head<3>(), u[3]);
    case KernelFamily::marked_pp_trivariate:
      return eval_marked_pp_kernel(x.marked_point(), u);
  }
  throw std::logic_error("KernelModel::eval: unknown family");
}

bool KernelModel::valid_mixing_point(const Eigen::VectorXd& u) const {
  if (u.size() != mixing_dim_) return false;
  if (!u.allFinite()) return false;
  switch (family_) {
    case KernelFamily::gaussian_iso:
      return true;
    case KernelFamily::gaussian_bivariate_full:
      return u[2] > 0.0 && u[3] > 0.0 && std::abs(u[4]) < 1.0;
    case KernelFamily::angular_gaussian_sphere:
      return std::abs(u.head<3>().norm() - 1.0) <= 1e-12 && u[3] > 0.0;
    case KernelFamily::marked_pp_trivariate: {
      if (reduced_) return true;  // diagonal covariance, log-variances always valid
      if (!(std::abs(u[6]) < 1.0 && std::abs(u[7]) < 1.0 && std::abs(u[8]) < 1.0)) return false;
      Eigen::Vector3d mu;
      Eigen::Matrix3d sigma;
      unpack_marked(u, mu, sigma);
      return Eigen::LLT<Eigen::Matrix3d>(sigma).info() == Eigen::Success;
    }
  }
  return false;
}

Eigen::VectorXd KernelModel::to_unconstrained(const Eigen::VectorXd& u) const {
  Eigen::VectorXd v = u;
  switch (family_) {
    case KernelFamily::gaussian_iso:
      break;
    case KernelFamily::gaussian_bivariate_full:
      v[2] = std::log(u[2]);
      v[3] = std::log(u[3]);
      break;
    case KernelFamily::angular_gaussian_sphere:
      v[3] = std::log(u[3]);
      break;
    case KernelFamily::marked_pp_trivariate:
      break;  // already log-variances and raw correlations
  }
  return v;
}

Eigen::VectorXd KernelModel::from_unconstrained(const Eigen::VectorXd& v) const {
  Eigen::VectorXd u = v;
  switch (family_) {
    case KernelFamily::gaussian_iso:
      break;
    case KernelFamily::gaussian_bivariate_full:
      u[2] = std::exp(v[2]);
      u[3] = std::exp(v[3]);
      break;
    case KernelFamily::angular_gaussian_sphere: {
      const double norm = v.head<3>().norm();
      if (norm > 0.0) u.head<3>() /= norm;
      u[3] = std::exp(v[3]);
      break;
    }
    case KernelFamily::marked_pp_trivariate:
      break;
  }
  return u;
}

Observation KernelModel::simulate(const Eigen::VectorXd& u, RngStream& rng) const {
  switch (family_) {
    case KernelFamily::gaussian_iso: {
      Eigen::VectorXd x(data_dim_);
      const double sd = std::sqrt(sigma2_);
      for (int j = 0; j < data_dim_; ++j) x[j] = u[j] + sd * rng.normal();
      return Observation::euclidean(std::move(x));
    }
    case KernelFamily::gaussian_bivariate_full: {
      const double s1 = std::sqrt(u[2]), s2 = std::sqrt(u[3]), rho = u[4];
      const double z1 = rng.normal(), z2 = rng.normal();
      Eigen::VectorXd x(2);
      x[0] = u[0] + s1 * z1;
      x[1] = u[1] + s2 * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
      return Observation::euclidean(std::move(x));
    }
    case KernelFamily::angular_gaussian_sphere: {
      // z ~ N_3(0, S) with S = Q diag(1,1,beta^-2) Q', then project to the sphere.
      const Eigen::Matrix3d q = rotation_matrix(u.head<3>());
      const Eigen::Vector3d g(rng.normal(), rng.normal(), rng.normal() / u[3]);
      Eigen::Vector3d z = q * g;
      z.normalize();
      return Observation::sphere(z);
    }
    case KernelFamily::marked_pp_trivariate: {
      Eigen::Vector3d mu;
      Eigen::Matrix3d sigma;
      unpack_marked(u, mu, sigma);
      const Eigen::LLT<Eigen::Matrix3d> llt(sigma);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument("simulate: covariance not positive definite");
      const Eigen::Vector3d g(rng.normal(), rng.normal(), rng.normal());
      const Eigen::Vector3d z = mu + llt.matrixL() * g;
      MarkedPoint p;
      p.s1 = kMarkedExtent / (1.0 + std::exp(-z[0]));
      p.s2 = kMarkedExtent / (1.0 + std::exp(-z[1]));
      p.mark = kMarkOffset + std::exp(z[2]);
      return Observation::marked(p);
    }
  }
  throw std::logic_error("KernelModel::simulate: unknown family");
}

// ---------------------------------------------------------------------------
// KernelEvalCache
// ---------------------------------------------------------------------------

KernelEvalCache::KernelEvalCache(const KernelModel& kernel,
                                 std::span<const Eigen::VectorXd> points)
    : family_(kernel.family()),
      size_(points.size()),
      sigma2_(kernel.sigma2()),
      data_dim_(kernel.data_dim()) {
  const auto n = static_cast<Eigen::Index>(size_);
  for (const auto& p : points)
    if (!kernel.valid_mixing_point(p))
      throw std::invalid_argument("KernelEvalCache: invalid mixing point");

  switch (family_) {
    case KernelFamily::gaussian_iso: {
      mu_.resize(n, data_dim_);
      for (Eigen::Index t = 0; t < n; ++t) mu_.row(t) = points[t].transpose();
      scale_ = mu_.rowwise().squaredNorm();
      break;
    }
    case KernelFamily::gaussian_bivariate_full: {
      mu_.resize(n, 2);
      lambda_.resize(n, 3);  // inverse covariance packed as (l11, l12, l22)
      log_norm_.resize(n);
      for (Eigen::Index t = 0; t < n; ++t) {
        const auto& u = points[t];
        mu_.row(t) << u[0], u[1];
        const double s1sq = u[2], s2sq = u[3], rho = u[4];
        const double cov = rho * std::sqrt(s1sq * s2sq);
        const double det = s1sq * s2sq - cov * cov;
        lambda_.row(t) << s2sq / det, -cov / det, s1sq / det;
        log_norm_[t] = -kLog2Pi - 0.5 * std::log(det);
      }
      break;
    }
    case KernelFamily::angular_gaussian_sphere: {
      lambda_.resize(n, 6);  // S^-1 packed as (m11, m22, m33, m12, m13, m23)
      log_norm_.resize(n);
      for (Eigen::Index t = 0; t < n; ++t) {
        const auto& u = points[t];
        const double beta = u[3];
        const Eigen::Matrix3d q = rotation_matrix(u.head<3>());
        const Eigen::Matrix3d inv =
            q * Eigen::Vector3d(1.0, 1.0, beta * beta).asDiagonal() * q.transpose();
        lambda_.row(t) << inv(0, 0), inv(1, 1), inv(2, 2), inv(0, 1), inv(0, 2), inv(1, 2);
        log_norm_[t] = beta / (4.0 * std::numbers::pi);  // linear-scale constant
      }
      break;
    }
    case KernelFamily::marked_pp_trivariate: {
      mu_.resize(n, 3);
      lambda_.resize(n, 6);
      log_norm_.resize(n);
      for (Eigen::Index t = 0; t < n; ++t) {
        Eigen::Vector3d mu;
        Eigen::Matrix3d sigma;
        unpack_marked(points[t], mu, sigma);
        const Eigen::LLT<Eigen::Matrix3d> llt(sigma);
        if (llt.info() != Eigen::Success)
          throw std::invalid_argument("KernelEvalCache: covariance not positive definite");
        const Eigen::Matrix3d inv = llt.solve(Eigen::Matrix3d::Identity());
        mu_.row(t) = mu.transpose();
        lambda_.row(t) << inv(0, 0), inv(1, 1), inv(2, 2), inv(0, 1), inv(0, 2), inv(1, 2);
        const double log_det =
            2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        log_norm_[t] = -1.5 * kLog2Pi - 0.5 * log_det;
      }
      break;
    }
  }
}

void KernelEvalCache::eval_all(const Observation& x, std::span<double> out) const {
  if (out.size() != size_) throw std::invalid_argument("eval_all: output size mismatch");
  const auto n = static_cast<Eigen::Index>(size_);
  Eigen::Map<Eigen::ArrayXd> res(out.data(), n);

  switch (family_) {
    case KernelFamily::gaussian_iso: {
      const Eigen::VectorXd& xv = x.coords();
      const double c = -0.5 * data_dim_ * (kLog2Pi + std::log(sigma2_));
      res = (mu_ * xv).array();  // dot(u_t, x)
      res = c - 0.5 * (scale_.array() - 2.0 * res + xv.squaredNorm()) / sigma2_;
      res = res.exp();
      break;
    }
    case KernelFamily::gaussian_bivariate_full: {
      const Eigen::ArrayXd dx = x.coords()[0] - mu_.col(0).array();
      const Eigen::ArrayXd dy = x.coords()[1] - mu_.col(1).array();
      res = lambda_.col(0).array() * dx.square() +
            2.0 * lambda_.col(1).array() * dx * dy +
            lambda_.col(2).array() * dy.square();
      res = (log_norm_.array() - 0.5 * res).exp();
      break;
    }
    case KernelFamily::angular_gaussian_sphere: {
      const double x1 = x.coords()[0], x2 = x.coords()[1], x3 = x.coords()[2];
      res = lambda_.col(0).array() * (x1 * x1) + lambda_.col(1).array() * (x2 * x2) +
            lambda_.col(2).array() * (x3 * x3) +
            2.0 * (lambda_.col(3).array() * (x1 * x2) + lambda_.col(4).array() * (x1 * x3) +
                   lambda_.col(5).array() * (x2 * x3));
      res = log_norm_.array() / (res * res.sqrt());
      break;
    }
    case KernelFamily::marked_pp_trivariate: {
      const Eigen::Vector3d& z = x.transformed();
      const Eigen::ArrayXd d1 = z[0] - mu_.col(0).array();
      const Eigen::ArrayXd d2 = z[1] - mu_.col(1).array();
      const Eigen::ArrayXd d3 = z[2] - mu_.col(2).array();
      res = lambda_.col(0).array() * d1.square() + lambda_.col(1).array() * d2.square() +
            lambda_.col(2).array() * d3.square() +
            2.0 * (lambda_.col(3).array() * d1 * d2 + lambda_.col(4).array() * d1 * d3 +
                   lambda_.col(5).array() * d2 * d3);
      res = (log_norm_.array() - 0.5 * res - x.log_jacobian()).exp();
      break;
    }
  }
  res = res.max(kDensityFloor);
}

}  // namespace prmix
