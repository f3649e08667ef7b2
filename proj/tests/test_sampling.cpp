#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "prmix/kernels.hpp"
#include "prmix/rng.hpp"
#include "prmix/samplers.hpp"

using namespace prmix;

TEST_CASE("scaled beta mean matches the closed form") {
  RngStream rng(101);
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_scaled_beta(10, 5, 0, 10, rng);
  const double mean = sum / n;
  // var of Beta(10,5) scaled to [0,10]: 100 * ab/((a+b)^2 (a+b+1))
  const double sd = std::sqrt(100.0 * 50.0 / (225.0 * 16.0));
  CHECK(std::abs(mean - 10.0 * 10.0 / 15.0) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniform sphere draws average to the origin") {
  RngStream rng(102);
  const int n = 3000000 / 3;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d x = sample_uniform_sphere(rng);
    CHECK(std::abs(x.norm() - 1.0) < 1e-12);
    mean += x;
  }
  mean /= static_cast<double>(n);
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(mean[j]) < 3.0 / std::sqrt(3.0 * static_cast<double>(n)));
}

TEST_CASE("multivariate t covariance is scale times df/(df-2)") {
  RngStream rng(103);
  const int n = 1000000;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  const Eigen::Vector2d loc(0.0, 0.0);
  const Eigen::Matrix2d scale = Eigen::Matrix2d::Identity();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = sample_mvt(loc, scale, 5.0, rng);
    cov += x * x.transpose();
  }
  cov /= static_cast<double>(n);
  CHECK(cov(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(0.05));
  CHECK(cov(1, 1) == doctest::Approx(5.0 / 3.0).epsilon(0.05));
  CHECK(std::abs(cov(0, 1)) < 0.05);
}

TEST_CASE("multivariate normal reproduces its covariance") {
  RngStream rng(104);
  Eigen::Matrix2d cov;
  cov << 2.0, 0.8, 0.8, 1.0;
  const Eigen::Vector2d mean(1.0, -1.0);
  const int n = 400000;
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  std::vector<Eigen::Vector2d> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    draws.push_back(sample_mvnormal(mean, cov, rng));
    m += draws.back();
  }
  m /= static_cast<double>(n);
  for (const auto& d : draws) c += (d - m) * (d - m).transpose();
  c /= static_cast<double>(n);
  CHECK((m - mean).cwiseAbs().maxCoeff() < 0.01);
  CHECK((c - cov).cwiseAbs().maxCoeff() < 0.02);

  CHECK_THROWS_AS(sample_mvnormal(mean, Eigen::Matrix2d::Constant(1.0), rng),
                  std::invalid_argument);
}

TEST_CASE("gamma parameter validation") {
  RngStream rng(105);
  CHECK_THROWS_AS(sample_gamma(0.0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_gamma(1.0, -1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_scaled_beta(1.0, 1.0, 3.0, 2.0, rng), std::invalid_argument);
}

TEST_CASE("point-mass mixing produces a plain kernel sample") {
  const KernelModel kernel = KernelModel::gaussian_iso(2, 0.5);
  const Eigen::Vector2d u_star(3.0, -1.0);
  const MixingSampler point_mass = [&](RngStream&) { return Eigen::VectorXd(u_star); };

  RngStream rng(106);
  const Dataset data = sample_mixture_data(point_mass, kernel, 50000, rng);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& obs : data) mean += obs.coords().head<2>();
  mean /= static_cast<double>(data.size());
  CHECK((mean - u_star).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("mixture data generation is deterministic given the stream") {
  const KernelModel kernel = KernelModel::gaussian_iso(1, 0.5);
  const MixingSampler truth = [](RngStream& r) {
    return Eigen::VectorXd::Constant(1, sample_scaled_beta(10, 5, 0, 10, r));
  };
  RngStream a(107), b(107);
  const Dataset da = sample_mixture_data(truth, kernel, 100, a);
  const Dataset db = sample_mixture_data(truth, kernel, 100, b);
  for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i] == db[i]);

  std::vector<Eigen::VectorXd> latents;
  RngStream c(107);
  sample_mixture_data(truth, kernel, 100, c, &latents);
  CHECK(latents.size() == 100);
}

TEST_CASE("simulated mixture data matches the quadrature marginal of the truth") {
  // histogram of 1e5 draws against m(x) = integral of k(x|u) Beta-density(u) du
  const KernelModel kernel = KernelModel::gaussian_iso(1, 0.5);
  const MixingSampler truth = [](RngStream& r) {
    return Eigen::VectorXd::Constant(1, sample_scaled_beta(10, 5, 0, 10, r));
  };
  RngStream rng(108);
  const Dataset data = sample_mixture_data(truth, kernel, 100000, rng);

  // independent quadrature of the true mixture density
  const auto beta_pdf = [](double u) {
    if (u <= 0.0 || u >= 10.0) return 0.0;
    const double q = u / 10.0;
    const double log_b = std::lgamma(15.0) - std::lgamma(10.0) - std::lgamma(5.0);
    return std::exp(log_b + 9.0 * std::log(q) + 4.0 * std::log(1.0 - q)) / 10.0;
  };
  const auto m_true = [&](double x) {
    const int n = 2000;
    const double h = 10.0 / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double u = i * h;
      const double w = (i == 0 || i == n) ? 0.5 * h : h;
      s += w * beta_pdf(u) *
           eval_gaussian_iso(Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Constant(1, u), 0.5);
    }
    return s;
  };

  const int bins = 64;
  const double lo = -3.0, hi = 13.0, h = (hi - lo) / bins;
  std::vector<double> counts(bins, 0.0);
  for (const auto& obs : data) {
    const int b = static_cast<int>((obs.coords()[0] - lo) / h);
    if (b >= 0 && b < bins) counts[static_cast<std::size_t>(b)] += 1.0;
  }
  double l1 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double center = lo + (b + 0.5) * h;
    l1 += std::abs(counts[static_cast<std::size_t>(b)] / (100000.0 * h) - m_true(center)) * h;
  }
  CHECK(l1 < 0.05);
}

TEST_CASE("projected gaussian draws match the angular density by chi-square") {
  const Eigen::Vector3d mu = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
  const double beta = 0.4;
  const KernelModel kernel = KernelModel::angular_gaussian_sphere();
  Eigen::VectorXd u(4);
  u << mu[0], mu[1], mu[2], beta;

  RngStream rng(109);
  const int n = 100000;

  // cells: 10 bands in z = cos(theta), 4 azimuth quadrants
  const int nz = 10, na = 4;
  std::vector<double> observed(static_cast<std::size_t>(nz * na), 0.0);
  for (int i = 0; i < n; ++i) {
    const Observation obs = kernel.simulate(u, rng);
    const Eigen::Vector3d x = obs.coords().head<3>();
    int iz = static_cast<int>((x[2] + 1.0) / 2.0 * nz);
    iz = std::min(iz, nz - 1);
    double phi = std::atan2(x[1], x[0]);
    if (phi < 0) phi += 2.0 * std::numbers::pi;
    int ia = static_cast<int>(phi / (2.0 * std::numbers::pi) * na);
    ia = std::min(ia, na - 1);
    observed[static_cast<std::size_t>(iz * na + ia)] += 1.0;
  }

  // expected probabilities by fine quadrature of the density over each cell
  std::vector<double> expected(static_cast<std::size_t>(nz * na), 0.0);
  const int sub = 40;
  for (int iz = 0; iz < nz; ++iz) {
    for (int ia = 0; ia < na; ++ia) {
      double p = 0.0;
      for (int a = 0; a < sub; ++a) {
        const double z = -1.0 + (iz + (a + 0.5) / sub) * 2.0 / nz;
        const double theta = std::acos(z);
        for (int b = 0; b < sub; ++b) {
          const double phi = (ia + (b + 0.5) / sub) * 2.0 * std::numbers::pi / na;
          Eigen::Vector3d x(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), z);
          x.normalize();
          // dA = dz dphi on the cylinder-equal-area parametrization
          p += eval_angular_gaussian(x, mu, beta) * (2.0 / nz / sub) *
               (2.0 * std::numbers::pi / na / sub);
        }
      }
      expected[static_cast<std::size_t>(iz * na + ia)] = p;
    }
  }

  double chi2 = 0.0;
  for (std::size_t c = 0; c < observed.size(); ++c) {
    const double e = expected[c] * n;
    CHECK(e > 10.0);  // cells are well-populated for the chi-square approximation
    chi2 += (observed[c] - e) * (observed[c] - e) / e;
  }
  // 39 degrees of freedom; 99.9% quantile is 72.05
  CHECK(chi2 < 72.05);
}
