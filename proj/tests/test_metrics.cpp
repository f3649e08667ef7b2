#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "prmix/grid.hpp"
#include "prmix/numeric.hpp"
#include "prmix/kernels.hpp"
#include "prmix/metrics.hpp"
#include "prmix/pr_quadrature.hpp"
#include "prmix/prticle.hpp"
#include "prmix/rng.hpp"
#include "prmix/samplers.hpp"
#include "prmix/weights.hpp"

using namespace prmix;

namespace {

ParticleSet cloud1(const std::vector<double>& coords) {
  std::vector<Eigen::VectorXd> pts;
  for (double c : coords) pts.push_back(Eigen::VectorXd::Constant(1, c));
  return ParticleSet(pts);
}

DensityEstimate lambda_density(int dim, std::function<double(const Eigen::VectorXd&)> f) {
  DensityEstimate d;
  d.dim = dim;
  d.eval_batch = [f](const Eigen::MatrixXd& pts, Eigen::VectorXd& out) {
    out.resize(pts.cols());
    for (Eigen::Index c = 0; c < pts.cols(); ++c) out[c] = f(pts.col(c));
  };
  return d;
}

}  // namespace

TEST_CASE("particle mixture density: fresh cloud and single particle") {
  const KernelModel kernel = KernelModel::gaussian_iso(1, 0.5);
  RngStream rng(1);
  const ParticleSet fresh = init_particles(uniform_box_sampler({{0.0, 10.0}}), 64, rng);
  const Observation x = Observation::euclidean(Eigen::VectorXd::Constant(1, 5.0));
  double expected = 0.0;
  for (const auto& u : fresh.particles()) expected += kernel.eval(x, u);
  expected /= 64.0;
  CHECK(mixture_density_particle(x, fresh, kernel) == doctest::Approx(expected).epsilon(1e-12));

  const ParticleSet one = cloud1({3.0});
  CHECK(mixture_density_particle(x, one, kernel) ==
        doctest::Approx(kernel.eval(x, one.particles()[0])).epsilon(1e-12));
}

TEST_CASE("a cloud of unit-concentration sphere kernels is uniform") {
  const KernelModel kernel = KernelModel::angular_gaussian_sphere();
  RngStream rng(2);
  std::vector<Eigen::VectorXd> pts;
  for (int t = 0; t < 10; ++t) {
    const Eigen::Vector3d mu = sample_uniform_sphere(rng);
    Eigen::VectorXd u(4);
    u << mu[0], mu[1], mu[2], 1.0;
    pts.push_back(u);
  }
  const ParticleSet state(pts);
  const Observation x = Observation::sphere(sample_uniform_sphere(rng));
  CHECK(mixture_density_particle(x, state, kernel) ==
        doctest::Approx(1.0 / (4.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("particle and quadrature mixture densities agree on a 1-d study") {
  const KernelModel kernel = KernelModel::gaussian_iso(1, 0.5);
  const WeightSchedule schedule(1.0);
  RngStream data_rng(71);
  const MixingSampler truth = [](RngStream& r) {
    return Eigen::VectorXd::Constant(1, sample_scaled_beta(10, 5, 0, 10, r));
  };
  const Dataset data = sample_mixture_data(truth, kernel, 100, data_rng);
  const auto quad = run_pr_quadrature(data, make_grid({{0.0, 10.0}}, {400}), schedule, kernel);
  const DensityEstimate m_n = quadrature_mixture_estimate(quad.density, kernel);

  Eigen::MatrixXd pts(1, 50);
  for (int c = 0; c < 50; ++c) pts(0, c) = 0.5 + 9.0 * c / 49.0;
  const Eigen::VectorXd ref = m_n.eval(pts);

  const auto max_rel_err = [&](int T, int rep) {
    RngStream rng(derive_seed(717, T, rep));
    ParticleSet state =
        init_particles(uniform_box_sampler({{0.0, 10.0}}), static_cast<std::size_t>(T), rng);
    const ParticleSet fitted = run_prticle(data, std::move(state), schedule, kernel).state;
    const Eigen::VectorXd got = particle_mixture_estimate(fitted, kernel).eval(pts);
    return ((got - ref).cwiseAbs().array() / ref.array()).maxCoeff();
  };

  std::vector<double> small_t, large_t;
  for (int rep = 0; rep < 5; ++rep) {
    small_t.push_back(max_rel_err(100, rep));
    large_t.push_back(max_rel_err(10000, rep));
  }
  std::sort(small_t.begin(), small_t.end());
  std::sort(large_t.begin(), large_t.end());
  CHECK(large_t[2] < small_t[2]);   // deviation shrinks as the cloud grows
  CHECK(large_t[2] < 0.05);         // and lands within 5% everywhere
}

TEST_CASE("kde basics: single kernel value and classical reduction") {
  const ParticleSet one = cloud1({0.0});
  Eigen::MatrixXd at_zero(1, 1);
  at_zero(0, 0) = 0.0;
  const Eigen::VectorXd v = weighted_kde(one, Eigen::VectorXd::Constant(1, 1.0), at_zero);
  CHECK(v[0] == doctest::Approx(0.3989422804014327).epsilon(1e-12));

  // uniform weights equal the classical estimator computed by hand
  RngStream rng(3);
  std::vector<double> coords;
  for (int i = 0; i < 50; ++i) coords.push_back(rng.normal());
  const ParticleSet state = cloud1(coords);
  Eigen::MatrixXd pts(1, 7);
  for (int c = 0; c < 7; ++c) pts(0, c) = -3.0 + c;
  const double h = 0.4;
  const Eigen::VectorXd got = weighted_kde(state, Eigen::VectorXd::Constant(1, h), pts);
  for (int c = 0; c < 7; ++c) {
    double classical = 0.0;
    for (double u : coords)
      classical += std::exp(-0.5 * (pts(0, c) - u) * (pts(0, c) - u) / (h * h));
    classical /= 50.0 * h * std::sqrt(2.0 * std::numbers::pi);
    CHECK(got[c] == doctest::Approx(classical).epsilon(1e-12));
  }

  CHECK_THROWS_AS(weighted_kde(state, Eigen::VectorXd::Constant(1, 0.0), pts),
                  std::invalid_argument);
}

TEST_CASE("kde integrates to about one on a wide grid") {
  RngStream rng(4);
  std::vector<double> coords;
  for (int i = 0; i < 400; ++i) coords.push_back(2.0 * rng.normal());
  const ParticleSet state = cloud1(coords);
  const Eigen::VectorXd h = silverman_bandwidth(state);

  const GridDensity grid = make_grid({{-20.0, 20.0}}, {2001});
  Eigen::MatrixXd pts(1, grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g)
    pts(0, static_cast<Eigen::Index>(g)) = grid.points()[g][0];
  const Eigen::VectorXd vals = weighted_kde(state, h, pts);
  double integral = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g)
    integral += vals[static_cast<Eigen::Index>(g)] * grid.cell_weights()[static_cast<Eigen::Index>(g)];
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("kde with a plug-in bandwidth recovers a known gaussian") {
  RngStream rng(5);
  std::vector<double> coords;
  for (int i = 0; i < 10000; ++i) coords.push_back(1.5 + 0.8 * rng.normal());
  const ParticleSet state = cloud1(coords);
  const DensityEstimate kde = weighted_kde_estimate(state, silverman_bandwidth(state));
  const DensityEstimate truth = lambda_density(1, [](const Eigen::VectorXd& x) {
    return std::exp(-0.5 * (x[0] - 1.5) * (x[0] - 1.5) / 0.64) /
           std::sqrt(2.0 * std::numbers::pi * 0.64);
  });
  const GridDensity grid = make_grid({{-4.0, 7.0}}, {1500});
  CHECK(l1_distance(truth, kde, grid) < 0.1);
}

TEST_CASE("l1 distance: identity, piecewise-constant case, metric axioms") {
  const DensityEstimate u01 = lambda_density(
      1, [](const Eigen::VectorXd& x) { return (x[0] >= 0.0 && x[0] <= 1.0) ? 1.0 : 0.0; });
  const DensityEstimate u02 = lambda_density(
      1, [](const Eigen::VectorXd& x) { return (x[0] >= 0.0 && x[0] <= 2.0) ? 0.5 : 0.0; });
  const GridDensity grid = make_grid({{-0.5, 2.5}}, {6001});

  CHECK(l1_distance(u01, u01, grid) == 0.0);
  CHECK(l1_distance(u01, u02, grid) == doctest::Approx(1.0).epsilon(0.01));

  // disjoint supports: total variation maximum
  const DensityEstimate a = lambda_density(
      1, [](const Eigen::VectorXd& x) { return (x[0] >= -0.4 && x[0] <= 0.6) ? 1.0 : 0.0; });
  const DensityEstimate b = lambda_density(
      1, [](const Eigen::VectorXd& x) { return (x[0] >= 1.4 && x[0] <= 2.4) ? 1.0 : 0.0; });
  CHECK(l1_distance(a, b, grid) == doctest::Approx(2.0).epsilon(0.01));

  // symmetry exactly, triangle inequality on random triples
  RngStream rng(6);
  for (int rep = 0; rep < 5; ++rep) {
    const double m1 = rng.uniform(0.0, 2.0), m2 = rng.uniform(0.0, 2.0), m3 = rng.uniform(0.0, 2.0);
    const auto gaussian = [](double mu) {
      return lambda_density(1, [mu](const Eigen::VectorXd& x) {
        return std::exp(-0.5 * (x[0] - mu) * (x[0] - mu)) / std::sqrt(2.0 * std::numbers::pi);
      });
    };
    const DensityEstimate f1 = gaussian(m1), f2 = gaussian(m2), f3 = gaussian(m3);
    const GridDensity wide = make_grid({{-8.0, 10.0}}, {2000});
    const double d12 = l1_distance(f1, f2, wide);
    const double d21 = l1_distance(f2, f1, wide);
    const double d13 = l1_distance(f1, f3, wide);
    const double d32 = l1_distance(f3, f2, wide);
    CHECK(d12 == d21);
    CHECK(d12 <= d13 + d32 + 1e-12);
  }
}

TEST_CASE("kl of a density against itself is zero within error") {
  const DensityEstimate g = lambda_density(1, [](const Eigen::VectorXd& x) {
    return std::exp(-0.5 * x[0] * x[0]) / std::sqrt(2.0 * std::numbers::pi);
  });
  RngStream rng(7);
  const auto sampler = [](RngStream& r) { return Eigen::VectorXd::Constant(1, r.normal()); };
  const KlEstimate kl = kl_divergence_mc(g, sampler, g, 20000, rng);
  CHECK(std::abs(kl.value) <= 4.0 * kl.std_error + 1e-12);
  CHECK(kl.flagged == 0);
}

TEST_CASE("kl between unit gaussians matches the closed form") {
  const auto gaussian = [](double mu) {
    return lambda_density(1, [mu](const Eigen::VectorXd& x) {
      return std::exp(-0.5 * (x[0] - mu) * (x[0] - mu)) / std::sqrt(2.0 * std::numbers::pi);
    });
  };
  const DensityEstimate p = gaussian(0.0), q = gaussian(1.0);

  SUBCASE("monte carlo") {
    RngStream rng(8);
    const auto sampler = [](RngStream& r) { return Eigen::VectorXd::Constant(1, r.normal()); };
    const KlEstimate kl = kl_divergence_mc(p, sampler, q, 100000, rng);
    CHECK(kl.value == doctest::Approx(0.5).epsilon(0.05));
    CHECK(std::abs(kl.value - 0.5) < 4.0 * kl.std_error);
  }

  SUBCASE("quadrature") {
    const GridDensity grid = make_grid({{-10.0, 11.0}}, {4000});
    const KlEstimate kl = kl_divergence_quadrature(p, q, grid);
    CHECK(kl.value == doctest::Approx(0.5).epsilon(1e-4));
  }
}

TEST_CASE("quadrature mixture sampler reproduces its density") {
  // d=1 check: histogram of draws against the evaluated mixture
  const KernelModel kernel = KernelModel::gaussian_iso(1, 0.5);
  GridDensity grid = make_grid({{0.0, 10.0}}, {200});
  // roughen the density so the test has structure
  for (std::size_t g = 0; g < grid.size(); ++g)
    grid.values()[static_cast<Eigen::Index>(g)] *= 1.0 + grid.points()[g][0] / 10.0;
  grid.normalize();

  RngStream rng(9);
  const auto sampler = quadrature_mixture_sampler(grid, kernel);
  const int n = 200000, bins = 40;
  const double lo = -3.0, hi = 13.0, h = (hi - lo) / bins;
  std::vector<double> counts(bins, 0.0);
  for (int i = 0; i < n; ++i) {
    const double x = sampler(rng)[0];
    const int b = static_cast<int>((x - lo) / h);
    if (b >= 0 && b < bins) counts[static_cast<std::size_t>(b)] += 1.0;
  }
  const DensityEstimate mix = quadrature_mixture_estimate(grid, kernel);
  double l1 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double center = lo + (b + 0.5) * h;
    const double expected = mix(Eigen::VectorXd::Constant(1, center));
    l1 += std::abs(counts[static_cast<std::size_t>(b)] / (n * h) - expected) * h;
  }
  CHECK(l1 < 0.02);
}

TEST_CASE("batched quadrature mixture matches the scalar op in 2-d") {
  const KernelModel kernel = KernelModel::gaussian_iso(2, 0.5);
  GridDensity grid = make_grid({{0.0, 10.0}, {0.0, 10.0}}, {40, 40});
  for (std::size_t g = 0; g < grid.size(); ++g)
    grid.values()[static_cast<Eigen::Index>(g)] *=
        1.0 + 0.05 * (grid.points()[g][0] - grid.points()[g][1]);
  grid.normalize();

  RngStream rng(10);
  Eigen::MatrixXd pts(2, 25);
  for (int c = 0; c < 25; ++c) pts.col(c) = Eigen::Vector2d(rng.uniform(-1, 11), rng.uniform(-1, 11));
  const Eigen::VectorXd batch = mixture_density_quadrature_batch(pts, grid, kernel);
  for (int c = 0; c < 25; ++c) {
    const Observation x = Observation::euclidean(pts.col(c));
    CHECK(batch[c] == doctest::Approx(mixture_density_quadrature(x, grid, kernel)).epsilon(1e-10));
  }
}

TEST_CASE("metric results serialize in the documented shape") {
  KlEstimate kl;
  kl.value = 0.25;
  kl.std_error = 0.125;
  kl.flagged = 2;
  CHECK(metric_json("kl_test", kl) ==
        "{\"name\":\"kl_test\",\"value\":0.25,\"std_error\":0.125,\"flagged_points\":2}");
  CHECK(metric_json("l1", 1.5) ==
        "{\"name\":\"l1\",\"value\":1.5,\"std_error\":0,\"flagged_points\":0}");
}

TEST_CASE("conditional mark density: diagonal component ignores the location") {
  const KernelModel kernel = KernelModel::marked_pp();
  Eigen::VectorXd u(9);
  u << 0.3, -0.2, 1.2, std::log(0.7), std::log(0.9), std::log(0.4), 0.0, 0.0, 0.0;
  const ParticleSet one({u});

  Eigen::VectorXd mark_grid(300);
  for (int k = 0; k < 300; ++k) mark_grid[k] = 2.0 + 78.0 * (k + 1) / 300.0;

  const Eigen::VectorXd a = conditional_mark_density(50.0, 60.0, mark_grid, one, kernel);
  const Eigen::VectorXd b = conditional_mark_density(150.0, 20.0, mark_grid, one, kernel);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);

  // normalization on the grid
  std::vector<double> mg(mark_grid.data(), mark_grid.data() + mark_grid.size());
  std::vector<double> av(a.data(), a.data() + a.size());
  CHECK(trapezoid_integral(mg, av) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("conditional mark density follows the dominant component") {
  const KernelModel kernel = KernelModel::marked_pp();
  Eigen::VectorXd near(9), far(9);
  near << 0.0, 0.0, 1.0, std::log(0.4), std::log(0.4), std::log(0.3), 0.0, 0.0, 0.0;
  far << 12.0, 12.0, 3.0, std::log(0.01), std::log(0.01), std::log(0.3), 0.0, 0.0, 0.0;
  const ParticleSet both({near, far});
  const ParticleSet only_near({near});

  Eigen::VectorXd mark_grid(300);
  for (int k = 0; k < 300; ++k) mark_grid[k] = 2.0 + 78.0 * (k + 1) / 300.0;

  // at the window center the far component's location marginal underflows
  const Eigen::VectorXd mixed = conditional_mark_density(100.0, 100.0, mark_grid, both, kernel);
  const Eigen::VectorXd solo = conditional_mark_density(100.0, 100.0, mark_grid, only_near, kernel);
  CHECK((mixed - solo).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("conditional mark density integrates to one at random locations") {
  const KernelModel kernel = KernelModel::marked_pp();
  RngStream rng(11);
  std::vector<Eigen::VectorXd> pts;
  for (int t = 0; t < 30; ++t) {
    Eigen::VectorXd u(9);
    u << rng.normal(), rng.normal(), 1.0 + 0.5 * rng.normal(), std::log(0.3 + rng.uniform()),
        std::log(0.3 + rng.uniform()), std::log(0.3 + rng.uniform()), 0.3 * rng.uniform(),
        -0.3 * rng.uniform(), 0.3 * rng.uniform();
    pts.push_back(u);
  }
  const ParticleSet state(pts);

  Eigen::VectorXd mark_grid(400);
  for (int k = 0; k < 400; ++k) mark_grid[k] = 2.0 + 78.0 * (k + 1) / 400.0;
  std::vector<double> mg(mark_grid.data(), mark_grid.data() + mark_grid.size());

  for (int i = 0; i < 10; ++i) {
    const double s1 = rng.uniform(20.0, 180.0);
    const double s2 = rng.uniform(20.0, 180.0);
    const Eigen::VectorXd g = conditional_mark_density(s1, s2, mark_grid, state, kernel);
    CHECK((g.array() >= 0.0).all());
    std::vector<double> gv(g.data(), g.data() + g.size());
    CHECK(trapezoid_integral(mg, gv) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("empirical mark density: degenerate and full-window cases") {
  Dataset data;
  data.push_back(Observation::marked(MarkedPoint{100, 100, 12.0}));
  data.push_back(Observation::marked(MarkedPoint{105, 102, 12.0}));
  data.push_back(Observation::marked(MarkedPoint{98, 97, 12.0}));

  Eigen::VectorXd mark_grid(200);
  for (int k = 0; k < 200; ++k) mark_grid[k] = 2.0 + 38.0 * (k + 1) / 200.0;

  // all marks equal: density concentrates at that mark
  const Eigen::VectorXd g = empirical_mark_density(data, 100, 100, 30, 0.8, mark_grid);
  Eigen::Index argmax = 0;
  g.maxCoeff(&argmax);
  CHECK(std::abs(mark_grid[argmax] - 12.0) < 0.5);

  // radius covering everything equals the KDE of all marks regardless of s
  const Eigen::VectorXd all1 = empirical_mark_density(data, 10, 10, 1000, 0.8, mark_grid);
  const Eigen::VectorXd all2 = empirical_mark_density(data, 180, 150, 1000, 0.8, mark_grid);
  CHECK((all1 - all2).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(empirical_mark_density(data, 10, 10, 5, 0.8, mark_grid), std::runtime_error);
  CHECK_THROWS_AS(empirical_mark_density(data, 100, 100, 30, 0.0, mark_grid),
                  std::invalid_argument);
}
