#include "prmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "prmix/io.hpp"
#include "prmix/numeric.hpp"
#include "prmix/pr_quadrature.hpp"

namespace prmix {

double DensityEstimate::operator()(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd pts(x.size(), 1);
  pts.col(0) = x;
  Eigen::VectorXd out(1);
  eval_batch(pts, out);
  return out[0];
}

Eigen::VectorXd DensityEstimate::eval(const Eigen::MatrixXd& points) const {
  Eigen::VectorXd out(points.cols());
  eval_batch(points, out);
  return out;
}

DensityEstimate grid_estimate(const GridDensity& grid) {
  DensityEstimate d;
  d.dim = grid.dim();
  const GridDensity copy = grid;
  d.eval_batch = [copy](const Eigen::MatrixXd& pts, Eigen::VectorXd& out) {
    out.resize(pts.cols());
    for (Eigen::Index k = 0; k < pts.cols(); ++k) out[k] = copy.interpolate(pts.col(k));
  };
  return d;
}

namespace {

Observation observation_from_column(const KernelModel& kernel, const Eigen::VectorXd& col) {
  switch (kernel.family()) {
    case KernelFamily::gaussian_iso:
    case KernelFamily::gaussian_bivariate_full:
      return Observation::euclidean(col);
    case KernelFamily::angular_gaussian_sphere:
      return Observation::sphere(col.head<3>());
    case KernelFamily::marked_pp_trivariate:
      return Observation::marked(MarkedPoint{col[0], col[1], col[2]});
  }
  throw std::logic_error("observation_from_column: unknown family");
}

}  // namespace

DensityEstimate particle_mixture_estimate(const ParticleSet& state, const KernelModel& kernel) {
  DensityEstimate d;
  d.dim = kernel.data_dim();
  auto cache = std::make_shared<KernelEvalCache>(kernel, state.particles());
  const Eigen::VectorXd deltas = state.deltas();
  const KernelModel k = kernel;
  d.eval_batch = [cache, deltas, k](const Eigen::MatrixXd& pts, Eigen::VectorXd& out) {
    out.resize(pts.cols());
    const double T_inv = 1.0 / static_cast<double>(deltas.size());
    std::vector<double> kvals(static_cast<std::size_t>(deltas.size()));
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      cache->eval_all(observation_from_column(k, pts.col(c)), kvals);
      out[c] = T_inv * Eigen::Map<const Eigen::VectorXd>(kvals.data(), deltas.size()).dot(deltas);
    }
  };
  return d;
}

double mixture_density_particle(const Observation& x, const ParticleSet& state,
                                const KernelModel& kernel) {
  const KernelEvalCache cache(kernel, state.particles());
  std::vector<double> kvals(state.size());
  cache.eval_all(x, kvals);
  std::vector<double> terms(state.size());
  for (std::size_t t = 0; t < state.size(); ++t)
    terms[t] = kvals[t] * state.deltas()[static_cast<Eigen::Index>(t)];
  return pairwise_sum(terms) / static_cast<double>(state.size());
}

Eigen::VectorXd mixture_density_quadrature_batch(const Eigen::MatrixXd& points,
                                                 const GridDensity& state,
                                                 const KernelModel& kernel) {
  Eigen::VectorXd out(points.cols());

  // Tensor-grid isotropic Gaussian mixtures contract along each axis.
  if (kernel.family() == KernelFamily::gaussian_iso && kernel.data_dim() == state.dim()) {
    const double s2 = kernel.sigma2();
    const double norm1d = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);
    if (state.dim() == 1) {
      const Eigen::ArrayXd axis = state.axes()[0].array();
      Eigen::VectorXd masses = state.values().cwiseProduct(state.cell_weights());
      for (Eigen::Index c = 0; c < points.cols(); ++c) {
        const Eigen::ArrayXd a = (-0.5 * (points(0, c) - axis).square() / s2).exp() * norm1d;
        out[c] = a.matrix().dot(masses);
      }
      return out;
    }
    const Eigen::ArrayXd ax0 = state.axes()[0].array();
    const Eigen::ArrayXd ax1 = state.axes()[1].array();
    const int n0 = state.resolution()[0], n1 = state.resolution()[1];
    Eigen::MatrixXd masses(n0, n1);
    for (int i = 0; i < n0; ++i)
      for (int j = 0; j < n1; ++j)
        masses(i, j) = state.values()[i * n1 + j] * state.cell_weights()[i * n1 + j];
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      const Eigen::VectorXd a =
          ((-0.5 * (points(0, c) - ax0).square() / s2).exp() * norm1d).matrix();
      const Eigen::VectorXd b =
          ((-0.5 * (points(1, c) - ax1).square() / s2).exp() * norm1d).matrix();
      out[c] = a.dot(masses * b);
    }
    return out;
  }

  const KernelEvalCache cache(kernel, state.points());
  const Eigen::VectorXd masses = state.values().cwiseProduct(state.cell_weights());
  std::vector<double> kvals(state.size());
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    cache.eval_all(observation_from_column(kernel, points.col(c)), kvals);
    out[c] = Eigen::Map<const Eigen::VectorXd>(kvals.data(), masses.size()).dot(masses);
  }
  return out;
}

DensityEstimate quadrature_mixture_estimate(const GridDensity& state, const KernelModel& kernel) {
  DensityEstimate d;
  d.dim = kernel.data_dim();
  const GridDensity grid = state;
  const KernelModel k = kernel;
  d.eval_batch = [grid, k](const Eigen::MatrixXd& pts, Eigen::VectorXd& out) {
    out = mixture_density_quadrature_batch(pts, grid, k);
  };
  return d;
}

std::function<Eigen::VectorXd(RngStream&)> quadrature_mixture_sampler(const GridDensity& state,
                                                                      const KernelModel& kernel) {
  std::vector<double> cdf(state.size());
  double acc = 0.0;
  for (std::size_t g = 0; g < state.size(); ++g) {
    acc += state.values()[g] * state.cell_weights()[g];
    cdf[g] = acc;
  }
  for (auto& c : cdf) c /= acc;
  auto points = std::make_shared<std::vector<Eigen::VectorXd>>(state.points());
  auto cdf_ptr = std::make_shared<std::vector<double>>(std::move(cdf));
  const KernelModel k = kernel;
  return [points, cdf_ptr, k](RngStream& rng) {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf_ptr->begin(), cdf_ptr->end(), u);
    const std::size_t g = std::min<std::size_t>(it - cdf_ptr->begin(), points->size() - 1);
    return k.simulate((*points)[g], rng).coords();
  };
}

Eigen::VectorXd weighted_kde(const ParticleSet& state, const Eigen::VectorXd& bandwidth,
                             const Eigen::MatrixXd& eval_points) {
  const int dim = state.dim();
  if (bandwidth.size() != dim) throw std::invalid_argument("weighted_kde: bandwidth size mismatch");
  if ((bandwidth.array() <= 0.0).any())
    throw std::invalid_argument("weighted_kde: bandwidths must be positive");
  if (eval_points.rows() != dim)
    throw std::invalid_argument("weighted_kde: evaluation point dimension mismatch");

  const double log_norm =
      -0.5 * dim * std::log(2.0 * std::numbers::pi) - bandwidth.array().log().sum();
  const double norm = std::exp(log_norm);

  Eigen::VectorXd out = Eigen::VectorXd::Zero(eval_points.cols());
  Eigen::ArrayXd q(eval_points.cols());
  for (std::size_t t = 0; t < state.size(); ++t) {
    q.setZero();
    for (int j = 0; j < dim; ++j)
      q += ((eval_points.row(j).array() - state.particles()[t][j]) / bandwidth[j]).square();
    out.array() += state.deltas()[static_cast<Eigen::Index>(t)] * (-0.5 * q).exp();
  }
  out *= norm / static_cast<double>(state.size());
  return out;
}

DensityEstimate weighted_kde_estimate(const ParticleSet& state, const Eigen::VectorXd& bandwidth) {
  DensityEstimate d;
  d.dim = state.dim();
  const ParticleSet copy = state;
  const Eigen::VectorXd h = bandwidth;
  d.eval_batch = [copy, h](const Eigen::MatrixXd& pts, Eigen::VectorXd& out) {
    out = weighted_kde(copy, h, pts);
  };
  return d;
}

Eigen::VectorXd silverman_bandwidth(const ParticleSet& state) {
  const double e = ess(state);
  const int dim = state.dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (std::size_t t = 0; t < state.size(); ++t)
    mean += state.deltas()[static_cast<Eigen::Index>(t)] * state.particles()[t];
  mean /= static_cast<double>(state.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (std::size_t t = 0; t < state.size(); ++t)
    var += state.deltas()[static_cast<Eigen::Index>(t)] *
           (state.particles()[t] - mean).array().square().matrix();
  var /= static_cast<double>(state.size());

  Eigen::VectorXd h = 1.06 * var.array().sqrt() * std::pow(e, -0.2);
  if ((h.array() <= 0.0).any())
    throw std::runtime_error("silverman_bandwidth: degenerate particle spread");
  return h;
}

double l1_distance(const DensityEstimate& a, const DensityEstimate& b, const GridDensity& grid) {
  Eigen::MatrixXd pts(grid.dim(), grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) pts.col(static_cast<Eigen::Index>(g)) = grid.points()[g];
  const Eigen::VectorXd va = a.eval(pts);
  const Eigen::VectorXd vb = b.eval(pts);
  std::vector<double> terms(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto i = static_cast<Eigen::Index>(g);
    terms[g] = std::abs(va[i] - vb[i]) * grid.cell_weights()[i];
  }
  return pairwise_sum(terms);
}

namespace {

KlEstimate kl_from_log_ratios(const std::vector<double>& logs, int flagged) {
  KlEstimate out;
  out.n = static_cast<int>(logs.size());
  out.flagged = flagged;
  out.value = pairwise_sum(logs) / static_cast<double>(logs.size());
  std::vector<double> sq(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const double d = logs[i] - out.value;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / (static_cast<double>(logs.size()) - 1.0);
  out.std_error = std::sqrt(var / static_cast<double>(logs.size()));
  return out;
}

}  // namespace

KlEstimate kl_divergence_mc(const DensityEstimate& reference,
                            const std::function<Eigen::VectorXd(RngStream&)>& ref_sampler,
                            const DensityEstimate& approx, int n_mc, RngStream& rng) {
  if (n_mc < 2) throw std::invalid_argument("kl_divergence_mc: n_mc must be >= 2");
  const int dim = reference.dim;
  std::vector<double> logs;
  logs.reserve(n_mc);
  int flagged = 0;

  constexpr int kChunk = 8192;
  Eigen::MatrixXd pts(dim, kChunk);
  for (int done = 0; done < n_mc;) {
    const int m = std::min(kChunk, n_mc - done);
    for (int i = 0; i < m; ++i) pts.col(i) = ref_sampler(rng);
    const auto block = pts.leftCols(m);
    const Eigen::VectorXd ref = reference.eval(block);
    const Eigen::VectorXd app = approx.eval(block);
    for (int i = 0; i < m; ++i) {
      double r = ref[i], a = app[i];
      if (r < kDensityFloor || a < kDensityFloor) {
        ++flagged;
        r = std::max(r, kDensityFloor);
        a = std::max(a, kDensityFloor);
      }
      logs.push_back(std::log(r) - std::log(a));
    }
    done += m;
  }
  return kl_from_log_ratios(logs, flagged);
}

KlEstimate kl_divergence_quadrature(const DensityEstimate& reference,
                                    const DensityEstimate& approx, const GridDensity& xgrid) {
  Eigen::MatrixXd pts(xgrid.dim(), xgrid.size());
  for (std::size_t g = 0; g < xgrid.size(); ++g)
    pts.col(static_cast<Eigen::Index>(g)) = xgrid.points()[g];
  const Eigen::VectorXd ref = reference.eval(pts);
  const Eigen::VectorXd app = approx.eval(pts);

  KlEstimate out;
  out.n = static_cast<int>(xgrid.size());
  std::vector<double> terms(xgrid.size());
  for (std::size_t g = 0; g < xgrid.size(); ++g) {
    const auto i = static_cast<Eigen::Index>(g);
    double r = ref[i], a = app[i];
    if (r < kDensityFloor || a < kDensityFloor) {
      ++out.flagged;
      r = std::max(r, kDensityFloor);
      a = std::max(a, kDensityFloor);
    }
    terms[g] = r * (std::log(r) - std::log(a)) * xgrid.cell_weights()[i];
  }
  out.value = pairwise_sum(terms);
  return out;
}

std::string metric_json(const std::string& name, double value, double std_error,
                        int flagged_points) {
  return "{\"name\":\"" + name + "\",\"value\":" + fmt_double(value) +
         ",\"std_error\":" + fmt_double(std_error) +
         ",\"flagged_points\":" + std::to_string(flagged_points) + "}";
}

std::string metric_json(const std::string& name, const KlEstimate& kl) {
  return metric_json(name, kl.value, kl.std_error, kl.flagged);
}

Eigen::VectorXd conditional_mark_density(double s1, double s2, const Eigen::VectorXd& mark_grid,
                                         const ParticleSet& state, const KernelModel& kernel) {
  if (kernel.family() != KernelFamily::marked_pp_trivariate)
    throw std::invalid_argument("conditional_mark_density: marked-point kernel required");
  if (mark_grid.size() < 2 || (mark_grid.array() <= kMarkOffset).any())
    throw std::invalid_argument("conditional_mark_density: mark grid must exceed 2");
  for (Eigen::Index i = 1; i < mark_grid.size(); ++i)
    if (!(mark_grid[i] > mark_grid[i - 1]))
      throw std::invalid_argument("conditional_mark_density: mark grid must be increasing");

  const Eigen::ArrayXd z3 = (mark_grid.array() - kMarkOffset).log();
  const Eigen::ArrayXd inv_jac = 1.0 / (mark_grid.array() - kMarkOffset);

  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(mark_grid.size());
  double total_weight = 0.0;
  for (std::size_t t = 0; t < state.size(); ++t) {
    const MarkConditional mc = conditional_mark_component(s1, s2, state.particles()[t]);
    const double w = state.deltas()[static_cast<Eigen::Index>(t)] * mc.marginal_weight;
    if (!(w > 0.0)) continue;
    total_weight += w;
    const double inv_sd = 1.0 / std::sqrt(mc.cond_var);
    g += w * inv_sd / std::sqrt(2.0 * std::numbers::pi) *
         (-0.5 * ((z3 - mc.cond_mean) * inv_sd).square()).exp() * inv_jac;
  }
  if (!(total_weight > 0.0))
    throw std::runtime_error("conditional_mark_density: location outside the fitted support");

  std::vector<double> grid_v(mark_grid.data(), mark_grid.data() + mark_grid.size());
  std::vector<double> dens_v(g.data(), g.data() + g.size());
  const double z = trapezoid_integral(grid_v, dens_v);
  if (!(z > 0.0))
    throw std::runtime_error("conditional_mark_density: vanishing mass on the mark grid");
  return (g / z).matrix();
}

Eigen::VectorXd empirical_mark_density(const Dataset& data, double s1, double s2, double radius,
                                       double bandwidth, const Eigen::VectorXd& mark_grid) {
  if (!(radius > 0.0)) throw std::invalid_argument("empirical_mark_density: radius must be > 0");
  if (!(bandwidth > 0.0))
    throw std::invalid_argument("empirical_mark_density: bandwidth must be > 0");

  std::vector<double> marks;
  for (const auto& obs : data) {
    const MarkedPoint& p = obs.marked_point();
    const double dx = p.s1 - s1, dy = p.s2 - s2;
    if (dx * dx + dy * dy <= radius * radius) marks.push_back(p.mark);
  }
  if (marks.empty())
    throw std::runtime_error("empirical_mark_density: no observations within radius");

  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(mark_grid.size());
  for (const double m : marks)
    g += (-0.5 * ((mark_grid.array() - m) / bandwidth).square()).exp();
  g /= static_cast<double>(marks.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi);

  std::vector<double> grid_v(mark_grid.data(), mark_grid.data() + mark_grid.size());
  std::vector<double> dens_v(g.data(), g.data() + g.size());
  const double z = trapezoid_integral(grid_v, dens_v);
  if (!(z > 0.0)) throw std::runtime_error("empirical_mark_density: vanishing mass on the grid");
  return (g / z).matrix();
}

}  // namespace prmix
