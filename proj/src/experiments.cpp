#include "prmix/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "prmix/grid.hpp"
#include "prmix/io.hpp"
#include "prmix/kernels.hpp"
#include "prmix/metrics.hpp"
#include "prmix/numeric.hpp"
#include "prmix/pr_quadrature.hpp"
#include "prmix/prticle.hpp"
#include "prmix/refresh.hpp"
#include "prmix/samplers.hpp"

namespace prmix {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr double kExample1Sigma2 = 0.5;
constexpr int kKlMonteCarloDraws = 100000;

double median(std::vector<double> v) {
  if (v.empty()) throw std::logic_error("median of empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return (v.size() % 2 == 1) ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double weighted_quantile(const std::vector<double>& values, const std::vector<double>& weights,
                         double q) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  double cum = 0.0;
  for (std::size_t i : order) {
    cum += weights[i];
    if (cum >= q * total) return values[i];
  }
  return values[order.back()];
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw data_error("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os << content;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["T"] = c.T;
  j["T_list"] = c.T_list;
  j["n"] = c.n;
  j["gamma"] = c.gamma;
  j["seed"] = c.seed;
  j["n_reps"] = c.n_reps;
  j["n_perms"] = c.n_perms;
  j["refresh_df"] = c.refresh_df;
  j["refresh_inflate"] = c.refresh_inflate;
  j["refresh_rounds"] = c.refresh_rounds;
  j["out_dir"] = c.out_dir;
  j["data_path"] = c.data_path;
  j["variant"] = c.variant;
  return j;
}

void write_manifest(const ExperimentConfig& config, double wall_seconds) {
  json j;
  j["config"] = config_to_json(config);
  j["seed"] = config.seed;
  j["version"] = "prmix 0.1.0";
  j["wall_time_s"] = wall_seconds;
  write_text((fs::path(config.out_dir) / "manifest.json").string(), j.dump(2) + "\n");
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Per-experiment building blocks
// ---------------------------------------------------------------------------

MixingSampler example1_truth(int d) {
  return [d](RngStream& rng) {
    Eigen::VectorXd u(d);
    u[0] = sample_scaled_beta(10.0, 5.0, 0.0, 10.0, rng);
    if (d == 2) u[1] = sample_scaled_beta(5.0, 10.0, 0.0, 10.0, rng);
    return u;
  };
}

P0Sampler example1_p0(int d) {
  return uniform_box_sampler(std::vector<std::pair<double, double>>(d, {0.0, 10.0}));
}

GridDensity example1_grid(int d, int resolution_override = 0) {
  if (d == 1) {
    const int res = resolution_override > 0 ? resolution_override : 400;
    return make_grid({{0.0, 10.0}}, {res});
  }
  const int res = resolution_override > 0 ? resolution_override : 100;
  return make_grid({{0.0, 10.0}, {0.0, 10.0}}, {res, res});
}

// Bimodal stand-in for the sphere study's continuous location mixing: an
// equal-weight pair of angular Gaussians with concentration 0.25, plus a
// point mass at concentration 0.1 for the kernel parameter.
MixingSampler example2_truth() {
  const Eigen::Vector3d mode_a(0.0, 0.0, 1.0);
  const Eigen::Vector3d mode_b(std::sqrt(3.0) / 2.0, 0.0, -0.5);
  return [mode_a, mode_b](RngStream& rng) {
    const Eigen::Vector3d& mode = (rng.uniform() < 0.5) ? mode_a : mode_b;
    const Eigen::Matrix3d q = rotation_matrix(mode);
    const Eigen::Vector3d g(rng.normal(), rng.normal(), rng.normal() / 0.25);
    Eigen::Vector3d mu = q * g;
    mu.normalize();
    Eigen::VectorXd u(4);
    u << mu[0], mu[1], mu[2], 0.1;
    return u;
  };
}

P0Sampler example2_p0() {
  P0Sampler p0;
  p0.dim = 4;
  p0.draw = [](RngStream& rng) {
    const Eigen::Vector3d mu = sample_uniform_sphere(rng);
    Eigen::VectorXd u(4);
    u << mu[0], mu[1], mu[2], 0.5 * rng.uniform_open();
    return u;
  };
  p0.density = [](const Eigen::VectorXd& u) {
    if (u[3] <= 0.0 || u[3] > 0.5) return 0.0;
    return 1.0 / (4.0 * std::numbers::pi) / 0.5;
  };
  return p0;
}

MixingSampler example3_truth() {
  return [](RngStream& rng) {
    Eigen::VectorXd u(5);
    u[0] = 5.0 + 3.0 * rng.normal();
    u[1] = 10.0 + 3.0 * rng.normal();
    u[2] = rng.gamma(1.0, 1.0);
    u[3] = rng.gamma(5.0, 1.0);
    u[4] = rng.beta(10.0, 5.0);
    return u;
  };
}

P0Sampler example3_p0() {
  return uniform_box_sampler({{-5.0, 15.0}, {0.0, 20.0}, {0.0, 6.0}, {0.0, 15.0}, {0.0, 1.0}});
}

// Box proposal over the transformed mark-model parameters with
// positive-definiteness rejection.
P0Sampler marked_pp_p0(const KernelModel& kernel) {
  std::vector<std::pair<double, double>> bounds;
  for (int j = 0; j < 3; ++j) bounds.emplace_back(-4.0, 4.0);
  for (int j = 0; j < 3; ++j) bounds.emplace_back(std::log(0.05), std::log(8.0));
  if (!kernel.reduced())
    for (int j = 0; j < 3; ++j) bounds.emplace_back(-0.9, 0.9);
  const P0Sampler box = uniform_box_sampler(std::move(bounds));

  P0Sampler p0;
  p0.dim = kernel.mixing_dim();
  p0.draw = [box, kernel](RngStream& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Eigen::VectorXd u = box.draw(rng);
      if (kernel.valid_mixing_point(u)) return u;
    }
    throw std::runtime_error("marked p0: rejection budget exhausted");
  };
  return p0;
}

ParticleSet fit_particles(const Dataset& data, const P0Sampler& p0, std::size_t T,
                          const WeightSchedule& schedule, const KernelModel& kernel,
                          int n_perms, std::uint64_t seed) {
  RngStream rng(seed, /*stream_id=*/7);
  ParticleSet particles = init_particles(p0, T, rng);
  if (n_perms > 1)
    return permutation_average(data, particles, schedule, kernel, n_perms,
                               derive_seed(seed, 0x7065726dULL));
  return run_prticle(data, std::move(particles), schedule, kernel).state;
}

std::string location_tag(double s1, double s2) {
  std::ostringstream os;
  os << "s" << static_cast<int>(s1) << "_" << static_cast<int>(s2);
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config file " + path);
  ExperimentConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r\n");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      c.set_key(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    } catch (const config_error& e) {
      throw config_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

void ExperimentConfig::set_key(const std::string& key, const std::string& value) {
  const auto to_int = [&](const std::string& v) {
    try {
      return std::stoi(v);
    } catch (...) {
      throw config_error("invalid integer for " + key + ": " + v);
    }
  };
  const auto to_double = [&](const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      throw config_error("invalid number for " + key + ": " + v);
    }
  };

  if (key == "experiment") {
    experiment = value;
  } else if (key == "T") {
    T = to_int(value);
  } else if (key == "T_list") {
    T_list.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) T_list.push_back(to_int(item));
  } else if (key == "n") {
    n = to_int(value);
  } else if (key == "gamma") {
    gamma = to_double(value);
  } else if (key == "seed") {
    try {
      seed = std::stoull(value);
    } catch (...) {
      throw config_error("invalid seed: " + value);
    }
  } else if (key == "n_reps") {
    n_reps = to_int(value);
  } else if (key == "n_perms") {
    n_perms = to_int(value);
  } else if (key == "refresh_df") {
    refresh_df = to_double(value);
  } else if (key == "refresh_inflate") {
    refresh_inflate = to_double(value);
  } else if (key == "refresh_rounds") {
    refresh_rounds = to_int(value);
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "data_path") {
    data_path = value;
  } else if (key == "variant") {
    variant = value;
  } else {
    throw config_error("unknown config key: " + key);
  }
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> known = {"example1-d1",   "example1-d2",
                                                 "example2-sphere", "example3-5dim",
                                                 "convergence-study", "marked-pp"};
  if (std::find(known.begin(), known.end(), experiment) == known.end())
    throw config_error("unknown experiment: '" + experiment + "'");
  if (T < 0) throw config_error("T must be nonnegative");
  for (int t : T_list)
    if (t < 1) throw config_error("T_list entries must be >= 1");
  if (n < 0) throw config_error("n must be nonnegative");
  if (!(gamma > 0.5 && gamma <= 1.0)) throw config_error("gamma must lie in (0.5, 1]");
  if (n_reps < 1) throw config_error("n_reps must be >= 1");
  if (n_perms < 1) throw config_error("n_perms must be >= 1");
  if (!(refresh_df > 2.0)) throw config_error("refresh_df must exceed 2");
  if (!(refresh_inflate >= 1.0)) throw config_error("refresh_inflate must be >= 1");
  if (refresh_rounds < 0) throw config_error("refresh_rounds must be >= 0");
  if (variant != "full" && variant != "reduced" && variant != "both")
    throw config_error("variant must be full, reduced or both");
  if (out_dir.empty()) throw config_error("out_dir must not be empty");
}

std::string ExperimentConfig::to_json() const { return config_to_json(*this).dump(2); }

// ---------------------------------------------------------------------------
// Example 1: Euclidean mixtures, quadrature engine vs. filter approximation
// ---------------------------------------------------------------------------

Example1Result run_example1(const ExperimentConfig& config) {
  const WallClock clock;
  const int d = (config.experiment == "example1-d2") ? 2 : 1;
  const int n = config.n > 0 ? config.n : 500;
  std::vector<int> T_values = config.T_list;
  if (T_values.empty())
    T_values = (config.T > 0) ? std::vector<int>{config.T} : std::vector<int>{100, 300, 500, 1000};

  const WeightSchedule schedule(config.gamma);
  const KernelModel kernel = KernelModel::gaussian_iso(d, kExample1Sigma2);
  const MixingSampler truth = example1_truth(d);
  ensure_dir(config.out_dir);

  Example1Result result;
  result.d = d;
  result.T_values = T_values;

  std::ostringstream table, metrics;
  table << "T,rep,ess,ess_over_T,kl,kl_flagged\n";
  metrics << "[";
  bool first_metric = true;

  for (int rep = 0; rep < config.n_reps; ++rep) {
    RngStream data_rng(derive_seed(config.seed, 0xDA7A, static_cast<std::uint64_t>(rep)));
    const Dataset data = sample_mixture_data(truth, kernel, n, data_rng);

    const auto quad = run_pr_quadrature(data, example1_grid(d), schedule, kernel);
    const DensityEstimate m_n = quadrature_mixture_estimate(quad.density, kernel);

    if (rep == 0) {
      std::ostringstream os;
      quad.density.write_csv(os);
      write_text((fs::path(config.out_dir) / "mixing_density_quadrature.csv").string(), os.str());
    }

    for (std::size_t ti = 0; ti < T_values.size(); ++ti) {
      const int T = T_values[ti];
      const ParticleSet fitted =
          fit_particles(data, example1_p0(d), static_cast<std::size_t>(T), schedule, kernel,
                        config.n_perms, derive_seed(config.seed, 0xF17, rep * 1000 + ti));
      const DensityEstimate m_hat = particle_mixture_estimate(fitted, kernel);

      Example1Cell cell;
      cell.T = T;
      cell.rep = rep;
      cell.ess = ess(fitted);
      KlEstimate kl;
      if (d == 1) {
        const GridDensity xgrid = make_grid({{-3.0, 13.0}}, {2000});
        kl = kl_divergence_quadrature(m_n, m_hat, xgrid);
      } else {
        RngStream kl_rng(derive_seed(config.seed, 0xC1, rep * 1000 + ti));
        const auto ref_sampler = quadrature_mixture_sampler(quad.density, kernel);
        kl = kl_divergence_mc(m_n, ref_sampler, m_hat, kKlMonteCarloDraws, kl_rng);
      }
      cell.kl = kl.value;
      cell.kl_flagged = kl.flagged;
      metrics << (first_metric ? "" : ",") << "\n  "
              << metric_json("kl_T" + std::to_string(T) + "_rep" + std::to_string(rep), kl);
      first_metric = false;
      result.cells.push_back(cell);
      table << T << "," << rep << "," << fmt_double(cell.ess) << ","
            << fmt_double(cell.ess / T) << "," << fmt_double(cell.kl) << "," << cell.kl_flagged
            << "\n";
    }
  }

  json med = json::array();
  for (int T : T_values) {
    std::vector<double> e, k;
    for (const auto& c : result.cells)
      if (c.T == T) {
        e.push_back(c.ess);
        k.push_back(c.kl);
      }
    result.median_ess.push_back(median(e));
    result.median_kl.push_back(median(k));
    med.push_back({{"T", T},
                   {"median_ess", result.median_ess.back()},
                   {"median_ess_over_T", result.median_ess.back() / T},
                   {"median_kl", result.median_kl.back()}});
  }

  json res;
  res["experiment"] = config.experiment;
  res["d"] = d;
  res["n"] = n;
  res["kl_method"] = (d == 1) ? "quadrature-2000" : "monte-carlo-1e5";
  res["medians"] = med;
  res["seed"] = config.seed;
  metrics << "\n]\n";
  write_text((fs::path(config.out_dir) / "results.json").string(), res.dump(2) + "\n");
  write_text((fs::path(config.out_dir) / "results.csv").string(), table.str());
  write_text((fs::path(config.out_dir) / "metrics.json").string(), metrics.str());
  write_manifest(config, clock.seconds());
  return result;
}

// ---------------------------------------------------------------------------
// Example 2: directional mixtures on the unit sphere
// ---------------------------------------------------------------------------

Example2Result run_example2(const ExperimentConfig& config) {
  const WallClock clock;
  const int n = config.n > 0 ? config.n : 2000;
  const int T = config.T > 0 ? config.T : 1000;
  const WeightSchedule schedule(config.gamma);
  const KernelModel kernel = KernelModel::angular_gaussian_sphere();
  ensure_dir(config.out_dir);

  RngStream data_rng(derive_seed(config.seed, 0xDA7A, 0));
  const Dataset data = sample_mixture_data(example2_truth(), kernel, n, data_rng);

  ParticleSet fitted;
  try {
    fitted = fit_particles(data, example2_p0(), static_cast<std::size_t>(T), schedule, kernel,
                           config.n_perms, derive_seed(config.seed, 0xF17, 0));
  } catch (const degeneracy_error& e) {
    throw degeneracy_error(std::string(e.what()) +
                               " (consider rerunning with refresh via a larger T)",
                           e.step_index(), e.ess_value());
  }

  // Latitude-longitude mesh with trapezoid weights on both axes.
  const int n_theta = 61, n_phi = 121;
  const KernelEvalCache cache(kernel, fitted.particles());
  std::vector<double> kvals(fitted.size());
  Eigen::MatrixXd density(n_theta, n_phi);
  double integral = 0.0;
  std::ostringstream north, south;
  north << "theta,phi,x,y,z,density\n";
  south << "theta,phi,x,y,z,density\n";
  const double dt = std::numbers::pi / (n_theta - 1);
  const double dp = 2.0 * std::numbers::pi / (n_phi - 1);
  for (int it = 0; it < n_theta; ++it) {
    const double theta = it * dt;
    const double wt = (it == 0 || it == n_theta - 1) ? 0.5 * dt : dt;
    for (int ip = 0; ip < n_phi; ++ip) {
      const double phi = ip * dp;
      const double wp = (ip == 0 || ip == n_phi - 1) ? 0.5 * dp : dp;
      Eigen::Vector3d x(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                        std::cos(theta));
      x.normalize();
      const Observation obs = Observation::sphere(x);
      cache.eval_all(obs, kvals);
      double dens = 0.0;
      for (std::size_t t = 0; t < fitted.size(); ++t)
        dens += kvals[t] * fitted.deltas()[static_cast<Eigen::Index>(t)];
      dens /= static_cast<double>(fitted.size());
      density(it, ip) = dens;
      integral += dens * std::sin(theta) * wt * wp;

      std::ostringstream row;
      row << fmt_double(theta) << "," << fmt_double(phi) << "," << fmt_double(x[0]) << ","
          << fmt_double(x[1]) << "," << fmt_double(x[2]) << "," << fmt_double(dens) << "\n";
      if (x[2] >= 0.0) north << row.str();
      if (x[2] <= 0.0) south << row.str();
    }
  }

  write_text((fs::path(config.out_dir) / "sphere_density_north.csv").string(), north.str());
  write_text((fs::path(config.out_dir) / "sphere_density_south.csv").string(), south.str());
  {
    std::ostringstream os;
    fitted.write_csv(os);
    write_text((fs::path(config.out_dir) / "particles.csv").string(), os.str());
  }

  Example2Result result;
  result.T = T;
  result.ess = ess(fitted);
  result.mesh_integral = integral;

  json res;
  res["experiment"] = config.experiment;
  res["n"] = n;
  res["T"] = T;
  res["ess"] = result.ess;
  res["ess_over_T"] = result.ess / T;
  res["mesh_integral"] = integral;
  res["seed"] = config.seed;
  write_text((fs::path(config.out_dir) / "results.json").string(), res.dump(2) + "\n");
  write_manifest(config, clock.seconds());
  return result;
}

// ---------------------------------------------------------------------------
// Example 3: five-dimensional mixing support with attrition refresh
// ---------------------------------------------------------------------------

Example3Result run_example3(const ExperimentConfig& config) {
  const WallClock clock;
  const int n = config.n > 0 ? config.n : 500;
  const int T = config.T > 0 ? config.T : 5000;
  const WeightSchedule schedule(config.gamma);
  const KernelModel kernel = KernelModel::gaussian_bivariate_full();
  const MixingSampler truth = example3_truth();
  ensure_dir(config.out_dir);

  Example3Result result;
  for (double q = 0.1; q < 0.95; q += 0.1) result.quantile_levels.push_back(q);

  // Monte Carlo surrogate for the unavailable closed-form mixture density:
  // a fixed, finely sampled component cloud from the true mixing distribution.
  const int M = 5000;
  RngStream truth_rng(derive_seed(config.seed, 0x7271, 0));
  std::vector<Eigen::VectorXd> ref_components;
  ref_components.reserve(M);
  for (int j = 0; j < M; ++j) ref_components.push_back(truth(truth_rng));
  const ParticleSet ref_cloud(ref_components);
  const DensityEstimate m_true = particle_mixture_estimate(ref_cloud, kernel);

  // True mixing quantiles from a large dedicated sample.
  {
    const int big = 1000000;
    RngStream q_rng(derive_seed(config.seed, 0x7172, 0));
    std::vector<std::vector<double>> draws(5, std::vector<double>(big));
    for (int i = 0; i < big; ++i) {
      const Eigen::VectorXd u = truth(q_rng);
      for (int j = 0; j < 5; ++j) draws[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = u[j];
    }
    result.true_quantiles.resize(5, static_cast<Eigen::Index>(result.quantile_levels.size()));
    for (int j = 0; j < 5; ++j) {
      auto& col = draws[static_cast<std::size_t>(j)];
      std::sort(col.begin(), col.end());
      for (std::size_t l = 0; l < result.quantile_levels.size(); ++l) {
        const auto idx = static_cast<std::size_t>(result.quantile_levels[l] * (big - 1));
        result.true_quantiles(j, static_cast<Eigen::Index>(l)) = col[idx];
      }
    }
  }

  std::ostringstream table, metrics;
  table << "rep,ess_pass1,ess_pass2,kl,kl_flagged\n";
  metrics << "[";

  for (int rep = 0; rep < config.n_reps; ++rep) {
    RngStream data_rng(derive_seed(config.seed, 0xDA7A, static_cast<std::uint64_t>(rep)));
    const Dataset data = sample_mixture_data(truth, kernel, n, data_rng);

    const RefreshRunResult fit = run_with_refresh(
        data, example3_p0(), static_cast<std::size_t>(T), schedule, kernel, config.refresh_df,
        config.refresh_inflate, derive_seed(config.seed, 0xE3, static_cast<std::uint64_t>(rep)),
        config.refresh_rounds);

    const DensityEstimate m_hat = particle_mixture_estimate(fit.state, kernel);
    RngStream kl_rng(derive_seed(config.seed, 0xC1, static_cast<std::uint64_t>(rep)));
    const KernelModel kernel_copy = kernel;
    const ParticleSet ref_copy = ref_cloud;
    const auto ref_sampler = [&kernel_copy, &ref_copy](RngStream& rng) {
      const auto j = static_cast<std::size_t>(rng.uniform() * ref_copy.size());
      return kernel_copy.simulate(ref_copy.particles()[std::min(j, ref_copy.size() - 1)], rng)
          .coords();
    };
    const KlEstimate kl = kl_divergence_mc(m_true, ref_sampler, m_hat, kKlMonteCarloDraws, kl_rng);
    metrics << (rep ? "," : "") << "\n  "
            << metric_json("kl_truth_vs_fit_rep" + std::to_string(rep), kl);

    Example3Rep r;
    r.rep = rep;
    r.ess_pass1 = fit.diagnostics.ess_pass1;
    r.ess_pass2 = fit.diagnostics.ess_pass2;
    r.kl = kl.value;
    r.kl_flagged = kl.flagged;

    // Weighted marginal quantiles of the fitted cloud.
    r.fitted_quantiles.resize(5, static_cast<Eigen::Index>(result.quantile_levels.size()));
    std::vector<double> weights(fit.state.size());
    for (std::size_t t = 0; t < fit.state.size(); ++t)
      weights[t] = fit.state.deltas()[static_cast<Eigen::Index>(t)];
    for (int j = 0; j < 5; ++j) {
      std::vector<double> coord(fit.state.size());
      for (std::size_t t = 0; t < fit.state.size(); ++t) coord[t] = fit.state.particles()[t][j];
      for (std::size_t l = 0; l < result.quantile_levels.size(); ++l)
        r.fitted_quantiles(j, static_cast<Eigen::Index>(l)) =
            weighted_quantile(coord, weights, result.quantile_levels[l]);
    }

    if (rep == 0) {
      write_text((fs::path(config.out_dir) / "refresh_diagnostics.json").string(),
                 fit.diagnostics.to_json() + "\n");
      // Fitted and surrogate-true mixture densities on a fixed contour grid.
      const GridDensity xgrid = make_grid({{-7.0, 17.0}, {-2.0, 22.0}}, {81, 81});
      Eigen::MatrixXd pts(2, xgrid.size());
      for (std::size_t g = 0; g < xgrid.size(); ++g)
        pts.col(static_cast<Eigen::Index>(g)) = xgrid.points()[g];
      const Eigen::VectorXd fit_vals = m_hat.eval(pts);
      const Eigen::VectorXd true_vals = m_true.eval(pts);
      std::ostringstream cf, ct;
      cf << "x1,x2,density\n";
      ct << "x1,x2,density\n";
      for (std::size_t g = 0; g < xgrid.size(); ++g) {
        const auto i = static_cast<Eigen::Index>(g);
        cf << fmt_double(pts(0, i)) << "," << fmt_double(pts(1, i)) << ","
           << fmt_double(fit_vals[i]) << "\n";
        ct << fmt_double(pts(0, i)) << "," << fmt_double(pts(1, i)) << ","
           << fmt_double(true_vals[i]) << "\n";
      }
      write_text((fs::path(config.out_dir) / "contour_fitted.csv").string(), cf.str());
      write_text((fs::path(config.out_dir) / "contour_truth.csv").string(), ct.str());

      std::ostringstream qq;
      qq << "coordinate,level,true_quantile,fitted_quantile\n";
      const char* names[5] = {"mu1", "mu2", "sigma1sq", "sigma2sq", "rho"};
      for (int j = 0; j < 5; ++j)
        for (std::size_t l = 0; l < result.quantile_levels.size(); ++l)
          qq << names[j] << "," << fmt_double(result.quantile_levels[l]) << ","
             << fmt_double(result.true_quantiles(j, static_cast<Eigen::Index>(l))) << ","
             << fmt_double(r.fitted_quantiles(j, static_cast<Eigen::Index>(l))) << "\n";
      write_text((fs::path(config.out_dir) / "mixing_quantiles.csv").string(), qq.str());
    }

    result.reps.push_back(std::move(r));
    table << rep << "," << fmt_double(result.reps.back().ess_pass1) << ","
          << fmt_double(result.reps.back().ess_pass2) << "," << fmt_double(result.reps.back().kl)
          << "," << result.reps.back().kl_flagged << "\n";
  }

  std::vector<double> e1, e2, kls;
  for (const auto& r : result.reps) {
    e1.push_back(r.ess_pass1);
    e2.push_back(r.ess_pass2);
    kls.push_back(r.kl);
  }
  result.median_ess_pass1 = median(e1);
  result.median_ess_pass2 = median(e2);
  result.median_kl = median(kls);

  json res;
  res["experiment"] = config.experiment;
  res["n"] = n;
  res["T"] = T;
  res["median_ess_pass1"] = result.median_ess_pass1;
  res["median_ess_pass2"] = result.median_ess_pass2;
  res["median_kl"] = result.median_kl;
  res["kl_method"] = "monte-carlo-1e5-against-5000-component-surrogate";
  res["seed"] = config.seed;
  metrics << "\n]\n";
  write_text((fs::path(config.out_dir) / "results.json").string(), res.dump(2) + "\n");
  write_text((fs::path(config.out_dir) / "results.csv").string(), table.str());
  write_text((fs::path(config.out_dir) / "metrics.json").string(), metrics.str());
  write_manifest(config, clock.seconds());
  return result;
}

// ---------------------------------------------------------------------------
// Convergence study: filter estimate against the exact recursion
// ---------------------------------------------------------------------------

ConvergenceResult run_convergence_study(const ExperimentConfig& config) {
  const WallClock clock;
  const int n = config.n > 0 ? config.n : 100;
  const WeightSchedule schedule(config.gamma);
  const KernelModel kernel = KernelModel::gaussian_iso(1, kExample1Sigma2);
  ensure_dir(config.out_dir);

  ConvergenceResult result;
  result.T_values = config.T_list.empty() ? std::vector<int>{100, 300, 1000, 3000, 10000}
                                          : config.T_list;

  RngStream data_rng(derive_seed(config.seed, 0xDA7A, 0));
  const Dataset data = sample_mixture_data(example1_truth(1), kernel, n, data_rng);

  // Exact recursion on the same grid the distances are evaluated on.
  const GridDensity grid = example1_grid(1, 2000);
  const auto quad = run_pr_quadrature(data, grid, schedule, kernel);
  const DensityEstimate p_n = grid_estimate(quad.density);

  std::ostringstream table;
  table << "T,rep,l1\n";
  for (int T : result.T_values) {
    std::vector<double> l1s;
    for (int rep = 0; rep < config.n_reps; ++rep) {
      RngStream part_rng(derive_seed(config.seed, 0xF17, static_cast<std::uint64_t>(T) * 100 + rep));
      ParticleSet particles = init_particles(example1_p0(1), static_cast<std::size_t>(T), part_rng);
      const ParticleSet fitted = run_prticle(data, std::move(particles), schedule, kernel).state;
      const DensityEstimate kde = weighted_kde_estimate(fitted, silverman_bandwidth(fitted));
      const double l1 = l1_distance(p_n, kde, quad.density);
      l1s.push_back(l1);
      table << T << "," << rep << "," << fmt_double(l1) << "\n";
    }
    result.l1.push_back(l1s);
    result.median_l1.push_back(median(l1s));
  }

  json res;
  res["experiment"] = config.experiment;
  res["n"] = n;
  res["T_values"] = result.T_values;
  res["median_l1"] = result.median_l1;
  res["seed"] = config.seed;
  write_text((fs::path(config.out_dir) / "results.json").string(), res.dump(2) + "\n");
  write_text((fs::path(config.out_dir) / "results.csv").string(), table.str());
  write_manifest(config, clock.seconds());
  return result;
}

// ---------------------------------------------------------------------------
// Marked point process analysis
// ---------------------------------------------------------------------------

LongleafIngest ingest_longleaf(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw data_error("cannot open data file " + path);

  std::string line;
  if (!std::getline(is, line)) throw data_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      const auto b = col.find_first_not_of(" \t");
      const auto e = col.find_last_not_of(" \t");
      header.push_back(b == std::string::npos ? "" : col.substr(b, e - b + 1));
    }
  }
  int ix = -1, iy = -1, id = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "x") ix = static_cast<int>(j);
    if (header[j] == "y") iy = static_cast<int>(j);
    if (header[j] == "diameter") id = static_cast<int>(j);
  }
  if (ix < 0 || iy < 0 || id < 0)
    throw data_error(path + ": header must contain columns x, y, diameter");

  LongleafIngest out;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++out.total_rows;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (static_cast<int>(fields.size()) <= std::max({ix, iy, id}))
      throw data_error(path + ":" + std::to_string(line_no) + ": too few columns");

    double x, y, diam;
    try {
      std::size_t pos;
      x = std::stod(fields[static_cast<std::size_t>(ix)], &pos);
      y = std::stod(fields[static_cast<std::size_t>(iy)], &pos);
      diam = std::stod(fields[static_cast<std::size_t>(id)], &pos);
    } catch (...) {
      throw data_error(path + ":" + std::to_string(line_no) + ": unparseable row");
    }

    if (!(diam > kMarkOffset)) {
      ++out.rejected_mark;
      continue;
    }
    if (!(x > 0.0 && x < kMarkedExtent && y > 0.0 && y < kMarkedExtent)) {
      ++out.rejected_domain;
      continue;
    }
    out.data.push_back(Observation::marked(MarkedPoint{x, y, diam}));
  }
  return out;
}

MarkedPpResult run_marked_pp(const ExperimentConfig& config) {
  const WallClock clock;
  const int T = config.T > 0 ? config.T : 20000;
  const WeightSchedule schedule(config.gamma);
  ensure_dir(config.out_dir);

  const std::string path = config.data_path.empty() ? "data/longleaf.csv" : config.data_path;
  LongleafIngest ingest = ingest_longleaf(path);
  if (ingest.data.empty()) throw data_error(path + ": no usable observations");

  MarkedPpResult result;
  result.n_observations = static_cast<int>(ingest.data.size());
  result.rejected_mark = ingest.rejected_mark;
  result.rejected_domain = ingest.rejected_domain;

  // Mark grid over (2, 80], 400 nodes.
  const int n_grid = 400;
  result.mark_grid.resize(n_grid);
  for (int k = 0; k < n_grid; ++k)
    result.mark_grid[k] = kMarkOffset + (80.0 - kMarkOffset) * (k + 1) / n_grid;

  const std::vector<std::pair<double, double>> locations = {
      {81.0, 120.0}, {100.0, 100.0}, {105.0, 140.0}, {185.0, 87.0}};

  // Empirical overlays: neighborhood KDE with a rule-of-thumb bandwidth.
  for (const auto& [s1, s2] : locations) {
    std::vector<double> marks;
    for (const auto& obs : ingest.data) {
      const auto& p = obs.marked_point();
      const double dx = p.s1 - s1, dy = p.s2 - s2;
      if (dx * dx + dy * dy <= 30.0 * 30.0) marks.push_back(p.mark);
    }
    if (marks.empty()) throw data_error("no observations within radius 30 of a query location");
    double mean = 0.0;
    for (double m : marks) mean += m;
    mean /= static_cast<double>(marks.size());
    double var = 0.0;
    for (double m : marks) var += (m - mean) * (m - mean);
    var /= std::max<std::size_t>(1, marks.size() - 1);
    const double h =
        std::max(0.5, 1.06 * std::sqrt(var) * std::pow(static_cast<double>(marks.size()), -0.2));
    const Eigen::VectorXd emp =
        empirical_mark_density(ingest.data, s1, s2, 30.0, h, result.mark_grid);
    result.empirical.push_back(emp);

    std::ostringstream os;
    os << "mark,density\n";
    for (int k = 0; k < n_grid; ++k)
      os << fmt_double(result.mark_grid[k]) << "," << fmt_double(emp[k]) << "\n";
    write_text(
        (fs::path(config.out_dir) / ("empirical_" + location_tag(s1, s2) + ".csv")).string(),
        os.str());
  }

  std::vector<std::string> variants;
  if (config.variant == "both") {
    variants = {"full", "reduced"};
  } else {
    variants = {config.variant};
  }

  json res;
  res["experiment"] = config.experiment;
  res["data_path"] = path;
  res["n_observations"] = result.n_observations;
  res["rejected_mark"] = result.rejected_mark;
  res["rejected_domain"] = result.rejected_domain;
  res["lambda_hat"] = result.n_observations;  // Poisson-process plug-in for the total intensity
  res["T"] = T;
  res["seed"] = config.seed;

  json var_json = json::array();
  for (const std::string& variant : variants) {
    const KernelModel kernel = KernelModel::marked_pp(variant == "reduced");
    const RefreshRunResult fit = run_with_refresh(
        ingest.data, marked_pp_p0(kernel), static_cast<std::size_t>(T), schedule, kernel,
        config.refresh_df, config.refresh_inflate,
        derive_seed(config.seed, 0x3a43, variant == "reduced" ? 1 : 0), config.refresh_rounds);

    MarkedPpVariant v;
    v.variant = variant;
    v.ess_pass1 = fit.diagnostics.ess_pass1;
    v.ess_pass2 = fit.diagnostics.ess_pass2;

    json loc_json = json::array();
    for (const auto& [s1, s2] : locations) {
      MarkedPpLocation loc;
      loc.s1 = s1;
      loc.s2 = s2;
      loc.conditional =
          conditional_mark_density(s1, s2, result.mark_grid, fit.state, kernel);

      std::vector<double> mg, gv;
      for (int k = 0; k < n_grid; ++k) {
        if (result.mark_grid[k] >= 30.0) {
          mg.push_back(result.mark_grid[k]);
          gv.push_back(loc.conditional[k]);
        }
      }
      loc.mass_above_30 = trapezoid_integral(mg, gv);
      for (int k = 0; k + 1 < n_grid; ++k)
        loc.total_variation += std::abs(loc.conditional[k + 1] - loc.conditional[k]);

      std::ostringstream os;
      os << "mark,density\n";
      for (int k = 0; k < n_grid; ++k)
        os << fmt_double(result.mark_grid[k]) << "," << fmt_double(loc.conditional[k]) << "\n";
      write_text((fs::path(config.out_dir) /
                  ("conditional_" + location_tag(s1, s2) + "_" + variant + ".csv"))
                     .string(),
                 os.str());

      loc_json.push_back({{"s1", s1},
                          {"s2", s2},
                          {"mass_above_30", loc.mass_above_30},
                          {"total_variation", loc.total_variation}});
      v.locations.push_back(std::move(loc));
    }

    var_json.push_back({{"variant", variant},
                        {"ess_pass1", v.ess_pass1},
                        {"ess_pass2", v.ess_pass2},
                        {"locations", loc_json}});
    result.variants.push_back(std::move(v));
  }

  res["variants"] = var_json;
  write_text((fs::path(config.out_dir) / "results.json").string(), res.dump(2) + "\n");
  write_manifest(config, clock.seconds());
  return result;
}

int run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.experiment == "example1-d1" || config.experiment == "example1-d2") {
    run_example1(config);
  } else if (config.experiment == "example2-sphere") {
    run_example2(config);
  } else if (config.experiment == "example3-5dim") {
    run_example3(config);
  } else if (config.experiment == "convergence-study") {
    run_convergence_study(config);
  } else if (config.experiment == "marked-pp") {
    run_marked_pp(config);
  } else {
    throw config_error("unknown experiment: " + config.experiment);
  }
  return 0;
}

}  // namespace prmix
