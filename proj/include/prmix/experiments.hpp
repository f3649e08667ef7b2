#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "prmix/observation.hpp"

namespace prmix {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key=value configuration mirrored by every experiment; CLI flags
// override file values. Unset numeric fields fall back to per-experiment
// defaults at run time.
struct ExperimentConfig {
  std::string experiment;  // example1-d1 | example1-d2 | example2-sphere |
                           // example3-5dim | convergence-study | marked-pp
  int T = 0;                     // 0 = experiment default
  std::vector<int> T_list;       // empty = experiment default ladder
  int n = 0;                     // data size; 0 = experiment default
  double gamma = 1.0;
  std::uint64_t seed = 20240901;
  int n_reps = 5;                // replicate seeds per cell
  int n_perms = 1;               // permutation averaging (1 = off)
  double refresh_df = 5.0;
  double refresh_inflate = 1.5;
  int refresh_rounds = 1;
  std::string out_dir = "out";
  std::string data_path;         // marked-pp only
  std::string variant = "both";  // marked-pp: full | reduced | both

  static ExperimentConfig from_file(const std::string& path);
  void set_key(const std::string& key, const std::string& value);
  void validate() const;
  std::string to_json() const;
};

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

struct Example1Cell {
  int T = 0;
  int rep = 0;
  double ess = 0.0;
  double kl = 0.0;
  int kl_flagged = 0;
};

struct Example1Result {
  int d = 1;
  std::vector<int> T_values;
  std::vector<Example1Cell> cells;
  std::vector<double> median_ess;  // aligned with T_values
  std::vector<double> median_kl;
};

struct Example2Result {
  int T = 0;
  double ess = 0.0;
  double mesh_integral = 0.0;
};

struct Example3Rep {
  int rep = 0;
  double ess_pass1 = 0.0;
  double ess_pass2 = 0.0;
  double kl = 0.0;
  int kl_flagged = 0;
  Eigen::MatrixXd fitted_quantiles;  // coordinate x level
};

struct Example3Result {
  std::vector<Example3Rep> reps;
  double median_ess_pass1 = 0.0;
  double median_ess_pass2 = 0.0;
  double median_kl = 0.0;
  std::vector<double> quantile_levels;
  Eigen::MatrixXd true_quantiles;  // coordinate x level
};

struct ConvergenceResult {
  std::vector<int> T_values;
  std::vector<std::vector<double>> l1;  // per T, one value per particle seed
  std::vector<double> median_l1;
};

struct MarkedPpLocation {
  double s1 = 0.0;
  double s2 = 0.0;
  Eigen::VectorXd conditional;  // normalized on the mark grid
  double mass_above_30 = 0.0;
  double total_variation = 0.0;
};

struct MarkedPpVariant {
  std::string variant;
  double ess_pass1 = 0.0;
  double ess_pass2 = 0.0;
  std::vector<MarkedPpLocation> locations;
};

struct MarkedPpResult {
  int n_observations = 0;
  int rejected_mark = 0;
  int rejected_domain = 0;
  Eigen::VectorXd mark_grid;
  std::vector<MarkedPpVariant> variants;
  std::vector<Eigen::VectorXd> empirical;  // per location, same grid
};

// ---------------------------------------------------------------------------
// Runners; each writes manifest.json, results.json and its CSV tables under
// config.out_dir and returns the result structure.
// ---------------------------------------------------------------------------

Example1Result run_example1(const ExperimentConfig& config);
Example2Result run_example2(const ExperimentConfig& config);
Example3Result run_example3(const ExperimentConfig& config);
ConvergenceResult run_convergence_study(const ExperimentConfig& config);
MarkedPpResult run_marked_pp(const ExperimentConfig& config);

// Dispatch on config.experiment; returns the CLI exit code.
int run_experiment(const ExperimentConfig& config);

struct LongleafIngest {
  Dataset data;
  int rejected_mark = 0;
  int rejected_domain = 0;
  int total_rows = 0;
};

// CSV with header columns x, y, diameter. Rows with diameter <= 2 or with a
// location outside the open (0,200)^2 window are counted and dropped;
// malformed rows fail with their line number.
LongleafIngest ingest_longleaf(const std::string& path);

}  // namespace prmix
