#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "prmix/experiments.hpp"

using namespace prmix;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config files parse with comments and overrides") {
  const TempDir dir("prmix_cfg_test");
  write_file(dir.file("a.cfg"),
             "# comment line\n"
             "experiment = example1-d1\n"
             "T_list = 100, 300\n"
             "n = 50   # trailing comment\n"
             "seed = 99\n"
             "gamma = 0.8\n");
  ExperimentConfig c = ExperimentConfig::from_file(dir.file("a.cfg"));
  CHECK(c.experiment == "example1-d1");
  REQUIRE(c.T_list.size() == 2);
  CHECK(c.T_list[1] == 300);
  CHECK(c.n == 50);
  CHECK(c.seed == 99);
  CHECK(c.gamma == doctest::Approx(0.8));
  CHECK_NOTHROW(c.validate());

  c.set_key("variant", "reduced");
  CHECK(c.variant == "reduced");
}

TEST_CASE("config validation rejects bad values") {
  ExperimentConfig c;
  c.experiment = "example1-d1";
  CHECK_NOTHROW(c.validate());

  c.experiment = "nope";
  CHECK_THROWS_AS(c.validate(), config_error);
  c.experiment = "example1-d1";
  c.gamma = 0.4;
  CHECK_THROWS_AS(c.validate(), config_error);
  c.gamma = 1.0;
  c.refresh_df = 2.0;
  CHECK_THROWS_AS(c.validate(), config_error);
  c.refresh_df = 5.0;
  c.variant = "bogus";
  CHECK_THROWS_AS(c.validate(), config_error);

  CHECK_THROWS_AS(ExperimentConfig().set_key("unknown_key", "1"), config_error);
  CHECK_THROWS_AS(ExperimentConfig().set_key("T", "abc"), config_error);
  CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/x.cfg"), config_error);
}

TEST_CASE("longleaf ingestion filters and counts rejects") {
  const TempDir dir("prmix_ingest_test");
  write_file(dir.file("trees.csv"),
             "x,y,diameter\n"
             "100.0,100.0,30.5\n"
             "50.0,60.0,2.0\n"      // boundary mark: rejected
             "200.0,60.0,10.0\n"    // x on the boundary: rejected
             "199.9,60.0,10.0\n"
             "0.0,60.0,10.0\n"      // x on the boundary: rejected
             "12.5,199.95,4.2\n");
  const LongleafIngest out = ingest_longleaf(dir.file("trees.csv"));
  CHECK(out.total_rows == 6);
  CHECK(out.data.size() == 3);
  CHECK(out.rejected_mark == 1);
  CHECK(out.rejected_domain == 2);
}

TEST_CASE("longleaf ingestion fails loudly on malformed input") {
  const TempDir dir("prmix_ingest_err");
  write_file(dir.file("missing.csv"), "x,y\n1,2\n");
  CHECK_THROWS_AS(ingest_longleaf(dir.file("missing.csv")), data_error);

  write_file(dir.file("badrow.csv"), "x,y,diameter\n1.0,2.0,3.0\n1.0,abc,3.0\n");
  try {
    ingest_longleaf(dir.file("badrow.csv"));
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);  // 1-based line number
  }

  CHECK_THROWS_AS(ingest_longleaf(dir.file("nonexistent.csv")), data_error);
}

TEST_CASE("longleaf ingestion accepts reordered columns") {
  const TempDir dir("prmix_ingest_cols");
  write_file(dir.file("cols.csv"), "diameter,x,y\n12.0,30.0,40.0\n");
  const LongleafIngest out = ingest_longleaf(dir.file("cols.csv"));
  REQUIRE(out.data.size() == 1);
  CHECK(out.data[0].marked_point().s1 == doctest::Approx(30.0));
  CHECK(out.data[0].marked_point().mark == doctest::Approx(12.0));
}

TEST_CASE("the bundled stand-in dataset ingests with 584 rows") {
  if (!fs::exists("data/longleaf.csv")) return;  // repository layout only
  const LongleafIngest out = ingest_longleaf("data/longleaf.csv");
  CHECK(out.data.size() == 584);
  CHECK(out.rejected_mark == 0);
  CHECK(out.rejected_domain == 0);
}

TEST_CASE("a desk-size run of the euclidean study completes and reruns byte-identically") {
  const TempDir dir1("prmix_e1_a"), dir2("prmix_e1_b");
  ExperimentConfig c;
  c.experiment = "example1-d1";
  c.n = 80;
  c.T_list = {50};
  c.n_reps = 2;
  c.seed = 4242;
  c.out_dir = dir1.path.string();
  const Example1Result r1 = run_example1(c);
  REQUIRE(r1.cells.size() == 2);
  for (const auto& cell : r1.cells) {
    CHECK(cell.ess >= 1.0);
    CHECK(cell.ess <= 50.0);
    CHECK(cell.kl < 1.0);
  }
  CHECK(fs::exists(dir1.path / "manifest.json"));
  CHECK(fs::exists(dir1.path / "results.json"));
  const std::string metrics = read_file(dir1.file("metrics.json"));
  CHECK(metrics.find("\"std_error\"") != std::string::npos);
  CHECK(metrics.find("\"flagged_points\"") != std::string::npos);

  c.out_dir = dir2.path.string();
  run_example1(c);
  CHECK(read_file(dir1.file("results.csv")) == read_file(dir2.file("results.csv")));
  CHECK(read_file(dir1.file("mixing_density_quadrature.csv")) ==
        read_file(dir2.file("mixing_density_quadrature.csv")));
}

TEST_CASE("a single-particle smoke run completes with ESS one") {
  const TempDir dir("prmix_e1_t1");
  ExperimentConfig c;
  c.experiment = "example1-d1";
  c.n = 40;
  c.T_list = {1};
  c.n_reps = 1;
  c.out_dir = dir.path.string();
  const Example1Result r = run_example1(c);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cells[0].ess == doctest::Approx(1.0));
}

TEST_CASE("a desk-size sphere run emits normalized hemisphere meshes") {
  const TempDir dir("prmix_e2");
  ExperimentConfig c;
  c.experiment = "example2-sphere";
  c.n = 150;
  c.T = 120;
  c.seed = 7;
  c.out_dir = dir.path.string();
  const Example2Result r = run_example2(c);
  CHECK(r.ess > 1.0);
  CHECK(r.mesh_integral == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(fs::exists(dir.path / "sphere_density_north.csv"));
  CHECK(fs::exists(dir.path / "sphere_density_south.csv"));

  const std::string north = read_file(dir.file("sphere_density_north.csv"));
  CHECK(north.find("theta,phi,x,y,z,density") == 0);
}

TEST_CASE("a desk-size run of the 5-dim study completes with sane diagnostics") {
  const TempDir dir("prmix_e3_smoke");
  ExperimentConfig c;
  c.experiment = "example3-5dim";
  c.n = 120;
  c.T = 600;
  c.n_reps = 1;
  c.seed = 31;
  c.out_dir = dir.path.string();
  const Example3Result r = run_example3(c);
  REQUIRE(r.reps.size() == 1);
  CHECK(r.reps[0].ess_pass1 > 3.0);
  CHECK(r.reps[0].ess_pass2 > 3.0);
  CHECK(std::isfinite(r.reps[0].kl));
  CHECK(r.quantile_levels.size() == 9);
  CHECK(fs::exists(dir.path / "contour_fitted.csv"));
  CHECK(fs::exists(dir.path / "contour_truth.csv"));
  CHECK(fs::exists(dir.path / "mixing_quantiles.csv"));
  CHECK(fs::exists(dir.path / "refresh_diagnostics.json"));
}

TEST_CASE("experiment dispatch rejects unknown names") {
  ExperimentConfig c;
  c.experiment = "mystery";
  CHECK_THROWS_AS(run_experiment(c), config_error);
}
