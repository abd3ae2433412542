#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "svda/cli.hpp"
#include "svda/errors.hpp"

namespace svda::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("svda_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "svda");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.nx = c.ny = 8;
  c.K = 20;
  c.k_off = 8;
  c.side_count = 4;
  c.N = 2;
  c.ml.hidden_size = 4;
  c.ml.dense_widths = {4};
  c.ml.epochs = 20;
  c.ml.output = ml::OutputMode::Increment;
  return c;
}

fs::path write_config(const fs::path& dir, const ExperimentConfig& c) {
  const fs::path p = dir / "in.json";
  std::ofstream(p) << serialize_config(c);
  return p;
}

std::string config_error(std::string_view text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    return e.what();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return {};
}

TEST(Presets, FilesMatchBuiltIns) {
  for (const auto& name : preset_names()) {
    const fs::path file = fs::path(SVDA_SOURCE_DIR) / "presets" / (name + ".json");
    ASSERT_TRUE(fs::exists(file)) << file;
    EXPECT_TRUE(load_config(file) == preset(name)) << name;
    EXPECT_EQ(slurp(file), serialize_config(preset(name))) << name;
  }
  EXPECT_THROW(preset("nope"), Error);
}

TEST(Presets, DeskCaseSettings) {
  const ExperimentConfig a = preset("desk");
  EXPECT_EQ(a.nx, 32);
  EXPECT_EQ(a.sensors(), 121);
  EXPECT_EQ(a.N, 4);
  EXPECT_EQ(a.K, 200);
  EXPECT_EQ(a.k_off, 50);
  EXPECT_EQ(a.ml.lookback, 1);
  EXPECT_EQ(a.mode, Mode::Future);
  const ExperimentConfig b = preset("desk-b");
  EXPECT_EQ(b.mode, Mode::Parametric);
  EXPECT_EQ(b.mu_true, 15.0);
  EXPECT_EQ(b.mu_test, 17.0);
  EXPECT_EQ(preset("paper-a").nx, 80);
}

TEST(Config, SerializeRoundTrip) {
  ExperimentConfig c = tiny();
  c.mode = Mode::Parametric;
  c.radiation.epsilon = 0.123456789012345;
  c.ml.seed = 18446744073709551615ULL;
  c.ml.dense_widths = {3, 5, 7};
  const ExperimentConfig back = parse_config(serialize_config(c));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, MissingSectionsKeepDefaults) {
  const ExperimentConfig c = parse_config(R"({"schema_version": 1, "mesh": {"nx": 16}})");
  EXPECT_EQ(c.nx, 16);
  EXPECT_EQ(c.ny, ExperimentConfig{}.ny);
  EXPECT_EQ(c.K, ExperimentConfig{}.K);
}

TEST(Config, ErrorsAreLineAnchored) {
  const std::string unknown = "{\n  \"schema_version\": 1,\n  \"mesh\": {\n    \"nx\": 8,\n    \"nz\": 8\n  }\n}\n";
  const std::string e1 = config_error(unknown);
  EXPECT_NE(e1.find("line 5"), std::string::npos) << e1;
  EXPECT_NE(e1.find("nz"), std::string::npos) << e1;

  const std::string wrong_type = "{\n  \"schema_version\": 1,\n  \"time\": {\n    \"K\": \"many\"\n  }\n}\n";
  const std::string e2 = config_error(wrong_type);
  EXPECT_NE(e2.find("line 4"), std::string::npos) << e2;
  EXPECT_NE(e2.find("time.K"), std::string::npos) << e2;

  const std::string malformed = "{\n  \"schema_version\": 1,\n  \"mesh\": {\"nx\": 8,,}\n}\n";
  const std::string e3 = config_error(malformed);
  EXPECT_NE(e3.find("line 3"), std::string::npos) << e3;

  const std::string e4 = config_error("{\"schema_version\": 2}");
  EXPECT_NE(e4.find("schema_version"), std::string::npos) << e4;
  const std::string e5 = config_error("{\"schema_version\": 1, \"ml\": {\"output\": \"delta\"}}");
  EXPECT_NE(e5.find("ml.output"), std::string::npos) << e5;
}

TEST(Config, LookbackBeyondTrainingWindowIsRejected) {
  ExperimentConfig c = preset("desk");
  c.ml.lookback = 50;
  try {
    parse_config(serialize_config(c));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LookbackTooLarge);
  }
  TempDir dir;
  const fs::path cfg = dir.path() / "lb.json";
  std::ofstream(cfg) << serialize_config(c);
  EXPECT_EQ(run_cli({"all", "--config", cfg.string(), "--out", (dir.path() / "run").string()}), kConfigError);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorKind::Config), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::LookbackTooLarge), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::PatchOutsideDomain), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::Io), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::NonConvergence), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::StabilityViolation), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::DivergedLoss), 4);
  EXPECT_EQ(exit_code_for(ErrorKind::BoundViolated), 5);
}

TEST(Cli, ArgumentErrors) {
  TempDir dir;
  EXPECT_EQ(run_cli({"frobnicate"}), kConfigError);
  EXPECT_EQ(run_cli({"all", "--preset", "desk", "--config", "x.json"}), kConfigError);
  EXPECT_EQ(run_cli({"all", "--preset", "no-such"}), kConfigError);
  EXPECT_EQ(run_cli({"generate", "--config", (dir.path() / "missing.json").string()}), kConfigError);
  EXPECT_EQ(run_cli({"train", "--out", (dir.path() / "empty").string()}), kConfigError);
}

TEST(Cli, ReportRejectsEmptyErrorTable) {
  TempDir dir;
  std::ofstream(dir.path() / "errors.csv") << "";
  EXPECT_EQ(run_cli({"report", "--out", dir.path().string()}), kConfigError);
  std::ofstream(dir.path() / "errors.csv")
      << "k,t,err_bk_L2,err_star_L2,err_svda_L2,err_bk_H1,err_star_H1,err_svda_H1,beta,bound_lhs,bound_rhs,eps_bk_N\n";
  EXPECT_EQ(run_cli({"report", "--out", dir.path().string()}), kConfigError);
}

TEST(Cli, StagedPipelineWritesEveryArtifact) {
  TempDir dir;
  const fs::path cfg = write_config(dir.path(), tiny());
  const std::string out = (dir.path() / "run").string();
  ASSERT_EQ(run_cli({"generate", "--config", cfg.string(), "--out", out}), kOk);
  // Later stages pick the config up from the run directory.
  ASSERT_EQ(run_cli({"train", "--out", out}), kOk);
  ASSERT_EQ(run_cli({"assimilate", "--out", out}), kOk);
  ASSERT_EQ(run_cli({"report", "--out", out}), kOk);
  for (const char* f : {"config.json", "true.bin", "bk.bin", "observations.csv", "model.bin", "training_log.csv",
                        "basis.bin", "eigenvalues.csv", "errors.csv", "pbdw_bound.csv", "estimates.bin",
                        "report.svg", "metadata-generate.json", "metadata-train.json",
                        "metadata-assimilate.json", "metadata-report.json"}) {
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
  }
  EXPECT_FALSE(fs::exists(fs::path(out) / "test.bin"));
  EXPECT_EQ(slurp(fs::path(out) / "training_log.csv").substr(0, 11), "epoch,loss\n");
  std::istringstream is(slurp(fs::path(out) / "errors.csv"));
  const auto rows = read_error_csv(is);
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows.front().k, 8);
  EXPECT_TRUE(load_config(fs::path(out) / "config.json") == tiny());
}

TEST(Cli, OracleStubMatchesTrueObservationEstimate) {
  TempDir dir;
  const fs::path cfg = write_config(dir.path(), tiny());
  const fs::path out = dir.path() / "run";
  ASSERT_EQ(run_cli({"all", "--config", cfg.string(), "--oracle-stub", "--out", out.string()}), kOk);
  std::istringstream is(slurp(out / "errors.csv"));
  for (const auto& r : read_error_csv(is)) {
    EXPECT_NEAR(r.err_svda_L2, r.err_star_L2, 1e-12 * (1.0 + r.err_star_L2));
  }
  EXPECT_FALSE(fs::exists(out / "model.bin"));
}

TEST(Cli, RepeatedRunsAggregateByMedian) {
  TempDir dir;
  const fs::path cfg = write_config(dir.path(), tiny());
  const fs::path out = dir.path() / "run";
  ASSERT_EQ(run_cli({"all", "--config", cfg.string(), "--seed", "5", "--repeat", "3", "--out", out.string()}), kOk);
  std::vector<std::vector<ErrorRow>> runs;
  for (const int s : {5, 6, 7}) {
    const fs::path f = out / ("seed_" + std::to_string(s)) / "errors.csv";
    ASSERT_TRUE(fs::exists(f)) << f;
    std::istringstream is(slurp(f));
    runs.push_back(read_error_csv(is));
  }
  std::ostringstream expected;
  write_error_csv(expected, median_rows(runs));
  EXPECT_EQ(slurp(out / "errors.csv"), expected.str());
  EXPECT_TRUE(fs::exists(out / "report.svg"));
}

TEST(Cli, SameSeedGivesIdenticalErrorFiles) {
  TempDir dir;
  const fs::path cfg = write_config(dir.path(), tiny());
  ASSERT_EQ(run_cli({"all", "--config", cfg.string(), "--out", (dir.path() / "a").string()}), kOk);
  ASSERT_EQ(run_cli({"all", "--config", cfg.string(), "--out", (dir.path() / "b").string()}), kOk);
  EXPECT_EQ(slurp(dir.path() / "a" / "errors.csv"), slurp(dir.path() / "b" / "errors.csv"));
  EXPECT_EQ(slurp(dir.path() / "a" / "model.bin"), slurp(dir.path() / "b" / "model.bin"));
}

TEST(Svg, ThreeSeriesWithInvertibleCoordinates) {
  std::vector<ErrorRow> rows;
  for (int k = 0; k < 4; ++k) {
    ErrorRow r;
    r.k = k + 10;
    r.t = 0.5 * k;
    r.err_bk_L2 = 3e-2;
    r.err_star_L2 = 1e-4 * (k + 1);
    r.err_svda_L2 = 2e-3;
    rows.push_back(r);
  }
  const std::string svg = render_svg(rows, "a < b & c");
  const std::regex poly("<polyline[^>]*data-series=\"([^\"]+)\"[^>]*points=\"([^\"]+)\"");
  std::vector<std::string> names;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator(); ++it) {
    names.push_back((*it)[1]);
  }
  ASSERT_EQ(names.size(), 3u);
  EXPECT_EQ(names[0], "bk");
  EXPECT_EQ(names[2], "SVDA");
  EXPECT_NE(svg.find("a &lt; b &amp; c"), std::string::npos);
  EXPECT_NE(svg.find("data-log-min=\"-4\""), std::string::npos);
  EXPECT_NE(svg.find("data-log-max=\"-1\""), std::string::npos);
  // bk at 3e-2 sits at y0 + h * (log_max - log10(3e-2)) / 3.
  const double y = 40.0 + 360.0 * (-1.0 - std::log10(3e-2)) / 3.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "80.000,%.3f", y);
  EXPECT_NE(svg.find(buf), std::string::npos) << buf;
  EXPECT_THROW(render_svg({}, "empty"), Error);
}

}  // namespace
}  // namespace svda::cli
