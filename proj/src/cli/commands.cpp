#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "svda/cli.hpp"
#include "svda/csv.hpp"
#include "svda/errors.hpp"
#include "svda/field_io.hpp"

namespace svda::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path.string() + " (run the earlier pipeline step first)");
  return is;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Timestamps live only in this sidecar so that every other output is
// byte-identical across reruns.
class Metadata {
 public:
  Metadata(const Options& options, std::string command)
      : out_(options.out), command_(std::move(command)), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {}

  void write() const {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    nlohmann::ordered_json doc;
    doc["command"] = command_;
    doc["started_utc"] = started_;
    doc["finished_utc"] = utc_now();
    doc["elapsed_seconds"] = elapsed;
    open_out(out_ / ("metadata-" + command_ + ".json")) << doc.dump(2) << '\n';
  }

 private:
  fs::path out_;
  std::string command_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

std::vector<std::uint64_t> seeds_for(const ExperimentConfig& config, const Options& options) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < options.repeat; ++i) seeds.push_back(config.ml.seed + static_cast<std::uint64_t>(i));
  return seeds;
}

fs::path seed_dir(const Options& options, std::uint64_t seed) {
  return options.repeat > 1 ? options.out / ("seed_" + std::to_string(seed)) : options.out;
}

// Runs fn(i) for every index on its own thread; rethrows the first failure
// in index order.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  if (n == 1) {
    fn(std::size_t{0});
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    threads.emplace_back([&, i] {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

obs::ObservationSeries load_series(const fs::path& path, const ExperimentConfig& config) {
  auto is = open_in(path);
  obs::ObservationSeries s = obs::read_observation_csv(is);
  if (s.rows() != config.K + 1 || s.sensors() != config.sensors()) {
    throw Error(ErrorKind::Io, path.string() + " has " + std::to_string(s.rows()) + "x" +
                                   std::to_string(s.sensors()) + " values; the config expects " +
                                   std::to_string(config.K + 1) + "x" + std::to_string(config.sensors()));
  }
  s.grid = fem::make_time_grid(config.T, config.K, config.k_off);
  return s;
}

fem::Trajectory load_trajectory(const fs::path& path, const Discretization& disc) {
  auto is = open_in(path, true);
  fem::Trajectory traj{io::read_fields_binary(is)};
  if (traj.size() != static_cast<std::size_t>(disc.grid.K) + 1 ||
      traj[0].size() != disc.mesh.node_count()) {
    throw Error(ErrorKind::Io, path.string() + " does not match the configured mesh and time grid");
  }
  return traj;
}

void write_training_log(const fs::path& path, const ml::TrainingLog& log) {
  auto os = open_out(path);
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < log.loss.size(); ++e) os << e << ',' << csv::format(log.loss[e]) << '\n';
}

}  // namespace

ExperimentConfig resolve_config(const Options& options) {
  if (options.config_path && options.preset_name) {
    throw Error(ErrorKind::Config, "--config and --preset are mutually exclusive");
  }
  ExperimentConfig c;
  if (options.config_path) {
    c = load_config(*options.config_path);
  } else if (options.preset_name) {
    c = preset(*options.preset_name);
  } else if (fs::exists(options.out / "config.json")) {
    c = load_config(options.out / "config.json");
  } else {
    throw Error(ErrorKind::Config, "give --config or --preset (no config.json in " + options.out.string() + ")");
  }
  if (options.seed) c.ml.seed = *options.seed;
  if (options.repeat < 1) throw Error(ErrorKind::Config, "--repeat must be at least 1");
  c.validate();
  return c;
}

int cmd_generate(const Options& options) {
  const Metadata meta(options, "generate");
  const ExperimentConfig config = resolve_config(options);
  const Discretization disc = discretize(config);
  const SyntheticData data = generate(config, disc);
  open_out(options.out / "config.json") << serialize_config(config);
  {
    auto os = open_out(options.out / "true.bin", true);
    io::write_fields_binary(os, data.truth_train.fields);
  }
  {
    auto os = open_out(options.out / "bk.bin", true);
    io::write_fields_binary(os, data.bk.fields);
  }
  {
    auto os = open_out(options.out / "observations.csv");
    obs::write_observation_csv(os, data.train_series);
  }
  if (config.mode == Mode::Parametric) {
    auto os = open_out(options.out / "test.bin", true);
    io::write_fields_binary(os, data.truth_test.fields);
    auto oc = open_out(options.out / "test_observations.csv");
    obs::write_observation_csv(oc, data.test_series);
  }
  std::cout << "generate: " << data.truth_train.size() << " snapshots on " << disc.mesh.node_count()
            << " nodes, " << config.sensors() << " sensors -> " << options.out.string() << '\n';
  meta.write();
  return kOk;
}

int cmd_train(const Options& options) {
  const Metadata meta(options, "train");
  const ExperimentConfig config = resolve_config(options);
  const obs::ObservationSeries series = load_series(options.out / "observations.csv", config);
  const ml::TrainingSet tset = training_set(config, series);
  const auto seeds = seeds_for(config, options);
  std::mutex print;
  parallel_for(seeds.size(), [&](std::size_t i) {
    ExperimentConfig c = config;
    c.ml.seed = seeds[i];
    ml::TrainingLog log;
    const ml::Model model = ml::train(tset, c.ml, &log);
    const fs::path dir = seed_dir(options, seeds[i]);
    {
      auto os = open_out(dir / "model.bin", true);
      ml::write_checkpoint(os, model);
    }
    write_training_log(dir / "training_log.csv", log);
    const std::lock_guard lock(print);
    std::cout << "train: seed " << seeds[i] << ", " << tset.size() << " pairs, loss "
              << csv::format(log.loss.front()) << " -> " << csv::format(model.final_loss) << '\n';
  });
  meta.write();
  return kOk;
}

int cmd_assimilate(const Options& options) {
  const Metadata meta(options, "assimilate");
  const ExperimentConfig config = resolve_config(options);
  const Discretization disc = discretize(config);
  SyntheticData data;
  data.truth_train = load_trajectory(options.out / "true.bin", disc);
  data.bk = load_trajectory(options.out / "bk.bin", disc);
  data.truth_test = config.mode == Mode::Parametric ? load_trajectory(options.out / "test.bin", disc)
                                                    : data.truth_train;
  observe_data(data, disc);
  const OfflineArtifacts base = offline(config, disc, data, false);
  {
    auto os = open_out(options.out / "basis.bin", true);
    io::write_basis_binary(os, base.background.basis);
    auto oe = open_out(options.out / "eigenvalues.csv");
    oe << "index,eigenvalue\n";
    for (Eigen::Index i = 0; i < base.background.spectrum.size(); ++i) {
      oe << i + 1 << ',' << csv::format(base.background.spectrum[i]) << '\n';
    }
  }

  const auto seeds = options.oracle_stub ? std::vector<std::uint64_t>{config.ml.seed}
                                         : seeds_for(config, options);
  const bool per_seed = !options.oracle_stub && options.repeat > 1;
  std::vector<std::vector<ErrorRow>> runs(seeds.size());
  std::mutex print;
  parallel_for(seeds.size(), [&](std::size_t i) {
    OfflineArtifacts art = base;
    art.config.ml.seed = seeds[i];
    const fs::path dir = per_seed ? options.out / ("seed_" + std::to_string(seeds[i])) : options.out;
    std::unique_ptr<Predictor> predictor;
    if (options.oracle_stub) {
      predictor = std::make_unique<OraclePredictor>(data.test_series);
    } else {
      auto is = open_in(dir / "model.bin", true);
      art.model = ml::read_checkpoint(is);
      if (art.model->config.lookback != config.ml.lookback ||
          art.model->input_size() != config.sensors()) {
        throw Error(ErrorKind::Config, (dir / "model.bin").string() + " was trained for another configuration");
      }
      predictor = make_lstm_predictor(art, data);
    }
    const OnlineResult result = online(art, disc, data, *predictor);
    const ErrorReport report = error_report(art, disc, data, result);
    {
      auto os = open_out(dir / "errors.csv");
      write_error_csv(os, report.rows);
      auto ob = open_out(dir / "pbdw_bound.csv");
      write_pbdw_bound_csv(ob, report);
      auto oe = open_out(dir / "estimates.bin", true);
      io::write_fields_binary(oe, result.svda);
    }
    runs[i] = report.rows;
    const std::lock_guard lock(print);
    std::cout << "assimilate" << (options.oracle_stub ? " (oracle stub)" : "") << ": seed " << seeds[i]
              << ", beta " << csv::format(art.system.beta) << ", mean rel. L2 error bk "
              << csv::format(report.mean_bk_L2()) << ", PBDW " << csv::format(report.mean_star_L2())
              << ", SVDA " << csv::format(report.mean_svda_L2()) << '\n';
  });
  if (per_seed) {
    auto os = open_out(options.out / "errors.csv");
    write_error_csv(os, median_rows(runs));
  }
  meta.write();
  return kOk;
}

int cmd_report(const Options& options) {
  const Metadata meta(options, "report");
  auto is = open_in(options.out / "errors.csv");
  const std::vector<ErrorRow> rows = read_error_csv(is);
  std::string title = "Relative L2 error: " + fs::absolute(options.out).lexically_normal().filename().string();
  open_out(options.out / "report.svg") << render_svg(rows, title);
  std::cout << "report: " << (options.out / "report.svg").string() << '\n';
  meta.write();
  return kOk;
}

int cmd_all(const Options& options) {
  cmd_generate(options);
  Options rest = options;
  // Later steps read the resolved config written by generate.
  rest.config_path = options.out / "config.json";
  rest.preset_name.reset();
  rest.seed.reset();
  if (!options.oracle_stub) cmd_train(rest);
  cmd_assimilate(rest);
  return cmd_report(rest);
}

int run(int argc, char** argv) {
  CLI::App app{"Statistical variational data assimilation: PBDW with LSTM-predicted observations"};
  Options options;
  std::string config_path, preset_name, out = "run";
  std::uint64_t seed = 0;
  app.add_option("command", options.command, "generate | train | assimilate | report | all")
      ->required()
      ->check(CLI::IsMember({"generate", "train", "assimilate", "report", "all"}));
  auto* config_opt = app.add_option("--config", config_path, "experiment config (JSON)");
  auto* preset_opt = app.add_option("--preset", preset_name, "built-in preset: paper-a, paper-b, desk, desk-b");
  auto* seed_opt = app.add_option("--seed", seed, "network seed (overrides the config)");
  app.add_flag("--oracle-stub", options.oracle_stub, "use the true observations as predictions");
  app.add_option("--repeat", options.repeat, "independent seeds run concurrently; errors.csv is their median")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out, "run directory");
  config_opt->excludes(preset_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (*config_opt) options.config_path = config_path;
  if (*preset_opt) options.preset_name = preset_name;
  if (*seed_opt) options.seed = seed;
  options.out = out;

  try {
    if (options.command == "generate") return cmd_generate(options);
    if (options.command == "train") return cmd_train(options);
    if (options.command == "assimilate") return cmd_assimilate(options);
    if (options.command == "report") return cmd_report(options);
    return cmd_all(options);
  } catch (const Error& e) {
    std::cerr << "svda " << options.command << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "svda " << options.command << ": " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "svda " << options.command << ": unexpected failure: " << e.what() << '\n';
    return kUnexpected;
  }
}

}  // namespace svda::cli
