#include "svda/svda.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include <Eigen/QR>

#include "svda/csv.hpp"
#include "svda/errors.hpp"
#include "svda/linalg.hpp"

namespace svda {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::Config, message);
}

template <class F>
auto staged(std::string_view stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.tagged(stage);
  }
}

double relative(const Eigen::VectorXd& err, const Eigen::VectorXd& ref, const fem::SparseMatrix& W) {
  return std::sqrt(err.dot(W * err)) / std::sqrt(ref.dot(W * ref));
}

constexpr std::array<const char*, 12> kErrorColumns = {
    "k",         "t",         "err_bk_L2", "err_star_L2", "err_svda_L2", "err_bk_H1",
    "err_star_H1", "err_svda_H1", "beta",   "bound_lhs",   "bound_rhs",   "eps_bk_N"};

std::array<double, 12> row_values(const ErrorRow& r) {
  return {static_cast<double>(r.k), r.t, r.err_bk_L2, r.err_star_L2, r.err_svda_L2, r.err_bk_H1,
          r.err_star_H1, r.err_svda_H1, r.beta, r.bound_lhs, r.bound_rhs, r.eps_bk_N};
}

ErrorRow row_from(const std::array<double, 12>& v) {
  ErrorRow r;
  r.k = static_cast<int>(std::lround(v[0]));
  r.t = v[1];
  r.err_bk_L2 = v[2];
  r.err_star_L2 = v[3];
  r.err_svda_L2 = v[4];
  r.err_bk_H1 = v[5];
  r.err_star_H1 = v[6];
  r.err_svda_H1 = v[7];
  r.beta = v[8];
  r.bound_lhs = v[9];
  r.bound_rhs = v[10];
  r.eps_bk_N = v[11];
  return r;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(nx >= 1 && ny >= 1, "mesh needs nx, ny >= 1");
  require(T > 0.0 && std::isfinite(T), "T must be positive");
  require(K >= 1, "K must be at least 1");
  require(k_off >= 1 && k_off <= K, "k_off must satisfy 1 <= k_off <= K");
  require(mu_true > 0.0 && mu_bk > 0.0 && mu_test > 0.0, "diffusivities must be positive");
  require(radiation.sigma > 0.0 && radiation.epsilon > 0.0 && radiation.u_r > 0.0,
          "radiation parameters must be positive");
  require(u0 > 0.0, "initial temperature must be positive");
  require(side_count >= 1, "side_count must be at least 1");
  require(halfwidth > 0.0 && halfwidth <= obs::kDefaultMargin,
          "halfwidth must lie in (0, 0.2] so that every patch stays inside the plate");
  require(N >= 1, "N must be at least 1");
  require(N <= sensors(), "N may not exceed the sensor count M");
  require(N <= K + 1, "N may not exceed the number of bk snapshots");
  require(ml.hidden_size >= 1, "hidden size must be positive");
  for (const int w : ml.dense_widths) require(w >= 1, "dense widths must be positive");
  require(ml.learning_rate > 0.0 && std::isfinite(ml.learning_rate), "learning rate must be positive");
  require(ml.epochs >= 0, "epochs must be nonnegative");
  const int rows = training_rows();
  if (ml.lookback < 1 || ml.lookback > rows - 1) {
    throw Error(ErrorKind::LookbackTooLarge,
                "lookback " + std::to_string(ml.lookback) + " needs 1 <= lb <= " +
                    std::to_string(rows - 1));
  }
}

Discretization discretize(const ExperimentConfig& config) {
  config.validate();
  Discretization d;
  d.mesh = fem::build_mesh(config.nx, config.ny);
  d.mass = fem::assemble_mass(d.mesh);
  d.gram = fem::h1_gram(d.mesh);
  d.grid = fem::make_time_grid(config.T, config.K, config.k_off);
  d.observable = staged("sensors", [&] {
    return obs::build_observable_space(
        obs::build_patch_grid(config.side_count, config.halfwidth, d.mesh), d.gram, d.mesh);
  });
  return d;
}

void observe_data(SyntheticData& data, const Discretization& disc) {
  data.train_series = obs::observe_trajectory(data.truth_train, disc.observable, disc.grid);
  data.test_series = obs::observe_trajectory(data.truth_test, disc.observable, disc.grid);
}

SyntheticData generate(const ExperimentConfig& config, const Discretization& disc) {
  const fem::NodalField u0 = fem::NodalField::Constant(disc.mesh.node_count(), config.u0);
  SyntheticData data;
  data.truth_train = staged("generate/true", [&] {
    return fem::solve_trajectory(disc.mesh, u0, disc.grid,
                                 fem::bimaterial_diffusivity(disc.mesh, config.mu_true),
                                 config.radiation);
  });
  data.bk = staged("generate/bk", [&] {
    return fem::solve_trajectory(disc.mesh, u0, disc.grid,
                                 fem::uniform_diffusivity(disc.mesh, config.mu_bk),
                                 config.radiation);
  });
  if (config.mode == Mode::Parametric) {
    data.truth_test = staged("generate/test", [&] {
      return fem::solve_trajectory(disc.mesh, u0, disc.grid,
                                   fem::bimaterial_diffusivity(disc.mesh, config.mu_test),
                                   config.radiation);
    });
  } else {
    data.truth_test = data.truth_train;
  }
  observe_data(data, disc);
  return data;
}

ml::TrainingSet training_set(const ExperimentConfig& config, const obs::ObservationSeries& series) {
  return ml::build_training_set(series, config.training_rows(), config.ml.lookback,
                                config.ml.output);
}

OfflineArtifacts offline(const ExperimentConfig& config, const Discretization& disc,
                         const SyntheticData& data, bool train_model, ml::TrainingLog* log) {
  config.validate();
  OfflineArtifacts a;
  a.config = config;
  a.background = staged("offline/pod", [&] { return rom::pod(data.bk.fields, disc.gram, config.N); });
  a.system = staged("offline/pbdw", [&] {
    return pbdw::assemble_system(a.background, disc.observable, disc.gram);
  });
  a.training_series.grid = disc.grid;
  a.training_series.values = data.train_series.values.topRows(config.training_rows());
  if (train_model) {
    a.model = staged("offline/train", [&] {
      return ml::train(training_set(config, a.training_series), config.ml, log);
    });
  }
  return a;
}

LstmPredictor::LstmPredictor(const ml::Model& model, Eigen::MatrixXd history, int start)
    : model_(model), history_(std::move(history)), start_(start) {
  if (history_.rows() < start_ || start_ < model_.config.lookback) {
    throw Error(ErrorKind::DimensionMismatch,
                "predictor needs at least lb true rows before its first step");
  }
}

Eigen::VectorXd LstmPredictor::predict(int k) {
  const int next = start_ + static_cast<int>(cache_.size());
  if (k < start_ || k > next) {
    throw Error(ErrorKind::OutOfOrderRequest,
                "step " + std::to_string(k) + " requested; the next predictable step is " +
                    std::to_string(next));
  }
  if (k < next) return cache_[static_cast<std::size_t>(k - start_)];
  const int lb = model_.config.lookback;
  Eigen::MatrixXd window(lb, history_.cols());
  for (int r = 0; r < lb; ++r) {
    const int g = k - lb + r;
    window.row(r) = g < start_ ? Eigen::VectorXd(history_.row(g).transpose()).transpose()
                               : cache_[static_cast<std::size_t>(g - start_)].transpose();
  }
  cache_.push_back(ml::forward(model_, window));
  return cache_.back();
}

Eigen::VectorXd OraclePredictor::predict(int k) {
  if (k < 0 || k >= series_.rows()) {
    throw Error(ErrorKind::OutOfOrderRequest, "no observation row " + std::to_string(k));
  }
  return series_.values.row(k).transpose();
}

std::unique_ptr<Predictor> make_lstm_predictor(const OfflineArtifacts& artifacts,
                                               const SyntheticData& data) {
  if (!artifacts.model) throw Error(ErrorKind::Config, "offline stage holds no trained model");
  const int start = artifacts.config.online_start();
  return std::make_unique<LstmPredictor>(*artifacts.model, data.test_series.values.topRows(start),
                                         start);
}

OnlineResult online(const OfflineArtifacts& artifacts, const Discretization& disc,
                    const SyntheticData& data, Predictor& predictor) {
  OnlineResult out;
  out.start = artifacts.config.online_start();
  const int K = disc.grid.K;
  out.predicted.resize(K - out.start + 1, artifacts.system.M());
  for (int k = out.start; k <= K; ++k) {
    staged("online step " + std::to_string(k), [&] {
      const Eigen::VectorXd l_dl = predictor.predict(k);
      out.predicted.row(k - out.start) = l_dl.transpose();
      out.svda.push_back(pbdw::solve_saddle(artifacts.system, l_dl).field);
      out.star.push_back(
          pbdw::solve_saddle(artifacts.system, data.test_series.values.row(k).transpose()).field);
    });
  }
  return out;
}

ErrorReport error_report(const OfflineArtifacts& artifacts, const Discretization& disc,
                         const SyntheticData& data, const OnlineResult& online) {
  const auto& sys = artifacts.system;
  const auto& G = disc.gram;
  const Eigen::MatrixXd& Q = sys.representers;
  const Eigen::MatrixXd& Z = sys.background;
  const double beta = sys.beta;
  const int M = sys.M();
  const int N = sys.N();

  const Eigen::LLT<Eigen::MatrixXd> llt_a(sys.A);
  const Eigen::MatrixXd GQ = G * Q;

  // U_M intersected with Z_N^perp is spanned by Q k for k in the null space of B^T.
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr_b(sys.B);
  const Eigen::MatrixXd full_q = qr_b.householderQ() * Eigen::MatrixXd::Identity(M, M);
  const Eigen::MatrixXd W = Q * full_q.rightCols(M - N);
  const Eigen::MatrixXd GW = G * W;
  const Eigen::LLT<Eigen::MatrixXd> llt_w(W.transpose() * GW);

  ErrorReport report;
  for (int k = online.start; k <= disc.grid.K; ++k) {
    const std::size_t i = static_cast<std::size_t>(k - online.start);
    const fem::NodalField& truth = data.truth_test[static_cast<std::size_t>(k)];
    const fem::NodalField& bk = data.bk[static_cast<std::size_t>(k)];
    const fem::NodalField& star = online.star[i];
    const fem::NodalField& est = online.svda[i];

    ErrorRow r;
    r.k = k;
    r.t = disc.grid.time(k);
    r.err_bk_L2 = relative(truth - bk, truth, disc.mass);
    r.err_star_L2 = relative(truth - star, truth, disc.mass);
    r.err_svda_L2 = relative(truth - est, truth, disc.mass);
    r.err_bk_H1 = relative(truth - bk, truth, G);
    r.err_star_H1 = relative(truth - star, truth, G);
    r.err_svda_H1 = relative(truth - est, truth, G);
    r.beta = beta;

    // Projection of the truth onto U_M and the network field with l(u_DL) = l^DL.
    const Eigen::VectorXd c_true = llt_a.solve(GQ.transpose() * truth);
    const Eigen::VectorXd c_dl = llt_a.solve(online.predicted.row(static_cast<Eigen::Index>(i)).transpose());
    const fem::NodalField gap = Q * (c_true - c_dl);
    r.bound_lhs = g_norm(star - est, G);
    r.bound_rhs = (1.0 + 2.0 / beta) * g_norm(gap, G);
    const fem::NodalField proj_z = rom::project(truth, Z, G);
    r.eps_bk_N = g_norm(truth - proj_z, G);

    if (!(r.bound_lhs <= r.bound_rhs + 1e-8 * (1.0 + r.bound_rhs))) {
      throw Error(ErrorKind::BoundViolated,
                  "step " + std::to_string(k) + ": ||u* - u_svda|| = " + csv::format(r.bound_lhs) +
                      " exceeds (1 + 2/beta) ||P_U u_true - u_DL|| = " + csv::format(r.bound_rhs));
    }
    report.rows.push_back(r);

    PbdwBoundRow b;
    b.k = k;
    b.star_error = g_norm(truth - star, G);
    b.literal_rhs = (1.0 + 1.0 / beta) * g_norm(proj_z, G);
    const fem::NodalField w = truth - proj_z;
    double inf_term = g_norm(w, G);
    if (W.cols() > 0) {
      const Eigen::VectorXd alpha = llt_w.solve(GW.transpose() * w);
      inf_term = g_norm(w - W * alpha, G);
    }
    b.complement_rhs = (1.0 + 1.0 / beta) * inf_term;
    report.pbdw_bound.push_back(b);
  }
  return report;
}

double ErrorReport::mean_bk_L2() const {
  double s = 0.0;
  for (const auto& r : rows) s += r.err_bk_L2;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double ErrorReport::mean_star_L2() const {
  double s = 0.0;
  for (const auto& r : rows) s += r.err_star_L2;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double ErrorReport::mean_svda_L2() const {
  double s = 0.0;
  for (const auto& r : rows) s += r.err_svda_L2;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double ErrorReport::min_bound_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) m = std::min(m, r.bound_rhs - r.bound_lhs);
  return m;
}

void write_error_csv(std::ostream& os, const std::vector<ErrorRow>& rows) {
  for (std::size_t c = 0; c < kErrorColumns.size(); ++c) os << (c ? "," : "") << kErrorColumns[c];
  os << '\n';
  for (const auto& r : rows) {
    const auto v = row_values(r);
    os << r.k;
    for (std::size_t c = 1; c < v.size(); ++c) os << ',' << csv::format(v[c]);
    os << '\n';
  }
  if (!os) throw Error(ErrorKind::Io, "failed to write error CSV");
}

std::vector<ErrorRow> read_error_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || csv::trim(line).empty()) {
    throw Error(ErrorKind::Io, "error CSV is empty");
  }
  const auto header = csv::split(line);
  std::map<std::string, std::size_t, std::less<>> position;
  for (std::size_t c = 0; c < header.size(); ++c) position.emplace(std::string(csv::trim(header[c])), c);
  std::array<std::size_t, 12> index{};
  for (std::size_t c = 0; c < kErrorColumns.size(); ++c) {
    const auto it = position.find(kErrorColumns[c]);
    if (it == position.end()) {
      throw Error(ErrorKind::Io, std::string("error CSV lacks column ") + kErrorColumns[c]);
    }
    index[c] = it->second;
  }
  std::vector<ErrorRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Io, "line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(header.size()) + " columns");
    }
    std::array<double, 12> v{};
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = csv::parse_double(cells[index[c]]);
    rows.push_back(row_from(v));
  }
  if (rows.empty()) throw Error(ErrorKind::Io, "error CSV has no data rows");
  return rows;
}

void write_pbdw_bound_csv(std::ostream& os, const ErrorReport& report) {
  os << "k,star_error,literal_rhs,complement_rhs\n";
  for (const auto& b : report.pbdw_bound) {
    os << b.k << ',' << csv::format(b.star_error) << ',' << csv::format(b.literal_rhs) << ','
       << csv::format(b.complement_rhs) << '\n';
  }
  if (!os) throw Error(ErrorKind::Io, "failed to write bound CSV");
}

std::vector<ErrorRow> median_rows(const std::vector<std::vector<ErrorRow>>& runs) {
  if (runs.empty()) throw Error(ErrorKind::DimensionMismatch, "no runs to aggregate");
  const std::size_t n = runs.front().size();
  for (const auto& run : runs) {
    if (run.size() != n) throw Error(ErrorKind::DimensionMismatch, "runs differ in length");
  }
  std::vector<ErrorRow> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 12> med{};
    for (std::size_t c = 0; c < med.size(); ++c) {
      std::vector<double> v;
      v.reserve(runs.size());
      for (const auto& run : runs) {
        if (run[i].k != runs.front()[i].k) {
          throw Error(ErrorKind::DimensionMismatch, "runs cover different steps");
        }
        v.push_back(row_values(run[i])[c]);
      }
      std::sort(v.begin(), v.end());
      const std::size_t h = v.size() / 2;
      med[c] = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    }
    out.push_back(row_from(med));
  }
  return out;
}

}  // namespace svda
