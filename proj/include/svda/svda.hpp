#pragma once

// Offline and online stages of statistical variational data assimilation:
// PBDW solves whose observations come from a recurrent predictor once real
// observations stop, plus the per-step error report and bound check.

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "svda/fem.hpp"
#include "svda/ml.hpp"
#include "svda/observation.hpp"
#include "svda/pbdw.hpp"
#include "svda/reduction.hpp"

namespace svda {

enum class Mode {
  Future,      // train on rows 0..k_off-1, forecast k_off..K of the same run
  Parametric,  // train on a whole run at mu_true, forecast a run at mu_test
};

struct ExperimentConfig {
  int nx = 32;
  int ny = 32;
  double T = 2.5;
  int K = 200;
  int k_off = 50;
  double mu_true = 15.0;
  double mu_bk = 15.0;
  double mu_test = 17.0;
  fem::RadiationBC radiation;
  double u0 = 293.15;
  int side_count = 11;
  double halfwidth = obs::kDefaultHalfwidth;
  int N = 4;
  ml::ModelConfig ml;
  Mode mode = Mode::Future;

  /// Throws Config (or LookbackTooLarge) when a module precondition fails.
  void validate() const;
  [[nodiscard]] int sensors() const { return side_count * side_count; }
  /// First step predicted by the network.
  [[nodiscard]] int online_start() const { return mode == Mode::Future ? k_off : ml.lookback; }
  /// Number of leading rows of the training series used for training.
  [[nodiscard]] int training_rows() const { return mode == Mode::Future ? k_off : K + 1; }
};

/// Mesh, inner products, time grid and sensors shared by every stage.
struct Discretization {
  fem::Mesh mesh;
  fem::SparseMatrix mass;
  fem::SparseMatrix gram;  // H1 inner product
  fem::TimeGrid grid;
  obs::ObservableSpace observable;
};

Discretization discretize(const ExperimentConfig& config);

/// Synthetic truth and best-knowledge runs with their observations.
struct SyntheticData {
  fem::Trajectory truth_train;  // bi-material at mu_true
  fem::Trajectory truth_test;   // bi-material at mu_true (future) or mu_test (parametric)
  fem::Trajectory bk;           // uniform at mu_bk
  obs::ObservationSeries train_series;
  obs::ObservationSeries test_series;
};

/// truth_test shares truth_train in future mode; only parametric runs solve three models.
SyntheticData generate(const ExperimentConfig& config, const Discretization& disc);

/// Rebuilds the observation series after trajectories were loaded from disk.
void observe_data(SyntheticData& data, const Discretization& disc);

struct OfflineArtifacts {
  ExperimentConfig config;
  rom::BackgroundSpace background;
  pbdw::PBDWSystem system;
  std::optional<ml::Model> model;
  obs::ObservationSeries training_series;  // rows used for training
};

/// POD of the bk run, the PBDW system and, when `train_model` is set, a
/// freshly trained network.
OfflineArtifacts offline(const ExperimentConfig& config, const Discretization& disc,
                         const SyntheticData& data, bool train_model = true,
                         ml::TrainingLog* log = nullptr);

ml::TrainingSet training_set(const ExperimentConfig& config, const obs::ObservationSeries& series);

/// Source of the surrogate observation vector at step k.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Eigen::VectorXd predict(int k) = 0;
};

/// Autoregressive network rollout. Steps must be requested in order; a step
/// already produced is served from the cache.
class LstmPredictor final : public Predictor {
 public:
  /// `history` holds the true observation rows 0..start-1.
  LstmPredictor(const ml::Model& model, Eigen::MatrixXd history, int start);
  Eigen::VectorXd predict(int k) override;

 private:
  const ml::Model& model_;
  Eigen::MatrixXd history_;
  int start_;
  std::vector<Eigen::VectorXd> cache_;
};

/// Returns the true observations.
class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(obs::ObservationSeries series) : series_(std::move(series)) {}
  Eigen::VectorXd predict(int k) override;

 private:
  obs::ObservationSeries series_;
};

/// Returns zeros.
class ZeroPredictor final : public Predictor {
 public:
  explicit ZeroPredictor(int sensors) : sensors_(sensors) {}
  Eigen::VectorXd predict(int /*k*/) override { return Eigen::VectorXd::Zero(sensors_); }

 private:
  int sensors_;
};

/// Network predictor seeded with the first online_start() test observations.
std::unique_ptr<Predictor> make_lstm_predictor(const OfflineArtifacts& artifacts,
                                               const SyntheticData& data);

struct OnlineResult {
  int start = 0;
  std::vector<fem::NodalField> svda;  // u_svda^k, k = start..K
  std::vector<fem::NodalField> star;  // PBDW with true observations
  Eigen::MatrixXd predicted;          // row k - start holds l^{k,DL}
};

OnlineResult online(const OfflineArtifacts& artifacts, const Discretization& disc,
                    const SyntheticData& data, Predictor& predictor);

struct ErrorRow {
  int k = 0;
  double t = 0.0;
  double err_bk_L2 = 0.0, err_star_L2 = 0.0, err_svda_L2 = 0.0;
  double err_bk_H1 = 0.0, err_star_H1 = 0.0, err_svda_H1 = 0.0;
  double beta = 0.0;
  double bound_lhs = 0.0;  // ||u* - u_svda||
  double bound_rhs = 0.0;  // (1 + 2/beta) ||P_U u_true - u_DL||
  double eps_bk_N = 0.0;   // ||u_true - P_Z u_true||
};

/// Two readings of the PBDW a priori bound, reported but not asserted.
struct PbdwBoundRow {
  int k = 0;
  double star_error = 0.0;       // ||u_true - u*||
  double literal_rhs = 0.0;      // (1 + 1/beta) ||P_Z u_true||
  double complement_rhs = 0.0;   // (1 + 1/beta) inf_{q in U cap Z^perp} ||P_{Z^perp} u_true - q||
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
  std::vector<PbdwBoundRow> pbdw_bound;

  /// Time means over the report rows.
  [[nodiscard]] double mean_bk_L2() const;
  [[nodiscard]] double mean_star_L2() const;
  [[nodiscard]] double mean_svda_L2() const;
  /// Smallest bound_rhs - bound_lhs.
  [[nodiscard]] double min_bound_margin() const;
};

/// Relative errors against truth_test and the SVDA stability bound at every
/// online step. Throws BoundViolated when
/// bound_lhs > bound_rhs + 1e-8 * (1 + bound_rhs).
ErrorReport error_report(const OfflineArtifacts& artifacts, const Discretization& disc,
                         const SyntheticData& data, const OnlineResult& online);

void write_error_csv(std::ostream& os, const std::vector<ErrorRow>& rows);
std::vector<ErrorRow> read_error_csv(std::istream& is);
void write_pbdw_bound_csv(std::ostream& os, const ErrorReport& report);

/// Entry-wise median over runs with identical k columns.
std::vector<ErrorRow> median_rows(const std::vector<std::vector<ErrorRow>>& runs);

}  // namespace svda
