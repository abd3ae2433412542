#pragma once

// LSTM recurrent network with a dense head, trained by backpropagation
// through time with Adam. Predicts the next observation vector from the lb
// previous ones.

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "svda/observation.hpp"

namespace svda::ml {

enum class Activation { Tanh, Identity };

/// What the dense head's output represents after de-normalization.
enum class OutputMode {
  Absolute,   // the next observation vector
  Increment,  // the change from the last window row to the next one
};

/// Gate weights act on concat(h, x): shape hidden x (hidden + input).
struct LSTMParams {
  Eigen::MatrixXd W_f, W_u, W_o, W_c;
  Eigen::VectorXd b_f, b_u, b_o, b_c;

  static LSTMParams zeros(int input_size, int hidden_size);
  [[nodiscard]] int hidden_size() const { return static_cast<int>(W_f.rows()); }
  [[nodiscard]] int input_size() const { return static_cast<int>(W_f.cols() - W_f.rows()); }
};

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
  Activation activation = Activation::Tanh;
};

struct DenseParams {
  std::vector<DenseLayer> layers;
};

struct Parameters {
  LSTMParams lstm;
  DenseParams dense;

  /// Zero tensors shaped like `like`.
  static Parameters zeros_like(const Parameters& like);
};

std::size_t parameter_count(const Parameters& p);
/// Tensors in a fixed order: W_f, W_u, W_o, W_c, b_f, b_u, b_o, b_c, then
/// (W, b) per dense layer; matrices column-major.
Eigen::VectorXd flatten(const Parameters& p);
void unflatten(const Eigen::VectorXd& theta, Parameters& p);

/// Per-feature affine map x -> (x - mean) / scale.
struct Normalization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Normalization identity(int size);
  /// Mean and population standard deviation of each column; scale floored at 1e-12.
  static Normalization fit(const Eigen::MatrixXd& rows);

  [[nodiscard]] Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::VectorXd denormalize(const Eigen::VectorXd& y) const;
};

struct ModelConfig {
  int lookback = 1;
  int hidden_size = 32;
  std::vector<int> dense_widths{32, 32};
  double learning_rate = 1e-2;
  int epochs = 2000;
  std::uint64_t seed = 42;
  OutputMode output = OutputMode::Absolute;
};

struct Model {
  ModelConfig config;
  Parameters params;
  Normalization input_norm;
  Normalization target_norm;
  double final_loss = 0.0;

  [[nodiscard]] int input_size() const { return params.lstm.input_size(); }
};

/// Normalized sliding windows over the first k_off rows of a series.
struct TrainingSet {
  std::vector<Eigen::MatrixXd> inputs;  // lb x M each
  std::vector<Eigen::VectorXd> targets;
  Normalization input_norm;
  Normalization target_norm;
  OutputMode output = OutputMode::Absolute;

  [[nodiscard]] int size() const { return static_cast<int>(inputs.size()); }
  [[nodiscard]] int lookback() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].rows()); }
  [[nodiscard]] int features() const { return targets.empty() ? 0 : static_cast<int>(targets[0].size()); }
  /// Samples selected by index, sharing the normalization.
  [[nodiscard]] TrainingSet subset(const std::vector<int>& indices) const;
};

/// Deterministic 64-bit generator (splitmix64).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

 private:
  std::uint64_t state_;
};

/// One LSTM cell update; returns (h', c').
std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_step(const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& h,
                                                      const Eigen::VectorXd& c,
                                                      const LSTMParams& params);

/// Head output for an already-normalized window (lb x M), before de-normalization.
Eigen::VectorXd forward_normalized(const Parameters& params, const Eigen::MatrixXd& window);

/// Raw window in, raw next observation vector out.
Eigen::VectorXd forward(const Model& model, const Eigen::MatrixXd& window);

double loss_mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

/// Mean batch loss in normalized space; fills `grad` (if given) with its exact
/// gradient by backpropagation through time.
double loss_and_gradient(const Parameters& params, const TrainingSet& batch, Parameters* grad);

Parameters gradient(const Model& model, const TrainingSet& batch);

struct AdamHyper {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  static AdamState zeros(std::size_t n);
};

/// Bias-corrected Adam update for step index t >= 1.
void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state,
               const AdamHyper& hyper, long t);
void adam_step(Parameters& params, const Parameters& grads, AdamState& state,
               const AdamHyper& hyper, long t);

/// Throws LookbackTooLarge unless 1 <= lb <= k_off - 1 and k_off <= rows.
TrainingSet build_training_set(const obs::ObservationSeries& series, int k_off, int lb,
                               OutputMode output = OutputMode::Absolute);

/// Weights uniform in [-s, s], s = 1/sqrt(fan-in), drawn from SplitMix64(seed).
Parameters initialize(int input_size, const ModelConfig& config);

struct TrainingLog {
  std::vector<double> loss;  // loss before update e, e = 0..epochs-1, then the final loss
};

/// Full-batch Adam. Throws DivergedLoss on a non-finite loss.
Model train(const TrainingSet& tset, const ModelConfig& config, TrainingLog* log = nullptr);

/// Autoregressive prediction: each output is appended and the window slides.
std::vector<Eigen::VectorXd> rollout(const Model& model, const Eigen::MatrixXd& seed_window,
                                     int n_steps);

/// Binary checkpoint; see README for the layout.
void write_checkpoint(std::ostream& os, const Model& model);
Model read_checkpoint(std::istream& is);

}  // namespace svda::ml
