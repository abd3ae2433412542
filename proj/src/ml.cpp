#include "svda/ml.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "svda/binary_io.hpp"
#include "svda/errors.hpp"

namespace svda::ml {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd sigmoid(const MatrixXd& a) { return a.unaryExpr([](double x) { return sigmoid(x); }); }

MatrixXd tanh_of(const MatrixXd& a) { return a.array().tanh().matrix(); }

MatrixXd affine(const MatrixXd& W, const VectorXd& b, const MatrixXd& X) {
  MatrixXd out = W * X;
  out.colwise() += b;
  return out;
}

template <class F>
void for_each_tensor(Parameters& p, F&& fn) {
  for (auto* m : {&p.lstm.W_f, &p.lstm.W_u, &p.lstm.W_o, &p.lstm.W_c}) fn(m->data(), m->size());
  for (auto* v : {&p.lstm.b_f, &p.lstm.b_u, &p.lstm.b_o, &p.lstm.b_c}) fn(v->data(), v->size());
  for (auto& layer : p.dense.layers) {
    fn(layer.W.data(), layer.W.size());
    fn(layer.b.data(), layer.b.size());
  }
}

constexpr char kCheckpointMagic[5] = "SVDL";
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

LSTMParams LSTMParams::zeros(int input_size, int hidden_size) {
  LSTMParams p;
  const int cols = hidden_size + input_size;
  for (auto* m : {&p.W_f, &p.W_u, &p.W_o, &p.W_c}) *m = MatrixXd::Zero(hidden_size, cols);
  for (auto* v : {&p.b_f, &p.b_u, &p.b_o, &p.b_c}) *v = VectorXd::Zero(hidden_size);
  return p;
}

Parameters Parameters::zeros_like(const Parameters& like) {
  Parameters p;
  p.lstm = LSTMParams::zeros(like.lstm.input_size(), like.lstm.hidden_size());
  for (const auto& layer : like.dense.layers) {
    p.dense.layers.push_back({MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                              VectorXd::Zero(layer.b.size()), layer.activation});
  }
  return p;
}

std::size_t parameter_count(const Parameters& p) {
  std::size_t n = 0;
  for_each_tensor(const_cast<Parameters&>(p), [&](double*, Eigen::Index size) {
    n += static_cast<std::size_t>(size);
  });
  return n;
}

VectorXd flatten(const Parameters& p) {
  VectorXd theta(static_cast<Eigen::Index>(parameter_count(p)));
  Eigen::Index offset = 0;
  for_each_tensor(const_cast<Parameters&>(p), [&](double* data, Eigen::Index size) {
    theta.segment(offset, size) = Eigen::Map<const VectorXd>(data, size);
    offset += size;
  });
  return theta;
}

void unflatten(const VectorXd& theta, Parameters& p) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count(p)) {
    throw Error(ErrorKind::DimensionMismatch, "parameter vector has the wrong length");
  }
  Eigen::Index offset = 0;
  for_each_tensor(p, [&](double* data, Eigen::Index size) {
    Eigen::Map<VectorXd>(data, size) = theta.segment(offset, size);
    offset += size;
  });
}

Normalization Normalization::identity(int size) {
  return {VectorXd::Zero(size), VectorXd::Ones(size)};
}

Normalization Normalization::fit(const MatrixXd& rows) {
  Normalization n;
  n.mean = rows.colwise().mean().transpose();
  const MatrixXd centered = rows.rowwise() - n.mean.transpose();
  n.scale = (centered.array().square().colwise().sum() / static_cast<double>(rows.rows()))
                .sqrt()
                .transpose()
                .max(1e-12)
                .matrix();
  return n;
}

VectorXd Normalization::normalize(const VectorXd& x) const {
  return ((x - mean).array() / scale.array()).matrix();
}

VectorXd Normalization::denormalize(const VectorXd& y) const {
  return (y.array() * scale.array()).matrix() + mean;
}

TrainingSet TrainingSet::subset(const std::vector<int>& indices) const {
  TrainingSet out;
  out.input_norm = input_norm;
  out.target_norm = target_norm;
  out.output = output;
  for (const int i : indices) {
    out.inputs.push_back(inputs.at(static_cast<std::size_t>(i)));
    out.targets.push_back(targets.at(static_cast<std::size_t>(i)));
  }
  return out;
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::pair<VectorXd, VectorXd> lstm_step(const VectorXd& x, const VectorXd& h, const VectorXd& c,
                                        const LSTMParams& p) {
  VectorXd xhat(h.size() + x.size());
  xhat << h, x;
  const VectorXd f = sigmoid(p.W_f * xhat + p.b_f);
  const VectorXd u = sigmoid(p.W_u * xhat + p.b_u);
  const VectorXd o = sigmoid(p.W_o * xhat + p.b_o);
  const VectorXd cand = tanh_of(p.W_c * xhat + p.b_c);
  VectorXd c_next = f.cwiseProduct(c) + u.cwiseProduct(cand);
  VectorXd h_next = o.cwiseProduct(tanh_of(c_next));
  return {std::move(h_next), std::move(c_next)};
}

VectorXd forward_normalized(const Parameters& params, const MatrixXd& window) {
  const int H = params.lstm.hidden_size();
  VectorXd h = VectorXd::Zero(H);
  VectorXd c = VectorXd::Zero(H);
  for (Eigen::Index t = 0; t < window.rows(); ++t) {
    std::tie(h, c) = lstm_step(window.row(t).transpose(), h, c, params.lstm);
  }
  VectorXd z = h;
  for (const auto& layer : params.dense.layers) {
    z = layer.W * z + layer.b;
    if (layer.activation == Activation::Tanh) z = tanh_of(z);
  }
  return z;
}

VectorXd forward(const Model& model, const MatrixXd& window) {
  if (window.cols() != model.input_size() || window.rows() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "window shape does not match the model");
  }
  MatrixXd normalized(window.rows(), window.cols());
  for (Eigen::Index t = 0; t < window.rows(); ++t) {
    normalized.row(t) = model.input_norm.normalize(window.row(t).transpose()).transpose();
  }
  VectorXd out = model.target_norm.denormalize(forward_normalized(model.params, normalized));
  if (model.config.output == OutputMode::Increment) out += window.row(window.rows() - 1).transpose();
  return out;
}

double loss_mse(const VectorXd& pred, const VectorXd& target) {
  if (pred.size() != target.size() || pred.size() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "loss operands differ in length");
  }
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double loss_and_gradient(const Parameters& params, const TrainingSet& batch, Parameters* grad) {
  const int B = batch.size();
  if (B == 0) throw Error(ErrorKind::DimensionMismatch, "empty training batch");
  const int lb = batch.lookback();
  const int M = batch.features();
  const int H = params.lstm.hidden_size();
  const auto& P = params.lstm;

  struct StepCache {
    MatrixXd xhat, f, u, o, g, c_prev, tc;
  };
  std::vector<StepCache> cache(static_cast<std::size_t>(lb));

  MatrixXd h = MatrixXd::Zero(H, B);
  MatrixXd c = MatrixXd::Zero(H, B);
  for (int t = 0; t < lb; ++t) {
    auto& s = cache[static_cast<std::size_t>(t)];
    s.xhat.resize(H + M, B);
    s.xhat.topRows(H) = h;
    for (int b = 0; b < B; ++b) {
      s.xhat.block(H, b, M, 1) = batch.inputs[static_cast<std::size_t>(b)].row(t).transpose();
    }
    s.f = sigmoid(affine(P.W_f, P.b_f, s.xhat));
    s.u = sigmoid(affine(P.W_u, P.b_u, s.xhat));
    s.o = sigmoid(affine(P.W_o, P.b_o, s.xhat));
    s.g = tanh_of(affine(P.W_c, P.b_c, s.xhat));
    s.c_prev = c;
    c = s.f.cwiseProduct(c) + s.u.cwiseProduct(s.g);
    s.tc = tanh_of(c);
    h = s.o.cwiseProduct(s.tc);
  }

  const auto& layers = params.dense.layers;
  std::vector<MatrixXd> z;
  z.reserve(layers.size() + 1);
  z.push_back(h);
  for (const auto& layer : layers) {
    MatrixXd a = affine(layer.W, layer.b, z.back());
    z.push_back(layer.activation == Activation::Tanh ? tanh_of(a) : a);
  }

  MatrixXd target(M, B);
  for (int b = 0; b < B; ++b) target.col(b) = batch.targets[static_cast<std::size_t>(b)];
  const MatrixXd diff = z.back() - target;
  const double norm = static_cast<double>(M) * static_cast<double>(B);
  const double loss = diff.squaredNorm() / norm;
  if (grad == nullptr) return loss;

  *grad = Parameters::zeros_like(params);
  MatrixXd dz = (2.0 / norm) * diff;
  for (std::size_t l = layers.size(); l-- > 0;) {
    MatrixXd da = dz;
    if (layers[l].activation == Activation::Tanh) {
      da.array() *= (1.0 - z[l + 1].array().square());
    }
    grad->dense.layers[l].W = da * z[l].transpose();
    grad->dense.layers[l].b = da.rowwise().sum();
    dz = layers[l].W.transpose() * da;
  }

  auto& G = grad->lstm;
  MatrixXd dh = dz;
  MatrixXd dc = MatrixXd::Zero(H, B);
  for (int t = lb - 1; t >= 0; --t) {
    const auto& s = cache[static_cast<std::size_t>(t)];
    const MatrixXd d_o = dh.cwiseProduct(s.tc);
    dc.array() += dh.array() * s.o.array() * (1.0 - s.tc.array().square());
    const MatrixXd d_f = dc.cwiseProduct(s.c_prev);
    const MatrixXd d_u = dc.cwiseProduct(s.g);
    const MatrixXd d_g = dc.cwiseProduct(s.u);
    const MatrixXd dc_prev = dc.cwiseProduct(s.f);

    const MatrixXd da_f = (d_f.array() * s.f.array() * (1.0 - s.f.array())).matrix();
    const MatrixXd da_u = (d_u.array() * s.u.array() * (1.0 - s.u.array())).matrix();
    const MatrixXd da_o = (d_o.array() * s.o.array() * (1.0 - s.o.array())).matrix();
    const MatrixXd da_c = (d_g.array() * (1.0 - s.g.array().square())).matrix();

    G.W_f += da_f * s.xhat.transpose();
    G.W_u += da_u * s.xhat.transpose();
    G.W_o += da_o * s.xhat.transpose();
    G.W_c += da_c * s.xhat.transpose();
    G.b_f += da_f.rowwise().sum();
    G.b_u += da_u.rowwise().sum();
    G.b_o += da_o.rowwise().sum();
    G.b_c += da_c.rowwise().sum();

    const MatrixXd dxhat = P.W_f.transpose() * da_f + P.W_u.transpose() * da_u +
                           P.W_o.transpose() * da_o + P.W_c.transpose() * da_c;
    dh = dxhat.topRows(H);
    dc = dc_prev;
  }
  return loss;
}

Parameters gradient(const Model& model, const TrainingSet& batch) {
  Parameters g;
  loss_and_gradient(model.params, batch, &g);
  return g;
}

AdamState AdamState::zeros(std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  return {VectorXd::Zero(size), VectorXd::Zero(size)};
}

void adam_step(VectorXd& theta, const VectorXd& grad, AdamState& state, const AdamHyper& hyper,
               long t) {
  if (t < 1) throw Error(ErrorKind::Config, "Adam step index starts at 1");
  if (grad.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size()) {
    throw Error(ErrorKind::DimensionMismatch, "Adam operands differ in length");
  }
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  const auto m_hat = state.m.array() / bc1;
  const auto v_hat = state.v.array() / bc2;
  theta.array() -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.eps);
}

void adam_step(Parameters& params, const Parameters& grads, AdamState& state,
               const AdamHyper& hyper, long t) {
  VectorXd theta = flatten(params);
  adam_step(theta, flatten(grads), state, hyper, t);
  unflatten(theta, params);
}

TrainingSet build_training_set(const obs::ObservationSeries& series, int k_off, int lb,
                               OutputMode output) {
  if (lb < 1 || lb > k_off - 1) {
    throw Error(ErrorKind::LookbackTooLarge,
                "lookback " + std::to_string(lb) + " needs 1 <= lb <= k_off - 1 = " +
                    std::to_string(k_off - 1));
  }
  if (k_off > series.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "series has " + std::to_string(series.rows()) +
                                                  " rows, k_off = " + std::to_string(k_off));
  }
  const MatrixXd rows = series.values.topRows(k_off);
  TrainingSet tset;
  tset.output = output;
  tset.input_norm = Normalization::fit(rows);
  const int pairs = k_off - lb;
  if (output == OutputMode::Absolute) {
    tset.target_norm = tset.input_norm;
  } else {
    tset.target_norm = Normalization::fit(rows.bottomRows(k_off - 1) - rows.topRows(k_off - 1));
  }
  for (int i = 0; i < pairs; ++i) {
    MatrixXd window(lb, rows.cols());
    for (int t = 0; t < lb; ++t) {
      window.row(t) = tset.input_norm.normalize(rows.row(i + t).transpose()).transpose();
    }
    VectorXd target = rows.row(i + lb).transpose();
    if (output == OutputMode::Increment) target -= rows.row(i + lb - 1).transpose();
    tset.inputs.push_back(std::move(window));
    tset.targets.push_back(tset.target_norm.normalize(target));
  }
  return tset;
}

Parameters initialize(int input_size, const ModelConfig& config) {
  if (config.hidden_size < 1 || input_size < 1) {
    throw Error(ErrorKind::Config, "network sizes must be positive");
  }
  Parameters p;
  p.lstm = LSTMParams::zeros(input_size, config.hidden_size);
  int in = config.hidden_size;
  for (const int width : config.dense_widths) {
    if (width < 1) throw Error(ErrorKind::Config, "dense widths must be positive");
    p.dense.layers.push_back({MatrixXd::Zero(width, in), VectorXd::Zero(width), Activation::Tanh});
    in = width;
  }
  p.dense.layers.push_back(
      {MatrixXd::Zero(input_size, in), VectorXd::Zero(input_size), Activation::Identity});

  SplitMix64 rng(config.seed);
  auto fill = [&](double* data, Eigen::Index size, double s) {
    for (Eigen::Index i = 0; i < size; ++i) data[i] = s * (2.0 * rng.uniform() - 1.0);
  };
  const double s_lstm = 1.0 / std::sqrt(static_cast<double>(config.hidden_size + input_size));
  for (auto* m : {&p.lstm.W_f, &p.lstm.W_u, &p.lstm.W_o, &p.lstm.W_c}) fill(m->data(), m->size(), s_lstm);
  for (auto* v : {&p.lstm.b_f, &p.lstm.b_u, &p.lstm.b_o, &p.lstm.b_c}) fill(v->data(), v->size(), s_lstm);
  for (auto& layer : p.dense.layers) {
    const double s = 1.0 / std::sqrt(static_cast<double>(layer.W.cols()));
    fill(layer.W.data(), layer.W.size(), s);
    fill(layer.b.data(), layer.b.size(), s);
  }
  return p;
}

Model train(const TrainingSet& tset, const ModelConfig& config, TrainingLog* log) {
  if (!(config.learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning rate must be positive");
  if (config.epochs < 0) throw Error(ErrorKind::Config, "epoch count must be nonnegative");
  if (tset.size() == 0) throw Error(ErrorKind::DimensionMismatch, "empty training set");
  if (tset.lookback() != config.lookback) {
    throw Error(ErrorKind::Config, "training windows do not match the configured lookback");
  }
  Model model;
  model.config = config;
  model.config.output = tset.output;
  model.input_norm = tset.input_norm;
  model.target_norm = tset.target_norm;
  model.params = initialize(tset.features(), config);

  AdamHyper hyper;
  hyper.learning_rate = config.learning_rate;
  VectorXd theta = flatten(model.params);
  AdamState state = AdamState::zeros(static_cast<std::size_t>(theta.size()));
  Parameters grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double loss = loss_and_gradient(model.params, tset, &grad);
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::DivergedLoss, "loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (log != nullptr) log->loss.push_back(loss);
    adam_step(theta, flatten(grad), state, hyper, epoch + 1);
    unflatten(theta, model.params);
  }
  model.final_loss = loss_and_gradient(model.params, tset, nullptr);
  if (!std::isfinite(model.final_loss)) {
    throw Error(ErrorKind::DivergedLoss, "final loss is non-finite");
  }
  if (log != nullptr) log->loss.push_back(model.final_loss);
  return model;
}

std::vector<VectorXd> rollout(const Model& model, const MatrixXd& seed_window, int n_steps) {
  if (n_steps < 1) throw Error(ErrorKind::Config, "rollout needs at least one step");
  if (seed_window.rows() != model.config.lookback) {
    throw Error(ErrorKind::DimensionMismatch, "seed window must have lb rows");
  }
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(n_steps));
  MatrixXd window = seed_window;
  const Eigen::Index lb = window.rows();
  for (int i = 0; i < n_steps; ++i) {
    VectorXd next = forward(model, window);
    if (lb > 1) window.topRows(lb - 1) = window.bottomRows(lb - 1).eval();
    window.row(lb - 1) = next.transpose();
    out.push_back(std::move(next));
  }
  return out;
}

void write_checkpoint(std::ostream& os, const Model& model) {
  const auto& p = model.params;
  bin::write_magic(os, kCheckpointMagic);
  bin::write<std::uint32_t>(os, kCheckpointVersion);
  bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(p.lstm.input_size()));
  bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(p.lstm.hidden_size()));
  bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(model.config.lookback));
  bin::write<std::uint32_t>(os, model.config.output == OutputMode::Increment ? 1U : 0U);
  bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(p.dense.layers.size()));
  for (const auto& layer : p.dense.layers) {
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(layer.W.rows()));
    bin::write<std::uint32_t>(os, layer.activation == Activation::Tanh ? 1U : 0U);
  }
  const VectorXd theta = flatten(p);
  for (Eigen::Index i = 0; i < theta.size(); ++i) bin::write<double>(os, theta[i]);
  for (const auto* n : {&model.input_norm, &model.target_norm}) {
    for (Eigen::Index i = 0; i < n->mean.size(); ++i) bin::write<double>(os, n->mean[i]);
    for (Eigen::Index i = 0; i < n->scale.size(); ++i) bin::write<double>(os, n->scale[i]);
  }
  bin::write<double>(os, model.config.learning_rate);
  bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(model.config.epochs));
  bin::write<std::uint64_t>(os, model.config.seed);
  bin::write<double>(os, model.final_loss);
  if (!os) throw Error(ErrorKind::Io, "failed to write checkpoint");
}

Model read_checkpoint(std::istream& is) {
  bin::expect_magic(is, kCheckpointMagic);
  if (bin::read<std::uint32_t>(is) != kCheckpointVersion) {
    throw Error(ErrorKind::Io, "unsupported checkpoint version");
  }
  Model model;
  const int M = static_cast<int>(bin::read<std::uint32_t>(is));
  const int H = static_cast<int>(bin::read<std::uint32_t>(is));
  model.config.lookback = static_cast<int>(bin::read<std::uint32_t>(is));
  model.config.hidden_size = H;
  model.config.output = bin::read<std::uint32_t>(is) == 1U ? OutputMode::Increment : OutputMode::Absolute;
  const auto n_layers = bin::read<std::uint32_t>(is);
  if (n_layers < 1 || n_layers > 64 || M < 1 || H < 1) {
    throw Error(ErrorKind::Io, "checkpoint header is corrupt");
  }
  model.params.lstm = LSTMParams::zeros(M, H);
  model.config.dense_widths.clear();
  int in = H;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const int width = static_cast<int>(bin::read<std::uint32_t>(is));
    const auto act = bin::read<std::uint32_t>(is) == 1U ? Activation::Tanh : Activation::Identity;
    model.params.dense.layers.push_back({MatrixXd::Zero(width, in), VectorXd::Zero(width), act});
    if (l + 1 < n_layers) model.config.dense_widths.push_back(width);
    in = width;
  }
  if (in != M) throw Error(ErrorKind::Io, "checkpoint output width does not match its input");
  VectorXd theta(static_cast<Eigen::Index>(parameter_count(model.params)));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = bin::read<double>(is);
  unflatten(theta, model.params);
  for (auto* n : {&model.input_norm, &model.target_norm}) {
    n->mean.resize(M);
    n->scale.resize(M);
    for (Eigen::Index i = 0; i < M; ++i) n->mean[i] = bin::read<double>(is);
    for (Eigen::Index i = 0; i < M; ++i) n->scale[i] = bin::read<double>(is);
  }
  model.config.learning_rate = bin::read<double>(is);
  model.config.epochs = static_cast<int>(bin::read<std::uint32_t>(is));
  model.config.seed = bin::read<std::uint64_t>(is);
  model.final_loss = bin::read<double>(is);
  return model;
}

}  // namespace svda::ml
