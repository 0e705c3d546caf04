// Copyright 2026 The argus-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "argus/embedding.hpp"
#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/parallel.hpp"
#include "argus/random.hpp"
#include "argus/rps.hpp"

namespace argus {

enum class ProbeFamily { ridge, mlp, baseline_all_one, baseline_all_zero };

inline std::string_view to_string(ProbeFamily f) {
  switch (f) {
    case ProbeFamily::ridge: return "ridge";
    case ProbeFamily::mlp: return "mlp";
    case ProbeFamily::baseline_all_one: return "baseline-all-one";
    case ProbeFamily::baseline_all_zero: return "baseline-all-zero";
  }
  return "ridge";
}

inline ProbeFamily parse_probe_family(std::string_view s) {
  if (s == "ridge") return ProbeFamily::ridge;
  if (s == "mlp") return ProbeFamily::mlp;
  if (s == "baseline-all-one") return ProbeFamily::baseline_all_one;
  if (s == "baseline-all-zero") return ProbeFamily::baseline_all_zero;
  fail(ErrorKind::validation, "unknown probe family '" + std::string(s) + "'");
}

inline bool is_baseline(ProbeFamily f) {
  return f == ProbeFamily::baseline_all_one || f == ProbeFamily::baseline_all_zero;
}

/// Rows of X are embedding vectors.
inline Eigen::MatrixXd feature_matrix(std::span<const EmbeddingVector> xs) {
  if (xs.empty()) return {};
  const auto d = static_cast<Eigen::Index>(xs.front().dim());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].dim() != static_cast<std::size_t>(d)) fail(ErrorKind::dimension, "feature rows differ in dim");
    X.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(xs[i].values().data(), d);
  }
  return X;
}

inline Eigen::VectorXd target_vector(std::span<const double> ys) {
  return Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
}

// ---------------------------------------------------------------------------
// Feature standardization

struct Standardizer {
  bool enabled = false;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& X, bool enabled) {
    Standardizer s;
    s.enabled = enabled;
    if (!enabled) return s;
    s.mean = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var = (X.col(j).array() - s.mean[j]).square().mean();
      s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    if (!enabled) return X;
    Eigen::MatrixXd out = X.rowwise() - mean.transpose();
    return out.array().rowwise() / scale.transpose().array();
  }
};

// ---------------------------------------------------------------------------
// MLP

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// ReLU hidden layers and a single sigmoid output unit.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }
};

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Raw network output in (0,1) for each row of X.
inline Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd a = X.transpose();  // features x batch
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Eigen::MatrixXd z = (p.layers[l].weights * a).colwise() + p.layers[l].bias;
    if (l + 1 < p.layers.size()) a = z.cwiseMax(0.0);
    else a = z.unaryExpr([](double v) { return sigmoid(v); });
  }
  return a.row(0).transpose();
}

struct MlpGradient {
  double loss = 0.0;  // mean squared error over the batch
  std::vector<DenseLayer> grads;
};

/// Loss and analytic gradient of mean squared error. `masks`, when given,
/// holds one inverted-dropout mask (units x batch) per hidden layer.
inline MlpGradient mlp_loss_gradient(const MlpParams& p, const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y,
                                     const std::vector<Eigen::MatrixXd>* masks = nullptr) {
  const auto L = p.layers.size();
  const double n = static_cast<double>(X.rows());
  std::vector<Eigen::MatrixXd> acts(L + 1);
  std::vector<Eigen::MatrixXd> pre(L);
  acts[0] = X.transpose();
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = (p.layers[l].weights * acts[l]).colwise() + p.layers[l].bias;
    if (l + 1 < L) {
      acts[l + 1] = pre[l].cwiseMax(0.0);
      if (masks) acts[l + 1] = acts[l + 1].cwiseProduct((*masks)[l]);
    } else {
      acts[l + 1] = pre[l].unaryExpr([](double v) { return sigmoid(v); });
    }
  }
  const Eigen::RowVectorXd out = acts[L].row(0);
  const Eigen::RowVectorXd err = out - y.transpose();
  MlpGradient g;
  g.loss = err.squaredNorm() / n;
  g.grads.resize(L);
  // dLoss/dz at the output: 2/n * err * s(1-s)
  Eigen::MatrixXd delta = (2.0 / n) * err.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix()));
  for (std::size_t li = L; li-- > 0;) {
    g.grads[li].weights = delta * acts[li].transpose();
    g.grads[li].bias = delta.rowwise().sum();
    if (li == 0) break;
    Eigen::MatrixXd back = p.layers[li].weights.transpose() * delta;
    if (masks) back = back.cwiseProduct((*masks)[li - 1]);
    delta = back.cwiseProduct((pre[li - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

inline MlpParams init_mlp(std::size_t input_dim, std::size_t width, std::size_t depth, Rng& rng) {
  MlpParams p;
  std::size_t fan_in = input_dim;
  for (std::size_t l = 0; l <= depth; ++l) {
    const std::size_t fan_out = l == depth ? 1 : width;
    const double sd = l == depth ? std::sqrt(1.0 / static_cast<double>(fan_in))
                                 : std::sqrt(2.0 / static_cast<double>(fan_in));
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = rng.normal(0.0, sd);
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out));
    p.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Probe model

struct TrainingMeta {
  std::uint64_t seed = 0;
  io::json hyperparameters = io::json::object();
  double validation_rmse = std::numeric_limits<double>::quiet_NaN();
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

/// Predictor from embedding to an RPS estimate, clamped to [0, 1].
struct ProbeModel {
  ProbeFamily family = ProbeFamily::ridge;
  std::size_t dim = 0;
  Standardizer standardizer;
  Eigen::VectorXd ridge_weights;
  double ridge_intercept = 0.0;
  MlpParams mlp;
  TrainingMeta meta;

  Eigen::VectorXd predict_raw(const Eigen::MatrixXd& X) const {
    if (X.cols() != static_cast<Eigen::Index>(dim))
      fail(ErrorKind::dimension, "probe expects dim " + std::to_string(dim) + ", got " +
                                     std::to_string(X.cols()));
    switch (family) {
      case ProbeFamily::baseline_all_one: return Eigen::VectorXd::Ones(X.rows());
      case ProbeFamily::baseline_all_zero: return Eigen::VectorXd::Zero(X.rows());
      case ProbeFamily::ridge: {
        Eigen::VectorXd out = standardizer.apply(X) * ridge_weights;
        return out.array() + ridge_intercept;
      }
      case ProbeFamily::mlp: return mlp_forward(mlp, standardizer.apply(X));
    }
    return Eigen::VectorXd::Zero(X.rows());
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    return predict_raw(X).cwiseMax(0.0).cwiseMin(1.0);
  }

  double predict(const EmbeddingVector& v) const {
    const Eigen::Map<const Eigen::RowVectorXd> row(v.values().data(), static_cast<Eigen::Index>(v.dim()));
    return predict(Eigen::MatrixXd(row))[0];
  }
};

inline ProbeModel make_baseline(ProbeFamily family, std::size_t dim) {
  if (!is_baseline(family)) fail(ErrorKind::validation, "not a baseline family");
  ProbeModel m;
  m.family = family;
  m.dim = dim;
  return m;
}

// ---------------------------------------------------------------------------
// Ridge

/// Minimizes ||Xw + b - y||^2 + alpha ||w||^2 with an unpenalized intercept
/// by centering, then solving the normal equations (primal when n >= d,
/// dual when n < d).
inline ProbeModel fit_ridge(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y, double alpha,
                            bool standardize = false) {
  const auto n = X_raw.rows();
  const auto d = X_raw.cols();
  if (n < 2 || n != y.size()) fail(ErrorKind::validation, "ridge needs |X| = |y| >= 2");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail(ErrorKind::validation, "ridge alpha must be >= 0");

  ProbeModel m;
  m.family = ProbeFamily::ridge;
  m.dim = static_cast<std::size_t>(d);
  m.standardizer = Standardizer::fit(X_raw, standardize);
  const Eigen::MatrixXd X = m.standardizer.apply(X_raw);
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  if (alpha == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
    if (qr.rank() < d)
      fail(ErrorKind::singular, "design is rank deficient (rank " + std::to_string(qr.rank()) +
                                    " < " + std::to_string(d) + "); use a positive alpha");
    m.ridge_weights = qr.solve(yc);
  } else if (n >= d) {
    Eigen::MatrixXd A = Xc.transpose() * Xc;
    A.diagonal().array() += alpha;
    m.ridge_weights = A.ldlt().solve(Xc.transpose() * yc);
  } else {
    Eigen::MatrixXd K = Xc * Xc.transpose();
    K.diagonal().array() += alpha;
    m.ridge_weights = Xc.transpose() * K.ldlt().solve(yc);
  }
  m.ridge_intercept = y_mean - x_mean.dot(m.ridge_weights);
  m.meta.hyperparameters = {{"alpha", alpha}, {"standardize", standardize}};
  return m;
}

// ---------------------------------------------------------------------------
// MLP training

struct MlpConfig {
  std::size_t hidden_width = 256;
  std::size_t depth = 1;
  double dropout = 0.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  bool standardize = false;
  std::uint64_t seed = 0;
};

inline io::json to_json(const MlpConfig& c) {
  return {{"hidden_width", c.hidden_width}, {"depth", c.depth},          {"dropout", c.dropout},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
          {"patience", c.patience},         {"standardize", c.standardize}};
}

inline double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

/// Adam on mean squared error with inverted dropout. Early stopping tracks
/// validation RMSE (training RMSE when no validation set is given) and keeps
/// the best epoch's weights.
inline ProbeModel fit_mlp(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y, const MlpConfig& cfg,
                          const Eigen::MatrixXd* X_val_raw = nullptr, const Eigen::VectorXd* y_val = nullptr) {
  if (X_raw.rows() < 1 || X_raw.rows() != y.size()) fail(ErrorKind::validation, "MLP needs |X| = |y| >= 1");
  if (cfg.hidden_width < 1 || cfg.depth < 1 || cfg.batch_size < 1)
    fail(ErrorKind::validation, "MLP width, depth and batch must be >= 1");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) fail(ErrorKind::validation, "dropout must be in [0, 1)");

  ProbeModel m;
  m.family = ProbeFamily::mlp;
  m.dim = static_cast<std::size_t>(X_raw.cols());
  m.standardizer = Standardizer::fit(X_raw, cfg.standardize);
  const Eigen::MatrixXd X = m.standardizer.apply(X_raw);
  const bool has_val = X_val_raw && y_val && X_val_raw->rows() > 0;
  const Eigen::MatrixXd Xv = has_val ? m.standardizer.apply(*X_val_raw) : X;
  const Eigen::VectorXd& yv = has_val ? *y_val : y;

  Rng rng(derive_seed(cfg.seed, "mlp-init"));
  MlpParams params = init_mlp(m.dim, cfg.hidden_width, cfg.depth, rng);
  Rng batch_rng(derive_seed(cfg.seed, "mlp-batches"));

  std::vector<DenseLayer> m1, m2;
  for (const auto& l : params.layers) {
    m1.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  m2 = m1;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), 0);

  MlpParams best = params;
  double best_rmse = rmse(mlp_forward(params, Xv), yv);
  std::size_t best_epoch = 0, since_best = 0, epoch = 0;
  const double keep = 1.0 - cfg.dropout;

  for (epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    batch_rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto bs = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd Xb(bs, X.cols());
      Eigen::VectorXd yb(bs);
      for (Eigen::Index r = 0; r < bs; ++r) {
        Xb.row(r) = X.row(order[start + static_cast<std::size_t>(r)]);
        yb[r] = y[order[start + static_cast<std::size_t>(r)]];
      }
      std::vector<Eigen::MatrixXd> masks;
      if (cfg.dropout > 0.0) {
        for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
          Eigen::MatrixXd mask(params.layers[l].weights.rows(), bs);
          for (Eigen::Index i = 0; i < mask.size(); ++i)
            mask.data()[i] = batch_rng.uniform() < keep ? 1.0 / keep : 0.0;
          masks.push_back(std::move(mask));
        }
      }
      auto g = mlp_loss_gradient(params, Xb, yb, cfg.dropout > 0.0 ? &masks : nullptr);
      ++step;
      if (!std::isfinite(g.loss))
        fail(ErrorKind::divergence, "non-finite loss at step " + std::to_string(step));
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        m1[l].weights = beta1 * m1[l].weights + (1 - beta1) * g.grads[l].weights;
        m2[l].weights = beta2 * m2[l].weights + (1 - beta2) * g.grads[l].weights.cwiseAbs2();
        m1[l].bias = beta1 * m1[l].bias + (1 - beta1) * g.grads[l].bias;
        m2[l].bias = beta2 * m2[l].bias + (1 - beta2) * g.grads[l].bias.cwiseAbs2();
        params.layers[l].weights.array() -= cfg.learning_rate * (m1[l].weights.array() / c1) /
                                            ((m2[l].weights.array() / c2).sqrt() + eps);
        params.layers[l].bias.array() -=
            cfg.learning_rate * (m1[l].bias.array() / c1) / ((m2[l].bias.array() / c2).sqrt() + eps);
      }
    }
    const double r = rmse(mlp_forward(params, Xv), yv);
    if (!std::isfinite(r)) fail(ErrorKind::divergence, "non-finite validation RMSE at step " + std::to_string(step));
    if (r < best_rmse) {
      best_rmse = r;
      best = params;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      m.meta.early_stopped = true;
      break;
    }
  }
  m.mlp = std::move(best);
  m.meta.seed = cfg.seed;
  m.meta.hyperparameters = to_json(cfg);
  m.meta.validation_rmse = best_rmse;
  m.meta.epochs_run = std::min(epoch, cfg.max_epochs);
  m.meta.best_epoch = best_epoch;
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation

struct ProbeReport {
  double rmse = 0.0;
  double mae = 0.0;
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  double macro_f1 = 0.0;
  double macro_recall = 0.0;
  double macro_precision = 0.0;
  double weighted_precision = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<double> residuals;  // true - predicted
};

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// 1-based ranks, ties share the average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

struct BandMetrics {
  double macro_f1 = 0, macro_recall = 0, macro_precision = 0;
  double weighted_precision = 0, weighted_f1 = 0, accuracy = 0;
};

/// Three-class scores over banded values. Macro averages run over bands that
/// occur in either the truth or the predictions; an undefined precision or
/// recall counts as 0.
inline BandMetrics band_metrics(std::span<const Band> truth, std::span<const Band> pred) {
  std::array<std::size_t, 3> tp{}, fp{}, fn{}, support{};
  std::array<bool, 3> seen{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(pred[i]);
    seen[t] = seen[p] = true;
    ++support[t];
    if (t == p) {
      ++tp[t];
      ++correct;
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  BandMetrics m;
  const double n = static_cast<double>(truth.size());
  std::size_t classes = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double prec = tp[c] + fp[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
    const double rec = tp[c] + fn[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]) : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    m.weighted_precision += prec * static_cast<double>(support[c]) / n;
    m.weighted_f1 += f1 * static_cast<double>(support[c]) / n;
    if (!seen[c]) continue;
    ++classes;
    m.macro_precision += prec;
    m.macro_recall += rec;
    m.macro_f1 += f1;
  }
  m.macro_precision /= static_cast<double>(classes);
  m.macro_recall /= static_cast<double>(classes);
  m.macro_f1 /= static_cast<double>(classes);
  m.accuracy = static_cast<double>(correct) / n;
  return m;
}

inline ProbeReport evaluate_predictions(std::span<const double> pred, std::span<const double> truth) {
  if (truth.empty() || truth.size() != pred.size()) fail(ErrorKind::validation, "empty or mismatched test set");
  ProbeReport r;
  const double n = static_cast<double>(truth.size());
  double se = 0.0, ae = 0.0;
  std::vector<Band> tb, pb;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double res = truth[i] - pred[i];
    r.residuals.push_back(res);
    se += res * res;
    ae += std::abs(res);
    tb.push_back(band_of(truth[i]));
    pb.push_back(band_of(pred[i]));
  }
  r.rmse = std::sqrt(se / n);
  r.mae = ae / n;
  r.pearson_r = pearson(truth, pred);
  r.spearman_rho = spearman(truth, pred);
  const auto bm = band_metrics(tb, pb);
  r.macro_f1 = bm.macro_f1;
  r.macro_recall = bm.macro_recall;
  r.macro_precision = bm.macro_precision;
  r.weighted_precision = bm.weighted_precision;
  r.weighted_f1 = bm.weighted_f1;
  r.accuracy = bm.accuracy;
  return r;
}

inline ProbeReport evaluate_probe(const ProbeModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() == 0) fail(ErrorKind::validation, "empty test set");
  const Eigen::VectorXd pred = model.predict(X);
  return evaluate_predictions(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                              std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

// ---------------------------------------------------------------------------
// Splits and sweeps

struct DataSplit {
  std::vector<std::size_t> train, validation, test;
};

/// Seeded shuffle into train/validation/test. Validation and test each get
/// at least one item when there are three or more.
inline DataSplit make_split(std::size_t n, std::uint64_t seed, double train_frac = 0.7,
                            double val_frac = 0.15) {
  if (train_frac <= 0 || val_frac < 0 || train_frac + val_frac > 1.0)
    fail(ErrorKind::validation, "invalid split proportions");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(idx.begin(), idx.end());
  auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
  if (n >= 3) {
    n_val = std::max<std::size_t>(n_val, 1);
    n_train = std::min(n_train, n - n_val - 1);
  }
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  DataSplit s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                      idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return s;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline Eigen::VectorXd take_rows(const Eigen::VectorXd& y, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(rows[i])];
  return out;
}

/// One grid cell.
struct ProbeSpec {
  ProbeFamily family = ProbeFamily::ridge;
  double alpha = 1.0;
  bool standardize = false;
  MlpConfig mlp;

  std::string describe() const {
    switch (family) {
      case ProbeFamily::ridge:
        return "alpha=" + io::format_double(alpha) + ";standardize=" + (standardize ? "1" : "0");
      case ProbeFamily::mlp:
        return "width=" + std::to_string(mlp.hidden_width) + ";depth=" + std::to_string(mlp.depth) +
               ";dropout=" + io::format_double(mlp.dropout) + ";lr=" + io::format_double(mlp.learning_rate) +
               ";batch=" + std::to_string(mlp.batch_size) + ";standardize=" + (mlp.standardize ? "1" : "0");
      default: return "";
    }
  }
};

struct SweepEntry {
  ProbeSpec spec;
  double validation_rmse = std::numeric_limits<double>::quiet_NaN();
  std::optional<ProbeReport> test;
  std::string status = "ok";
};

struct SweepResult {
  ProbeModel best;
  std::size_t best_index = 0;
  std::vector<SweepEntry> entries;
};

inline ProbeModel fit_spec(const ProbeSpec& spec, const Eigen::MatrixXd& Xtr, const Eigen::VectorXd& ytr,
                           const Eigen::MatrixXd& Xva, const Eigen::VectorXd& yva) {
  switch (spec.family) {
    case ProbeFamily::ridge: return fit_ridge(Xtr, ytr, spec.alpha, spec.standardize);
    case ProbeFamily::mlp: {
      MlpConfig cfg = spec.mlp;
      if (spec.standardize) cfg.standardize = true;
      return fit_mlp(Xtr, ytr, cfg, Xva.rows() ? &Xva : nullptr, yva.size() ? &yva : nullptr);
    }
    default: return make_baseline(spec.family, static_cast<std::size_t>(Xtr.cols()));
  }
}

/// Fits every grid cell on the training split, scores validation RMSE and
/// returns the learned model with the lowest one (ties: earliest cell).
/// Baseline cells are evaluated for the table but never selected.
inline SweepResult sweep_and_select(std::span<const ProbeSpec> grid, const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& y, const DataSplit& split,
                                    std::size_t workers = 1) {
  if (grid.empty()) fail(ErrorKind::validation, "empty probe grid");
  if (split.train.size() < 2) fail(ErrorKind::validation, "training split too small");
  const auto Xtr = take_rows(X, split.train);
  const auto ytr = take_rows(y, split.train);
  const auto& val_rows = split.validation.empty() ? split.train : split.validation;
  const auto Xva = take_rows(X, val_rows);
  const auto yva = take_rows(y, val_rows);
  const auto Xte = take_rows(X, split.test);
  const auto yte = take_rows(y, split.test);

  std::vector<SweepEntry> entries(grid.size());
  std::vector<std::optional<ProbeModel>> models(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    entries[i].spec = grid[i];
    try {
      auto model = fit_spec(grid[i], Xtr, ytr, Xva, yva);
      const Eigen::VectorXd pv = model.predict(Xva);
      entries[i].validation_rmse = rmse(pv, yva);
      model.meta.validation_rmse = entries[i].validation_rmse;
      if (Xte.rows() > 0) entries[i].test = evaluate_probe(model, Xte, yte);
      models[i] = std::move(model);
    } catch (const Error& e) {
      entries[i].status = e.what();
    }
  });

  SweepResult out;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!models[i] || is_baseline(grid[i].family)) continue;
    if (!best || entries[i].validation_rmse < entries[*best].validation_rmse) best = i;
  }
  if (!best) fail(ErrorKind::sweep_failure, "every probe candidate failed");
  out.best = std::move(*models[*best]);
  out.best_index = *best;
  out.entries = std::move(entries);
  return out;
}

inline std::string sweep_table_csv(std::span<const SweepEntry> entries) {
  io::CsvWriter w({"family", "params", "val_rmse", "rmse", "mae", "pearson_r", "spearman_rho", "macro_f1",
                   "macro_recall", "macro_precision", "weighted_precision", "weighted_f1", "accuracy", "status"});
  for (const auto& e : entries) {
    std::vector<std::string> row{std::string(to_string(e.spec.family)), e.spec.describe(),
                                 io::format_double(e.validation_rmse)};
    if (e.test) {
      const auto& t = *e.test;
      for (double v : {t.rmse, t.mae, t.pearson_r, t.spearman_rho, t.macro_f1, t.macro_recall, t.macro_precision,
                       t.weighted_precision, t.weighted_f1, t.accuracy})
        row.push_back(io::format_double(v));
    } else {
      row.insert(row.end(), 10, "");
    }
    row.push_back(e.status);
    w.row(row);
  }
  return w.str();
}

/// Default ridge grid: alpha in 1e-6 .. 1e3, raw and standardized.
inline std::vector<ProbeSpec> default_ridge_grid() {
  std::vector<ProbeSpec> grid;
  for (int e = -6; e <= 3; ++e) {
    for (bool st : {false, true}) {
      ProbeSpec s;
      s.family = ProbeFamily::ridge;
      s.alpha = std::pow(10.0, e);
      s.standardize = st;
      grid.push_back(s);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline io::json vec_json(const Eigen::VectorXd& v) {
  return io::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd json_vec(const io::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline io::json mat_json(const Eigen::MatrixXd& m) {
  io::json rows = io::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

inline Eigen::MatrixXd json_mat(const io::json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = json_vec(j[r]);
    if (row.size() != cols) fail(ErrorKind::validation, "probe weight matrix is ragged");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

}  // namespace detail

inline io::json to_json(const ProbeModel& m) {
  io::json params = io::json::object();
  if (m.family == ProbeFamily::ridge) {
    params = {{"weights", detail::vec_json(m.ridge_weights)}, {"intercept", m.ridge_intercept}};
  } else if (m.family == ProbeFamily::mlp) {
    io::json layers = io::json::array();
    for (const auto& l : m.mlp.layers)
      layers.push_back({{"weights", detail::mat_json(l.weights)}, {"bias", detail::vec_json(l.bias)}});
    params = {{"layers", layers}};
  }
  io::json st{{"enabled", m.standardizer.enabled}};
  if (m.standardizer.enabled) {
    st["mean"] = detail::vec_json(m.standardizer.mean);
    st["scale"] = detail::vec_json(m.standardizer.scale);
  }
  return {{"format", "argus-probe"},
          {"version", 1},
          {"family", std::string(to_string(m.family))},
          {"dim", m.dim},
          {"clamp", true},
          {"standardization", st},
          {"parameters", params},
          {"training_meta",
           {{"seed", m.meta.seed},
            {"hyperparameters", m.meta.hyperparameters},
            {"validation_rmse", std::isfinite(m.meta.validation_rmse) ? io::json(m.meta.validation_rmse) : io::json()},
            {"epochs_run", m.meta.epochs_run},
            {"best_epoch", m.meta.best_epoch},
            {"early_stopped", m.meta.early_stopped}}}};
}

inline ProbeModel probe_from_json(const io::json& j) {
  if (j.value("format", std::string{}) != "argus-probe") fail(ErrorKind::validation, "not a probe file");
  if (j.value("version", 0) != 1) fail(ErrorKind::validation, "unsupported probe file version");
  ProbeModel m;
  m.family = parse_probe_family(j.at("family").get<std::string>());
  m.dim = j.at("dim").get<std::size_t>();
  const auto d = static_cast<Eigen::Index>(m.dim);
  const auto& st = j.at("standardization");
  m.standardizer.enabled = st.at("enabled").get<bool>();
  if (m.standardizer.enabled) {
    m.standardizer.mean = detail::json_vec(st.at("mean"));
    m.standardizer.scale = detail::json_vec(st.at("scale"));
    if (m.standardizer.mean.size() != d || m.standardizer.scale.size() != d)
      fail(ErrorKind::dimension, "standardization stats do not match probe dim");
  }
  const auto& p = j.at("parameters");
  if (m.family == ProbeFamily::ridge) {
    m.ridge_weights = detail::json_vec(p.at("weights"));
    m.ridge_intercept = p.at("intercept").get<double>();
    if (m.ridge_weights.size() != d) fail(ErrorKind::dimension, "ridge weights do not match probe dim");
  } else if (m.family == ProbeFamily::mlp) {
    Eigen::Index in = d;
    for (const auto& lj : p.at("layers")) {
      DenseLayer l;
      l.weights = detail::json_mat(lj.at("weights"), in);
      l.bias = detail::json_vec(lj.at("bias"));
      if (l.bias.size() != l.weights.rows()) fail(ErrorKind::dimension, "MLP bias does not match layer");
      in = l.weights.rows();
      m.mlp.layers.push_back(std::move(l));
    }
    if (m.mlp.layers.empty() || in != 1) fail(ErrorKind::dimension, "MLP must end in a single output");
  }
  if (j.contains("training_meta")) {
    const auto& t = j.at("training_meta");
    m.meta.seed = t.value("seed", std::uint64_t{0});
    m.meta.hyperparameters = t.value("hyperparameters", io::json::object());
    if (t.contains("validation_rmse") && t.at("validation_rmse").is_number())
      m.meta.validation_rmse = t.at("validation_rmse").get<double>();
    m.meta.epochs_run = t.value("epochs_run", std::size_t{0});
    m.meta.best_epoch = t.value("best_epoch", std::size_t{0});
    m.meta.early_stopped = t.value("early_stopped", false);
  }
  return m;
}

inline void save_probe(const std::filesystem::path& path, const ProbeModel& m) {
  io::write_text(path, to_json(m).dump(2) + "\n");
}

inline ProbeModel load_probe(const std::filesystem::path& path) {
  try {
    return probe_from_json(io::json::parse(io::read_text(path)));
  } catch (const io::json::exception& e) {
    fail(ErrorKind::validation, "malformed probe file '" + path.string() + "': " + e.what());
  }
}

}  // namespace argus
