#include "sdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sdp/rng.hpp"

namespace sdp {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC0 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;

double gelu(double x) {
  const double u = kGeluC0 * (x + kGeluC1 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
  const double u = kGeluC0 * (x + kGeluC1 * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) +
         0.5 * x * (1.0 - th * th) * kGeluC0 * (1.0 + 3.0 * kGeluC1 * x * x);
}

struct LayerNormCache {
  Matrix y;        // normalized rows
  Vector inv_std;  // per row
};

// Row-wise layer norm with population variance.
LayerNormCache layer_norm(const Matrix& x) {
  LayerNormCache c;
  c.y.resize(x.rows(), x.cols());
  c.inv_std.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    c.inv_std(i) = inv;
    c.y.row(i) = (x.row(i).array() - mu) * inv;
  }
  return c;
}

// dL/dx given dL/dy for the row-wise layer norm above.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& c) {
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_dy = dy.row(i).mean();
    const double mean_dyy = (dy.row(i).array() * c.y.row(i).array()).mean();
    dx.row(i) =
        (dy.row(i).array() - mean_dy - c.y.row(i).array() * mean_dyy) * c.inv_std(i);
  }
  return dx;
}

struct EncoderCache {
  Matrix x;
  Matrix a1;
  LayerNormCache ln1;
  Matrix g1;
  Matrix a2;
  LayerNormCache ln2;
  Matrix z;
};

// Row-by-row affine map. Batched GEMM kernels round rows differently
// depending on their position in the batch; evaluating each row as its own
// matrix-vector product keeps every row's result independent of the batch
// it arrived in.
Matrix affine_rows(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix out(x.rows(), w.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out.row(i) = (w * x.row(i).transpose() + b).transpose();
  return out;
}

EncoderCache encode(const MultiTaskModel& m, const Matrix& x) {
  EncoderCache c;
  c.x.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    c.x.row(i) =
        (x.row(i) - m.in_mean.transpose()).cwiseProduct(m.in_scale.transpose());
  c.a1 = affine_rows(c.x, m.w1, m.b1);
  c.ln1 = layer_norm(c.a1);
  c.g1 = c.ln1.y.unaryExpr([](double v) { return gelu(v); });
  c.a2 = affine_rows(c.g1, m.w2, m.b2);
  c.ln2 = layer_norm(c.a2);
  c.z = c.ln2.y.unaryExpr([](double v) { return gelu(v); });
  return c;
}

// Backprop dL/dz through the encoder, accumulating parameter grads.
void encoder_backward(const MultiTaskModel& m, const EncoderCache& c, const Matrix& dz,
                      MultiTaskModel& g) {
  Matrix dn2 = dz.cwiseProduct(c.ln2.y.unaryExpr([](double v) { return gelu_grad(v); }));
  Matrix da2 = layer_norm_backward(dn2, c.ln2);
  g.w2 += da2.transpose() * c.g1;
  g.b2 += da2.colwise().sum().transpose();
  Matrix dg1 = da2 * m.w2;
  Matrix dn1 = dg1.cwiseProduct(c.ln1.y.unaryExpr([](double v) { return gelu_grad(v); }));
  Matrix da1 = layer_norm_backward(dn1, c.ln1);
  g.w1 += da1.transpose() * c.x;
  g.b1 += da1.colwise().sum().transpose();
}

// Softmax rows, numerically shifted.
Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

int argmax_row(const Eigen::RowVectorXd& row) {
  int best = 0;
  for (int j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = j;  // ties keep the lowest index
  return best;
}

}  // namespace

Task task_from_string(const std::string& name) {
  if (name == "detection") return Task::kDetection;
  if (name == "recognition") return Task::kRecognition;
  if (name == "vitals") return Task::kVitals;
  throw ConfigError("unknown task: " + name);
}

std::string to_string(Task task) {
  switch (task) {
    case Task::kDetection: return "detection";
    case Task::kRecognition: return "recognition";
    case Task::kVitals: return "vitals";
  }
  return "detection";
}

void TrainConfig::validate() const {
  if (tasks.empty()) throw ConfigError("train: task set is empty");
  for (double w : task_weights)
    if (w < 0.0) throw ConfigError("train: task weights must be >= 0");
  if (weight_decay < 0.0 || lambda_reg < 0.0 || lambda_align < 0.0)
    throw ConfigError("train: decay and alignment weights must be >= 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (hidden < 1) throw ConfigError("train: hidden width must be >= 1");
  if (n_classes < 2) throw ConfigError("train: n_classes must be >= 2");
  if (lr <= 0.0 || lr_floor < 0.0 || lr_floor > lr)
    throw ConfigError("train: need lr >= lr_floor >= 0");
  if (patience < 0) throw ConfigError("train: patience must be >= 0");
}

bool TrainConfig::has(Task t) const {
  return std::find(tasks.begin(), tasks.end(), t) != tasks.end();
}

MultiTaskModel MultiTaskModel::init(int input_dim, const TrainConfig& cfg) {
  cfg.validate();
  if (input_dim < 1) throw ConfigError("model: input dim must be >= 1");
  MultiTaskModel m;
  m.tasks = cfg.tasks;
  m.input_dim = input_dim;
  m.hidden = cfg.hidden;
  m.n_classes = cfg.n_classes;
  m.in_mean = Vector::Zero(input_dim);
  m.in_scale = Vector::Ones(input_dim);
  Rng rng(mix_seed(cfg.rng_seed, 77));
  auto fill = [&rng](Matrix& w, Eigen::Index rows, Eigen::Index cols) {
    w.resize(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = scale * rng.normal();
  };
  fill(m.w1, cfg.hidden, input_dim);
  m.b1 = Vector::Zero(cfg.hidden);
  fill(m.w2, cfg.hidden, cfg.hidden);
  m.b2 = Vector::Zero(cfg.hidden);
  fill(m.w_det, 2, cfg.hidden);
  m.b_det = Vector::Zero(2);
  fill(m.w_rec, cfg.n_classes, cfg.hidden);
  m.b_rec = Vector::Zero(cfg.n_classes);
  fill(m.w_vit, 1, cfg.hidden);
  m.b_vit = Vector::Zero(1);
  m.log_sigma = {0.0, 0.0, 0.0};
  return m;
}

MultiTaskModel MultiTaskModel::zeros_like(const MultiTaskModel& s) {
  MultiTaskModel m;
  m.tasks = s.tasks;
  m.input_dim = s.input_dim;
  m.hidden = s.hidden;
  m.n_classes = s.n_classes;
  m.in_mean = Vector::Zero(s.in_mean.size());
  m.in_scale = Vector::Ones(s.in_scale.size());
  m.w1 = Matrix::Zero(s.w1.rows(), s.w1.cols());
  m.b1 = Vector::Zero(s.b1.size());
  m.w2 = Matrix::Zero(s.w2.rows(), s.w2.cols());
  m.b2 = Vector::Zero(s.b2.size());
  m.w_det = Matrix::Zero(s.w_det.rows(), s.w_det.cols());
  m.b_det = Vector::Zero(s.b_det.size());
  m.w_rec = Matrix::Zero(s.w_rec.rows(), s.w_rec.cols());
  m.b_rec = Vector::Zero(s.b_rec.size());
  m.w_vit = Matrix::Zero(s.w_vit.rows(), s.w_vit.cols());
  m.b_vit = Vector::Zero(s.b_vit.size());
  m.log_sigma = {0.0, 0.0, 0.0};
  return m;
}

std::vector<ParamRef> param_refs(MultiTaskModel& m) {
  std::vector<ParamRef> refs;
  refs.push_back({m.w1.data(), m.w1.size(), true});
  refs.push_back({m.b1.data(), m.b1.size(), false});
  refs.push_back({m.w2.data(), m.w2.size(), true});
  refs.push_back({m.b2.data(), m.b2.size(), false});
  refs.push_back({m.w_det.data(), m.w_det.size(), false});
  refs.push_back({m.b_det.data(), m.b_det.size(), false});
  refs.push_back({m.w_rec.data(), m.w_rec.size(), false});
  refs.push_back({m.b_rec.data(), m.b_rec.size(), false});
  refs.push_back({m.w_vit.data(), m.w_vit.size(), false});
  refs.push_back({m.b_vit.data(), m.b_vit.size(), false});
  refs.push_back({&m.log_sigma[0], 3, false});
  return refs;
}

ForwardResult forward(const MultiTaskModel& m, const Matrix& x) {
  if (x.cols() != m.input_dim)
    throw ConfigError("forward: input width " + std::to_string(x.cols()) +
                      " does not match model input dim " + std::to_string(m.input_dim));
  const EncoderCache c = encode(m, x);
  ForwardResult r;
  r.z = c.z;
  r.det_logits = affine_rows(c.z, m.w_det, m.b_det);
  r.rec_logits = affine_rows(c.z, m.w_rec, m.b_rec);
  r.vitals = affine_rows(c.z, m.w_vit, m.b_vit).col(0);
  return r;
}

Prediction predict(const MultiTaskModel& m, const Vector& h) {
  Matrix x = h.transpose();
  const ForwardResult r = forward(m, x);
  Prediction p;
  for (Task t : m.tasks) {
    switch (t) {
      case Task::kDetection: p.detection = argmax_row(r.det_logits.row(0)); break;
      case Task::kRecognition: p.recognition = argmax_row(r.rec_logits.row(0)); break;
      case Task::kVitals: p.vitals = r.vitals(0); break;
    }
  }
  return p;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw ConfigError("cross entropy: batch size mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols())
      throw ConfigError("cross entropy: label " + std::to_string(y) + " out of range");
    const double mx = logits.row(i).maxCoeff();
    const double lse = std::log((logits.row(i).array() - mx).exp().sum());
    total += -(logits(i, y) - mx) + lse;
  }
  return total / static_cast<double>(logits.rows());
}

double mse_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) throw ConfigError("mse: length mismatch");
  if (pred.size() == 0) throw ConfigError("mse: empty batch");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double median_pairwise_distance(const Matrix& a, const Matrix& b) {
  std::vector<double> dists;
  const Eigen::Index n = a.rows() + b.rows();
  auto row = [&](Eigen::Index i) {
    return i < a.rows() ? a.row(i) : b.row(i - a.rows());
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dists.push_back((row(i) - row(j)).norm());
  if (dists.empty()) return 0.0;
  std::sort(dists.begin(), dists.end());
  const std::size_t k = dists.size();
  return k % 2 == 1 ? dists[k / 2] : 0.5 * (dists[k / 2 - 1] + dists[k / 2]);
}

double mmd(const Matrix& z_source, const Matrix& z_target, double bandwidth) {
  if (z_source.rows() == 0 || z_target.rows() == 0)
    throw ConfigError("mmd: empty batch");
  double bw = bandwidth;
  if (bw <= 0.0) bw = median_pairwise_distance(z_source, z_target);
  if (bw <= 0.0) return 0.0;  // all points identical
  const double inv = 1.0 / (2.0 * bw * bw);
  auto kernel_sum = [inv](const Matrix& u, const Matrix& v) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i)
      for (Eigen::Index j = 0; j < v.rows(); ++j)
        s += std::exp(-(u.row(i) - v.row(j)).squaredNorm() * inv);
    return s;
  };
  const double m = static_cast<double>(z_source.rows());
  const double n = static_cast<double>(z_target.rows());
  return kernel_sum(z_source, z_source) / (m * m) +
         kernel_sum(z_target, z_target) / (n * n) -
         2.0 * kernel_sum(z_source, z_target) / (m * n);
}

double combine_losses(const std::vector<double>& task_losses,
                      const std::vector<double>& task_weights,
                      const std::vector<double>& log_sigmas, double align_loss,
                      double lambda_align, double head_weight_sq, double lambda_reg) {
  if (task_losses.size() != task_weights.size() ||
      task_losses.size() != log_sigmas.size())
    throw ConfigError("combine_losses: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < task_losses.size(); ++i) {
    total += task_weights[i] * task_losses[i] * 0.5 * std::exp(-2.0 * log_sigmas[i]);
    total += log_sigmas[i];
  }
  return total + lambda_align * align_loss + lambda_reg * head_weight_sq;
}

namespace {

struct BatchTargets {
  std::vector<int> det;
  std::vector<int> rec;
  Vector vit;
  std::vector<int> domain;
};

BatchTargets gather_targets(const Dataset& batch, const TrainConfig& cfg) {
  BatchTargets t;
  t.vit.resize(static_cast<Eigen::Index>(batch.size()));
  Eigen::Index i = 0;
  for (const auto& s : batch) {
    if (cfg.has(Task::kDetection)) {
      if (!s.labels.presence)
        throw ConfigError("total_loss: sample lacks a presence label for the detection task");
      t.det.push_back(*s.labels.presence ? 1 : 0);
    }
    if (cfg.has(Task::kRecognition)) {
      if (!s.labels.activity)
        throw ConfigError("total_loss: sample lacks an activity label for the recognition task");
      if (*s.labels.activity < 0 || *s.labels.activity >= cfg.n_classes)
        throw ConfigError("total_loss: activity label out of class range");
      t.rec.push_back(*s.labels.activity);
    }
    if (cfg.has(Task::kVitals)) {
      if (!s.labels.vital_rate_hz)
        throw ConfigError("total_loss: sample lacks a vital-rate label for the vitals task");
      t.vit(i) = *s.labels.vital_rate_hz;
    }
    t.domain.push_back(s.domain);
    ++i;
  }
  return t;
}

Matrix stack_inputs(const Dataset& batch, int input_dim) {
  Matrix x(static_cast<Eigen::Index>(batch.size()), input_dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].h.size() != input_dim)
      throw ConfigError("total_loss: descriptor width mismatch");
    x.row(static_cast<Eigen::Index>(i)) = batch[i].h.transpose();
  }
  return x;
}

// dMMD/dz for both groups, rows matched to the stacked z matrix.
void mmd_backward(const Matrix& z, const std::vector<Eigen::Index>& src,
                  const std::vector<Eigen::Index>& tgt, double bw, double scale,
                  Matrix& dz) {
  const double inv = 1.0 / (2.0 * bw * bw);
  const double m = static_cast<double>(src.size());
  const double n = static_cast<double>(tgt.size());
  auto add_pair = [&](Eigen::Index i, Eigen::Index j, double coeff) {
    // d/dz_i k(z_i, z_j) = k * (z_j - z_i) / bw^2
    const double kval = std::exp(-(z.row(i) - z.row(j)).squaredNorm() * inv);
    dz.row(i) += scale * coeff * kval * (z.row(j) - z.row(i)) / (bw * bw);
  };
  for (Eigen::Index i : src) {
    for (Eigen::Index j : src) add_pair(i, j, 2.0 / (m * m));
    for (Eigen::Index j : tgt) add_pair(i, j, -2.0 / (m * n));
  }
  for (Eigen::Index i : tgt) {
    for (Eigen::Index j : tgt) add_pair(i, j, 2.0 / (n * n));
    for (Eigen::Index j : src) add_pair(i, j, -2.0 / (m * n));
  }
}

}  // namespace

LossBreakdown total_loss(const MultiTaskModel& m, const Dataset& batch,
                         const TrainConfig& cfg, MultiTaskModel* grads) {
  cfg.validate();
  if (batch.empty()) throw ConfigError("total_loss: empty batch");
  const BatchTargets targets = gather_targets(batch, cfg);
  const Matrix x = stack_inputs(batch, m.input_dim);
  const double b = static_cast<double>(batch.size());

  const EncoderCache cache = encode(m, x);
  LossBreakdown out;

  Matrix dz;
  if (grads) dz = Matrix::Zero(cache.z.rows(), cache.z.cols());

  double head_weight_sq = 0.0;
  auto head_pass = [&](Task task, const Matrix& w, const Vector& bias,
                       MultiTaskModel* g, Matrix* gw, Vector* gb) {
    const int ti = static_cast<int>(task);
    const double lam = cfg.task_weights[static_cast<std::size_t>(ti)];
    const double inv_two_sigma_sq =
        0.5 * std::exp(-2.0 * m.log_sigma[static_cast<std::size_t>(ti)]);
    const Matrix logits = affine_rows(cache.z, w, bias);
    double loss;
    Matrix dlogits;
    if (task == Task::kVitals) {
      const Vector pred = logits.col(0);
      loss = mse_loss(pred, targets.vit);
      if (g) dlogits = (2.0 / b) * (pred - targets.vit);
    } else {
      const std::vector<int>& y = task == Task::kDetection ? targets.det : targets.rec;
      loss = softmax_cross_entropy(logits, y);
      if (g) {
        dlogits = softmax_rows(logits);
        for (Eigen::Index i = 0; i < dlogits.rows(); ++i)
          dlogits(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        dlogits /= b;
      }
    }
    out.task_loss[static_cast<std::size_t>(ti)] = loss;
    head_weight_sq += w.squaredNorm();
    if (g) {
      const double scale = lam * inv_two_sigma_sq;
      *gw += scale * (dlogits.transpose() * cache.z) + 2.0 * cfg.lambda_reg * w;
      *gb += scale * dlogits.colwise().sum().transpose();
      dz += scale * (dlogits * w);
      // d/d log sigma of [lam * l * exp(-2s) / 2 + s]
      g->log_sigma[static_cast<std::size_t>(ti)] +=
          1.0 - lam * loss * std::exp(-2.0 * m.log_sigma[static_cast<std::size_t>(ti)]);
    }
  };

  if (cfg.has(Task::kDetection))
    head_pass(Task::kDetection, m.w_det, m.b_det, grads,
              grads ? &grads->w_det : nullptr, grads ? &grads->b_det : nullptr);
  if (cfg.has(Task::kRecognition))
    head_pass(Task::kRecognition, m.w_rec, m.b_rec, grads,
              grads ? &grads->w_rec : nullptr, grads ? &grads->b_rec : nullptr);
  if (cfg.has(Task::kVitals))
    head_pass(Task::kVitals, m.w_vit, m.b_vit, grads,
              grads ? &grads->w_vit : nullptr, grads ? &grads->b_vit : nullptr);

  // Alignment over the shared representation, groups by sample domain.
  if (cfg.lambda_align > 0.0) {
    std::vector<Eigen::Index> src, tgt;
    for (std::size_t i = 0; i < targets.domain.size(); ++i)
      (targets.domain[i] == 0 ? src : tgt).push_back(static_cast<Eigen::Index>(i));
    if (!src.empty() && !tgt.empty()) {
      Matrix zs(static_cast<Eigen::Index>(src.size()), cache.z.cols());
      Matrix zt(static_cast<Eigen::Index>(tgt.size()), cache.z.cols());
      for (std::size_t i = 0; i < src.size(); ++i) zs.row(static_cast<Eigen::Index>(i)) = cache.z.row(src[i]);
      for (std::size_t i = 0; i < tgt.size(); ++i) zt.row(static_cast<Eigen::Index>(i)) = cache.z.row(tgt[i]);
      double bw = cfg.mmd_bandwidth;
      if (bw <= 0.0) bw = median_pairwise_distance(zs, zt);
      if (bw > 0.0) {
        out.align = mmd(zs, zt, bw);
        // The heuristic bandwidth is treated as a constant of the step.
        if (grads) mmd_backward(cache.z, src, tgt, bw, cfg.lambda_align, dz);
      }
    }
  }

  std::vector<double> losses, weights, sigmas;
  for (Task t : cfg.tasks) {
    const auto ti = static_cast<std::size_t>(t);
    losses.push_back(out.task_loss[ti]);
    weights.push_back(cfg.task_weights[ti]);
    sigmas.push_back(m.log_sigma[ti]);
  }
  out.total = combine_losses(losses, weights, sigmas, out.align, cfg.lambda_align,
                             head_weight_sq, cfg.lambda_reg);

  if (grads) encoder_backward(m, cache, dz, *grads);
  return out;
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(MultiTaskModel& m, MultiTaskModel& grads, double lr) {
  auto params = param_refs(m);
  auto gparams = param_refs(grads);
  Eigen::Index total = 0;
  for (const auto& p : params) total += p.size;
  if (m_moment_.size() != total) {
    m_moment_ = Vector::Zero(total);
    v_moment_ = Vector::Zero(total);
    t_ = 0;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  Eigen::Index off = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    double* w = params[pi].data;
    const double* g = gparams[pi].data;
    for (Eigen::Index i = 0; i < params[pi].size; ++i) {
      double& mm = m_moment_(off + i);
      double& vv = v_moment_(off + i);
      mm = beta1_ * mm + (1.0 - beta1_) * g[i];
      vv = beta2_ * vv + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = mm / bc1;
      const double vhat = vv / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      // multiplicative form: a zero-gradient step scales by exactly this
      if (params[pi].optimizer_decay) w[i] *= 1.0 - lr * weight_decay_;
    }
    off += params[pi].size;
  }
}

double cosine_lr(const TrainConfig& cfg, int epoch) {
  if (cfg.epochs <= 1) return cfg.lr;
  const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return cfg.lr_floor +
         0.5 * (cfg.lr - cfg.lr_floor) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

namespace {

std::array<double, kNumTasks> validation_metrics(const MultiTaskModel& m,
                                                 const Dataset& val,
                                                 const TrainConfig& cfg) {
  std::array<double, kNumTasks> out{0.0, 0.0, 0.0};
  if (val.empty()) return out;
  Matrix x = stack_inputs(val, m.input_dim);
  const ForwardResult r = forward(m, x);
  const double n = static_cast<double>(val.size());
  if (cfg.has(Task::kDetection)) {
    int correct = 0;
    for (std::size_t i = 0; i < val.size(); ++i)
      if (argmax_row(r.det_logits.row(static_cast<Eigen::Index>(i))) ==
          (*val[i].labels.presence ? 1 : 0))
        ++correct;
    out[0] = correct / n;
  }
  if (cfg.has(Task::kRecognition)) {
    int correct = 0;
    for (std::size_t i = 0; i < val.size(); ++i)
      if (argmax_row(r.rec_logits.row(static_cast<Eigen::Index>(i))) ==
          *val[i].labels.activity)
        ++correct;
    out[1] = correct / n;
  }
  if (cfg.has(Task::kVitals)) {
    double mae = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i)
      mae += std::abs(r.vitals(static_cast<Eigen::Index>(i)) - *val[i].labels.vital_rate_hz);
    out[2] = mae / n;
  }
  return out;
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& val_set, TrainConfig cfg) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training set");
  if (val_set.empty()) throw ConfigError("train: empty validation set");
  const int input_dim = static_cast<int>(train_set[0].h.size());

  MultiTaskModel model = MultiTaskModel::init(input_dim, cfg);
  {
    Vector mean = Vector::Zero(input_dim);
    for (const auto& s : train_set) mean += s.h;
    mean /= static_cast<double>(train_set.size());
    Vector var = Vector::Zero(input_dim);
    for (const auto& s : train_set) var += (s.h - mean).cwiseAbs2();
    var /= static_cast<double>(train_set.size());
    model.in_mean = mean;
    for (int i = 0; i < input_dim; ++i)
      model.in_scale(i) = 1.0 / std::max(std::sqrt(var(i)), 1e-8);
  }
  AdamW opt(0.9, 0.999, 1e-8, cfg.weight_decay);

  // Validation objective excludes the alignment term: it is a training
  // regularizer, not a generalization measure.
  TrainConfig val_cfg = cfg;
  val_cfg.lambda_align = 0.0;
  // Early stopping tracks the unweighted task-loss sum; the sigma-weighted
  // total keeps falling on the training side as sigmas adapt and would stop
  // on confidence drift instead of generalization.
  auto stopping_loss = [&val_cfg](const LossBreakdown& lb) {
    double s = 0.0;
    for (Task t : val_cfg.tasks)
      s += val_cfg.task_weights[static_cast<std::size_t>(static_cast<int>(t))] *
           lb.task_loss[static_cast<std::size_t>(static_cast<int>(t))];
    return s;
  };

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  MultiTaskModel best = model;
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(cfg, epoch);
    Rng shuffle_rng(mix_seed(cfg.rng_seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Dataset batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

      MultiTaskModel grads = MultiTaskModel::zeros_like(model);
      const LossBreakdown lb = total_loss(model, batch, cfg, &grads);
      if (!std::isfinite(lb.total))
        throw NumericalError("train: NaN loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batches));
      opt.step(model, grads, lr);
      epoch_loss += lb.total;
      ++batches;
    }

    const LossBreakdown val_lb = total_loss(model, val_set, val_cfg);
    const double val_stop = stopping_loss(val_lb);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = epoch_loss / std::max(1, batches);
    rec.val_loss = val_stop;
    rec.val_metric = validation_metrics(model, val_set, cfg);
    result.history.push_back(rec);

    if (val_stop < result.best_val_loss) {
      result.best_val_loss = val_stop;
      result.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best > cfg.patience) break;
    }
  }
  result.model = std::move(best);
  return result;
}

Container container_from_model(const MultiTaskModel& m, const TrainConfig& cfg,
                               const nlohmann::json& extra_header) {
  Container c;
  c.header = extra_header;
  c.header["kind"] = "model";
  c.header["schema_version"] = 1;
  c.header["input_dim"] = m.input_dim;
  c.header["hidden"] = m.hidden;
  c.header["n_classes"] = m.n_classes;
  nlohmann::json tasks = nlohmann::json::array();
  for (Task t : m.tasks) tasks.push_back(to_string(t));
  c.header["tasks"] = tasks;
  c.header["log_sigma"] = m.log_sigma;
  c.header["config"] = {{"task_weights", cfg.task_weights},
                        {"weight_decay", cfg.weight_decay},
                        {"lambda_reg", cfg.lambda_reg},
                        {"lambda_align", cfg.lambda_align},
                        {"mmd_bandwidth", cfg.mmd_bandwidth},
                        {"lr", cfg.lr},
                        {"lr_floor", cfg.lr_floor},
                        {"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"patience", cfg.patience},
                        {"seed", cfg.rng_seed}};

  auto add = [&c](const char* name, const Matrix& w) {
    PayloadRecord r;
    r.meta["name"] = name;
    r.dims = {w.rows(), w.cols()};
    r.values.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        r.values.push_back(static_cast<float>(w(i, j)));
    c.records.push_back(std::move(r));
  };
  auto add_vec = [&c](const char* name, const Vector& v) {
    PayloadRecord r;
    r.meta["name"] = name;
    r.dims = {v.size()};
    for (Eigen::Index i = 0; i < v.size(); ++i)
      r.values.push_back(static_cast<float>(v(i)));
    c.records.push_back(std::move(r));
  };
  add_vec("in_mean", m.in_mean);
  add_vec("in_scale", m.in_scale);
  add("w1", m.w1);
  add_vec("b1", m.b1);
  add("w2", m.w2);
  add_vec("b2", m.b2);
  add("w_det", m.w_det);
  add_vec("b_det", m.b_det);
  add("w_rec", m.w_rec);
  add_vec("b_rec", m.b_rec);
  add("w_vit", m.w_vit);
  add_vec("b_vit", m.b_vit);
  return c;
}

MultiTaskModel model_from_container(const Container& c, TrainConfig* cfg_out) {
  if (c.header.value("kind", "") != "model")
    throw IoError("container kind is not 'model'");
  MultiTaskModel m;
  m.input_dim = c.header["input_dim"].get<int>();
  m.hidden = c.header["hidden"].get<int>();
  m.n_classes = c.header["n_classes"].get<int>();
  for (const auto& t : c.header["tasks"]) m.tasks.push_back(task_from_string(t));
  const auto ls = c.header["log_sigma"].get<std::vector<double>>();
  for (std::size_t i = 0; i < 3 && i < ls.size(); ++i) m.log_sigma[i] = ls[i];

  auto mat = [&c](std::size_t idx) {
    const auto& r = c.records[idx];
    Matrix w(r.dims[0], r.dims.size() > 1 ? r.dims[1] : 1);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = r.values[k++];
    return w;
  };
  if (c.records.size() != 12) throw IoError("model container must hold 12 records");
  m.in_mean = mat(0);
  m.in_scale = mat(1);
  m.w1 = mat(2);
  m.b1 = mat(3);
  m.w2 = mat(4);
  m.b2 = mat(5);
  m.w_det = mat(6);
  m.b_det = mat(7);
  m.w_rec = mat(8);
  m.b_rec = mat(9);
  m.w_vit = mat(10);
  m.b_vit = mat(11);

  if (cfg_out) {
    const auto& j = c.header["config"];
    cfg_out->tasks = m.tasks;
    cfg_out->task_weights = j["task_weights"].get<std::array<double, kNumTasks>>();
    cfg_out->weight_decay = j["weight_decay"].get<double>();
    cfg_out->lambda_reg = j["lambda_reg"].get<double>();
    cfg_out->lambda_align = j["lambda_align"].get<double>();
    cfg_out->mmd_bandwidth = j["mmd_bandwidth"].get<double>();
    cfg_out->lr = j["lr"].get<double>();
    cfg_out->lr_floor = j["lr_floor"].get<double>();
    cfg_out->epochs = j["epochs"].get<int>();
    cfg_out->batch_size = j["batch_size"].get<int>();
    cfg_out->patience = j["patience"].get<int>();
    cfg_out->rng_seed = j["seed"].get<std::uint64_t>();
    cfg_out->hidden = m.hidden;
    cfg_out->n_classes = m.n_classes;
  }
  return m;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,lr,train_loss,val_loss,val_det_acc,val_rec_acc,val_vit_mae\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + num(r.lr) + "," + num(r.train_loss) + "," +
           num(r.val_loss) + "," + num(r.val_metric[0]) + "," + num(r.val_metric[1]) +
           "," + num(r.val_metric[2]) + "\n";
  }
  return out;
}

}  // namespace sdp
