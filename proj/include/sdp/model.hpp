#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdp/container.hpp"
#include "sdp/tensor.hpp"

namespace sdp {

enum class Task { kDetection = 0, kRecognition = 1, kVitals = 2 };
inline constexpr int kNumTasks = 3;

Task task_from_string(const std::string& name);
std::string to_string(Task task);

struct TrainConfig {
  std::vector<Task> tasks{Task::kDetection};
  std::array<double, kNumTasks> task_weights{1.0, 1.0, 1.0};
  double weight_decay = 1e-4;   // decoupled decay on encoder weights
  double lambda_reg = 1e-4;     // head-weight decay inside the loss
  double lambda_align = 0.0;    // 0 disables the MMD regularizer
  double mmd_bandwidth = 0.0;   // <= 0: median heuristic per batch pair
  double lr = 5e-3;
  double lr_floor = 1e-4;
  int epochs = 60;
  int batch_size = 32;
  int patience = 10;
  int hidden = 128;
  int n_classes = 2;            // recognition head width
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool has(Task t) const;
};

// Shared two-layer encoder on h (affine -> layer norm -> gelu, twice) with
// one affine head per task and a learned log sigma per task. Inputs pass
// through a frozen per-dimension standardization fitted on the training
// split; the descriptor mixes scales from weights near 100 down to
// concentrations below 1.
struct MultiTaskModel {
  Vector in_mean;   // frozen, not trained
  Vector in_scale;  // frozen, not trained
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  Matrix w_det;
  Vector b_det;
  Matrix w_rec;
  Vector b_rec;
  Matrix w_vit;
  Vector b_vit;
  std::array<double, kNumTasks> log_sigma{0.0, 0.0, 0.0};

  std::vector<Task> tasks;
  int input_dim = 0;
  int hidden = 0;
  int n_classes = 0;

  static MultiTaskModel init(int input_dim, const TrainConfig& cfg);
  static MultiTaskModel zeros_like(const MultiTaskModel& m);
};

// Flattened view over every trainable scalar, in a fixed documented order;
// shared by the optimizer, the serializer and the finite-difference checks.
struct ParamRef {
  double* data;
  Eigen::Index size;
  bool optimizer_decay;  // encoder weights only
};
std::vector<ParamRef> param_refs(MultiTaskModel& m);

struct Sample {
  Vector h;
  TaskLabels labels;
  int domain = 0;  // alignment group for the MMD regularizer
  std::string session_id;
  std::string user_id;
};
using Dataset = std::vector<Sample>;

// ---- forward ----------------------------------------------------------------

struct ForwardResult {
  Matrix z;           // B x hidden
  Matrix det_logits;  // B x 2
  Matrix rec_logits;  // B x C
  Vector vitals;      // B
};

ForwardResult forward(const MultiTaskModel& m, const Matrix& x);

struct Prediction {
  std::optional<int> detection;
  std::optional<int> recognition;
  std::optional<double> vitals;
};

// Argmax with ties resolved to the lowest class index.
Prediction predict(const MultiTaskModel& m, const Vector& h);

// ---- losses -----------------------------------------------------------------

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels);
double mse_loss(const Vector& pred, const Vector& target);

// Biased squared-MMD estimate with a Gaussian kernel. bandwidth <= 0 selects
// the median pairwise distance over the two batches; identical batches give 0.
double mmd(const Matrix& z_source, const Matrix& z_target, double bandwidth);
double median_pairwise_distance(const Matrix& a, const Matrix& b);

// Uncertainty-weighted combination:
//   sum_t w_t l_t / (2 sigma_t^2) + sum_t log sigma_t
//   + lambda_align * align + lambda_reg * head_weight_sq
double combine_losses(const std::vector<double>& task_losses,
                      const std::vector<double>& task_weights,
                      const std::vector<double>& log_sigmas, double align_loss,
                      double lambda_align, double head_weight_sq, double lambda_reg);

struct LossBreakdown {
  double total = 0.0;
  std::array<double, kNumTasks> task_loss{0.0, 0.0, 0.0};
  double align = 0.0;
};

// Full objective on one batch; when grads is non-null the analytic gradient
// of every parameter (including the log sigmas) is accumulated into it.
LossBreakdown total_loss(const MultiTaskModel& m, const Dataset& batch,
                         const TrainConfig& cfg, MultiTaskModel* grads = nullptr);

// ---- optimization -------------------------------------------------------------

// Adam moments with decoupled weight decay. Decay touches only parameters
// flagged in param_refs; a zero-gradient step shrinks those by exactly
// (1 - lr * decay).
class AdamW {
public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
        double weight_decay = 0.0);
  void step(MultiTaskModel& m, MultiTaskModel& grads, double lr);

private:
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
  Vector m_moment_, v_moment_;
};

double cosine_lr(const TrainConfig& cfg, int epoch);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::array<double, kNumTasks> val_metric{0.0, 0.0, 0.0};  // acc, acc, mae
};

struct TrainResult {
  MultiTaskModel model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

// Mini-batch loop: encode, per-task losses, optional alignment, uncertainty
// weighting, AdamW updates, cosine schedule, early stopping on validation
// loss. Deterministic given cfg.rng_seed; returns the best-validation
// snapshot.
TrainResult train(const Dataset& train_set, const Dataset& val_set, TrainConfig cfg);

// ---- persistence ----------------------------------------------------------------

Container container_from_model(const MultiTaskModel& m, const TrainConfig& cfg,
                               const nlohmann::json& extra_header);
MultiTaskModel model_from_container(const Container& c, TrainConfig* cfg_out = nullptr);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace sdp
