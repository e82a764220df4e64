#include <doctest.h>

#include <cmath>

#include "sdp/model.hpp"
#include "sdp/rng.hpp"

using namespace sdp;

namespace {

Sample make_sample(const Vector& h, TaskLabels labels, int domain = 0) {
  Sample s;
  s.h = h;
  s.labels = labels;
  s.domain = domain;
  return s;
}

// Random small batch with labels for every task.
Dataset random_batch(int n, int dim, int n_classes, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  for (int i = 0; i < n; ++i) {
    Vector h(dim);
    for (int j = 0; j < dim; ++j) h(j) = rng.normal();
    TaskLabels labels;
    labels.presence = rng.uniform() < 0.5;
    labels.activity = static_cast<int>(rng.index(static_cast<std::uint64_t>(n_classes)));
    labels.vital_rate_hz = rng.uniform(0.2, 0.5);
    data.push_back(make_sample(h, labels, i % 2));
  }
  return data;
}

TrainConfig small_config(std::uint64_t seed, int hidden = 16, int n_classes = 3) {
  TrainConfig cfg;
  cfg.tasks = {Task::kDetection, Task::kRecognition, Task::kVitals};
  cfg.hidden = hidden;
  cfg.n_classes = n_classes;
  cfg.rng_seed = seed;
  cfg.lambda_reg = 1e-3;
  cfg.lambda_align = 0.0;
  return cfg;
}

double flat_param_count(MultiTaskModel& m) {
  double n = 0;
  for (const auto& p : param_refs(m)) n += static_cast<double>(p.size);
  return n;
}

}  // namespace

TEST_CASE("zero weights pass head biases through") {
  TrainConfig cfg = small_config(1);
  MultiTaskModel m = MultiTaskModel::init(5, cfg);
  m.w1.setZero();
  m.w2.setZero();
  m.w_det.setZero();
  m.w_rec.setZero();
  m.w_vit.setZero();
  m.b_det << 0.3, -0.2;
  m.b_vit(0) = 0.42;
  Matrix x(2, 5);
  x.setRandom();
  const ForwardResult r = forward(m, x);
  for (int i = 0; i < 2; ++i) {
    CHECK(r.det_logits(i, 0) == doctest::Approx(0.3));
    CHECK(r.det_logits(i, 1) == doctest::Approx(-0.2));
    CHECK(r.vitals(i) == doctest::Approx(0.42));
  }
}

TEST_CASE("identical inputs produce identical output rows") {
  TrainConfig cfg = small_config(2);
  const MultiTaskModel m = MultiTaskModel::init(6, cfg);
  Vector h(6);
  h << 1, -2, 0.5, 3, -1, 0.25;
  Matrix x(3, 6);
  for (int i = 0; i < 3; ++i) x.row(i) = h.transpose();
  const ForwardResult r = forward(m, x);
  for (int i = 1; i < 3; ++i) {
    CHECK(r.rec_logits.row(i) == r.rec_logits.row(0));
    CHECK(r.det_logits.row(i) == r.det_logits.row(0));
    CHECK(r.vitals(i) == r.vitals(0));
  }
}

TEST_CASE("perturbing one encoder weight moves every task output") {
  TrainConfig cfg = small_config(3);
  MultiTaskModel m = MultiTaskModel::init(4, cfg);
  Matrix x(1, 4);
  x << 0.3, -0.7, 1.1, 0.4;
  const ForwardResult before = forward(m, x);
  m.w1(2, 1) += 0.25;
  const ForwardResult after = forward(m, x);
  CHECK(std::abs(after.det_logits(0, 0) - before.det_logits(0, 0)) > 1e-12);
  CHECK(std::abs(after.rec_logits(0, 0) - before.rec_logits(0, 0)) > 1e-12);
  CHECK(std::abs(after.vitals(0) - before.vitals(0)) > 1e-12);
}

TEST_CASE("forward rejects width mismatch") {
  TrainConfig cfg = small_config(4);
  const MultiTaskModel m = MultiTaskModel::init(4, cfg);
  CHECK_THROWS_AS(forward(m, Matrix::Zero(1, 5)), ConfigError);
}

TEST_CASE("two-class zero logits lose ln 2") {
  Matrix logits = Matrix::Zero(1, 2);
  CHECK(softmax_cross_entropy(logits, {0}) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));
}

TEST_CASE("three-class logits (1,0,0) with label 0") {
  Matrix logits(1, 3);
  logits << 1.0, 0.0, 0.0;
  CHECK(softmax_cross_entropy(logits, {0}) ==
        doctest::Approx(0.5514447139320511).epsilon(1e-12));
}

TEST_CASE("perfect vitals prediction has zero loss") {
  Vector p(3), t(3);
  p << 0.2, 0.3, 0.4;
  t = p;
  CHECK(mse_loss(p, t) == 0.0);
}

TEST_CASE("labels out of class range are rejected") {
  Matrix logits = Matrix::Zero(1, 3);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {3}), ConfigError);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {-1}), ConfigError);
}

TEST_CASE("mmd of identical batches is zero") {
  Matrix z(4, 3);
  z.setRandom();
  CHECK(mmd(z, z, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mmd is symmetric") {
  Rng rng(5);
  Matrix a(5, 3), b(7, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  CHECK(mmd(a, b, 0.7) == doctest::Approx(mmd(b, a, 0.7)).epsilon(1e-12));
}

TEST_CASE("mmd on separated clusters matches the brute-force double sum") {
  Rng rng(6);
  const int m = 6, n = 5, d = 4;
  Matrix a(m, d), b(n, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  a.col(0).array() += 10.0;
  b.col(0).array() -= 10.0;
  const double bw = 1.0;

  // oracle: direct O(n^2) sums
  auto kern = [bw](const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v) {
    return std::exp(-(u - v).squaredNorm() / (2.0 * bw * bw));
  };
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) xx += kern(a.row(i), a.row(j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) yy += kern(b.row(i), b.row(j));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) xy += kern(a.row(i), b.row(j));
  const double oracle = xx / (m * m) + yy / (n * n) - 2.0 * xy / (m * n);
  CHECK(mmd(a, b, bw) == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(mmd(a, b, bw) > 0.5);
}

TEST_CASE("all-identical points collapse the median heuristic to zero") {
  Matrix z = Matrix::Ones(4, 2);
  CHECK(mmd(z, z, 0.0) == 0.0);
}

TEST_CASE("mmd rejects empty batches") {
  Matrix z(0, 3), w(2, 3);
  CHECK_THROWS_AS(mmd(z, w, 1.0), ConfigError);
}

TEST_CASE("combine_losses reproduces the hand-computed example") {
  // sigma = 1, no alignment, no decay: 0.5*2 + 0.5*4 = 3
  CHECK(combine_losses({2.0, 4.0}, {1.0, 1.0}, {0.0, 0.0}, 0.0, 0.0, 0.0, 0.0) ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("sigma minimizer of l/(2 s^2) + log s sits at s^2 = l") {
  // at l = 1 the optimum is log sigma = 0 with value 0.5
  const double at_opt = combine_losses({1.0}, {1.0}, {0.0}, 0.0, 0.0, 0.0, 0.0);
  CHECK(at_opt == doctest::Approx(0.5).epsilon(1e-12));
  for (double ls : {-0.3, -0.1, 0.1, 0.3}) {
    CHECK(combine_losses({1.0}, {1.0}, {ls}, 0.0, 0.0, 0.0, 0.0) > at_opt);
  }
}

TEST_CASE("zero head weights contribute no decay") {
  TrainConfig cfg = small_config(7);
  cfg.lambda_reg = 5.0;
  MultiTaskModel m = MultiTaskModel::init(4, cfg);
  m.w_det.setZero();
  m.w_rec.setZero();
  m.w_vit.setZero();
  const Dataset batch = random_batch(3, 4, cfg.n_classes, 8);
  const LossBreakdown with_reg = total_loss(m, batch, cfg);
  cfg.lambda_reg = 0.0;
  const LossBreakdown without = total_loss(m, batch, cfg);
  CHECK(with_reg.total == doctest::Approx(without.total).epsilon(1e-12));
}

TEST_CASE("total_loss requires labels for every enabled task") {
  TrainConfig cfg = small_config(9);
  const MultiTaskModel m = MultiTaskModel::init(4, cfg);
  Dataset batch = random_batch(2, 4, cfg.n_classes, 10);
  batch[1].labels.vital_rate_hz.reset();
  CHECK_THROWS_AS(total_loss(m, batch, cfg), ConfigError);
}

TEST_CASE("analytic gradients match central finite differences") {
  // full objective: three tasks, head decay, alignment with fixed bandwidth
  const double fd_step = 1e-5;
  int models_checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig cfg = small_config(seed, 8, 3);
    cfg.lambda_align = 0.5;
    cfg.mmd_bandwidth = 1.3;  // fixed so the objective is differentiable
    cfg.lambda_reg = 2e-3;
    const int dim = 5;
    MultiTaskModel m = MultiTaskModel::init(dim, cfg);
    const Dataset batch = random_batch(6, dim, cfg.n_classes, 100 + seed);

    MultiTaskModel grads = MultiTaskModel::zeros_like(m);
    total_loss(m, batch, cfg, &grads);

    auto params = param_refs(m);
    auto grefs = param_refs(grads);
    double worst_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      for (Eigen::Index i = 0; i < params[pi].size; ++i) {
        double& w = params[pi].data[i];
        const double saved = w;
        w = saved + fd_step;
        const double up = total_loss(m, batch, cfg).total;
        w = saved - fd_step;
        const double down = total_loss(m, batch, cfg).total;
        w = saved;
        const double fd = (up - down) / (2.0 * fd_step);
        const double an = grefs[pi].data[i];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
        worst_rel = std::max(worst_rel, rel);
      }
    }
    CHECK(worst_rel < 1e-4);
    ++models_checked;
  }
  CHECK(models_checked == 20);
}

TEST_CASE("adamw with zero gradients shrinks decayed weights by exactly (1 - lr wd)") {
  TrainConfig cfg = small_config(11);
  cfg.weight_decay = 0.01;
  MultiTaskModel m = MultiTaskModel::init(4, cfg);
  const Matrix w1_before = m.w1;
  const Matrix wdet_before = m.w_det;
  const Vector b1_before = m.b1;
  MultiTaskModel grads = MultiTaskModel::zeros_like(m);
  AdamW opt(0.9, 0.999, 1e-8, cfg.weight_decay);
  const double lr = 0.05;
  opt.step(m, grads, lr);
  const double factor = 1.0 - lr * cfg.weight_decay;
  CHECK((m.w1 - factor * w1_before).cwiseAbs().maxCoeff() == 0.0);
  // heads are decayed through the loss, not the optimizer
  CHECK(m.w_det == wdet_before);
  CHECK(m.b1 == b1_before);
}

TEST_CASE("cosine schedule is non-increasing from lr to the floor") {
  TrainConfig cfg = small_config(12);
  cfg.lr = 0.01;
  cfg.lr_floor = 0.001;
  cfg.epochs = 25;
  double prev = cosine_lr(cfg, 0);
  CHECK(prev == doctest::Approx(0.01));
  for (int e = 1; e < cfg.epochs; ++e) {
    const double lr = cosine_lr(cfg, e);
    CHECK(lr <= prev + 1e-15);
    prev = lr;
  }
  CHECK(prev == doctest::Approx(0.001));
}

namespace {

// Linearly separable two-cluster detection data.
Dataset separable_detection(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  for (int i = 0; i < n; ++i) {
    const bool present = i % 2 == 0;
    Vector h(dim);
    for (int j = 0; j < dim; ++j) h(j) = rng.normal() * 0.3;
    h(0) += present ? 2.0 : -2.0;
    TaskLabels labels;
    labels.presence = present;
    data.push_back(make_sample(h, labels));
  }
  return data;
}

}  // namespace

TEST_CASE("training separates a linearly separable detection task") {
  TrainConfig cfg;
  cfg.tasks = {Task::kDetection};
  cfg.hidden = 32;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.lr = 5e-3;
  cfg.rng_seed = 13;
  const Dataset train_set = separable_detection(128, 6, 21);
  const Dataset val_set = separable_detection(64, 6, 22);
  const TrainResult res = train(train_set, val_set, cfg);
  int correct = 0;
  for (const auto& s : val_set) {
    const Prediction p = predict(res.model, s.h);
    if (*p.detection == (*s.labels.presence ? 1 : 0)) ++correct;
  }
  CHECK(static_cast<double>(correct) / val_set.size() >= 0.95);
}

TEST_CASE("a tiny batch can be overfit to near zero loss") {
  TrainConfig cfg;
  cfg.tasks = {Task::kRecognition};
  cfg.n_classes = 4;
  cfg.hidden = 32;
  cfg.epochs = 500;
  cfg.patience = 500;
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  cfg.lr_floor = 1e-3;
  cfg.lambda_reg = 0.0;
  cfg.weight_decay = 0.0;
  cfg.rng_seed = 14;
  Dataset tiny = random_batch(8, 5, 4, 23);
  const TrainResult res = train(tiny, tiny, cfg);
  // sigma terms add log sigma; compare the raw task loss instead
  TrainConfig eval_cfg = cfg;
  const LossBreakdown lb = total_loss(res.model, tiny, eval_cfg);
  CHECK(lb.task_loss[1] < 0.05);
}

TEST_CASE("training is bit-deterministic given the seed") {
  TrainConfig cfg;
  cfg.tasks = {Task::kDetection};
  cfg.epochs = 8;
  cfg.hidden = 16;
  cfg.rng_seed = 15;
  const Dataset train_set = separable_detection(40, 5, 31);
  const Dataset val_set = separable_detection(20, 5, 32);
  const TrainResult r1 = train(train_set, val_set, cfg);
  const TrainResult r2 = train(train_set, val_set, cfg);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
  }
  CHECK(r1.model.w1 == r2.model.w1);
  CHECK(r1.model.w_det == r2.model.w_det);
  CHECK(r1.model.log_sigma == r2.model.log_sigma);
}

TEST_CASE("noisy-task uncertainty grows above the clean task") {
  // task 2 (vitals) gets pure-noise labels, task 1 (detection) is separable;
  // majority across 5 seeds
  int majority = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(400 + seed);
    Dataset train_set = separable_detection(96, 6, 500 + seed);
    Dataset val_set = separable_detection(32, 6, 600 + seed);
    for (auto& s : train_set) s.labels.vital_rate_hz = rng.uniform(-3.0, 3.0);
    for (auto& s : val_set) s.labels.vital_rate_hz = rng.uniform(-3.0, 3.0);
    TrainConfig cfg;
    cfg.tasks = {Task::kDetection, Task::kVitals};
    cfg.hidden = 16;
    cfg.epochs = 40;
    cfg.rng_seed = seed;
    const TrainResult res = train(train_set, val_set, cfg);
    if (res.model.log_sigma[2] > res.model.log_sigma[0]) ++majority;
  }
  CHECK(majority >= 3);
}

TEST_CASE("train rejects empty datasets and aborts on NaN descriptors") {
  TrainConfig cfg = small_config(16);
  CHECK_THROWS_AS(train({}, {}, cfg), ConfigError);
  Dataset bad = random_batch(4, 4, 3, 40);
  bad[0].h(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(bad, bad, cfg), NumericalError);
}

TEST_CASE("prediction ties resolve to the lowest class") {
  TrainConfig cfg = small_config(17);
  MultiTaskModel m = MultiTaskModel::init(4, cfg);
  m.w_rec.setZero();
  m.b_rec.setZero();  // all logits equal
  const Prediction p = predict(m, Vector::Zero(4));
  CHECK(*p.recognition == 0);
}

TEST_CASE("model containers restore the exact float32 parameters") {
  TrainConfig cfg = small_config(18);
  const MultiTaskModel m = MultiTaskModel::init(5, cfg);
  const Container c = container_from_model(m, cfg, nlohmann::json::object());
  const auto bytes = serialize_container(c);
  TrainConfig cfg2;
  const MultiTaskModel back = model_from_container(deserialize_container(bytes), &cfg2);
  CHECK(back.input_dim == 5);
  CHECK(back.hidden == m.hidden);
  CHECK(back.tasks == m.tasks);
  CHECK(back.log_sigma == m.log_sigma);
  CHECK(cfg2.n_classes == cfg.n_classes);
  for (Eigen::Index i = 0; i < m.w1.size(); ++i)
    CHECK(back.w1.data()[i] == static_cast<float>(m.w1.data()[i]));
  // a second serialization of the reload is a byte fixed point
  const Container c2 = container_from_model(back, cfg2, nlohmann::json::object());
  const auto bytes2 = serialize_container(c2);
  CHECK(bytes2 == serialize_container(deserialize_container(bytes2)));
}

TEST_CASE("parameter count covers every tensor once") {
  TrainConfig cfg = small_config(19, 16, 3);
  MultiTaskModel m = MultiTaskModel::init(7, cfg);
  const double expect = 16 * 7 + 16 + 16 * 16 + 16 + 2 * 16 + 2 + 3 * 16 + 3 + 16 + 1 + 3;
  CHECK(flat_param_count(m) == expect);
}
