#include "sdp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "sdp/rng.hpp"

namespace sdp {

SplitResult split_cross_user(const std::vector<std::string>& item_users,
                             const SplitPlan& plan) {
  std::set<std::string> users(item_users.begin(), item_users.end());
  if (users.size() < 3)
    throw ConfigError("split: need at least 3 distinct users");
  for (const auto& u : plan.holdout_users)
    if (!users.count(u)) throw ConfigError("split: holdout user '" + u + "' absent");
  if (plan.holdout_users.empty()) throw ConfigError("split: no holdout users");

  std::set<std::string> test(plan.holdout_users.begin(), plan.holdout_users.end());
  std::vector<std::string> rest;
  for (const auto& u : users)
    if (!test.count(u)) rest.push_back(u);  // sorted by the set ordering

  int n_val = static_cast<int>(std::floor(plan.val_fraction * rest.size() + 0.5));
  if (plan.val_fraction > 0.0) n_val = std::max(1, n_val);
  if (static_cast<int>(rest.size()) - n_val < 1)
    throw ConfigError("split: fewer users than required splits");

  Rng rng(mix_seed(plan.seed, 11));
  rng.shuffle(rest);
  std::set<std::string> val(rest.begin(), rest.begin() + n_val);

  SplitResult out;
  out.assignment.reserve(item_users.size());
  for (const auto& u : item_users) {
    if (test.count(u))
      out.assignment.push_back(SplitRole::kTest);
    else if (val.count(u))
      out.assignment.push_back(SplitRole::kVal);
    else
      out.assignment.push_back(SplitRole::kTrain);
  }
  for (const auto& u : users) {
    const char* role = test.count(u) ? "test" : (val.count(u) ? "val" : "train");
    out.manifest.emplace_back(u, role);
  }
  return out;
}

double top1(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) throw ConfigError("top1: length mismatch");
  if (preds.empty()) throw ConfigError("top1: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                int n_classes) {
  if (preds.size() != labels.size()) throw ConfigError("macro_f1: length mismatch");
  if (preds.empty()) throw ConfigError("macro_f1: empty input");
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < n_classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == c, l = labels[i] == c;
      tp += p && l;
      fp += p && !l;
      fn += !p && l;
    }
    if (tp + fp + fn == 0) continue;  // class absent from preds and labels
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    sum += f1;
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / counted;
}

double mae(const std::vector<double>& preds, const std::vector<double>& targets) {
  if (preds.size() != targets.size()) throw ConfigError("mae: length mismatch");
  if (preds.empty()) throw ConfigError("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - targets[i]);
  return s / static_cast<double>(preds.size());
}

ConfusionResult confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int n_classes) {
  if (n_classes < 2) throw ConfigError("confusion: need C >= 2");
  if (preds.size() != labels.size()) throw ConfigError("confusion: length mismatch");
  ConfusionResult res;
  res.matrix = Matrix::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes || preds[i] < 0 || preds[i] >= n_classes)
      throw ConfigError("confusion: label outside [0, C)");
    res.matrix(labels[i], preds[i]) += 1.0;
  }
  for (int r = 0; r < n_classes; ++r) {
    const double total = res.matrix.row(r).sum();
    if (total == 0.0)
      res.zero_support_rows.push_back(r);
    else
      res.matrix.row(r) /= total;
  }
  return res;
}

Matrix confusion_mean(const std::vector<Matrix>& matrices) {
  if (matrices.empty()) throw ConfigError("confusion_mean: no matrices");
  Matrix m = Matrix::Zero(matrices[0].rows(), matrices[0].cols());
  for (const auto& x : matrices) m += x;
  return m / static_cast<double>(matrices.size());
}

Matrix confusion_std(const std::vector<Matrix>& matrices) {
  const Matrix mean = confusion_mean(matrices);
  Matrix acc = Matrix::Zero(mean.rows(), mean.cols());
  for (const auto& x : matrices) acc += (x - mean).cwiseProduct(x - mean);
  return (acc / static_cast<double>(matrices.size())).cwiseSqrt();
}

int majority_vote(const std::vector<int>& votes) {
  if (votes.empty()) throw ConfigError("majority_vote: empty clip");
  std::map<int, int> counts;
  for (int v : votes) ++counts[v];
  int best = votes[0], best_count = 0;
  for (const auto& [cls, count] : counts) {
    // map iteration is ascending, so ties keep the lowest class
    if (count > best_count) {
      best = cls;
      best_count = count;
    }
  }
  return best;
}

std::map<std::string, int> clip_aggregate(
    const std::vector<std::pair<std::string, int>>& window_preds) {
  std::map<std::string, std::vector<int>> grouped;
  for (const auto& [clip, pred] : window_preds) grouped[clip].push_back(pred);
  std::map<std::string, int> out;
  for (const auto& [clip, votes] : grouped) out[clip] = majority_vote(votes);
  return out;
}

double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("percentile: empty input");
  if (q <= 0.0 || q > 1.0) throw ConfigError("percentile: q must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(1, rank) - 1];
}

std::vector<StageLatency> latency_profile(const std::vector<DataBlock>& windows,
                                          const FeatureConfig& features,
                                          const MultiTaskModel& model, int warmup) {
  if (static_cast<int>(windows.size()) < 20)
    throw ConfigError("latency_profile: need at least 20 windows");
  if (warmup < 0 || static_cast<std::size_t>(warmup) >= windows.size())
    throw ConfigError("latency_profile: warmup exhausts the windows");

  const SessionStats stats = compute_session_stats(windows);
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  std::vector<double> pre_t, cp_t, pool_t, enc_t, end_t;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& b = windows[i];
    const auto t0 = Clock::now();
    const Tensor3d amp = normalized_amplitude(b, stats);
    const Tensor3d pd = phase_diff(b);
    const auto t1 = Clock::now();
    CpConfig c1 = features.cp;
    c1.rng_seed = mix_seed(1, 2 * i);
    CpConfig c2 = features.cp;
    c2.rng_seed = mix_seed(1, 2 * i + 1);
    const CpDecomposition d1 = cp_als(amp, c1);
    const CpDecomposition d2 = cp_als(pd, c2);
    const auto t2 = Clock::now();
    double m1 = 0.0;
    for (Eigen::Index j = 0; j < amp.size(); ++j) m1 += amp.data()[j];
    m1 /= static_cast<double>(amp.size());
    double s1 = 0.0;
    for (Eigen::Index j = 0; j < amp.size(); ++j)
      s1 += (amp.data()[j] - m1) * (amp.data()[j] - m1);
    s1 = std::sqrt(s1 / static_cast<double>(amp.size()));
    const Vector h1 = pool(d1, m1, s1).h;
    const Vector h2 = pool(d2, 0.0, 1.0).h;
    Vector h(h1.size() + h2.size());
    h << h1, h2;
    const auto t3 = Clock::now();
    (void)predict(model, h);
    const auto t4 = Clock::now();

    pre_t.push_back(ms_since(t0, t1));
    cp_t.push_back(ms_since(t1, t2));
    pool_t.push_back(ms_since(t2, t3));
    enc_t.push_back(ms_since(t3, t4));
    end_t.push_back(ms_since(t0, t4));
  }

  auto summarize = [&](const std::string& name, std::vector<double> v) {
    v.erase(v.begin(), v.begin() + warmup);
    StageLatency s;
    s.stage = name;
    s.p50_ms = nearest_rank_percentile(v, 0.5);
    s.p90_ms = nearest_rank_percentile(v, 0.9);
    s.n = static_cast<int>(v.size());
    return s;
  };
  return {summarize("preprocess", pre_t), summarize("cp_als", cp_t),
          summarize("pool", pool_t), summarize("encode_head", enc_t),
          summarize("end_to_end", end_t)};
}

Dataset stratified_subsample(const Dataset& data, double fraction, int n_classes,
                             std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw ConfigError("subsample: fraction must be in (0, 1]");
  if (fraction == 1.0) return data;

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < data.size(); ++i) {
    int c;
    if (data[i].labels.activity)
      c = *data[i].labels.activity;
    else if (data[i].labels.presence)
      c = *data[i].labels.presence ? 1 : 0;
    else
      throw ConfigError("subsample: sample lacks a class label");
    if (c < 0 || c >= n_classes) throw ConfigError("subsample: class out of range");
    by_class[static_cast<std::size_t>(c)].push_back(i);
  }
  std::vector<std::size_t> keep;
  Rng rng(mix_seed(seed, 23));
  for (auto& members : by_class) {
    if (members.empty()) continue;
    const int take = static_cast<int>(
        std::floor(fraction * static_cast<double>(members.size()) + 0.5));
    if (take == 0)
      throw ConfigError("subsample: fraction empties a class");
    rng.shuffle(members);
    for (int i = 0; i < take; ++i) keep.push_back(members[static_cast<std::size_t>(i)]);
  }
  std::sort(keep.begin(), keep.end());  // original order, deterministic
  Dataset out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(data[i]);
  return out;
}

namespace {

struct SeedData {
  // Feature samples per variant name, split once per seed.
  std::map<std::string, std::vector<Sample>> samples_by_variant;
  SplitResult split;
  std::vector<std::string> sample_users;
};

Task bench_task(const SyntheticTaskConfig& t) {
  switch (t.kind) {
    case SceneKind::kGesture:
    case SceneKind::kGait: return Task::kRecognition;
    case SceneKind::kPresence:
    case SceneKind::kStaticEmpty: return Task::kDetection;
    case SceneKind::kBreathing: return Task::kVitals;
    case SceneKind::kCustom: break;
  }
  throw ConfigError("bench: custom scenes are not a task family");
}

struct RunEval {
  double top1_acc = 0.0;
  double macro = 0.0;
  double clip_acc = 0.0;
  double vit_mae = 0.0;
  double vit_mse = 0.0;
  std::vector<int> preds, labels;
};

RunEval evaluate_model(const MultiTaskModel& model, const Dataset& test, Task task,
                       int n_classes) {
  RunEval ev;
  if (test.empty()) throw ConfigError("bench: empty test split");
  Matrix x(static_cast<Eigen::Index>(test.size()), test[0].h.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = test[i].h.transpose();
  const ForwardResult fr = forward(model, x);

  if (task == Task::kVitals) {
    std::vector<double> preds, targets;
    for (std::size_t i = 0; i < test.size(); ++i) {
      preds.push_back(fr.vitals(static_cast<Eigen::Index>(i)));
      targets.push_back(*test[i].labels.vital_rate_hz);
    }
    ev.vit_mae = mae(preds, targets);
    double mse = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      mse += (preds[i] - targets[i]) * (preds[i] - targets[i]);
    ev.vit_mse = mse / static_cast<double>(preds.size());
    return ev;
  }

  const Matrix& logits = task == Task::kDetection ? fr.det_logits : fr.rec_logits;
  std::vector<std::pair<std::string, int>> window_preds;
  std::map<std::string, int> clip_truth;
  for (std::size_t i = 0; i < test.size(); ++i) {
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits(static_cast<Eigen::Index>(i), j) >
          logits(static_cast<Eigen::Index>(i), best))
        best = j;
    const int label = task == Task::kDetection ? (*test[i].labels.presence ? 1 : 0)
                                               : *test[i].labels.activity;
    ev.preds.push_back(best);
    ev.labels.push_back(label);
    window_preds.emplace_back(test[i].session_id, best);
    clip_truth[test[i].session_id] = label;
  }
  ev.top1_acc = top1(ev.preds, ev.labels);
  ev.macro = macro_f1(ev.preds, ev.labels, n_classes);
  const auto clip_preds = clip_aggregate(window_preds);
  int correct = 0;
  for (const auto& [clip, pred] : clip_preds)
    if (pred == clip_truth[clip]) ++correct;
  ev.clip_acc = static_cast<double>(correct) / static_cast<double>(clip_preds.size());
  return ev;
}

nlohmann::json stats_json(const AggregateStats& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"ci95_half", s.ci95_half}, {"n", s.n}};
}

}  // namespace

BenchOutputs run_benchmark(const BenchConfig& cfg) {
  if (cfg.variants.empty()) throw ConfigError("bench: need at least one variant");
  if (cfg.repeats < 1) throw ConfigError("bench: repeats must be >= 1");
  if (cfg.seeds.empty()) throw ConfigError("bench: need at least one seed");

  const Task task = bench_task(cfg.task);
  const std::string task_name = to_string(task);
  const int n_classes = task == Task::kDetection ? 2 : cfg.task.n_classes;

  BenchOutputs out;
  std::map<std::string, std::vector<double>> primary_by_variant;  // for variance stats
  std::map<std::string, std::vector<Matrix>> confusions_by_variant;

  // Per-seed data, shared across variants and repeats.
  std::map<std::uint64_t, SeedData> seed_data;
  for (std::uint64_t seed : cfg.seeds) {
    const std::uint64_t data_seed = mix_seed(seed, 101);
    const auto recordings = generate_task_recordings(cfg.task, data_seed);

    std::vector<std::vector<DataBlock>> sessions;
    for (const auto& rec : recordings) sessions.push_back(window(rec, cfg.window));

    SeedData sd;
    for (PipelineVariant variant : cfg.variants) {
      FeatureConfig fc = cfg.features;
      fc.variant = variant;
      std::vector<Sample> samples;
      for (std::size_t si = 0; si < sessions.size(); ++si) {
        const auto feats =
            session_features(sessions[si], fc, mix_seed(data_seed, 40000 + si));
        samples.insert(samples.end(), feats.begin(), feats.end());
      }
      sd.samples_by_variant[to_string(variant)] = std::move(samples);
    }
    const auto& any = sd.samples_by_variant.begin()->second;
    for (const auto& s : any) sd.sample_users.push_back(s.user_id);

    // Hold out the seed-chosen user; remaining users split train/val.
    std::set<std::string> users(sd.sample_users.begin(), sd.sample_users.end());
    std::vector<std::string> user_list(users.begin(), users.end());
    SplitPlan plan;
    plan.seed = seed;
    plan.val_fraction = cfg.val_fraction;
    Rng pick(mix_seed(seed, 3));
    for (int i = 0; i < cfg.holdout_users && !user_list.empty(); ++i) {
      const std::size_t idx = static_cast<std::size_t>(pick.index(user_list.size()));
      plan.holdout_users.push_back(user_list[idx]);
      user_list.erase(user_list.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    sd.split = split_cross_user(sd.sample_users, plan);
    seed_data[seed] = std::move(sd);
  }

  // Records in deterministic (variant, seed, repeat) order.
  for (PipelineVariant variant : cfg.variants) {
    const std::string vname = to_string(variant);
    for (std::uint64_t seed : cfg.seeds) {
      const SeedData& sd = seed_data[seed];
      const auto& samples = sd.samples_by_variant.at(vname);
      Dataset train_set, val_set, test_set;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        switch (sd.split.assignment[i]) {
          case SplitRole::kTrain: train_set.push_back(samples[i]); break;
          case SplitRole::kVal: val_set.push_back(samples[i]); break;
          case SplitRole::kTest: test_set.push_back(samples[i]); break;
        }
      }
      for (int rep = 0; rep < cfg.repeats; ++rep) {
        TrainConfig tc = cfg.train;
        tc.tasks = {task};
        tc.n_classes = n_classes;
        tc.rng_seed =
            cfg.repeat_substreams ? mix_seed(seed, 500 + static_cast<std::uint64_t>(rep))
                                  : mix_seed(seed, 500);
        try {
          const TrainResult tr = train(train_set, val_set, tc);
          const RunEval ev = evaluate_model(tr.model, test_set, task, n_classes);
          auto add = [&](const std::string& metric, double value) {
            out.records.push_back({vname, seed, rep, task_name, metric, value});
          };
          if (task == Task::kVitals) {
            add("mae", ev.vit_mae);
            add("mse", ev.vit_mse);
            primary_by_variant[vname].push_back(ev.vit_mae);
          } else {
            add("top1", ev.top1_acc);
            add("macro_f1", ev.macro);
            add("clip_top1", ev.clip_acc);
            primary_by_variant[vname].push_back(ev.top1_acc);
            confusions_by_variant[vname].push_back(
                confusion(ev.preds, ev.labels, n_classes).matrix);
          }
        } catch (const std::exception&) {
          out.records.push_back({vname, seed, rep, task_name, "failed", 1.0});
        }
      }
    }
  }

  // Aggregates and variant comparisons.
  const std::string primary_metric = task == Task::kVitals ? "mae" : "top1";
  nlohmann::json variants_json;
  for (PipelineVariant variant : cfg.variants) {
    const std::string vname = to_string(variant);
    const auto& values = primary_by_variant[vname];
    nlohmann::json vj;
    if (values.size() >= 2) vj[primary_metric] = stats_json(aggregate_stats(values));
    variants_json[vname] = vj;
  }
  out.summary["task"] = task_name;
  out.summary["primary_metric"] = primary_metric;
  out.summary["variants"] = variants_json;

  const std::string full_name = to_string(PipelineVariant::kFull);
  if (primary_by_variant.count(full_name)) {
    nlohmann::json comparisons = nlohmann::json::array();
    for (PipelineVariant variant : cfg.variants) {
      const std::string vname = to_string(variant);
      if (vname == full_name) continue;
      const auto& full_vals = primary_by_variant[full_name];
      const auto& base_vals = primary_by_variant[vname];
      if (full_vals.size() < 2 || base_vals.size() < 2) continue;
      nlohmann::json cj;
      cj["baseline"] = vname;
      const double s_full = aggregate_stats(full_vals).stddev;
      const double s_base = aggregate_stats(base_vals).stddev;
      if (s_base > 0.0)
        cj["var_drop"] = var_drop(s_full, s_base);
      else
        cj["var_drop"] = nullptr;
      const TestResult bf = brown_forsythe({full_vals, base_vals});
      cj["brown_forsythe"] = {{"stat", bf.stat}, {"p", bf.p}, {"degenerate", bf.degenerate}};
      if (full_vals.size() == base_vals.size()) {
        const TestResult pt = paired_t_test(full_vals, base_vals);
        cj["paired_t"] = {{"stat", pt.stat}, {"p", pt.p}, {"degenerate", pt.degenerate}};
      }
      comparisons.push_back(cj);
    }
    out.summary["comparisons"] = comparisons;
  }

  for (PipelineVariant variant : cfg.variants) {
    const std::string vname = to_string(variant);
    if (!confusions_by_variant.count(vname)) continue;
    out.confusion_mean_by_variant.emplace_back(
        vname, confusion_mean(confusions_by_variant[vname]));
    out.confusion_std_by_variant.emplace_back(
        vname, confusion_std(confusions_by_variant[vname]));
  }

  // Label-efficiency sweep on the full variant, one run per (fraction, seed).
  if (cfg.run_label_efficiency && task != Task::kVitals) {
    nlohmann::json curve = nlohmann::json::array();
    for (double fraction : cfg.label_fractions) {
      std::vector<double> accs;
      for (std::uint64_t seed : cfg.seeds) {
        const SeedData& sd = seed_data.at(seed);
        const auto& samples = sd.samples_by_variant.at(full_name);
        Dataset train_set, val_set, test_set;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          switch (sd.split.assignment[i]) {
            case SplitRole::kTrain: train_set.push_back(samples[i]); break;
            case SplitRole::kVal: val_set.push_back(samples[i]); break;
            case SplitRole::kTest: test_set.push_back(samples[i]); break;
          }
        }
        const Dataset sub = stratified_subsample(train_set, fraction, n_classes,
                                                 mix_seed(seed, 900));
        TrainConfig tc = cfg.train;
        tc.tasks = {task};
        tc.n_classes = n_classes;
        tc.rng_seed = mix_seed(seed, 500);
        const TrainResult tr = train(sub, val_set, tc);
        accs.push_back(evaluate_model(tr.model, test_set, task, n_classes).top1_acc);
      }
      AggregateStats st;
      if (accs.size() >= 2) {
        st = aggregate_stats(accs);
      } else {
        st.mean = accs[0];
        st.n = 1;
      }
      LabelEfficiencyPoint pt;
      pt.fraction = fraction;
      pt.mean = st.mean;
      pt.stddev = st.stddev;
      pt.ci95_half = st.ci95_half;
      pt.n_runs = st.n;
      out.label_curve.push_back(pt);
      curve.push_back({{"fraction", fraction}, {"stats", stats_json(st)}});
    }
    out.summary["label_efficiency"] = curve;
  }

  // Latency on the first seed's first variant data with a freshly trained model.
  if (cfg.run_latency) {
    const std::uint64_t seed = cfg.seeds.front();
    const std::uint64_t data_seed = mix_seed(seed, 101);
    const auto recordings = generate_task_recordings(cfg.task, data_seed);
    std::vector<DataBlock> blocks;
    for (const auto& rec : recordings) {
      const auto bs = window(rec, cfg.window);
      blocks.insert(blocks.end(), bs.begin(), bs.end());
      if (blocks.size() >= 32) break;
    }
    const SeedData& sd = seed_data.at(seed);
    const auto& samples = sd.samples_by_variant.at(to_string(cfg.variants.front()));
    Dataset train_set, val_set;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (sd.split.assignment[i] == SplitRole::kTrain) train_set.push_back(samples[i]);
      if (sd.split.assignment[i] == SplitRole::kVal) val_set.push_back(samples[i]);
    }
    TrainConfig tc = cfg.train;
    tc.tasks = {task};
    tc.n_classes = n_classes;
    tc.epochs = std::min(cfg.train.epochs, 5);  // the profile needs shape, not accuracy
    tc.rng_seed = mix_seed(seed, 500);
    const TrainResult tr = train(train_set, val_set, tc);
    FeatureConfig fc = cfg.features;
    fc.variant = PipelineVariant::kFull;
    out.latency = latency_profile(blocks, fc, tr.model);
  }

  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << content;
}

}  // namespace

void write_bench_outputs(const std::string& dir, const BenchOutputs& outputs) {
  std::filesystem::create_directories(dir);

  std::string records = "variant,seed,repeat,task,metric,value\n";
  for (const auto& r : outputs.records)
    records += r.variant + "," + std::to_string(r.seed) + "," + std::to_string(r.repeat) +
               "," + r.task + "," + r.metric + "," + fmt_double(r.value) + "\n";
  write_file(dir + "/records.csv", records);

  write_file(dir + "/summary.json", outputs.summary.dump(2) + "\n");

  auto confusion_csv = [](const std::vector<std::pair<std::string, Matrix>>& mats) {
    std::string s = "variant,row,col,value\n";
    for (const auto& [vname, m] : mats)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
          s += vname + "," + std::to_string(i) + "," + std::to_string(j) + "," +
               fmt_double(m(i, j)) + "\n";
    return s;
  };
  write_file(dir + "/confusion_mean.csv", confusion_csv(outputs.confusion_mean_by_variant));
  write_file(dir + "/confusion_std.csv", confusion_csv(outputs.confusion_std_by_variant));

  std::string latency = "stage,p50_ms,p90_ms,n\n";
  for (const auto& s : outputs.latency)
    latency += s.stage + "," + fmt_double(s.p50_ms) + "," + fmt_double(s.p90_ms) + "," +
               std::to_string(s.n) + "\n";
  write_file(dir + "/latency.csv", latency);

  std::string curve = "fraction,mean,std,ci95_half,n_runs\n";
  for (const auto& p : outputs.label_curve)
    curve += fmt_double(p.fraction) + "," + fmt_double(p.mean) + "," +
             fmt_double(p.stddev) + "," + fmt_double(p.ci95_half) + "," +
             std::to_string(p.n_runs) + "\n";
  write_file(dir + "/label_efficiency.csv", curve);
}

}  // namespace sdp
