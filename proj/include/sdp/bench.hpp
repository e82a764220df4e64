#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdp/model.hpp"
#include "sdp/pipeline.hpp"
#include "sdp/stats.hpp"

namespace sdp {

// ---- cross-user splits --------------------------------------------------------

struct SplitPlan {
  std::vector<std::string> holdout_users;  // test users, must exist
  double val_fraction = 0.25;              // of the non-test users
  std::uint64_t seed = 0;
};

enum class SplitRole { kTrain = 0, kVal = 1, kTest = 2 };

struct SplitResult {
  std::vector<SplitRole> assignment;  // one entry per input item
  // user -> "train"/"val"/"test", sorted by user id; the split manifest.
  std::vector<std::pair<std::string, std::string>> manifest;
};

// Partition items by user id. Users never straddle splits; deterministic
// for a fixed plan.
SplitResult split_cross_user(const std::vector<std::string>& item_users,
                             const SplitPlan& plan);

// ---- metrics --------------------------------------------------------------------

double top1(const std::vector<int>& preds, const std::vector<int>& labels);

// Macro F1 over classes present in preds or labels; classes absent from both
// are excluded from the average.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                int n_classes);

double mae(const std::vector<double>& preds, const std::vector<double>& targets);

struct ConfusionResult {
  Matrix matrix;                       // rows normalized to 1
  std::vector<int> zero_support_rows;  // emitted as zero rows
};

ConfusionResult confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int n_classes);
Matrix confusion_mean(const std::vector<Matrix>& matrices);
Matrix confusion_std(const std::vector<Matrix>& matrices);

// Majority vote with ties resolved to the lowest class index.
int majority_vote(const std::vector<int>& votes);
std::map<std::string, int> clip_aggregate(
    const std::vector<std::pair<std::string, int>>& window_preds);

// Nearest-rank percentile: the ceil(q*n)-th smallest value.
double nearest_rank_percentile(std::vector<double> values, double q);

// ---- latency ----------------------------------------------------------------------

struct StageLatency {
  std::string stage;
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  int n = 0;
};

// Wall-clock per single window through {preprocess, cp_als, pool,
// encode+head}; the first `warmup` timings are excluded from statistics.
std::vector<StageLatency> latency_profile(const std::vector<DataBlock>& windows,
                                          const FeatureConfig& features,
                                          const MultiTaskModel& model,
                                          int warmup = 3);

// ---- benchmark sweep ------------------------------------------------------------------

struct MetricRecord {
  std::string variant;
  std::uint64_t seed = 0;
  int repeat = 0;
  std::string task;
  std::string metric;
  double value = 0.0;
};

// Seeded per-class subsampling; fraction 1 returns the input unchanged.
Dataset stratified_subsample(const Dataset& data, double fraction, int n_classes,
                             std::uint64_t seed);

struct BenchConfig {
  std::vector<std::uint64_t> seeds{992, 863, 702, 443, 542};
  int repeats = 10;
  std::vector<PipelineVariant> variants{PipelineVariant::kFull,
                                        PipelineVariant::kNoCpals,
                                        PipelineVariant::kNoPhase};
  SyntheticTaskConfig task;  // gesture by default
  WindowConfig window;
  FeatureConfig features;
  TrainConfig train;
  int holdout_users = 1;
  double val_fraction = 0.25;
  std::vector<double> label_fractions{0.2, 0.4, 0.6, 0.8, 1.0};
  bool run_label_efficiency = true;
  bool run_latency = true;
  // Repeats at a fixed seed vary only the training shuffle substream; turning
  // this off makes every repeat identical.
  bool repeat_substreams = true;
};

struct LabelEfficiencyPoint {
  double fraction = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double ci95_half = 0.0;
  int n_runs = 0;
};

struct BenchOutputs {
  std::vector<MetricRecord> records;
  nlohmann::json summary;
  std::vector<std::pair<std::string, Matrix>> confusion_mean_by_variant;
  std::vector<std::pair<std::string, Matrix>> confusion_std_by_variant;
  std::vector<StageLatency> latency;
  std::vector<LabelEfficiencyPoint> label_curve;
};

// The full evaluation protocol: per (variant, seed, repeat) pipeline runs,
// aggregate statistics, variance comparisons between variants, confusion
// maps, label-efficiency sweep and latency profile.
BenchOutputs run_benchmark(const BenchConfig& cfg);

// Writes records.csv, summary.json, confusion_mean.csv, confusion_std.csv,
// latency.csv and label_efficiency.csv under dir.
void write_bench_outputs(const std::string& dir, const BenchOutputs& outputs);

}  // namespace sdp
