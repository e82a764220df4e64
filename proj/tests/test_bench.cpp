#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "sdp/bench.hpp"
#include "sdp/rng.hpp"

using namespace sdp;

namespace {

std::vector<std::string> users_of(int n_users, int per_user) {
  std::vector<std::string> out;
  for (int u = 0; u < n_users; ++u)
    for (int i = 0; i < per_user; ++i) out.push_back("u" + std::to_string(u));
  return out;
}

}  // namespace

TEST_CASE("holdout users land in test and only there") {
  const auto items = users_of(5, 4);
  SplitPlan plan;
  plan.holdout_users = {"u4"};
  plan.val_fraction = 0.25;
  plan.seed = 1;
  const SplitResult res = split_cross_user(items, plan);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] == "u4")
      CHECK(res.assignment[i] == SplitRole::kTest);
    else
      CHECK(res.assignment[i] != SplitRole::kTest);
  }
}

TEST_CASE("no user straddles two splits over random plans") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int n_users = 3 + static_cast<int>(rng.index(6));
    const auto items = users_of(n_users, 3);
    SplitPlan plan;
    plan.holdout_users = {"u" + std::to_string(rng.index(static_cast<std::uint64_t>(n_users)))};
    plan.val_fraction = 0.3;
    plan.seed = 100 + trial;
    const SplitResult res = split_cross_user(items, plan);
    std::map<std::string, std::set<SplitRole>> roles;
    for (std::size_t i = 0; i < items.size(); ++i) roles[items[i]].insert(res.assignment[i]);
    for (const auto& [user, role_set] : roles) CHECK(role_set.size() == 1);
    // manifest covers every user exactly once
    CHECK(res.manifest.size() == static_cast<std::size_t>(n_users));
  }
}

TEST_CASE("identical plans give identical manifests") {
  const auto items = users_of(6, 2);
  SplitPlan plan;
  plan.holdout_users = {"u2"};
  plan.val_fraction = 0.4;
  plan.seed = 9;
  const SplitResult a = split_cross_user(items, plan);
  const SplitResult b = split_cross_user(items, plan);
  CHECK(a.manifest == b.manifest);
  CHECK(a.assignment == b.assignment);
}

TEST_CASE("split validation errors") {
  SplitPlan plan;
  plan.holdout_users = {"nope"};
  CHECK_THROWS_AS(split_cross_user(users_of(3, 2), plan), ConfigError);
  plan.holdout_users = {"u0"};
  CHECK_THROWS_AS(split_cross_user(users_of(2, 3), plan), ConfigError);
  // holding out 2 of 3 users leaves no room for train + val
  SplitPlan tight;
  tight.holdout_users = {"u0", "u1"};
  tight.val_fraction = 0.5;
  CHECK_THROWS_AS(split_cross_user(users_of(3, 2), tight), ConfigError);
}

TEST_CASE("perfect predictions score 1 on both classification metrics") {
  const std::vector<int> y{0, 1, 2, 1, 0};
  CHECK(top1(y, y) == 1.0);
  CHECK(macro_f1(y, y, 3) == 1.0);
}

TEST_CASE("macro f1 hand example") {
  // y = [0,0,1], yhat = [0,1,1]: both class F1 = 2/3
  const std::vector<int> labels{0, 0, 1};
  const std::vector<int> preds{0, 1, 1};
  CHECK(macro_f1(preds, labels, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("classes absent from preds and labels are excluded from macro f1") {
  const std::vector<int> labels{0, 0, 1};
  const std::vector<int> preds{0, 1, 1};
  CHECK(macro_f1(preds, labels, 5) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("vitals mae basics") {
  CHECK(mae({0.3, 0.4}, {0.3, 0.4}) == 0.0);
  CHECK(mae({0.5, 0.1}, {0.3, 0.4}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(mae({}, {}), ConfigError);
}

TEST_CASE("confusion of perfect predictions is the identity") {
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  const ConfusionResult c = confusion(y, y, 3);
  CHECK(c.matrix == Matrix::Identity(3, 3));
  CHECK(c.zero_support_rows.empty());
}

TEST_CASE("confusion hand example with row normalization") {
  const std::vector<int> labels{0, 0, 1};
  const std::vector<int> preds{0, 1, 1};
  const ConfusionResult c = confusion(preds, labels, 2);
  Matrix want(2, 2);
  want << 0.5, 0.5, 0.0, 1.0;
  CHECK((c.matrix - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("zero-support rows are flagged and zero") {
  const std::vector<int> labels{0, 0};
  const std::vector<int> preds{0, 1};
  const ConfusionResult c = confusion(preds, labels, 3);
  REQUIRE(c.zero_support_rows.size() == 2);
  CHECK(c.matrix.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.matrix.row(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical runs give a zero std map") {
  const std::vector<int> labels{0, 1, 0, 1};
  const std::vector<int> preds{0, 1, 1, 1};
  const Matrix m = confusion(preds, labels, 2).matrix;
  const Matrix sd = confusion_std({m, m, m});
  CHECK(sd.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("majority vote with the documented tie break") {
  CHECK(majority_vote({2, 2, 2}) == 2);
  CHECK(majority_vote({0, 0, 1}) == 0);
  CHECK(majority_vote({1, 0}) == 0);  // tie -> lowest class
  CHECK_THROWS_AS(majority_vote({}), ConfigError);
}

TEST_CASE("clip aggregation groups by clip id") {
  const auto preds = clip_aggregate({{"c1", 0}, {"c1", 0}, {"c1", 1}, {"c2", 2}});
  CHECK(preds.at("c1") == 0);
  CHECK(preds.at("c2") == 2);
}

TEST_CASE("nearest-rank percentiles on 1..9") {
  std::vector<double> v{9, 1, 8, 2, 7, 3, 6, 4, 5};
  CHECK(nearest_rank_percentile(v, 0.5) == 5.0);
  CHECK(nearest_rank_percentile(v, 0.9) == 9.0);
  CHECK(nearest_rank_percentile(v, 1.0) == 9.0);
  CHECK(nearest_rank_percentile(v, 0.01) == 1.0);
}

TEST_CASE("stratified subsample keeps per-class ratios and is monotone") {
  Rng rng(3);
  Dataset data;
  for (int i = 0; i < 60; ++i) {
    Sample s;
    s.h = Vector::Zero(2);
    s.labels.activity = i % 3;
    s.session_id = "s" + std::to_string(i);
    data.push_back(s);
  }
  std::size_t prev = 0;
  for (double f : {0.2, 0.4, 0.6, 0.8}) {
    const Dataset sub = stratified_subsample(data, f, 3, 11);
    std::array<int, 3> counts{0, 0, 0};
    for (const auto& s : sub) counts[static_cast<std::size_t>(*s.labels.activity)]++;
    CHECK(counts[0] == counts[1]);
    CHECK(counts[1] == counts[2]);
    CHECK(sub.size() > prev);
    prev = sub.size();
  }
  // fraction 1 returns the input unchanged, in order
  const Dataset all = stratified_subsample(data, 1.0, 3, 11);
  REQUIRE(all.size() == data.size());
  for (std::size_t i = 0; i < all.size(); ++i)
    CHECK(all[i].session_id == data[i].session_id);
}

TEST_CASE("subsample fraction that empties a class is an error") {
  Dataset data;
  for (int i = 0; i < 3; ++i) {
    Sample s;
    s.h = Vector::Zero(1);
    s.labels.activity = i;  // one sample per class
    data.push_back(s);
  }
  CHECK_THROWS_AS(stratified_subsample(data, 0.2, 3, 1), ConfigError);
}

TEST_CASE("benchmark smoke run: one seed, one repeat, deterministic records") {
  BenchConfig cfg;
  cfg.seeds = {992};
  cfg.repeats = 1;
  cfg.variants = {PipelineVariant::kFull};
  cfg.task.kind = SceneKind::kGesture;
  cfg.task.n_classes = 3;
  cfg.task.n_users = 4;
  cfg.task.n_frames = 96;
  cfg.window.window = 32;
  cfg.window.stride = 16;
  cfg.features.cp.rank = 4;
  cfg.features.cp.max_sweeps = 12;
  cfg.train.epochs = 6;
  cfg.train.hidden = 32;
  cfg.run_label_efficiency = false;
  cfg.run_latency = false;
  const BenchOutputs out = run_benchmark(cfg);

  // exactly one record per metric
  std::map<std::string, int> metric_counts;
  for (const auto& r : out.records) metric_counts[r.metric]++;
  CHECK(metric_counts["top1"] == 1);
  CHECK(metric_counts["macro_f1"] == 1);
  CHECK(metric_counts["clip_top1"] == 1);
  CHECK(metric_counts.count("failed") == 0);

  // byte-identical report on a second invocation
  const BenchOutputs out2 = run_benchmark(cfg);
  REQUIRE(out.records.size() == out2.records.size());
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    CHECK(out.records[i].metric == out2.records[i].metric);
    CHECK(out.records[i].value == out2.records[i].value);
  }
  CHECK(out.summary.dump() == out2.summary.dump());
}

TEST_CASE("repeats without substream variation collapse to zero std") {
  BenchConfig cfg;
  cfg.seeds = {443};
  cfg.repeats = 3;
  cfg.repeat_substreams = false;  // the deterministic-variant mode
  cfg.variants = {PipelineVariant::kFull};
  cfg.task.kind = SceneKind::kGesture;
  cfg.task.n_classes = 2;
  cfg.task.n_users = 4;
  cfg.task.n_frames = 64;
  cfg.window.window = 32;
  cfg.window.stride = 32;
  cfg.features.cp.rank = 3;
  cfg.features.cp.max_sweeps = 10;
  cfg.train.epochs = 4;
  cfg.train.hidden = 16;
  cfg.run_label_efficiency = false;
  cfg.run_latency = false;
  const BenchOutputs out = run_benchmark(cfg);
  std::vector<double> top1_values;
  for (const auto& r : out.records)
    if (r.metric == "top1") top1_values.push_back(r.value);
  REQUIRE(top1_values.size() == 3);
  CHECK(top1_values[0] == top1_values[1]);
  CHECK(top1_values[1] == top1_values[2]);
}

TEST_CASE("bench output files are written with fixed headers") {
  BenchConfig cfg;
  cfg.seeds = {992};
  cfg.repeats = 1;
  cfg.variants = {PipelineVariant::kFull};
  cfg.task.kind = SceneKind::kGesture;
  cfg.task.n_classes = 2;
  cfg.task.n_users = 4;
  cfg.task.n_frames = 64;
  cfg.window.window = 32;
  cfg.window.stride = 32;
  cfg.features.cp.rank = 3;
  cfg.features.cp.max_sweeps = 8;
  cfg.train.epochs = 3;
  cfg.train.hidden = 16;
  cfg.label_fractions = {0.5, 1.0};
  cfg.run_label_efficiency = true;
  cfg.run_latency = false;
  const BenchOutputs out = run_benchmark(cfg);
  const std::string dir = std::filesystem::temp_directory_path() / "sdp_bench_test";
  std::filesystem::remove_all(dir);
  write_bench_outputs(dir, out);
  const std::vector<std::pair<std::string, std::string>> files = {
      {"records.csv", "variant,seed,repeat,task,metric,value"},
      {"summary.json", "{"},
      {"confusion_mean.csv", "variant,row,col,value"},
      {"confusion_std.csv", "variant,row,col,value"},
      {"latency.csv", "stage,p50_ms,p90_ms,n"},
      {"label_efficiency.csv", "fraction,mean,std,ci95_half,n_runs"},
  };
  for (const auto& [name, first_line] : files) {
    std::ifstream f(dir + "/" + name);
    REQUIRE(f.good());
    std::string line;
    std::getline(f, line);
    CHECK(line.substr(0, first_line.size()) == first_line);
  }
}
