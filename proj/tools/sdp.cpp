#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "sdp/bench.hpp"
#include "sdp/container.hpp"
#include "sdp/model.hpp"
#include "sdp/pipeline.hpp"
#include "sdp/rng.hpp"

namespace {

using nlohmann::json;
using namespace sdp;

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
}

// Strict parsing: unknown keys are configuration errors.
void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError(ctx + ": unknown key '" + key + "'");
}

struct SeedOption {
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool from_entropy = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "master seed")->each([this](const std::string&) {
      seed_given = true;
    });
    cmd->add_flag("--seed-from-entropy", from_entropy,
                  "draw the master seed from system entropy");
  }
  std::uint64_t resolve() {
    if (seed_given) return seed;
    if (from_entropy) {
      std::random_device rd;
      seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      return seed;
    }
    throw ConfigError("no --seed given; pass --seed or --seed-from-entropy explicitly");
  }
};

// ---- config readers --------------------------------------------------------------

DelayModulation delay_from_json(const json& j) {
  check_keys(j, {"kind", "amplitude_s", "frequency_hz", "breakpoints"}, "scene.paths.delay");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return ConstantDelay{};
  if (kind == "sinusoidal")
    return SinusoidalDelay{j.at("amplitude_s").get<double>(),
                           j.at("frequency_hz").get<double>()};
  if (kind == "piecewise-linear") {
    PiecewiseLinearDelay d;
    for (const auto& bp : j.at("breakpoints"))
      d.breakpoints.emplace_back(bp[0].get<double>(), bp[1].get<double>());
    return d;
  }
  throw ConfigError("unknown delay kind: " + kind);
}

PhaseProcess phase_from_json(const json& j) {
  check_keys(j, {"kind", "value_rad", "step_std", "seed"}, "scene.paths.phase");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") return ZeroPhase{};
  if (kind == "constant") return ConstantPhase{j.at("value_rad").get<double>()};
  if (kind == "random-walk")
    return RandomWalkPhase{j.at("step_std").get<double>(),
                           j.value("seed", std::uint64_t{0})};
  throw ConfigError("unknown phase kind: " + kind);
}

MultipathScene scene_from_json(const json& j, std::uint64_t seed) {
  check_keys(j,
             {"preset", "class_id", "n_classes", "user_id", "n_users", "rate_hz",
              "cpe_walk_std", "n_static_paths", "session_tag", "user_tag", "paths",
              "labels"},
             "scene");
  const std::string preset = j.at("preset").get<std::string>();
  MultipathScene scene;
  if (preset == "custom") {
    scene.kind = SceneKind::kCustom;
    if (!j.contains("paths") || !j.contains("labels"))
      throw ConfigError("custom scene needs 'paths' and 'labels'");
    for (const auto& pj : j.at("paths")) {
      check_keys(pj, {"alpha", "tau0_s", "delay", "phase"}, "scene.paths");
      PathComponent p;
      p.alpha = Complex{pj.at("alpha")[0].get<double>(), pj.at("alpha")[1].get<double>()};
      p.tau0_s = pj.at("tau0_s").get<double>();
      if (pj.contains("delay")) p.delay = delay_from_json(pj.at("delay"));
      if (pj.contains("phase")) p.phase = phase_from_json(pj.at("phase"));
      scene.paths.push_back(p);
    }
    TaskLabels labels = labels_from_json(j.at("labels"));
    scene.schedule = {LabelInterval{-1e300, 1e300, labels}};
  } else {
    PresetParams params;
    params.class_id = j.value("class_id", 0);
    params.n_classes = j.value("n_classes", 1);
    params.user_id = j.value("user_id", 0);
    params.n_users = j.value("n_users", 1);
    params.rate_hz = j.value("rate_hz", 0.3);
    params.cpe_walk_std = j.value("cpe_walk_std", 0.0);
    params.n_static_paths = j.value("n_static_paths", 3);
    scene = scene_preset(scene_kind_from_string(preset), params, seed);
  }
  scene.session_id = j.value("session_tag", std::string("s0"));
  scene.user_id = j.value("user_tag", std::string("u0"));
  return scene;
}

SamplingGrid grid_from_json(const json& j, std::uint64_t seed) {
  check_keys(j,
             {"n_rx", "n_tx", "n_subcarriers", "carrier_hz", "subcarrier_spacing_hz",
              "n_frames", "packet_rate_hz", "pair_gain_jitter", "subcarrier_freqs_hz",
              "packet_times_s"},
             "grid");
  SamplingGrid grid;
  grid.n_rx = j.value("n_rx", 2);
  grid.n_tx = j.value("n_tx", 2);
  if (j.contains("subcarrier_freqs_hz")) {
    grid.subcarrier_freqs_hz = j.at("subcarrier_freqs_hz").get<std::vector<double>>();
  } else {
    const int k = j.value("n_subcarriers", 16);
    const double f0 = j.value("carrier_hz", 5.18e9);
    const double df = j.value("subcarrier_spacing_hz", 1.25e6);
    for (int i = 0; i < k; ++i) grid.subcarrier_freqs_hz.push_back(f0 + i * df);
  }
  if (j.contains("packet_times_s")) {
    grid.packet_times_s = j.at("packet_times_s").get<std::vector<double>>();
  } else {
    const int n = j.value("n_frames", 256);
    const double rate = j.value("packet_rate_hz", 10.0);
    for (int i = 0; i < n; ++i) grid.packet_times_s.push_back(i / rate);
  }
  if (j.value("pair_gain_jitter", false)) {
    Rng rng(mix_seed(seed, 31));
    for (int a = 0; a < grid.n_pairs(); ++a) {
      const double mag = rng.uniform(0.85, 1.15);
      const double ang = rng.uniform(-0.4, 0.4);
      grid.pair_gains.push_back(Complex{mag * std::cos(ang), mag * std::sin(ang)});
    }
  }
  return grid;
}

CpConfig cp_from_json(const json& j) {
  check_keys(j, {"rank", "epsilon", "max_sweeps", "rel_tol", "init", "seed"}, "cp");
  CpConfig cfg;
  cfg.rank = j.value("rank", 8);
  cfg.epsilon = j.value("epsilon", 1e-9);
  cfg.max_sweeps = j.value("max_sweeps", 50);
  cfg.rel_tol = j.value("rel_tol", 1e-8);
  if (j.value("init", std::string("gaussian")) == "hosvd") cfg.init = CpInit::kHosvd;
  return cfg;
}

TrainConfig train_from_json(const json& j) {
  check_keys(j,
             {"version", "tasks", "task_weights", "weight_decay", "lambda_reg",
              "lambda_align", "mmd_bandwidth", "lr", "lr_floor", "epochs", "batch_size",
              "patience", "hidden", "n_classes", "split"},
             "train config");
  TrainConfig cfg;
  if (j.contains("tasks")) {
    cfg.tasks.clear();
    for (const auto& t : j.at("tasks")) cfg.tasks.push_back(task_from_string(t));
  }
  if (j.contains("task_weights")) {
    check_keys(j.at("task_weights"), {"detection", "recognition", "vitals"},
               "task_weights");
    cfg.task_weights[0] = j.at("task_weights").value("detection", 1.0);
    cfg.task_weights[1] = j.at("task_weights").value("recognition", 1.0);
    cfg.task_weights[2] = j.at("task_weights").value("vitals", 1.0);
  }
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.lambda_reg = j.value("lambda_reg", cfg.lambda_reg);
  cfg.lambda_align = j.value("lambda_align", cfg.lambda_align);
  cfg.mmd_bandwidth = j.value("mmd_bandwidth", cfg.mmd_bandwidth);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.lr_floor = j.value("lr_floor", cfg.lr_floor);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.patience = j.value("patience", cfg.patience);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.n_classes = j.value("n_classes", cfg.n_classes);
  return cfg;
}

SyntheticTaskConfig task_from_json_cfg(const json& j) {
  check_keys(j,
             {"kind", "n_classes", "n_users", "sessions_per_class", "n_frames",
              "packet_rate_hz", "n_rx", "n_tx", "n_subcarriers", "carrier_hz",
              "subcarrier_spacing_hz", "noise_sigma2", "cpe_walk_std", "rate_min_hz",
              "rate_max_hz", "recordings_per_user"},
             "bench task");
  SyntheticTaskConfig t;
  if (j.contains("kind")) t.kind = scene_kind_from_string(j.at("kind").get<std::string>());
  t.n_classes = j.value("n_classes", t.n_classes);
  t.n_users = j.value("n_users", t.n_users);
  t.sessions_per_class = j.value("sessions_per_class", t.sessions_per_class);
  t.n_frames = j.value("n_frames", t.n_frames);
  t.packet_rate_hz = j.value("packet_rate_hz", t.packet_rate_hz);
  t.n_rx = j.value("n_rx", t.n_rx);
  t.n_tx = j.value("n_tx", t.n_tx);
  t.n_subcarriers = j.value("n_subcarriers", t.n_subcarriers);
  t.carrier_hz = j.value("carrier_hz", t.carrier_hz);
  t.subcarrier_spacing_hz = j.value("subcarrier_spacing_hz", t.subcarrier_spacing_hz);
  t.noise_sigma2 = j.value("noise_sigma2", t.noise_sigma2);
  t.cpe_walk_std = j.value("cpe_walk_std", t.cpe_walk_std);
  t.rate_min_hz = j.value("rate_min_hz", t.rate_min_hz);
  t.rate_max_hz = j.value("rate_max_hz", t.rate_max_hz);
  t.recordings_per_user = j.value("recordings_per_user", t.recordings_per_user);
  return t;
}

AdapterDescriptor adapter_from_json(const json& j) {
  check_keys(j, {"name", "version", "antenna_pair_order", "subcarrier_index_map",
                 "already_db"},
             "adapter");
  AdapterDescriptor a;
  a.name = j.value("name", std::string("adapter"));
  a.version = j.value("version", 1);
  for (const auto& p : j.at("antenna_pair_order"))
    a.antenna_pair_order.emplace_back(p[0].get<int>(), p[1].get<int>());
  a.subcarrier_index_map = j.at("subcarrier_index_map").get<std::vector<int>>();
  a.already_db = j.value("already_db", false);
  return a;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << content;
}

// ---- subcommand bodies ---------------------------------------------------------------

int cmd_generate(const std::string& config_path, const std::string& out,
                 SeedOption& seed_opt, bool dry_run) {
  const json cfg = load_json(config_path);
  check_keys(cfg, {"version", "scene", "grid", "noise"}, "generate config");
  if (cfg.value("version", 0) != 1) throw ConfigError("generate config: version must be 1");
  const std::uint64_t seed = seed_opt.resolve();

  const MultipathScene scene = scene_from_json(cfg.at("scene"), mix_seed(seed, 1));
  const SamplingGrid grid = grid_from_json(cfg.at("grid"), mix_seed(seed, 2));
  NoiseConfig noise;
  check_keys(cfg.at("noise"), {"sigma2"}, "noise");
  noise.sigma2 = cfg.at("noise").value("sigma2", 0.0);
  noise.rng_seed = mix_seed(seed, 3);

  if (dry_run) {
    json plan;
    plan["scene_kind"] = to_string(scene.kind);
    plan["paths"] = scene.paths.size();
    plan["frames"] = grid.packet_times_s.size();
    plan["pairs"] = grid.n_pairs();
    plan["subcarriers"] = grid.subcarrier_freqs_hz.size();
    plan["sigma2"] = noise.sigma2;
    plan["out"] = out;
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  const CsiRecording rec = synth_csi(scene, grid, noise);
  write_container(out, container_from_recording(rec));
  return 0;
}

int cmd_ingest(const std::string& in, const std::string& adapter_path,
               const std::string& out, bool dry_run) {
  const CsiRecording raw = recording_from_container(read_container(in));
  const AdapterDescriptor adapter = adapter_from_json(load_json(adapter_path));
  if (dry_run) {
    json plan;
    plan["in"] = in;
    plan["adapter"] = adapter.name;
    plan["pairs_out"] = adapter.antenna_pair_order.size();
    plan["subcarriers_out"] = adapter.subcarrier_index_map.size();
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  write_container(out, container_from_recording(ingest(raw, adapter)));
  return 0;
}

int cmd_window(const std::string& in, const std::string& out, int w, int s,
               bool pad_last, bool dry_run) {
  const CsiRecording rec = recording_from_container(read_container(in));
  WindowConfig cfg;
  cfg.window = w;
  cfg.stride = s;
  cfg.pad_last = pad_last;
  cfg.validate();
  if (dry_run) {
    json plan;
    plan["frames"] = rec.frames.size();
    plan["window"] = w;
    plan["stride"] = s;
    plan["pad_last"] = pad_last;
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  BlockSet set;
  set.blocks = window(rec, cfg);
  set.window = cfg;
  set.pair_order = rec.pair_order;
  set.subcarrier_freqs_hz = rec.subcarrier_freqs_hz;
  write_container(out, container_from_blocks(set));
  return 0;
}

int cmd_decompose(const std::string& in, const std::string& out, const CpConfig& cp,
                  const std::string& view, SeedOption& seed_opt, bool dry_run) {
  const std::uint64_t seed = seed_opt.resolve();
  const BlockSet set = blocks_from_container(read_container(in));
  if (dry_run) {
    json plan;
    plan["blocks"] = set.blocks.size();
    plan["rank"] = cp.rank;
    plan["view"] = view;
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  const DecompositionSet decomp = decompose_blocks(set.blocks, cp, view, seed);
  write_container(out, container_from_decompositions(decomp));
  return 0;
}

int cmd_pool(const std::string& in, const std::string& out_table,
             const std::string& out_csv, bool dry_run) {
  const DecompositionSet set = decompositions_from_container(read_container(in));
  if (dry_run) {
    json plan;
    plan["items"] = set.items.size();
    plan["descriptor_dim"] = descriptor_dim(set.cp.rank);
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  const DescriptorTable table = pool_decompositions(set);
  if (!out_table.empty())
    write_container(out_table, container_from_descriptors(table));
  if (!out_csv.empty()) write_text(out_csv, descriptor_table_csv(table));
  return 0;
}

Dataset dataset_from_tables(const std::vector<std::string>& paths) {
  Dataset data;
  for (const auto& p : paths) {
    const DescriptorTable t = descriptors_from_container(read_container(p));
    for (const auto& row : t.rows) {
      Sample s;
      s.h = row.h;
      s.labels = row.labels;
      s.session_id = row.session_id;
      s.user_id = row.user_id;
      data.push_back(std::move(s));
    }
  }
  return data;
}

int cmd_train(const std::vector<std::string>& descriptor_paths,
              const std::string& tasks_csv, const std::string& config_path,
              const std::string& out_model, const std::string& out_history,
              SeedOption& seed_opt, bool dry_run) {
  json jcfg = config_path.empty() ? json::object() : load_json(config_path);
  TrainConfig cfg = train_from_json(jcfg);
  if (!tasks_csv.empty()) {
    cfg.tasks.clear();
    std::string item;
    for (char ch : tasks_csv + ",") {
      if (ch == ',') {
        if (!item.empty()) cfg.tasks.push_back(task_from_string(item));
        item.clear();
      } else {
        item += ch;
      }
    }
  }
  cfg.rng_seed = seed_opt.resolve();

  Dataset all = dataset_from_tables(descriptor_paths);
  if (all.empty()) throw ConfigError("train: no descriptor rows loaded");

  SplitPlan plan;
  plan.seed = cfg.rng_seed;
  if (jcfg.contains("split")) {
    check_keys(jcfg.at("split"), {"holdout_users", "val_fraction"}, "split");
    plan.holdout_users =
        jcfg.at("split").value("holdout_users", std::vector<std::string>{});
    plan.val_fraction = jcfg.at("split").value("val_fraction", 0.25);
  }
  if (plan.holdout_users.empty())
    throw ConfigError("train: config must name split.holdout_users");

  std::vector<std::string> users;
  for (const auto& s : all) users.push_back(s.user_id);
  const SplitResult split = split_cross_user(users, plan);

  Dataset train_set, val_set;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (split.assignment[i] == SplitRole::kTrain) train_set.push_back(all[i]);
    if (split.assignment[i] == SplitRole::kVal) val_set.push_back(all[i]);
  }
  if (dry_run) {
    json plan_json;
    plan_json["rows"] = all.size();
    plan_json["train_rows"] = train_set.size();
    plan_json["val_rows"] = val_set.size();
    plan_json["tasks"] = json::array();
    for (Task t : cfg.tasks) plan_json["tasks"].push_back(to_string(t));
    std::cout << plan_json.dump(2) << "\n";
    return 0;
  }

  const TrainResult result = train(train_set, val_set, cfg);
  json manifest = json::object();
  for (const auto& [user, role] : split.manifest) manifest[user] = role;
  json extra;
  extra["split_manifest"] = manifest;
  write_container(out_model, container_from_model(result.model, cfg, extra));
  if (!out_history.empty()) write_text(out_history, history_csv(result.history));
  return 0;
}

int cmd_eval(const std::string& model_path,
             const std::vector<std::string>& descriptor_paths, const std::string& out,
             bool dry_run) {
  const Container mc = read_container(model_path);
  TrainConfig cfg;
  const MultiTaskModel model = model_from_container(mc, &cfg);
  Dataset all = dataset_from_tables(descriptor_paths);

  // Default evaluation set: users the stored manifest marks as test.
  Dataset test;
  if (mc.header.contains("split_manifest")) {
    const auto& manifest = mc.header.at("split_manifest");
    for (const auto& s : all) {
      const auto it = manifest.find(s.user_id);
      if (it != manifest.end() && it.value() == "test") test.push_back(s);
    }
  }
  if (test.empty()) test = all;
  if (dry_run) {
    json plan;
    plan["rows"] = test.size();
    std::cout << plan.dump(2) << "\n";
    return 0;
  }

  Matrix x(static_cast<Eigen::Index>(test.size()), model.input_dim);
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].h.size() != model.input_dim)
      throw ConfigError("eval: descriptor width does not match the model");
    x.row(static_cast<Eigen::Index>(i)) = test[i].h.transpose();
  }
  const ForwardResult fr = forward(model, x);

  json metrics;
  for (Task t : model.tasks) {
    if (t == Task::kVitals) {
      std::vector<double> preds, targets;
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (!test[i].labels.vital_rate_hz) continue;
        preds.push_back(fr.vitals(static_cast<Eigen::Index>(i)));
        targets.push_back(*test[i].labels.vital_rate_hz);
      }
      if (!preds.empty()) {
        double mse = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i)
          mse += (preds[i] - targets[i]) * (preds[i] - targets[i]);
        metrics["vitals"] = {{"mae", mae(preds, targets)},
                             {"mse", mse / preds.size()},
                             {"n", preds.size()}};
      }
      continue;
    }
    const bool det = t == Task::kDetection;
    const Matrix& logits = det ? fr.det_logits : fr.rec_logits;
    std::vector<int> preds, labels;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& l = test[i].labels;
      if (det && !l.presence) continue;
      if (!det && !l.activity) continue;
      int best = 0;
      for (int j = 1; j < logits.cols(); ++j)
        if (logits(static_cast<Eigen::Index>(i), j) >
            logits(static_cast<Eigen::Index>(i), best))
          best = j;
      preds.push_back(best);
      labels.push_back(det ? (*l.presence ? 1 : 0) : *l.activity);
    }
    if (!preds.empty()) {
      const int c = det ? 2 : model.n_classes;
      metrics[to_string(t)] = {{"top1", top1(preds, labels)},
                               {"macro_f1", macro_f1(preds, labels, c)},
                               {"n", preds.size()}};
    }
  }
  const std::string text = metrics.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_text(out, text);
  return 0;
}

int cmd_bench(const std::string& seeds_csv, int repeats, const std::string& variants_csv,
              const std::string& out_dir, const std::string& config_path,
              SeedOption& seed_opt, bool dry_run) {
  BenchConfig cfg;
  if (!config_path.empty()) {
    const json j = load_json(config_path);
    check_keys(j,
               {"version", "task", "window", "cp", "train", "label_fractions",
                "run_label_efficiency", "run_latency", "holdout_users", "val_fraction",
                "repeat_substreams", "raw_downsample_t"},
               "bench config");
    if (j.contains("task")) cfg.task = task_from_json_cfg(j.at("task"));
    if (j.contains("window")) {
      check_keys(j.at("window"), {"window", "stride", "pad_last"}, "window");
      cfg.window.window = j.at("window").value("window", cfg.window.window);
      cfg.window.stride = j.at("window").value("stride", cfg.window.stride);
      cfg.window.pad_last = j.at("window").value("pad_last", cfg.window.pad_last);
    }
    if (j.contains("cp")) cfg.features.cp = cp_from_json(j.at("cp"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    if (j.contains("label_fractions"))
      cfg.label_fractions = j.at("label_fractions").get<std::vector<double>>();
    cfg.run_label_efficiency = j.value("run_label_efficiency", cfg.run_label_efficiency);
    cfg.run_latency = j.value("run_latency", cfg.run_latency);
    cfg.holdout_users = j.value("holdout_users", cfg.holdout_users);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    cfg.features.raw_downsample_t = j.value("raw_downsample_t", 8);
  }
  if (!seeds_csv.empty()) {
    cfg.seeds.clear();
    std::string item;
    for (char ch : seeds_csv + ",") {
      if (ch == ',') {
        if (!item.empty()) cfg.seeds.push_back(std::stoull(item));
        item.clear();
      } else {
        item += ch;
      }
    }
  }
  if (repeats > 0) cfg.repeats = repeats;
  if (!variants_csv.empty()) {
    cfg.variants.clear();
    std::string item;
    for (char ch : variants_csv + ",") {
      if (ch == ',') {
        if (!item.empty()) cfg.variants.push_back(variant_from_string(item));
        item.clear();
      } else {
        item += ch;
      }
    }
  }
  // The sweep derives every stream from the per-run seeds; the master seed
  // contract still demands an explicit choice.
  (void)seed_opt.resolve();

  if (dry_run) {
    json plan;
    plan["seeds"] = cfg.seeds;
    plan["repeats"] = cfg.repeats;
    json vs = json::array();
    for (auto v : cfg.variants) vs.push_back(to_string(v));
    plan["variants"] = vs;
    plan["task"] = to_string(cfg.task.kind);
    plan["out"] = out_dir;
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  const BenchOutputs outputs = run_benchmark(cfg);
  write_bench_outputs(out_dir, outputs);
  return 0;
}

int cmd_inspect(const std::string& path) {
  const Container c = read_container(path);
  json header = c.header;
  json records = json::array();
  for (const auto& r : c.records) {
    json meta = r.meta;
    meta["dims"] = r.dims;
    records.push_back(meta);
  }
  header["records"] = records;
  std::cout << header.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sdp: synthetic CSI pipeline, CP-ALS pooling, multi-task benchmark"};
  app.require_subcommand(1);
  bool dry_run = false;
  app.add_flag("--dry-run", dry_run, "validate configuration and print the plan");

  SeedOption seed_gen, seed_dec, seed_train, seed_bench;

  auto* c_gen = app.add_subcommand("generate", "synthesize a CSI recording");
  std::string gen_config, gen_out;
  c_gen->add_option("--config", gen_config, "scene/grid/noise JSON")->required();
  c_gen->add_option("--out", gen_out, "output .sdpb path")->required();
  seed_gen.attach(c_gen);

  auto* c_ing = app.add_subcommand("ingest", "apply a canonical-order adapter");
  std::string ing_in, ing_adapter, ing_out;
  c_ing->add_option("--in", ing_in)->required();
  c_ing->add_option("--adapter", ing_adapter, "adapter descriptor JSON")->required();
  c_ing->add_option("--out", ing_out)->required();

  auto* c_win = app.add_subcommand("window", "slice a recording into data blocks");
  std::string win_in, win_out;
  int win_w = 64, win_s = 16;
  bool win_pad = false;
  c_win->add_option("--in", win_in)->required();
  c_win->add_option("--out", win_out)->required();
  c_win->add_option("--window", win_w, "window length W");
  c_win->add_option("--stride", win_s, "stride S");
  c_win->add_flag("--pad-last", win_pad, "emit a padded trailing block");

  auto* c_dec = app.add_subcommand("decompose", "CP-ALS over every block");
  std::string dec_in, dec_out, dec_view = "amplitude";
  CpConfig dec_cp;
  c_dec->add_option("--in", dec_in)->required();
  c_dec->add_option("--out", dec_out)->required();
  c_dec->add_option("--rank", dec_cp.rank, "CP rank R");
  c_dec->add_option("--sweeps", dec_cp.max_sweeps, "max ALS sweeps");
  c_dec->add_option("--eps", dec_cp.epsilon, "Tikhonov epsilon");
  c_dec->add_option("--tol", dec_cp.rel_tol, "relative fit-change tolerance");
  c_dec->add_option("--view", dec_view, "amplitude | real-imag | phase-diff | raw-phase");
  seed_dec.attach(c_dec);

  auto* c_pool = app.add_subcommand("pool", "pooled descriptors from decompositions");
  std::string pool_in, pool_table, pool_csv;
  c_pool->add_option("--in", pool_in)->required();
  c_pool->add_option("--out-table", pool_table, "binary descriptor table (.sdpb)");
  c_pool->add_option("--out-csv", pool_csv, "CSV descriptor table");

  auto* c_train = app.add_subcommand("train", "train the multi-task model");
  std::vector<std::string> train_in;
  std::string train_tasks, train_config, train_model, train_history;
  c_train->add_option("--descriptors", train_in, "descriptor tables")->required();
  c_train->add_option("--tasks", train_tasks, "comma list: detection,recognition,vitals");
  c_train->add_option("--config", train_config, "train config JSON");
  c_train->add_option("--out-model", train_model)->required();
  c_train->add_option("--out-history", train_history);
  seed_train.attach(c_train);

  auto* c_eval = app.add_subcommand("eval", "per-task metrics as JSON");
  std::string eval_model, eval_out;
  std::vector<std::string> eval_in;
  c_eval->add_option("--model", eval_model)->required();
  c_eval->add_option("--descriptors", eval_in)->required();
  c_eval->add_option("--out", eval_out, "metrics JSON path (default stdout)");

  auto* c_bench = app.add_subcommand("bench", "seeded benchmark sweep");
  std::string bench_seeds, bench_variants, bench_out, bench_config;
  int bench_repeats = 0;
  c_bench->add_option("--seeds", bench_seeds, "comma list, default 992,863,702,443,542");
  c_bench->add_option("--repeats", bench_repeats, "repeats per seed");
  c_bench->add_option("--variants", bench_variants, "comma list: full,no-cpals,no-phase");
  c_bench->add_option("--out", bench_out)->required();
  c_bench->add_option("--config", bench_config, "bench config JSON");
  seed_bench.attach(c_bench);

  auto* c_ins = app.add_subcommand("inspect", "print an SDPB header as JSON");
  std::string ins_path;
  c_ins->add_option("file", ins_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_gen->parsed()) return cmd_generate(gen_config, gen_out, seed_gen, dry_run);
    if (c_ing->parsed()) return cmd_ingest(ing_in, ing_adapter, ing_out, dry_run);
    if (c_win->parsed())
      return cmd_window(win_in, win_out, win_w, win_s, win_pad, dry_run);
    if (c_dec->parsed())
      return cmd_decompose(dec_in, dec_out, dec_cp, dec_view, seed_dec, dry_run);
    if (c_pool->parsed()) return cmd_pool(pool_in, pool_table, pool_csv, dry_run);
    if (c_train->parsed())
      return cmd_train(train_in, train_tasks, train_config, train_model, train_history,
                       seed_train, dry_run);
    if (c_eval->parsed()) return cmd_eval(eval_model, eval_in, eval_out, dry_run);
    if (c_bench->parsed())
      return cmd_bench(bench_seeds, bench_repeats, bench_variants, bench_out,
                       bench_config, seed_bench, dry_run);
    if (c_ins->parsed()) return cmd_inspect(ins_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
