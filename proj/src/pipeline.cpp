#include "sdp/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "sdp/rng.hpp"

namespace sdp {

PipelineVariant variant_from_string(const std::string& name) {
  if (name == "full") return PipelineVariant::kFull;
  if (name == "no-cpals") return PipelineVariant::kNoCpals;
  if (name == "no-phase") return PipelineVariant::kNoPhase;
  throw ConfigError("unknown pipeline variant: " + name);
}

std::string to_string(PipelineVariant v) {
  switch (v) {
    case PipelineVariant::kFull: return "full";
    case PipelineVariant::kNoCpals: return "no-cpals";
    case PipelineVariant::kNoPhase: return "no-phase";
  }
  return "full";
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n && !failed.load();
           i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

// Static-clutter removal: subtract the per-(a, k) mean over valid frames.
// Time-invariant structure (walls, antenna gains after dB scaling) drops
// out; the movers' dynamics carry the block.
Tensor3d remove_temporal_mean(Tensor3d x, const std::vector<bool>& mask) {
  const Eigen::Index a_dim = x.dim(0), k_dim = x.dim(1), t_dim = x.dim(2);
  for (Eigen::Index a = 0; a < a_dim; ++a)
    for (Eigen::Index k = 0; k < k_dim; ++k) {
      double sum = 0.0;
      Eigen::Index n = 0;
      for (Eigen::Index t = 0; t < t_dim; ++t) {
        if (!mask.empty() && !mask[static_cast<std::size_t>(t)]) continue;
        sum += x(a, k, t);
        ++n;
      }
      const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
      for (Eigen::Index t = 0; t < t_dim; ++t) {
        if (!mask.empty() && !mask[static_cast<std::size_t>(t)]) continue;
        x(a, k, t) -= mean;
      }
    }
  return x;
}

double tensor_mean(const Tensor3d& x) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += x.data()[i];
  return x.size() > 0 ? s / static_cast<double>(x.size()) : 0.0;
}

double tensor_std(const Tensor3d& x, double mean) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x.data()[i] - mean;
    s += d * d;
  }
  return x.size() > 0 ? std::sqrt(s / static_cast<double>(x.size())) : 0.0;
}

// Decompose one real view: record its raw mean and the clutter-removed
// dynamic scale, then feed the unit-scale field to the solver. Component
// weights become comparable across sessions; the absolute dynamic scale
// still reaches the descriptor through the global amp_std slot.
Vector pooled_branch(const Tensor3d& view, const std::vector<bool>& mask,
                     const CpConfig& cp, std::uint64_t seed) {
  const double mean0 = tensor_mean(view);
  Tensor3d x = remove_temporal_mean(view, mask);
  const double std0 = tensor_std(x, 0.0);
  if (std0 > 0.0)
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] /= std0;
  CpConfig cfg = cp;
  cfg.rng_seed = seed;
  const CpDecomposition d = cp_als(x, cfg);
  return pool(d, mean0, std0).h;
}

// Mean-pool the time axis by `factor`, then flatten row-major.
Vector flatten_downsampled(const Tensor3d& x, int factor) {
  const Eigen::Index a_dim = x.dim(0), k_dim = x.dim(1), t_dim = x.dim(2);
  const Eigen::Index t_out = std::max<Eigen::Index>(1, t_dim / factor);
  Vector out(a_dim * k_dim * t_out);
  Eigen::Index idx = 0;
  for (Eigen::Index a = 0; a < a_dim; ++a)
    for (Eigen::Index k = 0; k < k_dim; ++k)
      for (Eigen::Index t = 0; t < t_out; ++t) {
        double s = 0.0;
        Eigen::Index count = 0;
        for (Eigen::Index u = t * factor; u < std::min(t_dim, (t + 1) * factor); ++u) {
          s += x(a, k, u);
          ++count;
        }
        out(idx++) = s / static_cast<double>(count);
      }
  return out;
}

}  // namespace

std::vector<Sample> session_features(const std::vector<DataBlock>& blocks,
                                     const FeatureConfig& cfg,
                                     std::uint64_t session_seed) {
  if (blocks.empty()) return {};
  const SessionStats stats = compute_session_stats(blocks);

  std::vector<Sample> out(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t i) {
    const DataBlock& b = blocks[i];
    const Tensor3d amp = normalized_amplitude(b, stats);
    Vector h;
    switch (cfg.variant) {
      case PipelineVariant::kFull: {
        const Vector h_amp = pooled_branch(
            amp, b.mask, cfg.cp, mix_seed(session_seed, 2 * static_cast<std::uint64_t>(i)));
        const Vector h_phase = pooled_branch(
            phase_diff(b), b.mask, cfg.cp,
            mix_seed(session_seed, 2 * static_cast<std::uint64_t>(i) + 1));
        h.resize(h_amp.size() + h_phase.size());
        h << h_amp, h_phase;
        break;
      }
      case PipelineVariant::kNoPhase: {
        const Vector h_amp = pooled_branch(
            amp, b.mask, cfg.cp, mix_seed(session_seed, 2 * static_cast<std::uint64_t>(i)));
        const Vector h_phase = pooled_branch(
            raw_phase(b), b.mask, cfg.cp,
            mix_seed(session_seed, 2 * static_cast<std::uint64_t>(i) + 1));
        h.resize(h_amp.size() + h_phase.size());
        h << h_amp, h_phase;
        break;
      }
      case PipelineVariant::kNoCpals: {
        const Vector f_amp =
            flatten_downsampled(remove_temporal_mean(amp, b.mask), cfg.raw_downsample_t);
        const Vector f_phase = flatten_downsampled(
            remove_temporal_mean(phase_diff(b), b.mask), cfg.raw_downsample_t);
        h.resize(f_amp.size() + f_phase.size());
        h << f_amp, f_phase;
        break;
      }
    }
    Sample s;
    s.h = std::move(h);
    s.labels = b.labels;
    s.session_id = b.session_id;
    s.user_id = b.user_id;
    out[i] = std::move(s);
  });
  return out;
}

DecompositionSet decompose_blocks(const std::vector<DataBlock>& blocks,
                                  const CpConfig& cfg, const std::string& view,
                                  std::uint64_t seed) {
  DecompositionSet set;
  set.cp = cfg;
  set.cp.rng_seed = seed;
  set.view = view;
  if (view != "amplitude" && view != "phase-diff" && view != "raw-phase" &&
      view != "real-imag")
    throw ConfigError("decompose: unknown view '" + view + "'");
  if (blocks.empty()) return set;

  const SessionStats stats = compute_session_stats(blocks);
  set.items.resize(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t i) {
    const DataBlock& b = blocks[i];
    Tensor3d x;
    if (view == "amplitude") {
      x = normalized_amplitude(b, stats);
    } else if (view == "phase-diff") {
      x = phase_diff(b);
    } else if (view == "raw-phase") {
      x = raw_phase(b);
    } else {
      x = real_imag_folded(b);
    }
    DecompositionItem item;
    item.amp_mean = tensor_mean(x);
    x = remove_temporal_mean(std::move(x), b.mask);
    item.amp_std = tensor_std(x, 0.0);
    if (item.amp_std > 0.0)
      for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] /= item.amp_std;
    CpConfig c = cfg;
    c.rng_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    item.decomp = cp_als(x, c);
    item.labels = b.labels;
    item.center_timestamp = b.center_timestamp;
    item.session_id = b.session_id;
    item.user_id = b.user_id;
    item.block_index = b.block_index;
    set.items[i] = std::move(item);
  });
  return set;
}

DescriptorTable pool_decompositions(const DecompositionSet& set) {
  DescriptorTable table;
  table.rank = set.cp.rank;
  table.rows.resize(set.items.size());
  parallel_for(set.items.size(), [&](std::size_t i) {
    const auto& item = set.items[i];
    DescriptorRow row;
    row.h = pool(item.decomp, item.amp_mean, item.amp_std).h;
    row.labels = item.labels;
    row.session_id = item.session_id;
    row.user_id = item.user_id;
    row.block_index = item.block_index;
    row.center_timestamp = item.center_timestamp;
    table.rows[i] = std::move(row);
  });
  return table;
}

SamplingGrid make_grid(const SyntheticTaskConfig& cfg, std::uint64_t user_seed) {
  SamplingGrid grid;
  grid.n_rx = cfg.n_rx;
  grid.n_tx = cfg.n_tx;
  for (int k = 0; k < cfg.n_subcarriers; ++k)
    grid.subcarrier_freqs_hz.push_back(cfg.carrier_hz + k * cfg.subcarrier_spacing_hz);
  grid.packet_times_s.reserve(static_cast<std::size_t>(cfg.n_frames));
  for (int n = 0; n < cfg.n_frames; ++n)
    grid.packet_times_s.push_back(n / cfg.packet_rate_hz);
  // Mild per-user antenna texture.
  Rng rng(mix_seed(user_seed, 31));
  for (int a = 0; a < grid.n_pairs(); ++a) {
    const double mag = rng.uniform(0.95, 1.05);
    const double ang = rng.uniform(-0.15, 0.15);
    grid.pair_gains.push_back(Complex{mag * std::cos(ang), mag * std::sin(ang)});
  }
  return grid;
}

std::vector<CsiRecording> generate_task_recordings(const SyntheticTaskConfig& cfg,
                                                   std::uint64_t seed) {
  std::vector<CsiRecording> out;
  int session_counter = 0;

  auto synth_one = [&](SceneKind kind, const PresetParams& params, int user,
                       std::uint64_t scene_seed) {
    MultipathScene scene = scene_preset(kind, params, scene_seed);
    scene.user_id = "u" + std::to_string(user);
    scene.session_id = "s" + std::to_string(session_counter++);
    const SamplingGrid grid = make_grid(cfg, mix_seed(seed, 7000 + static_cast<std::uint64_t>(user)));
    NoiseConfig noise;
    noise.sigma2 = cfg.noise_sigma2;
    noise.rng_seed = mix_seed(scene_seed, 5);
    out.push_back(synth_csi(scene, grid, noise));
  };

  switch (cfg.kind) {
    case SceneKind::kGesture:
    case SceneKind::kGait: {
      for (int u = 0; u < cfg.n_users; ++u) {
        for (int c = 0; c < cfg.n_classes; ++c) {
          for (int s = 0; s < cfg.sessions_per_class; ++s) {
            PresetParams p;
            p.cpe_walk_std = cfg.cpe_walk_std;
            if (cfg.kind == SceneKind::kGesture) {
              p.class_id = c;
              p.n_classes = cfg.n_classes;
            } else {
              p.user_id = c;  // gait identity class
              p.n_users = cfg.n_classes;
            }
            synth_one(cfg.kind, p, u,
                      mix_seed(seed, 100000 + 1000 * static_cast<std::uint64_t>(u) +
                                         10 * static_cast<std::uint64_t>(c) +
                                         static_cast<std::uint64_t>(s)));
          }
        }
      }
      break;
    }
    case SceneKind::kPresence:
    case SceneKind::kStaticEmpty: {
      // Detection data alternates empty and occupied sessions per user.
      for (int u = 0; u < cfg.n_users; ++u) {
        for (int s = 0; s < cfg.recordings_per_user; ++s) {
          PresetParams p;
          p.cpe_walk_std = cfg.cpe_walk_std;
          const SceneKind kind =
              s % 2 == 0 ? SceneKind::kStaticEmpty : SceneKind::kPresence;
          synth_one(kind, p, u,
                    mix_seed(seed, 200000 + 1000 * static_cast<std::uint64_t>(u) +
                                       static_cast<std::uint64_t>(s)));
        }
      }
      break;
    }
    case SceneKind::kBreathing: {
      for (int u = 0; u < cfg.n_users; ++u) {
        for (int s = 0; s < cfg.recordings_per_user; ++s) {
          const std::uint64_t scene_seed =
              mix_seed(seed, 300000 + 1000 * static_cast<std::uint64_t>(u) +
                                 static_cast<std::uint64_t>(s));
          Rng rate_rng(mix_seed(scene_seed, 17));
          PresetParams p;
          p.cpe_walk_std = cfg.cpe_walk_std;
          p.rate_hz = rate_rng.uniform(cfg.rate_min_hz, cfg.rate_max_hz);
          synth_one(SceneKind::kBreathing, p, u, scene_seed);
        }
      }
      break;
    }
    case SceneKind::kCustom:
      throw ConfigError("generate_task_recordings: custom scenes are not a task family");
  }
  return out;
}

}  // namespace sdp
