#include "sdp/channel.hpp"

#include <algorithm>
#include <cmath>

#include "sdp/rng.hpp"

namespace sdp {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

bool finite(double v) { return std::isfinite(v); }
}  // namespace

void PathComponent::validate() const {
  if (!finite(alpha.real()) || !finite(alpha.imag()))
    throw ConfigError("path: alpha must be finite");
  if (!finite(tau0_s) || tau0_s < 0.0)
    throw ConfigError("path: tau0 must be finite and >= 0");
  if (const auto* s = std::get_if<SinusoidalDelay>(&delay)) {
    if (!finite(s->amplitude_s) || !finite(s->frequency_hz) || s->frequency_hz <= 0.0)
      throw ConfigError("path: sinusoidal delay needs finite amplitude and frequency > 0");
  }
  if (const auto* p = std::get_if<PiecewiseLinearDelay>(&delay)) {
    if (p->breakpoints.empty())
      throw ConfigError("path: piecewise-linear delay needs breakpoints");
    for (std::size_t i = 0; i < p->breakpoints.size(); ++i) {
      if (!finite(p->breakpoints[i].first) || !finite(p->breakpoints[i].second))
        throw ConfigError("path: non-finite breakpoint");
      if (i > 0 && p->breakpoints[i].first <= p->breakpoints[i - 1].first)
        throw ConfigError("path: breakpoint times must be strictly increasing");
    }
  }
  if (const auto* w = std::get_if<RandomWalkPhase>(&phase)) {
    if (!finite(w->step_std) || w->step_std < 0.0)
      throw ConfigError("path: random-walk step std must be finite and >= 0");
  }
}

double delay_at(const PathComponent& path, double t_s) {
  double offset = 0.0;
  if (const auto* s = std::get_if<SinusoidalDelay>(&path.delay)) {
    offset = s->amplitude_s * std::sin(kTwoPi * s->frequency_hz * t_s);
  } else if (const auto* p = std::get_if<PiecewiseLinearDelay>(&path.delay)) {
    const auto& bp = p->breakpoints;
    if (t_s <= bp.front().first) {
      offset = bp.front().second;
    } else if (t_s >= bp.back().first) {
      offset = bp.back().second;
    } else {
      auto it = std::upper_bound(
          bp.begin(), bp.end(), t_s,
          [](double t, const std::pair<double, double>& b) { return t < b.first; });
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      const double u = (t_s - lo.first) / (hi.first - lo.first);
      offset = lo.second + u * (hi.second - lo.second);
    }
  }
  return path.tau0_s + offset;
}

double phase_at(const PathComponent& path, std::uint64_t frame_index) {
  if (std::holds_alternative<ZeroPhase>(path.phase)) return 0.0;
  if (const auto* c = std::get_if<ConstantPhase>(&path.phase)) return c->value_rad;
  const auto& w = std::get<RandomWalkPhase>(path.phase);
  Rng rng(w.seed);
  double phi = 0.0;
  for (std::uint64_t i = 0; i < frame_index; ++i) phi += w.step_std * rng.normal();
  return phi;
}

Complex path_response(const PathComponent& path, double freq_hz, double t_s,
                      std::uint64_t frame_index) {
  if (!finite(freq_hz) || freq_hz <= 0.0)
    throw ConfigError("path_response: subcarrier frequency must be finite and > 0");
  if (!finite(t_s)) throw ConfigError("path_response: time must be finite");
  path.validate();
  const double angle =
      -(kTwoPi * freq_hz * delay_at(path, t_s) + phase_at(path, frame_index));
  return path.alpha * Complex{std::cos(angle), std::sin(angle)};
}

void SamplingGrid::validate() const {
  if (n_tx < 1 || n_rx < 1) throw ConfigError("grid: antenna counts must be >= 1");
  if (subcarrier_freqs_hz.size() < 2)
    throw ConfigError("grid: need at least 2 subcarrier frequencies");
  if (packet_times_s.empty()) throw ConfigError("grid: zero packets");
  for (std::size_t i = 0; i < subcarrier_freqs_hz.size(); ++i) {
    if (!finite(subcarrier_freqs_hz[i]) || subcarrier_freqs_hz[i] <= 0.0)
      throw ConfigError("grid: subcarrier frequencies must be finite and > 0");
    if (i > 0 && subcarrier_freqs_hz[i] <= subcarrier_freqs_hz[i - 1])
      throw ConfigError("grid: subcarrier frequencies must be strictly increasing");
  }
  for (std::size_t i = 0; i < packet_times_s.size(); ++i) {
    if (!finite(packet_times_s[i])) throw ConfigError("grid: non-finite packet time");
    if (i > 0 && packet_times_s[i] <= packet_times_s[i - 1])
      throw ConfigError("grid: packet times must be strictly increasing");
  }
  if (!pair_gains.empty() && pair_gains.size() != static_cast<std::size_t>(n_pairs()))
    throw ConfigError("grid: pair_gains size must equal n_rx * n_tx");
}

void NoiseConfig::validate() const {
  if (!finite(sigma2) || sigma2 < 0.0)
    throw ConfigError("noise: sigma2 must be finite and >= 0");
}

void MultipathScene::validate() const {
  if (paths.empty()) throw ConfigError("scene: empty path list");
  for (const auto& p : paths) p.validate();
  if (schedule.empty()) throw ConfigError("scene: empty label schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].t_begin >= schedule[i].t_end)
      throw ConfigError("scene: label interval must have t_begin < t_end");
    if (i > 0 && schedule[i].t_begin < schedule[i - 1].t_end)
      throw ConfigError("scene: label intervals overlap");
  }
}

TaskLabels MultipathScene::labels_at(double t_s) const {
  for (const auto& iv : schedule)
    if (t_s >= iv.t_begin && t_s < iv.t_end) return iv.labels;
  throw ConfigError("scene: no label interval covers packet time " + std::to_string(t_s));
}

void CsiRecording::validate() const {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && frames[i].timestamp_s <= frames[i - 1].timestamp_s)
      throw ConfigError("recording: timestamps must be strictly increasing");
    if (frames[i].values.rows() != frames[0].values.rows() ||
        frames[i].values.cols() != frames[0].values.cols())
      throw ConfigError("recording: frame dimensions differ");
  }
}

CsiRecording synth_csi(const MultipathScene& scene, const SamplingGrid& grid,
                       const NoiseConfig& noise) {
  scene.validate();
  grid.validate();
  noise.validate();

  const int A = grid.n_pairs();
  const int K = static_cast<int>(grid.subcarrier_freqs_hz.size());
  const std::size_t N = grid.packet_times_s.size();
  const std::size_t L = scene.paths.size();

  // Phase walks replayed once per path; index [l][n].
  std::vector<std::vector<double>> phases(L);
  for (std::size_t l = 0; l < L; ++l) {
    phases[l].assign(N, 0.0);
    if (const auto* w = std::get_if<RandomWalkPhase>(&scene.paths[l].phase)) {
      Rng rng(w->seed);
      double phi = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        phases[l][n] = phi;
        phi += w->step_std * rng.normal();
      }
    } else if (const auto* c = std::get_if<ConstantPhase>(&scene.paths[l].phase)) {
      for (std::size_t n = 0; n < N; ++n) phases[l][n] = c->value_rad;
    }
  }

  CsiRecording rec;
  rec.session_id = scene.session_id;
  rec.user_id = scene.user_id;
  for (int r = 0; r < grid.n_rx; ++r)
    for (int t = 0; t < grid.n_tx; ++t) rec.pair_order.emplace_back(r, t);
  for (int k = 0; k < K; ++k) rec.subcarrier_ids.push_back(k);
  rec.subcarrier_freqs_hz = grid.subcarrier_freqs_hz;

  Rng noise_rng(mix_seed(noise.rng_seed, 0));
  const double noise_scale = std::sqrt(noise.sigma2 / 2.0);

  rec.frames.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    const double t = grid.packet_times_s[n];
    CsiFrame frame;
    frame.timestamp_s = t;
    frame.labels = scene.labels_at(t);
    frame.values.resize(A, K);

    // Paths are antenna-independent; the per-pair multiplier scales the sum.
    Eigen::VectorXcd base(K);
    for (int k = 0; k < K; ++k) {
      const double f = grid.subcarrier_freqs_hz[static_cast<std::size_t>(k)];
      Complex acc{0.0, 0.0};
      for (std::size_t l = 0; l < L; ++l) {
        const auto& path = scene.paths[l];
        const double angle =
            -(kTwoPi * f * delay_at(path, t) + phases[l][n]);
        acc += path.alpha * Complex{std::cos(angle), std::sin(angle)};
      }
      base(k) = acc;
    }
    for (int a = 0; a < A; ++a) frame.values.row(a) = base.transpose() * grid.pair_gain(a);
    if (noise.sigma2 > 0.0) {
      for (int a = 0; a < A; ++a)
        for (int k = 0; k < K; ++k)
          frame.values(a, k) += Complex{noise_scale * noise_rng.normal(),
                                        noise_scale * noise_rng.normal()};
    }
    rec.frames.push_back(std::move(frame));
  }
  return rec;
}

namespace {

// Unbounded interval so any packet grid is covered.
std::vector<LabelInterval> whole_time(const TaskLabels& labels) {
  return {LabelInterval{-1e300, 1e300, labels}};
}

PhaseProcess cpe_process(const PresetParams& p, std::uint64_t seed) {
  if (p.cpe_walk_std <= 0.0) return ZeroPhase{};
  // One shared walk: a common phase error rotates every path identically.
  return RandomWalkPhase{p.cpe_walk_std, mix_seed(seed, 9001)};
}

// A dominant quasi-line-of-sight path plus weaker reflectors, all inside a
// delay band well below the movers'. The separation keeps every mover's
// coupling angle sweeping across the subcarrier band, so no mover can fall
// into an amplitude-invisible geometry at every subcarrier at once.
void add_static_paths(MultipathScene& scene, int count, Rng& rng,
                      const PhaseProcess& cpe) {
  for (int i = 0; i < count; ++i) {
    PathComponent p;
    const double mag = i == 0 ? rng.uniform(2.2, 2.4) : rng.uniform(0.15, 0.3);
    const double ang = rng.uniform(0.0, kTwoPi);
    p.alpha = Complex{mag * std::cos(ang), mag * std::sin(ang)};
    p.tau0_s = rng.uniform(15e-9, 30e-9);
    p.delay = ConstantDelay{};
    p.phase = cpe;
    scene.paths.push_back(p);
  }
}

// Repeated motion bursts as a sampled piecewise-linear trajectory: raised-
// cosine envelope pulses of the given width recurring at the given period,
// optionally carrying a sinusoid. carrier_hz = 0 leaves bare pulses.
PiecewiseLinearDelay pulsed_motion(double depth_s, double pulse_width_s,
                                   double period_s, double carrier_hz,
                                   double offset_s, double horizon_s = 40.0) {
  PiecewiseLinearDelay d;
  double dt = pulse_width_s / 6.0;
  if (carrier_hz > 0.0) dt = std::min(dt, 1.0 / (6.0 * carrier_hz));
  dt = std::min(dt, period_s / 12.0);
  for (double t = -period_s; t < horizon_s; t += dt) {
    const double in_period = t - offset_s - period_s * std::floor((t - offset_s) / period_s);
    double value = 0.0;
    if (in_period < pulse_width_s) {
      const double u = in_period / pulse_width_s;
      const double envelope = 0.5 * (1.0 - std::cos(kTwoPi * u));
      const double carrier =
          carrier_hz > 0.0 ? std::sin(kTwoPi * carrier_hz * in_period) : 1.0;
      value = depth_s * envelope * carrier;
    }
    d.breakpoints.emplace_back(t, value);
  }
  return d;
}

// Breathing trajectory: each breath is a biphasic excursion of fixed width,
// after which the chest settles at a new random resting level. The level
// ramps to its next value inside the excursion, so resting segments are
// piecewise constant; their lengths, one breath period minus the excursion,
// end up as separate components whose temporal spreads track the rate.
PiecewiseLinearDelay breathing_track(double depth_s, double excursion_width_s,
                                     double period_s, double offset_s,
                                     double level_scale_s, Rng& rng,
                                     double horizon_s = 40.0) {
  PiecewiseLinearDelay d;
  double level = level_scale_s * rng.normal();
  double t = -period_s + offset_s;
  d.breakpoints.emplace_back(t - period_s, level);
  while (t < horizon_s) {
    const double next_level = level_scale_s * rng.normal();
    const int steps = 12;
    for (int i = 0; i <= steps; ++i) {
      const double u = static_cast<double>(i) / steps;
      const double envelope = 0.5 * (1.0 - std::cos(kTwoPi * u));
      const double wiggle = depth_s * envelope * std::sin(kTwoPi * u);
      d.breakpoints.emplace_back(t + u * excursion_width_s,
                                 level + u * (next_level - level) + wiggle);
    }
    level = next_level;
    // flat resting segment until the next breath
    if (t + period_s > t + excursion_width_s + 1e-9)
      d.breakpoints.emplace_back(t + period_s - 1e-3, level);
    t += period_s;
  }
  return d;
}

}  // namespace

MultipathScene scene_preset(SceneKind kind, const PresetParams& params,
                            std::uint64_t seed) {
  Rng rng(mix_seed(seed, 1));
  MultipathScene scene;
  scene.kind = kind;
  const PhaseProcess cpe = cpe_process(params, seed);

  switch (kind) {
    case SceneKind::kStaticEmpty: {
      add_static_paths(scene, params.n_static_paths, rng, cpe);
      TaskLabels labels;
      labels.presence = false;
      scene.schedule = whole_time(labels);
      break;
    }
    case SceneKind::kPresence: {
      add_static_paths(scene, params.n_static_paths, rng, cpe);
      // Occupancy shows up as repeated movement bursts plus gentle fidgeting.
      for (int i = 0; i < 2; ++i) {
        PathComponent p;
        const double mag = rng.uniform(0.35, 0.8);
        const double ang = rng.uniform(0.0, kTwoPi);
        p.alpha = Complex{mag * std::cos(ang), mag * std::sin(ang)};
        p.tau0_s = rng.uniform(52e-9, 68e-9);
        const double swing = rng.uniform(1.8, 2.6) / (kTwoPi * 5.18e9);
        p.delay = pulsed_motion(swing, rng.uniform(0.7, 1.1), rng.uniform(2.2, 2.8),
                                rng.uniform(0.9, 1.3), rng.uniform(0.0, 2.8));
        p.phase = cpe;
        scene.paths.push_back(p);
      }
      PathComponent fidget;
      const double mag = rng.uniform(0.2, 0.4);
      const double ang = rng.uniform(0.0, kTwoPi);
      fidget.alpha = Complex{mag * std::cos(ang), mag * std::sin(ang)};
      fidget.tau0_s = rng.uniform(45e-9, 75e-9);
      fidget.delay = SinusoidalDelay{rng.uniform(0.03e-9, 0.05e-9), rng.uniform(0.8, 1.4)};
      fidget.phase = cpe;
      scene.paths.push_back(fidget);
      TaskLabels labels;
      labels.presence = true;
      scene.schedule = whole_time(labels);
      break;
    }
    case SceneKind::kGesture: {
      if (params.n_classes < 1 || params.class_id < 0 ||
          params.class_id >= params.n_classes)
        throw ConfigError("scene_preset: gesture class_id out of range");
      add_static_paths(scene, params.n_static_paths, rng, cpe);
      // Family per class: mover count, burst width, phase swing and carrier
      // rate all step with the class index; the seed only jitters within a
      // family and shifts the burst timing.
      const int c = params.class_id;
      // Class c activates a prefix of a fixed tone table; each mover sways
      // continuously at its own rate. Stationary motion keeps every window's
      // evidence identical, and the active-tone count is read off the
      // component spectrum. Counts step 1,2,4,6 so neighbours stay apart.
      constexpr int kMoverCount[4] = {1, 2, 4, 6};
      const int n_movers = kMoverCount[c % 4];
      constexpr double kToneTableHz[6] = {0.55, 0.9, 1.3, 1.75, 2.3, 3.0};
      for (int i = 0; i < n_movers; ++i) {
        // Two scatter points per mover share one trajectory; their summed
        // coupling keeps the tone visible under any phasor geometry.
        const double tone = kToneTableHz[i % 6] * rng.uniform(0.97, 1.03);
        const double swing_rad = 0.3 * std::pow(1.22, i) * rng.uniform(0.95, 1.05);
        const SinusoidalDelay sway{swing_rad / (kTwoPi * 5.18e9), tone};
        // Fixed magnitudes and a scatter spacing that decorrelates over the
        // band keep every tone's energy stable across draws.
        const double tau_base = rng.uniform(52e-9, 56e-9);
        const double tau_gap = 25e-9;  // one full sweep across the 40 MHz band
        for (int scatter = 0; scatter < 2; ++scatter) {
          PathComponent p;
          const double ang = rng.uniform(0.0, kTwoPi);
          p.alpha = Complex{0.42 * std::cos(ang), 0.42 * std::sin(ang)};
          p.tau0_s = tau_base + scatter * tau_gap;
          p.delay = sway;
          p.phase = cpe;
          scene.paths.push_back(p);
        }
      }
      TaskLabels labels;
      labels.presence = true;
      labels.activity = params.class_id;
      scene.schedule = whole_time(labels);
      break;
    }
    case SceneKind::kGait: {
      if (params.n_users < 1 || params.user_id < 0 || params.user_id >= params.n_users)
        throw ConfigError("scene_preset: gait user_id out of range");
      add_static_paths(scene, params.n_static_paths, rng, cpe);
      // Family per user: stride frequency / depth pairs.
      const double stride_hz = (0.6 + 0.25 * params.user_id) * rng.uniform(0.97, 1.03);
      const double depth = (0.06e-9 + 0.02e-9 * params.user_id);
      for (int i = 0; i < 2; ++i) {
        PathComponent p;
        const double mag = rng.uniform(0.35, 0.75);
        const double ang = rng.uniform(0.0, kTwoPi);
        p.alpha = Complex{mag * std::cos(ang), mag * std::sin(ang)};
        p.tau0_s = rng.uniform(52e-9, 68e-9);
        p.delay = SinusoidalDelay{depth * (i == 0 ? 1.0 : 0.6),
                                  stride_hz * (i == 0 ? 1.0 : 2.0)};
        p.phase = cpe;
        scene.paths.push_back(p);
      }
      TaskLabels labels;
      labels.presence = true;
      labels.activity = params.user_id;
      scene.schedule = whole_time(labels);
      break;
    }
    case SceneKind::kBreathing: {
      if (params.rate_hz <= 0.0)
        throw ConfigError("scene_preset: breathing rate must be > 0");
      add_static_paths(scene, params.n_static_paths, rng, cpe);
      // Chest motion: a smooth sway at the rate (dominates the phase
      // spectrum there) plus a biphasic inhale-exhale excursion each breath.
      // The excursion is one carrier cycle inside the envelope, so it stays
      // zero-mean and its width, half the breath period, reaches the
      // descriptor through the translation-invariant temporal spread.
      const double period = 1.0 / params.rate_hz;
      const double pulse_width = std::min(0.8, 0.6 * period);
      const double offset = rng.uniform(0.0, period);
      const double sway_swing = rng.uniform(0.65, 0.8) / (kTwoPi * 5.18e9);
      const double pulse_swing = rng.uniform(1.0, 1.2) / (kTwoPi * 5.18e9);
      PathComponent chest;
      double ang = rng.uniform(0.0, kTwoPi);
      chest.alpha = Complex{0.5 * std::cos(ang), 0.5 * std::sin(ang)};
      chest.tau0_s = rng.uniform(52e-9, 68e-9);
      chest.delay = SinusoidalDelay{sway_swing, params.rate_hz};
      chest.phase = cpe;
      scene.paths.push_back(chest);
      // Successive breaths settle at picometer-scale different chest
      // positions, rotating the resting phasor between breaths; the resting
      // segments then separate into components whose spreads track the
      // breath period.
      const double level_scale = 1.1 / (kTwoPi * 5.18e9);
      for (int scatter = 0; scatter < 2; ++scatter) {
        PathComponent inhale;
        ang = rng.uniform(0.0, kTwoPi);
        inhale.alpha = Complex{0.45 * std::cos(ang), 0.45 * std::sin(ang)};
        inhale.tau0_s = chest.tau0_s + 25e-9 * scatter + rng.uniform(1e-9, 3e-9);
        inhale.delay = breathing_track(pulse_swing, pulse_width, period, offset,
                                       level_scale, rng);
        inhale.phase = cpe;
        scene.paths.push_back(inhale);
      }
      TaskLabels labels;
      labels.presence = true;
      labels.vital_rate_hz = params.rate_hz;
      scene.schedule = whole_time(labels);
      break;
    }
    case SceneKind::kCustom:
      throw ConfigError("scene_preset: custom scenes are built explicitly, not from a preset");
  }
  return scene;
}

SceneKind scene_kind_from_string(const std::string& name) {
  if (name == "static-empty") return SceneKind::kStaticEmpty;
  if (name == "presence") return SceneKind::kPresence;
  if (name == "gesture") return SceneKind::kGesture;
  if (name == "gait") return SceneKind::kGait;
  if (name == "breathing") return SceneKind::kBreathing;
  if (name == "custom") return SceneKind::kCustom;
  throw ConfigError("unknown scene kind: " + name);
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::kStaticEmpty: return "static-empty";
    case SceneKind::kPresence: return "presence";
    case SceneKind::kGesture: return "gesture";
    case SceneKind::kGait: return "gait";
    case SceneKind::kBreathing: return "breathing";
    case SceneKind::kCustom: return "custom";
  }
  return "custom";
}

}  // namespace sdp
