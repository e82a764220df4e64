#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "sdp/channel.hpp"
#include "sdp/rng.hpp"

using namespace sdp;

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Test-only DFT oracle: index of the strongest positive-frequency bin.
double dominant_frequency_hz(const std::vector<double>& signal, double sample_rate) {
  const std::size_t n = signal.size();
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);
  double best_mag = -1.0;
  std::size_t best_bin = 0;
  for (std::size_t bin = 1; bin <= n / 2; ++bin) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double angle = -kTwoPi * static_cast<double>(bin * i) / static_cast<double>(n);
      acc += (signal[i] - mean) * std::complex<double>{std::cos(angle), std::sin(angle)};
    }
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best_bin = bin;
    }
  }
  return static_cast<double>(best_bin) * sample_rate / static_cast<double>(n);
}

std::vector<double> unwrap(std::vector<double> phases) {
  for (std::size_t i = 1; i < phases.size(); ++i) {
    double d = phases[i] - phases[i - 1];
    while (d > 3.14159265358979) {
      phases[i] -= kTwoPi;
      d = phases[i] - phases[i - 1];
    }
    while (d < -3.14159265358979) {
      phases[i] += kTwoPi;
      d = phases[i] - phases[i - 1];
    }
  }
  return phases;
}

SamplingGrid small_grid(int n_frames = 128, double rate_hz = 8.0) {
  SamplingGrid g;
  g.n_rx = 2;
  g.n_tx = 2;
  for (int k = 0; k < 4; ++k) g.subcarrier_freqs_hz.push_back(5.18e9 + k * 1.25e6);
  for (int n = 0; n < n_frames; ++n) g.packet_times_s.push_back(n / rate_hz);
  return g;
}

MultipathScene single_path_scene(const PathComponent& p, const TaskLabels& labels = {}) {
  MultipathScene s;
  s.paths = {p};
  s.schedule = {LabelInterval{-1e300, 1e300, labels}};
  return s;
}

}  // namespace

TEST_CASE("path with zero delay and zero phase responds with exactly 1") {
  PathComponent p;
  p.alpha = Complex{1.0, 0.0};
  p.tau0_s = 0.0;
  CHECK(path_response(p, 5.2e9, 3.7) == Complex{1.0, 0.0});
}

TEST_CASE("half-cycle delay flips the sign") {
  PathComponent p;
  p.alpha = Complex{1.0, 0.0};
  const double f = 2.0e9;
  p.tau0_s = 0.5 / f;  // f * tau = 0.5
  const Complex r = path_response(p, f, 0.0);
  CHECK(r.real() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(r.imag()) < 1e-9);
}

TEST_CASE("sinusoidal delay modulation shows up at its own frequency") {
  PathComponent p;
  p.alpha = Complex{1.0, 0.0};
  p.tau0_s = 30e-9;
  p.delay = SinusoidalDelay{0.02e-9, 0.25};

  const double rate = 8.0;
  const double f_k = 5.2e9;
  std::vector<double> phase;
  for (int n = 0; n < 256; ++n) {
    const Complex r = path_response(p, f_k, n / rate);
    phase.push_back(std::arg(r));
  }
  const double peak = dominant_frequency_hz(unwrap(phase), rate);
  CHECK(peak == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("non-finite and negative path parameters are rejected") {
  PathComponent p;
  p.tau0_s = -1.0;
  CHECK_THROWS_AS(path_response(p, 5e9, 0.0), ConfigError);
  p.tau0_s = 0.0;
  p.alpha = Complex{std::numeric_limits<double>::infinity(), 0.0};
  CHECK_THROWS_AS(path_response(p, 5e9, 0.0), ConfigError);
  p.alpha = Complex{1.0, 0.0};
  CHECK_THROWS_AS(path_response(p, 0.0, 0.0), ConfigError);
  p.delay = SinusoidalDelay{1e-9, 0.0};
  CHECK_THROWS_AS(path_response(p, 5e9, 0.0), ConfigError);
}

TEST_CASE("static single-path recording is constant over time") {
  PathComponent p;
  p.alpha = Complex{0.8, -0.3};
  p.tau0_s = 25e-9;
  const MultipathScene scene = single_path_scene(p);
  const SamplingGrid grid = small_grid();
  NoiseConfig noise;  // sigma2 = 0
  const CsiRecording rec = synth_csi(scene, grid, noise);
  REQUIRE(rec.frames.size() == grid.packet_times_s.size());
  for (const auto& frame : rec.frames)
    CHECK((frame.values - rec.frames[0].values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("same seed gives bit-identical recordings") {
  PresetParams params;
  params.cpe_walk_std = 0.05;
  const MultipathScene scene = scene_preset(SceneKind::kPresence, params, 42);
  const SamplingGrid grid = small_grid();
  NoiseConfig noise;
  noise.sigma2 = 0.01;
  noise.rng_seed = 7;
  const CsiRecording r1 = synth_csi(scene, grid, noise);
  const CsiRecording r2 = synth_csi(scene, grid, noise);
  REQUIRE(r1.frames.size() == r2.frames.size());
  for (std::size_t i = 0; i < r1.frames.size(); ++i)
    CHECK(r1.frames[i].values == r2.frames[i].values);
}

TEST_CASE("breathing scene produces a spectral peak at the breathing rate") {
  PresetParams params;
  params.rate_hz = 0.3;
  const MultipathScene scene = scene_preset(SceneKind::kBreathing, params, 11);
  SamplingGrid grid = small_grid(512, 8.0);
  NoiseConfig noise;  // clean
  const CsiRecording rec = synth_csi(scene, grid, noise);

  // Phase at a fixed (pair, subcarrier); bin spacing 8/512 Hz.
  std::vector<double> phase;
  for (const auto& f : rec.frames) phase.push_back(std::arg(f.values(0, 0)));
  const double peak = dominant_frequency_hz(unwrap(phase), 8.0);
  CHECK(std::abs(peak - 0.3) <= 8.0 / 512.0 + 1e-9);
}

TEST_CASE("noise statistics match sigma2 within 3 percent") {
  PathComponent p;
  p.alpha = Complex{0.0, 0.0};  // alpha = 0: output is pure noise
  const MultipathScene scene = single_path_scene(p);
  SamplingGrid grid = small_grid(1600, 100.0);  // 1600*4*4 = 25600 entries... need >= 1e5
  for (int n = 1600; n < 6400; ++n) grid.packet_times_s.push_back(n / 100.0);
  NoiseConfig noise;
  noise.sigma2 = 0.25;
  noise.rng_seed = 5;
  const CsiRecording rec = synth_csi(scene, grid, noise);
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& f : rec.frames) {
    for (int a = 0; a < f.values.rows(); ++a)
      for (int k = 0; k < f.values.cols(); ++k) {
        acc += std::norm(f.values(a, k));
        ++count;
      }
  }
  REQUIRE(count >= 100000);
  const double sample_var = acc / static_cast<double>(count);
  CHECK(std::abs(sample_var - 0.25) / 0.25 < 0.03);
}

TEST_CASE("responses are additive over path subsets") {
  PresetParams params;
  const MultipathScene s1 = scene_preset(SceneKind::kPresence, params, 1);
  const MultipathScene s2 = scene_preset(SceneKind::kGesture, [] {
    PresetParams p;
    p.class_id = 1;
    p.n_classes = 4;
    return p;
  }(), 2);
  MultipathScene joint = s1;
  joint.paths.insert(joint.paths.end(), s2.paths.begin(), s2.paths.end());

  const SamplingGrid grid = small_grid(32);
  NoiseConfig noise;  // sigma2 = 0
  const CsiRecording r1 = synth_csi(s1, grid, noise);
  const CsiRecording r2 = synth_csi(s2, grid, noise);
  const CsiRecording rj = synth_csi(joint, grid, noise);
  for (std::size_t i = 0; i < rj.frames.size(); ++i) {
    const Eigen::MatrixXcd sum = r1.frames[i].values + r2.frames[i].values;
    CHECK((rj.frames[i].values - sum).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("synth_csi rejects an empty path list and an empty grid") {
  MultipathScene scene;
  scene.schedule = {LabelInterval{0.0, 1.0, {}}};
  const SamplingGrid grid = small_grid();
  CHECK_THROWS_AS(synth_csi(scene, grid, {}), ConfigError);

  PathComponent p;
  MultipathScene ok = single_path_scene(p);
  SamplingGrid empty = grid;
  empty.packet_times_s.clear();
  CHECK_THROWS_AS(synth_csi(ok, empty, {}), ConfigError);
}

TEST_CASE("static-empty preset labels every frame absent") {
  const MultipathScene scene = scene_preset(SceneKind::kStaticEmpty, {}, 3);
  const CsiRecording rec = synth_csi(scene, small_grid(16), {});
  for (const auto& f : rec.frames) {
    REQUIRE(f.labels.presence.has_value());
    CHECK_FALSE(*f.labels.presence);
  }
}

TEST_CASE("breathing preset carries its rate as the vital label") {
  PresetParams params;
  params.rate_hz = 0.3;
  const MultipathScene scene = scene_preset(SceneKind::kBreathing, params, 4);
  const CsiRecording rec = synth_csi(scene, small_grid(16), {});
  for (const auto& f : rec.frames) {
    REQUIRE(f.labels.vital_rate_hz.has_value());
    CHECK(*f.labels.vital_rate_hz == 0.3);
  }
}

TEST_CASE("distinct gesture classes get distinct dynamic parameters") {
  PresetParams p2;
  p2.class_id = 2;
  p2.n_classes = 6;
  PresetParams p3 = p2;
  p3.class_id = 3;
  const MultipathScene s2 = scene_preset(SceneKind::kGesture, p2, 9);
  const MultipathScene s3 = scene_preset(SceneKind::kGesture, p3, 9);
  // families differ either in mover count or in the motion trajectories
  bool differs = s2.paths.size() != s3.paths.size();
  for (std::size_t i = 0; i < std::min(s2.paths.size(), s3.paths.size()); ++i) {
    const auto* d2 = std::get_if<PiecewiseLinearDelay>(&s2.paths[i].delay);
    const auto* d3 = std::get_if<PiecewiseLinearDelay>(&s3.paths[i].delay);
    if (d2 && d3 && d2->breakpoints != d3->breakpoints) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("preset rejects out-of-range ids and unknown kinds") {
  PresetParams p;
  p.class_id = 6;
  p.n_classes = 6;
  CHECK_THROWS_AS(scene_preset(SceneKind::kGesture, p, 0), ConfigError);
  p.class_id = 0;
  CHECK_THROWS_AS(scene_preset(SceneKind::kCustom, p, 0), ConfigError);
  CHECK_THROWS_AS(scene_kind_from_string("warp-drive"), ConfigError);
}

TEST_CASE("random-walk phase replays deterministically") {
  PathComponent p;
  p.phase = RandomWalkPhase{0.1, 77};
  const double a = phase_at(p, 50);
  const double b = phase_at(p, 50);
  CHECK(a == b);
  CHECK(phase_at(p, 0) == 0.0);
}
