#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sdp/common.hpp"

namespace sdp {

using Complex = std::complex<double>;

// ---- path delay modulation -------------------------------------------------

struct ConstantDelay {};

struct SinusoidalDelay {
  double amplitude_s = 0.0;  // seconds
  double frequency_hz = 0.0; // > 0
};

// Continuous piecewise-linear delay offset through (time, offset) breakpoints,
// clamped at the ends.
struct PiecewiseLinearDelay {
  std::vector<std::pair<double, double>> breakpoints;
};

using DelayModulation = std::variant<ConstantDelay, SinusoidalDelay, PiecewiseLinearDelay>;

// ---- device phase rotation process ------------------------------------------

struct ZeroPhase {};

struct ConstantPhase {
  double value_rad = 0.0;
};

// Gaussian-increment walk over frame indices; the stream is fixed by the
// seed so the same path always replays the same walk.
struct RandomWalkPhase {
  double step_std = 0.0;
  std::uint64_t seed = 0;
};

using PhaseProcess = std::variant<ZeroPhase, ConstantPhase, RandomWalkPhase>;

struct PathComponent {
  Complex alpha{1.0, 0.0};
  double tau0_s = 0.0;
  DelayModulation delay{ConstantDelay{}};
  PhaseProcess phase{ZeroPhase{}};

  void validate() const;
};

double delay_at(const PathComponent& path, double t_s);
double phase_at(const PathComponent& path, std::uint64_t frame_index);

// alpha * exp(-j 2 pi f tau(t)) * exp(-j phi), with the phase process
// evaluated at the given frame index.
Complex path_response(const PathComponent& path, double freq_hz, double t_s,
                      std::uint64_t frame_index = 0);

// ---- sampling grid -----------------------------------------------------------

struct SamplingGrid {
  int n_tx = 1;
  int n_rx = 1;
  std::vector<double> subcarrier_freqs_hz;  // strictly increasing, K >= 2
  std::vector<double> packet_times_s;       // strictly increasing, N >= 1
  // Complex gain per antenna pair, indexed a = rx * n_tx + tx. Empty = all 1.
  std::vector<Complex> pair_gains;

  int n_pairs() const { return n_rx * n_tx; }
  void validate() const;
  Complex pair_gain(int a) const {
    return pair_gains.empty() ? Complex{1.0, 0.0} : pair_gains[static_cast<std::size_t>(a)];
  }
};

struct NoiseConfig {
  double sigma2 = 0.0;  // complex AWGN variance per entry, linear power
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// ---- scenes and labels -------------------------------------------------------

struct TaskLabels {
  std::optional<bool> presence;
  std::optional<int> activity;
  std::optional<double> vital_rate_hz;

  bool operator==(const TaskLabels&) const = default;
};

struct LabelInterval {
  double t_begin = 0.0;  // inclusive
  double t_end = 0.0;    // exclusive
  TaskLabels labels;
};

enum class SceneKind { kStaticEmpty, kPresence, kGesture, kGait, kBreathing, kCustom };

struct MultipathScene {
  std::vector<PathComponent> paths;
  SceneKind kind = SceneKind::kCustom;
  std::vector<LabelInterval> schedule;
  std::string session_id = "s0";
  std::string user_id = "u0";

  void validate() const;
  TaskLabels labels_at(double t_s) const;
};

// ---- recordings ---------------------------------------------------------------

// Frame values are stored pair-major: row a = rx * n_tx + tx, column k.
struct CsiFrame {
  double timestamp_s = 0.0;
  Eigen::MatrixXcd values;  // A_src x K_src
  TaskLabels labels;
};

struct CsiRecording {
  std::vector<CsiFrame> frames;
  std::string session_id;
  std::string user_id;
  std::vector<std::pair<int, int>> pair_order;  // (rx, tx) per row
  std::vector<int> subcarrier_ids;              // id per column
  std::vector<double> subcarrier_freqs_hz;
  bool amplitudes_in_db = false;
  // Set by ingest: which adapter produced the canonical ordering.
  std::string adapter_name;
  int adapter_version = 0;
  std::vector<int> source_subcarrier_ids;

  int n_pairs() const { return frames.empty() ? 0 : static_cast<int>(frames[0].values.rows()); }
  int n_subcarriers() const { return frames.empty() ? 0 : static_cast<int>(frames[0].values.cols()); }
  void validate() const;
};

// Sum the path responses on every grid point and add complex Gaussian noise
// with per-component variance sigma2/2. Bit-deterministic for a fixed
// (scene, grid, noise.rng_seed).
CsiRecording synth_csi(const MultipathScene& scene, const SamplingGrid& grid,
                       const NoiseConfig& noise);

// ---- presets -------------------------------------------------------------------

struct PresetParams {
  int class_id = 0;
  int n_classes = 1;
  int user_id = 0;
  int n_users = 1;
  double rate_hz = 0.3;
  // Common phase error walk applied to every path; 0 disables.
  double cpe_walk_std = 0.0;
  int n_static_paths = 3;
};

// Desk-scale labeled scene families. Distinct class ids map to distinct
// delay-modulation parameter families, so classes are separable by
// construction; the seed only jitters within a family.
MultipathScene scene_preset(SceneKind kind, const PresetParams& params,
                            std::uint64_t seed);

SceneKind scene_kind_from_string(const std::string& name);
std::string to_string(SceneKind kind);

}  // namespace sdp
