#pragma once

#include <string>
#include <vector>

#include "sdp/channel.hpp"
#include "sdp/tensor.hpp"

namespace sdp {

// Declarative mapping from a source recording into the canonical (A, K, T)
// ordering. Versioned so an ordering change is visible in every header.
struct AdapterDescriptor {
  std::string name = "identity";
  int version = 1;
  std::vector<std::pair<int, int>> antenna_pair_order;  // canonical a -> (rx, tx)
  std::vector<int> subcarrier_index_map;                // canonical k -> source id
  bool already_db = false;

  void validate() const;
  static AdapterDescriptor identity_for(const CsiRecording& rec);
};

struct WindowConfig {
  int window = 64;  // W, frames per block
  int stride = 16;  // S
  bool pad_last = false;

  void validate() const;
};

// The protocol's unit of exchange: one complex (A, K, T) tensor slice with a
// per-frame validity mask and the label taken at the window-center frame.
struct DataBlock {
  Tensor3c tensor;              // (A, K, T)
  std::vector<bool> mask;       // length T, false on padded frames
  double center_timestamp = 0.0;
  TaskLabels labels;
  std::string session_id;
  std::string user_id;
  int block_index = 0;
  int valid_frames = 0;
};

struct SessionStats {
  double mean_db = 0.0;
  double std_db = 1.0;
  double epsilon = 1e-8;   // std floor
};

// dB conversion floor inside log10 and the std floor for z-scoring.
inline constexpr double kAmpEpsilon = 1e-12;
inline constexpr double kStdEpsilon = 1e-8;

// Permute antenna pairs and subcarriers into canonical order. Idempotent
// under the identity adapter; ordering metadata travels with the output.
CsiRecording ingest(const CsiRecording& raw, const AdapterDescriptor& adapter);

// Sliding windows starting at frames 0, S, 2S, ... Timestamps are untouched;
// labels come from window index floor(W/2), clamped to the last valid frame
// of a padded block. N < W without padding gives an empty list.
std::vector<DataBlock> window(const CsiRecording& rec, const WindowConfig& cfg);

enum class Parameterization { kRealImag, kAmpPhase };

// Two real (A, K, T) channels: (Re, Im) or (amplitude, wrapped phase).
struct ParameterizedBlock {
  Tensor3d ch0;
  Tensor3d ch1;
  Parameterization mode = Parameterization::kAmpPhase;
};

ParameterizedBlock parameterize(const DataBlock& block, Parameterization mode);

// Adjacent-subcarrier phase difference, entry (a,k,t) = principal value of
// arg(x[a,k+1,t] * conj(x[a,k,t])) in (-pi, pi]. The conjugate product
// cancels any per-frame scalar phase field exactly.
Tensor3d phase_diff(const DataBlock& block);

// Raw wrapped phase (a,k,t); the uncalibrated branch used by ablations.
Tensor3d raw_phase(const DataBlock& block);

// Session statistics over the amplitude channel in dB. Callers restrict the
// input to training-portion blocks when a session spans splits.
SessionStats compute_session_stats(const std::vector<DataBlock>& blocks);

// Z-score the amplitude channel of an amp-phase view in dB; phase untouched.
void normalize(ParameterizedBlock& view, const SessionStats& stats);

// Amplitude tensor of a block, dB-converted and z-scored with the given
// stats; the default real view fed into the decomposition.
Tensor3d normalized_amplitude(const DataBlock& block, const SessionStats& stats);

// Real-imag stacking folded along the time axis as (A, K, 2T); the
// alternative decomposition view.
Tensor3d real_imag_folded(const DataBlock& block);

}  // namespace sdp
