#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdp/channel.hpp"
#include "sdp/container.hpp"
#include "sdp/model.hpp"
#include "sdp/pooling.hpp"
#include "sdp/schema.hpp"

namespace sdp {

// Feature paths mirroring the benchmark ablations. The full path pools two
// decompositions (normalized amplitude + adjacent-subcarrier phase
// difference); no-phase swaps the sanitized branch for raw wrapped phase;
// no-cpals flattens the tensors instead of decomposing them.
enum class PipelineVariant { kFull, kNoCpals, kNoPhase };

PipelineVariant variant_from_string(const std::string& name);
std::string to_string(PipelineVariant v);

struct FeatureConfig {
  PipelineVariant variant = PipelineVariant::kFull;
  // Leading-singular-vector init keeps the spectrum clean when the block's
  // true rank sits below R; random init at excess rank drifts into
  // mutually-canceling component pairs whose weights carry no structure.
  CpConfig cp{.rank = 8, .epsilon = 1e-2, .max_sweeps = 50,
              .rel_tol = 1e-8, .init = CpInit::kHosvd, .rng_seed = 0};
  // Temporal mean-pool factor for the flattened no-cpals path; keeps the
  // raw-feature width tractable at desk scale.
  int raw_downsample_t = 8;
};

// Descriptors for the blocks of one session. Session statistics come from
// these blocks only; per-block decomposition seeds derive from session_seed
// and the block index, so parallel order cannot change results.
std::vector<Sample> session_features(const std::vector<DataBlock>& blocks,
                                     const FeatureConfig& cfg,
                                     std::uint64_t session_seed);

// Decompose every block of a set against one real view; the building block
// behind `sdp decompose`.
DecompositionSet decompose_blocks(const std::vector<DataBlock>& blocks,
                                  const CpConfig& cfg, const std::string& view,
                                  std::uint64_t seed);

DescriptorTable pool_decompositions(const DecompositionSet& set);

// ---- synthetic task datasets ------------------------------------------------

struct SyntheticTaskConfig {
  SceneKind kind = SceneKind::kGesture;
  int n_classes = 4;
  int n_users = 6;
  int sessions_per_class = 1;  // recordings per (user, class) or per user kind
  int n_frames = 256;
  double packet_rate_hz = 10.0;
  int n_rx = 2;
  int n_tx = 2;
  int n_subcarriers = 16;
  double carrier_hz = 5.18e9;
  double subcarrier_spacing_hz = 2.5e6;
  double noise_sigma2 = 1e-4;
  double cpe_walk_std = 0.05;
  double rate_min_hz = 0.2;   // breathing label range
  double rate_max_hz = 0.5;
  int recordings_per_user = 6;  // breathing sessions per user
};

SamplingGrid make_grid(const SyntheticTaskConfig& cfg, std::uint64_t user_seed);

// Labeled recordings for one synthetic task; deterministic in seed. Session
// ids are unique per recording, user ids follow "u<i>".
std::vector<CsiRecording> generate_task_recordings(const SyntheticTaskConfig& cfg,
                                                   std::uint64_t seed);

// Simple indexed parallel loop honoring SDP_THREADS / SDP_DETERMINISTIC.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sdp
