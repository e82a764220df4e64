#pragma once

#include <array>
#include <cstdint>

#include "sdp/cpals.hpp"

namespace sdp {

// Fixed descriptor layout, version 1: six entries per component in sorted
// order [weight, spatial concentration, temporal centroid, temporal spread,
// spectral centroid, spectral spread], then four global entries
// [energy, fit, amp_mean, amp_std]. Length R*6 + 4.
inline constexpr int kDescriptorLayoutVersion = 1;
inline constexpr int kEntriesPerComponent = 6;
inline constexpr int kGlobalEntries = 4;

inline int descriptor_dim(int rank) {
  return rank * kEntriesPerComponent + kGlobalEntries;
}

struct PooledDescriptor {
  Vector h;
  int layout_version = kDescriptorLayoutVersion;
};

// Deterministic per-component statistics. Probability vectors come from the
// squared factor entries; spatial concentration is the inverse participation
// ratio (one-hot -> 1, uniform -> 1/A). amp_mean / amp_std are summaries of
// the real view the decomposition consumed.
PooledDescriptor pool(const CpDecomposition& d, double amp_mean, double amp_std);

// Frozen seeded linear map from descriptor space to a compact (A~, K~, T~)
// tensor. Constructed once and stored with the model; the explicit-matrix
// constructor restores a stored map.
class Reprojector {
public:
  Reprojector(int input_dim, std::array<Eigen::Index, 3> target_dims, std::uint64_t seed);
  Reprojector(Matrix map, std::array<Eigen::Index, 3> target_dims);

  Tensor3d apply(const Vector& h) const;

  const Matrix& map() const { return map_; }
  const std::array<Eigen::Index, 3>& target_dims() const { return target_dims_; }

private:
  Matrix map_;  // (A~*K~*T~) x D
  std::array<Eigen::Index, 3> target_dims_;
};

}  // namespace sdp
