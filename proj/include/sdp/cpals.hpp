#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdp/tensor.hpp"

namespace sdp {

enum class CpInit { kSeededGaussian, kHosvd };

struct CpConfig {
  int rank = 8;
  double epsilon = 1e-9;    // Tikhonov term added to the R x R Gram
  int max_sweeps = 50;
  double rel_tol = 1e-8;    // relative fit-change stopping threshold
  CpInit init = CpInit::kSeededGaussian;
  std::uint64_t rng_seed = 0;

  // Rank must leave every normal-equation system generically solvable.
  void validate(Eigen::Index i1, Eigen::Index i2, Eigen::Index i3) const;
};

// Rank-R triple with unit-norm factor columns. Scales live in the
// nonnegative weights, components are sorted by descending weight with
// ties broken by the first factor's first-row value, then column index.
struct CpDecomposition {
  Matrix a;              // I1 x R
  Matrix b;              // I2 x R
  Matrix c;              // I3 x R
  Vector weights;        // R, nonnegative, non-increasing
  double fit = 0.0;      // 1 - ||X - Xhat||_F / ||X||_F
  int sweeps_used = 0;

  int rank() const { return static_cast<int>(weights.size()); }

  // Normalize columns, absorb scales into weights (sign flips pushed into
  // the first factor), sort. Used by the solver after every sweep and by
  // tests that build decompositions directly.
  void canonicalize();
};

// Alternating least squares for the rank-R model. Each sweep solves the
// three regularized normal-equation updates
//   A <- X_(1) (C kr B) [ (C'C).*(B'B) + eps I ]^{-1}
// (and cyclically for B, C) via Cholesky on the R x R Gram, falling back
// to an SVD pseudo-inverse when the factorization fails. Stops after
// max_sweeps or when |fit_s - fit_{s-1}| <= rel_tol * max(|fit_{s-1}|, 1e-12).
// Deterministic for a given cfg.rng_seed.
CpDecomposition cp_als(const Tensor3d& x, const CpConfig& cfg);

// Per-sweep fit values of the last cp_als call are returned alongside when
// requested; used by the monotonicity checks.
CpDecomposition cp_als(const Tensor3d& x, const CpConfig& cfg,
                       std::vector<double>* fit_trace);

Tensor3d reconstruct(const CpDecomposition& d);

double fit(const CpDecomposition& d, const Tensor3d& x);

// Largest k such that every k-subset of columns is linearly independent.
// Brute force over subsets; intended for small column counts.
int kruskal_rank(const Matrix& m);

struct IdentifiabilityResult {
  bool holds = false;
  int margin = 0;       // (kA + kB + kC) - (2R + 2)
  int k_a = 0, k_b = 0, k_c = 0;
  // The sum condition as printed excludes R = 1 although rank-1 is
  // classically unique; flagged rather than special-cased.
  bool rank1_special = false;
};

IdentifiabilityResult identifiability_check(const CpDecomposition& d);

// Mean over components of |cos(a)||cos(b)||cos(c)| under the best column
// assignment; exhaustive over permutations, so R <= 6 only.
double factor_match_score(const CpDecomposition& d, const CpDecomposition& truth);

}  // namespace sdp
