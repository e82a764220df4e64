#include <doctest.h>

#include <chrono>

#include "sdp/cpals.hpp"
#include "sdp/rng.hpp"

using namespace sdp;

namespace {

Matrix random_unit_columns(Eigen::Index rows, int r, Rng& rng) {
  Matrix m(rows, r);
  for (int j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    m.col(j) /= m.col(j).norm();
  }
  return m;
}

// Exact rank-R tensor with known factors, canonical form.
struct Planted {
  Tensor3d x;
  CpDecomposition truth;
};

Planted planted_tensor(Eigen::Index i1, Eigen::Index i2, Eigen::Index i3, int r,
                       std::uint64_t seed) {
  Rng rng(seed);
  Planted p;
  p.truth.a = random_unit_columns(i1, r, rng);
  p.truth.b = random_unit_columns(i2, r, rng);
  p.truth.c = random_unit_columns(i3, r, rng);
  p.truth.weights = Vector(r);
  // Well-separated weights keep the components distinguishable.
  for (int j = 0; j < r; ++j) p.truth.weights(j) = 3.0 + 2.0 * j + rng.uniform();
  p.truth.canonicalize();
  p.x = reconstruct(p.truth);
  return p;
}

}  // namespace

TEST_CASE("exact rank-1 tensor recovers its weight and unit fit") {
  Rng rng(3);
  CpDecomposition truth;
  truth.a = random_unit_columns(6, 1, rng);
  truth.b = random_unit_columns(5, 1, rng);
  truth.c = random_unit_columns(4, 1, rng);
  truth.weights = Vector::Constant(1, 2.0);
  const Tensor3d x = reconstruct(truth);

  CpConfig cfg;
  cfg.rank = 1;
  cfg.epsilon = 1e-9;
  cfg.max_sweeps = 50;
  cfg.rel_tol = 1e-12;
  cfg.rng_seed = 17;
  const CpDecomposition d = cp_als(x, cfg);
  CHECK(d.weights(0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(d.fit >= 1.0 - 1e-6);
}

TEST_CASE("exact rank-3 construction is recovered within 50 sweeps") {
  const Planted p = planted_tensor(8, 16, 32, 3, 101);
  CpConfig cfg;
  cfg.rank = 3;
  cfg.epsilon = 0.0;
  cfg.max_sweeps = 50;
  cfg.rel_tol = 0.0;
  cfg.rng_seed = 5;
  const CpDecomposition d = cp_als(p.x, cfg);
  CHECK(d.fit >= 1.0 - 1e-6);
  CHECK(factor_match_score(d, p.truth) >= 0.999);
}

TEST_CASE("cp_als is bit-deterministic for a fixed seed") {
  const Planted p = planted_tensor(6, 7, 8, 2, 55);
  CpConfig cfg;
  cfg.rank = 2;
  cfg.rng_seed = 99;
  cfg.max_sweeps = 20;
  const CpDecomposition d1 = cp_als(p.x, cfg);
  const CpDecomposition d2 = cp_als(p.x, cfg);
  CHECK(d1.fit == d2.fit);
  CHECK(d1.sweeps_used == d2.sweeps_used);
  CHECK(d1.a == d2.a);
  CHECK(d1.b == d2.b);
  CHECK(d1.c == d2.c);
  CHECK(d1.weights == d2.weights);
}

TEST_CASE("per-sweep fit is non-decreasing with eps = 0") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Planted p = planted_tensor(6, 9, 11, 3, 400 + seed);
    CpConfig cfg;
    cfg.rank = 3;
    cfg.epsilon = 0.0;
    cfg.max_sweeps = 40;
    cfg.rel_tol = 0.0;
    cfg.rng_seed = seed;
    std::vector<double> trace;
    cp_als(p.x, cfg, &trace);
    for (std::size_t s = 1; s < trace.size(); ++s)
      CHECK(trace[s] >= trace[s - 1] - 1e-10);
  }
}

TEST_CASE("factor columns stay unit norm and weights sorted nonnegative") {
  const Planted p = planted_tensor(5, 6, 7, 4, 77);
  CpConfig cfg;
  cfg.rank = 4;
  cfg.rng_seed = 1;
  cfg.max_sweeps = 25;
  const CpDecomposition d = cp_als(p.x, cfg);
  for (int j = 0; j < d.rank(); ++j) {
    CHECK(std::abs(d.a.col(j).norm() - 1.0) < 1e-12);
    CHECK(std::abs(d.b.col(j).norm() - 1.0) < 1e-12);
    CHECK(std::abs(d.c.col(j).norm() - 1.0) < 1e-12);
    CHECK(d.weights(j) >= 0.0);
    if (j > 0) CHECK(d.weights(j) <= d.weights(j - 1));
  }
}

TEST_CASE("hosvd init also recovers an exact low-rank tensor") {
  const Planted p = planted_tensor(8, 10, 12, 2, 31);
  CpConfig cfg;
  cfg.rank = 2;
  cfg.init = CpInit::kHosvd;
  cfg.max_sweeps = 50;
  cfg.rel_tol = 0.0;
  cfg.rng_seed = 2;
  const CpDecomposition d = cp_als(p.x, cfg);
  CHECK(d.fit >= 1.0 - 1e-6);
}

TEST_CASE("reconstruct with zero weights gives the zero tensor") {
  CpDecomposition d;
  d.a = Matrix::Ones(3, 2);
  d.b = Matrix::Ones(4, 2);
  d.c = Matrix::Ones(5, 2);
  d.weights = Vector::Zero(2);
  const Tensor3d x = reconstruct(d);
  for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(x.data()[i] == 0.0);
}

TEST_CASE("fit of an exact rank-1 decomposition is 1 within 1e-12") {
  Rng rng(8);
  CpDecomposition d;
  d.a = random_unit_columns(4, 1, rng);
  d.b = random_unit_columns(5, 1, rng);
  d.c = random_unit_columns(6, 1, rng);
  d.weights = Vector::Constant(1, 1.7);
  CHECK(fit(d, reconstruct(d)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("norm identity: |Xhat|_F^2 equals w' [(A'A).*(B'B).*(C'C)] w") {
  Rng rng(21);
  CpDecomposition d;
  d.a = random_unit_columns(4, 3, rng);
  d.b = random_unit_columns(6, 3, rng);
  d.c = random_unit_columns(5, 3, rng);
  d.weights = Vector(3);
  d.weights << 2.0, 1.0, 0.5;
  const double direct = reconstruct(d).squared_norm();
  const Matrix g = (d.a.transpose() * d.a)
                       .cwiseProduct(d.b.transpose() * d.b)
                       .cwiseProduct(d.c.transpose() * d.c);
  const double via_grams = d.weights.dot(g * d.weights);
  CHECK(std::abs(direct - via_grams) / direct < 1e-9);
}

TEST_CASE("cp_als surfaces non-finite input") {
  Tensor3d x(2, 2, 2);
  x(0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  CpConfig cfg;
  cfg.rank = 1;
  CHECK_THROWS_AS(cp_als(x, cfg), NumericalError);
}

TEST_CASE("rank exceeding every dimension pair is rejected") {
  Tensor3d x(2, 2, 2);
  CpConfig cfg;
  cfg.rank = 5;  // > 4 = 2*2
  CHECK_THROWS_AS(cp_als(x, cfg), ConfigError);
}

// ---- kruskal rank ------------------------------------------------------------

namespace {

// Independent oracle: gaussian-elimination rank over a column subset.
int elimination_rank(Matrix m) {
  const double tol = 1e-9;
  int rank = 0;
  for (Eigen::Index col = 0; col < m.cols() && rank < m.rows(); ++col) {
    Eigen::Index pivot = rank;
    for (Eigen::Index r = rank + 1; r < m.rows(); ++r)
      if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
    if (std::abs(m(pivot, col)) < tol) continue;
    m.row(pivot).swap(m.row(rank));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (r == rank) continue;
      m.row(r) -= m(r, col) / m(rank, col) * m.row(rank);
    }
    ++rank;
  }
  return rank;
}

int brute_force_kruskal(const Matrix& m) {
  const int n = static_cast<int>(m.cols());
  const int kmax = static_cast<int>(std::min(m.rows(), m.cols()));
  for (int k = 1; k <= kmax; ++k) {
    // check every k-subset
    std::vector<int> pick(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) pick[static_cast<std::size_t>(i)] = i;
    bool all_independent = true;
    while (all_independent) {
      Matrix sub(m.rows(), k);
      for (int i = 0; i < k; ++i) sub.col(i) = m.col(pick[static_cast<std::size_t>(i)]);
      if (elimination_rank(sub) < k) {
        all_independent = false;
        break;
      }
      int i = k - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j)
        pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
    if (!all_independent) return k - 1;
  }
  return kmax;
}

}  // namespace

TEST_CASE("kruskal rank of the identity is full") {
  CHECK(kruskal_rank(Matrix::Identity(3, 3)) == 3);
}

TEST_CASE("kruskal rank with two equal columns is 1") {
  Matrix m(3, 3);
  m << 1, 1, 0, 0, 0, 1, 0, 0, 0;
  CHECK(kruskal_rank(m) == 1);
}

TEST_CASE("kruskal rank of a zero column is 0") {
  Matrix m = Matrix::Identity(3, 3);
  m.col(1).setZero();
  CHECK(kruskal_rank(m) == 0);
}

TEST_CASE("random gaussian 4x3 has kruskal rank 3, versus the oracle") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m(4, 3);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    const int k = kruskal_rank(m);
    CHECK(k == 3);
    CHECK(k == brute_force_kruskal(m));
  }
}

TEST_CASE("identifiability margin for generic rank-3 factors is +1") {
  const Planted p = planted_tensor(8, 16, 32, 3, 500);
  const IdentifiabilityResult res = identifiability_check(p.truth);
  CHECK(res.k_a == 3);
  CHECK(res.k_b == 3);
  CHECK(res.k_c == 3);
  CHECK(res.margin == 1);
  CHECK(res.holds);
  CHECK_FALSE(res.rank1_special);
}

TEST_CASE("rank-1 reports the literal inequality and the special-case flag") {
  const Planted p = planted_tensor(4, 5, 6, 1, 501);
  const IdentifiabilityResult res = identifiability_check(p.truth);
  CHECK_FALSE(res.holds);  // 3 >= 4 is false as printed
  CHECK(res.margin == -1);
  CHECK(res.rank1_special);
}

TEST_CASE("duplicated spatial column breaks the sum condition") {
  Planted p = planted_tensor(8, 16, 32, 3, 502);
  p.truth.a.col(1) = p.truth.a.col(0);
  const IdentifiabilityResult res = identifiability_check(p.truth);
  CHECK(res.k_a == 1);
  CHECK(res.margin == -1);
  CHECK_FALSE(res.holds);
}

TEST_CASE("factor match score of a decomposition against itself is 1") {
  const Planted p = planted_tensor(5, 6, 7, 3, 503);
  CHECK(factor_match_score(p.truth, p.truth) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("factor match score survives permutation and a sign flip") {
  const Planted p = planted_tensor(5, 6, 7, 3, 504);
  CpDecomposition perm = p.truth;
  // rotate columns and flip one sign pair (weight sign conventions cancel)
  const std::vector<int> order{2, 0, 1};
  for (int j = 0; j < 3; ++j) {
    perm.a.col(j) = p.truth.a.col(order[static_cast<std::size_t>(j)]);
    perm.b.col(j) = p.truth.b.col(order[static_cast<std::size_t>(j)]);
    perm.c.col(j) = p.truth.c.col(order[static_cast<std::size_t>(j)]);
    perm.weights(j) = p.truth.weights(order[static_cast<std::size_t>(j)]);
  }
  perm.a.col(0) = -perm.a.col(0);
  perm.b.col(0) = -perm.b.col(0);
  CHECK(factor_match_score(perm, p.truth) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("independent random decompositions score below 0.9") {
  Rng rng(60);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    CpDecomposition d1, d2;
    d1.a = random_unit_columns(40, 3, rng);
    d1.b = random_unit_columns(50, 3, rng);
    d1.c = random_unit_columns(60, 3, rng);
    d1.weights = Vector::Ones(3);
    d2.a = random_unit_columns(40, 3, rng);
    d2.b = random_unit_columns(50, 3, rng);
    d2.c = random_unit_columns(60, 3, rng);
    d2.weights = Vector::Ones(3);
    worst = std::max(worst, factor_match_score(d1, d2));
  }
  CHECK(worst < 0.9);
}

TEST_CASE("factor match score rejects rank mismatch") {
  const Planted p2 = planted_tensor(4, 5, 6, 2, 505);
  const Planted p3 = planted_tensor(4, 5, 6, 3, 506);
  CHECK_THROWS_AS(factor_match_score(p2.truth, p3.truth), ConfigError);
}

TEST_CASE("sweep cost scales linearly in the time dimension") {
  using Clock = std::chrono::steady_clock;
  auto time_for = [](Eigen::Index t_dim) {
    const Planted p = planted_tensor(8, 16, t_dim, 3, 900);
    CpConfig cfg;
    cfg.rank = 4;
    cfg.max_sweeps = 3;
    cfg.rel_tol = 0.0;
    cfg.rng_seed = 4;
    cp_als(p.x, cfg);  // warm caches
    const auto t0 = Clock::now();
    for (int i = 0; i < 3; ++i) cp_als(p.x, cfg);
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };
  const double t1 = time_for(2000);
  const double t2 = time_for(4000);
  CHECK(t2 / t1 < 3.0);
}
