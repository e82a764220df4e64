#include "sdp/cpals.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdp/rng.hpp"

namespace sdp {

void CpConfig::validate(Eigen::Index i1, Eigen::Index i2, Eigen::Index i3) const {
  if (rank < 1) throw ConfigError("cp: rank must be >= 1");
  if (epsilon < 0.0) throw ConfigError("cp: epsilon must be >= 0");
  if (max_sweeps < 1) throw ConfigError("cp: max_sweeps must be >= 1");
  if (rel_tol < 0.0) throw ConfigError("cp: rel_tol must be >= 0");
  const Eigen::Index r = rank;
  if (r > i1 * i2 || r > i2 * i3 || r > i1 * i3)
    throw ConfigError("cp: rank exceeds the product of every dimension pair");
}

void CpDecomposition::canonicalize() {
  const int r = rank();
  for (int j = 0; j < r; ++j) {
    const double na = a.col(j).norm();
    const double nb = b.col(j).norm();
    const double nc = c.col(j).norm();
    double w = weights(j) * na * nb * nc;
    if (na > 0.0) a.col(j) /= na;
    if (nb > 0.0) b.col(j) /= nb;
    if (nc > 0.0) c.col(j) /= nc;
    if (w < 0.0) {
      w = -w;
      a.col(j) = -a.col(j);
    }
    weights(j) = w;
  }
  // Total order: weight desc, then first-row A value asc, then column index.
  std::vector<int> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    if (weights(lhs) != weights(rhs)) return weights(lhs) > weights(rhs);
    if (a(0, lhs) != a(0, rhs)) return a(0, lhs) < a(0, rhs);
    return lhs < rhs;
  });
  Matrix a2(a.rows(), r), b2(b.rows(), r), c2(c.rows(), r);
  Vector w2(r);
  for (int j = 0; j < r; ++j) {
    a2.col(j) = a.col(order[static_cast<std::size_t>(j)]);
    b2.col(j) = b.col(order[static_cast<std::size_t>(j)]);
    c2.col(j) = c.col(order[static_cast<std::size_t>(j)]);
    w2(j) = weights(order[static_cast<std::size_t>(j)]);
  }
  a = std::move(a2);
  b = std::move(b2);
  c = std::move(c2);
  weights = std::move(w2);
}

namespace {

Matrix random_factor(Eigen::Index rows, int rank, Rng& rng) {
  Matrix m(rows, rank);
  for (int j = 0; j < rank; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    const double n = m.col(j).norm();
    if (n > 0.0) m.col(j) /= n;
  }
  return m;
}

// Leading left singular vectors of the mode unfolding, padded with random
// columns when the rank exceeds the mode dimension.
Matrix hosvd_factor(const Tensor3d& x, int mode, int rank, Rng& rng) {
  const Matrix m = unfold(x, mode);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const int avail = static_cast<int>(std::min<Eigen::Index>(svd.matrixU().cols(), rank));
  Matrix f(m.rows(), rank);
  f.leftCols(avail) = svd.matrixU().leftCols(avail);
  for (int j = avail; j < rank; ++j) {
    for (Eigen::Index i = 0; i < f.rows(); ++i) f(i, j) = rng.normal();
    const double n = f.col(j).norm();
    if (n > 0.0) f.col(j) /= n;
  }
  return f;
}

// Solve G^T ("gram + eps I") from the right: returns M * inv(gram).
// Cholesky first; SVD pseudo-inverse on factorization failure.
Matrix solve_against_gram(const Matrix& m, Matrix gram, double eps,
                          int sweep, int mode) {
  gram.diagonal().array() += eps;
  Eigen::LLT<Matrix> llt(gram);
  Matrix out;
  if (llt.info() == Eigen::Success) {
    out = llt.solve(m.transpose()).transpose();
  } else {
    Eigen::JacobiSVD<Matrix> svd(gram, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double thresh = sv.size() > 0 ? sv(0) * 1e-14 : 0.0;
    Vector inv = sv;
    for (Eigen::Index i = 0; i < inv.size(); ++i)
      inv(i) = sv(i) > thresh ? 1.0 / sv(i) : 0.0;
    out = m * svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  }
  if (!out.allFinite())
    throw NumericalError("cp_als: singular Gram matrix at sweep " +
                         std::to_string(sweep) + ", mode " + std::to_string(mode));
  return out;
}

}  // namespace

CpDecomposition cp_als(const Tensor3d& x, const CpConfig& cfg) {
  return cp_als(x, cfg, nullptr);
}

CpDecomposition cp_als(const Tensor3d& x, const CpConfig& cfg,
                       std::vector<double>* fit_trace) {
  const Eigen::Index i1 = x.dim(0), i2 = x.dim(1), i3 = x.dim(2);
  cfg.validate(i1, i2, i3);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!std::isfinite(x.data()[i]))
      throw NumericalError("cp_als: input tensor has non-finite entries");

  const int r = cfg.rank;
  Rng rng(cfg.rng_seed);

  CpDecomposition d;
  if (cfg.init == CpInit::kSeededGaussian) {
    d.a = random_factor(i1, r, rng);
    d.b = random_factor(i2, r, rng);
    d.c = random_factor(i3, r, rng);
  } else {
    d.a = hosvd_factor(x, 1, r, rng);
    d.b = hosvd_factor(x, 2, r, rng);
    d.c = hosvd_factor(x, 3, r, rng);
  }
  d.weights = Vector::Ones(r);

  const Matrix x1 = unfold(x, 1);
  const Matrix x2 = unfold(x, 2);
  const Matrix x3 = unfold(x, 3);
  const double norm_x = std::sqrt(x.squared_norm());

  double prev_fit = 0.0;
  if (fit_trace) fit_trace->clear();

  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    // Weights are re-absorbed each sweep, so updates use the bare factors.
    Matrix ga = d.a.transpose() * d.a;
    Matrix gb = d.b.transpose() * d.b;
    Matrix gc = d.c.transpose() * d.c;

    d.a = solve_against_gram(x1 * khatri_rao(d.c, d.b),
                             gc.cwiseProduct(gb), cfg.epsilon, sweep, 1);
    ga = d.a.transpose() * d.a;
    d.b = solve_against_gram(x2 * khatri_rao(d.c, d.a),
                             gc.cwiseProduct(ga), cfg.epsilon, sweep, 2);
    gb = d.b.transpose() * d.b;
    d.c = solve_against_gram(x3 * khatri_rao(d.b, d.a),
                             gb.cwiseProduct(ga), cfg.epsilon, sweep, 3);

    if (!d.a.allFinite() || !d.b.allFinite() || !d.c.allFinite())
      throw NumericalError("cp_als: non-finite factor at sweep " +
                           std::to_string(sweep));

    d.weights = Vector::Ones(r);
    d.canonicalize();

    // Direct residual; the Gram-identity shortcut cancels catastrophically
    // once the fit approaches 1 and would mask per-sweep monotonicity.
    const Tensor3d rec = reconstruct(d);
    double resid_sq = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double e = x.data()[i] - rec.data()[i];
      resid_sq += e * e;
    }
    double f;
    if (norm_x > 0.0) {
      f = 1.0 - std::sqrt(resid_sq) / norm_x;
    } else {
      f = resid_sq == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(f))
      throw NumericalError("cp_als: non-finite fit at sweep " + std::to_string(sweep));

    d.fit = f;
    d.sweeps_used = sweep;
    if (fit_trace) fit_trace->push_back(f);

    if (sweep > 1 &&
        std::abs(f - prev_fit) <= cfg.rel_tol * std::max(std::abs(prev_fit), 1e-12))
      break;
    prev_fit = f;
  }
  return d;
}

Tensor3d reconstruct(const CpDecomposition& d) {
  const Eigen::Index i1 = d.a.rows(), i2 = d.b.rows(), i3 = d.c.rows();
  Tensor3d x(i1, i2, i3);
  for (int j = 0; j < d.rank(); ++j) {
    const double w = d.weights(j);
    if (w == 0.0) continue;
    for (Eigen::Index k = 0; k < i3; ++k) {
      const double ck = w * d.c(k, j);
      for (Eigen::Index m = 0; m < i2; ++m) {
        const double cb = ck * d.b(m, j);
        for (Eigen::Index i = 0; i < i1; ++i) x(i, m, k) += cb * d.a(i, j);
      }
    }
  }
  return x;
}

double fit(const CpDecomposition& d, const Tensor3d& x) {
  const Tensor3d rec = reconstruct(d);
  if (!rec.same_dims(x)) throw ConfigError("fit: dimension mismatch");
  double resid = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double e = rec.data()[i] - x.data()[i];
    resid += e * e;
  }
  const double nx = std::sqrt(x.squared_norm());
  if (nx == 0.0) return resid == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - std::sqrt(resid) / nx;
}

namespace {

int matrix_rank(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double thresh =
      sv(0) * static_cast<double>(std::max(m.rows(), m.cols())) *
      std::numeric_limits<double>::epsilon() * 64.0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++r;
  return r;
}

bool all_subsets_full_rank(const Matrix& m, int k) {
  const int n = static_cast<int>(m.cols());
  std::vector<int> pick(static_cast<std::size_t>(k));
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    Matrix sub(m.rows(), k);
    for (int i = 0; i < k; ++i) sub.col(i) = m.col(pick[static_cast<std::size_t>(i)]);
    if (matrix_rank(sub) < k) return false;
    // next combination
    int i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return true;
}

}  // namespace

int kruskal_rank(const Matrix& m) {
  if (m.size() == 0) throw ConfigError("kruskal_rank: empty matrix");
  const int kmax = static_cast<int>(std::min(m.rows(), m.cols()));
  int k = 0;
  while (k < kmax && all_subsets_full_rank(m, k + 1)) ++k;
  return k;
}

IdentifiabilityResult identifiability_check(const CpDecomposition& d) {
  IdentifiabilityResult res;
  res.k_a = kruskal_rank(d.a);
  res.k_b = kruskal_rank(d.b);
  res.k_c = kruskal_rank(d.c);
  const int lhs = res.k_a + res.k_b + res.k_c;
  const int rhs = 2 * d.rank() + 2;
  res.margin = lhs - rhs;
  res.holds = lhs >= rhs;
  res.rank1_special = (d.rank() == 1);
  return res;
}

double factor_match_score(const CpDecomposition& d, const CpDecomposition& truth) {
  const int r = d.rank();
  if (r != truth.rank()) throw ConfigError("factor_match_score: rank mismatch");
  if (r > 6) throw ConfigError("factor_match_score: exhaustive assignment supports R <= 6");

  auto cosine = [](const Matrix& u, int cu, const Matrix& v, int cv) {
    const double nu = u.col(cu).norm(), nv = v.col(cv).norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return u.col(cu).dot(v.col(cv)) / (nu * nv);
  };

  std::vector<int> perm(static_cast<std::size_t>(r));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (int j = 0; j < r; ++j) {
      const int p = perm[static_cast<std::size_t>(j)];
      s += std::abs(cosine(d.a, p, truth.a, j) * cosine(d.b, p, truth.b, j) *
                    cosine(d.c, p, truth.c, j));
    }
    best = std::max(best, s / r);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace sdp
