#include "sdp/pooling.hpp"

#include <cmath>
#include <string>

#include "sdp/rng.hpp"

namespace sdp {

namespace {

// Squared-entry probability vector; the caller's component index is only
// used for the error message.
Vector squared_probability(const Matrix& factor, int col, int component,
                           const char* axis) {
  Vector p = factor.col(col).array().square();
  const double total = p.sum();
  if (total <= 0.0)
    throw NumericalError("pool: zero-norm " + std::string(axis) +
                         " factor column in component " + std::to_string(component));
  return p / total;
}

double centroid_of(const Vector& p) {
  double c = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) c += static_cast<double>(i) * p(i);
  return c;
}

double spread_of(const Vector& p, double centroid) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(i) - centroid;
    v += d * d * p(i);
  }
  return std::sqrt(std::max(0.0, v));
}

}  // namespace

PooledDescriptor pool(const CpDecomposition& d, double amp_mean, double amp_std) {
  const int r = d.rank();
  PooledDescriptor out;
  out.h = Vector(descriptor_dim(r));

  for (int j = 0; j < r; ++j) {
    const Vector pa = squared_probability(d.a, j, j, "spatial");
    const Vector pb = squared_probability(d.b, j, j, "spectral");
    const Vector pc = squared_probability(d.c, j, j, "temporal");
    const double t_centroid = centroid_of(pc);
    const double k_centroid = centroid_of(pb);
    out.h(6 * j + 0) = d.weights(j);
    out.h(6 * j + 1) = pa.squaredNorm();  // inverse participation ratio
    out.h(6 * j + 2) = t_centroid;
    out.h(6 * j + 3) = spread_of(pc, t_centroid);
    out.h(6 * j + 4) = k_centroid;
    out.h(6 * j + 5) = spread_of(pb, k_centroid);
  }

  const Matrix g = (d.a.transpose() * d.a)
                       .cwiseProduct(d.b.transpose() * d.b)
                       .cwiseProduct(d.c.transpose() * d.c);
  out.h(6 * r + 0) = std::sqrt(std::max(0.0, d.weights.dot(g * d.weights)));
  out.h(6 * r + 1) = d.fit;
  out.h(6 * r + 2) = amp_mean;
  out.h(6 * r + 3) = amp_std;

  for (Eigen::Index i = 0; i < out.h.size(); ++i)
    if (!std::isfinite(out.h(i)))
      throw NumericalError("pool: non-finite descriptor entry " + std::to_string(i));
  return out;
}

Reprojector::Reprojector(int input_dim, std::array<Eigen::Index, 3> target_dims,
                         std::uint64_t seed)
    : target_dims_(target_dims) {
  const Eigen::Index out_dim = target_dims[0] * target_dims[1] * target_dims[2];
  if (out_dim < 1 || input_dim < 1)
    throw ConfigError("reproject: dimensions must be positive");
  Rng rng(seed);
  map_ = Matrix(out_dim, input_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (Eigen::Index i = 0; i < out_dim; ++i)
    for (Eigen::Index j = 0; j < input_dim; ++j) map_(i, j) = scale * rng.normal();
}

Reprojector::Reprojector(Matrix map, std::array<Eigen::Index, 3> target_dims)
    : map_(std::move(map)), target_dims_(target_dims) {
  if (map_.rows() != target_dims[0] * target_dims[1] * target_dims[2])
    throw ConfigError("reproject: stored map rows do not match target dims");
}

Tensor3d Reprojector::apply(const Vector& h) const {
  if (h.size() != map_.cols())
    throw ConfigError("reproject: descriptor length " + std::to_string(h.size()) +
                      " does not match stored map width " + std::to_string(map_.cols()));
  const Vector flat = map_ * h;
  Tensor3d out(target_dims_[0], target_dims_[1], target_dims_[2]);
  // Row-major (A~, K~, T~) placement of the flat projection.
  Eigen::Index idx = 0;
  for (Eigen::Index a = 0; a < target_dims_[0]; ++a)
    for (Eigen::Index k = 0; k < target_dims_[1]; ++k)
      for (Eigen::Index t = 0; t < target_dims_[2]; ++t) out(a, k, t) = flat(idx++);
  return out;
}

}  // namespace sdp
