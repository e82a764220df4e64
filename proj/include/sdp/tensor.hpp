#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "sdp/common.hpp"

namespace sdp {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Complex = std::complex<double>;

// Dense third-order tensor. Storage is the mode-1 unfolding laid out
// column-major: element (i, j, k) lives at offset i + I1*(j + I2*k), so
// earlier modes always vary fastest.
template <typename Scalar>
class Tensor3 {
public:
  Tensor3() : dims_{0, 0, 0} {}
  Tensor3(Eigen::Index i1, Eigen::Index i2, Eigen::Index i3)
      : dims_{i1, i2, i3}, data_(static_cast<std::size_t>(i1 * i2 * i3), Scalar(0)) {}

  Eigen::Index dim(int mode) const { return dims_[mode]; }
  const std::array<Eigen::Index, 3>& dims() const { return dims_; }
  Eigen::Index size() const { return dims_[0] * dims_[1] * dims_[2]; }

  Scalar& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data_[static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k))];
  }
  Scalar operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_[static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k))];
  }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  bool same_dims(const Tensor3& o) const { return dims_ == o.dims_; }

  double squared_norm() const {
    double s = 0.0;
    for (const Scalar& v : data_) s += static_cast<double>(std::norm(v));
    return s;
  }

private:
  std::array<Eigen::Index, 3> dims_;
  std::vector<Scalar> data_;
};

using Tensor3d = Tensor3<double>;
using Tensor3c = Tensor3<Complex>;

// Mode-n unfolding, modes numbered 1..3. X_(n) has dims_[n-1] rows; the
// column index runs over the remaining modes with the lower mode fastest:
//   X_(1): column j = i2 + I2*i3
//   X_(2): column j = i1 + I1*i3
//   X_(3): column j = i1 + I1*i2
template <typename Scalar>
MatrixX<Scalar> unfold(const Tensor3<Scalar>& x, int mode) {
  const Eigen::Index i1 = x.dim(0), i2 = x.dim(1), i3 = x.dim(2);
  switch (mode) {
    case 1: {
      return Eigen::Map<const MatrixX<Scalar>>(x.data(), i1, i2 * i3);
    }
    case 2: {
      MatrixX<Scalar> m(i2, i1 * i3);
      for (Eigen::Index k = 0; k < i3; ++k)
        for (Eigen::Index j = 0; j < i2; ++j)
          for (Eigen::Index i = 0; i < i1; ++i) m(j, i + i1 * k) = x(i, j, k);
      return m;
    }
    case 3: {
      MatrixX<Scalar> m(i3, i1 * i2);
      for (Eigen::Index k = 0; k < i3; ++k)
        for (Eigen::Index j = 0; j < i2; ++j)
          for (Eigen::Index i = 0; i < i1; ++i) m(k, i + i1 * j) = x(i, j, k);
      return m;
    }
    default:
      throw ConfigError("unfold: mode must be 1, 2 or 3");
  }
}

// Inverse of unfold for the same convention.
template <typename Scalar>
Tensor3<Scalar> fold(const MatrixX<Scalar>& m, int mode,
                     const std::array<Eigen::Index, 3>& dims) {
  Tensor3<Scalar> x(dims[0], dims[1], dims[2]);
  const Eigen::Index i1 = dims[0], i2 = dims[1], i3 = dims[2];
  switch (mode) {
    case 1:
      for (Eigen::Index k = 0; k < i3; ++k)
        for (Eigen::Index j = 0; j < i2; ++j)
          for (Eigen::Index i = 0; i < i1; ++i) x(i, j, k) = m(i, j + i2 * k);
      break;
    case 2:
      for (Eigen::Index k = 0; k < i3; ++k)
        for (Eigen::Index j = 0; j < i2; ++j)
          for (Eigen::Index i = 0; i < i1; ++i) x(i, j, k) = m(j, i + i1 * k);
      break;
    case 3:
      for (Eigen::Index k = 0; k < i3; ++k)
        for (Eigen::Index j = 0; j < i2; ++j)
          for (Eigen::Index i = 0; i < i1; ++i) x(i, j, k) = m(k, i + i1 * j);
      break;
    default:
      throw ConfigError("fold: mode must be 1, 2 or 3");
  }
  return x;
}

// Khatri-Rao (column-wise Kronecker) product. Row ordering pairs with the
// unfolding above: row index = j + J*i, so X_(1) = A (khatri_rao(C,B))^T
// holds for a rank-R triple (A,B,C).
template <typename Scalar>
MatrixX<Scalar> khatri_rao(const MatrixX<Scalar>& u, const MatrixX<Scalar>& v) {
  if (u.cols() != v.cols())
    throw ConfigError("khatri_rao: column counts differ");
  const Eigen::Index I = u.rows(), J = v.rows(), R = u.cols();
  MatrixX<Scalar> out(I * J, R);
  for (Eigen::Index r = 0; r < R; ++r)
    for (Eigen::Index i = 0; i < I; ++i)
      out.block(J * i, r, J, 1) = v.col(r) * u(i, r);
  return out;
}

}  // namespace sdp
