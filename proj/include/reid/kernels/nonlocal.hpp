#pragma once

#include "reid/kernels/common.hpp"

namespace reid::kernels {

// Dot-product non-local block over N positions with C channels and a
// bottleneck of B channels. The output projection is followed by a
// per-channel affine (the folded BatchNorm after W_z); zeroing its scale and
// shift makes the whole block the identity.
template <typename Scalar>
struct NonLocalWeights {
  Matrix<Scalar> theta;      // C x B
  Matrix<Scalar> phi;        // C x B
  Matrix<Scalar> g;          // C x B
  Matrix<Scalar> out;        // B x C
  Vector<Scalar> out_scale;  // C
  Vector<Scalar> out_shift;  // C

  Eigen::Index channels() const { return theta.rows(); }
  Eigen::Index bottleneck() const { return theta.cols(); }
};

namespace detail {

template <typename Scalar>
void check_nonlocal_shapes(Eigen::Index positions, Eigen::Index channels,
                           const NonLocalWeights<Scalar>& w) {
  const Eigen::Index c = w.channels();
  const Eigen::Index b = w.bottleneck();
  const bool ok = positions >= 1 && channels == c && b >= 1 && b <= c &&
                  w.phi.rows() == c && w.phi.cols() == b && w.g.rows() == c &&
                  w.g.cols() == b && w.out.rows() == b && w.out.cols() == c &&
                  w.out_scale.size() == c && w.out_shift.size() == c;
  if (!ok) {
    throw Error(ErrorCode::kShapeMismatch, "nonlocal_block: inconsistent weight shapes");
  }
}

}  // namespace detail

/// z = x + (((theta(x) phi(x)^T / N) g(x)) W_out) * scale + shift, row-wise.
template <typename Derived>
Matrix<typename Derived::Scalar> nonlocal_block(
    const Eigen::MatrixBase<Derived>& x,
    const NonLocalWeights<typename Derived::Scalar>& w) {
  using Scalar = typename Derived::Scalar;
  detail::check_nonlocal_shapes(x.rows(), x.cols(), w);
  const auto n = static_cast<Scalar>(x.rows());
  const Matrix<Scalar> theta = x * w.theta;
  const Matrix<Scalar> phi = x * w.phi;
  const Matrix<Scalar> g = x * w.g;
  const Matrix<Scalar> affinity = theta * phi.transpose() / n;
  const Matrix<Scalar> projected = (affinity * g) * w.out;
  Matrix<Scalar> z = x;
  z.array() += (projected.array().rowwise() * w.out_scale.transpose().array()).rowwise() +
               w.out_shift.transpose().array();
  return z;
}

/// Vector-Jacobian product: given dL/dz, returns dL/d of "x", "theta",
/// "phi", "g", "out", "out_scale", "out_shift". `value` holds <dL/dz, z>.
template <typename DerivedX, typename DerivedU>
LossValueGrad<typename DerivedX::Scalar> nonlocal_block_vjp(
    const Eigen::MatrixBase<DerivedX>& x,
    const NonLocalWeights<typename DerivedX::Scalar>& w,
    const Eigen::MatrixBase<DerivedU>& upstream) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_nonlocal_shapes(x.rows(), x.cols(), w);
  if (upstream.rows() != x.rows() || upstream.cols() != x.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "nonlocal_block_vjp: upstream must match x");
  }
  const auto n = static_cast<Scalar>(x.rows());
  const Matrix<Scalar> theta = x * w.theta;
  const Matrix<Scalar> phi = x * w.phi;
  const Matrix<Scalar> g = x * w.g;
  const Matrix<Scalar> affinity = theta * phi.transpose() / n;
  const Matrix<Scalar> aggregated = affinity * g;
  const Matrix<Scalar> projected = aggregated * w.out;

  const Matrix<Scalar> d_projected =
      (upstream.array().rowwise() * w.out_scale.transpose().array()).matrix();
  const Matrix<Scalar> d_aggregated = d_projected * w.out.transpose();
  const Matrix<Scalar> d_affinity = d_aggregated * g.transpose();
  const Matrix<Scalar> d_g = affinity.transpose() * d_aggregated;
  const Matrix<Scalar> d_theta = d_affinity * phi / n;
  const Matrix<Scalar> d_phi = d_affinity.transpose() * theta / n;

  LossValueGrad<Scalar> out;
  Matrix<Scalar> z = nonlocal_block(x, w);
  out.value = (upstream.array() * z.array()).sum();
  out.grads.emplace("x", Matrix<Scalar>(upstream + d_theta * w.theta.transpose() +
                                        d_phi * w.phi.transpose() +
                                        d_g * w.g.transpose()));
  out.grads.emplace("theta", Matrix<Scalar>(x.transpose() * d_theta));
  out.grads.emplace("phi", Matrix<Scalar>(x.transpose() * d_phi));
  out.grads.emplace("g", Matrix<Scalar>(x.transpose() * d_g));
  out.grads.emplace("out", Matrix<Scalar>(aggregated.transpose() * d_projected));
  out.grads.emplace("out_scale",
                    Matrix<Scalar>((upstream.array() * projected.array()).colwise().sum().transpose()));
  out.grads.emplace("out_shift", Matrix<Scalar>(upstream.colwise().sum().transpose()));
  return out;
}

}  // namespace reid::kernels
