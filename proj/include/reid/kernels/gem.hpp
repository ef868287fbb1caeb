#pragma once

#include "reid/kernels/common.hpp"

#include <algorithm>
#include <cmath>

namespace reid::kernels {

inline constexpr double kGemActivationFloor = 1e-6;
inline constexpr double kGemInitialExponent = 3.0;

template <typename Scalar>
struct GemParams {
  Vector<Scalar> p;  // one exponent per feature map

  static GemParams initial(Eigen::Index maps) {
    return {Vector<Scalar>::Constant(maps, Scalar(kGemInitialExponent))};
  }
};

template <typename Scalar>
struct GemResult {
  Vector<Scalar> pooled;           // K
  Matrix<Scalar> d_activations;    // K x M, row k is d pooled_k / d x_k
  Vector<Scalar> d_p;              // K, d pooled_k / d p_k
};

/// Generalised-mean pooling. Each row of `activations` is one feature map's
/// W*H values; pooled_k = (mean_i x_ki^p_k)^(1/p_k). Activations are
/// clamped at 1e-6 first and receive zero gradient below the clamp.
template <typename Derived>
GemResult<typename Derived::Scalar> gem_pool(
    const Eigen::MatrixBase<Derived>& activations,
    const GemParams<typename Derived::Scalar>& params) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::log;
  using std::pow;
  const Eigen::Index k_maps = activations.rows();
  const Eigen::Index m = activations.cols();
  if (k_maps < 1 || m < 1) {
    throw Error(ErrorCode::kEmptyMap, "gem_pool: every feature map needs activations");
  }
  if (params.p.size() != k_maps) {
    throw Error(ErrorCode::kShapeMismatch, "gem_pool: one exponent per feature map");
  }
  if (!params.p.allFinite() || (params.p.array() <= Scalar(0)).any()) {
    throw Error(ErrorCode::kBadParams, "gem_pool: exponents must be finite and positive");
  }

  const auto floor = Scalar(kGemActivationFloor);
  GemResult<Scalar> out{Vector<Scalar>(k_maps), Matrix<Scalar>::Zero(k_maps, m),
                        Vector<Scalar>(k_maps)};
  for (Eigen::Index k = 0; k < k_maps; ++k) {
    const Scalar p = params.p(k);
    const Vector<Scalar> x = activations.row(k).transpose().array().max(floor).matrix();
    // Scale by the maximum so that large p cannot overflow.
    const Scalar top = x.maxCoeff();
    Scalar mean_pow = 0;
    Scalar mean_pow_log = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar r = x(i) / top;
      const Scalar rp = pow(r, p);
      mean_pow += rp;
      mean_pow_log += rp * log(r);
    }
    mean_pow /= Scalar(m);
    mean_pow_log /= Scalar(m);
    const Scalar f = top * pow(mean_pow, Scalar(1) / p);
    out.pooled(k) = f;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (activations(k, i) > floor) {
        out.d_activations(k, i) = pow(x(i) / f, p - Scalar(1)) / Scalar(m);
      }
    }
    out.d_p(k) = f * (mean_pow_log / (mean_pow * p) - log(mean_pow) / (p * p));
  }
  return out;
}

}  // namespace reid::kernels
