#pragma once

#include "reid/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace reid::kernels {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Scalar loss plus its gradient with respect to each named differentiable
// input. Scalar inputs carry 1x1 gradients.
template <typename Scalar>
struct LossValueGrad {
  Scalar value = Scalar(0);
  std::map<std::string, Matrix<Scalar>> grads;

  const Matrix<Scalar>& grad(const std::string& name) const {
    const auto it = grads.find(name);
    if (it == grads.end()) {
      throw Error(ErrorCode::kShapeMismatch, "no gradient named '" + name + "'");
    }
    return it->second;
  }
};

struct BatchLabels {
  std::vector<std::size_t> person_ids;
  std::size_t n_classes = 0;

  std::size_t size() const { return person_ids.size(); }
};

inline void validate(const BatchLabels& labels) {
  for (std::size_t id : labels.person_ids) {
    if (id >= labels.n_classes) {
      throw Error(ErrorCode::kBadLabel,
                  "label " + std::to_string(id) + " outside [0, " +
                      std::to_string(labels.n_classes) + ")");
    }
  }
}

template <typename Scalar>
Matrix<Scalar> scalar_grad(Scalar g) {
  Matrix<Scalar> m(1, 1);
  m(0, 0) = g;
  return m;
}

// log(1 + exp(x)) without overflow for large |x|.
template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return (x > Scalar(0) ? x : Scalar(0)) + log1p(exp(-abs(x)));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

// Numerically stable softmax of a dense vector expression.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> e = (v.array() - v.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace reid::kernels
