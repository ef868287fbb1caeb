#pragma once

#include "reid/kernels/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reid::kernels {

// Label-smoothed target: 1 - (C-1)/C * eps on the true class, eps / C
// elsewhere.
template <typename Scalar>
Vector<Scalar> smoothed_targets(std::size_t label, std::size_t n_classes,
                                Scalar epsilon) {
  const auto c = static_cast<Scalar>(n_classes);
  Vector<Scalar> q = Vector<Scalar>::Constant(static_cast<Eigen::Index>(n_classes),
                                              epsilon / c);
  q(static_cast<Eigen::Index>(label)) = Scalar(1) - (c - Scalar(1)) / c * epsilon;
  return q;
}

/// Softmax cross-entropy against label-smoothed targets, averaged over the
/// batch. Gradient: "logits".
template <typename Derived>
LossValueGrad<typename Derived::Scalar> identity_loss(
    const Eigen::MatrixBase<Derived>& logits, const BatchLabels& labels,
    typename Derived::Scalar epsilon = 0) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  if (n < 1 || static_cast<std::size_t>(n) != labels.size() ||
      static_cast<std::size_t>(c) != labels.n_classes) {
    throw Error(ErrorCode::kShapeMismatch, "identity_loss: logits must be N x n_classes");
  }
  validate(labels);
  if (!(epsilon >= Scalar(0) && epsilon < Scalar(1))) {
    throw Error(ErrorCode::kBadParams, "identity_loss: smoothing must lie in [0, 1)");
  }

  LossValueGrad<Scalar> out;
  Matrix<Scalar> grad(n, c);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = logits.row(i);
    const Scalar top = row.maxCoeff();
    const Scalar lse = top + std::log((row.array() - top).exp().sum());
    const Vector<Scalar> q = smoothed_targets(labels.person_ids[static_cast<std::size_t>(i)],
                                              labels.n_classes, epsilon);
    const Vector<Scalar> log_p = (row.transpose().array() - lse).matrix();
    total -= q.dot(log_p);
    grad.row(i) = (log_p.array().exp() - q.array()).matrix().transpose() / Scalar(n);
  }
  out.value = total / Scalar(n);
  out.grads.emplace("logits", std::move(grad));
  return out;
}

/// (1 - same) * max(0, margin - d)^2 + same * d^2. Gradient: "distance".
template <typename Scalar>
LossValueGrad<Scalar> contrastive_loss(Scalar distance, bool same_id, Scalar margin) {
  if (!(distance >= Scalar(0)) || !(margin > Scalar(0))) {
    throw Error(ErrorCode::kBadParams, "contrastive_loss: need d >= 0 and margin > 0");
  }
  LossValueGrad<Scalar> out;
  if (same_id) {
    out.value = distance * distance;
    out.grads.emplace("distance", scalar_grad(Scalar(2) * distance));
  } else {
    const Scalar gap = std::max(Scalar(0), margin - distance);
    out.value = gap * gap;
    out.grads.emplace("distance", scalar_grad(Scalar(-2) * gap));
  }
  return out;
}

/// Binary cross-entropy on the predicted same-identity probability, clamped
/// to [1e-12, 1 - 1e-12]. Gradient: "probability" (zero where clamped).
template <typename Scalar>
LossValueGrad<Scalar> verification_loss(Scalar p_same, bool same_id) {
  const Scalar lo = Scalar(1e-12);
  const Scalar hi = Scalar(1) - Scalar(1e-12);
  const Scalar p = std::clamp(p_same, lo, hi);
  const bool clamped = p != p_same;
  LossValueGrad<Scalar> out;
  if (same_id) {
    out.value = -std::log(p);
    out.grads.emplace("probability", scalar_grad(clamped ? Scalar(0) : Scalar(-1) / p));
  } else {
    out.value = -std::log1p(-p);
    out.grads.emplace("probability",
                      scalar_grad(clamped ? Scalar(0) : Scalar(1) / (Scalar(1) - p)));
  }
  return out;
}

/// max(margin + d_pos - d_neg, 0); the subgradient at the kink is 0.
/// Gradients: "d_pos", "d_neg".
template <typename Scalar>
LossValueGrad<Scalar> triplet_loss(Scalar d_pos, Scalar d_neg, Scalar margin) {
  if (!(d_pos >= Scalar(0)) || !(d_neg >= Scalar(0)) || !(margin >= Scalar(0))) {
    throw Error(ErrorCode::kBadParams, "triplet_loss: distances and margin must be >= 0");
  }
  const Scalar arg = margin + d_pos - d_neg;
  const bool active = arg > Scalar(0);
  LossValueGrad<Scalar> out;
  out.value = active ? arg : Scalar(0);
  out.grads.emplace("d_pos", scalar_grad(active ? Scalar(1) : Scalar(0)));
  out.grads.emplace("d_neg", scalar_grad(active ? Scalar(-1) : Scalar(0)));
  return out;
}

// Per-class feature memory used by the OIM loss. Read-only here.
template <typename Scalar>
struct MemoryBank {
  Matrix<Scalar> vectors;  // one row per class
  Scalar temperature = Scalar(1);
};

/// -log softmax(bank * f / temperature)[label]. Gradient: "feature" (D x 1).
template <typename Derived>
LossValueGrad<typename Derived::Scalar> oim_loss(
    const Eigen::MatrixBase<Derived>& feature, std::size_t label,
    const MemoryBank<typename Derived::Scalar>& bank) {
  using Scalar = typename Derived::Scalar;
  if (feature.cols() != 1 || feature.rows() != bank.vectors.cols() ||
      bank.vectors.rows() < 1) {
    throw Error(ErrorCode::kShapeMismatch, "oim_loss: feature must be a D-vector matching the bank");
  }
  if (!(bank.temperature > Scalar(0))) {
    throw Error(ErrorCode::kBadParams, "oim_loss: temperature must be positive");
  }
  if (label >= static_cast<std::size_t>(bank.vectors.rows())) {
    throw Error(ErrorCode::kBadLabel, "oim_loss: label outside the memory bank");
  }
  const Vector<Scalar> scores = bank.vectors * feature / bank.temperature;
  const Scalar top = scores.maxCoeff();
  const Scalar lse = top + std::log((scores.array() - top).exp().sum());
  Vector<Scalar> prob = (scores.array() - lse).exp().matrix();
  LossValueGrad<Scalar> out;
  out.value = lse - scores(static_cast<Eigen::Index>(label));
  prob(static_cast<Eigen::Index>(label)) -= Scalar(1);
  out.grads.emplace("feature", Matrix<Scalar>(bank.vectors.transpose() * prob / bank.temperature));
  return out;
}

// Softmax weights over each anchor's positives (on d) and negatives (on -d).
// Row i holds anchor i's weights; entries outside the set are zero.
template <typename Scalar>
struct TripletWeights {
  Matrix<Scalar> positive;
  Matrix<Scalar> negative;
};

namespace detail {

inline void check_wrt_shapes(Eigen::Index rows, Eigen::Index cols,
                             const BatchLabels& labels) {
  if (rows != cols || rows < 2 || static_cast<std::size_t>(rows) != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "weighted_regularized_triplet: distances must be N x N with N labels");
  }
  validate(labels);
}

}  // namespace detail

template <typename Derived>
TripletWeights<typename Derived::Scalar> triplet_weights(
    const Eigen::MatrixBase<Derived>& dist, const BatchLabels& labels) {
  using Scalar = typename Derived::Scalar;
  detail::check_wrt_shapes(dist.rows(), dist.cols(), labels);
  const Eigen::Index n = dist.rows();
  TripletWeights<Scalar> w{Matrix<Scalar>::Zero(n, n), Matrix<Scalar>::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar pos_max = -std::numeric_limits<Scalar>::infinity();
    Scalar neg_max = -std::numeric_limits<Scalar>::infinity();
    bool has_pos = false;
    bool has_neg = false;
    const auto yi = labels.person_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels.person_ids[static_cast<std::size_t>(j)] == yi) {
        pos_max = std::max(pos_max, dist(i, j));
        has_pos = true;
      } else {
        neg_max = std::max(neg_max, -dist(i, j));
        has_neg = true;
      }
    }
    if (!has_pos || !has_neg) {
      throw Error(ErrorCode::kDegenerateBatch,
                  "anchor " + std::to_string(i) + " lacks a positive or a negative");
    }
    Scalar pos_sum = 0;
    Scalar neg_sum = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels.person_ids[static_cast<std::size_t>(j)] == yi) {
        w.positive(i, j) = std::exp(dist(i, j) - pos_max);
        pos_sum += w.positive(i, j);
      } else {
        w.negative(i, j) = std::exp(-dist(i, j) - neg_max);
        neg_sum += w.negative(i, j);
      }
    }
    w.positive.row(i) /= pos_sum;
    w.negative.row(i) /= neg_sum;
  }
  return w;
}

/// Margin-free weighted triplet loss: for each anchor,
/// softplus(sum_j w+_ij d_ij - sum_k w-_ik d_ik), averaged over anchors.
/// Row i of `dist` is read as anchor i's distances; the gradient
/// "distances" treats every entry as an independent input.
template <typename Derived>
LossValueGrad<typename Derived::Scalar> weighted_regularized_triplet(
    const Eigen::MatrixBase<Derived>& dist, const BatchLabels& labels) {
  using Scalar = typename Derived::Scalar;
  const TripletWeights<Scalar> w = triplet_weights(dist, labels);
  const Eigen::Index n = dist.rows();
  Matrix<Scalar> grad = Matrix<Scalar>::Zero(n, n);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar pos = w.positive.row(i).dot(dist.row(i));
    const Scalar neg = w.negative.row(i).dot(dist.row(i));
    const Scalar x = pos - neg;
    total += softplus(x);
    const Scalar s = sigmoid(x) / Scalar(n);
    const auto yi = labels.person_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels.person_ids[static_cast<std::size_t>(j)] == yi) {
        grad(i, j) = s * w.positive(i, j) * (Scalar(1) + dist(i, j) - pos);
      } else {
        grad(i, j) = -s * w.negative(i, j) * (Scalar(1) - dist(i, j) + neg);
      }
    }
  }
  LossValueGrad<Scalar> out;
  out.value = total / Scalar(n);
  out.grads.emplace("distances", std::move(grad));
  return out;
}

/// (1 / 2N) * sum_i ||f_i - c_{y_i}||^2. Gradients: "features", "centers".
template <typename DerivedF, typename DerivedC>
LossValueGrad<typename DerivedF::Scalar> center_loss(
    const Eigen::MatrixBase<DerivedF>& features, const BatchLabels& labels,
    const Eigen::MatrixBase<DerivedC>& centers) {
  using Scalar = typename DerivedF::Scalar;
  const Eigen::Index n = features.rows();
  if (n < 1 || static_cast<std::size_t>(n) != labels.size() ||
      features.cols() != centers.cols() ||
      static_cast<std::size_t>(centers.rows()) != labels.n_classes) {
    throw Error(ErrorCode::kShapeMismatch,
                "center_loss: features N x D, centers n_classes x D");
  }
  validate(labels);
  Matrix<Scalar> d_features(n, features.cols());
  Matrix<Scalar> d_centers = Matrix<Scalar>::Zero(centers.rows(), centers.cols());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = static_cast<Eigen::Index>(labels.person_ids[static_cast<std::size_t>(i)]);
    const Vector<Scalar> diff = (features.row(i) - centers.row(y)).transpose();
    total += diff.squaredNorm();
    d_features.row(i) = diff.transpose() / Scalar(n);
    d_centers.row(y) -= diff.transpose() / Scalar(n);
  }
  LossValueGrad<Scalar> out;
  out.value = total / (Scalar(2) * Scalar(n));
  out.grads.emplace("features", std::move(d_features));
  out.grads.emplace("centers", std::move(d_centers));
  return out;
}

/// id + beta_center * center + beta_triplet * wrt; gradients with the same
/// name are summed with the same weights.
template <typename Scalar>
LossValueGrad<Scalar> total_loss(const LossValueGrad<Scalar>& id,
                                 const LossValueGrad<Scalar>& center,
                                 const LossValueGrad<Scalar>& wrt,
                                 Scalar beta_center = Scalar(0.0005),
                                 Scalar beta_triplet = Scalar(1)) {
  LossValueGrad<Scalar> out;
  out.value = id.value + beta_center * center.value + beta_triplet * wrt.value;
  auto accumulate = [&](const LossValueGrad<Scalar>& part, Scalar weight) {
    for (const auto& [name, g] : part.grads) {
      auto it = out.grads.find(name);
      if (it == out.grads.end()) {
        out.grads.emplace(name, weight * g);
      } else if (it->second.rows() == g.rows() && it->second.cols() == g.cols()) {
        it->second += weight * g;
      } else {
        throw Error(ErrorCode::kShapeMismatch,
                    "total_loss: gradient '" + name + "' has conflicting shapes");
      }
    }
  };
  accumulate(id, Scalar(1));
  accumulate(center, beta_center);
  accumulate(wrt, beta_triplet);
  return out;
}

}  // namespace reid::kernels
