#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace reid {

struct GradCheckOptions {
  std::size_t instances = 100;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Entries whose analytic value is at most this are compared in absolute
  // rather than relative terms.
  double analytic_floor = 1e-8;
  std::uint64_t seed = 2020;
};

struct KernelCheck {
  std::string kernel;
  std::size_t instances = 0;
  std::size_t entries_checked = 0;
  double max_relative_error = 0.0;
  double max_absolute_error_small = 0.0;  // over entries below the floor
  bool passed = false;
};

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
template <typename Fn>
Eigen::MatrixXd central_difference(Fn&& f, const Eigen::MatrixXd& x, double step) {
  Eigen::MatrixXd probe = x;
  Eigen::MatrixXd grad(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe.data()[i];
    probe.data()[i] = saved + step;
    const double up = f(probe);
    probe.data()[i] = saved - step;
    const double down = f(probe);
    probe.data()[i] = saved;
    grad.data()[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

// Folds one analytic/numeric pair into `check`.
void compare_gradients(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                       const GradCheckOptions& options, KernelCheck& check);

// Finite-difference verification of every kernel in reid::kernels on
// random instances.
std::vector<KernelCheck> run_gradient_suite(const GradCheckOptions& options = {});

std::string to_json(const std::vector<KernelCheck>& checks, const GradCheckOptions& options);

}  // namespace reid
