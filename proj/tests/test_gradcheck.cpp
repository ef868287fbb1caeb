#include "reid/gradcheck.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <set>

TEST_CASE("central differences of a quadratic are exact up to round-off") {
  Eigen::MatrixXd x(2, 2);
  x << 1.0, -2.0, 0.5, 3.0;
  const auto f = [](const Eigen::MatrixXd& m) { return m.squaredNorm(); };
  const Eigen::MatrixXd g = reid::central_difference(f, x, 1e-5);
  CHECK((g - 2.0 * x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("a wrong gradient is caught") {
  reid::GradCheckOptions opts;
  reid::KernelCheck check;
  Eigen::MatrixXd analytic(1, 2);
  analytic << 1.0, 2.0;
  Eigen::MatrixXd numeric(1, 2);
  numeric << 1.0, 2.01;
  reid::compare_gradients(analytic, numeric, opts, check);
  CHECK(check.max_relative_error > opts.tolerance);
  CHECK(check.entries_checked == 2);
}

TEST_CASE("every kernel passes the finite-difference suite") {
  reid::GradCheckOptions opts;
  opts.instances = 100;
  const auto checks = reid::run_gradient_suite(opts);
  std::set<std::string> names;
  for (const auto& c : checks) {
    INFO(c.kernel, " max_rel=", c.max_relative_error);
    CHECK(c.passed);
    CHECK(c.instances == 100);
    CHECK(c.entries_checked >= 100);
    CHECK(c.max_relative_error < 1e-4);
    names.insert(c.kernel);
  }
  CHECK(names == std::set<std::string>{"identity_loss", "contrastive_loss", "verification_loss",
                                       "triplet_loss", "oim_loss", "weighted_regularized_triplet",
                                       "gem_pool", "nonlocal_block", "center_loss", "total_loss"});
  const auto doc = nlohmann::json::parse(reid::to_json(checks, opts));
  CHECK(doc.dump().find("gem_pool") != std::string::npos);
}

TEST_CASE("the suite is reproducible for a fixed seed") {
  reid::GradCheckOptions opts;
  opts.instances = 5;
  const auto a = reid::run_gradient_suite(opts);
  const auto b = reid::run_gradient_suite(opts);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].max_relative_error == b[i].max_relative_error);
  }
}
