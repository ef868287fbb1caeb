#include "reid/gradcheck.hpp"

#include "reid/kernels.hpp"
#include "reid/report.hpp"
#include "reid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace reid {

namespace k = reid::kernels;

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

Eigen::Index random_count(Rng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
}

k::BatchLabels random_labels(Rng& rng, Eigen::Index n, std::size_t classes) {
  k::BatchLabels labels{{}, classes};
  for (Eigen::Index i = 0; i < n; ++i) labels.person_ids.push_back(rng.uniform_index(classes));
  return labels;
}

// Batch of `ids` identities x `per_id` rows with Euclidean distances between
// random embeddings: symmetric, zero diagonal.
struct TripletBatch {
  MatrixXd dist;
  k::BatchLabels labels;
};

TripletBatch random_triplet_batch(Rng& rng) {
  const Eigen::Index ids = random_count(rng, 2, 4);
  const Eigen::Index per_id = random_count(rng, 2, 3);
  const Eigen::Index n = ids * per_id;
  const MatrixXd emb = random_matrix(rng, n, 4, 1.0);
  TripletBatch batch{MatrixXd::Zero(n, n), {{}, static_cast<std::size_t>(ids)}};
  for (Eigen::Index i = 0; i < n; ++i) {
    batch.labels.person_ids.push_back(static_cast<std::size_t>(i / per_id));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) batch.dist(i, j) = (emb.row(i) - emb.row(j)).norm();
    }
  }
  return batch;
}

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

k::NonLocalWeights<double> random_nonlocal(Rng& rng, Eigen::Index c, Eigen::Index b) {
  return {random_matrix(rng, c, b, 0.5), random_matrix(rng, c, b, 0.5),
          random_matrix(rng, c, b, 0.5), random_matrix(rng, b, c, 0.5),
          random_matrix(rng, c, 1, 1.0), random_matrix(rng, c, 1, 0.5)};
}

using CheckFn = std::function<void(Rng&, KernelCheck&)>;

}  // namespace

void compare_gradients(const MatrixXd& analytic, const MatrixXd& numeric,
                       const GradCheckOptions& options, KernelCheck& check) {
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double diff = std::abs(a - n);
    if (!std::isfinite(a) || !std::isfinite(n)) {
      check.max_relative_error = std::numeric_limits<double>::infinity();
    } else if (std::abs(a) > options.analytic_floor) {
      check.max_relative_error = std::max(check.max_relative_error, diff / std::abs(a));
    } else {
      check.max_absolute_error_small = std::max(check.max_absolute_error_small, diff);
    }
    ++check.entries_checked;
  }
}

std::vector<KernelCheck> run_gradient_suite(const GradCheckOptions& options) {
  const double h = options.step;
  auto compare = [&](const MatrixXd& analytic, const MatrixXd& numeric, KernelCheck& c) {
    compare_gradients(analytic, numeric, options, c);
  };

  std::vector<std::pair<std::string, CheckFn>> suite;

  suite.emplace_back("identity_loss", [&](Rng& rng, KernelCheck& c) {
    const Eigen::Index n = random_count(rng, 1, 6);
    const auto classes = static_cast<std::size_t>(random_count(rng, 2, 8));
    const MatrixXd logits = random_matrix(rng, n, static_cast<Eigen::Index>(classes), 2.0);
    const auto labels = random_labels(rng, n, classes);
    const double eps = rng.uniform01() < 0.3 ? 0.0 : rng.uniform(0.0, 0.5);
    const auto res = k::identity_loss(logits, labels, eps);
    compare(res.grad("logits"),
            central_difference([&](const MatrixXd& x) { return k::identity_loss(x, labels, eps).value; },
                               logits, h),
            c);
  });

  suite.emplace_back("contrastive_loss", [&](Rng& rng, KernelCheck& c) {
    const bool same = rng.uniform01() < 0.5;
    const double margin = rng.uniform(0.5, 1.5);
    double d = 0.0;
    do {
      d = rng.uniform(0.05, 2.0);
    } while (std::abs(margin - d) < 1e-3);
    const auto res = k::contrastive_loss(d, same, margin);
    compare(res.grad("distance"),
            central_difference([&](const MatrixXd& x) { return k::contrastive_loss(x(0, 0), same, margin).value; },
                               scalar(d), h),
            c);
  });

  suite.emplace_back("verification_loss", [&](Rng& rng, KernelCheck& c) {
    const bool same = rng.uniform01() < 0.5;
    const double p = rng.uniform(0.02, 0.98);
    const auto res = k::verification_loss(p, same);
    compare(res.grad("probability"),
            central_difference([&](const MatrixXd& x) { return k::verification_loss(x(0, 0), same).value; },
                               scalar(p), h),
            c);
  });

  suite.emplace_back("triplet_loss", [&](Rng& rng, KernelCheck& c) {
    const double margin = rng.uniform(0.1, 0.5);
    double dp = 0.0;
    double dn = 0.0;
    do {
      dp = rng.uniform(0.05, 2.0);
      dn = rng.uniform(0.05, 2.0);
    } while (std::abs(margin + dp - dn) < 1e-3);
    const auto res = k::triplet_loss(dp, dn, margin);
    compare(res.grad("d_pos"),
            central_difference([&](const MatrixXd& x) { return k::triplet_loss(x(0, 0), dn, margin).value; },
                               scalar(dp), h),
            c);
    compare(res.grad("d_neg"),
            central_difference([&](const MatrixXd& x) { return k::triplet_loss(dp, x(0, 0), margin).value; },
                               scalar(dn), h),
            c);
  });

  suite.emplace_back("oim_loss", [&](Rng& rng, KernelCheck& c) {
    const Eigen::Index classes = random_count(rng, 2, 6);
    const Eigen::Index dim = random_count(rng, 2, 8);
    k::MemoryBank<double> bank{random_matrix(rng, classes, dim, 1.0), rng.uniform(0.1, 1.0)};
    bank.vectors.rowwise().normalize();
    const MatrixXd f = random_matrix(rng, dim, 1, 0.5);
    const auto label = static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
    const auto res = k::oim_loss(f, label, bank);
    compare(res.grad("feature"),
            central_difference([&](const MatrixXd& x) { return k::oim_loss(x, label, bank).value; }, f, h),
            c);
  });

  suite.emplace_back("weighted_regularized_triplet", [&](Rng& rng, KernelCheck& c) {
    const TripletBatch batch = random_triplet_batch(rng);
    const auto res = k::weighted_regularized_triplet(batch.dist, batch.labels);
    compare(res.grad("distances"),
            central_difference(
                [&](const MatrixXd& x) { return k::weighted_regularized_triplet(x, batch.labels).value; },
                batch.dist, h),
            c);
  });

  suite.emplace_back("gem_pool", [&](Rng& rng, KernelCheck& c) {
    const Eigen::Index maps = random_count(rng, 1, 4);
    const Eigen::Index size = random_count(rng, 2, 12);
    MatrixXd act(maps, size);
    for (Eigen::Index i = 0; i < act.size(); ++i) act.data()[i] = rng.uniform(0.5, 3.0);
    k::GemParams<double> params{VectorXd(maps)};
    for (Eigen::Index i = 0; i < maps; ++i) params.p(i) = rng.uniform(1.0, 5.0);
    const VectorXd weights = random_matrix(rng, maps, 1, 1.0);
    const auto res = k::gem_pool(act, params);
    // Scalar probe L = sum_k weights_k * pooled_k.
    const MatrixXd d_act = res.d_activations.array().colwise() * weights.array();
    compare(d_act,
            central_difference(
                [&](const MatrixXd& x) { return weights.dot(k::gem_pool(x, params).pooled); }, act, h),
            c);
    const MatrixXd d_p = res.d_p.cwiseProduct(weights);
    compare(d_p,
            central_difference(
                [&](const MatrixXd& x) {
                  return weights.dot(k::gem_pool(act, k::GemParams<double>{x}).pooled);
                },
                params.p, h),
            c);
  });

  suite.emplace_back("nonlocal_block", [&](Rng& rng, KernelCheck& c) {
    const Eigen::Index n = random_count(rng, 1, 5);
    const Eigen::Index ch = random_count(rng, 2, 6);
    const Eigen::Index b = random_count(rng, 1, ch);
    const MatrixXd x = random_matrix(rng, n, ch, 1.0);
    const auto w = random_nonlocal(rng, ch, b);
    const MatrixXd upstream = random_matrix(rng, n, ch, 1.0);
    const auto res = k::nonlocal_block_vjp(x, w, upstream);
    auto probe = [&](const MatrixXd& xs, const k::NonLocalWeights<double>& ws) {
      return (upstream.array() * k::nonlocal_block(xs, ws).array()).sum();
    };
    compare(res.grad("x"), central_difference([&](const MatrixXd& v) { return probe(v, w); }, x, h), c);
    auto check_weight = [&](const char* name, MatrixXd k::NonLocalWeights<double>::*member) {
      compare(res.grad(name),
              central_difference(
                  [&](const MatrixXd& v) {
                    auto ws = w;
                    ws.*member = v;
                    return probe(x, ws);
                  },
                  w.*member, h),
              c);
    };
    check_weight("theta", &k::NonLocalWeights<double>::theta);
    check_weight("phi", &k::NonLocalWeights<double>::phi);
    check_weight("g", &k::NonLocalWeights<double>::g);
    check_weight("out", &k::NonLocalWeights<double>::out);
    auto check_vector = [&](const char* name, VectorXd k::NonLocalWeights<double>::*member) {
      compare(res.grad(name),
              central_difference(
                  [&](const MatrixXd& v) {
                    auto ws = w;
                    ws.*member = v;
                    return probe(x, ws);
                  },
                  w.*member, h),
              c);
    };
    check_vector("out_scale", &k::NonLocalWeights<double>::out_scale);
    check_vector("out_shift", &k::NonLocalWeights<double>::out_shift);
  });

  suite.emplace_back("center_loss", [&](Rng& rng, KernelCheck& c) {
    const Eigen::Index n = random_count(rng, 1, 6);
    const Eigen::Index dim = random_count(rng, 1, 5);
    const auto classes = static_cast<std::size_t>(random_count(rng, 1, 4));
    const MatrixXd f = random_matrix(rng, n, dim, 1.0);
    const MatrixXd centers = random_matrix(rng, static_cast<Eigen::Index>(classes), dim, 1.0);
    const auto labels = random_labels(rng, n, classes);
    const auto res = k::center_loss(f, labels, centers);
    compare(res.grad("features"),
            central_difference([&](const MatrixXd& x) { return k::center_loss(x, labels, centers).value; }, f, h),
            c);
    compare(res.grad("centers"),
            central_difference([&](const MatrixXd& x) { return k::center_loss(f, labels, x).value; }, centers, h),
            c);
  });

  suite.emplace_back("total_loss", [&](Rng& rng, KernelCheck& c) {
    const TripletBatch batch = random_triplet_batch(rng);
    const Eigen::Index n = batch.dist.rows();
    const auto classes = batch.labels.n_classes;
    const MatrixXd logits = random_matrix(rng, n, static_cast<Eigen::Index>(classes), 1.5);
    const MatrixXd features = random_matrix(rng, n, 3, 1.0);
    const MatrixXd centers = random_matrix(rng, static_cast<Eigen::Index>(classes), 3, 1.0);
    const double beta_center = rng.uniform(0.0005, 1.0);
    const double beta_wrt = rng.uniform(0.5, 1.5);
    const double eps = 0.1;
    auto total = [&](const MatrixXd& lg, const MatrixXd& ft, const MatrixXd& ct, const MatrixXd& ds) {
      return k::total_loss(k::identity_loss(lg, batch.labels, eps),
                           k::center_loss(ft, batch.labels, ct),
                           k::weighted_regularized_triplet(ds, batch.labels), beta_center, beta_wrt);
    };
    const auto res = total(logits, features, centers, batch.dist);
    compare(res.grad("logits"),
            central_difference([&](const MatrixXd& x) { return total(x, features, centers, batch.dist).value; },
                               logits, h),
            c);
    compare(res.grad("features"),
            central_difference([&](const MatrixXd& x) { return total(logits, x, centers, batch.dist).value; },
                               features, h),
            c);
    compare(res.grad("centers"),
            central_difference([&](const MatrixXd& x) { return total(logits, features, x, batch.dist).value; },
                               centers, h),
            c);
    compare(res.grad("distances"),
            central_difference([&](const MatrixXd& x) { return total(logits, features, centers, x).value; },
                               batch.dist, h),
            c);
  });

  std::vector<KernelCheck> results;
  std::uint64_t stream = 0;
  for (auto& [name, fn] : suite) {
    KernelCheck check;
    check.kernel = name;
    Rng rng(options.seed * 1000003ULL + stream++);
    for (std::size_t i = 0; i < options.instances; ++i) {
      fn(rng, check);
      ++check.instances;
    }
    check.passed = check.max_relative_error < options.tolerance &&
                   check.max_absolute_error_small < options.tolerance;
    results.push_back(check);
  }
  return results;
}

std::string to_json(const std::vector<KernelCheck>& checks, const GradCheckOptions& options) {
  JsonWriter w;
  w.begin_object();
  w.key("step").value(options.step);
  w.key("tolerance").value(options.tolerance);
  w.key("instances").value(static_cast<std::uint64_t>(options.instances));
  w.key("seed").value(options.seed);
  bool all = true;
  w.key("kernels").begin_array();
  for (const auto& c : checks) {
    all = all && c.passed;
    w.begin_object();
    w.key("kernel").value(c.kernel);
    w.key("instances").value(static_cast<std::uint64_t>(c.instances));
    w.key("entries_checked").value(static_cast<std::uint64_t>(c.entries_checked));
    w.key("max_relative_error").value(c.max_relative_error);
    w.key("max_absolute_error_small").value(c.max_absolute_error_small);
    w.key("passed").value(c.passed);
    w.end_object();
  }
  w.end_array();
  w.key("passed").value(all);
  w.end_object();
  return w.str() + "\n";
}

}  // namespace reid
