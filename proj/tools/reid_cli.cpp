// reid: evaluation, re-ranking, gradient checks and synthetic data for
// person re-identification embeddings.

#include "reid/bench.hpp"
#include "reid/distances.hpp"
#include "reid/embedio.hpp"
#include "reid/error.hpp"
#include "reid/gradcheck.hpp"
#include "reid/metrics.hpp"
#include "reid/parallel.hpp"
#include "reid/report.hpp"
#include "reid/rerank.hpp"
#include "reid/sampling.hpp"
#include "reid/synth.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw reid::Error(reid::ErrorCode::kIoFailure, "cannot write " + path);
  out << text;
  out.close();
  if (!out) throw reid::Error(reid::ErrorCode::kIoFailure, "write failed: " + path);
}

struct PipelineFlags {
  std::string query_dir;
  std::string gallery_dir;
  std::string metric = "euclidean";
  std::string protocol = "cross_camera";
  bool rerank = false;
  reid::RerankParams rerank_params;
  int threads = 0;
  long block_rows = 512;
  std::size_t max_rank = 100;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--query", f.query_dir, "Query embedding directory")->required();
  cmd->add_option("--gallery", f.gallery_dir, "Gallery embedding directory")->required();
  cmd->add_option("--metric", f.metric, "euclidean | euclidean_sq | cosine")
      ->check(CLI::IsMember({"euclidean", "euclidean_sq", "cosine"}));
  cmd->add_option("--protocol", f.protocol, "cross_camera | none")
      ->check(CLI::IsMember({"cross_camera", "none"}));
  cmd->add_option("--k1", f.rerank_params.k1, "Re-ranking neighbourhood size");
  cmd->add_option("--k2", f.rerank_params.k2, "Re-ranking query expansion size");
  cmd->add_option("--lambda", f.rerank_params.lambda, "Weight of the original distance");
  cmd->add_option("--threads", f.threads, "Worker threads (default: REID_THREADS or all cores)");
  cmd->add_option("--block-rows", f.block_rows, "Query rows per distance block")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-rank", f.max_rank, "CMC curve length")->check(CLI::PositiveNumber);
}

reid::DistanceMatrix reranked_distances(const PipelineFlags& f, const reid::EmbeddingSet& q,
                                        const reid::EmbeddingSet& g, int threads) {
  reid::validate(f.rerank_params);
  const auto metric = reid::parse_metric(f.metric);
  const reid::DistanceOptions opts{f.block_rows, threads};
  const auto qg = reid::pairwise_distance(q, g, metric, opts);
  const auto qq = reid::pairwise_distance(q, q, metric, opts);
  const auto gg = reid::pairwise_distance(g, g, metric, opts);
  std::clog << "re-ranking " << q.rows() << " x " << g.rows() << " (k1=" << f.rerank_params.k1
            << ", k2=" << f.rerank_params.k2 << ", lambda=" << f.rerank_params.lambda << ")\n";
  return reid::k_reciprocal_rerank(qg, gg, qq, f.rerank_params, threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Person re-identification retrieval evaluation and metric-learning kernels"};
  app.require_subcommand(1);

  PipelineFlags eval_flags;
  std::string eval_out;
  std::string eval_format = "json";
  std::string eval_dump;
  bool per_query = false;
  auto* eval = app.add_subcommand("eval", "Evaluate CMC / mAP / mINP of query vs gallery");
  add_pipeline_flags(eval, eval_flags);
  eval->add_flag("--rerank", eval_flags.rerank, "Apply k-reciprocal re-ranking first");
  eval->add_option("--out", eval_out, "Report path (default: stdout)");
  eval->add_option("--format", eval_format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  eval->add_flag("--per-query", per_query, "Include per-query diagnostics in the JSON report");
  eval->add_option("--dump-dist", eval_dump, "Write the evaluated distance matrix here");

  PipelineFlags rr_flags;
  std::string rr_out;
  auto* rerank = app.add_subcommand("rerank", "Write the k-reciprocal re-ranked distance matrix");
  add_pipeline_flags(rerank, rr_flags);
  rerank->add_option("--out", rr_out, "Output directory (f64le matrix)")->required();

  reid::GradCheckOptions gc;
  std::string gc_out;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of every kernel");
  grad->add_option("--instances", gc.instances, "Random instances per kernel")
      ->check(CLI::PositiveNumber);
  grad->add_option("--seed", gc.seed, "RNG seed");
  grad->add_option("--step", gc.step, "Central-difference step");
  grad->add_option("--tolerance", gc.tolerance, "Maximum relative error");
  grad->add_option("--out", gc_out, "JSON table path (default: stdout)");

  reid::SynthConfig sc;
  std::string sc_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled embedding set");
  synth->add_option("--n-ids", sc.n_ids, "Identities");
  synth->add_option("--per-id-per-cam", sc.per_id_per_cam, "Samples per identity per camera");
  synth->add_option("--n-cams", sc.n_cams, "Cameras");
  synth->add_option("--dim", sc.dim, "Embedding dimension");
  synth->add_option("--center-scale", sc.center_scale, "Spread of identity centres");
  synth->add_option("--noise-sigma", sc.noise_sigma, "Within-identity std-dev");
  synth->add_option("--cam-offset-sigma", sc.cam_offset_sigma, "Per-camera shift std-dev");
  synth->add_option("--seed", sc.seed, "RNG seed");
  synth->add_option("--out", sc_out, "Output directory")->required();

  reid::BenchConfig bc;
  std::string bc_metric = "euclidean";
  std::string bc_out;
  long bc_queries = bc.queries;
  long bc_gallery = bc.gallery;
  long bc_dim = bc.dim;
  auto* bench = app.add_subcommand("bench", "Time blocked distance + evaluation");
  bench->add_option("--queries", bc_queries, "Q");
  bench->add_option("--gallery", bc_gallery, "G");
  bench->add_option("--dim", bc_dim, "D");
  bench->add_option("--metric", bc_metric, "euclidean | euclidean_sq | cosine")
      ->check(CLI::IsMember({"euclidean", "euclidean_sq", "cosine"}));
  bench->add_option("--threads", bc.threads, "Worker threads");
  bench->add_option("--seed", bc.seed, "RNG seed");
  bench->add_option("--out", bc_out, "JSON path (default: stdout)");

  std::string sample_data;
  std::size_t sample_p = 16;
  std::size_t sample_k = 4;
  std::uint64_t sample_seed = 0;
  std::string sample_out;
  auto* sample = app.add_subcommand("sample", "Draw one identity-balanced P x K batch");
  sample->add_option("--data", sample_data, "Embedding directory whose labels are sampled")
      ->required();
  sample->add_option("--p", sample_p, "Identities per batch");
  sample->add_option("--k", sample_k, "Instances per identity");
  sample->add_option("--seed", sample_seed, "RNG seed");
  sample->add_option("--out", sample_out, "JSON path (default: stdout)");

  reid::LrSchedule schedule;
  std::string lr_ramp = "prose";
  int sched_epochs = 120;
  std::string sched_out;
  auto* sched = app.add_subcommand("schedule", "Print the warm-up step learning-rate schedule");
  sched->add_option("--lr-ramp", lr_ramp, "Warm-up reading: formula | prose")
      ->check(CLI::IsMember({"formula", "prose"}));
  sched->add_option("--base-lr", schedule.base_lr, "Rate after warm-up");
  sched->add_option("--warmup-lr", schedule.warmup_lr, "Rate at the start of warm-up");
  sched->add_option("--warmup-epochs", schedule.warmup_epochs, "Warm-up length");
  sched->add_option("--milestones", schedule.milestones, "Epochs after which the rate decays");
  sched->add_option("--decay", schedule.decay, "Decay factor per milestone");
  sched->add_option("--epochs", sched_epochs, "Epochs to tabulate")->check(CLI::PositiveNumber);
  sched->add_option("--out", sched_out, "JSON path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : reid::exit_code(reid::ErrorCode::kUsage);
  }

  try {
    if (*eval) {
      const int threads = reid::resolve_threads(eval_flags.threads);
      const auto query = reid::load_embedding_set(eval_flags.query_dir);
      const auto gallery = reid::load_embedding_set(eval_flags.gallery_dir);
      reid::EvalOptions opts;
      opts.protocol = reid::parse_protocol(eval_flags.protocol);
      opts.max_rank = eval_flags.max_rank;
      opts.threads = threads;
      opts.block_rows = eval_flags.block_rows;
      const auto metric = reid::parse_metric(eval_flags.metric);

      reid::EvalReport report;
      if (eval_flags.rerank) {
        const auto dist = reranked_distances(eval_flags, query, gallery, threads);
        if (!eval_dump.empty()) reid::save_distance_matrix(dist, eval_dump);
        report = reid::evaluate(dist, opts);
      } else if (!eval_dump.empty()) {
        const auto dist = reid::pairwise_distance(query, gallery, metric,
                                                  {eval_flags.block_rows, threads});
        reid::save_distance_matrix(dist, eval_dump);
        report = reid::evaluate(dist, opts);
      } else {
        report = reid::evaluate(query, gallery, metric, opts);
      }
      std::clog << reid::summary_table(report);
      write_text(eval_out, eval_format == "csv" ? reid::to_csv(report)
                                                : reid::to_json(report, per_query));
      return 0;
    }

    if (*rerank) {
      const int threads = reid::resolve_threads(rr_flags.threads);
      const auto query = reid::load_embedding_set(rr_flags.query_dir);
      const auto gallery = reid::load_embedding_set(rr_flags.gallery_dir);
      reid::save_distance_matrix(reranked_distances(rr_flags, query, gallery, threads), rr_out);
      return 0;
    }

    if (*grad) {
      const auto checks = reid::run_gradient_suite(gc);
      bool all = true;
      for (const auto& c : checks) {
        all = all && c.passed;
        std::clog << (c.passed ? "PASS " : "FAIL ") << c.kernel
                  << " max_rel_err=" << c.max_relative_error << "\n";
      }
      write_text(gc_out, reid::to_json(checks, gc));
      return all ? 0 : 1;
    }

    if (*synth) {
      reid::save_embedding_set(reid::generate(sc), sc_out);
      return 0;
    }

    if (*sample) {
      const auto data = reid::load_embedding_set(sample_data);
      const auto batch = reid::sample_batch(data.person_ids, sample_p, sample_k, sample_seed);
      reid::JsonWriter w;
      w.begin_object();
      w.key("p").value(static_cast<std::uint64_t>(batch.p_identities));
      w.key("k").value(static_cast<std::uint64_t>(batch.k_instances));
      w.key("seed").value(batch.seed);
      w.key("indices").begin_array();
      for (std::size_t i : batch.indices) w.value(static_cast<std::uint64_t>(i));
      w.end_array();
      w.key("person_ids").begin_array();
      for (std::size_t i : batch.indices) w.value(data.person_ids[i]);
      w.end_array();
      w.end_object();
      write_text(sample_out, w.str() + "\n");
      return 0;
    }

    if (*sched) {
      schedule.ramp = reid::parse_ramp_mode(lr_ramp);
      reid::validate(schedule);
      std::vector<double> rates;
      for (int t = 1; t <= sched_epochs; ++t) rates.push_back(reid::lr_at(schedule, t));
      reid::JsonWriter w;
      w.begin_object();
      w.key("schedule").raw(reid::to_json(schedule));
      w.key("lr").value(rates);
      w.end_object();
      write_text(sched_out, w.str() + "\n");
      return 0;
    }

    if (*bench) {
      bc.queries = bc_queries;
      bc.gallery = bc_gallery;
      bc.dim = bc_dim;
      bc.metric = reid::parse_metric(bc_metric);
      bc.threads = reid::resolve_threads(bc.threads);
      write_text(bc_out, reid::to_json(reid::run_bench(bc)));
      return 0;
    }
  } catch (const reid::Error& e) {
    std::cerr << "error: " << reid::to_string(e.code()) << ": " << e.what() << "\n";
    return reid::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
