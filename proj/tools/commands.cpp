#include "commands.hpp"

#include "sndiff/binary_io.hpp"
#include "sndiff/metrics.hpp"
#include "sndiff/mlp.hpp"
#include "sndiff/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace sndiff::app {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%04zu", prefix, i);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

Prior require_prior(const std::optional<PriorSpec>& spec, const char* name, const RunConfig& config,
                    std::uint64_t role) {
  if (!spec) throw ConfigError(std::string("config has no ") + name + " section");
  return build_prior(*spec, config.schedule(), derive_seed(config.seed, Stream::Parameters, role));
}

void write_diagnostics(const fs::path& path, const std::vector<std::pair<std::size_t, const PosteriorRun*>>& runs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "chain,step,t,residual_norm,dc_step_x,dc_step_n,reverse_step_x,reverse_step_n\n";
  out << std::setprecision(12);
  for (const auto& [chain, run] : runs) {
    for (const auto& d : run->diagnostics) {
      out << chain << "," << d.step << "," << d.t << "," << d.residual_norm << "," << d.dc_step_x << ","
          << d.dc_step_n << "," << d.reverse_step_x << "," << d.reverse_step_n << "\n";
    }
  }
}

Vector mean_of(const std::vector<Vector>& v) {
  Vector m = Vector::Zero(v.front().size());
  for (const auto& x : v) m += x;
  return m / static_cast<double>(v.size());
}

Matrix covariance_of(const std::vector<Vector>& v, const Vector& mean) {
  Matrix c = Matrix::Zero(mean.size(), mean.size());
  for (const auto& x : v) c += (x - mean) * (x - mean).transpose();
  return c / std::max<double>(1.0, static_cast<double>(v.size()) - 1.0);
}

std::optional<std::pair<int, int>> image_shape_for(const RunConfig& config, Eigen::Index n) {
  if (!config.problem || !config.problem->image_shape) return std::nullopt;
  const auto s = *config.problem->image_shape;
  if (static_cast<Eigen::Index>(s.first) * s.second != n) return std::nullopt;
  return s;
}

}  // namespace

void write_resolved_config(const RunConfig& config, const fs::path& dir) {
  ensure_dir(dir);
  std::ofstream out(dir / "resolved_config.json");
  if (!out) throw DataError("cannot write " + (dir / "resolved_config.json").string());
  out << config.resolved.dump(2) << "\n";
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  if (!config.train) throw ConfigError("config has no train section");
  const TrainSpec& spec = *config.train;
  const DiffusionSchedule schedule = config.schedule();
  const auto data = build_dataset(spec.dataset, schedule);
  if (data.empty()) throw DataError("train: the dataset is empty");
  const Eigen::Index dim = data.front().size();
  for (const auto& v : data) if (v.size() != dim) throw DataError("train: records of different lengths");

  MlpScoreNet::Architecture arch;
  arch.dim = dim;
  arch.hidden = spec.hidden;
  arch.activation = parse_activation(spec.activation);
  const Vector mean = mean_of(data);
  double var = 0.0;
  for (const auto& v : data) var += (v - mean).squaredNorm();
  arch.data_variance = std::max(var / (static_cast<double>(data.size()) * dim), 1e-6);
  Rng init = make_rng(spec.config.seed, Stream::Parameters);
  MlpScoreNet net(arch, schedule, init);

  const fs::path out = config.output_dir;
  write_resolved_config(config, out);
  log << "training " << spec.target << " model: " << data.size() << " samples, dim " << dim << ", "
      << net.parameter_count() << " parameters, " << spec.config.steps << " steps\n";
  const TrainResult result = train_dsm(net, data, spec.config, schedule);
  net.save(out / "model.bin");
  std::ofstream csv(out / "loss.csv");
  csv << "step,loss\n" << std::setprecision(12);
  for (std::size_t k = 0; k < result.loss_trace.size(); ++k)
    csv << result.trace_steps[k] << "," << result.loss_trace[k] << "\n";
  if (!result.loss_trace.empty())
    log << "final window loss " << result.loss_trace.back() << "\n";
  log << "wrote " << (out / "model.bin").string() << "\n";
  return 0;
}

int cmd_sample(const RunConfig& config, std::ostream& log) {
  if (!config.problem) throw ConfigError("config has no problem section");
  const Prior sx = require_prior(config.signal_prior, "signal_prior", config, 1);
  const Prior sn = require_prior(config.noise_prior, "noise_prior", config, 2);
  const fs::path out = config.output_dir;
  write_resolved_config(config, out);

  bool failed = false;
  const std::size_t chains = static_cast<std::size_t>(config.sampler.chains);
  for (int pi = 0; pi < config.problem->count; ++pi) {
    const InverseProblem problem = build_problem(config, pi, sx, sn);
    const fs::path dir = out / numbered("problem_", static_cast<std::size_t>(pi));
    ensure_dir(dir);
    write_vector(dir / "y.bin", problem.y);
    if (problem.x_true) write_vector(dir / "x_true.bin", *problem.x_true);
    if (problem.n_true) write_vector(dir / "n_true.bin", *problem.effective_noise());
    {
      std::ofstream prov(dir / "problem.json");
      prov << problem.provenance.dump(2) << "\n";
    }

    // chains of different problems draw from independent streams
    SamplerConfig sampler = config.sampler;
    sampler.seed = derive_seed(config.sampler.seed, Stream::Problem, static_cast<std::uint64_t>(pi));
    std::vector<std::optional<PosteriorRun>> runs(chains);
    std::vector<std::string> errors(chains);
    parallel_for(chains, config.sampler.threads, [&](std::size_t c) {
      try {
        runs[c] = sample_chain(problem, *sx.score, *sn.score, sampler, c);
      } catch (const SamplingError& e) {
        runs[c] = e.partial();
        errors[c] = e.what();
      }
    });

    std::vector<std::pair<std::size_t, const PosteriorRun*>> all;
    std::vector<Vector> init_x, init_n, xs, ns;
    for (std::size_t c = 0; c < chains; ++c) {
      const PosteriorRun& run = *runs[c];
      all.emplace_back(c, &run);
      init_x.push_back(run.x_init);
      init_n.push_back(run.n_init);
      if (!errors[c].empty()) {
        failed = true;
        log << "error: problem " << pi << ": " << errors[c] << "\n";
        continue;
      }
      write_vector(dir / (numbered("chain_", c) + "_x0.bin"), run.x0_hat);
      write_vector(dir / (numbered("chain_", c) + "_n0.bin"), run.n0_hat);
      if (config.sampler.record_trajectory) {
        write_array(dir / (numbered("chain_", c) + "_x_traj.bin"), run.x_trajectory);
        write_array(dir / (numbered("chain_", c) + "_n_traj.bin"), run.n_trajectory);
      }
      xs.push_back(run.x0_hat);
      ns.push_back(run.n0_hat);
    }
    write_diagnostics(dir / "diagnostics.csv", all);
    write_array(dir / "init_x.bin", init_x);
    write_array(dir / "init_n.bin", init_n);

    const auto xshape = image_shape_for(config, problem.A.cols());
    const auto nshape = image_shape_for(config, problem.A.rows());
    if (nshape) write_pgm(dir / "y.pgm", nshape->first, nshape->second, problem.y);
    if (xshape && problem.x_true) write_pgm(dir / "x_true.pgm", xshape->first, xshape->second, *problem.x_true);
    if (nshape && problem.n_true) write_pgm(dir / "n_true.pgm", nshape->first, nshape->second, *problem.effective_noise());
    if (!xs.empty()) {
      if (xshape) {
        write_pgm(dir / "x0_mean.pgm", xshape->first, xshape->second, mean_of(xs));
        for (std::size_t c = 0; c < std::min<std::size_t>(xs.size(), 4); ++c)
          write_pgm(dir / (numbered("chain_", c) + "_x0.pgm"), xshape->first, xshape->second, xs[c]);
      }
      if (nshape) write_pgm(dir / "n0_mean.pgm", nshape->first, nshape->second, mean_of(ns));
    }
    log << "problem " << pi << ": " << xs.size() << "/" << chains << " chains, rule "
        << rule_name(config.guidance.rule) << "\n";
  }
  return failed ? 3 : 0;
}

int cmd_eval(const fs::path& run_dir, std::ostream& log) {
  const fs::path cfg = run_dir / "resolved_config.json";
  if (!fs::is_directory(run_dir) || !fs::exists(cfg))
    throw DataError("not a run directory (no resolved_config.json): " + run_dir.string());
  Overrides keep;
  keep.output_dir = run_dir;
  const RunConfig config = load_config(cfg, keep);
  if (!config.problem) throw ConfigError("run has no problem section");

  MetricReport report;
  nlohmann::json summary = {{"notes", nlohmann::json::array()}, {"oracle", nlohmann::json::array()}};
  std::optional<Prior> sx, sn;
  const bool analytic = config.signal_prior && config.noise_prior && config.signal_prior->kind != "mixture" &&
                        config.signal_prior->kind != "mlp" && config.noise_prior->kind != "mixture" &&
                        config.noise_prior->kind != "mlp";
  if (analytic) {
    sx = require_prior(config.signal_prior, "signal_prior", config, 1);
    sn = require_prior(config.noise_prior, "noise_prior", config, 2);
  }
  std::ofstream oracle_csv;
  if (analytic) {
    oracle_csv.open(run_dir / "oracle.csv");
    oracle_csv << "problem,chains,mean_rel_err,cov_rel_err\n" << std::setprecision(10);
  }

  int problems_seen = 0;
  for (int pi = 0; pi < config.problem->count; ++pi) {
    const fs::path dir = run_dir / numbered("problem_", static_cast<std::size_t>(pi));
    if (!fs::is_directory(dir)) continue;
    ++problems_seen;
    std::vector<Vector> xs;
    for (std::size_t c = 0;; ++c) {
      const fs::path f = dir / (numbered("chain_", c) + "_x0.bin");
      if (!fs::exists(f)) {
        if (c >= static_cast<std::size_t>(config.sampler.chains)) break;
        continue;
      }
      xs.push_back(read_vector(f));
    }
    if (xs.empty()) {
      summary["notes"].push_back("problem " + std::to_string(pi) + ": no chain estimates");
      continue;
    }
    const Vector mean = mean_of(xs);
    const fs::path truth = dir / "x_true.bin";
    if (fs::exists(truth)) {
      const Vector x = read_vector(truth);
      const auto shape = image_shape_for(config, x.size());
      auto score = [&](const std::string& id, Vector est) {
        if (config.eval_clip && shape) est = est.cwiseMax(0.0).cwiseMin(1.0);
        const double s = shape ? ssim(x, est, shape->first, shape->second)
                               : std::numeric_limits<double>::quiet_NaN();
        report.add(id, psnr(x, est), s);
      };
      for (std::size_t c = 0; c < xs.size(); ++c) score(numbered("p", pi) + numbered("_c", c), xs[c]);
      score(numbered("p", pi) + "_mean", mean);
    } else {
      summary["notes"].push_back("problem " + std::to_string(pi) + ": no ground truth, metrics skipped");
    }
    if (analytic && sx->covariance && sn->covariance) {
      InverseProblem problem;
      problem.A = build_problem(config, pi, *sx, *sn).forward();
      problem.y = read_vector(dir / "y.bin");
      try {
        const GaussianPosterior post = gaussian_posterior(problem.A, problem.y, {*sx->mean, *sx->covariance},
                                                          {*sn->mean, *sn->covariance});
        const double mean_err = (mean - post.mean).norm() / std::max(post.mean.norm(), 1e-300);
        const double cov_err = xs.size() > 1
                                   ? (covariance_of(xs, mean) - post.covariance).norm() / post.covariance.norm()
                                   : std::numeric_limits<double>::quiet_NaN();
        oracle_csv << pi << "," << xs.size() << "," << mean_err << "," << cov_err << "\n";
        summary["oracle"].push_back({{"problem", pi}, {"mean_rel_err", mean_err}, {"cov_rel_err", cov_err}});
      } catch (const NumericError& e) {
        summary["notes"].push_back("problem " + std::to_string(pi) + ": oracle unavailable (" + e.what() + ")");
      }
    }
  }
  if (problems_seen == 0) throw DataError("run directory has no problem outputs: " + run_dir.string());
  report.write_csv(run_dir / "metrics.csv");
  const MetricSummary ps = report.psnr_summary(), ss = report.ssim_summary();
  summary["psnr"] = {{"mean", ps.mean}, {"std", ps.std}, {"median", ps.median}};
  summary["ssim"] = {{"mean", ss.mean}, {"std", ss.std}, {"median", ss.median}};
  summary["ssim_window"] = report.ssim_options.window;
  summary["ssim_k1"] = report.ssim_options.k1;
  summary["ssim_k2"] = report.ssim_options.k2;
  std::ofstream(run_dir / "eval_summary.json") << summary.dump(2) << "\n";
  for (const auto& note : summary["notes"]) log << "note: " << note.get<std::string>() << "\n";
  log << "psnr median " << ps.median << " dB, ssim median " << ss.median << "\n";
  return 0;
}

int cmd_bench(const RunConfig& config, std::ostream& log) {
  const BenchSpec spec = config.bench.value_or(BenchSpec{});
  if (spec.repeats < 5) log << "warning: " << spec.repeats << " repeat(s); medians over fewer than 5 repeats are unreliable\n";
  const fs::path out = config.output_dir;
  write_resolved_config(config, out);
  std::ofstream csv(out / "bench.csv");
  if (!csv) throw DataError("cannot write " + (out / "bench.csv").string());
  csv << "rule,steps,dim,repeats,median_total_ms,median_step_ms\n" << std::setprecision(10);
  const DiffusionSchedule schedule = config.schedule();

  for (int dim : spec.dims) {
    Rng rng = make_rng(config.seed, Stream::Parameters, 100 + static_cast<std::uint64_t>(dim));
    auto random_spd = [&](Eigen::Index n) {
      Matrix b(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) b(i, j) = std::normal_distribution<double>(0.0, 1.0)(rng);
      Matrix c = b * b.transpose() / static_cast<double>(n);
      c.diagonal().array() += 0.1;
      return c;
    };
    const Vector mx = standard_normal(dim, rng) * 0.5;
    const Vector mn = Vector::Zero(dim);
    const AnalyticGaussianScore sx(mx, random_spd(dim), schedule);
    const AnalyticGaussianScore sn(mn, Matrix(random_spd(dim) * 0.1), schedule);
    InverseProblem problem = observe(sx.sample(rng), LinearOperator::identity(dim), sn.sample(rng));

    for (int steps : spec.steps) {
      for (const auto& rule : spec.rules) {
        SamplerConfig sc = config.sampler;
        sc.steps = steps;
        sc.chains = 1;
        sc.guidance.rule = parse_rule(rule);
        std::vector<double> totals;
        for (int r = 0; r < spec.repeats; ++r) {
          const auto t0 = std::chrono::steady_clock::now();
          (void)sample_chain(problem, sx, sn, sc, 0);
          totals.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        const double med = summarize(totals).median;
        csv << rule << "," << steps << "," << dim << "," << spec.repeats << "," << med << "," << med / steps << "\n";
        log << rule << " T=" << steps << " d=" << dim << ": median " << med << " ms (" << med / steps << " ms/step)\n";
      }
    }
  }
  return 0;
}

}  // namespace sndiff::app
