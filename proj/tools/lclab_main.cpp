// lclab: sample log-concave ensembles, tabulate tail statistics, and fit
// empirical constants for the tail/moment inequalities in the core library.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lclab/bounds.hpp"
#include "lclab/combinatorics.hpp"
#include "lclab/distributions.hpp"
#include "lclab/harness.hpp"
#include "lclab/parallel.hpp"
#include "lclab/stats.hpp"

namespace {

using lclab::dist::DistributionSpec;

DistributionSpec build_spec(const std::string& kind, int n, double p,
                            const std::string& spec_json_path,
                            std::optional<std::uint64_t> rotation_seed) {
  if (!spec_json_path.empty()) {
    std::ifstream in(spec_json_path);
    if (!in) throw std::runtime_error("io error: cannot read spec " + spec_json_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return lclab::dist::spec_from_json(text);
  }
  DistributionSpec spec = kind == "lp_ball"
                              ? DistributionSpec::lp_ball(n, p)
                              : DistributionSpec(lclab::dist::kind_from_name(kind), n);
  if (rotation_seed.has_value()) spec = spec.rotated(*rotation_seed);
  return spec;
}

int run_sample(const std::string& kind, int n, double p, const std::string& spec_json,
               std::optional<std::uint64_t> rotation_seed, long count, std::uint64_t seed,
               const std::string& out, const std::string& format, int workers) {
  lclab::dist::SampleBatch batch =
      kind == "sphere" ? lclab::dist::sample_sphere(n, count, seed, workers)
                       : lclab::dist::sample(build_spec(kind, n, p, spec_json, rotation_seed),
                                             count, seed, workers);
  if (format == "bin") {
    if (out.empty()) throw std::invalid_argument("--format bin requires --out");
    lclab::dist::write_batch_binary(batch, out);
  } else if (out.empty()) {
    for (long i = 0; i < batch.count(); ++i)
      for (int j = 0; j < batch.n(); ++j)
        std::printf("%.17g%c", batch.data(i, j), j + 1 == batch.n() ? '\n' : ',');
  } else {
    lclab::dist::write_batch_csv(batch, out);
  }
  return 0;
}

int run_tails(const std::string& kind, int n, double p, const std::string& spec_json,
              std::optional<std::uint64_t> rotation_seed, std::vector<long> ks, long count,
              std::uint64_t seed, std::vector<double> ts, double level, bool oracle,
              int workers) {
  const DistributionSpec spec = build_spec(kind, n, p, spec_json, rotation_seed);
  if (ts.empty())
    for (int i = 1; i <= 12; ++i) ts.push_back(0.25 * i);
  if (ks.empty()) ks.push_back(1);
  const bool exact_available = spec.kind() == lclab::dist::Kind::ExponentialProduct &&
                               !spec.has_rotation();
  if (oracle && !exact_available)
    throw std::invalid_argument("--oracle needs the plain exponential ensemble");

  const lclab::dist::SampleBatch batch = lclab::dist::sample(spec, count, seed, workers);
  std::vector<double> kth(static_cast<std::size_t>(count));
  std::vector<double> buffer;

  std::printf("distribution,n,k,t,point,ci_low,ci_high,count,seed%s\n", oracle ? ",exact" : "");
  for (long k : ks) {
    for (long i = 0; i < count; ++i) {
      buffer.assign(batch.data.row(i).begin(), batch.data.row(i).end());
      for (double& value : buffer) value = std::abs(value);
      std::nth_element(buffer.begin(), buffer.begin() + (k - 1), buffer.end(),
                       std::greater<double>());
      kth[static_cast<std::size_t>(i)] = buffer[static_cast<std::size_t>(k - 1)];
    }
    for (double t : ts) {
      const lclab::stats::TailEstimate est = lclab::stats::empirical_tail(kth, t, level);
      std::string row = lclab::stats::estimate_csv_row(spec.label(), n, static_cast<double>(k), t,
                                                       est.point, est.ci_low, est.ci_high, count,
                                                       seed);
      row.pop_back();  // newline
      if (oracle) {
        char exact[40];
        std::snprintf(exact, sizeof(exact), ",%.17g",
                      lclab::dist::binomial_tail(n, lclab::dist::exponential_tail_exact(t),
                                                 static_cast<int>(k)));
        row += exact;
      }
      std::printf("%s\n", row.c_str());
    }
  }
  return 0;
}

int run_moments(const std::string& kind, int n, double p, const std::string& spec_json,
                std::optional<std::uint64_t> rotation_seed, long count, std::uint64_t seed,
                std::vector<double> ts, std::vector<double> ps, std::vector<double> rs,
                double level, int resamples, int workers) {
  const DistributionSpec spec = build_spec(kind, n, p, spec_json, rotation_seed);
  const lclab::dist::SampleBatch batch = lclab::dist::sample(spec, count, seed, workers);
  if (ts.empty()) ts = {1.0};
  if (ps.empty()) ps = {1.0, 2.0};

  std::printf("statistic,n,p_or_r,t,point,ci_low,ci_high,count,seed\n");
  for (double t : ts)
    for (double moment_p : ps) {
      const lclab::stats::MomentEstimate est =
          lclab::stats::empirical_N_moment(batch, t, moment_p, level, resamples, seed);
      std::printf("N_moment,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%llu\n", n, moment_p, t,
                  est.point, est.ci_low, est.ci_high, count,
                  static_cast<unsigned long long>(seed));
    }
  for (double r : rs) {
    std::vector<double> norms(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i)
      norms[static_cast<std::size_t>(i)] = lclab::stats::lr_norm(
          std::span<const double>(batch.data.row(i).data(), static_cast<std::size_t>(n)), r);
    for (double moment_p : ps) {
      std::vector<double> powered(norms.size());
      for (std::size_t i = 0; i < norms.size(); ++i)
        powered[i] = std::pow(norms[i], moment_p);
      const lclab::stats::MomentEstimate est =
          lclab::stats::bootstrap_mean(powered, level, resamples, seed);
      std::printf("lr_moment,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%llu\n", n, r, moment_p,
                  std::pow(est.point, 1.0 / moment_p), std::pow(est.ci_low, 1.0 / moment_p),
                  std::pow(est.ci_high, 1.0 / moment_p), count,
                  static_cast<unsigned long long>(seed));
    }
  }
  return 0;
}

int run_combf(long max_l0, long max_s) {
  std::vector<long> levels;
  long checked = 0;
  long failures = 0;
  // Every nonincreasing positive sequence with l0 <= max_l0, s <= max_s.
  const std::function<void()> recurse = [&] {
    if (!levels.empty()) {
      const lclab::comb::LevelSequence seq(levels);
      const std::uint64_t exact = lclab::comb::combf_enumerate(seq);
      const double bound = lclab::comb::combf_bound(seq);
      ++checked;
      if (static_cast<double>(exact) > bound) {
        ++failures;
        std::printf("FAIL: sequence(");
        for (long level : levels) std::printf(" %ld", level);
        std::printf(" ) exact=%llu bound=%.6g\n", static_cast<unsigned long long>(exact), bound);
      }
    }
    if (static_cast<long>(levels.size()) > max_s) return;
    const long cap = levels.empty() ? max_l0 : levels.back();
    for (long next = 1; next <= cap; ++next) {
      levels.push_back(next);
      recurse();
      levels.pop_back();
    }
  };
  recurse();
  if (failures == 0) {
    std::printf("all cases pass (%ld sequences, l0 <= %ld, s <= %ld)\n", checked, max_l0, max_s);
    return 0;
  }
  std::printf("%ld of %ld sequences violate the bound\n", failures, checked);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo laboratory for tail and moment bounds of isotropic "
               "log-concave vectors"};
  app.require_subcommand(1);

  std::string kind = "exponential", spec_json, out, format = "csv", config_path, run_dir;
  int n = 16;
  double lp_p = 2.0, level = 0.95;
  long count = 10000, max_l0 = 5, max_s = 3;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> rotation_seed;
  std::vector<long> ks;
  std::vector<double> ts, ps, rs;
  int workers = lclab::par::default_workers();
  int resamples = 1000;

  const auto add_dist_options = [&](CLI::App* cmd, bool allow_sphere) {
    cmd->add_option("--dist", kind,
                    std::string("ensemble: exponential|gaussian|cube|lp_ball|simplex") +
                        (allow_sphere ? "|sphere" : ""));
    cmd->add_option("-n,--dim", n, "dimension");
    cmd->add_option("--p", lp_p, "lp ball exponent (with --dist lp_ball)");
    cmd->add_option("--spec-json", spec_json, "full DistributionSpec JSON file");
    cmd->add_option("--rotation-seed", rotation_seed, "apply a Haar rotation from this seed");
    cmd->add_option("--count", count, "number of samples");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--workers", workers, "worker threads");
  };

  CLI::App* sample_cmd = app.add_subcommand("sample", "emit a sample batch");
  add_dist_options(sample_cmd, true);
  sample_cmd->add_option("--out", out, "output path (default: CSV to stdout)");
  sample_cmd->add_option("--format", format, "csv or bin")
      ->check(CLI::IsMember({"csv", "bin"}));

  CLI::App* tails_cmd = app.add_subcommand("tails", "order-statistic tail table");
  add_dist_options(tails_cmd, false);
  tails_cmd->add_option("-k", ks, "order statistic indices");
  tails_cmd->add_option("--t", ts, "thresholds (default 0.25..3.0)");
  tails_cmd->add_option("--level", level, "confidence level");
  bool oracle = false;
  tails_cmd->add_flag("--oracle", oracle, "add the exact binomial column (exponential only)");

  CLI::App* moments_cmd = app.add_subcommand("moments", "exceedance and lr-norm moment table");
  add_dist_options(moments_cmd, false);
  moments_cmd->add_option("--t", ts, "thresholds for the exceedance process");
  moments_cmd->add_option("--p-grid", ps, "moment orders");
  moments_cmd->add_option("--r-grid", rs, "lr norm orders (inf not supported on the CLI)");
  moments_cmd->add_option("--level", level, "confidence level");
  moments_cmd->add_option("--resamples", resamples, "bootstrap resamples");

  CLI::App* verify_cmd = app.add_subcommand("verify", "full ledger run from a config file");
  verify_cmd->add_option("--config", config_path, "experiment config JSON")->required();
  verify_cmd->add_option("--workers", workers, "worker threads");
  std::string out_override;
  verify_cmd->add_option("--out", out_override, "override the config output_dir");

  CLI::App* combf_cmd = app.add_subcommand("combf", "exhaustive level-set counting checks");
  combf_cmd->add_option("--max-l0", max_l0, "largest top level");
  combf_cmd->add_option("--max-s", max_s, "largest chain length");

  CLI::App* report_cmd = app.add_subcommand("report", "render ledgers to plot CSVs + summary");
  report_cmd->add_option("--run", run_dir, "run directory with ledger JSON files")->required();

  try {
    app.parse(argc, argv);

    if (sample_cmd->parsed())
      return run_sample(kind, n, lp_p, spec_json, rotation_seed, count, seed, out, format,
                        workers);
    if (tails_cmd->parsed())
      return run_tails(kind, n, lp_p, spec_json, rotation_seed, ks, count, seed, ts, level,
                       oracle, workers);
    if (moments_cmd->parsed())
      return run_moments(kind, n, lp_p, spec_json, rotation_seed, count, seed, ts, ps, rs, level,
                         resamples, workers);
    if (verify_cmd->parsed()) {
      lclab::harness::ExperimentConfig config = lclab::harness::config_from_file(config_path);
      if (!out_override.empty()) config.output_dir = out_override;
      const lclab::harness::RunReport report = lclab::harness::run_experiment(config, workers);
      std::printf("wrote %zu ledgers, report %s\n", report.ledgers.size(),
                  report.report_path.c_str());
      if (!report.all_qualified) {
        std::printf("at least one family has no qualifying constant\n");
        return 1;
      }
      return 0;
    }
    if (combf_cmd->parsed()) return run_combf(max_l0, max_s);
    if (report_cmd->parsed()) {
      lclab::harness::render_report(run_dir);
      std::printf("wrote %s/summary.txt\n", run_dir.c_str());
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
