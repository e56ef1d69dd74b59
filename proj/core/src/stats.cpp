#include "lclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>

#include "lclab/rng.hpp"

namespace lclab::stats {

std::vector<double> order_statistics(std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw std::invalid_argument("order_statistics: non-finite entry");
    out[i] = std::abs(x[i]);
  }
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

long exceedance_count(std::span<const double> x, double t) {
  long count = 0;
  for (double value : x) count += value >= t ? 1 : 0;
  return count;
}

double lr_norm(std::span<const double> x, double r) {
  if (x.empty()) return 0.0;
  double max_abs = 0.0;
  for (double value : x) max_abs = std::max(max_abs, std::abs(value));
  if (std::isinf(r)) return max_abs;
  if (!(r >= 1.0)) throw std::invalid_argument("lr_norm: need r >= 1 or r = infinity");
  if (max_abs == 0.0) return 0.0;
  double sum = 0.0;
  for (double value : x) sum += std::pow(std::abs(value) / max_abs, r);
  return max_abs * std::pow(sum, 1.0 / r);
}

TailEstimate clopper_pearson(long successes, long trials, double level) {
  if (trials < 1) throw std::invalid_argument("clopper_pearson: need at least one trial");
  if (successes < 0 || successes > trials)
    throw std::invalid_argument("clopper_pearson: successes outside [0, trials]");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("clopper_pearson: level outside (0,1)");

  const double alpha = 1.0 - level;
  TailEstimate estimate;
  estimate.level = level;
  estimate.count = trials;
  estimate.point = static_cast<double>(successes) / static_cast<double>(trials);

  using boost::math::beta_distribution;
  estimate.ci_low =
      successes == 0
          ? 0.0
          : boost::math::quantile(beta_distribution<>(successes, trials - successes + 1.0),
                                  alpha / 2.0);
  estimate.ci_high =
      successes == trials
          ? 1.0
          : boost::math::quantile(beta_distribution<>(successes + 1.0, trials - successes),
                                  1.0 - alpha / 2.0);
  return estimate;
}

TailEstimate empirical_tail(std::span<const double> values, double threshold, double level) {
  if (values.empty()) throw std::invalid_argument("empirical_tail: empty input");
  return clopper_pearson(exceedance_count(values, threshold), static_cast<long>(values.size()),
                         level);
}

MomentEstimate bootstrap_mean(std::span<const double> row_values, double level, int resamples,
                              std::uint64_t seed) {
  if (row_values.empty()) throw std::invalid_argument("bootstrap_mean: empty input");
  if (resamples < 1) throw std::invalid_argument("bootstrap_mean: need at least one resample");

  const long count = static_cast<long>(row_values.size());
  MomentEstimate estimate;
  estimate.level = level;
  estimate.count = count;
  estimate.resamples = resamples;

  double sum = 0.0;
  for (double value : row_values) sum += value;
  estimate.point = sum / static_cast<double>(count);

  std::vector<double> replicate_means(resamples);
  for (int b = 0; b < resamples; ++b) {
    rng::Xoshiro256 gen(seed, 0xB00757ULL + static_cast<std::uint64_t>(b));
    double replicate_sum = 0.0;
    for (long i = 0; i < count; ++i) {
      const auto idx = static_cast<std::size_t>(gen.next() % static_cast<std::uint64_t>(count));
      replicate_sum += row_values[idx];
    }
    replicate_means[b] = replicate_sum / static_cast<double>(count);
  }
  std::sort(replicate_means.begin(), replicate_means.end());

  const double alpha = 1.0 - level;
  const auto percentile = [&](double q) {
    const auto rank = static_cast<long>(std::ceil(q * resamples)) - 1;
    return replicate_means[static_cast<std::size_t>(std::clamp<long>(rank, 0, resamples - 1))];
  };
  estimate.ci_low = percentile(alpha / 2.0);
  estimate.ci_high = percentile(1.0 - alpha / 2.0);
  return estimate;
}

MomentEstimate empirical_N_moment(const dist::SampleBatch& batch, double t, double p, double level,
                                  int resamples, std::uint64_t bootstrap_seed) {
  if (!(p >= 1.0)) throw std::invalid_argument("empirical_N_moment: need p >= 1");
  if (batch.count() < 1) throw std::invalid_argument("empirical_N_moment: empty batch");

  std::vector<double> row_values(static_cast<std::size_t>(batch.count()));
  const double t2 = t * t;
  for (long i = 0; i < batch.count(); ++i) {
    const long n_exceed = exceedance_count(
        std::span<const double>(batch.data.row(i).data(), static_cast<std::size_t>(batch.n())), t);
    row_values[static_cast<std::size_t>(i)] =
        n_exceed == 0 ? 0.0 : std::pow(t2 * static_cast<double>(n_exceed), p);
  }
  return bootstrap_mean(row_values, level, resamples,
                        bootstrap_seed == 0 ? batch.seed : bootstrap_seed);
}

PaleyZygmundCheck paley_zygmund_check(std::span<const double> values, double theta) {
  if (values.empty()) throw std::invalid_argument("paley_zygmund_check: empty input");
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("paley_zygmund_check: theta outside (0,1)");

  double sum = 0.0, sum_sq = 0.0;
  for (double value : values) {
    if (value < 0.0) throw std::invalid_argument("paley_zygmund_check: negative value");
    sum += value;
    sum_sq += value * value;
  }
  if (sum == 0.0) throw std::invalid_argument("paley_zygmund_check: all values are zero");

  const double count = static_cast<double>(values.size());
  const double mean = sum / count;
  const double second_moment = sum_sq / count;

  PaleyZygmundCheck check;
  long exceed = 0;
  for (double value : values) exceed += value >= theta * mean ? 1 : 0;
  check.lhs = static_cast<double>(exceed) / count;
  check.rhs = (1.0 - theta) * (1.0 - theta) * mean * mean / second_moment;
  check.holds = check.lhs >= check.rhs;
  return check;
}

ConditionalTailSum conditional_tail_sum(
    const dist::SampleBatch& batch,
    const std::function<bool(std::span<const double>)>& membership, double t, double level,
    int resamples, std::uint64_t bootstrap_seed) {
  const long count = batch.count();
  if (count < 1) throw std::invalid_argument("conditional_tail_sum: empty batch");

  std::vector<double> row_values(static_cast<std::size_t>(count), 0.0);
  long in_set = 0;
  for (long i = 0; i < count; ++i) {
    const std::span<const double> row(batch.data.row(i).data(),
                                      static_cast<std::size_t>(batch.n()));
    if (membership(row)) {
      ++in_set;
      row_values[static_cast<std::size_t>(i)] = static_cast<double>(exceedance_count(row, t));
    }
  }

  ConditionalTailSum result;
  result.conditioning_probability = clopper_pearson(in_set, count, level);
  result.sufficient_mass = in_set > 0;
  if (result.sufficient_mass)
    result.sum = bootstrap_mean(row_values, level, resamples,
                                bootstrap_seed == 0 ? batch.seed : bootstrap_seed);
  return result;
}

double empirical_median_orderstat(int n, int k, const dist::DistributionSpec& spec, long count,
                                  std::uint64_t seed, int workers) {
  if (k < 1 || k > n) throw std::invalid_argument("empirical_median_orderstat: need 1 <= k <= n");
  if (spec.n() != n) throw std::invalid_argument("empirical_median_orderstat: spec dimension");

  const dist::SampleBatch batch = dist::sample(spec, count, seed, workers);
  std::vector<double> kth(static_cast<std::size_t>(count));
  std::vector<double> buffer;
  for (long i = 0; i < count; ++i) {
    buffer.assign(batch.data.row(i).begin(), batch.data.row(i).end());
    for (double& value : buffer) value = std::abs(value);
    std::nth_element(buffer.begin(), buffer.begin() + (k - 1), buffer.end(),
                     std::greater<double>());
    kth[static_cast<std::size_t>(i)] = buffer[static_cast<std::size_t>(k - 1)];
  }
  std::sort(kth.begin(), kth.end());
  const std::size_t half = kth.size() / 2;
  return kth.size() % 2 == 1 ? kth[half] : 0.5 * (kth[half - 1] + kth[half]);
}

std::string estimate_csv_row(const std::string& distribution, int n, double k_or_p_or_r, double t,
                             double point, double ci_low, double ci_high, long count,
                             std::uint64_t seed) {
  char line[320];
  std::snprintf(line, sizeof(line), "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%llu\n",
                distribution.c_str(), n, k_or_p_or_r, t, point, ci_low, ci_high, count,
                static_cast<unsigned long long>(seed));
  return line;
}

}  // namespace lclab::stats
