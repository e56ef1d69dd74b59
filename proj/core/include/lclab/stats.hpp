#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lclab/distributions.hpp"

namespace lclab::stats {

// Empirical probability with an exact two-sided Clopper-Pearson interval.
struct TailEstimate {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double level = 0.95;
  long count = 0;
};

// Point estimate plus a percentile-bootstrap interval.
struct MomentEstimate {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  long count = 0;
  int resamples = 0;
};

// Absolute values sorted nonincreasing: x1* >= x2* >= ... >= xn*.
std::vector<double> order_statistics(std::span<const double> x);

// #{i : x_i >= t}; one-sided over signed coordinates, ties count.
long exceedance_count(std::span<const double> x, double t);

// lr norm for r >= 1 (r = infinity returns max |x_i|), overflow-safe.
double lr_norm(std::span<const double> x, double r);

// Exact Clopper-Pearson interval from Beta quantiles.
TailEstimate clopper_pearson(long successes, long trials, double level);

// Fraction of values >= threshold, with Clopper-Pearson interval.
TailEstimate empirical_tail(std::span<const double> values, double threshold, double level = 0.95);

// Percentile bootstrap over the mean of per-row values.
MomentEstimate bootstrap_mean(std::span<const double> row_values, double level, int resamples,
                              std::uint64_t seed);

// Mean of (t^2 N_x(t))^p over rows, percentile-bootstrap CI.
MomentEstimate empirical_N_moment(const dist::SampleBatch& batch, double t, double p,
                                  double level = 0.95, int resamples = 1000,
                                  std::uint64_t bootstrap_seed = 0);

struct PaleyZygmundCheck {
  double lhs = 0.0;  // empirical P(Z >= theta * mean)
  double rhs = 0.0;  // (1-theta)^2 mean^2 / second_moment
  bool holds = false;
};

// Both sides of P(Z >= theta E Z) >= (1-theta)^2 (E Z)^2 / E Z^2 evaluated on
// the empirical distribution; values must be nonnegative and not all zero.
PaleyZygmundCheck paley_zygmund_check(std::span<const double> values, double theta);

struct ConditionalTailSum {
  TailEstimate conditioning_probability;  // P(A)
  bool sufficient_mass = false;           // at least one sample in A
  MomentEstimate sum;                     // mean over rows of 1_A * N_x(t)
};

// Estimates sum_i P(A and {x_i >= t}) and P(A) for A = {x in K}, where K is
// a membership predicate evaluated per sample row.
ConditionalTailSum conditional_tail_sum(
    const dist::SampleBatch& batch,
    const std::function<bool(std::span<const double>)>& membership, double t,
    double level = 0.95, int resamples = 1000, std::uint64_t bootstrap_seed = 0);

// Sample median of X_k* over `count` fresh draws from the given ensemble.
double empirical_median_orderstat(int n, int k, const dist::DistributionSpec& spec, long count,
                                  std::uint64_t seed, int workers = 1);

// CSV row for tail/moment tables:
// distribution,n,k_or_p_or_r,t,point,ci_low,ci_high,count,seed
std::string estimate_csv_row(const std::string& distribution, int n, double k_or_p_or_r, double t,
                             double point, double ci_low, double ci_high, long count,
                             std::uint64_t seed);

}  // namespace lclab::stats
