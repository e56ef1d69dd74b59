#include "lclab/combinatorics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lclab::comb {

LevelSequence::LevelSequence(std::vector<long> values) : levels(std::move(values)) {
  if (levels.empty()) throw std::invalid_argument("LevelSequence: empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw std::invalid_argument("LevelSequence: levels must be positive");
    if (i > 0 && levels[i] > levels[i - 1])
      throw std::invalid_argument("LevelSequence: levels must be nonincreasing");
  }
}

double combf_bound(const LevelSequence& seq) {
  double log_bound = 0.0;
  for (std::size_t i = 1; i < seq.levels.size(); ++i) {
    const double ratio = std::exp(1.0) * static_cast<double>(seq.levels[i - 1]) /
                         static_cast<double>(seq.levels[i]);
    log_bound += static_cast<double>(seq.levels[i]) * std::log(ratio);
  }
  return std::exp(log_bound);
}

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const LevelSequence& seq) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    double log2_estimate = 0.0;
    for (std::size_t i = 1; i < seq.levels.size(); ++i)
      log2_estimate += static_cast<double>(seq.levels[i]) *
                       std::log2(std::exp(1.0) * static_cast<double>(seq.levels[i - 1]) /
                                 static_cast<double>(seq.levels[i]));
    throw std::invalid_argument("combf_enumerate: count exceeds 64 bits (roughly 2^" +
                                std::to_string(log2_estimate) + ")");
  }
  return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out))
    throw std::invalid_argument("combf_enumerate: count exceeds 64 bits");
  return out;
}

}  // namespace

std::uint64_t combf_enumerate(const LevelSequence& seq) {
  // A function f corresponds to the chain of level sets A_i = {r : f(r) >= i},
  // A_s <= ... <= A_1 <= {1..l0} with |A_i| <= l_i. Count chains by size:
  // N(i, a) = sum_{a'} N(i-1, a') * C(a', a).
  const long l0 = seq.l0();
  const int s = seq.s();
  if (s == 0) return 1;

  // Pascal triangle up to l0.
  std::vector<std::vector<std::uint64_t>> choose(l0 + 1, std::vector<std::uint64_t>(l0 + 1, 0));
  for (long a = 0; a <= l0; ++a) {
    choose[a][0] = 1;
    for (long b = 1; b <= a; ++b)
      choose[a][b] = checked_add(choose[a - 1][b - 1], b <= a - 1 ? choose[a - 1][b] : 0);
  }

  std::vector<std::uint64_t> counts(l0 + 1, 0);
  counts[l0] = 1;
  for (int i = 1; i <= s; ++i) {
    const long cap = std::min(seq.levels[i], l0);
    std::vector<std::uint64_t> next(l0 + 1, 0);
    for (long a_prev = 0; a_prev <= l0; ++a_prev) {
      if (counts[a_prev] == 0) continue;
      for (long a = 0; a <= std::min(cap, a_prev); ++a)
        next[a] = checked_add(next[a], checked_mul(counts[a_prev], choose[a_prev][a], seq));
    }
    counts.swap(next);
  }

  std::uint64_t total = 0;
  for (std::uint64_t value : counts) total = checked_add(total, value);
  return total;
}

double dyadic_log_sum(long n, double r) {
  if (n < 2) throw std::invalid_argument("dyadic_log_sum: need n >= 2");
  if (!(r >= 1.0)) throw std::invalid_argument("dyadic_log_sum: need r >= 1");
  const long s = static_cast<long>(std::floor(std::log2(static_cast<double>(n))));
  double sum = 0.0;
  for (long k = 0; k <= s; ++k) {
    const double log_term = 1.0 + std::log(static_cast<double>(n)) -
                            static_cast<double>(k) * std::log(2.0);  // log(e n 2^{-k})
    sum += std::ldexp(1.0, static_cast<int>(k)) * std::pow(log_term, r);
  }
  return sum;
}

double dyadic_tk_sum(double r, long s) {
  if (!(r > 2.0)) throw std::invalid_argument("dyadic_tk_sum: need r > 2");
  if (s < 0) throw std::invalid_argument("dyadic_tk_sum: need s >= 0");
  const double ratio = std::pow(2.0, (2.0 - r) / 2.0);
  double sum = 0.0, term = 1.0;
  for (long k = 0; k <= s; ++k) {
    sum += term;
    term *= ratio;
  }
  return sum;
}

}  // namespace lclab::comb
