#pragma once

#include <cstdint>
#include <vector>

namespace lclab::comb {

// Nonincreasing sequence of positive integers l0 >= l1 >= ... >= ls.
struct LevelSequence {
  std::vector<long> levels;

  explicit LevelSequence(std::vector<long> values);
  long l0() const { return levels.front(); }
  int s() const { return static_cast<int>(levels.size()) - 1; }
};

// prod_{i=1..s} (e l_{i-1} / l_i)^{l_i}; 1 for the empty product (s = 0).
double combf_bound(const LevelSequence& seq);

// Exact cardinality of {f: {1..l0} -> {0..s} : #{r : f(r) >= i} <= l_i for
// all i}, counted through the nested level-set chains A_s <= ... <= A_1.
// Throws if the count would overflow 64 bits (with a size estimate).
std::uint64_t combf_enumerate(const LevelSequence& seq);

// sum_{k=0}^{floor(log2 n)} 2^k log^r(e n 2^{-k}), n >= 2.
double dyadic_log_sum(long n, double r);

// sum_{k=0}^{s} 2^{k(2-r)/2} for r > 2; bounded by (1 - 2^{(2-r)/2})^{-1}.
double dyadic_tk_sum(double r, long s);

}  // namespace lclab::comb
