#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lclab::dist {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Convex body {x : A x <= b}, one row of A per facet.
struct Polytope {
  Eigen::MatrixXd normals;  // m x n
  Eigen::VectorXd offsets;  // m
  std::optional<Eigen::VectorXd> interior;  // strictly feasible point, if known

  int dimension() const { return static_cast<int>(normals.cols()); }
  int facet_count() const { return static_cast<int>(normals.rows()); }
  bool strictly_inside(const Eigen::VectorXd& x, double margin = 0.0) const;
};

enum class Kind {
  ExponentialProduct,  // iid symmetric exponential, density (1/sqrt2) exp(-sqrt2 |x|)
  GaussianProduct,     // iid N(0,1)
  CubeUniform,         // uniform on [-sqrt3, sqrt3]^n
  LpBallUniform,       // uniform on the lp ball, rescaled to unit coordinate variance
  SimplexUniform,      // uniform on the solid simplex conv{0,e_1,...,e_n}, whitened exactly
  PolytopeUniform,     // uniform on an H-polytope via hit-and-run; not isotropic
};

std::string kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

// Declarative description of a sampling ensemble. All built-in kinds except
// PolytopeUniform produce coordinates with mean 0 and variance 1. An optional
// rotation Q (orthogonal within 1e-10, validated) is applied to every draw.
class DistributionSpec {
 public:
  DistributionSpec(Kind kind, int n);
  static DistributionSpec lp_ball(int n, double p);
  static DistributionSpec polytope(Polytope body);

  DistributionSpec rotated(const Eigen::MatrixXd& rotation) const;
  DistributionSpec rotated(std::uint64_t rotation_seed) const;

  Kind kind() const { return kind_; }
  int n() const { return n_; }
  double lp_p() const { return lp_p_; }
  const Polytope& polytope_body() const { return polytope_; }
  bool has_rotation() const { return rotation_.has_value(); }
  const Eigen::MatrixXd& rotation() const { return *rotation_; }
  std::optional<std::uint64_t> rotation_seed() const { return rotation_seed_; }

  bool isotropic_by_construction() const { return kind_ != Kind::PolytopeUniform; }
  std::string label() const;

 private:
  DistributionSpec() = default;

  Kind kind_ = Kind::GaussianProduct;
  int n_ = 1;
  double lp_p_ = 2.0;
  Polytope polytope_;
  std::optional<Eigen::MatrixXd> rotation_;
  std::optional<std::uint64_t> rotation_seed_;
};

struct SampleBatch {
  RowMatrix data;  // count x n, one sample per row
  DistributionSpec spec;
  std::uint64_t seed = 0;

  long count() const { return static_cast<long>(data.rows()); }
  int n() const { return static_cast<int>(data.cols()); }
};

struct HitAndRunOptions {
  long burn_in = -1;    // default 50*n^2
  long thinning = -1;   // default n
  std::uint64_t seed = 0;
};

struct HitAndRunDiagnostics {
  long degenerate_chords = 0;
  long boundary_redraws = 0;
};

// iid draws, reproducible bit-for-bit: row i uses the generator stream
// (seed, i) regardless of threading. `workers` only affects wall time.
SampleBatch sample(const DistributionSpec& spec, long count, std::uint64_t seed, int workers = 1);

// Fills logical rows [row_begin, row_end) exactly as sample() would, writing
// them into `out` starting at row (row_begin - out_row0). Building block for
// streaming pipelines that process fixed chunks without materializing the
// whole batch.
void sample_rows(const DistributionSpec& spec, std::uint64_t seed, long row_begin, long row_end,
                 RowMatrix& out, long out_row0 = 0);

// Uniform draws on the unit sphere S^{n-1} (each row has |x| = 1).
SampleBatch sample_sphere(int n, long count, std::uint64_t seed, int workers = 1);

// Hit-and-run chain over an H-polytope. Returns `steps` retained points,
// taken after `burn_in` transitions and keeping every `thinning`-th state.
// Chord endpoints come exactly from the facet ratios; encountering an
// unbounded chord throws.
SampleBatch hit_and_run_chain(const Polytope& body, const Eigen::VectorXd& start, long steps,
                              const HitAndRunOptions& options = {},
                              HitAndRunDiagnostics* diagnostics = nullptr);

// Finds a strictly interior point: the provided one, else the origin, else
// subgradient descent on the maximum facet violation. Throws on failure.
Eigen::VectorXd interior_point(const Polytope& body);

// Haar-distributed orthogonal matrix from a seed (QR of a Gaussian matrix
// with the sign correction).
Eigen::MatrixXd haar_rotation(int n, std::uint64_t seed);

// --- exact oracles for the iid symmetric exponential with variance 1 ---

// P(|X_1| >= t) = exp(-sqrt2 t) for t >= 0.
double exponential_tail_exact(double t);

// One-sided P(X_1 >= t) for any real t; equals exp(-sqrt2 t)/2 for t >= 0.
double exponential_upper_tail_exact(double t);

// P(Bin(n, q) >= k), log-space summation, stable for n up to 1e4.
// k <= 0 returns 1; k > n returns 0.
double binomial_tail(int n, double q, int k);

// E[Bin(n, q)^p] via the Stirling-number expansion of factorial moments;
// all terms are nonnegative so the sum is exact to long-double precision.
double binomial_moment(int n, double q, int p);

// Median of the k-th order statistic X_k* for the exponential product in
// dimension n, obtained by inverting the binomial tail oracle.
double orderstat_median_exact(int n, int k);

// --- serialization ---

// JSON object {"kind", "n", "p"?, "halfspaces"?, "interior"?, "rotation_seed"?}.
std::string spec_to_json(const DistributionSpec& spec);
DistributionSpec spec_from_json(const std::string& json_text);

void write_batch_csv(const SampleBatch& batch, const std::string& path);
void write_batch_binary(const SampleBatch& batch, const std::string& path);
RowMatrix read_batch_binary(const std::string& path);

}  // namespace lclab::dist
