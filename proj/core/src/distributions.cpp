#include "lclab/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "lclab/isotropy.hpp"
#include "lclab/parallel.hpp"
#include "lclab/rng.hpp"

namespace lclab::dist {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr long kSampleChunk = 4096;
constexpr long kRowsPerChain = 12500;

double orthogonality_defect(const Eigen::MatrixXd& q) {
  const Eigen::MatrixXd gram = q.transpose() * q;
  return (gram - Eigen::MatrixXd::Identity(q.rows(), q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::ExponentialProduct: return "exponential";
    case Kind::GaussianProduct: return "gaussian";
    case Kind::CubeUniform: return "cube";
    case Kind::LpBallUniform: return "lp_ball";
    case Kind::SimplexUniform: return "simplex";
    case Kind::PolytopeUniform: return "polytope";
  }
  throw std::logic_error("unknown Kind");
}

Kind kind_from_name(const std::string& name) {
  if (name == "exponential") return Kind::ExponentialProduct;
  if (name == "gaussian") return Kind::GaussianProduct;
  if (name == "cube") return Kind::CubeUniform;
  if (name == "lp_ball") return Kind::LpBallUniform;
  if (name == "simplex") return Kind::SimplexUniform;
  if (name == "polytope") return Kind::PolytopeUniform;
  throw std::invalid_argument("unknown distribution kind: " + name);
}

bool Polytope::strictly_inside(const Eigen::VectorXd& x, double margin) const {
  return ((offsets - normals * x).array() > margin).all();
}

DistributionSpec::DistributionSpec(Kind kind, int n) {
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  if (kind == Kind::LpBallUniform)
    throw std::invalid_argument("use DistributionSpec::lp_ball to set the exponent");
  if (kind == Kind::PolytopeUniform)
    throw std::invalid_argument("use DistributionSpec::polytope to supply the body");
  kind_ = kind;
  n_ = n;
}

DistributionSpec DistributionSpec::lp_ball(int n, double p) {
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  if (!(p >= 1.0)) throw std::invalid_argument("lp ball exponent must satisfy p >= 1");
  DistributionSpec spec;
  spec.kind_ = Kind::LpBallUniform;
  spec.n_ = n;
  spec.lp_p_ = p;
  return spec;
}

DistributionSpec DistributionSpec::polytope(Polytope body) {
  const int n = body.dimension();
  if (n < 1 || body.facet_count() < n + 1)
    throw std::invalid_argument("polytope needs dimension >= 1 and at least n+1 facets");
  if (body.offsets.size() != body.facet_count())
    throw std::invalid_argument("polytope normals/offsets size mismatch");

  DistributionSpec spec;
  spec.kind_ = Kind::PolytopeUniform;
  spec.n_ = n;
  spec.polytope_ = std::move(body);

  // Interior point (exact strictness check) and a boundedness probe: an
  // unbounded chord from the interior along any probed direction throws.
  const Eigen::VectorXd start = interior_point(spec.polytope_);
  spec.polytope_.interior = start;

  const auto probe = [&spec](const Eigen::VectorXd& direction) {
    const Eigen::VectorXd along = spec.polytope_.normals * direction;
    bool bounded_fwd = false, bounded_bwd = false;
    for (int i = 0; i < along.size(); ++i) {
      if (along[i] > 0) bounded_fwd = true;
      if (along[i] < 0) bounded_bwd = true;
    }
    if (!bounded_fwd || !bounded_bwd)
      throw std::invalid_argument("polytope is unbounded along a probed direction");
  };
  for (int j = 0; j < n; ++j) probe(Eigen::VectorXd::Unit(n, j));
  rng::Xoshiro256 gen(0x706f6c79746f7065ULL, static_cast<std::uint64_t>(n));
  for (int trial = 0; trial < 64; ++trial) {
    Eigen::VectorXd d(n);
    for (int j = 0; j < n; ++j) d[j] = gen.normal();
    if (d.norm() == 0.0) continue;
    probe(d / d.norm());
  }
  return spec;
}

DistributionSpec DistributionSpec::rotated(const Eigen::MatrixXd& rotation) const {
  if (kind_ == Kind::PolytopeUniform)
    throw std::invalid_argument("rotate the polytope's H-representation instead");
  if (rotation.rows() != n_ || rotation.cols() != n_)
    throw std::invalid_argument("rotation dimension mismatch");
  if (orthogonality_defect(rotation) > 1e-10)
    throw std::invalid_argument("rotation matrix is not orthogonal within 1e-10");
  DistributionSpec spec = *this;
  spec.rotation_ = rotation;
  spec.rotation_seed_.reset();
  return spec;
}

DistributionSpec DistributionSpec::rotated(std::uint64_t rotation_seed) const {
  DistributionSpec spec = rotated(haar_rotation(n_, rotation_seed));
  spec.rotation_seed_ = rotation_seed;
  return spec;
}

std::string DistributionSpec::label() const {
  std::string out = kind_name(kind_) + "_n" + std::to_string(n_);
  if (kind_ == Kind::LpBallUniform) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_p%g", lp_p_);
    out += buf;
  }
  if (rotation_.has_value()) out += "_rot";
  return out;
}

Eigen::MatrixXd haar_rotation(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  rng::Xoshiro256 gen(seed, 0x726f74ULL);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = gen.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

namespace {

void fill_row(const DistributionSpec& spec, rng::Xoshiro256& gen, double scale,
              Eigen::Ref<Eigen::RowVectorXd> row) {
  const int n = spec.n();
  switch (spec.kind()) {
    case Kind::ExponentialProduct:
      for (int j = 0; j < n; ++j) row[j] = gen.symmetric_exponential();
      break;
    case Kind::GaussianProduct:
      for (int j = 0; j < n; ++j) row[j] = gen.normal();
      break;
    case Kind::CubeUniform: {
      const double half = std::sqrt(3.0);
      for (int j = 0; j < n; ++j) row[j] = gen.uniform(-half, half);
      break;
    }
    case Kind::LpBallUniform: {
      // Exact rejection-free construction: g_j with density ~ exp(-|s|^p)
      // plus one Exp(1) variate; divide by the lp norm of the extended
      // vector. |g_j|^p equals the underlying Gamma(1/p) draw.
      const double p = spec.lp_p();
      double sum_p = 0.0;
      for (int j = 0; j < n; ++j) {
        const double w = gen.gamma(1.0 / p);
        const double magnitude = std::pow(w, 1.0 / p);
        row[j] = (gen.next() & 1ULL) ? magnitude : -magnitude;
        sum_p += w;
      }
      const double z = gen.exponential();
      const double denom = std::pow(sum_p + z, 1.0 / p);
      for (int j = 0; j < n; ++j) row[j] = scale * row[j] / denom;
      break;
    }
    case Kind::SimplexUniform: {
      // Dirichlet(1,...,1) coordinates of the solid simplex, then the exact
      // closed-form whitening map from Sigma = c((n+1)I - J).
      double total = 0.0;
      for (int j = 0; j < n; ++j) {
        row[j] = gen.exponential();
        total += row[j];
      }
      total += gen.exponential();
      const double mu = 1.0 / (n + 1.0);
      double center_sum = 0.0;
      for (int j = 0; j < n; ++j) {
        row[j] = row[j] / total - mu;
        center_sum += row[j];
      }
      const double on_ones = center_sum / n;
      const double c_inv_sqrt = (n + 1.0) * std::sqrt(n + 2.0);
      const double perp_scale = 1.0 / std::sqrt(n + 1.0);
      for (int j = 0; j < n; ++j)
        row[j] = c_inv_sqrt * (on_ones + perp_scale * (row[j] - on_ones));
      break;
    }
    case Kind::PolytopeUniform:
      throw std::logic_error("fill_row does not handle PolytopeUniform");
  }
}

SampleBatch sample_polytope(const DistributionSpec& spec, long count, std::uint64_t seed,
                            int workers) {
  SampleBatch batch;
  batch.spec = spec;
  batch.seed = seed;
  batch.data.resize(count, spec.n());

  const Polytope& body = spec.polytope_body();
  const Eigen::VectorXd start =
      body.interior.has_value() ? *body.interior : interior_point(body);

  const long n_chains = (count + kRowsPerChain - 1) / kRowsPerChain;
  par::parallel_for_each(n_chains, workers, [&](std::int64_t chain) {
    const long begin = chain * kRowsPerChain;
    const long end = std::min(begin + kRowsPerChain, count);
    std::uint64_t state = seed;
    (void)rng::splitmix64(state);
    HitAndRunOptions options;
    options.seed = state ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(chain + 1));
    const SampleBatch piece = hit_and_run_chain(body, start, end - begin, options);
    batch.data.middleRows(begin, end - begin) = piece.data;
  });
  return batch;
}

}  // namespace

void sample_rows(const DistributionSpec& spec, std::uint64_t seed, long row_begin, long row_end,
                 RowMatrix& out, long out_row0) {
  if (spec.kind() == Kind::PolytopeUniform)
    throw std::invalid_argument("PolytopeUniform is chain-sampled; use sample()");
  if (row_begin < out_row0 || row_end - out_row0 > out.rows() || out.cols() != spec.n())
    throw std::invalid_argument("sample_rows: row range or width mismatch");

  const double scale = spec.kind() == Kind::LpBallUniform
                           ? isotropy::lp_ball_isotropic_scale(spec.lp_p(), spec.n())
                           : 1.0;
  for (long i = row_begin; i < row_end; ++i) {
    rng::Xoshiro256 gen(seed, static_cast<std::uint64_t>(i));
    const long row = i - out_row0;
    fill_row(spec, gen, scale, out.row(row));
    if (spec.has_rotation()) {
      const Eigen::VectorXd rotated = spec.rotation() * out.row(row).transpose();
      out.row(row) = rotated.transpose();
    }
  }
}

SampleBatch sample(const DistributionSpec& spec, long count, std::uint64_t seed, int workers) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  if (spec.kind() == Kind::PolytopeUniform) return sample_polytope(spec, count, seed, workers);

  SampleBatch batch;
  batch.spec = spec;
  batch.seed = seed;
  batch.data.resize(count, spec.n());
  par::parallel_for_chunks(count, kSampleChunk, workers,
                           [&](std::int64_t begin, std::int64_t end, std::int64_t) {
                             sample_rows(spec, seed, begin, end, batch.data);
                           });
  return batch;
}

SampleBatch sample_sphere(int n, long count, std::uint64_t seed, int workers) {
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");

  SampleBatch batch;
  batch.spec = DistributionSpec(Kind::GaussianProduct, n);
  batch.seed = seed;
  batch.data.resize(count, n);
  par::parallel_for_chunks(count, kSampleChunk, workers,
                           [&](std::int64_t begin, std::int64_t end, std::int64_t) {
                             for (std::int64_t i = begin; i < end; ++i) {
                               rng::Xoshiro256 gen(seed, static_cast<std::uint64_t>(i));
                               double norm2 = 0.0;
                               do {
                                 norm2 = 0.0;
                                 for (int j = 0; j < n; ++j) {
                                   batch.data(i, j) = gen.normal();
                                   norm2 += batch.data(i, j) * batch.data(i, j);
                                 }
                               } while (norm2 == 0.0);
                               batch.data.row(i) /= std::sqrt(norm2);
                             }
                           });
  return batch;
}

double exponential_tail_exact(double t) {
  if (t < 0) throw std::invalid_argument("tail threshold must be nonnegative");
  return std::exp(-kSqrt2 * t);
}

double exponential_upper_tail_exact(double t) {
  if (t >= 0) return 0.5 * std::exp(-kSqrt2 * t);
  return 1.0 - 0.5 * std::exp(kSqrt2 * t);
}

double binomial_tail(int n, double q, int k) {
  if (n < 1) throw std::invalid_argument("binomial_tail: n must be positive");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("binomial_tail: q outside [0,1]");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (q == 0.0) return 0.0;
  if (q == 1.0) return 1.0;

  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const auto log_term = [&](int j) {
    double value = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
    if (j > 0) value += j * log_q;
    if (j < n) value += (n - j) * log_1mq;
    return value;
  };
  // Sum the side that excludes the mode, then complement if needed.
  const bool direct = k > q * (n + 1);  // mode < k: right tail is the small side
  const int lo = direct ? k : 0;
  const int hi = direct ? n : k - 1;
  double max_log = -std::numeric_limits<double>::infinity();
  for (int j = lo; j <= hi; ++j) max_log = std::max(max_log, log_term(j));
  if (max_log == -std::numeric_limits<double>::infinity()) return direct ? 0.0 : 1.0;
  double sum = 0.0;
  for (int j = lo; j <= hi; ++j) sum += std::exp(log_term(j) - max_log);
  const double tail_side = std::exp(max_log) * sum;
  return direct ? tail_side : 1.0 - tail_side;
}

double binomial_moment(int n, double q, int p) {
  if (n < 1) throw std::invalid_argument("binomial_moment: n must be positive");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("binomial_moment: q outside [0,1]");
  if (p < 1) throw std::invalid_argument("binomial_moment: p must be a positive integer");
  if (p > 170) throw std::invalid_argument("binomial_moment: p too large");

  // E K^p = sum_j S(p,j) n^(j) q^j; Stirling numbers of the second kind via
  // the standard recurrence. Every term is nonnegative: no cancellation.
  std::vector<std::vector<long double>> stirling(p + 1, std::vector<long double>(p + 1, 0.0L));
  stirling[0][0] = 1.0L;
  for (int i = 1; i <= p; ++i)
    for (int j = 1; j <= i; ++j)
      stirling[i][j] = stirling[i - 1][j - 1] + static_cast<long double>(j) * stirling[i - 1][j];

  long double sum = 0.0L;
  long double falling = 1.0L;
  long double q_power = 1.0L;
  for (int j = 1; j <= p; ++j) {
    falling *= static_cast<long double>(n - (j - 1));
    if (falling <= 0.0L) break;  // j > n: remaining falling factorials vanish
    q_power *= static_cast<long double>(q);
    sum += stirling[p][j] * falling * q_power;
  }
  return static_cast<double>(sum);
}

double orderstat_median_exact(int n, int k) {
  if (k < 1 || k > n) throw std::invalid_argument("orderstat_median_exact: need 1 <= k <= n");
  // P(X_k* >= t) = P(Bin(n, exp(-sqrt2 t)) >= k) is continuous and strictly
  // decreasing in t; bisect for the 1/2 crossing.
  double lo = 0.0, hi = 64.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double tail = binomial_tail(n, std::exp(-kSqrt2 * mid), k);
    (tail >= 0.5 ? lo : hi) = mid;
    if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

// --- serialization ---

namespace {

nlohmann::ordered_json spec_to_json_object(const DistributionSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(spec.kind());
  j["n"] = spec.n();
  if (spec.kind() == Kind::LpBallUniform) j["p"] = spec.lp_p();
  if (spec.kind() == Kind::PolytopeUniform) {
    nlohmann::ordered_json halfspaces = nlohmann::ordered_json::array();
    const Polytope& body = spec.polytope_body();
    for (int i = 0; i < body.facet_count(); ++i) {
      nlohmann::ordered_json h;
      h["normal"] = std::vector<double>(body.normals.row(i).begin(), body.normals.row(i).end());
      h["offset"] = body.offsets[i];
      halfspaces.push_back(h);
    }
    j["halfspaces"] = halfspaces;
    if (body.interior.has_value())
      j["interior"] = std::vector<double>(body.interior->begin(), body.interior->end());
  }
  if (spec.rotation_seed().has_value()) {
    j["rotation_seed"] = *spec.rotation_seed();
  } else if (spec.has_rotation()) {
    throw std::invalid_argument(
        "only seed-derived rotations serialize; construct with rotated(seed)");
  }
  return j;
}

DistributionSpec spec_from_json_object(const nlohmann::json& j) {
  const Kind kind = kind_from_name(j.at("kind").get<std::string>());
  const int n = j.at("n").get<int>();

  DistributionSpec spec = [&] {
    switch (kind) {
      case Kind::LpBallUniform:
        return DistributionSpec::lp_ball(n, j.at("p").get<double>());
      case Kind::PolytopeUniform: {
        const auto& halfspaces = j.at("halfspaces");
        if (!halfspaces.is_array() || halfspaces.empty())
          throw std::invalid_argument("polytope spec needs a nonempty halfspaces array");
        Polytope body;
        body.normals.resize(static_cast<int>(halfspaces.size()), n);
        body.offsets.resize(static_cast<int>(halfspaces.size()));
        int i = 0;
        for (const auto& h : halfspaces) {
          const auto normal = h.at("normal").get<std::vector<double>>();
          if (static_cast<int>(normal.size()) != n)
            throw std::invalid_argument("halfspace normal has wrong dimension");
          for (int c = 0; c < n; ++c) body.normals(i, c) = normal[c];
          body.offsets(i) = h.at("offset").get<double>();
          ++i;
        }
        if (j.contains("interior")) {
          const auto point = j.at("interior").get<std::vector<double>>();
          if (static_cast<int>(point.size()) != n)
            throw std::invalid_argument("interior point has wrong dimension");
          body.interior = Eigen::Map<const Eigen::VectorXd>(point.data(), n);
        }
        return DistributionSpec::polytope(std::move(body));
      }
      default:
        return DistributionSpec(kind, n);
    }
  }();

  if (j.contains("rotation_seed")) spec = spec.rotated(j.at("rotation_seed").get<std::uint64_t>());
  return spec;
}

}  // namespace

std::string spec_to_json(const DistributionSpec& spec) {
  return spec_to_json_object(spec).dump();
}

DistributionSpec spec_from_json(const std::string& json_text) {
  return spec_from_json_object(nlohmann::json::parse(json_text));
}

void write_batch_csv(const SampleBatch& batch, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  std::fprintf(f, "# spec=%s seed=%llu count=%ld\n", spec_to_json(batch.spec).c_str(),
               static_cast<unsigned long long>(batch.seed), batch.count());
  for (long i = 0; i < batch.count(); ++i) {
    for (int j = 0; j < batch.n(); ++j)
      std::fprintf(f, "%.17g%c", batch.data(i, j), j + 1 == batch.n() ? '\n' : ',');
  }
  std::fclose(f);
}

void write_batch_binary(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const char magic[4] = {'L', 'C', 'M', 'B'};
  const std::uint32_t version = 1;
  const std::uint64_t rows = static_cast<std::uint64_t>(batch.count());
  const std::uint64_t cols = static_cast<std::uint64_t>(batch.n());
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(batch.data.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

RowMatrix read_batch_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || std::string(magic, 4) != "LCMB" || version != 1)
    throw std::runtime_error("not a batch file: " + path);
  RowMatrix data(static_cast<long>(rows), static_cast<long>(cols));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in) throw std::runtime_error("truncated batch file: " + path);
  return data;
}

}  // namespace lclab::dist
