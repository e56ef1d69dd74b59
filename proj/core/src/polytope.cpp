#include <cmath>
#include <limits>
#include <stdexcept>

#include "lclab/distributions.hpp"
#include "lclab/rng.hpp"

namespace lclab::dist {

namespace {

constexpr double kDegenerateChord = 1e-12;

// Chord of {Ax <= b} through x along unit direction d, from the facet
// ratios: x + s d feasible iff s (A d)_i <= (b - A x)_i for every facet.
struct Chord {
  double lo;
  double hi;
};

Chord chord_through(const Polytope& body, const Eigen::VectorXd& d, const Eigen::VectorXd& slack) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd along = body.normals * d;
  for (int i = 0; i < along.size(); ++i) {
    const double a = along[i];
    if (a > 0.0)
      hi = std::min(hi, slack[i] / a);
    else if (a < 0.0)
      lo = std::max(lo, slack[i] / a);
  }
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw std::runtime_error("hit-and-run: unbounded chord (polytope is not bounded)");
  return {lo, hi};
}

}  // namespace

Eigen::VectorXd interior_point(const Polytope& body) {
  const int n = body.dimension();
  if (body.interior.has_value()) {
    if (!body.strictly_inside(*body.interior))
      throw std::invalid_argument("provided interior point is not strictly feasible");
    return *body.interior;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (body.strictly_inside(x)) return x;

  // Subgradient descent on the maximum violation max_i (a_i.x - b_i)/|a_i|.
  Eigen::VectorXd row_norms(body.facet_count());
  for (int i = 0; i < body.facet_count(); ++i)
    row_norms[i] = std::max(body.normals.row(i).norm(), 1e-300);
  double step = 1.0;
  for (int iter = 0; iter < 5000; ++iter) {
    const Eigen::VectorXd violation =
        ((body.normals * x - body.offsets).array() / row_norms.array()).matrix();
    int worst = 0;
    violation.maxCoeff(&worst);
    if (violation[worst] < 0.0 && body.strictly_inside(x)) return x;
    x -= step * body.normals.row(worst).transpose() / row_norms[worst];
    step *= 0.999;
  }
  throw std::invalid_argument("could not find a strictly interior point");
}

SampleBatch hit_and_run_chain(const Polytope& body, const Eigen::VectorXd& start, long steps,
                              const HitAndRunOptions& options,
                              HitAndRunDiagnostics* diagnostics) {
  const int n = body.dimension();
  if (steps < 1) throw std::invalid_argument("hit_and_run_chain: steps must be >= 1");
  if (start.size() != n) throw std::invalid_argument("hit_and_run_chain: start dimension mismatch");
  if (!body.strictly_inside(start))
    throw std::invalid_argument("hit_and_run_chain: start point is not strictly feasible");

  const long burn_in = options.burn_in >= 0 ? options.burn_in : 50L * n * n;
  const long thinning = options.thinning >= 1 ? options.thinning : n;

  HitAndRunDiagnostics local_diag;
  rng::Xoshiro256 gen(options.seed, 0x686172ULL);

  Eigen::VectorXd x = start;
  Eigen::VectorXd slack = body.offsets - body.normals * x;
  Eigen::VectorXd direction(n);

  SampleBatch batch;
  batch.spec = DistributionSpec::polytope(body);
  batch.seed = options.seed;
  batch.data.resize(steps, n);

  const auto transition = [&] {
    for (;;) {
      double norm2 = 0.0;
      do {
        norm2 = 0.0;
        for (int j = 0; j < n; ++j) {
          direction[j] = gen.normal();
          norm2 += direction[j] * direction[j];
        }
      } while (norm2 == 0.0);
      direction /= std::sqrt(norm2);

      const Chord chord = chord_through(body, direction, slack);
      if (chord.hi - chord.lo < kDegenerateChord) {
        ++local_diag.degenerate_chords;
        continue;
      }
      const double s = gen.uniform(chord.lo, chord.hi);
      const Eigen::VectorXd candidate = x + s * direction;
      if (!body.strictly_inside(candidate)) {
        // Roundoff put the point on or past a facet; redraw the chord point.
        ++local_diag.boundary_redraws;
        continue;
      }
      x = candidate;
      slack = body.offsets - body.normals * x;
      return;
    }
  };

  for (long i = 0; i < burn_in; ++i) transition();
  for (long kept = 0; kept < steps; ++kept) {
    for (long i = 0; i < thinning; ++i) transition();
    batch.data.row(kept) = x.transpose();
  }

  if (diagnostics) *diagnostics = local_diag;
  return batch;
}

}  // namespace lclab::dist
