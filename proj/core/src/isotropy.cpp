#include "lclab/isotropy.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lclab::isotropy {

namespace {
constexpr double kEigenvalueFloor = 1e-10;
}

MomentSummary estimate_moments(const dist::SampleBatch& batch) {
  const long count = batch.count();
  if (count < 2) throw std::invalid_argument("estimate_moments: need at least 2 samples");

  MomentSummary summary;
  summary.count = count;
  summary.mean = batch.data.colwise().mean().transpose();

  const Eigen::MatrixXd centered =
      batch.data.rowwise() - summary.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(count - 1);
  summary.covariance = 0.5 * (cov + cov.transpose());
  return summary;
}

dist::SampleBatch whiten(const dist::SampleBatch& batch, const MomentSummary& summary) {
  const int n = batch.n();
  if (summary.mean.size() != n || summary.covariance.rows() != n)
    throw std::invalid_argument("whiten: summary dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(summary.covariance);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("whiten: eigendecomposition failed");

  const Eigen::VectorXd& eigenvalues = solver.eigenvalues();
  std::vector<int> deficient;
  for (int i = 0; i < n; ++i)
    if (eigenvalues[i] <= kEigenvalueFloor) deficient.push_back(i);
  if (!deficient.empty()) {
    std::ostringstream message;
    message << "whiten: covariance is singular (eigenvalue floor " << kEigenvalueFloor
            << "); deficient directions:";
    for (int idx : deficient) {
      int lead = 0;
      solver.eigenvectors().col(idx).cwiseAbs().maxCoeff(&lead);
      message << " {eigenvalue " << eigenvalues[idx] << ", principal coordinate " << lead << "}";
    }
    throw std::invalid_argument(message.str());
  }

  const Eigen::MatrixXd inv_sqrt = solver.eigenvectors() *
                                   eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() *
                                   solver.eigenvectors().transpose();

  dist::SampleBatch out = batch;
  out.data = (batch.data.rowwise() - summary.mean.transpose()) * inv_sqrt;
  return out;
}

Diagnostics isotropy_diagnostics(const dist::SampleBatch& batch) {
  const long count = batch.count();
  if (count < 2) throw std::invalid_argument("isotropy_diagnostics: need at least 2 samples");
  const int n = batch.n();
  const MomentSummary summary = estimate_moments(batch);

  Diagnostics diag;
  diag.count = count;
  diag.summary = summary;
  diag.max_abs_mean = summary.mean.cwiseAbs().maxCoeff();
  diag.max_cov_deviation =
      (summary.covariance - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();

  diag.mean_se.resize(n);
  for (int i = 0; i < n; ++i)
    diag.mean_se[i] = std::sqrt(std::max(summary.covariance(i, i), 0.0) / count);

  // SE of covariance entries from empirical fourth moments:
  // Var(C_ij) ~ (E[(x_i-m_i)^2 (x_j-m_j)^2] - C_ij^2) / count.
  const Eigen::MatrixXd centered = batch.data.rowwise() - summary.mean.transpose();
  const Eigen::MatrixXd squared = centered.cwiseProduct(centered);
  const Eigen::MatrixXd fourth = squared.transpose() * squared / static_cast<double>(count);
  diag.cov_se.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double variance = fourth(i, j) - summary.covariance(i, j) * summary.covariance(i, j);
      diag.cov_se(i, j) = std::sqrt(std::max(variance, 0.0) / count);
    }
  return diag;
}

double lp_ball_isotropic_scale(double p, int n) {
  if (n < 1) throw std::invalid_argument("lp_ball_isotropic_scale: dimension must be positive");
  if (std::isinf(p)) return std::sqrt(3.0);
  if (!(p >= 1.0)) throw std::invalid_argument("lp_ball_isotropic_scale: need p >= 1");
  // E x_1^2 over the unit ball = Gamma(3/p) Gamma(n/p+1) / (Gamma(1/p) Gamma((n+2)/p+1)).
  const double log_second_moment = std::lgamma(3.0 / p) + std::lgamma(n / p + 1.0) -
                                   std::lgamma(1.0 / p) - std::lgamma((n + 2.0) / p + 1.0);
  return std::exp(-0.5 * log_second_moment);
}

std::string summary_to_json(const MomentSummary& summary) {
  nlohmann::ordered_json j;
  j["count"] = summary.count;
  j["mean"] = std::vector<double>(summary.mean.begin(), summary.mean.end());
  auto cov = nlohmann::ordered_json::array();
  for (int i = 0; i < summary.covariance.rows(); ++i)
    cov.push_back(std::vector<double>(summary.covariance.row(i).begin(),
                                      summary.covariance.row(i).end()));
  j["covariance"] = cov;
  return j.dump();
}

std::string diagnostics_to_csv(const Diagnostics& diag) {
  std::string out = "statistic,i,j,value,standard_error\n";
  char line[160];
  std::snprintf(line, sizeof(line), "max_abs_mean,,,%.17g,\n", diag.max_abs_mean);
  out += line;
  std::snprintf(line, sizeof(line), "max_cov_deviation,,,%.17g,\n", diag.max_cov_deviation);
  out += line;
  for (int i = 0; i < diag.mean_se.size(); ++i) {
    std::snprintf(line, sizeof(line), "mean,%d,,%.17g,%.17g\n", i, diag.summary.mean[i],
                  diag.mean_se[i]);
    out += line;
  }
  for (int i = 0; i < diag.cov_se.rows(); ++i)
    for (int j = 0; j < diag.cov_se.cols(); ++j) {
      const double delta = i == j ? 1.0 : 0.0;
      std::snprintf(line, sizeof(line), "cov_delta,%d,%d,%.17g,%.17g\n", i, j,
                    diag.summary.covariance(i, j) - delta, diag.cov_se(i, j));
      out += line;
    }
  return out;
}

}  // namespace lclab::isotropy
