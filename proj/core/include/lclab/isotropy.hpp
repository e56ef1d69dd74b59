#pragma once

#include <Eigen/Dense>
#include <string>

#include "lclab/distributions.hpp"

namespace lclab::isotropy {

struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased, symmetrized
  long count = 0;
};

// Sample mean and unbiased covariance. Requires count >= 2.
MomentSummary estimate_moments(const dist::SampleBatch& batch);

// x -> Sigma^{-1/2} (x - mu) using the symmetric inverse square root, so the
// transform commutes with orthogonal symmetries of the sample. Throws if the
// smallest covariance eigenvalue is <= 1e-10, naming the deficient directions.
dist::SampleBatch whiten(const dist::SampleBatch& batch, const MomentSummary& summary);

struct Diagnostics {
  double max_abs_mean = 0.0;
  double max_cov_deviation = 0.0;  // max |Cov_ij - delta_ij|
  MomentSummary summary;
  Eigen::VectorXd mean_se;         // per-coordinate standard error of the mean
  Eigen::MatrixXd cov_se;          // per-entry standard error of the covariance
  long count = 0;
};

Diagnostics isotropy_diagnostics(const dist::SampleBatch& batch);

// Scale s such that s * (uniform on the unit B_p^n) has unit coordinate
// variance, from the closed-form Gamma expression for the second moment.
// Accepts p = infinity (the cube), returning sqrt(3).
double lp_ball_isotropic_scale(double p, int n);

std::string summary_to_json(const MomentSummary& summary);

// One CSV row per statistic: statistic,index_i,index_j,value,standard_error.
std::string diagnostics_to_csv(const Diagnostics& diagnostics);

}  // namespace lclab::isotropy
