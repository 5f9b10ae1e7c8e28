#pragma once

#include <cmath>
#include <limits>
#include <span>

#include <Eigen/Dense>

#include "twister/embedding.hpp"
#include "twister/laplacian.hpp"

namespace twister {

/// Smallest nonzero Laplacian eigenvalue via a full dense symmetric
/// eigendecomposition. Desk-scale only: dimensions beyond dense_limit are an
/// error (no sparse iterative solver here), as is a graph with no positive
/// eigenvalue (no edges).
inline double lambda_min(const SparseLaplacian& lap, std::size_t dense_limit = 2000,
                         double tolerance = 1e-8) {
  if (lap.dim == 0) throw Error("lambda_min: empty Laplacian");
  if (lap.dim > dense_limit)
    throw Error("lambda_min: dimension " + std::to_string(lap.dim) + " exceeds dense limit " +
                std::to_string(dense_limit));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap.to_dense(),
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("lambda_min: eigendecomposition failed");
  const auto& values = solver.eigenvalues();  // ascending
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] > tolerance) return values[i];
  throw Error("lambda_min: no eigenvalue above tolerance (graph has no edges)");
}

/// Inputs to the smoothness risk bound.
struct RiskBoundInputs {
  double norm_bound = 1.0;   // B, bound on ||w||_2
  double lambda_min = 0.0;   // smallest nonzero Laplacian eigenvalue
  double energy = 0.0;       // Dirichlet energy of Z
  double rating_variance = 0.0;
  std::uint64_t n_edges = 0;
};

/// B^2 * E(Z) / (|edges| * lambda_min) + Var(y).
inline double risk_bound(const RiskBoundInputs& in) {
  if (in.norm_bound <= 0.0) throw Error("risk_bound: norm bound must be positive");
  if (in.lambda_min <= 0.0) throw Error("risk_bound: lambda_min must be positive");
  if (in.rating_variance < 0.0) throw Error("risk_bound: variance must be nonnegative");
  if (in.n_edges == 0) throw Error("risk_bound: need at least one edge");
  return in.norm_bound * in.norm_bound * in.energy /
             (static_cast<double>(in.n_edges) * in.lambda_min) +
         in.rating_variance;
}

/// Empirical risk of the linear predictor w on (Z, y): mean of squared-error
/// halves.
inline double empirical_risk(const EmbeddingMatrix& z, std::span<const double> y,
                             std::span<const double> w) {
  if (z.rows() != y.size()) throw Error("empirical_risk: Z rows must match y");
  if (z.dim() != w.size()) throw Error("empirical_risk: w dimension mismatch");
  if (z.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t e = 0; e < z.rows(); ++e) {
    const auto row = z.row(e);
    double pred = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) pred += row[j] * w[j];
    const double diff = pred - y[e];
    total += 0.5 * diff * diff;
  }
  return total / static_cast<double>(z.rows());
}

struct RiskCheckReport {
  double bound = 0.0;
  double max_observed = 0.0;
  double mean_observed = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;
};

/// Draw random weight vectors with ||w|| <= B and compare the empirical risk
/// on column-centered Z against the bound. Reports violations; never asserts
/// (the bound's centering hypotheses are implicit in the source analysis).
/// A graph with no positive eigenvalue yields an infinite bound.
inline RiskCheckReport empirical_risk_check(const EmbeddingMatrix& z, std::span<const double> y,
                                            double norm_bound, const SparseLaplacian& lap,
                                            std::uint64_t trials, std::uint64_t seed) {
  if (z.rows() != y.size()) throw Error("empirical_risk_check: Z rows must match y");
  const std::size_t n = z.rows();
  const std::size_t d = z.dim();

  EmbeddingMatrix centered(n, d);
  std::vector<double> mean(d, 0.0);
  for (std::size_t e = 0; e < n; ++e) {
    const auto row = z.row(e);
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  if (n > 0)
    for (double& v : mean) v /= static_cast<double>(n);
  for (std::size_t e = 0; e < n; ++e) {
    const auto row = z.row(e);
    auto out = centered.mutable_row(e);
    for (std::size_t j = 0; j < d; ++j) out[j] = row[j] - mean[j];
  }

  double energy = 0.0;
  for (std::uint32_t i = 0; i < lap.dim; ++i) {
    for (const auto& [j, w] : lap.row_offdiag(i)) {
      if (j <= i) continue;
      const auto zi = centered.row(i);
      const auto zj = centered.row(j);
      double dist2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = zi[c] - zj[c];
        dist2 += diff * diff;
      }
      energy += w * dist2;
    }
  }

  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  if (n > 0) y_mean /= static_cast<double>(n);
  double var_y = 0.0;
  for (double v : y) var_y += (v - y_mean) * (v - y_mean);
  if (n > 0) var_y /= static_cast<double>(n);

  RiskCheckReport report;
  report.trials = trials;
  try {
    const double lmin = lambda_min(lap);
    report.bound = norm_bound * norm_bound * energy / (static_cast<double>(n) * lmin) + var_y;
  } catch (const Error&) {
    report.bound = std::numeric_limits<double>::infinity();
  }

  Rng rng(derive_seed(seed, 0x415c));
  std::vector<double> w(d);
  double sum_risk = 0.0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    double norm2 = 0.0;
    for (double& v : w) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    const double radius =
        d > 0 ? norm_bound * std::pow(rng.unit(), 1.0 / static_cast<double>(d)) : 0.0;
    if (norm > 0.0)
      for (double& v : w) v *= radius / norm;
    const double risk = empirical_risk(centered, y, w);
    report.max_observed = std::max(report.max_observed, risk);
    sum_risk += risk;
    if (risk > report.bound) ++report.violations;
  }
  if (trials > 0) report.mean_observed = sum_risk / static_cast<double>(trials);
  return report;
}

}  // namespace twister
