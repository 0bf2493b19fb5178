#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spectrahack::shrink {

// Spike model: population covariance R diag(top, floor, ..., floor) R^T with
// a seeded random rotation R.
struct PopulationSpec {
  std::size_t dim = 32;
  double top_eigenvalue = 100.0;
  double floor_eigenvalue = 0.01;

  double sparsity_ratio() const { return top_eigenvalue / floor_eigenvalue; }
};

enum class Estimator { LW, PCS };
std::string to_string(Estimator e);

struct SimOptions {
  // Intensities are constant / |V| for LW and constant / sqrt(|V|) for PCS.
  double lw_rate_constant = 1.0;
  double pcs_rate_constant = 1.0;
  unsigned threads = 1;
};

struct MseTrialResult {
  Estimator estimator = Estimator::LW;
  std::size_t sample_size = 0;
  std::size_t trials = 0;
  double intensity = 0.0;
  double mean_frobenius_mse = 0.0;
  double bias_sq = 0.0;   // ||mean estimate - truth||_F^2
  double variance = 0.0;  // mean ||estimate - mean estimate||_F^2
  bool small_sample = false;  // sample_size < dim
  std::vector<double> trial_errors;  // per-trial ||estimate - truth||_F^2
};

// For each sample size, LW then PCS. Trials draw from generators derived from
// seed + trial index; results do not depend on options.threads.
std::vector<MseTrialResult> simulate_mse(const PopulationSpec& pop,
                                         std::span<const std::size_t> sample_sizes,
                                         std::size_t trials, std::uint64_t seed,
                                         const SimOptions& options = {});

struct ScalingRow {
  Estimator estimator;
  std::size_t points;
  double slope;      // d log MSE / d log |V|
  double intercept;
  double r_squared;
};

// Log-log OLS of MSE on sample size, one row per estimator present.
std::vector<ScalingRow> mse_scaling_report(std::span<const MseTrialResult> results);

struct PairedComparison {
  std::size_t sample_size;
  std::size_t pcs_wins;  // trials with PCS error < LW error
  std::size_t trials;
  double sign_test_p;    // one-sided, H1: PCS wins more often than not
};

std::vector<PairedComparison> compare_pcs_lw(std::span<const MseTrialResult> results);

}  // namespace spectrahack::shrink
