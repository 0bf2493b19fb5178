#include "spectrahack/shrink_sim.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <random>

#include "spectrahack/error.hpp"
#include "spectrahack/kernels.hpp"
#include "spectrahack/parallel.hpp"
#include "spectrahack/spectra.hpp"
#include "spectrahack/stats.hpp"

namespace spectrahack::shrink {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Eigen::MatrixXd random_rotation(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed ^ 0x524f544154494f4eull));
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign fix makes Q Haar-distributed.
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

double frobenius_sq(const Eigen::MatrixXd& m) { return m.squaredNorm(); }

struct TrialOutput {
  Eigen::MatrixXd lw;
  Eigen::MatrixXd pcs;
};

void validate(const PopulationSpec& pop, std::span<const std::size_t> sizes, std::size_t trials) {
  if (pop.dim < 1) throw Error(ErrorCode::InvalidSpec, "dim must be positive");
  if (!(pop.floor_eigenvalue > 0.0) || !(pop.top_eigenvalue >= pop.floor_eigenvalue)) {
    throw Error(ErrorCode::InvalidSpec, "require top >= floor > 0");
  }
  if (trials < 100) throw Error(ErrorCode::InvalidSpec, "trials must be at least 100");
  if (sizes.empty()) throw Error(ErrorCode::InvalidSpec, "no sample sizes given");
  for (std::size_t s : sizes) {
    if (s == 0 || 4 * s < pop.dim) {
      throw Error(ErrorCode::InvalidSpec,
                  "sample size " + std::to_string(s) + " below dim/4 = " +
                      std::to_string(pop.dim / 4.0));
    }
  }
}

}  // namespace

std::string to_string(Estimator e) { return e == Estimator::LW ? "LW" : "PCS"; }

std::vector<MseTrialResult> simulate_mse(const PopulationSpec& pop,
                                         std::span<const std::size_t> sample_sizes,
                                         std::size_t trials, std::uint64_t seed,
                                         const SimOptions& options) {
  validate(pop, sample_sizes, trials);
  const std::size_t d = pop.dim;
  const auto di = static_cast<Eigen::Index>(d);
  const Eigen::MatrixXd rot = random_rotation(d, seed);
  Eigen::VectorXd pop_eig = Eigen::VectorXd::Constant(di, pop.floor_eigenvalue);
  pop_eig(0) = pop.top_eigenvalue;
  const Eigen::MatrixXd truth = rot * pop_eig.asDiagonal() * rot.transpose();
  // Sampling map: x = mix * g with g ~ N(0, I), so cov(x) = truth.
  const Eigen::MatrixXd mix = rot * pop_eig.cwiseSqrt().asDiagonal();
  const RowMatrix mix_t = mix.transpose();

  std::vector<MseTrialResult> results;
  for (std::size_t n : sample_sizes) {
    const double nd = static_cast<double>(n);
    const double b_lw = std::min(1.0, options.lw_rate_constant / nd);
    const double b_pcs = std::min(1.0, options.pcs_rate_constant / std::sqrt(nd));
    std::vector<TrialOutput> outputs(trials);

    parallel_for(trials, options.threads, [&](std::size_t t) {
      std::mt19937_64 rng(splitmix64(seed + t) ^ splitmix64(n));
      std::normal_distribution<double> gauss;
      RowMatrix g(n, d);
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = gauss(rng);
      const RowMatrix x = g * mix_t;
      RowMatrix gram = RowMatrix::Zero(di, di);
      kernels::active().gram_upper(x.data(), n, d, gram.data());
      Eigen::MatrixXd s(di, di);
      for (Eigen::Index i = 0; i < di; ++i)
        for (Eigen::Index j = i; j < di; ++j) s(i, j) = s(j, i) = gram(i, j) / nd;

      const double mu = s.trace() / static_cast<double>(d);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
      if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::EigenFailure, "eigensolver failed in trial " + std::to_string(t), t);
      }
      const double lambda1 = solver.eigenvalues().maxCoeff();
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(di, di);
      outputs[t].lw = (1.0 - b_lw) * s + (b_lw * mu) * eye;
      outputs[t].pcs = (1.0 - b_pcs) * s + (b_pcs * lambda1) * eye;
    });

    for (Estimator est : {Estimator::LW, Estimator::PCS}) {
      MseTrialResult r;
      r.estimator = est;
      r.sample_size = n;
      r.trials = trials;
      r.intensity = est == Estimator::LW ? b_lw : b_pcs;
      r.small_sample = n < d;
      Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(di, di);
      r.trial_errors.reserve(trials);
      double err_sum = 0.0;
      for (const auto& o : outputs) {
        const Eigen::MatrixXd& e = est == Estimator::LW ? o.lw : o.pcs;
        mean += e;
        const double err = frobenius_sq(e - truth);
        r.trial_errors.push_back(err);
        err_sum += err;
      }
      const double td = static_cast<double>(trials);
      mean /= td;
      r.mean_frobenius_mse = err_sum / td;
      r.bias_sq = frobenius_sq(mean - truth);
      double var_sum = 0.0;
      for (const auto& o : outputs) {
        const Eigen::MatrixXd& e = est == Estimator::LW ? o.lw : o.pcs;
        var_sum += frobenius_sq(e - mean);
      }
      r.variance = var_sum / td;
      results.push_back(std::move(r));
    }
  }
  return results;
}

std::vector<ScalingRow> mse_scaling_report(std::span<const MseTrialResult> results) {
  std::vector<ScalingRow> rows;
  for (Estimator est : {Estimator::LW, Estimator::PCS}) {
    std::vector<double> x, y;
    for (const auto& r : results) {
      if (r.estimator != est) continue;
      if (!(r.mean_frobenius_mse > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "log-log fit needs positive MSE values");
      }
      x.push_back(std::log(static_cast<double>(r.sample_size)));
      y.push_back(std::log(r.mean_frobenius_mse));
    }
    if (x.empty()) continue;
    if (x.size() < 3) {
      throw Error(ErrorCode::InsufficientPoints,
                  "scaling fit needs at least 3 sample sizes for " + to_string(est));
    }
    const auto fit = stats::ols(x, y);
    rows.push_back({est, x.size(), fit.slope, fit.intercept, fit.r_squared});
  }
  if (rows.empty()) throw Error(ErrorCode::InsufficientPoints, "no results to fit");
  return rows;
}

std::vector<PairedComparison> compare_pcs_lw(std::span<const MseTrialResult> results) {
  std::map<std::size_t, std::pair<const MseTrialResult*, const MseTrialResult*>> by_size;
  for (const auto& r : results) {
    auto& slot = by_size[r.sample_size];
    (r.estimator == Estimator::LW ? slot.first : slot.second) = &r;
  }
  std::vector<PairedComparison> out;
  for (const auto& [size, pair] : by_size) {
    if (pair.first == nullptr || pair.second == nullptr) continue;
    const auto& lw = pair.first->trial_errors;
    const auto& pcs = pair.second->trial_errors;
    if (lw.size() != pcs.size()) {
      throw Error(ErrorCode::LengthMismatch, "paired trial counts differ");
    }
    std::size_t wins = 0;
    for (std::size_t t = 0; t < lw.size(); ++t) wins += pcs[t] < lw[t] ? 1 : 0;
    out.push_back({size, wins, lw.size(), stats::sign_test_upper_p(wins, lw.size())});
  }
  return out;
}

}  // namespace spectrahack::shrink
