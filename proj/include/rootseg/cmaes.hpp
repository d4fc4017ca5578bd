#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rootseg/rng.hpp"

namespace rootseg {

struct CmaConfig {
  int dimension = 1;
  std::vector<double> initial_mean;
  double initial_sigma = 0.3;
  int population_size = 0;  // 0: 4 + floor(3 ln n)
  long long max_evaluations = 1000;
  double target_fitness = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;
  std::optional<std::vector<std::pair<double, double>>> bounds;

  int lambda() const {
    return population_size > 0 ? population_size
                               : 4 + static_cast<int>(std::floor(3.0 * std::log(dimension)));
  }

  void validate() const {
    if (dimension < 1) throw std::invalid_argument("CmaConfig: dimension must be >= 1");
    if (static_cast<int>(initial_mean.size()) != dimension)
      throw std::invalid_argument("CmaConfig: initial_mean has wrong length");
    if (!(initial_sigma > 0)) throw std::invalid_argument("CmaConfig: initial_sigma must be > 0");
    if (lambda() < 2) throw std::invalid_argument("CmaConfig: population_size must be >= 2");
    if (max_evaluations < 0) throw std::invalid_argument("CmaConfig: negative evaluation budget");
    if (bounds) {
      if (static_cast<int>(bounds->size()) != dimension)
        throw std::invalid_argument("CmaConfig: bounds have wrong length");
      for (auto [lo, hi] : *bounds)
        if (!(lo < hi)) throw std::invalid_argument("CmaConfig: bound lo must be < hi");
    }
  }
};

struct CmaGeneration {
  double best_fitness;  // best seen so far
  double mean_fitness;  // mean over finite values of this generation
  double sigma;         // step size used to sample this generation
};

struct CmaResult {
  std::vector<double> best_point;
  double best_fitness = std::numeric_limits<double>::infinity();
  long long evaluations_used = 0;
  long long nonfinite_evaluations = 0;
  std::vector<CmaGeneration> history;
};

using Objective = std::function<double(const std::vector<double>&)>;

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and rank-one +
// rank-mu covariance updates. Bounded coordinates are clipped before evaluation
// and the clipped point is what enters the update.
inline CmaResult cmaes_minimize(const Objective& objective, const CmaConfig& cfg) {
  cfg.validate();
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = cfg.dimension;
  const int lambda = cfg.lambda();
  const int mu = lambda / 2;

  VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();

  const double cs = (mueff + 2) / (n + mueff + 5);
  const double ds = 1 + 2 * std::max(0.0, std::sqrt((mueff - 1) / (n + 1)) - 1) + cs;
  const double cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n);
  const double c1 = 2 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu = std::min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
  const double chi_n = std::sqrt(static_cast<double>(n)) * (1 - 1.0 / (4 * n) + 1.0 / (21.0 * n * n));

  VectorXd mean = Eigen::Map<const VectorXd>(cfg.initial_mean.data(), n);
  double sigma = cfg.initial_sigma;
  VectorXd ps = VectorXd::Zero(n), pc = VectorXd::Zero(n);
  MatrixXd C = MatrixXd::Identity(n, n), B = MatrixXd::Identity(n, n), invsqrtC = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n);

  Rng rng(cfg.seed);
  CmaResult res;
  res.best_point = cfg.initial_mean;

  auto clip = [&](VectorXd& x) {
    if (!cfg.bounds) return;
    for (int i = 0; i < n; ++i) x[i] = std::clamp(x[i], (*cfg.bounds)[i].first, (*cfg.bounds)[i].second);
  };

  std::vector<VectorXd> xs(lambda);
  std::vector<double> fit(lambda);
  std::vector<int> order(lambda);
  for (long long gen = 0; res.evaluations_used < cfg.max_evaluations; ++gen) {
    const int count = static_cast<int>(std::min<long long>(lambda, cfg.max_evaluations - res.evaluations_used));
    double fsum = 0;
    int fcount = 0;
    for (int k = 0; k < count; ++k) {
      VectorXd z(n);
      for (int i = 0; i < n; ++i) z[i] = rng.normal();
      xs[k] = mean + sigma * (B * D.cwiseProduct(z));
      clip(xs[k]);
      const std::vector<double> point(xs[k].data(), xs[k].data() + n);
      double f = objective(point);
      ++res.evaluations_used;
      if (!std::isfinite(f)) {
        ++res.nonfinite_evaluations;
        std::clog << "cmaes: non-finite objective value at generation " << gen << ", candidate " << k
                  << "; ranked last\n";
        f = std::numeric_limits<double>::infinity();
      } else {
        fsum += f;
        ++fcount;
        if (f < res.best_fitness) {
          res.best_fitness = f;
          res.best_point = point;
        }
      }
      fit[k] = f;
    }
    res.history.push_back({res.best_fitness,
                           fcount ? fsum / fcount : std::numeric_limits<double>::quiet_NaN(), sigma});
    if (count < lambda || res.best_fitness <= cfg.target_fitness) break;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fit[a] < fit[b]; });

    const VectorXd old_mean = mean;
    mean = VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) mean += w[i] * xs[order[i]];
    const VectorXd yw = (mean - old_mean) / sigma;

    ps = (1 - cs) * ps + std::sqrt(cs * (2 - cs) * mueff) * (invsqrtC * yw);
    const double ps_norm = ps.norm();
    const bool hsig = ps_norm / std::sqrt(1 - std::pow(1 - cs, 2.0 * (gen + 1))) < (1.4 + 2.0 / (n + 1)) * chi_n;
    pc = (1 - cc) * pc + (hsig ? std::sqrt(cc * (2 - cc) * mueff) : 0.0) * yw;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const VectorXd y = (xs[order[i]] - old_mean) / sigma;
      rank_mu += w[i] * y * y.transpose();
    }
    C = (1 - c1 - cmu) * C + c1 * (pc * pc.transpose() + (hsig ? 0.0 : cc * (2 - cc)) * C) + cmu * rank_mu;
    sigma *= std::exp((cs / ds) * (ps_norm / chi_n - 1));

    C = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
    if (eig.info() != Eigen::Success || !std::isfinite(sigma)) break;
    D = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
    B = eig.eigenvectors();
    invsqrtC = B * D.cwiseInverse().asDiagonal() * B.transpose();

    // Numerical floor: no further progress is representable.
    if (sigma * D.maxCoeff() < 1e-15 * (1.0 + mean.cwiseAbs().maxCoeff())) break;
    if (D.maxCoeff() > 1e7 * D.minCoeff()) break;
  }
  return res;
}

}  // namespace rootseg
