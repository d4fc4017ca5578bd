#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace rootseg {

// Average ranks (1-based), ties share the mean of their positions.
inline std::vector<double> mean_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (i + j) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

inline void check_paired(const std::vector<double>& x, const std::vector<double>& y, const char* who) {
  if (x.size() != y.size()) throw std::invalid_argument(std::string(who) + ": length mismatch");
  if (x.size() < 3) throw std::invalid_argument(std::string(who) + ": need at least 3 points");
}

// Undefined (nullopt) when either input has zero rank variance.
inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  check_paired(x, y, "spearman");
  return pearson(mean_ranks(x), mean_ranks(y));
}

// Coefficient of determination of the least-squares line of y on x.
// Undefined when y is constant.
inline std::optional<double> r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  check_paired(x, y, "r_squared");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("r_squared: x is constant");
  if (syy == 0) return std::nullopt;
  const double slope = sxy / sxx, icept = my - slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (icept + slope * x[i]);
    ss_res += e * e;
  }
  return 1.0 - ss_res / syy;
}

struct MeanStd {
  std::optional<double> mean, stdev;
  std::size_t count = 0;
};

// Population mean/stdev over the defined entries.
inline MeanStd mean_std(const std::vector<std::optional<double>>& v) {
  MeanStd m;
  double s = 0;
  for (const auto& x : v)
    if (x) {
      s += *x;
      ++m.count;
    }
  if (m.count == 0) return m;
  m.mean = s / m.count;
  double ss = 0;
  for (const auto& x : v)
    if (x) ss += (*x - *m.mean) * (*x - *m.mean);
  m.stdev = std::sqrt(ss / m.count);
  return m;
}

}  // namespace rootseg
