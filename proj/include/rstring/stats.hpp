#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rstring/rng.hpp"

namespace rstring::stats {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw StatsError("mean: empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

inline double variance(const std::vector<double>& v) {
  if (v.size() < 2) throw StatsError("variance: need at least two points");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

inline double std_error(const std::vector<double>& v) {
  return std::sqrt(variance(v) / v.size());
}

// mean / (sd / sqrt(n)) of paired differences
inline double paired_z(const std::vector<double>& diffs) {
  return mean(diffs) / std_error(diffs);
}

// (sum w)^2 / sum w^2 from log weights, stable under a common shift
inline double effective_sample_size(const std::vector<double>& log_weights) {
  if (log_weights.empty()) throw StatsError("ess: empty weights");
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  double s1 = 0.0, s2 = 0.0;
  for (double lw : log_weights) {
    const double w = std::exp(lw - mx);
    s1 += w;
    s2 += w * w;
  }
  return s1 * s1 / s2;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

// tail of the Kolmogorov distribution: Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}
inline double ks_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

// lambda with Q(lambda) = alpha, by bisection
inline double ks_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw StatsError("ks_critical: alpha in (0,1)");
  double lo = 0.05, hi = 5.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (ks_tail(mid) > alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct KsResult {
  double statistic;  // sup |F_x - F_y|
  double scaled;     // statistic * sqrt(nm / (n+m))
  double p_value;    // asymptotic
};

inline KsResult ks_two_sample(std::vector<double> x, std::vector<double> y) {
  if (x.empty() || y.empty()) throw StatsError("ks: empty sample");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    d = std::max(d, std::abs(i / nx - j / ny));
  }
  const double scaled = d * std::sqrt(nx * ny / (nx + ny));
  return {d, scaled, ks_tail(scaled)};
}

// ---------------------------------------------------------------------------
// 1-Wasserstein distance between weighted one-dimensional samples

inline double wasserstein1(const std::vector<double>& x, const std::vector<double>& wx,
                           const std::vector<double>& y, const std::vector<double>& wy) {
  if (x.size() != wx.size() || y.size() != wy.size())
    throw StatsError("wasserstein1: value/weight length mismatch");
  if (x.empty() || y.empty()) throw StatsError("wasserstein1: empty sample");

  auto sorted_index = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return idx;
  };
  const auto ix = sorted_index(x);
  const auto iy = sorted_index(y);
  const double tx = std::accumulate(wx.begin(), wx.end(), 0.0);
  const double ty = std::accumulate(wy.begin(), wy.end(), 0.0);
  if (!(tx > 0.0) || !(ty > 0.0)) throw StatsError("wasserstein1: weights must have positive mass");

  // integrate |F_x - F_y| over the merged support
  double dist = 0.0, fx = 0.0, fy = 0.0;
  double prev = std::min(x[ix[0]], y[iy[0]]);
  std::size_t i = 0, j = 0;
  while (i < ix.size() || j < iy.size()) {
    double t;
    if (j >= iy.size() || (i < ix.size() && x[ix[i]] <= y[iy[j]]))
      t = x[ix[i]];
    else
      t = y[iy[j]];
    dist += std::abs(fx - fy) * (t - prev);
    prev = t;
    while (i < ix.size() && x[ix[i]] <= t) fx += wx[ix[i++]] / tx;
    while (j < iy.size() && y[iy[j]] <= t) fy += wy[iy[j++]] / ty;
  }
  return dist;
}

inline double wasserstein1(const std::vector<double>& x, const std::vector<double>& y) {
  return wasserstein1(x, std::vector<double>(x.size(), 1.0), y,
                      std::vector<double>(y.size(), 1.0));
}

// ---------------------------------------------------------------------------
// Energy distance with a permutation p-value

struct EnergyResult {
  double statistic;
  double p_value;
};

// rows of x and y are samples in R^d; the pooled pairwise distance matrix is
// computed once and reused across permutations
inline EnergyResult energy_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                int n_permutations, SeedStream& rng) {
  const int n = static_cast<int>(x.rows());
  const int m = static_cast<int>(y.rows());
  if (n < 2 || m < 2) throw StatsError("energy_test: need at least two samples per side");
  if (x.cols() != y.cols()) throw StatsError("energy_test: dimension mismatch");
  const int total = n + m;
  Eigen::MatrixXd pooled(total, x.cols());
  pooled.topRows(n) = x;
  pooled.bottomRows(m) = y;
  Eigen::MatrixXd dist(total, total);
  for (int i = 0; i < total; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < total; ++j) {
      const double dd = (pooled.row(i) - pooled.row(j)).norm();
      dist(i, j) = dd;
      dist(j, i) = dd;
    }
  }

  auto statistic_for = [&](const std::vector<int>& label) {
    double a = 0.0, b = 0.0, c = 0.0;
    long na = 0, nb = 0, nc = 0;
    for (int i = 0; i < total; ++i)
      for (int j = i + 1; j < total; ++j) {
        if (label[i] != label[j]) {
          a += dist(i, j);
          ++na;
        } else if (label[i] == 0) {
          b += dist(i, j);
          ++nb;
        } else {
          c += dist(i, j);
          ++nc;
        }
      }
    return 2.0 * a / na - b / nb - c / nc;
  };

  std::vector<int> label(total, 0);
  std::fill(label.begin() + n, label.end(), 1);
  const double observed = statistic_for(label);

  int exceed = 0;
  std::vector<int> perm = label;
  for (int p = 0; p < n_permutations; ++p) {
    for (int i = total - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_uniform() * (i + 1));
      std::swap(perm[i], perm[j]);
    }
    if (statistic_for(perm) >= observed) ++exceed;
  }
  const double p_value = (1.0 + exceed) / (1.0 + n_permutations);
  return {observed, p_value};
}

// ---------------------------------------------------------------------------
// least squares lines

struct FitResult {
  double slope;
  double intercept;
  double slope_se;
};

inline FitResult weighted_least_squares(const std::vector<double>& xs,
                                        const std::vector<double>& ys,
                                        const std::vector<double>& ws) {
  const std::size_t n = xs.size();
  if (n < 3 || ys.size() != n || ws.size() != n)
    throw StatsError("least squares: need at least three matched points");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ws[i] > 0.0)) throw StatsError("least squares: weights must be positive");
    sw += ws[i];
    sx += ws[i] * xs[i];
    sy += ws[i] * ys[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
    sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw StatsError("least squares: degenerate abscissae");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - intercept - slope * xs[i];
    rss += ws[i] * r * r;
  }
  const double se = std::sqrt(rss / (static_cast<double>(n) - 2.0) / sxx);
  return {slope, intercept, se};
}

inline FitResult least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  return weighted_least_squares(xs, ys, std::vector<double>(xs.size(), 1.0));
}

}  // namespace rstring::stats
