#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace metaspike::stats {

struct MeanSe {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    out.se = out.sd / std::sqrt(static_cast<double>(xs.size()));
  }
  return out;
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median: empty sample");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
  double hi = xs[mid];
  if (xs.size() % 2 == 1) return hi;
  std::nth_element(xs.begin(), xs.begin() + mid - 1, xs.begin() + mid);
  return 0.5 * (hi + xs[mid - 1]);
}

// Exact Kolmogorov-Smirnov statistic of a sample against Exp(1/mean):
// for sorted values t(1) <= ... <= t(n),
//   D = max_i max(|i/n - F(t(i))|, |(i-1)/n - F(t(i))|).
inline double ks_vs_exponential(std::vector<double> samples,
                                double mean = 1.0) {
  if (samples.empty())
    throw std::invalid_argument("ks_vs_exponential: empty sample");
  if (!(mean > 0.0))
    throw std::invalid_argument("ks_vs_exponential: mean must be positive");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 1.0 - std::exp(-samples[i] / mean);
    const double hi = std::fabs((static_cast<double>(i) + 1.0) / n - cdf);
    const double lo = std::fabs(static_cast<double>(i) / n - cdf);
    d = std::max(d, std::max(hi, lo));
  }
  return d;
}

struct WilsonCi {
  double phat = 0.0;
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval for a binomial proportion (default 95%).
inline WilsonCi wilson(std::size_t k, std::size_t n, double z = 1.959964) {
  if (n == 0) throw std::invalid_argument("wilson: n must be positive");
  WilsonCi ci;
  const double nn = static_cast<double>(n);
  ci.phat = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (ci.phat + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(ci.phat * (1.0 - ci.phat) / nn + z2 / (4.0 * nn * nn)) /
      denom;
  ci.lo = std::max(0.0, center - half);
  ci.hi = std::min(1.0, center + half);
  return ci;
}

}  // namespace metaspike::stats
