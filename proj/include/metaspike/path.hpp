#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace metaspike {

// Sampled scalar path on an increasing time grid, evaluated between nodes by
// linear interpolation and extended by its end values.
struct PathSample {
  std::vector<double> t;
  std::vector<double> x;

  std::size_t size() const { return t.size(); }

  double operator()(double s) const {
    if (t.empty()) throw std::invalid_argument("PathSample: empty path");
    if (s <= t.front()) return x.front();
    if (s >= t.back()) return x.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t j = static_cast<std::size_t>(it - t.begin());
    const double w = (s - t[j - 1]) / (t[j] - t[j - 1]);
    return x[j - 1] + w * (x[j] - x[j - 1]);
  }

  // Largest grid step; tolerance choices downstream are grid-aware.
  double grid_step() const {
    double step = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i)
      step = std::max(step, t[i] - t[i - 1]);
    return step;
  }

  // Central differences in the interior, one-sided at the ends.
  std::vector<double> derivative() const {
    const std::size_t n = t.size();
    if (n < 3)
      throw std::invalid_argument("PathSample: need >= 3 nodes for derivative");
    std::vector<double> d(n);
    d[0] = (x[1] - x[0]) / (t[1] - t[0]);
    d[n - 1] = (x[n - 1] - x[n - 2]) / (t[n - 1] - t[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
      d[i] = (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1]);
    return d;
  }

  static PathSample constant(double value, double horizon) {
    return PathSample{{0.0, horizon}, {value, value}};
  }
};

// Exact step of u' = -alpha u + h z(t) over [t0, t1] for a piecewise-linear
// path z; integrates segment by segment.
inline double flow_affine(double u, double t0, double t1, double alpha,
                          double h, const PathSample& z) {
  if (t1 <= t0) return u;
  double t = t0;
  std::size_t j = 0;
  while (j + 1 < z.t.size() && z.t[j + 1] <= t) ++j;
  while (t < t1) {
    double seg_end = t1;
    double c, m;
    if (j + 1 < z.t.size()) {
      seg_end = std::min(t1, z.t[j + 1]);
      m = (z.x[j + 1] - z.x[j]) / (z.t[j + 1] - z.t[j]);
      c = z.x[j] + m * (t - z.t[j]);
    } else {
      m = 0.0;
      c = z.x.back();
    }
    const double dt = seg_end - t;
    const double up0 = h * c / alpha - h * m / (alpha * alpha);
    const double up1 =
        h * (c + m * dt) / alpha - h * m / (alpha * alpha);
    u = up1 + (u - up0) * std::exp(-alpha * dt);
    t = seg_end;
    if (j + 1 < z.t.size() && t >= z.t[j + 1]) ++j;
  }
  return u;
}

}  // namespace metaspike
