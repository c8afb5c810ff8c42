#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "metaspike/model.hpp"
#include "metaspike/path.hpp"
#include "metaspike/rng.hpp"

namespace metaspike::ldp {

// Q(u) = u ln u - u + 1 with Q(0) = 1; throws std::domain_error for u < 0.
double entropy_q(double u);

// G(x) = (kh (1 - x/lambda(u*)) - lambda*)_+
double drift_g(double x, const ModelParams& params);

struct LdpConfig {
  double eta = 0.0;     // exit level, 0 < eta < x_inf
  double r = 0.0;
  double z_inf = 0.0;
  double x_inf = 0.0;
  double s_drain = 0.0;  // (ln z_inf - ln eta)/r

  double f(double x) const { return std::max(eta, std::min(x, z_inf)); }

  static LdpConfig make(const ModelParams& params, double eta);
};

// Rate function L(x, q); +infinity when q < -r x, and for x >= z_inf unless
// q == -r x exactly.  Callers that difference noisy grids snap q first
// (see action_of_path).
double rate_l(double x, double q, const LdpConfig& config,
              const ModelParams& params);

struct QuasiPotentialBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// (x_inf - eta)/r upper bound, quadrature lower bound (1/r) int Q(r/G).
QuasiPotentialBounds quasi_potential_bounds(const LdpConfig& config,
                                            const ModelParams& params,
                                            double tol = 1e-10);

// Closed-form W0, checked internally against its integral representation to
// 1e-8.  Requires kh > lambda* + r.
double w_zero(const ModelParams& params);
double w_zero_integral(const ModelParams& params, double tol = 1e-10);

// Trapezoidal action int L(x, xdot) dt with central-difference derivatives;
// +infinity when any node is inadmissible beyond the grid tolerance.
double action_of_path(const PathSample& path, const LdpConfig& config,
                      const ModelParams& params);

struct ScalingRow {
  int n = 0;
  double median = 0.0;
  double mean = 0.0;
  double log_mean_over_n = 0.0;
  std::size_t completed = 0;
  std::size_t truncated = 0;
  bool valid = false;
  std::string note;
};

struct ScalingReport {
  double eta = 0.0;
  double lower = 0.0, upper = 0.0, slack = 0.5;
  std::vector<ScalingRow> rows;
  bool partial = false;
  bool monotone_medians = false;
  bool log_growth_ok = false;       // ln(median) ratio >= 1.5 between rows
  bool largest_in_bracket = false;  // (1/N) ln(mean) within slack bounds
  std::string verdict;
};

// Monte Carlo samples of the auxiliary-process exit time L^N_eta for each N,
// started at min(x_inf, z_N).  Guards: supercritical regime (a + b < 1),
// replicas >= 1, eta < x_inf.
ScalingReport extinction_scaling(const ModelParams& params, double eta,
                                 const std::vector<int>& ns, int replicas,
                                 CounterRng rng,
                                 std::uint64_t jump_cap_per_replica,
                                 double time_cap_per_replica, int threads);

}  // namespace metaspike::ldp
