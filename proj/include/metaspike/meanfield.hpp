#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "metaspike/model.hpp"
#include "metaspike/path.hpp"
#include "metaspike/rng.hpp"

namespace metaspike::meanfield {

// Configuration of the one-dimensional limit equation
//   x' = -r x + G(x) f(x),
// with G the mean-field rate drift and f the clamped jump-rate function.
struct LimitOdeConfig {
  double r = 0.0;
  double eta = 0.0;
  double z_inf = 0.0;
  double x_inf = 0.0;
  double kh = 0.0;
  double lambda_u_star = 0.0;
  double lambda_star = 0.0;

  double G(double x) const {
    return std::max(0.0, kh * (1.0 - x / lambda_u_star) - lambda_star);
  }
  double f(double x) const { return std::max(eta, std::min(x, z_inf)); }
  double rhs(double x) const { return -r * x + G(x) * f(x); }

  static LimitOdeConfig from(const ModelParams& params, double eta);
};

// Adaptive integration of the limit equation, sampled on a uniform grid.
PathSample limit_ode(double x0, double horizon, const LimitOdeConfig& config,
                     double dt_out = 1e-3, double rel_tol = 1e-10);

// Gamma(a) = 1/p_a, the reciprocal equilibrium mean rate of the linearized
// equation with constant drift a.  Change-of-variables form with the
// endpoint singularity integrated in closed form.  Piecewise-linear rates
// only; throws std::domain_error for a <= 0.
double gamma_of_a(double a, const ModelParams& params, double quad_tol = 1e-11);

struct no_equilibrium_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tabulated invariant density of the non-linear limit at its fixed point.
struct DensityTable {
  double a_star = 0.0;   // h p*
  double p_star = 0.0;   // equilibrium mean rate
  double residual = 0.0; // |h p_{a*} - a*|
  std::vector<double> roots;  // all fixed points found by the scan
  bool unique = true;
  std::vector<double> grid, g, cdf;

  // frozen snapshot of what the closed forms need
  double alpha = 0.0, k = 0.0, lambda_star = 0.0, u_star = 0.0;

  double density(double x) const;
  double cdf_at(double x) const;
  double sample(CounterRng& rng) const;
  double mean_lambda() const;  // int lambda g (quadrature cross-check)

 private:
  friend DensityTable solve_pstar(const ModelParams&, int, double);
  double head_end_ = 0.0;       // numeric grid covers [0, head_end]
  double tail_coeff_ = 0.0;     // exact tail: mass above x = coeff*(a-ax)^beta
  double tail_beta_ = 0.0;
  double head_mass_ = 0.0;
};

// Bisection on h p_a = a over [a0, h lambda_star], after a sign-change scan
// (all roots reported; the largest is the fixed point used for the table).
DensityTable solve_pstar(const ModelParams& params, int scan_points = 512,
                         double a_xtol = 1e-12);

// Initial law descriptor for the non-linear one-particle process.
struct InitialLaw {
  enum class Kind { dirac, empirical, table };
  Kind kind = Kind::dirac;
  double u0 = 0.0;
  std::vector<double> samples;
  const DensityTable* table = nullptr;

  static InitialLaw dirac(double u) { return {Kind::dirac, u, {}, nullptr}; }
  static InitialLaw empirical(std::vector<double> s) {
    return {Kind::empirical, 0.0, std::move(s), nullptr};
  }
  static InitialLaw from_table(const DensityTable* t) {
    return {Kind::table, 0.0, {}, t};
  }
};

struct PicardResult {
  PathSample z;
  int iterations = 0;
  bool converged = false;
  std::vector<double> sup_deltas;  // per-iteration sup |z^{m+1} - z^m|
  double mc_se = 0.0;
};

struct picard_divergence_error : std::runtime_error {
  std::vector<double> history;
  explicit picard_divergence_error(std::string msg, std::vector<double> h)
      : std::runtime_error(std::move(msg)), history(std::move(h)) {}
};

// Experimental Picard iteration for the non-linear mean rate z(t); the
// particle system remains the authoritative surrogate.  Requires
// dt <= 0.01/(kh + lambda_star); throws picard_divergence_error after
// max_iter non-converged sweeps.
PicardResult picard_z(const InitialLaw& law, double horizon, double dt,
                      int mc_replicas, const ModelParams& params,
                      CounterRng rng, int max_iter = 50);

// Exact 1-D Wasserstein-1 distance between empirical measures (quantile
// coupling; sizes may differ).
double w1_empirical(std::vector<double> a, std::vector<double> b);

}  // namespace metaspike::meanfield
