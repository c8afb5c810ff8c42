#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace metaspike {

// Violated caller-side precondition (maps to CLI exit code 2).
struct guard_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Operation requested for a rate family that does not support it.
struct unsupported_rate_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Jump-rate function lambda(u).  The piecewise-linear family
// lambda(u) = min(k*u, lambda_star) is exact and carries its own constants;
// a generic Lipschitz rate carries user-asserted constants (they constrain
// the function but cannot be verified for a black box beyond sampling).
class RateSpec {
 public:
  enum class Kind { piecewise_linear, generic_lipschitz };

  struct GenericRate {
    std::function<double(double)> eval;
    double lambda_star;  // upper bound
    double lip;          // Lipschitz constant
    double k;            // lower slope near 0
    double u_star;       // threshold below which lambda'(u) >= k
    double r;            // drift-comparison constant
  };

  static RateSpec piecewise_linear(double k, double lambda_star);
  static RateSpec generic(GenericRate g);

  Kind kind() const { return kind_; }
  bool is_piecewise_linear() const { return kind_ == Kind::piecewise_linear; }

  // lambda(u); throws std::domain_error for u < 0.
  double operator()(double u) const;

  double k() const { return k_; }
  double lambda_star() const { return lambda_star_; }
  double u_star() const { return u_star_; }
  double lip() const { return lip_; }
  // Drift-comparison constant; for the piecewise-linear family this is the
  // leak rate alpha of the enclosing parameters (see ModelParams::r()).
  double generic_r() const { return r_; }

  // Sampled invariant check on [0, u_max]: lambda(0)=0, non-decreasing,
  // bounded by lambda_star.  Throws on violation.
  void validate_sampled(double u_max, int n_samples = 256) const;

 private:
  RateSpec() = default;
  Kind kind_ = Kind::piecewise_linear;
  std::function<double(double)> eval_;
  double k_ = 0.0, lambda_star_ = 0.0, u_star_ = 0.0, lip_ = 0.0, r_ = 0.0;
};

inline double rate_eval(const RateSpec& spec, double u) { return spec(u); }

struct ModelParams {
  int n = 1;            // neuron count
  double alpha = 1.0;   // leak rate (1/time)
  double h = 1.0;       // synaptic weight (potential)
  RateSpec rate = RateSpec::piecewise_linear(1.0, 1.0);

  double k() const { return rate.k(); }
  double lambda_star() const { return rate.lambda_star(); }
  double u_star() const { return rate.u_star(); }
  double lambda(double u) const { return rate(u); }

  double a() const { return alpha / (rate.k() * h); }
  double b() const { return rate.lambda_star() / (rate.k() * h); }
  double r() const {
    return rate.is_piecewise_linear() ? alpha : rate.generic_r();
  }

  // Throws guard_error when n < 1, alpha <= 0, h <= 0 or a/b degenerate.
  void validate() const;
};

struct RegimeReport {
  double a = 0.0, b = 0.0;
  bool delta0_unique_attractive = false;  // a > 1
  bool delta0_unstable = false;           // a < 1
  bool exponential_extinction = false;    // a + b < 1
  bool contraction_condition = false;
  bool exit_condition = false;
  double contraction_lhs = 0.0;  // compared against y0
  double exit_lhs = 0.0;         // compared against 1
  double y0 = 0.0, b_max = 0.0, y1 = 0.0;
};

// Solution of y e^y = 1, |residual| <= 1e-12.
double solve_y0();
// Solution of (y+1) e^{4(y+1)} = (e^{-y}/y - 1) e^{-2y} on (0, y0).
double solve_y1();
// 1 - 1/sqrt(y0 + 1).
double b_max_value();

RegimeReport classify_regime_ab(double a, double b);
// Requires a piecewise-linear rate; throws unsupported_rate_error otherwise.
RegimeReport classify_regime(const ModelParams& params);

}  // namespace metaspike
