#include "metaspike/model.hpp"

#include <cmath>
#include <limits>

#include "metaspike/numerics.hpp"

namespace metaspike {

RateSpec RateSpec::piecewise_linear(double k, double lambda_star) {
  if (!(k > 0.0) || !(lambda_star > 0.0))
    throw guard_error("piecewise_linear rate needs k > 0 and lambda_star > 0");
  RateSpec s;
  s.kind_ = Kind::piecewise_linear;
  s.k_ = k;
  s.lambda_star_ = lambda_star;
  s.u_star_ = lambda_star / k;
  s.lip_ = k;
  s.r_ = 0.0;  // supplied by ModelParams::r() as alpha
  return s;
}

RateSpec RateSpec::generic(GenericRate g) {
  if (!g.eval) throw guard_error("generic rate needs an eval function");
  if (!(g.lambda_star > 0.0) || !(g.lip > 0.0) || !(g.k > 0.0) ||
      !(g.u_star > 0.0) || !(g.r > 0.0))
    throw guard_error("generic rate constants must be positive");
  RateSpec s;
  s.kind_ = Kind::generic_lipschitz;
  s.eval_ = std::move(g.eval);
  s.k_ = g.k;
  s.lambda_star_ = g.lambda_star;
  s.u_star_ = g.u_star;
  s.lip_ = g.lip;
  s.r_ = g.r;
  return s;
}

double RateSpec::operator()(double u) const {
  if (u < 0.0) throw std::domain_error("rate_eval: negative potential");
  if (kind_ == Kind::piecewise_linear) return std::min(k_ * u, lambda_star_);
  return eval_(u);
}

void RateSpec::validate_sampled(double u_max, int n_samples) const {
  if ((*this)(0.0) != 0.0) throw guard_error("rate: lambda(0) != 0");
  double prev = 0.0;
  for (int i = 1; i <= n_samples; ++i) {
    const double u = u_max * static_cast<double>(i) / n_samples;
    const double v = (*this)(u);
    if (v < prev - 1e-12 * std::max(1.0, prev))
      throw guard_error("rate: not non-decreasing at sampled points");
    if (v > lambda_star_ * (1.0 + 1e-12))
      throw guard_error("rate: exceeds lambda_star at sampled points");
    prev = v;
  }
}

void ModelParams::validate() const {
  if (n < 1) throw guard_error("params: n >= 1 required");
  if (!(alpha > 0.0)) throw guard_error("params: alpha > 0 required");
  if (!(h > 0.0)) throw guard_error("params: h > 0 required");
  const double av = a(), bv = b();
  if (!std::isfinite(av) || !(av > 0.0) || !std::isfinite(bv) || !(bv > 0.0))
    throw guard_error("params: derived a, b must be finite and positive");
}

double solve_y0() {
  // y e^y - 1 is increasing on [0, 1].
  auto f = [](double y) { return y * std::exp(y) - 1.0; };
  auto df = [](double y) { return (1.0 + y) * std::exp(y); };
  return num::newton_bisect(f, df, 0.1, 1.0, 1e-15);
}

double b_max_value() { return 1.0 - 1.0 / std::sqrt(solve_y0() + 1.0); }

double solve_y1() {
  // (y+1) e^{4(y+1)} = (e^{-y}/y - 1) e^{-2y}; LHS increasing, RHS
  // decreasing on (0, y0), so the difference is monotone on the bracket.
  auto f = [](double y) {
    const double lhs = (y + 1.0) * std::exp(4.0 * (y + 1.0));
    const double rhs = (std::exp(-y) / y - 1.0) * std::exp(-2.0 * y);
    return lhs - rhs;
  };
  auto df = [&f](double y) {
    const double e = 1e-9;
    return (f(y + e) - f(y - e)) / (2.0 * e);
  };
  return num::newton_bisect(f, df, 1e-6, 0.5, 1e-12);
}

RegimeReport classify_regime_ab(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw guard_error("classify_regime: a, b must be positive");
  RegimeReport rep;
  rep.a = a;
  rep.b = b;
  rep.y0 = solve_y0();
  rep.b_max = 1.0 - 1.0 / std::sqrt(rep.y0 + 1.0);
  rep.y1 = solve_y1();
  rep.delta0_unique_attractive = a > 1.0;
  rep.delta0_unstable = a < 1.0;
  rep.exponential_extinction = a + b < 1.0;
  const double denom = 1.0 - 2.0 * a - b;
  if (denom > 0.0) {
    const double d = b / denom;
    const double c = 1.0 / denom;
    rep.contraction_lhs = d * (1.0 + c);
    rep.contraction_condition = rep.contraction_lhs <= rep.y0;
    rep.exit_lhs = d * std::exp(d) * (1.0 + c * std::exp((4.0 + 2.0 * b) * c));
    rep.exit_condition = rep.exit_lhs <= 1.0;
  } else {
    rep.contraction_lhs = std::numeric_limits<double>::infinity();
    rep.exit_lhs = std::numeric_limits<double>::infinity();
  }
  return rep;
}

RegimeReport classify_regime(const ModelParams& params) {
  if (!params.rate.is_piecewise_linear())
    throw unsupported_rate_error(
        "classify_regime: piecewise-linear rate required");
  params.validate();
  return classify_regime_ab(params.a(), params.b());
}

}  // namespace metaspike
