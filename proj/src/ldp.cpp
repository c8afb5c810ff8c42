#include "metaspike/ldp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "metaspike/engine.hpp"
#include "metaspike/numerics.hpp"
#include "metaspike/parallel.hpp"
#include "metaspike/stats.hpp"

namespace metaspike::ldp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double entropy_q(double u) {
  if (u < 0.0) throw std::domain_error("entropy_q: u >= 0 required");
  if (u == 0.0) return 1.0;
  return u * std::log(u) - u + 1.0;
}

double drift_g(double x, const ModelParams& params) {
  if (x < 0.0) throw std::domain_error("drift_g: x >= 0 required");
  const double kh = params.k() * params.h;
  const double lam_us = params.lambda(params.u_star());
  return std::max(0.0, kh * (1.0 - x / lam_us) - params.lambda_star());
}

LdpConfig LdpConfig::make(const ModelParams& params, double eta) {
  const double kh = params.k() * params.h;
  const double r = params.r();
  const double lam_us = params.lambda(params.u_star());
  if (!(kh > params.lambda_star() + r))
    throw guard_error("ldp: requires kh > lambda_star + r");
  LdpConfig c;
  c.r = r;
  c.z_inf = (1.0 - params.lambda_star() / kh) * lam_us;
  c.x_inf = lam_us * (1.0 - (params.lambda_star() + r) / kh);
  if (!(eta > 0.0) || !(eta < c.x_inf))
    throw std::domain_error("ldp: requires 0 < eta < x_inf");
  c.eta = eta;
  c.s_drain = (std::log(c.z_inf) - std::log(eta)) / r;
  return c;
}

double rate_l(double x, double q, const LdpConfig& config,
              const ModelParams& params) {
  if (x < 0.0) throw std::domain_error("rate_l: x >= 0 required");
  const double rx = config.r * x;
  if (q < -rx) return kInf;
  if (x >= config.z_inf) return (q == -rx) ? 0.0 : kInf;
  const double g = drift_g(x, params);
  const double u = (q + rx) / (g * config.f(x));
  return config.f(x) * entropy_q(u);
}

QuasiPotentialBounds quasi_potential_bounds(const LdpConfig& config,
                                            const ModelParams& params,
                                            double tol) {
  if (!(config.eta < config.x_inf))
    throw std::domain_error("quasi_potential_bounds: eta < x_inf required");
  QuasiPotentialBounds b;
  b.upper = (config.x_inf - config.eta) / config.r;
  auto integrand = [&](double z) {
    return entropy_q(config.r / drift_g(z, params));
  };
  b.lower =
      num::adaptive_simpson(integrand, config.eta, config.x_inf, tol) /
      config.r;
  if (!(b.lower > 0.0) || b.lower > b.upper * (1.0 + 1e-12))
    throw std::logic_error("quasi_potential_bounds: ordering violated");
  return b;
}

double w_zero_integral(const ModelParams& params, double tol) {
  const double kh = params.k() * params.h;
  const double r = params.r();
  if (!(kh > params.lambda_star() + r))
    throw std::domain_error("w_zero: requires kh > lambda_star + r");
  const double lam_us = params.lambda(params.u_star());
  const double x_inf = lam_us * (1.0 - (params.lambda_star() + r) / kh);
  auto integrand = [&](double y) {
    return entropy_q(r / drift_g(y, params));
  };
  return num::adaptive_simpson(integrand, 0.0, x_inf, tol) / r;
}

double w_zero(const ModelParams& params) {
  const double kh = params.k() * params.h;
  const double r = params.r();
  if (!(kh > params.lambda_star() + r))
    throw std::domain_error("w_zero: requires kh > lambda_star + r");
  const double c = (kh - params.lambda_star()) / r;
  const double lc = std::log(c);
  const double closed = params.lambda(params.u_star()) / kh *
                        (c - 1.0 - lc - 0.5 * lc * lc);
  if (!(closed > 0.0)) throw std::logic_error("w_zero: non-positive value");
  const double quad = w_zero_integral(params);
  if (std::fabs(closed - quad) > 1e-8 * std::max(1.0, std::fabs(closed)))
    throw std::logic_error("w_zero: closed form disagrees with quadrature");
  return closed;
}

double action_of_path(const PathSample& path, const LdpConfig& config,
                      const ModelParams& params) {
  if (path.size() < 3)
    throw std::invalid_argument("action_of_path: need at least 3 nodes");
  const std::vector<double> qs = path.derivative();
  const double step = path.grid_step();
  double max_abs = 1.0;
  for (double x : path.x) max_abs = std::max(max_abs, std::fabs(x));
  const double scale =
      10.0 * (1.0 + config.r) * (1.0 + config.r) * max_abs;
  std::vector<double> lvals(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const bool one_sided = (i == 0 || i + 1 == path.size());
    const double eps = scale * (one_sided ? step : step * step);
    double q = qs[i];
    // central differences of an admissible path can land a hair below the
    // flow floor -r x; snap within the grid-aware tolerance
    if (q < -config.r * path.x[i] && q + config.r * path.x[i] >= -eps)
      q = -config.r * path.x[i];
    lvals[i] = rate_l(path.x[i], q, config, params);
    if (lvals[i] == kInf) return kInf;
  }
  double action = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i)
    action += 0.5 * (lvals[i - 1] + lvals[i]) * (path.t[i] - path.t[i - 1]);
  return action;
}

ScalingReport extinction_scaling(const ModelParams& params, double eta,
                                 const std::vector<int>& ns, int replicas,
                                 CounterRng rng,
                                 std::uint64_t jump_cap_per_replica,
                                 double time_cap_per_replica, int threads) {
  if (replicas < 1)
    throw std::invalid_argument("extinction_scaling: replicas >= 1 required");
  if (ns.empty())
    throw std::invalid_argument("extinction_scaling: non-empty N list");
  if (!(params.a() + params.b() < 1.0))
    throw guard_error("extinction_scaling: supercritical regime a+b<1 required");
  const LdpConfig config = LdpConfig::make(params, eta);

  ScalingReport report;
  report.eta = eta;
  const auto bounds = quasi_potential_bounds(config, params);
  report.lower = bounds.lower;
  report.upper = bounds.upper;
  report.slack = 0.5;

  for (std::size_t idx = 0; idx < ns.size(); ++idx) {
    ScalingRow row;
    row.n = ns[idx];
    ModelParams local = params;
    local.n = ns[idx];
    engine::AuxParams aux;
    try {
      aux = engine::AuxParams::make(local);
    } catch (const guard_error& e) {
      row.note = std::string("aux construction failed: ") + e.what();
      report.rows.push_back(row);
      report.partial = true;
      continue;
    }
    const double z0 = std::min(config.x_inf, aux.z_n);
    if (z0 < config.x_inf) row.note = "start clamped to z_N < x_inf";
    std::vector<double> taus(replicas);
    std::vector<char> trunc(replicas, 0);
    parallel_for(static_cast<std::size_t>(replicas), threads, [&](std::size_t r) {
      CounterRng rr = replica_rng(rng.key(),
                                  (idx << 32) + static_cast<std::uint64_t>(r),
                                  stream::aux);
      const auto exit = engine::aux_exit_time(aux, z0, eta, rr,
                                              jump_cap_per_replica,
                                              time_cap_per_replica);
      taus[r] = exit.time;
      trunc[r] = exit.truncated ? 1 : 0;
    });
    for (char c : trunc) row.truncated += c;
    row.completed = static_cast<std::size_t>(replicas) - row.truncated;
    row.median = stats::median(taus);
    row.mean = stats::mean_se(taus).mean;
    row.log_mean_over_n =
        row.mean > 0.0 ? std::log(row.mean) / row.n : -kInf;
    row.valid = row.truncated == 0;
    if (row.truncated > 0) {
      report.partial = true;
      if (!row.note.empty()) row.note += "; ";
      row.note += std::to_string(row.truncated) + " replicas truncated at cap";
    }
    report.rows.push_back(row);
  }

  // trend checks over the rows as computed (truncation noted above)
  report.monotone_medians = true;
  report.log_growth_ok = true;
  const ScalingRow* prev = nullptr;
  for (const auto& row : report.rows) {
    if (!row.valid) {
      report.monotone_medians = false;
      report.log_growth_ok = false;
      break;
    }
    if (prev) {
      if (!(row.median > prev->median)) report.monotone_medians = false;
      const double l0 = prev->median > 0.0 ? std::log(prev->median) : -kInf;
      const double l1 = row.median > 0.0 ? std::log(row.median) : -kInf;
      if (!(l0 > 0.0) || !(l1 >= 1.5 * l0)) report.log_growth_ok = false;
    }
    prev = &row;
  }
  if (!report.rows.empty() && report.rows.back().valid) {
    const double est = report.rows.back().log_mean_over_n;
    report.largest_in_bracket = est >= report.lower * (1.0 - report.slack) &&
                                est <= report.upper * (1.0 + report.slack);
  }
  std::ostringstream verdict;
  verdict << (report.monotone_medians ? "medians-increasing" : "medians-NOT-increasing")
          << "; " << (report.log_growth_ok ? "log-growth-ok" : "log-growth-FAILED")
          << "; " << (report.largest_in_bracket ? "bracket-ok" : "bracket-FAILED");
  if (report.partial) verdict << "; PARTIAL";
  report.verdict = verdict.str();
  return report;
}

}  // namespace metaspike::ldp
