#include "metaspike/meanfield.hpp"

#include <cmath>
#include <sstream>

#include "metaspike/numerics.hpp"

namespace metaspike::meanfield {

LimitOdeConfig LimitOdeConfig::from(const ModelParams& params, double eta) {
  LimitOdeConfig c;
  c.r = params.r();
  c.eta = eta;
  c.kh = params.k() * params.h;
  c.lambda_star = params.lambda_star();
  c.lambda_u_star = params.lambda(params.u_star());
  c.z_inf = (1.0 - c.lambda_star / c.kh) * c.lambda_u_star;
  c.x_inf = c.lambda_u_star * (1.0 - (c.lambda_star + c.r) / c.kh);
  return c;
}

PathSample limit_ode(double x0, double horizon, const LimitOdeConfig& config,
                     double dt_out, double rel_tol) {
  if (!(x0 >= 0.0)) throw guard_error("limit_ode: x0 >= 0 required");
  if (!(dt_out > 0.0)) throw guard_error("limit_ode: dt_out > 0 required");
  auto rhs = [&config](double, double x) { return config.rhs(x); };
  PathSample path;
  const std::size_t steps =
      static_cast<std::size_t>(std::ceil(horizon / dt_out - 1e-9));
  path.t.reserve(steps + 1);
  path.x.reserve(steps + 1);
  double x = x0;
  path.t.push_back(0.0);
  path.x.push_back(x);
  for (std::size_t j = 1; j <= steps; ++j) {
    const double t0 = path.t.back();
    const double t1 = std::min(horizon, static_cast<double>(j) * dt_out);
    x = num::ode45(rhs, x, t0, t1, rel_tol, 1e-14);
    path.t.push_back(t1);
    path.x.push_back(x);
  }
  return path;
}

namespace {

// The transformed representation
//   Gamma(a) = int_0^{1/alpha} (1-alpha x)^{-1} exp(-J(x)) dx,
//   J(x) = int_0^x lambda(a y)/(1-alpha y) dy.
// Below the saturation point y_sat = u*/a the exponent obeys the exact
// identity exp(-J(x)) = e^{(ka/alpha)x} (1-alpha x)^{beta2} with
// beta2 = k a/alpha^2; beyond it the integrand is a pure power
// (1-alpha x)^{beta-1} with beta = lambda*/alpha, integrable in closed form.
struct GammaPieces {
  double alpha, k, lambda_star, u_star;
  double a, beta2, y_sat;
  bool saturates;

  GammaPieces(double a_, const ModelParams& p)
      : alpha(p.alpha),
        k(p.k()),
        lambda_star(p.lambda_star()),
        u_star(p.u_star()),
        a(a_) {
    beta2 = k * a / (alpha * alpha);
    y_sat = u_star / a;
    saturates = y_sat < 1.0 / alpha;
  }

  double j_head(double s) const {
    return -k * a * s / alpha +
           beta2 * std::log1p(alpha * s / (1.0 - alpha * s));
  }

  double head_integrand(double x) const {
    return std::exp(k * a * x / alpha) *
           std::pow(1.0 - alpha * x, beta2 - 1.0);
  }

  double head_integral(double tol) const {
    if (saturates)
      return num::adaptive_simpson(
          [this](double x) { return head_integrand(x); }, 0.0, y_sat, tol);
    // w = (1 - alpha x)^{beta2} absorbs the endpoint power exactly
    auto in_w = [this](double w) {
      const double x = (1.0 - std::pow(w, 1.0 / beta2)) / alpha;
      return std::exp(k * a * x / alpha);
    };
    return num::adaptive_simpson(in_w, 0.0, 1.0, tol) / (alpha * beta2);
  }

  double tail_integral() const {
    return saturates ? std::exp(-j_head(y_sat)) / lambda_star : 0.0;
  }
};

}  // namespace

double gamma_of_a(double a, const ModelParams& params, double quad_tol) {
  if (!(a > 0.0)) throw std::domain_error("gamma_of_a: a > 0 required");
  if (!params.rate.is_piecewise_linear())
    throw unsupported_rate_error("gamma_of_a: piecewise-linear rate required");
  const GammaPieces gp(a, params);
  return gp.head_integral(quad_tol) + gp.tail_integral();
}

namespace {

// exponent E(x;a) = int_0^x lambda(y)/(a - alpha y) dy, untransformed
double density_exponent(double x, double a, double alpha, double k, double ls,
                        double us) {
  const double x_sat = std::min(us, a / alpha);
  const double s = std::min(x, x_sat);
  double e = k * (-s / alpha + (a / (alpha * alpha)) *
                                  std::log1p(alpha * s / (a - alpha * s)));
  if (x > x_sat && us < a / alpha)
    e += (ls / alpha) * std::log((a - alpha * us) / (a - alpha * x));
  return e;
}

}  // namespace

double DensityTable::density(double x) const {
  if (x < 0.0 || x >= a_star / alpha) return 0.0;
  const double e = density_exponent(x, a_star, alpha, k, lambda_star, u_star);
  return p_star / (a_star - alpha * x) * std::exp(-e);
}

double DensityTable::cdf_at(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= a_star / alpha) return 1.0;
  if (x > head_end_)
    return 1.0 - tail_coeff_ * std::pow(a_star - alpha * x, tail_beta_);
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t j = static_cast<std::size_t>(it - grid.begin());
  if (j == 0) return 0.0;
  if (j >= grid.size()) return cdf.back();
  const double w = (x - grid[j - 1]) / (grid[j] - grid[j - 1]);
  return cdf[j - 1] + w * (cdf[j] - cdf[j - 1]);
}

double DensityTable::sample(CounterRng& rng) const {
  const double u = rng.uniform01();
  const double tail_mass =
      tail_coeff_ * std::pow(a_star - alpha * head_end_, tail_beta_);
  if (1.0 - u <= tail_mass) {
    // exact inversion of the power-law tail
    const double v = std::pow((1.0 - u) / tail_coeff_, 1.0 / tail_beta_);
    return (a_star - v) / alpha;
  }
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  std::size_t j = static_cast<std::size_t>(it - cdf.begin());
  if (j == 0) return grid.front();
  if (j >= cdf.size()) j = cdf.size() - 1;
  const double c0 = cdf[j - 1], c1 = cdf[j];
  const double w = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.0;
  return grid[j - 1] + w * (grid[j] - grid[j - 1]);
}

double DensityTable::mean_lambda() const {
  const double x_sat = std::min(u_star, a_star / alpha);
  auto lam_g = [&](double x) {
    return std::min(k * x, lambda_star) * density(x);
  };
  if (u_star < a_star / alpha) {
    const double head = num::adaptive_simpson(lam_g, 0.0, x_sat, 1e-12);
    const double tail_mass =
        tail_coeff_ * std::pow(a_star - alpha * u_star, tail_beta_);
    return head + lambda_star * tail_mass;
  }
  // all sub-saturation: integrate in w-space, smooth up to the endpoint
  const double beta2 = k * a_star / (alpha * alpha);
  const double v0 = std::pow(a_star, beta2);
  auto in_v = [&](double v) {
    const double x = (a_star - std::pow(v, 1.0 / beta2)) / alpha;
    return k * x * std::exp(k * x / alpha);
  };
  return p_star * std::pow(a_star, -beta2) / (alpha * beta2) *
         num::adaptive_simpson(in_v, 0.0, v0, 1e-12 * v0);
}

DensityTable solve_pstar(const ModelParams& params, int scan_points,
                         double a_xtol) {
  if (!params.rate.is_piecewise_linear())
    throw unsupported_rate_error("solve_pstar: piecewise-linear rate required");
  const double alpha = params.alpha, k = params.k(),
               ls = params.lambda_star(), us = params.u_star(), h = params.h;
  if (!(k * h > alpha))
    throw guard_error("solve_pstar: requires kh > alpha");

  const double a_lo = alpha * std::min(us, (k * h - alpha) / params.rate.lip());
  const double a_hi = h * ls;
  auto phi = [&](double a) { return h / gamma_of_a(a, params) - a; };

  std::vector<double> roots;
  double fprev = phi(a_lo);
  double aprev = a_lo;
  for (int i = 1; i <= scan_points; ++i) {
    const double a = a_lo + (a_hi - a_lo) * static_cast<double>(i) /
                                static_cast<double>(scan_points);
    const double fa = phi(a);
    if (fprev == 0.0) roots.push_back(aprev);
    if ((fprev > 0.0) != (fa > 0.0) && fprev != 0.0) {
      double lo = aprev, hi = a, flo = fprev;
      while (hi - lo > a_xtol * std::max(1.0, a_hi)) {
        const double mid = 0.5 * (lo + hi);
        const double fm = phi(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm > 0.0) == (flo > 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    fprev = fa;
    aprev = a;
  }
  if (roots.empty()) {
    std::ostringstream msg;
    msg << "solve_pstar: no sign change of h*p_a - a on [" << a_lo << ", "
        << a_hi << "]; scanned " << scan_points
        << " points, endpoint values phi(lo)=" << phi(a_lo)
        << " phi(hi)=" << phi(a_hi);
    throw no_equilibrium_error(msg.str());
  }

  DensityTable table;
  table.alpha = alpha;
  table.k = k;
  table.lambda_star = ls;
  table.u_star = us;
  table.roots = roots;
  table.unique = roots.size() == 1;
  table.a_star = roots.back();
  table.p_star = 1.0 / gamma_of_a(table.a_star, params);
  table.residual = std::fabs(h * table.p_star - table.a_star);

  const double a = table.a_star;
  const double beta2 = k * a / (alpha * alpha);
  const int cells = 4096;
  if (us < a / alpha) {
    // numeric head on [0, u*], exact power-law tail above
    const double beta = ls / alpha;
    table.head_end_ = us;
    table.tail_beta_ = beta;
    table.tail_coeff_ = table.p_star *
                        std::exp(-density_exponent(us, a, alpha, k, ls, us)) *
                        std::pow(a - alpha * us, -beta) / (alpha * beta);
    table.grid.resize(cells + 1);
    table.g.resize(cells + 1);
    table.cdf.resize(cells + 1);
    for (int j = 0; j <= cells; ++j) {
      table.grid[j] = us * static_cast<double>(j) / cells;
      table.g[j] = table.density(table.grid[j]);
    }
    table.cdf[0] = 0.0;
    for (int j = 0; j < cells; ++j) {
      const double x0 = table.grid[j], x1 = table.grid[j + 1];
      const double gm = table.density(0.5 * (x0 + x1));
      table.cdf[j + 1] = table.cdf[j] + (x1 - x0) / 6.0 *
                                            (table.g[j] + 4.0 * gm +
                                             table.g[j + 1]);
    }
    table.head_mass_ = table.cdf.back();
    // extend the tabulation into the tail with analytic cdf values
    double gap = (a / alpha - us);
    for (int j = 1; j <= 2048; ++j) {
      gap *= 0.5;
      const double x = a / alpha - gap;
      table.grid.push_back(x);
      table.g.push_back(table.density(x));
      const double mass = table.tail_coeff_ *
                          std::pow(a - alpha * x, table.tail_beta_);
      table.cdf.push_back(1.0 - mass);
      if (mass <= 1e-10) break;
    }
  } else {
    // whole support sub-saturated; tabulate on the w-grid that absorbs the
    // endpoint power (a - alpha x)^{beta2 - 1} exactly
    const double v0 = std::pow(a, beta2);
    const double scale = table.p_star * std::pow(a, -beta2) / (alpha * beta2);
    auto in_v = [&](double v) {
      const double x = (a - std::pow(v, 1.0 / beta2)) / alpha;
      return scale * std::exp(k * x / alpha);
    };
    table.grid.resize(cells + 1);
    table.g.resize(cells + 1);
    table.cdf.resize(cells + 1);
    std::vector<double> vs(cells + 1);
    for (int j = 0; j <= cells; ++j) {
      vs[j] = v0 * static_cast<double>(cells - j) / cells;
      table.grid[j] = (a - std::pow(vs[j], 1.0 / beta2)) / alpha;
      table.g[j] = table.density(table.grid[j]);
    }
    // tail mass T(x_j) accumulated in v from the endpoint side
    std::vector<double> tail(cells + 1);
    tail[cells] = 0.0;
    for (int j = cells; j > 0; --j) {
      const double va = vs[j], vb = vs[j - 1];  // va < vb
      const double fm = in_v(0.5 * (va + vb));
      tail[j - 1] =
          tail[j] + (vb - va) / 6.0 * (in_v(va) + 4.0 * fm + in_v(vb));
    }
    for (int j = 0; j <= cells; ++j) table.cdf[j] = 1.0 - tail[j];
    table.head_end_ = table.grid[cells - 1];
    table.tail_beta_ = beta2;
    table.tail_coeff_ = scale * std::exp(k * a / (alpha * alpha));
    table.head_mass_ = table.cdf[cells - 1];
  }
  return table;
}

PicardResult picard_z(const InitialLaw& law, double horizon, double dt,
                      int mc_replicas, const ModelParams& params,
                      CounterRng rng, int max_iter) {
  const double kh = params.k() * params.h, ls = params.lambda_star();
  if (!(dt > 0.0) || dt > 0.01 / (kh + ls) * (1.0 + 1e-12))
    throw guard_error("picard_z: grid step must be <= 0.01/(kh+lambda_star)");
  if (mc_replicas < 2) throw guard_error("picard_z: need >= 2 replicas");
  const std::size_t m_nodes =
      static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9)) + 1;
  PathSample z;
  z.t.resize(m_nodes);
  for (std::size_t j = 0; j < m_nodes; ++j)
    z.t[j] = std::min(horizon, static_cast<double>(j) * dt);

  // initial potentials fixed across iterations (common random numbers)
  std::vector<double> u0(mc_replicas);
  for (int r = 0; r < mc_replicas; ++r) {
    CounterRng init_rng = replica_rng(rng.key(), r, stream::init);
    switch (law.kind) {
      case InitialLaw::Kind::dirac:
        u0[r] = law.u0;
        break;
      case InitialLaw::Kind::empirical:
        if (law.samples.empty())
          throw guard_error("picard_z: empty empirical law");
        u0[r] = law.samples[init_rng.below(law.samples.size())];
        break;
      case InitialLaw::Kind::table:
        if (!law.table) throw guard_error("picard_z: missing density table");
        u0[r] = law.table->sample(init_rng);
        break;
    }
  }
  double z0 = 0.0;
  for (int r = 0; r < mc_replicas; ++r) z0 += params.lambda(u0[r]);
  z0 /= mc_replicas;
  z.x.assign(m_nodes, z0);

  PicardResult out;
  std::vector<double> sums(m_nodes), sums2(m_nodes);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sums2.begin(), sums2.end(), 0.0);
    for (int r = 0; r < mc_replicas; ++r) {
      CounterRng rr = replica_rng(rng.key(), r, stream::misc);
      double u = u0[r];
      double t = 0.0;
      std::size_t j = 0;
      auto log_until = [&](double up_to) {
        while (j < m_nodes && z.t[j] <= up_to + 1e-15) {
          const double uj = flow_affine(u, t, z.t[j], params.alpha, params.h, z);
          const double lam = params.lambda(uj);
          sums[j] += lam;
          sums2[j] += lam * lam;
          ++j;
        }
      };
      while (t < horizon) {
        const double step = rr.exponential(ls);
        const double t_c = t + step;
        log_until(std::min(t_c, horizon));
        if (t_c >= horizon) break;
        u = flow_affine(u, t, t_c, params.alpha, params.h, z);
        t = t_c;
        if (rr.uniform01() * ls <= params.lambda(u)) u = 0.0;
      }
      log_until(horizon);
    }
    double delta = 0.0, max_se = 0.0;
    for (std::size_t j = 0; j < m_nodes; ++j) {
      const double mean = sums[j] / mc_replicas;
      const double var =
          std::max(0.0, sums2[j] / mc_replicas - mean * mean) /
          std::max(1, mc_replicas - 1) * mc_replicas;
      max_se = std::max(max_se, std::sqrt(var / mc_replicas));
      delta = std::max(delta, std::fabs(mean - z.x[j]));
      z.x[j] = mean;
    }
    out.sup_deltas.push_back(delta);
    out.iterations = iter + 1;
    out.mc_se = max_se;
    if (delta <= std::max(2.0 * max_se, 1e-3)) {
      out.converged = true;
      out.z = std::move(z);
      return out;
    }
  }
  throw picard_divergence_error(
      "picard_z: no convergence after " + std::to_string(max_iter) +
          " iterations (last sup-delta " +
          std::to_string(out.sup_deltas.back()) + ")",
      out.sup_deltas);
}

double w1_empirical(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("w1_empirical: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size(), nb = b.size();
  std::size_t i = 0, jj = 0;
  double q = 0.0, w = 0.0;
  while (i < na && jj < nb) {
    const double qa = static_cast<double>(i + 1) / na;
    const double qb = static_cast<double>(jj + 1) / nb;
    const double qn = std::min(qa, qb);
    w += (qn - q) * std::fabs(a[i] - b[jj]);
    q = qn;
    if (qa <= qn + 1e-18) ++i;
    if (qb <= qn + 1e-18) ++jj;
  }
  return w;
}

}  // namespace metaspike::meanfield
