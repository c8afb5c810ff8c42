#include "metaspike/metastab.hpp"

#include <algorithm>
#include <cmath>

#include "metaspike/engine.hpp"
#include "metaspike/parallel.hpp"

namespace metaspike::metastab {

DomainSpec DomainSpec::level_set(double gamma) {
  if (!(gamma > 0.0)) throw guard_error("domain: gamma > 0 required");
  DomainSpec d;
  d.kind = Kind::level_set;
  d.gamma = gamma;
  return d;
}

DomainSpec DomainSpec::band(double p_star, double delta) {
  if (!(delta > 0.0)) throw guard_error("domain: delta > 0 required");
  if (!(p_star - delta > 0.0))
    throw guard_error("domain: band requires p_star - delta > 0");
  DomainSpec d;
  d.kind = Kind::band;
  d.p_star = p_star;
  d.delta = delta;
  return d;
}

namespace {

// Earliest s in (0, dt] with lambda_bar(s) = edge along pure decay from the
// potentials u_start (lambda_bar is non-increasing along the flow).  The
// profile is a mixture of saturated plateaus and exponentials; each segment
// between de-saturation times is solved in closed form.
double lambda_bar_down_crossing(const std::vector<double>& u_start,
                                const ModelParams& params, double edge,
                                double dt) {
  const double k = params.k(), ls = params.lambda_star(),
               alpha = params.alpha, us = params.u_star();
  const double n_edge = edge * static_cast<double>(u_start.size());
  std::vector<double> desat;  // times at which saturated neurons drop below u*
  desat.reserve(u_start.size());
  int saturated = 0;
  double sub_sum = 0.0;  // sum of u_i over currently sub-saturated neurons
  for (double ui : u_start) {
    if (ui > us) {
      ++saturated;
      desat.push_back(std::log(k * ui / ls) / alpha);
    } else {
      sub_sum += ui;
    }
  }
  std::sort(desat.begin(), desat.end());
  double seg_start = 0.0;
  std::size_t next = 0;
  while (true) {
    const double seg_end =
        (next < desat.size()) ? std::min(desat[next], dt) : dt;
    if (sub_sum > 0.0) {
      // N lambda_bar(s) = saturated*ls + k*sub_sum*e^{-alpha s}
      const double target = (n_edge - saturated * ls) / (k * sub_sum);
      if (target > 0.0) {
        const double s = -std::log(target) / alpha;
        if (s >= seg_start - 1e-15 && s <= seg_end) return std::max(s, 0.0);
      }
    }
    if (seg_end >= dt) break;
    // a saturated neuron crosses u*; its original value is ls/k * e^{alpha s}
    sub_sum += (ls / k) * std::exp(alpha * desat[next]);
    --saturated;
    seg_start = desat[next];
    ++next;
  }
  return dt;  // numerical fallback; caller knows a crossing exists
}

struct ExitRunConfig {
  double horizon = std::numeric_limits<double>::infinity();
  std::uint64_t event_cap = UINT64_MAX;
  // optional trap for eps2-style runs: stop when lambda_bar enters it
  const DomainSpec* trap = nullptr;
};

struct ExitRunResult {
  bool exited = false;
  bool trapped = false;
  bool truncated = false;
  double t = 0.0;
  double lambda_at_stop = 0.0;
};

ExitRunResult run_until_exit(const DomainSpec& domain,
                             std::vector<double> init,
                             const ModelParams& params, CounterRng rng,
                             const ExitRunConfig& cfg) {
  engine::SystemState state = engine::make_state(std::move(init), params);
  const double n = static_cast<double>(state.u.size());
  const double lower = domain.lower_edge();
  const double upper = domain.upper_edge();
  if (!domain.contains(state.total_rate / n))
    throw std::invalid_argument("exit_time: initial state outside the domain");
  ExitRunResult res;
  auto check_trap = [&](double lb) {
    return cfg.trap != nullptr && cfg.trap->contains(lb);
  };
  if (check_trap(state.total_rate / n)) {
    res.trapped = true;
    res.lambda_at_stop = state.total_rate / n;
    return res;
  }
  const double trap_upper =
      cfg.trap ? cfg.trap->upper_edge() : std::numeric_limits<double>::infinity();
  const double big = n * params.lambda_star();
  std::uint64_t events = 0;
  while (true) {
    if (events >= cfg.event_cap) {
      res.truncated = true;
      res.t = state.t;
      res.lambda_at_stop = state.total_rate / n;
      return res;
    }
    const double step = rng.exponential(big);
    const double t_next = std::min(state.t + step, cfg.horizon);
    const double dt = t_next - state.t;
    const double t_seg = state.t;
    const double lb_before = state.total_rate / n;
    engine::flow(state, dt, params);
    const double lb_now = state.total_rate / n;
    // deterministic down-crossings inside the interval
    if (lb_now < lower) {
      const double s =
          lambda_bar_down_crossing(reconstruct_start(state, params, dt), params,
                                   lower, dt);
      res.exited = true;
      res.t = t_seg + s;
      res.lambda_at_stop = lower;
      return res;
    }
    if (cfg.trap && lb_before > trap_upper && lb_now <= trap_upper) {
      const double s =
          lambda_bar_down_crossing(reconstruct_start(state, params, dt), params,
                                   trap_upper, dt);
      res.trapped = true;
      res.t = t_seg + s;
      res.lambda_at_stop = trap_upper;
      return res;
    }
    if (t_next >= cfg.horizon) {
      res.t = cfg.horizon;
      res.lambda_at_stop = lb_now;
      return res;
    }
    if (rng.uniform01() * big <= state.total_rate) {
      int chosen = static_cast<int>(state.u.size()) - 1;
      {
        const double target = rng.uniform01() * state.total_rate;
        double acc = 0.0;
        for (std::size_t i = 0; i < state.u.size(); ++i) {
          acc += params.lambda(state.u[i]);
          if (target <= acc) {
            chosen = static_cast<int>(i);
            break;
          }
        }
      }
      engine::apply_spike(state, chosen, params);
      ++events;
      const double lb_post = state.total_rate / n;
      if (lb_post < lower || lb_post > upper) {
        res.exited = true;
        res.t = state.t;
        res.lambda_at_stop = lb_post;
        return res;
      }
      if (check_trap(lb_post)) {
        res.trapped = true;
        res.t = state.t;
        res.lambda_at_stop = lb_post;
        return res;
      }
    }
  }
}

}  // namespace

// potentials at the start of the last flow interval (inverse of the decay)
static std::vector<double> reconstruct_start_impl(
    const engine::SystemState& state, const ModelParams& params, double dt) {
  std::vector<double> u = state.u;
  const double back = std::exp(params.alpha * dt);
  for (double& ui : u) ui *= back;
  return u;
}

namespace {
std::vector<double> reconstruct_start(const engine::SystemState& state,
                                      const ModelParams& params, double dt) {
  return reconstruct_start_impl(state, params, dt);
}
}  // namespace

ExitSample exit_time(const DomainSpec& domain, std::vector<double> init,
                     const ModelParams& params, CounterRng rng,
                     std::uint64_t event_cap) {
  ExitRunConfig cfg;
  cfg.event_cap = event_cap;
  const std::uint64_t seed = rng.key();
  const auto res = run_until_exit(domain, std::move(init), params, rng, cfg);
  ExitSample s;
  s.tau = res.t;
  s.seed = seed;
  s.lambda_at_exit = res.lambda_at_stop;
  s.truncated = res.truncated;
  return s;
}

std::optional<ExitSample> exit_before(const DomainSpec& domain,
                                      std::vector<double> init,
                                      const ModelParams& params,
                                      CounterRng rng, double horizon,
                                      std::uint64_t event_cap) {
  ExitRunConfig cfg;
  cfg.event_cap = event_cap;
  cfg.horizon = horizon;
  const std::uint64_t seed = rng.key();
  const auto res = run_until_exit(domain, std::move(init), params, rng, cfg);
  if (!res.exited) return std::nullopt;
  ExitSample s;
  s.tau = res.t;
  s.seed = seed;
  s.lambda_at_exit = res.lambda_at_stop;
  s.truncated = res.truncated;
  return s;
}

ExitEnsembleReport exit_ensemble(const DomainSpec& domain,
                                 const std::vector<std::vector<double>>& inits,
                                 const ModelParams& params, int replicas,
                                 CounterRng rng, std::uint64_t event_cap,
                                 int threads) {
  if (inits.empty())
    throw std::invalid_argument("exit_ensemble: non-empty init design");
  if (replicas < 100)
    throw std::invalid_argument("exit_ensemble: replicas >= 100 required");
  ExitEnsembleReport rep;
  const std::size_t total = inits.size() * static_cast<std::size_t>(replicas);
  rep.samples.resize(total);
  rep.init_id.resize(total);
  parallel_for(total, threads, [&](std::size_t idx) {
    const std::size_t which = idx / replicas;
    CounterRng rr(derive_key(rng.key(), {which, idx % replicas, stream::misc}));
    rep.samples[idx] =
        exit_time(domain, inits[which], params, rr, event_cap);
    rep.init_id[idx] = static_cast<int>(which);
  });
  for (const auto& s : rep.samples)
    if (s.truncated) rep.partial = true;

  std::vector<double> pooled;
  pooled.reserve(total);
  rep.init_means.assign(inits.size(), 0.0);
  std::vector<std::size_t> counts(inits.size(), 0);
  for (std::size_t i = 0; i < total; ++i) {
    pooled.push_back(rep.samples[i].tau);
    rep.init_means[rep.init_id[i]] += rep.samples[i].tau;
    ++counts[rep.init_id[i]];
  }
  for (std::size_t j = 0; j < inits.size(); ++j)
    rep.init_means[j] /= static_cast<double>(counts[j]);
  const auto ms = stats::mean_se(pooled);
  rep.mean = ms.mean;
  rep.se = ms.se;

  if (rep.mean > 0.0) {
    std::vector<double> rescaled(pooled);
    for (double& x : rescaled) x /= rep.mean;
    rep.ks = stats::ks_vs_exponential(rescaled, 1.0);
    // leave-one-out variant quantifies the rescaling bias
    std::vector<double> loo(pooled.size());
    const double sum = ms.mean * static_cast<double>(pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      const double m_loo =
          (sum - pooled[i]) / static_cast<double>(pooled.size() - 1);
      loo[i] = m_loo > 0.0 ? pooled[i] / m_loo : 0.0;
    }
    rep.ks_loo = stats::ks_vs_exponential(loo, 1.0);
    std::sort(rescaled.begin(), rescaled.end());
    const std::size_t stride = std::max<std::size_t>(1, rescaled.size() / 512);
    for (std::size_t i = 0; i < rescaled.size(); i += stride) {
      const double f_hat =
          (static_cast<double>(i) + 1.0) / static_cast<double>(rescaled.size());
      rep.sup_cdf_curve.emplace_back(
          rescaled[i], std::fabs(f_hat - (1.0 - std::exp(-rescaled[i]))));
    }
  }
  for (std::size_t a = 0; a < inits.size(); ++a)
    for (std::size_t b = 0; b < inits.size(); ++b)
      if (a != b && rep.init_means[b] > 0.0)
        rep.max_ratio_minus_1 =
            std::max(rep.max_ratio_minus_1,
                     std::fabs(rep.init_means[a] / rep.init_means[b] - 1.0));
  return rep;
}

EpsReport estimate_eps(const DomainSpec& domain, const DomainSpec& trap,
                       double s1, double s2,
                       const std::vector<std::vector<double>>& inits_trap,
                       const std::vector<std::vector<double>>& inits_domain,
                       const std::vector<std::pair<std::vector<double>,
                                                   std::vector<double>>>&
                           coupling_pairs,
                       const ModelParams& params, int replicas,
                       CounterRng rng, int threads) {
  if (!(s1 >= s2) || !(s2 > 0.0))
    throw std::invalid_argument("estimate_eps: requires s1 >= s2 > 0");
  if (inits_trap.empty() || inits_domain.empty() || coupling_pairs.empty())
    throw std::invalid_argument("estimate_eps: empty design");
  if (replicas < 1)
    throw std::invalid_argument("estimate_eps: replicas >= 1 required");
  EpsReport rep;
  rep.s1 = s1;
  rep.s2 = s2;

  auto max_estimate = [&](std::size_t designs,
                          const std::function<bool(std::size_t, CounterRng)>&
                              trial, std::uint64_t salt) {
    EpsEstimate best;
    best.phat = -1.0;
    for (std::size_t d = 0; d < designs; ++d) {
      std::vector<char> hits(replicas, 0);
      parallel_for(static_cast<std::size_t>(replicas), threads,
                   [&](std::size_t r) {
                     CounterRng rr(derive_key(rng.key(), {salt, d, r}));
                     hits[r] = trial(d, rr) ? 1 : 0;
                   });
      std::size_t k = 0;
      for (char c : hits) k += c;
      const auto ci = stats::wilson(k, static_cast<std::size_t>(replicas));
      if (ci.phat > best.phat) {
        best.phat = ci.phat;
        best.ci = ci;
        best.worst_init = static_cast<int>(d);
      }
    }
    return best;
  };

  // eps1: early exit from the domain, starting inside the trap
  rep.eps1 = max_estimate(
      inits_trap.size(),
      [&](std::size_t d, CounterRng rr) {
        return exit_before(domain, inits_trap[d], params, rr, s1).has_value();
      },
      0xE1);

  // eps2: from anywhere in the domain, neither exit nor trap entry by s2
  rep.eps2 = max_estimate(
      inits_domain.size(),
      [&](std::size_t d, CounterRng rr) {
        ExitRunConfig cfg;
        cfg.horizon = s2;
        cfg.trap = &trap;
        const auto res =
            run_until_exit(domain, inits_domain[d], params, rr, cfg);
        return !res.exited && !res.trapped;
      },
      0xE2);

  // eps4: synchronous coupling of two trap states not merged by s1
  rep.eps4 = max_estimate(
      coupling_pairs.size(),
      [&](std::size_t d, CounterRng rr) {
        const auto diag = engine::couple_synchronous(
            coupling_pairs[d].first, coupling_pairs[d].second, params, s1,
            0.0, rr);
        return !(diag.coalescence_time && *diag.coalescence_time <= s1);
      },
      0xE4);

  rep.eps3 = 2.0 * rep.eps1.phat + rep.eps4.phat;
  rep.eps3_upper = 2.0 * rep.eps1.ci.hi + rep.eps4.ci.hi;
  rep.design_note = std::to_string(inits_trap.size()) + " trap inits, " +
                    std::to_string(inits_domain.size()) + " domain inits, " +
                    std::to_string(coupling_pairs.size()) + " coupling pairs";
  return rep;
}

BetaResult calibrate_beta_from_samples(const std::vector<double>& taus) {
  if (taus.empty())
    throw std::invalid_argument("calibrate_beta: empty sample");
  std::vector<double> sorted(taus);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  BetaResult best;
  double best_gap = 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    // survival just past sorted[i]
    std::size_t above = n - i - 1;
    while (i + 1 < n && sorted[i + 1] == sorted[i]) {
      ++i;
      above = n - i - 1;
    }
    const double surv = static_cast<double>(above) / static_cast<double>(n);
    if (surv >= 0.3 && surv <= 0.7 && std::fabs(surv - 0.5) < best_gap) {
      best_gap = std::fabs(surv - 0.5);
      best.beta = sorted[i];
      best.survival = surv;
      best.ci = stats::wilson(above, n);
    }
  }
  if (best_gap > 1.0)
    throw calibration_error(
        "calibrate_beta: no time with survival estimate inside [0.3, 0.7]");
  return best;
}

BetaResult calibrate_beta(const std::vector<double>& x0,
                          const DomainSpec& domain, const ModelParams& params,
                          int replicas, CounterRng rng,
                          std::uint64_t event_cap, int threads) {
  if (replicas < 10)
    throw std::invalid_argument("calibrate_beta: replicas >= 10 required");
  std::vector<double> taus(replicas);
  std::vector<char> trunc(replicas, 0);
  parallel_for(static_cast<std::size_t>(replicas), threads, [&](std::size_t r) {
    CounterRng rr(derive_key(rng.key(), {0xBE7A, r}));
    const auto s = exit_time(domain, x0, params, rr, event_cap);
    taus[r] = s.tau;
    trunc[r] = s.truncated ? 1 : 0;
  });
  double min_trunc = std::numeric_limits<double>::infinity();
  for (int r = 0; r < replicas; ++r)
    if (trunc[r]) min_trunc = std::min(min_trunc, taus[r]);
  // truncated runs are right-censored; candidates below the first censoring
  // time keep exact survival estimates
  std::vector<double> usable;
  for (int r = 0; r < replicas; ++r)
    if (taus[r] < min_trunc || !trunc[r]) usable.push_back(taus[r]);
  const auto res = calibrate_beta_from_samples(usable);
  if (res.beta >= min_trunc)
    throw calibration_error(
        "calibrate_beta: calibrated time not resolvable under truncation");
  return res;
}

}  // namespace metaspike::metastab
