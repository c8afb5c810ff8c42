#include "metaspike/engine.hpp"

#include <cmath>

#include "metaspike/numerics.hpp"

namespace metaspike::engine {

namespace {

// Fused decay + rate accumulation; one pass over the potentials.
double decay_and_total(std::vector<double>& u, double factor,
                       const ModelParams& p) {
  double tot = 0.0;
  if (p.rate.is_piecewise_linear()) {
    const double k = p.k(), ls = p.lambda_star();
    for (double& ui : u) {
      ui *= factor;
      tot += std::min(k * ui, ls);
    }
  } else {
    for (double& ui : u) {
      ui *= factor;
      tot += p.rate(ui);
    }
  }
  return tot;
}

int pick_neuron(const std::vector<double>& u, const ModelParams& p,
                double total, CounterRng& rng) {
  const double target = rng.uniform01() * total;
  double acc = 0.0;
  const int n = static_cast<int>(u.size());
  for (int i = 0; i < n; ++i) {
    acc += p.lambda(u[i]);
    if (target <= acc) return i;
  }
  return n - 1;  // rounding fallback
}

}  // namespace

double recompute_total_rate(SystemState& state, const ModelParams& params) {
  state.total_rate = decay_and_total(state.u, 1.0, params);
  return state.total_rate;
}

SystemState make_state(std::vector<double> u, const ModelParams& params) {
  for (double ui : u)
    if (!(ui >= 0.0)) throw guard_error("state: potentials must be >= 0");
  SystemState s;
  s.u = std::move(u);
  recompute_total_rate(s, params);
  return s;
}

void flow(SystemState& state, double dt, const ModelParams& params) {
  if (dt < 0.0) throw guard_error("flow: dt >= 0 required");
  if (dt == 0.0) return;
  state.total_rate =
      decay_and_total(state.u, std::exp(-params.alpha * dt), params);
  state.t += dt;
}

void apply_spike(SystemState& state, int i, const ModelParams& params) {
  const int n = static_cast<int>(state.u.size());
  const double bump = params.h / static_cast<double>(n);
  for (int j = 0; j < n; ++j)
    if (j != i) state.u[j] += bump;
  state.u[i] = 0.0;
  state.total_rate = decay_and_total(state.u, 1.0, params);
}

std::optional<SpikeEvent> step_thinning(SystemState& state,
                                        const ModelParams& params,
                                        CounterRng& rng, double t_max) {
  const double big =
      static_cast<double>(state.u.size()) * params.lambda_star();
  while (state.t < t_max) {
    const double dt = rng.exponential(big);
    if (state.t + dt >= t_max) {
      flow(state, t_max - state.t, params);
      return std::nullopt;
    }
    flow(state, dt, params);
    if (rng.uniform01() * big <= state.total_rate) {
      const int i = pick_neuron(state.u, params, state.total_rate, rng);
      apply_spike(state, i, params);
      return SpikeEvent{state.t, i};
    }
  }
  return std::nullopt;
}

SimResult simulate(std::vector<double> u0, const ModelParams& params,
                   double horizon, double obs_dt, CounterRng rng,
                   std::uint64_t event_cap) {
  SimResult out;
  SystemState state = make_state(std::move(u0), params);
  const double n = static_cast<double>(state.u.size());
  std::uint64_t next_obs = 0;
  auto mean_potential = [&] {
    double s = 0.0;
    for (double ui : state.u) s += ui;
    return s / n;
  };
  auto record_due = [&](double up_to) {
    while (obs_dt > 0.0) {
      const double tgrid = static_cast<double>(next_obs) * obs_dt;
      if (tgrid > up_to || tgrid > horizon) break;
      if (tgrid > state.t) flow(state, tgrid - state.t, params);
      out.trajectory.push_back(
          {tgrid, state.total_rate / n, mean_potential()});
      ++next_obs;
    }
  };
  const double big = n * params.lambda_star();
  while (state.t < horizon) {
    if (out.cap.events >= event_cap) {
      out.cap.truncated = true;
      break;
    }
    const double dt = rng.exponential(big);
    const double t_c = state.t + dt;
    record_due(std::min(t_c, horizon));
    if (t_c >= horizon) {
      if (horizon > state.t) flow(state, horizon - state.t, params);
      break;
    }
    if (t_c > state.t) flow(state, t_c - state.t, params);
    if (rng.uniform01() * big <= state.total_rate) {
      const int i = pick_neuron(state.u, params, state.total_rate, rng);
      apply_spike(state, i, params);
      out.events.push_back({state.t, i});
      ++out.cap.events;
    }
  }
  record_due(horizon);
  out.final_state = std::move(state);
  return out;
}

IntegratedRate residual_integrated_rate(double u, const ModelParams& params) {
  if (u < 0.0) throw std::domain_error("residual_integrated_rate: u < 0");
  const double alpha = params.alpha;
  if (params.rate.is_piecewise_linear()) {
    const double k = params.k(), ls = params.lambda_star();
    if (u <= 0.0) return {0.0, true};
    if (k * u <= ls) return {k * u / alpha, true};
    return {(ls / alpha) * (std::log(k * u / ls) + 1.0), true};
  }
  // generic: I(u) = (1/alpha) int_0^u lambda(v)/v dv
  if (u <= 0.0) return {0.0, false};
  const double lip = params.rate.lip();
  auto g = [&](double v) { return v <= 0.0 ? lip : params.lambda(v) / v; };
  return {num::adaptive_simpson(g, 0.0, u, 1e-12 * std::max(1.0, u)) / alpha,
          false};
}

namespace {

// int_0^tau Lambda(s) ds along pure decay = sum_i [I(u_i) - I(u_i e^{-a tau})].
double integrated_rate_to(const std::vector<double>& u,
                          const ModelParams& params, double tau) {
  const double decay = std::exp(-params.alpha * tau);
  double acc = 0.0;
  for (double ui : u)
    acc += residual_integrated_rate(ui, params).value -
           residual_integrated_rate(ui * decay, params).value;
  return acc;
}

}  // namespace

std::optional<double> next_spike_time_inversion(const SystemState& state,
                                                const ModelParams& params,
                                                double e_mark) {
  if (!params.rate.is_piecewise_linear())
    throw unsupported_rate_error(
        "next_spike_time_inversion: piecewise-linear rate required");
  double total = 0.0;
  for (double ui : state.u)
    total += residual_integrated_rate(ui, params).value;
  if (!(e_mark < total)) return std::nullopt;
  double hi = 1.0 / params.alpha;
  while (integrated_rate_to(state.u, params, hi) < e_mark) hi *= 2.0;
  double lo = 0.0;
  const double tol = 1e-12 * std::max(e_mark, 1.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = integrated_rate_to(state.u, params, mid) - e_mark;
    if (std::fabs(v) <= tol) return mid;
    (v < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ExtinctionResult simulate_until_extinction(std::vector<double> u0,
                                           const ModelParams& params,
                                           CounterRng rng,
                                           std::uint64_t event_cap) {
  if (!params.rate.is_piecewise_linear())
    throw unsupported_rate_error(
        "simulate_until_extinction: piecewise-linear rate required");
  ExtinctionResult out;
  SystemState state = make_state(std::move(u0), params);
  while (true) {
    if (out.cap.events >= event_cap) {
      out.cap.truncated = true;
      out.last_spike_time = state.t;
      break;
    }
    const double e_mark = rng.exponential();
    const auto tau = next_spike_time_inversion(state, params, e_mark);
    if (!tau) {
      // mark exceeds the whole remaining integrated rate: silent forever
      break;
    }
    flow(state, *tau, params);
    const int i = pick_neuron(state.u, params, state.total_rate, rng);
    apply_spike(state, i, params);
    out.events.push_back({state.t, i});
    out.last_spike_time = state.t;
    ++out.cap.events;
  }
  return out;
}

double AuxParams::m(double z) const {
  const double inv_n = 1.0 / static_cast<double>(n);
  return z +
         kh * inv_n * std::max(0.0, 1.0 - z / rate_near_star - inv_n) -
         lambda_star * inv_n;
}

AuxParams AuxParams::make(const ModelParams& params) {
  AuxParams a;
  a.n = params.n;
  a.r = params.r();
  a.kh = params.k() * params.h;
  a.lambda_star = params.lambda_star();
  const double inv_n = 1.0 / static_cast<double>(a.n);
  const double us = params.u_star();
  if (a.kh <= a.lambda_star)
    throw guard_error("aux: requires kh > lambda_star");
  if (!(us > params.h * inv_n))
    throw guard_error("aux: N too small (u_star <= h/N)");
  a.rate_near_star = params.lambda(us - params.h * inv_n);
  a.z_inf = (1.0 - a.lambda_star / a.kh) * params.lambda(us);
  a.z_n = (1.0 - a.lambda_star / a.kh - inv_n) * a.rate_near_star -
          a.lambda_star * inv_n;
  if (!(a.z_n > 0.0)) throw guard_error("aux: N too small (z_N <= 0)");
  // m_N must be positive and increasing on [0, z_N]
  const double slope = 1.0 - (a.kh * inv_n) / a.rate_near_star;
  if (!(slope > 0.0))
    throw guard_error("aux: N too small (m_N not increasing)");
  if (!(a.m(0.0) > 0.0))
    throw guard_error("aux: N too small (m_N(0) <= 0)");
  return a;
}

std::vector<AuxState> simulate_aux(const AuxParams& aux, double z0,
                                   double horizon, CounterRng& rng,
                                   std::uint64_t jump_cap) {
  if (!(z0 >= 0.0) || z0 > aux.z_n * (1.0 + 1e-12))
    throw guard_error("simulate_aux: z0 must lie in [0, z_N]");
  std::vector<AuxState> path;
  path.push_back({0.0, z0});
  double t = 0.0, z = z0;
  const double n = static_cast<double>(aux.n);
  std::uint64_t jumps = 0;
  while (z > 0.0 && jumps < jump_cap) {
    // next jump: rate N z e^{-r s}, integrated (N z / r)(1 - e^{-r s})
    const double q = aux.r * rng.exponential() / (n * z);
    if (q >= 1.0) break;  // no further jump, ever
    const double s = -std::log1p(-q) / aux.r;
    if (t + s >= horizon) break;
    t += s;
    z = aux.jump_target(z * std::exp(-aux.r * s));
    path.push_back({t, z});
    ++jumps;
  }
  path.push_back({horizon, z * std::exp(-aux.r * (horizon - t))});
  return path;
}

AuxExit aux_exit_time(const AuxParams& aux, double z0, double eta,
                      CounterRng& rng, std::uint64_t jump_cap,
                      double time_cap) {
  if (!(eta > 0.0)) throw guard_error("aux_exit_time: eta > 0 required");
  if (!(z0 >= 0.0) || z0 > aux.z_n * (1.0 + 1e-12))
    throw guard_error("aux_exit_time: z0 must lie in [0, z_N]");
  AuxExit out;
  if (z0 <= eta) return out;
  double t = 0.0, z = z0;
  const double n = static_cast<double>(aux.n);
  while (true) {
    const double s_cross = std::log(z / eta) / aux.r;
    const double q = aux.r * rng.exponential() / (n * z);
    const double s_jump =
        (q >= 1.0) ? std::numeric_limits<double>::infinity()
                   : -std::log1p(-q) / aux.r;
    if (s_cross <= s_jump) {
      out.time = t + s_cross;
      if (out.time > time_cap) {
        out.time = time_cap;
        out.truncated = true;
      }
      return out;
    }
    if (t + s_jump > time_cap) {
      out.time = time_cap;
      out.truncated = true;
      return out;
    }
    t += s_jump;
    z = aux.jump_target(z * std::exp(-aux.r * s_jump));
    ++out.jumps;
    if (z <= eta) {
      out.time = t;
      return out;
    }
    if (out.jumps >= jump_cap) {
      out.time = t;
      out.truncated = true;
      return out;
    }
  }
}

CouplingDiagnostics couple_u_z(std::vector<double> u0, double z0,
                               const ModelParams& params, double horizon,
                               CounterRng rng, std::uint64_t event_cap) {
  const AuxParams aux = AuxParams::make(params);
  CouplingDiagnostics diag;
  SystemState state = make_state(std::move(u0), params);
  const double n = static_cast<double>(state.u.size());
  if (z0 > std::min(state.total_rate / n, aux.z_n))
    throw guard_error("couple_u_z: requires Z(0) <= min(Lambda(0)/N, z_N)");
  double z = z0;
  double t_z = 0.0;  // time of last Z update
  const double big = n * params.lambda_star();
  diag.discrepancy.emplace_back(0.0, state.total_rate / n - z);
  while (state.t < horizon) {
    if (diag.cap.events >= event_cap) {
      diag.cap.truncated = true;
      break;
    }
    const double dt = rng.exponential(big);
    if (state.t + dt >= horizon) {
      flow(state, horizon - state.t, params);
      break;
    }
    flow(state, dt, params);
    if (rng.uniform01() * big <= state.total_rate) {
      const double lambda_pre = state.total_rate;
      const double z_pre = z * std::exp(-aux.r * (state.t - t_z));
      // the system spikes; Z rides along with probability N Z(t-)/Lambda(t-)
      const bool z_jumps = rng.uniform01() * lambda_pre <= n * z_pre;
      const int i = pick_neuron(state.u, params, lambda_pre, rng);
      apply_spike(state, i, params);
      z = z_jumps ? aux.jump_target(z_pre) : z_pre;
      t_z = state.t;
      const double gap = state.total_rate / n - z;
      if (gap < 0.0) ++diag.domination_violations;
      diag.discrepancy.emplace_back(state.t, gap);
      ++diag.cap.events;
    }
  }
  const double z_end = z * std::exp(-aux.r * (state.t - t_z));
  if (state.total_rate / n - z_end < 0.0) ++diag.domination_violations;
  diag.discrepancy.emplace_back(state.t, state.total_rate / n - z_end);
  return diag;
}

namespace {

// Min-heap of per-neuron Poisson(lambda_star) proposal clocks.  Every clock
// owns a counter-based stream, so the same marks drive both copies of a
// coupled pair, realizing the shared Poisson measures of the constructions.
class NeuronClocks {
 public:
  NeuronClocks(CounterRng root, int n, double lambda_star)
      : lambda_star_(lambda_star) {
    streams_.reserve(n);
    heap_.reserve(n);
    for (int i = 0; i < n; ++i) {
      streams_.push_back(root.split(static_cast<std::uint64_t>(i)));
      heap_.push_back({streams_.back().exponential(lambda_star_), i});
    }
    std::make_heap(heap_.begin(), heap_.end(), later);
  }

  struct Proposal {
    double t;
    int neuron;
    double mark;  // uniform on (0, lambda_star)
  };

  double next_time() const { return heap_.front().t; }

  Proposal pop() {
    std::pop_heap(heap_.begin(), heap_.end(), later);
    Entry e = heap_.back();
    heap_.pop_back();
    const double mark = streams_[e.neuron].uniform01() * lambda_star_;
    Proposal p{e.t, e.neuron, mark};
    e.t += streams_[e.neuron].exponential(lambda_star_);
    heap_.push_back(e);
    std::push_heap(heap_.begin(), heap_.end(), later);
    return p;
  }

 private:
  struct Entry {
    double t;
    int neuron;
  };
  static bool later(const Entry& a, const Entry& b) { return a.t > b.t; }
  std::vector<CounterRng> streams_;
  std::vector<Entry> heap_;
  double lambda_star_;
};

}  // namespace

CouplingDiagnostics couple_chaos(std::vector<double> u0,
                                 const ModelParams& params,
                                 const PathSample& z_path, double horizon,
                                 double obs_dt, CounterRng rng) {
  if (z_path.t.empty())
    throw guard_error("couple_chaos: mean-rate path z(t) required");
  const int n = static_cast<int>(u0.size());
  CouplingDiagnostics diag;
  SystemState sys = make_state(u0, params);
  std::vector<double> bar = u0;  // limit copies share the initial condition
  double t_bar = 0.0;
  NeuronClocks clocks(rng.split(stream::neuron), n, params.lambda_star());

  const double ls = params.lambda_star(), kk = params.k();
  const double bound_c = params.alpha + params.h * kk + ls;
  auto discrepancy_now = [&] {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::fabs(sys.u[i] - bar[i]);
    return s;
  };
  auto bound_at = [&](double t) {
    return params.h * (std::sqrt(ls * t) + 2.0 * t * ls) *
           std::exp(bound_c * t) * std::sqrt(static_cast<double>(n));
  };
  auto advance_bar = [&](double to) {
    for (double& ub : bar)
      ub = flow_affine(ub, t_bar, to, params.alpha, params.h, z_path);
    t_bar = to;
  };
  std::uint64_t next_obs = 0;
  auto record_due = [&](double up_to) {
    while (obs_dt > 0.0) {
      const double tgrid = static_cast<double>(next_obs) * obs_dt;
      if (tgrid > up_to || tgrid > horizon) break;
      if (tgrid > sys.t) flow(sys, tgrid - sys.t, params);
      advance_bar(tgrid);
      const double d = discrepancy_now();
      if (tgrid > 0.0 && d > bound_at(tgrid)) diag.bound_violated = true;
      diag.discrepancy.emplace_back(tgrid, d);
      ++next_obs;
    }
  };
  record_due(0.0);
  while (true) {
    const double t_c = clocks.next_time();
    record_due(std::min(t_c, horizon));
    if (t_c >= horizon) break;
    const auto prop = clocks.pop();
    flow(sys, prop.t - sys.t, params);
    advance_bar(prop.t);
    const bool spike_sys = prop.mark <= params.lambda(sys.u[prop.neuron]);
    const bool spike_bar = prop.mark <= params.lambda(bar[prop.neuron]);
    if (spike_sys) apply_spike(sys, prop.neuron, params);
    if (spike_bar) bar[prop.neuron] = 0.0;
    ++diag.cap.events;
  }
  if (horizon > sys.t) flow(sys, horizon - sys.t, params);
  advance_bar(horizon);
  if (diag.discrepancy.empty() || diag.discrepancy.back().first < horizon) {
    const double d = discrepancy_now();
    if (horizon > 0.0 && d > bound_at(horizon)) diag.bound_violated = true;
    diag.discrepancy.emplace_back(horizon, d);
  }
  diag.final_a = sys.u;
  diag.final_b = std::move(bar);
  return diag;
}

CouplingDiagnostics couple_synchronous(std::vector<double> u0,
                                       std::vector<double> v0,
                                       const ModelParams& params,
                                       double horizon, double obs_dt,
                                       CounterRng rng,
                                       std::uint64_t event_cap) {
  if (u0.size() != v0.size())
    throw guard_error("couple_synchronous: initial states must share N");
  const int n = static_cast<int>(u0.size());
  CouplingDiagnostics diag;
  SystemState a = make_state(std::move(u0), params);
  SystemState b = make_state(std::move(v0), params);
  NeuronClocks clocks(rng.split(stream::neuron), n, params.lambda_star());

  int n_equal = 0;
  for (int i = 0; i < n; ++i)
    if (a.u[i] == b.u[i]) ++n_equal;
  if (n_equal == n) diag.coalescence_time = 0.0;

  auto rate_gap = [&] {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      s += std::fabs(params.lambda(a.u[i]) - params.lambda(b.u[i]));
    return s;
  };
  // shared decay factor keeps equal coordinates bitwise equal
  auto flow_both = [&](double dt) {
    if (dt <= 0.0) return;
    const double f = std::exp(-params.alpha * dt);
    a.total_rate = decay_and_total(a.u, f, params);
    b.total_rate = decay_and_total(b.u, f, params);
    a.t += dt;
    b.t += dt;
  };
  std::uint64_t next_obs = 0;
  auto record_due = [&](double up_to) {
    while (obs_dt > 0.0) {
      const double tgrid = static_cast<double>(next_obs) * obs_dt;
      if (tgrid > up_to || tgrid > horizon) break;
      flow_both(tgrid - a.t);
      diag.discrepancy.emplace_back(tgrid, rate_gap());
      ++next_obs;
    }
  };
  record_due(0.0);
  while (true) {
    if (diag.cap.events >= event_cap) {
      diag.cap.truncated = true;
      break;
    }
    const double t_c = clocks.next_time();
    record_due(std::min(t_c, horizon));
    if (t_c >= horizon) break;
    const auto prop = clocks.pop();
    flow_both(prop.t - a.t);
    const int i = prop.neuron;
    const bool sa = prop.mark <= params.lambda(a.u[i]);
    const bool sb = prop.mark <= params.lambda(b.u[i]);
    if (!sa && !sb) continue;
    const bool was_equal = a.u[i] == b.u[i];
    if (sa) apply_spike(a, i, params);
    if (sb) apply_spike(b, i, params);
    ++diag.cap.events;
    if (sa && sb) {
      // synchronous: the pair lands on (0, 0); other pairs got equal bumps
      if (!was_equal) ++n_equal;
      if (n_equal == n && !diag.coalescence_time)
        diag.coalescence_time = a.t;
    } else {
      // asynchronous: bumps hit one copy only; recount
      n_equal = 0;
      for (int j = 0; j < n; ++j)
        if (a.u[j] == b.u[j]) ++n_equal;
      if (n_equal == n && !diag.coalescence_time)
        diag.coalescence_time = a.t;
    }
  }
  if (a.t < horizon && !diag.cap.truncated) flow_both(horizon - a.t);
  if (diag.discrepancy.empty() || diag.discrepancy.back().first < a.t)
    diag.discrepancy.emplace_back(a.t, rate_gap());
  diag.final_a = a.u;
  diag.final_b = b.u;
  return diag;
}

}  // namespace metaspike::engine
