#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "metaspike/model.hpp"
#include "metaspike/path.hpp"
#include "metaspike/rng.hpp"

namespace metaspike::engine {

struct SystemState {
  double t = 0.0;
  std::vector<double> u;      // membrane potentials, u[i] >= 0
  double total_rate = 0.0;    // cached Lambda^N = sum_i lambda(u[i])
};

struct SpikeEvent {
  double t;
  int neuron;  // 0-based index
};

// Result truncated by an event budget rather than finished.
struct Truncation {
  bool truncated = false;
  std::uint64_t events = 0;
};

double recompute_total_rate(SystemState& state, const ModelParams& params);
SystemState make_state(std::vector<double> u, const ModelParams& params);

// Deterministic leak over dt: u_i <- u_i * exp(-alpha dt); refreshes the
// cached total rate and advances time.
void flow(SystemState& state, double dt, const ModelParams& params);

// Spike of neuron i: reset u_i to 0, bump every other neuron by h/N.
void apply_spike(SystemState& state, int i, const ModelParams& params);

// One event by thinning against the constant-rate N*lambda_star clock.
// Advances the state either to the accepted spike or to t_max, whichever
// comes first; returns the spike when one happened.
std::optional<SpikeEvent> step_thinning(SystemState& state,
                                        const ModelParams& params,
                                        CounterRng& rng, double t_max);

struct TrajectoryPoint {
  double t;
  double lambda_bar;
  double mean_potential;
};

struct SimResult {
  std::vector<SpikeEvent> events;
  std::vector<TrajectoryPoint> trajectory;
  SystemState final_state;
  Truncation cap;
};

// Event log plus trajectory samples at obs_dt spacing (none when obs_dt <= 0).
SimResult simulate(std::vector<double> u0, const ModelParams& params,
                   double horizon, double obs_dt, CounterRng rng,
                   std::uint64_t event_cap = UINT64_MAX);

// I(u) = int_0^inf lambda(u e^{-alpha s}) ds.  Closed form for the
// piecewise-linear rate; adaptive quadrature (exact=false) otherwise.
struct IntegratedRate {
  double value;
  bool exact;
};
IntegratedRate residual_integrated_rate(double u, const ModelParams& params);

// Next spike time of the frozen-flow system from `state`, i.e. the tau >= 0
// solving int_0^tau Lambda(s) ds = e_mark along the deterministic decay.
// Empty when the total remaining mass int_0^inf is below e_mark.
std::optional<double> next_spike_time_inversion(const SystemState& state,
                                                const ModelParams& params,
                                                double e_mark);

struct ExtinctionResult {
  double last_spike_time = 0.0;
  std::vector<SpikeEvent> events;
  Truncation cap;
};

// Exact sampler of the last spiking time: after each spike compare a fresh
// Exp(1) mark with the total remaining integrated rate; while the mark is
// smaller, invert the integrated rate for the next spike time.
ExtinctionResult simulate_until_extinction(std::vector<double> u0,
                                           const ModelParams& params,
                                           CounterRng rng,
                                           std::uint64_t event_cap = 100000000ull);

// Auxiliary one-dimensional process dominated by Lambda^N/N.
struct AuxParams {
  int n = 0;
  double r = 0.0;                 // decay rate between jumps
  double z_n = 0.0;               // jump ceiling
  double z_inf = 0.0;             // (1 - lambda_star/(kh)) * lambda(u_star)
  double rate_near_star = 0.0;    // lambda(u_star - h/N)
  double kh = 0.0, lambda_star = 0.0;

  double m(double z) const;       // jump map m_N
  double jump_target(double z) const { return std::min(z_n, m(z)); }

  // Validity requires N > h/u_star, z_N > 0, m_N positive and increasing.
  // Throws guard_error otherwise.
  static AuxParams make(const ModelParams& params);
};

struct AuxState {
  double t;
  double z;
};

// Exact simulation on [0, horizon]; emits the initial point, every jump and
// the horizon endpoint.  Inter-jump times invert the decaying rate N z e^{-rs}
// in closed form.
std::vector<AuxState> simulate_aux(const AuxParams& aux, double z0,
                                   double horizon, CounterRng& rng,
                                   std::uint64_t jump_cap = UINT64_MAX);

struct AuxExit {
  double time = 0.0;
  bool truncated = false;
  std::uint64_t jumps = 0;
};

// First passage of the auxiliary process to the level eta (from above).
AuxExit aux_exit_time(const AuxParams& aux, double z0, double eta,
                      CounterRng& rng, std::uint64_t jump_cap,
                      double time_cap = std::numeric_limits<double>::infinity());

struct CouplingDiagnostics {
  std::vector<std::pair<double, double>> discrepancy;  // (t, value)
  std::optional<double> coalescence_time;
  long domination_violations = 0;
  bool bound_violated = false;  // chaos runs: pathwise check vs the mean bound
  std::vector<double> final_a, final_b;  // end-of-horizon states of both copies
  Truncation cap;
};

// Joint (U^N, Z^N) trajectory with Z jumping only at system spikes, accepted
// with probability N Z(t-)/Lambda(t-).  Asserts Z <= Lambda/N at every event
// and counts violations (expected count: zero).  Requires
// z0 <= min(Lambda(0)/N, z_N).
CouplingDiagnostics couple_u_z(std::vector<double> u0, double z0,
                               const ModelParams& params, double horizon,
                               CounterRng rng,
                               std::uint64_t event_cap = UINT64_MAX);

// Shared-noise coupling of the particle system with N independent copies of
// the limit process driven by the given mean-rate path z(t).  Discrepancy is
// sum_i |U_i - Ubar_i| sampled at obs_dt spacing; the bound indicator
// compares it against h (sqrt(lambda* t) + 2 t lambda*) e^{(alpha+hk+lambda*)t} sqrt(N).
CouplingDiagnostics couple_chaos(std::vector<double> u0,
                                 const ModelParams& params,
                                 const PathSample& z_path, double horizon,
                                 double obs_dt, CounterRng rng);

// Synchronous coupling of two copies of the particle system: one proposal
// clock and one uniform mark per candidate, shared by both systems, so pairs
// spike together whenever both rates exceed the mark.  Tracks
// sum_i |lambda(U_i) - lambda(V_i)| at obs_dt spacing and the first time the
// full states coincide.
CouplingDiagnostics couple_synchronous(std::vector<double> u0,
                                       std::vector<double> v0,
                                       const ModelParams& params,
                                       double horizon, double obs_dt,
                                       CounterRng rng,
                                       std::uint64_t event_cap = UINT64_MAX);

}  // namespace metaspike::engine
