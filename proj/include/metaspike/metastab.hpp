#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "metaspike/model.hpp"
#include "metaspike/rng.hpp"
#include "metaspike/stats.hpp"

namespace metaspike::metastab {

// Exit domain in terms of the mean rate lambda_bar = Lambda^N / N: either
// the level set {lambda_bar >= gamma} or the band
// {p* - delta <= lambda_bar <= p* + delta}.
struct DomainSpec {
  enum class Kind { level_set, band };
  Kind kind = Kind::level_set;
  double gamma = 0.0;   // level-set threshold
  double p_star = 0.0;  // band center
  double delta = 0.0;   // band half-width

  double lower_edge() const {
    return kind == Kind::level_set ? gamma : p_star - delta;
  }
  double upper_edge() const {
    return kind == Kind::level_set
               ? std::numeric_limits<double>::infinity()
               : p_star + delta;
  }
  bool contains(double lambda_bar) const {
    return lambda_bar >= lower_edge() && lambda_bar <= upper_edge();
  }

  static DomainSpec level_set(double gamma);
  static DomainSpec band(double p_star, double delta);
};

struct ExitSample {
  double tau = 0.0;
  std::uint64_t seed = 0;
  double lambda_at_exit = 0.0;
  bool truncated = false;
};

// First time lambda_bar leaves the domain.  Checked after every event and,
// between events, at the closed-form down-crossing of the lower edge along
// the deterministic decay.  Requires init inside the domain.
ExitSample exit_time(const DomainSpec& domain, std::vector<double> init,
                     const ModelParams& params, CounterRng rng,
                     std::uint64_t event_cap = UINT64_MAX);

// exit_time limited to [0, horizon]; empty when no exit happened in time.
std::optional<ExitSample> exit_before(const DomainSpec& domain,
                                      std::vector<double> init,
                                      const ModelParams& params,
                                      CounterRng rng, double horizon,
                                      std::uint64_t event_cap = UINT64_MAX);

struct ExitEnsembleReport {
  std::vector<ExitSample> samples;
  std::vector<int> init_id;
  double mean = 0.0, se = 0.0;  // pooled raw exit times
  std::vector<double> init_means;
  double ks = 0.0;      // pooled rescaled sample vs Exp(1)
  double ks_loo = 0.0;  // leave-one-out rescaling variant
  double max_ratio_minus_1 = 0.0;
  std::vector<std::pair<double, double>> sup_cdf_curve;  // (t, |F_hat - F|)
  bool partial = false;
};

// Per-init means, pooled rescaled KS against Exp(1), mean-ratio matrix
// extremes.  Requires replicas >= 100 per init.
ExitEnsembleReport exit_ensemble(const DomainSpec& domain,
                                 const std::vector<std::vector<double>>& inits,
                                 const ModelParams& params, int replicas,
                                 CounterRng rng,
                                 std::uint64_t event_cap = UINT64_MAX,
                                 int threads = 1);

struct EpsEstimate {
  double phat = 0.0;
  stats::WilsonCi ci;
  int worst_init = 0;  // design index attaining the max
};

struct EpsReport {
  EpsEstimate eps1;  // sup_{x in K} P(exit <= s1)
  EpsEstimate eps2;  // sup_{x in D} P(exit and trap-entry both later than s2)
  EpsEstimate eps4;  // sup over pairs of P(copies differ somewhere >= s1)
  double eps3 = 0.0; // 2 eps1 + eps4
  double eps3_upper = 0.0;  // same formula on the CI upper bounds
  double s1 = 0.0, s2 = 0.0;
  double beta = std::numeric_limits<double>::quiet_NaN();
  std::string design_note;
};

// Empirical counterparts of the exit-framework constants over an explicit
// initial-state design (suprema over state sets are not estimable; the
// design max with confidence bounds is reported instead).
EpsReport estimate_eps(const DomainSpec& domain, const DomainSpec& trap,
                       double s1, double s2,
                       const std::vector<std::vector<double>>& inits_trap,
                       const std::vector<std::vector<double>>& inits_domain,
                       const std::vector<std::pair<std::vector<double>,
                                                   std::vector<double>>>&
                           coupling_pairs,
                       const ModelParams& params, int replicas,
                       CounterRng rng, int threads = 1);

struct calibration_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BetaResult {
  double beta = 0.0;
  double survival = 0.0;
  stats::WilsonCi ci;
};

// beta with empirical survival estimate inside [0.3, 0.7] (inset from the
// theoretical [1/4, 3/4] to absorb Monte Carlo error); throws
// calibration_error when the survival curve jumps across the bracket.
BetaResult calibrate_beta_from_samples(const std::vector<double>& taus);
BetaResult calibrate_beta(const std::vector<double>& x0,
                          const DomainSpec& domain, const ModelParams& params,
                          int replicas, CounterRng rng,
                          std::uint64_t event_cap = UINT64_MAX,
                          int threads = 1);

}  // namespace metaspike::metastab
