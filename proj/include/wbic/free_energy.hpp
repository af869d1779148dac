#ifndef WBIC_FREE_ENERGY_HPP
#define WBIC_FREE_ENERGY_HPP

#include <functional>
#include <span>
#include <vector>

#include "wbic/mcmc.hpp"

namespace wbic {

// Inverse-temperature ladder 0 = beta_0 < ... < beta_J = 1.
struct TemperatureSchedule {
  std::vector<double> betas;

  // beta_j = (j/J)^exponent; rungs concentrate near beta = 0 where the
  // integrand varies fastest.
  static TemperatureSchedule power(int rungs, double exponent = 5.0);

  int rungs() const { return static_cast<int>(betas.size()) - 1; }
  void validate() const;
};

struct FreeEnergyEstimate {
  double value = 0.0;               // F_hat = -sum of rung terms
  double mcse = 0.0;                // propagated from per-rung batch means
  std::vector<double> rung_terms;   // log E^{beta_{j-1}}[exp(-n dbeta_j L_n)]
  std::vector<double> rung_mcse;
  std::vector<double> rung_ess;     // importance-weight ESS per rung
  TemperatureSchedule schedule;
  std::int64_t total_steps = 0;
};

// All-temperatures (stepping-stone) estimate of the Bayes free energy. The
// beta = 0 rung samples the prior directly; every other rung runs one chain
// with a seed derived from the config seed and the rung index.
FreeEnergyEstimate stepping_stone(const Model& model, const Dataset& data,
                                  const TemperatureSchedule& schedule,
                                  const ChainConfig& config);

struct CurvePoint {
  double beta = 0.0;
  double mean = 0.0;  // E^beta[n L_n]
  double mcse = 0.0;
};

// One chain per beta; the curve feeds the beta* solver and the RLCT
// regression estimator.
std::vector<CurvePoint> expected_nll_curve(const Model& model, const Dataset& data,
                                           std::span<const double> betas,
                                           const ChainConfig& config);

struct OptimalBeta {
  double beta_star = 0.0;
  double beta_lo = 0.0;   // bracket at termination
  double beta_hi = 0.0;
  double beta_star_times_log_n = 0.0;  // Corollary-2 diagnostic, -> 1
  bool at_boundary = false;            // f_hat matched E^1[n L_n] within noise
  int evaluations = 0;
};

// Bisects E^beta[n L_n] = f_hat over beta in (0, 1), exploiting monotonicity.
// Stops when the bracket is narrower than tol or the Monte Carlo noise band
// of the current evaluation contains the root. Each evaluation is a fresh
// chain whose seed is derived from the beta value, so the answer does not
// depend on the bracketing path.
OptimalBeta optimal_beta(const Model& model, const Dataset& data, double f_hat,
                         const ChainConfig& config, double tol);

// Same solver against the conjugate closed-form curve (no MCMC).
OptimalBeta optimal_beta_closed_form(const Model& model, const Dataset& data, double f_hat,
                                     double tol);

// Shared bisection core; eval must return E^beta[n L_n] with its mcse.
OptimalBeta optimal_beta_solve(const std::function<Expectation(double)>& eval, double f_hat,
                               double tol, std::int64_t n);

}  // namespace wbic

#endif
