#ifndef WBIC_MCMC_HPP
#define WBIC_MCMC_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wbic/model.hpp"

namespace wbic {

// Tempered posterior target, density proportional to exp(-beta n L_n(w)) phi(w).
struct TemperedTarget {
  const Model* model = nullptr;
  const Dataset* data = nullptr;
  double beta = 1.0;

  TemperedTarget(const Model& m, const Dataset& d, double b);
};

struct ChainConfig {
  std::int64_t burn_in = 20000;
  std::int64_t thin = 100;
  std::int64_t draws = 2000;          // retained draw count R
  double step_std_init = 0.0012;      // isotropic proposal std
  double target_acceptance = 0.4;
  bool adapt = true;                  // Robbins-Monro step tuning during burn-in
  std::uint64_t seed = 0;
  std::optional<ParameterVector> init;  // nullopt: one draw from the prior

  void validate() const;
};

struct Chain {
  double beta = 1.0;
  int dim = 0;
  std::int64_t data_n = 0;            // sample count of the dataset the chain targets
  std::vector<double> draws;          // R x dim, row-major
  std::vector<double> nll;            // cached n L_n(w_r), length R
  double acceptance_rate = 0.0;       // over the post-burn-in phase
  double step_std_final = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t model_fingerprint = 0;
  std::uint64_t data_fingerprint = 0;

  std::int64_t n_draws() const { return static_cast<std::int64_t>(nll.size()); }
  std::span<const double> draw(std::int64_t r) const {
    return {draws.data() + r * dim, static_cast<std::size_t>(dim)};
  }
};

// Random-walk Metropolis with isotropic normal proposals. Deterministic given
// the config seed. Step std is tuned during burn-in when adapt is set and
// frozen for the retention phase.
Chain run_chain(const TemperedTarget& target, const ChainConfig& config);

// n_chains independent chains with per-chain derived seeds.
std::vector<Chain> run_chains(const TemperedTarget& target, const ChainConfig& config,
                              int n_chains);

// Concatenates retained draws; acceptance rate and step std are averaged.
// Per-chain diagnostics stay with the inputs.
Chain pool_chains(std::span<const Chain> chains);

struct Expectation {
  double mean = 0.0;
  double mcse = 0.0;
};

// (1/R) sum_r g(w_r) with a batch-means standard error.
Expectation posterior_expectation(const Chain& chain,
                                  const std::function<double(std::span<const double>)>& g);

// Initial-positive-sequence autocorrelation ESS; in (0, length], constant
// input maps to length.
double effective_sample_size(std::span<const double> values);

}  // namespace wbic

#endif
