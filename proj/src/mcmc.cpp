#include "wbic/mcmc.hpp"

#include <cmath>

#include "wbic/errors.hpp"
#include "wbic/numerics.hpp"

namespace wbic {

TemperedTarget::TemperedTarget(const Model& m, const Dataset& d, double b)
    : model(&m), data(&d), beta(b) {
  if (!(b > 0.0) || !std::isfinite(b))
    throw ConfigError("tempered target: beta must be positive and finite");
  if (d.n() < 1) throw ConfigError("tempered target: empty dataset");
}

void ChainConfig::validate() const {
  if (burn_in < 0) throw ConfigError("chain config: burn_in must be >= 0");
  if (thin < 1) throw ConfigError("chain config: thin must be >= 1");
  if (draws < 2) throw ConfigError("chain config: draws must be >= 2");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw ConfigError("chain config: target_acceptance must be in (0,1)");
  if (!(step_std_init > 0.0)) throw ConfigError("chain config: step_std_init must be > 0");
}

namespace {

struct WalkerState {
  ParameterVector w;
  double nll = 0.0;
  double log_prior = 0.0;
  double log_density(double beta) const { return -beta * nll + log_prior; }
};

}  // namespace

Chain run_chain(const TemperedTarget& target, const ChainConfig& config) {
  config.validate();
  const Model& model = *target.model;
  const Dataset& data = *target.data;
  const int d = model.dim();
  const double beta = target.beta;

  Rng rng = make_rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const NllEvaluator nll_of = model.make_nll_evaluator(data);

  WalkerState cur;
  if (config.init) {
    if (static_cast<int>(config.init->size()) != d)
      throw ConfigError("chain init: dimension mismatch");
    cur.w = *config.init;
  } else {
    cur.w = model.sample_prior(rng);
  }
  cur.nll = nll_of(cur.w);
  cur.log_prior = model.log_prior(cur.w);
  if (!std::isfinite(cur.log_density(beta)))
    throw InitError("chain init: target log density is not finite at the initial state");

  double log_step = std::log(config.step_std_init);
  ParameterVector prop(static_cast<std::size_t>(d));

  // One Metropolis step; returns 1 on acceptance. The proposal normals and the
  // acceptance uniform are always drawn, so the random stream does not depend
  // on intermediate values.
  const auto step_once = [&](double step_std) -> int {
    for (int j = 0; j < d; ++j) prop[static_cast<std::size_t>(j)] = cur.w[static_cast<std::size_t>(j)] + step_std * gauss(rng);
    const double u = unif(rng);
    const double lp = model.log_prior(prop);
    double log_alpha = -std::numeric_limits<double>::infinity();
    double prop_nll = std::numeric_limits<double>::quiet_NaN();
    if (lp > -std::numeric_limits<double>::infinity()) {
      prop_nll = nll_of(prop);
      const double ld = -beta * prop_nll + lp;
      if (std::isfinite(ld)) log_alpha = ld - cur.log_density(beta);
    }
    if (std::log(u) < log_alpha) {
      cur.w.swap(prop);
      cur.nll = prop_nll;
      cur.log_prior = lp;
      return 1;
    }
    return 0;
  };

  std::int64_t accepted_burn = 0;
  for (std::int64_t t = 1; t <= config.burn_in; ++t) {
    const int acc = step_once(std::exp(log_step));
    accepted_burn += acc;
    if (config.adapt)
      log_step += std::pow(static_cast<double>(t), -0.6) *
                  (static_cast<double>(acc) - config.target_acceptance);
  }
  if (config.burn_in > 0 && accepted_burn == 0)
    throw AdaptationError("chain: zero acceptance over the whole burn-in");

  const double step_final = std::exp(log_step);

  Chain chain;
  chain.beta = beta;
  chain.dim = d;
  chain.data_n = data.n();
  chain.seed = config.seed;
  chain.step_std_final = step_final;
  chain.model_fingerprint = model.fingerprint();
  chain.data_fingerprint = data.fingerprint();
  chain.draws.resize(static_cast<std::size_t>(config.draws) * d);
  chain.nll.resize(static_cast<std::size_t>(config.draws));

  std::int64_t accepted = 0;
  for (std::int64_t r = 0; r < config.draws; ++r) {
    for (std::int64_t s = 0; s < config.thin; ++s) accepted += step_once(step_final);
    for (int j = 0; j < d; ++j) chain.draws[static_cast<std::size_t>(r * d + j)] = cur.w[static_cast<std::size_t>(j)];
    chain.nll[static_cast<std::size_t>(r)] = cur.nll;
  }
  chain.acceptance_rate =
      static_cast<double>(accepted) / static_cast<double>(config.thin * config.draws);
  return chain;
}

std::vector<Chain> run_chains(const TemperedTarget& target, const ChainConfig& config,
                              int n_chains) {
  if (n_chains < 1) throw ConfigError("run_chains: n_chains must be >= 1");
  std::vector<Chain> chains(static_cast<std::size_t>(n_chains));
#pragma omp parallel for schedule(dynamic) if (n_chains > 1)
  for (int k = 0; k < n_chains; ++k) {
    ChainConfig cfg = config;
    cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(k));
    chains[static_cast<std::size_t>(k)] = run_chain(target, cfg);
  }
  return chains;
}

Chain pool_chains(std::span<const Chain> chains) {
  if (chains.empty()) throw ConfigError("pool_chains: no chains");
  Chain pooled = chains[0];
  for (std::size_t k = 1; k < chains.size(); ++k) {
    const Chain& c = chains[k];
    if (c.dim != pooled.dim || c.beta != pooled.beta ||
        c.model_fingerprint != pooled.model_fingerprint ||
        c.data_fingerprint != pooled.data_fingerprint)
      throw ContractError("pool_chains: chains target different posteriors");
    pooled.draws.insert(pooled.draws.end(), c.draws.begin(), c.draws.end());
    pooled.nll.insert(pooled.nll.end(), c.nll.begin(), c.nll.end());
    pooled.acceptance_rate += c.acceptance_rate;
    pooled.step_std_final += c.step_std_final;
  }
  pooled.acceptance_rate /= static_cast<double>(chains.size());
  pooled.step_std_final /= static_cast<double>(chains.size());
  return pooled;
}

Expectation posterior_expectation(const Chain& chain,
                                  const std::function<double(std::span<const double>)>& g) {
  const std::int64_t r = chain.n_draws();
  if (r < 1) throw ConfigError("posterior_expectation: empty chain");
  std::vector<double> values(static_cast<std::size_t>(r));
  for (std::int64_t i = 0; i < r; ++i) {
    const double v = g(chain.draw(i));
    if (!std::isfinite(v))
      throw NumericalError("posterior_expectation: non-finite value at draw " + std::to_string(i), i);
    values[static_cast<std::size_t>(i)] = v;
  }
  const MeanMcse mm = batch_means(values);
  return {mm.mean, mm.mcse};
}

double effective_sample_size(std::span<const double> values) {
  const std::int64_t n = static_cast<std::int64_t>(values.size());
  if (n < 10) throw ConfigError("effective_sample_size: need at least 10 values");
  const double mean = mean_of(values);
  double gamma0 = 0.0;
  for (double x : values) gamma0 += (x - mean) * (x - mean);
  gamma0 /= static_cast<double>(n);
  if (gamma0 == 0.0) return static_cast<double>(n);  // constant input

  const auto rho = [&](std::int64_t k) {
    double s = 0.0;
    for (std::int64_t i = 0; i + k < n; ++i) s += (values[static_cast<std::size_t>(i)] - mean) * (values[static_cast<std::size_t>(i + k)] - mean);
    return s / (static_cast<double>(n) * gamma0);
  };

  // Geyer initial positive sequence over lag pairs.
  double pair_sum = 0.0;
  for (std::int64_t m = 0; 2 * m + 1 < n; ++m) {
    const double g = rho(2 * m) + rho(2 * m + 1);
    if (g <= 0.0) break;
    pair_sum += g;
  }
  const double tau = 2.0 * pair_sum - 1.0;
  if (tau <= 0.0) return static_cast<double>(n);
  const double ess = static_cast<double>(n) / tau;
  return std::min(ess, static_cast<double>(n));
}

}  // namespace wbic
