#include "wbic/free_energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "wbic/errors.hpp"
#include "wbic/numerics.hpp"

namespace wbic {

TemperatureSchedule TemperatureSchedule::power(int rungs, double exponent) {
  if (rungs < 1) throw ConfigError("temperature schedule: need at least one rung");
  if (!(exponent > 0.0)) throw ConfigError("temperature schedule: exponent must be > 0");
  TemperatureSchedule s;
  s.betas.resize(static_cast<std::size_t>(rungs) + 1);
  for (int j = 0; j <= rungs; ++j)
    s.betas[static_cast<std::size_t>(j)] =
        std::pow(static_cast<double>(j) / static_cast<double>(rungs), exponent);
  s.betas.front() = 0.0;
  s.betas.back() = 1.0;
  return s;
}

void TemperatureSchedule::validate() const {
  if (betas.size() < 2) throw ConfigError("temperature schedule: need J >= 1");
  if (betas.front() != 0.0 || betas.back() != 1.0)
    throw ConfigError("temperature schedule: must start at 0 and end at 1");
  for (std::size_t j = 1; j < betas.size(); ++j)
    if (!(betas[j] > betas[j - 1]))
      throw ConfigError("temperature schedule: betas must be strictly increasing");
}

namespace {

struct RungStat {
  double term = 0.0;
  double mcse = 0.0;
  double ess = 0.0;
};

// log mean exp of the rung weights with a batch-means error propagated
// through the log (delta method on the stabilized scale).
RungStat rung_term(std::span<const double> nll, double dbeta) {
  std::vector<double> lw(nll.size());
  for (std::size_t i = 0; i < nll.size(); ++i) lw[i] = -dbeta * nll[i];
  const double m = *std::max_element(lw.begin(), lw.end());
  std::vector<double> u(lw.size());
  for (std::size_t i = 0; i < lw.size(); ++i) u[i] = std::exp(lw[i] - m);
  const MeanMcse mm = batch_means(u);
  RungStat out;
  out.term = m + std::log(mm.mean);
  out.mcse = mm.mean > 0.0 ? mm.mcse / mm.mean : 0.0;
  out.ess = weight_ess(lw);
  return out;
}

}  // namespace

FreeEnergyEstimate stepping_stone(const Model& model, const Dataset& data,
                                  const TemperatureSchedule& schedule,
                                  const ChainConfig& config) {
  schedule.validate();
  config.validate();
  const int rungs = schedule.rungs();
  const std::int64_t r = config.draws;

  FreeEnergyEstimate est;
  est.schedule = schedule;
  est.rung_terms.assign(static_cast<std::size_t>(rungs), 0.0);
  est.rung_mcse.assign(static_cast<std::size_t>(rungs), 0.0);
  est.rung_ess.assign(static_cast<std::size_t>(rungs), 0.0);

  std::string error;
  int degenerate_rung = 0;

#pragma omp parallel for schedule(dynamic) if (rungs > 1)
  for (int j = 1; j <= rungs; ++j) {
    try {
      const double beta_prev = schedule.betas[static_cast<std::size_t>(j - 1)];
      const double dbeta = schedule.betas[static_cast<std::size_t>(j)] - beta_prev;
      std::vector<double> nll;
      if (beta_prev == 0.0) {
        // Prior rung: exact i.i.d. draws, no MCMC.
        Rng rng = make_rng(derive_seed(config.seed, 0));
        const NllEvaluator nll_of = model.make_nll_evaluator(data);
        nll.resize(static_cast<std::size_t>(r));
        for (std::int64_t i = 0; i < r; ++i)
          nll[static_cast<std::size_t>(i)] = nll_of(model.sample_prior(rng));
      } else {
        ChainConfig cfg = config;
        cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(j - 1));
        const Chain chain = run_chain(TemperedTarget(model, data, beta_prev), cfg);
        nll = chain.nll;
      }
      const RungStat stat = rung_term(nll, dbeta);
      est.rung_terms[static_cast<std::size_t>(j - 1)] = stat.term;
      est.rung_mcse[static_cast<std::size_t>(j - 1)] = stat.mcse;
      est.rung_ess[static_cast<std::size_t>(j - 1)] = stat.ess;
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }

  if (!error.empty()) throw Error("stepping_stone: " + error);
  for (int j = 1; j <= rungs; ++j) {
    if (est.rung_ess[static_cast<std::size_t>(j - 1)] < 10.0) {
      degenerate_rung = j;
      break;
    }
  }
  if (degenerate_rung > 0)
    throw DegenerateRungError("stepping_stone: importance-weight ESS below 10 at rung " +
                                  std::to_string(degenerate_rung) +
                                  " (schedule too coarse)",
                              degenerate_rung);

  double value = 0.0, mcse_sq = 0.0;
  for (int j = 0; j < rungs; ++j) {
    value -= est.rung_terms[static_cast<std::size_t>(j)];
    mcse_sq += est.rung_mcse[static_cast<std::size_t>(j)] * est.rung_mcse[static_cast<std::size_t>(j)];
  }
  est.value = value;
  est.mcse = std::sqrt(mcse_sq);
  est.total_steps = static_cast<std::int64_t>(rungs - 1) * (config.burn_in + config.thin * config.draws) +
                    config.draws;
  return est;
}

std::vector<CurvePoint> expected_nll_curve(const Model& model, const Dataset& data,
                                           std::span<const double> betas,
                                           const ChainConfig& config) {
  if (betas.empty()) throw ConfigError("expected_nll_curve: no betas");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0)) throw ConfigError("expected_nll_curve: betas must be positive");
    if (i > 0 && !(betas[i] > betas[i - 1]))
      throw ConfigError("expected_nll_curve: betas must be increasing");
  }

  std::vector<CurvePoint> curve(betas.size());
  std::string error;
  const int count = static_cast<int>(betas.size());
#pragma omp parallel for schedule(dynamic) if (count > 1)
  for (int i = 0; i < count; ++i) {
    try {
      ChainConfig cfg = config;
      cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
      const Chain chain = run_chain(TemperedTarget(model, data, betas[static_cast<std::size_t>(i)]), cfg);
      const MeanMcse mm = batch_means(chain.nll);
      curve[static_cast<std::size_t>(i)] = {betas[static_cast<std::size_t>(i)], mm.mean, mm.mcse};
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw Error("expected_nll_curve: " + error);
  return curve;
}

OptimalBeta optimal_beta_solve(const std::function<Expectation(double)>& eval, double f_hat,
                               double tol, std::int64_t n) {
  if (!(tol > 0.0)) throw ConfigError("optimal_beta: tol must be > 0");
  if (n < 2) throw ConfigError("optimal_beta: need n >= 2");
  const double log_n = std::log(static_cast<double>(n));
  constexpr double kLeftEdge = 1e-6;

  OptimalBeta out;
  const auto finish = [&](double lo, double hi, bool boundary) {
    out.beta_lo = lo;
    out.beta_hi = hi;
    out.beta_star = boundary ? hi : 0.5 * (lo + hi);
    out.beta_star_times_log_n = out.beta_star * log_n;
    out.at_boundary = boundary;
    return out;
  };

  Expectation e_lo = eval(kLeftEdge);
  Expectation e_hi = eval(1.0);
  out.evaluations = 2;
  if (e_lo.mean == e_hi.mean && e_lo.mcse == 0.0 && e_hi.mcse == 0.0)
    throw DegenerateModelError("optimal_beta: expected nll curve is constant (L_n constant?)");

  const double r_hi = e_hi.mean - f_hat;
  if (std::abs(r_hi) <= 2.0 * e_hi.mcse || r_hi == 0.0) return finish(1.0, 1.0, true);
  if (r_hi > 0.0)
    throw BracketError("optimal_beta: f_hat lies below E^1[nL_n]; root not bracketed in (0,1)");
  const double r_lo = e_lo.mean - f_hat;
  if (r_lo < -2.0 * e_lo.mcse)
    throw BracketError("optimal_beta: f_hat lies above E^beta[nL_n] at the left edge");

  double lo = kLeftEdge, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Expectation e = eval(mid);
    ++out.evaluations;
    const double resid = e.mean - f_hat;
    if (std::abs(resid) <= 2.0 * e.mcse && e.mcse > 0.0) return finish(lo, hi, false);
    if (resid > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return finish(lo, hi, false);
}

OptimalBeta optimal_beta(const Model& model, const Dataset& data, double f_hat,
                         const ChainConfig& config, double tol) {
  config.validate();
  bool checked = false;
  const auto eval = [&](double beta) -> Expectation {
    ChainConfig cfg = config;
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(beta));
    std::memcpy(&bits, &beta, sizeof(bits));
    cfg.seed = derive_seed(config.seed, bits);  // path-independent per-beta seed
    const Chain chain = run_chain(TemperedTarget(model, data, beta), cfg);
    if (!checked) {
      const auto [mn, mx] = std::minmax_element(chain.nll.begin(), chain.nll.end());
      if (*mn == *mx)
        throw DegenerateModelError("optimal_beta: L_n is constant over the chain");
      checked = true;
    }
    const MeanMcse mm = batch_means(chain.nll);
    return {mm.mean, mm.mcse};
  };
  return optimal_beta_solve(eval, f_hat, tol, data.n());
}

OptimalBeta optimal_beta_closed_form(const Model& model, const Dataset& data, double f_hat,
                                     double tol) {
  if (!model.has_conjugate_oracle())
    throw UnavailableError("optimal_beta_closed_form: model has no conjugate oracle");
  const auto eval = [&](double beta) -> Expectation {
    return {model.conjugate_expected_nll(beta, data), 0.0};
  };
  return optimal_beta_solve(eval, f_hat, tol, data.n());
}

}  // namespace wbic
