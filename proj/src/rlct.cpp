#include "wbic/rlct.hpp"

#include <algorithm>
#include <cmath>

#include "wbic/errors.hpp"
#include "wbic/numerics.hpp"

namespace wbic {

namespace {
constexpr double kBetaTol = 1e-12;
}

RlctEstimate rlct_two_chain(const CurvePoint& p1, const CurvePoint& p2) {
  if (!(p1.beta > 0.0) || !(p2.beta > 0.0))
    throw ContractError("rlct_two_chain: betas must be positive");
  if (std::abs(p1.beta - p2.beta) < kBetaTol)
    throw ContractError("rlct_two_chain: betas must differ by at least 1e-12");
  if (!std::isfinite(p1.mean) || !std::isfinite(p2.mean))
    throw NumericalError("rlct_two_chain: non-finite expectations");

  const double denom = 1.0 / p1.beta - 1.0 / p2.beta;
  RlctEstimate est;
  est.lambda_hat = (p1.mean - p2.mean) / denom;
  est.std_error = std::sqrt(p1.mcse * p1.mcse + p2.mcse * p2.mcse) / std::abs(denom);
  est.beta1 = p1.beta;
  est.beta2 = p2.beta;
  est.method = RlctMethod::two_chain;
  return est;
}

RlctEstimate rlct_reweighted(const Chain& chain, double beta2) {
  const double beta1 = chain.beta;
  if (!(beta2 > 0.0)) throw ContractError("rlct_reweighted: beta2 must be positive");
  if (std::abs(beta2 - beta1) < kBetaTol)
    throw ContractError("rlct_reweighted: beta2 must differ from the chain beta by at least 1e-12");
  const std::int64_t r = chain.n_draws();
  if (r < 4) throw ConfigError("rlct_reweighted: chain too short");

  const double dbeta = beta2 - beta1;
  std::vector<double> lw(static_cast<std::size_t>(r));
  for (std::int64_t i = 0; i < r; ++i) lw[static_cast<std::size_t>(i)] = -dbeta * chain.nll[static_cast<std::size_t>(i)];
  const double m = *std::max_element(lw.begin(), lw.end());

  const double ess = weight_ess(lw);
  if (ess < 10.0)
    throw DegenerateWeightsError("rlct_reweighted: importance-weight ESS " + std::to_string(ess) +
                                 " below 10");

  const double denom = 1.0 / beta1 - 1.0 / beta2;
  const auto lambda_of = [&](std::int64_t lo, std::int64_t hi) {
    double num = 0.0, den = 0.0, s1 = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) {
      const double u = std::exp(lw[static_cast<std::size_t>(i)] - m);
      const double v = chain.nll[static_cast<std::size_t>(i)];
      num += u * v;
      den += u;
      s1 += v;
    }
    const double e1 = s1 / static_cast<double>(hi - lo);
    const double e2 = num / den;
    return (e1 - e2) / denom;
  };

  RlctEstimate est;
  est.lambda_hat = lambda_of(0, r);
  est.beta1 = beta1;
  est.beta2 = beta2;
  est.method = RlctMethod::reweight;
  est.weight_ess = ess;
  est.low_ess_warning = ess < 50.0;

  // Batch means over joint (E1, E2) batches; captures the correlation between
  // the plain and reweighted means on the shared draws.
  const std::int64_t nb = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(r))));
  const std::int64_t bs = r / nb;
  std::vector<double> lambdas(static_cast<std::size_t>(nb));
  for (std::int64_t q = 0; q < nb; ++q)
    lambdas[static_cast<std::size_t>(q)] = lambda_of(q * bs, (q + 1) * bs);
  est.std_error = sd_of(lambdas) / std::sqrt(static_cast<double>(nb));
  return est;
}

RlctEstimate rlct_regression(std::span<const CurvePoint> curve) {
  if (curve.size() < 2) throw ConfigError("rlct_regression: need at least two curve points");
  if (curve.size() == 2) return rlct_two_chain(curve[0], curve[1]);
  for (const CurvePoint& p : curve) {
    if (!(p.beta > 0.0)) throw ContractError("rlct_regression: betas must be positive");
    if (!std::isfinite(p.mean)) throw NumericalError("rlct_regression: non-finite expectation");
  }
  for (std::size_t i = 0; i < curve.size(); ++i)
    for (std::size_t j = i + 1; j < curve.size(); ++j)
      if (std::abs(curve[i].beta - curve[j].beta) < kBetaTol)
        throw ContractError("rlct_regression: betas must be distinct");

  bool weighted = true;
  for (const CurvePoint& p : curve) weighted = weighted && p.mcse > 0.0;

  const std::size_t k = curve.size();
  double sw = 0.0, sz = 0.0, se = 0.0, szz = 0.0, sze = 0.0;
  for (const CurvePoint& p : curve) {
    const double w = weighted ? 1.0 / (p.mcse * p.mcse) : 1.0;
    const double z = 1.0 / p.beta;
    sw += w;
    sz += w * z;
    se += w * p.mean;
    szz += w * z * z;
    sze += w * z * p.mean;
  }
  const double det = sw * szz - sz * sz;
  const double slope = (sw * sze - sz * se) / det;
  const double intercept = (szz * se - sz * sze) / det;

  double var_slope;
  if (weighted) {
    var_slope = sw / det;
  } else {
    double rss = 0.0;
    for (const CurvePoint& p : curve) {
      const double e = p.mean - (intercept + slope / p.beta);
      rss += e * e;
    }
    var_slope = (rss / static_cast<double>(k - 2)) * (sw / det);
  }

  RlctEstimate est;
  est.lambda_hat = slope;
  est.std_error = std::sqrt(std::max(0.0, var_slope));
  est.beta1 = curve.front().beta;
  est.beta2 = curve.back().beta;
  est.method = RlctMethod::regression;
  return est;
}

}  // namespace wbic
