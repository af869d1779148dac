#ifndef WBIC_RLCT_HPP
#define WBIC_RLCT_HPP

#include <optional>
#include <span>

#include "wbic/free_energy.hpp"
#include "wbic/models.hpp"

namespace wbic {

enum class RlctMethod { two_chain, reweight, regression };

struct RlctEstimate {
  double lambda_hat = 0.0;
  double std_error = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  RlctMethod method = RlctMethod::two_chain;
  std::optional<double> weight_ess;  // reweight method only
  bool low_ess_warning = false;      // weight ESS in [10, 50)
  std::optional<RlctTheory> theory;  // attached by callers when available
};

// lambda_hat = (E^b1[nL_n] - E^b2[nL_n]) / (1/b1 - 1/b2), errors propagated
// from the two mcse values.
RlctEstimate rlct_two_chain(const CurvePoint& p1, const CurvePoint& p2);

// Self-normalized importance reweighting of a single chain at beta1 to beta2,
// then the two-point formula. Weight ESS below 10 is an error, below 50 a
// warning flag.
RlctEstimate rlct_reweighted(const Chain& chain, double beta2);

// Weighted least squares of E^beta[nL_n] against 1/beta; the slope estimates
// lambda. Two points fall back to the two-point formula.
RlctEstimate rlct_regression(std::span<const CurvePoint> curve);

}  // namespace wbic

#endif
