#ifndef WBIC_CRITERIA_HPP
#define WBIC_CRITERIA_HPP

#include <optional>
#include <string>
#include <vector>

#include "wbic/mcmc.hpp"

namespace wbic {

struct Criterion {
  double value = 0.0;
  double mcse = 0.0;
};

// WBIC = E_w^beta[n L_n(w)] at beta = 1/log n, estimated as the mean of the
// chain's cached n L_n values. The chain must target exactly that beta.
Criterion wbic(const Chain& chain, std::int64_t n);

struct WaicResult {
  double t_n = 0.0;
  double v_n = 0.0;
  double value = 0.0;  // T_n + V_n / n
  double mcse = 0.0;
};

// WAIC from an untempered (beta = 1) chain. The WBIC chain is never accepted
// here; a separate beta = 1 chain is required.
WaicResult waic(const Model& model, const Chain& chain, const Dataset& data);

enum class FitMode { mle, map };

// Multi-start Nelder-Mead minimization of L_n (mle) or L_n - (1/n) log phi
// (map), starting from prior draws. Deterministic given the seed.
ParameterVector fit_map_or_mle(const Model& model, const Dataset& data, FitMode mode,
                               int restarts, std::uint64_t seed);

// BIC = n L_n(w_hat) + (d/2) log n; AIC = L_n(w_hat) + d/n. w_hat should come
// from fit_map_or_mle with FitMode::mle.
double bic(const Model& model, const Dataset& data, const ParameterVector& w_hat);
double aic(const Model& model, const Dataset& data, const ParameterVector& w_hat);

struct CriterionReport {
  std::string label;
  int model_dim = 0;
  std::int64_t n = 0;
  double wbic = 0.0;
  double wbic_mcse = 0.0;
  std::optional<WaicResult> waic;
  std::optional<double> bic;
  std::optional<double> aic;
  std::optional<double> wbic1;  // WBIC - n S_n
  std::optional<double> wbic2;  // WBIC - min WBIC across the compared reports
  std::uint64_t chain_fingerprint = 0;
  std::uint64_t data_fingerprint = 0;
};

// Fills the wbic1 (when s_n is provided) and wbic2 columns in place. All
// reports must share one dataset fingerprint. The wbic2 baseline is the
// minimum WBIC across the reports, so the best entry reads 0.
void baseline_reports(std::vector<CriterionReport>& reports, std::optional<double> s_n);

// Index of the argmin-WBIC report; ties within 1e-9 go to the smaller model
// dimension.
std::size_t select_model(const std::vector<CriterionReport>& reports);

}  // namespace wbic

#endif
