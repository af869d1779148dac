#include "wbic/criteria.hpp"

#include <algorithm>
#include <cmath>

#include "wbic/errors.hpp"
#include "wbic/numerics.hpp"

namespace wbic {

Criterion wbic(const Chain& chain, std::int64_t n) {
  if (n < 3) throw ConfigError("wbic: n must be >= 3 so that 1/log n < 1");
  const double expected_beta = 1.0 / std::log(static_cast<double>(n));
  if (std::abs(chain.beta - expected_beta) > 1e-12)
    throw ContractError("wbic: chain beta " + std::to_string(chain.beta) +
                        " does not match 1/log n = " + std::to_string(expected_beta));
  if (chain.data_n != n) throw ContractError("wbic: chain was run against a different n");
  const MeanMcse mm = batch_means(chain.nll);
  return {mm.mean, mm.mcse};
}

WaicResult waic(const Model& model, const Chain& chain, const Dataset& data) {
  if (std::abs(chain.beta - 1.0) > 1e-12)
    throw ContractError("waic: requires an untempered chain (beta = 1); the WBIC chain cannot be reused");
  if (chain.model_fingerprint != model.fingerprint())
    throw ContractError("waic: chain was generated by a different model");
  if (chain.data_fingerprint != data.fingerprint())
    throw ContractError("waic: chain was generated against a different dataset");

  const std::int64_t n = data.n();
  const std::int64_t r = chain.n_draws();
  const std::int64_t nb = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(r))));
  const std::int64_t bs = r / nb;

  // Per-record contributions, blocked over records for a deterministic
  // parallel reduction. Each accumulator row is [T, V, T_b..., V_b...].
  const std::int64_t width = 2 + 2 * nb;
  const std::int64_t rec_block = 256;
  const std::int64_t blocks = (n + rec_block - 1) / rec_block;
  std::vector<double> partial(static_cast<std::size_t>(blocks * width), 0.0);
  std::int64_t bad_record = -1;  // exceptions cannot cross the parallel region

#pragma omp parallel for schedule(static) if (blocks > 1)
  for (std::int64_t b = 0; b < blocks; ++b) {
    std::vector<double> lp(static_cast<std::size_t>(r));
    double* acc = partial.data() + b * width;
    const std::int64_t lo = b * rec_block;
    const std::int64_t hi = std::min(n, lo + rec_block);
    for (std::int64_t i = lo; i < hi; ++i) {
      const auto record = data.record(i);
      bool ok = true;
      for (std::int64_t k = 0; k < r; ++k) {
        const double v = model.log_likelihood(chain.draw(k), record);
        if (!std::isfinite(v)) {
          ok = false;
          break;
        }
        lp[static_cast<std::size_t>(k)] = v;
      }
      if (!ok) {
#pragma omp critical
        if (bad_record < 0 || i < bad_record) bad_record = i;
        break;
      }
      acc[0] += -log_mean_exp(lp);
      // Two-pass variance: exactly zero for a degenerate (repeated-draw) chain.
      const auto pop_var = [](std::span<const double> seg) {
        const auto [mn, mx] = std::minmax_element(seg.begin(), seg.end());
        if (*mn == *mx) return 0.0;
        double s1 = 0.0;
        for (double v : seg) s1 += v;
        const double mean = s1 / static_cast<double>(seg.size());
        double s2 = 0.0;
        for (double v : seg) s2 += (v - mean) * (v - mean);
        return s2 / static_cast<double>(seg.size());
      };
      acc[1] += pop_var(lp);
      // Batch rows for the mcse: WAIC recomputed on contiguous draw batches.
      for (std::int64_t q = 0; q < nb; ++q) {
        const std::span<const double> seg(lp.data() + q * bs, static_cast<std::size_t>(bs));
        acc[2 + q] += -log_mean_exp(seg);
        acc[2 + nb + q] += pop_var(seg);
      }
    }
  }

  if (bad_record >= 0)
    throw NumericalError(
        "waic: non-finite log likelihood at record " + std::to_string(bad_record), bad_record);

  std::vector<double> totals(static_cast<std::size_t>(width), 0.0);
  for (std::int64_t b = 0; b < blocks; ++b)
    for (std::int64_t j = 0; j < width; ++j)
      totals[static_cast<std::size_t>(j)] += partial[static_cast<std::size_t>(b * width + j)];

  WaicResult out;
  out.t_n = totals[0] / static_cast<double>(n);
  out.v_n = totals[1];
  out.value = out.t_n + out.v_n / static_cast<double>(n);

  std::vector<double> batch_values(static_cast<std::size_t>(nb));
  for (std::int64_t q = 0; q < nb; ++q) {
    const double t_q = totals[static_cast<std::size_t>(2 + q)] / static_cast<double>(n);
    const double v_q = totals[static_cast<std::size_t>(2 + nb + q)];
    batch_values[static_cast<std::size_t>(q)] = t_q + v_q / static_cast<double>(n);
  }
  out.mcse = sd_of(batch_values) / std::sqrt(static_cast<double>(nb));
  return out;
}

namespace {

// Nelder-Mead on f, starting simplex around x0 with the given per-coordinate
// scale. Returns true when the simplex collapsed below tol in objective
// spread.
bool nelder_mead(const std::function<double(const ParameterVector&)>& f, ParameterVector& x0,
                 double scale, double tol, std::int64_t max_iter) {
  const int d = static_cast<int>(x0.size());
  const int np = d + 1;
  std::vector<ParameterVector> pts(static_cast<std::size_t>(np), x0);
  for (int j = 0; j < d; ++j)
    pts[static_cast<std::size_t>(j + 1)][static_cast<std::size_t>(j)] += scale;
  std::vector<double> fv(static_cast<std::size_t>(np));
  for (int k = 0; k < np; ++k) fv[static_cast<std::size_t>(k)] = f(pts[static_cast<std::size_t>(k)]);

  std::vector<int> order(static_cast<std::size_t>(np));
  ParameterVector centroid(static_cast<std::size_t>(d)), trial(static_cast<std::size_t>(d)),
      trial2(static_cast<std::size_t>(d));

  for (std::int64_t it = 0; it < max_iter; ++it) {
    for (int k = 0; k < np; ++k) order[static_cast<std::size_t>(k)] = k;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fv[static_cast<std::size_t>(a)] < fv[static_cast<std::size_t>(b)]; });
    const int best = order[0], worst = order[static_cast<std::size_t>(np - 1)],
              second = order[static_cast<std::size_t>(np - 2)];

    const bool f_tight =
        std::abs(fv[static_cast<std::size_t>(worst)] - fv[static_cast<std::size_t>(best)]) <=
        tol * (std::abs(fv[static_cast<std::size_t>(best)]) + tol);
    if (f_tight) {
      // Keep contracting until the simplex itself is small, so the returned
      // point is accurate in parameter space, not just in objective value.
      double diam = 0.0, xmag = 0.0;
      for (int j = 0; j < d; ++j)
        xmag = std::max(xmag, std::abs(pts[static_cast<std::size_t>(best)][static_cast<std::size_t>(j)]));
      for (int k = 0; k < np; ++k)
        for (int j = 0; j < d; ++j)
          diam = std::max(diam, std::abs(pts[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] -
                                         pts[static_cast<std::size_t>(best)][static_cast<std::size_t>(j)]));
      if (diam <= 1e-7 * (1.0 + xmag)) {
        x0 = pts[static_cast<std::size_t>(best)];
        return true;
      }
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (int k = 0; k < np; ++k) {
      if (k == worst) continue;
      for (int j = 0; j < d; ++j) centroid[static_cast<std::size_t>(j)] += pts[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < d; ++j) centroid[static_cast<std::size_t>(j)] /= static_cast<double>(d);

    const auto blend = [&](ParameterVector& dst, double t) {
      for (int j = 0; j < d; ++j)
        dst[static_cast<std::size_t>(j)] =
            centroid[static_cast<std::size_t>(j)] +
            t * (pts[static_cast<std::size_t>(worst)][static_cast<std::size_t>(j)] - centroid[static_cast<std::size_t>(j)]);
    };

    blend(trial, -1.0);  // reflection
    const double fr = f(trial);
    if (fr < fv[static_cast<std::size_t>(best)]) {
      blend(trial2, -2.0);  // expansion
      const double fe = f(trial2);
      if (fe < fr) {
        pts[static_cast<std::size_t>(worst)] = trial2;
        fv[static_cast<std::size_t>(worst)] = fe;
      } else {
        pts[static_cast<std::size_t>(worst)] = trial;
        fv[static_cast<std::size_t>(worst)] = fr;
      }
    } else if (fr < fv[static_cast<std::size_t>(second)]) {
      pts[static_cast<std::size_t>(worst)] = trial;
      fv[static_cast<std::size_t>(worst)] = fr;
    } else {
      blend(trial2, fr < fv[static_cast<std::size_t>(worst)] ? -0.5 : 0.5);  // contraction
      const double fc = f(trial2);
      if (fc < std::min(fr, fv[static_cast<std::size_t>(worst)])) {
        pts[static_cast<std::size_t>(worst)] = trial2;
        fv[static_cast<std::size_t>(worst)] = fc;
      } else {  // shrink toward best
        for (int k = 0; k < np; ++k) {
          if (k == best) continue;
          for (int j = 0; j < d; ++j)
            pts[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
                0.5 * (pts[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] +
                       pts[static_cast<std::size_t>(best)][static_cast<std::size_t>(j)]);
          fv[static_cast<std::size_t>(k)] = f(pts[static_cast<std::size_t>(k)]);
        }
      }
    }
  }
  for (int k = 0; k < np; ++k) order[static_cast<std::size_t>(k)] = k;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return fv[static_cast<std::size_t>(a)] < fv[static_cast<std::size_t>(b)]; });
  x0 = pts[static_cast<std::size_t>(order[0])];
  return false;
}

}  // namespace

ParameterVector fit_map_or_mle(const Model& model, const Dataset& data, FitMode mode,
                               int restarts, std::uint64_t seed) {
  if (restarts < 1) throw ConfigError("fit_map_or_mle: restarts must be >= 1");
  const std::int64_t n = data.n();
  const NllEvaluator nll_of = model.make_nll_evaluator(data);
  const auto objective = [&](const ParameterVector& w) {
    double v = nll_of(w) / static_cast<double>(n);
    if (mode == FitMode::map) v -= model.log_prior(w) / static_cast<double>(n);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  constexpr double kTol = 1e-8;
  bool any_converged = false;
  ParameterVector best;
  double best_val = std::numeric_limits<double>::infinity();
  for (int s = 0; s < restarts; ++s) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    ParameterVector x = model.sample_prior(rng);
    double scale = 0.0;
    for (double v : x) scale += v * v;
    scale = std::max(0.25, 0.25 * std::sqrt(scale / static_cast<double>(x.size())));
    const bool converged =
        nelder_mead(objective, x, scale, kTol, 600LL * model.dim() + 2000);
    const double val = objective(x);
    any_converged = any_converged || converged;
    if (val < best_val) {
      best_val = val;
      best = x;
    }
  }
  if (!any_converged)
    throw OptimizationError("fit_map_or_mle: no restart converged to tolerance 1e-8");
  return best;
}

double bic(const Model& model, const Dataset& data, const ParameterVector& w_hat) {
  const double n = static_cast<double>(data.n());
  return n * empirical_log_loss(model, w_hat, data) + 0.5 * model.dim() * std::log(n);
}

double aic(const Model& model, const Dataset& data, const ParameterVector& w_hat) {
  const double n = static_cast<double>(data.n());
  return empirical_log_loss(model, w_hat, data) + static_cast<double>(model.dim()) / n;
}

void baseline_reports(std::vector<CriterionReport>& reports, std::optional<double> s_n) {
  if (reports.empty()) throw ConfigError("baseline_reports: no reports");
  const std::uint64_t fp = reports.front().data_fingerprint;
  for (const auto& rep : reports)
    if (rep.data_fingerprint != fp)
      throw ContractError("baseline_reports: reports mix dataset fingerprints");

  double min_wbic = reports.front().wbic;
  for (const auto& rep : reports) min_wbic = std::min(min_wbic, rep.wbic);
  for (auto& rep : reports) {
    rep.wbic2 = rep.wbic - min_wbic;
    if (s_n) rep.wbic1 = rep.wbic - static_cast<double>(rep.n) * (*s_n);
  }
}

std::size_t select_model(const std::vector<CriterionReport>& reports) {
  if (reports.size() < 2) throw ConfigError("select_model: need at least two reports");
  double min_wbic = reports.front().wbic;
  for (const auto& rep : reports) min_wbic = std::min(min_wbic, rep.wbic);
  std::size_t winner = reports.size();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].wbic > min_wbic + 1e-9) continue;
    if (winner == reports.size() || reports[i].model_dim < reports[winner].model_dim) winner = i;
  }
  return winner;
}

}  // namespace wbic
