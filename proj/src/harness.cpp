#include "wbic/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wbic/errors.hpp"
#include "wbic/free_energy.hpp"
#include "wbic/io.hpp"
#include "wbic/numerics.hpp"
#include "wbic/rlct.hpp"

namespace wbic {

using nlohmann::json;

namespace {

// Seed stream tags. Stateless derivation keeps every repeat and cell
// independent of which other cells executed.
enum : std::uint64_t {
  kTruthStream = 1,
  kDataStream = 2,
  kCellStream = 3,
};
enum : std::uint64_t {
  kWbicChainTag = 0,
  kRlctChainTag = 1,
  kRlctSecondChainTag = 2,
  kRlctCurveTag = 3,
  kWaicChainTag = 4,
  kEvidenceTag = 5,
  kFitTag = 6,
};

const std::set<std::string>& known_estimators() {
  static const std::set<std::string> k = {"wbic", "waic", "rlct", "evidence", "bic", "aic"};
  return k;
}

}  // namespace

void ExperimentPlan::validate() const {
  if (family != "rrr" && family != "conjugate")
    throw ConfigError("plan: family must be 'rrr' or 'conjugate'");
  if (repeats < 1) throw ConfigError("plan: repeats must be >= 1");
  if (candidates.empty()) throw ConfigError("plan: candidates must be nonempty");
  if (n < 3) throw ConfigError("plan: n must be >= 3");
  if (estimators.empty()) throw ConfigError("plan: estimators must be nonempty");
  for (const auto& e : estimators)
    if (!known_estimators().count(e)) throw ConfigError("plan: unknown estimator '" + e + "'");
  for (int c : candidates)
    if (c < 1) throw ConfigError("plan: candidates must be >= 1");
  if (family == "conjugate")
    for (int c : candidates)
      if (c != d)
        throw ConfigError("plan: conjugate candidates must equal the truth dimension d");
  chain.validate();
  if (rlct.method != "reweight" && rlct.method != "two-chain" && rlct.method != "regression")
    throw ConfigError("plan: rlct method must be reweight, two-chain or regression");
  if (!(rlct.beta1_mult > 0.0) || !(rlct.beta2_mult > 0.0))
    throw ConfigError("plan: rlct beta multipliers must be positive");
  if (evidence.rungs < 1) throw ConfigError("plan: evidence rungs must be >= 1");
}

void ExperimentPlan::apply_paper_exact() {
  repeats = 100;
  chain.burn_in = 50000;
  chain.thin = 100;
  chain.draws = 2000;
  chain.step_std_init = 0.0012;
}

namespace {

bool wants(const ExperimentPlan& plan, const std::string& est) {
  return std::find(plan.estimators.begin(), plan.estimators.end(), est) != plan.estimators.end();
}

std::shared_ptr<Model> make_candidate_model(const ExperimentPlan& plan, int candidate) {
  if (plan.family == "rrr")
    return make_reduced_rank_model(plan.m, plan.n_out, candidate, plan.sigma, plan.prior_std);
  return make_conjugate_normal_model(candidate, plan.noise_std, plan.prior_std);
}

CellResult run_cell(const ExperimentPlan& plan, const Model& model, const Dataset& data,
                    std::uint64_t cell_seed) {
  CellResult cell;
  cell.cell_seed = cell_seed;
  const std::int64_t n = data.n();
  const double log_n = std::log(static_cast<double>(n));

  std::optional<Chain> wbic_chain;   // beta = 1/log n
  std::optional<Chain> rlct_chain;   // beta = beta1_mult/log n

  ChainConfig base = plan.chain;
  if (plan.init_zero) base.init = ParameterVector(static_cast<std::size_t>(model.dim()), 0.0);

  const auto run_at = [&](double beta, std::uint64_t tag) {
    ChainConfig cfg = base;
    cfg.seed = derive_seed(cell_seed, tag);
    return run_chain(TemperedTarget(model, data, beta), cfg);
  };

  if (wants(plan, "wbic")) {
    wbic_chain = run_at(1.0 / log_n, kWbicChainTag);
    const Criterion w = wbic(*wbic_chain, n);
    cell.wbic = w.value;
    cell.wbic_mcse = w.mcse;
    cell.acceptance_rate = wbic_chain->acceptance_rate;
    cell.chain_fingerprint = fnv1a_doubles(wbic_chain->nll, fnv1a_doubles(wbic_chain->draws));
  }

  if (wants(plan, "rlct")) {
    const double beta1 = plan.rlct.beta1_mult / log_n;
    const double beta2 = plan.rlct.beta2_mult / log_n;
    RlctEstimate est;
    if (plan.rlct.method == "regression") {
      std::vector<double> betas = plan.rlct.regression_mults;
      std::sort(betas.begin(), betas.end());
      for (double& b : betas) b /= log_n;
      ChainConfig cfg = base;
      cfg.seed = derive_seed(cell_seed, kRlctCurveTag);
      const auto curve = expected_nll_curve(model, data, betas, cfg);
      est = rlct_regression(curve);
    } else {
      if (wbic_chain && plan.rlct.beta1_mult == 1.0)
        rlct_chain = *wbic_chain;  // the paper's default reuses the WBIC chain
      else
        rlct_chain = run_at(beta1, kRlctChainTag);
      if (plan.rlct.method == "reweight") {
        est = rlct_reweighted(*rlct_chain, beta2);
      } else {
        const Chain second = run_at(beta2, kRlctSecondChainTag);
        const MeanMcse m1 = batch_means(rlct_chain->nll);
        const MeanMcse m2 = batch_means(second.nll);
        est = rlct_two_chain({beta1, m1.mean, m1.mcse}, {beta2, m2.mean, m2.mcse});
      }
      if (!cell.chain_fingerprint)
        cell.chain_fingerprint = fnv1a_doubles(rlct_chain->nll, fnv1a_doubles(rlct_chain->draws));
      if (cell.acceptance_rate == 0.0) cell.acceptance_rate = rlct_chain->acceptance_rate;
    }
    cell.rlct_lambda = est.lambda_hat;
    cell.rlct_se = est.std_error;
    if (est.weight_ess) cell.rlct_ess = *est.weight_ess;
  }

  if (wants(plan, "waic")) {
    const Chain chain1 = run_at(1.0, kWaicChainTag);
    const WaicResult w = waic(model, chain1, data);
    cell.waic_tn = w.t_n;
    cell.waic_vn = w.v_n;
    cell.waic_value = w.value;
    cell.waic_mcse = w.mcse;
  }

  if (wants(plan, "evidence")) {
    ChainConfig cfg = base;
    cfg.seed = derive_seed(cell_seed, kEvidenceTag);
    const auto schedule = TemperatureSchedule::power(plan.evidence.rungs, plan.evidence.power);
    const FreeEnergyEstimate fe = stepping_stone(model, data, schedule, cfg);
    cell.evidence_value = fe.value;
    cell.evidence_mcse = fe.mcse;
  }

  if (wants(plan, "bic") || wants(plan, "aic")) {
    const ParameterVector w_hat =
        fit_map_or_mle(model, data, FitMode::mle, 3, derive_seed(cell_seed, kFitTag));
    if (wants(plan, "bic")) cell.bic = bic(model, data, w_hat);
    if (wants(plan, "aic")) cell.aic = aic(model, data, w_hat);
  }

  cell.ok = true;
  return cell;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.plan = plan;
  const int repeats = plan.repeats;
  const int cands = static_cast<int>(plan.candidates.size());

  // Truth and datasets, one stream per repeat.
  std::optional<RrrTruth> fixed_truth;
  if (plan.family == "rrr" && !plan.redraw_truth_per_repeat)
    fixed_truth = draw_rrr_truth(plan.m, plan.n_out, plan.h0, plan.sigma, plan.x_std,
                                 plan.coef_std, derive_seed(plan.seed, kTruthStream, 0));

  std::vector<Dataset> datasets(static_cast<std::size_t>(repeats));
  report.dataset_seeds.resize(static_cast<std::size_t>(repeats));
  report.dataset_fingerprints.resize(static_cast<std::size_t>(repeats));
  report.s_n.resize(static_cast<std::size_t>(repeats));
  for (int i = 0; i < repeats; ++i) {
    const std::uint64_t ds_seed = derive_seed(plan.seed, kDataStream, static_cast<std::uint64_t>(i));
    report.dataset_seeds[static_cast<std::size_t>(i)] = ds_seed;
    if (plan.family == "rrr") {
      const RrrTruth truth =
          plan.redraw_truth_per_repeat
              ? draw_rrr_truth(plan.m, plan.n_out, plan.h0, plan.sigma, plan.x_std, plan.coef_std,
                               derive_seed(plan.seed, kTruthStream, static_cast<std::uint64_t>(i)))
              : *fixed_truth;
      datasets[static_cast<std::size_t>(i)] = sample_rrr_dataset(truth, plan.n, ds_seed);
      report.s_n[static_cast<std::size_t>(i)] = empirical_entropy(truth, datasets[static_cast<std::size_t>(i)]);
    } else {
      auto [data, truth] = generate_conjugate_dataset(plan.d, plan.n, plan.noise_std, ds_seed);
      report.s_n[static_cast<std::size_t>(i)] = empirical_entropy(truth, data);
      datasets[static_cast<std::size_t>(i)] = std::move(data);
    }
    report.dataset_fingerprints[static_cast<std::size_t>(i)] =
        datasets[static_cast<std::size_t>(i)].fingerprint();
  }

  report.theory.assign(static_cast<std::size_t>(cands), std::nullopt);
  if (plan.family == "rrr")
    for (int c = 0; c < cands; ++c)
      report.theory[static_cast<std::size_t>(c)] =
          theoretical_rlct_rrr(plan.m, plan.n_out, plan.candidates[static_cast<std::size_t>(c)], plan.h0);
  else
    for (int c = 0; c < cands; ++c)
      report.theory[static_cast<std::size_t>(c)] =
          RlctTheory{0.5 * plan.candidates[static_cast<std::size_t>(c)], 1};

  report.cells.assign(static_cast<std::size_t>(repeats),
                      std::vector<CellResult>(static_cast<std::size_t>(cands)));

  const std::int64_t total = static_cast<std::int64_t>(repeats) * cands;
#pragma omp parallel for schedule(dynamic) if (total > 1)
  for (std::int64_t idx = 0; idx < total; ++idx) {
    const int i = static_cast<int>(idx / cands);
    const int c = static_cast<int>(idx % cands);
    const std::uint64_t cell_seed = derive_seed(plan.seed, kCellStream, static_cast<std::uint64_t>(idx));
    CellResult& cell = report.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    const auto c0 = std::chrono::steady_clock::now();
    try {
      const auto model = make_candidate_model(plan, plan.candidates[static_cast<std::size_t>(c)]);
      cell = run_cell(plan, *model, datasets[static_cast<std::size_t>(i)], cell_seed);
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
      cell.cell_seed = cell_seed;
    }
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
  }

  report.selection_counts = compute_selection_counts(report);
  report.aggregates = compute_aggregates(report);
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

namespace {

// Per-cell value of a (possibly derived) estimator column; wbic2 needs the
// row minimum, wbic1 the repeat's empirical entropy.
std::optional<double> cell_value(const ExperimentReport& report, int repeat, int cand,
                                 const std::string& estimator) {
  const CellResult& cell = report.cells[static_cast<std::size_t>(repeat)][static_cast<std::size_t>(cand)];
  if (!cell.ok) return std::nullopt;
  if (estimator == "wbic") return cell.wbic;
  if (estimator == "waic") return cell.waic_value;
  if (estimator == "rlct") return cell.rlct_lambda;
  if (estimator == "evidence") return cell.evidence_value;
  if (estimator == "bic") return cell.bic;
  if (estimator == "aic") return cell.aic;
  if (estimator == "wbic1") {
    if (!cell.wbic) return std::nullopt;
    return *cell.wbic - static_cast<double>(report.plan.n) * report.s_n[static_cast<std::size_t>(repeat)];
  }
  if (estimator == "wbic2") {
    if (!cell.wbic) return std::nullopt;
    double min_wbic = std::numeric_limits<double>::infinity();
    for (const CellResult& other : report.cells[static_cast<std::size_t>(repeat)])
      if (other.ok && other.wbic) min_wbic = std::min(min_wbic, *other.wbic);
    return *cell.wbic - min_wbic;
  }
  return std::nullopt;
}

const std::vector<std::string>& aggregate_columns() {
  static const std::vector<std::string> cols = {"wbic", "wbic1", "wbic2", "waic",
                                                "rlct", "evidence", "bic",  "aic"};
  return cols;
}

}  // namespace

std::vector<AggregateRow> compute_aggregates(const ExperimentReport& report) {
  const int repeats = static_cast<int>(report.cells.size());
  const int cands = static_cast<int>(report.plan.candidates.size());
  std::vector<AggregateRow> rows;
  for (const std::string& est : aggregate_columns()) {
    AggregateRow row;
    row.estimator = est;
    row.mean.assign(static_cast<std::size_t>(cands), std::numeric_limits<double>::quiet_NaN());
    row.sd.assign(static_cast<std::size_t>(cands), std::numeric_limits<double>::quiet_NaN());
    row.count.assign(static_cast<std::size_t>(cands), 0);
    bool any = false;
    for (int c = 0; c < cands; ++c) {
      std::vector<double> vals;
      for (int i = 0; i < repeats; ++i)
        if (const auto v = cell_value(report, i, c, est)) vals.push_back(*v);
      row.count[static_cast<std::size_t>(c)] = static_cast<int>(vals.size());
      if (!vals.empty()) {
        row.mean[static_cast<std::size_t>(c)] = mean_of(vals);
        row.sd[static_cast<std::size_t>(c)] = sd_of(vals);
        any = true;
      }
    }
    if (any) rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<int> compute_selection_counts(const ExperimentReport& report) {
  const int repeats = static_cast<int>(report.cells.size());
  const int cands = static_cast<int>(report.plan.candidates.size());
  std::vector<int> counts(static_cast<std::size_t>(cands), 0);
  if (cands < 2) return counts;
  for (int i = 0; i < repeats; ++i) {
    std::vector<CriterionReport> reps;
    std::vector<int> index;
    for (int c = 0; c < cands; ++c) {
      const CellResult& cell = report.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      if (!cell.ok || !cell.wbic) continue;
      CriterionReport rep;
      rep.wbic = *cell.wbic;
      const int cand = report.plan.candidates[static_cast<std::size_t>(c)];
      rep.model_dim = report.plan.family == "rrr"
                          ? cand * report.plan.m + report.plan.n_out * cand
                          : cand;
      reps.push_back(rep);
      index.push_back(c);
    }
    if (reps.size() < 2) continue;
    ++counts[static_cast<std::size_t>(index[select_model(reps)])];
  }
  return counts;
}

// ----------------------------- serialization --------------------------------

namespace {

json chain_config_to_json(const ChainConfig& cfg) {
  return json{{"burn_in", cfg.burn_in},
              {"thin", cfg.thin},
              {"draws", cfg.draws},
              {"step_std_init", cfg.step_std_init},
              {"target_acceptance", cfg.target_acceptance},
              {"adapt", cfg.adapt}};
}

ChainConfig chain_config_from_json(const json& j) {
  ChainConfig cfg;
  cfg.burn_in = j.value("burn_in", cfg.burn_in);
  cfg.thin = j.value("thin", cfg.thin);
  cfg.draws = j.value("draws", cfg.draws);
  cfg.step_std_init = j.value("step_std_init", cfg.step_std_init);
  cfg.target_acceptance = j.value("target_acceptance", cfg.target_acceptance);
  cfg.adapt = j.value("adapt", cfg.adapt);
  return cfg;
}

json plan_to_json(const ExperimentPlan& plan) {
  json j;
  j["family"] = plan.family;
  if (plan.family == "rrr") {
    j["truth"] = {{"M", plan.m},         {"N", plan.n_out},      {"H0", plan.h0},
                  {"sigma", plan.sigma}, {"x_std", plan.x_std},  {"coef_std", plan.coef_std}};
  } else {
    j["truth"] = {{"d", plan.d}, {"noise_std", plan.noise_std}};
  }
  j["prior_std"] = plan.prior_std;
  j["candidates"] = plan.candidates;
  j["n"] = plan.n;
  j["repeats"] = plan.repeats;
  j["chain"] = chain_config_to_json(plan.chain);
  j["estimators"] = plan.estimators;
  j["seed"] = plan.seed;
  j["redraw_truth_per_repeat"] = plan.redraw_truth_per_repeat;
  j["init_zero"] = plan.init_zero;
  j["rlct"] = {{"method", plan.rlct.method},
               {"beta1_mult", plan.rlct.beta1_mult},
               {"beta2_mult", plan.rlct.beta2_mult},
               {"regression_mults", plan.rlct.regression_mults}};
  j["evidence"] = {{"rungs", plan.evidence.rungs}, {"power", plan.evidence.power}};
  return j;
}

ExperimentPlan plan_from_json(const json& j) {
  ExperimentPlan plan;
  plan.family = j.value("family", plan.family);
  if (j.contains("truth")) {
    const json& t = j["truth"];
    if (plan.family == "rrr") {
      plan.m = t.value("M", plan.m);
      plan.n_out = t.value("N", plan.n_out);
      plan.h0 = t.value("H0", plan.h0);
      plan.sigma = t.value("sigma", plan.sigma);
      plan.x_std = t.value("x_std", plan.x_std);
      plan.coef_std = t.value("coef_std", plan.coef_std);
    } else {
      plan.d = t.value("d", plan.d);
      plan.noise_std = t.value("noise_std", plan.noise_std);
    }
  }
  plan.prior_std = j.value("prior_std", plan.prior_std);
  if (j.contains("candidates")) plan.candidates = j["candidates"].get<std::vector<int>>();
  plan.n = j.value("n", plan.n);
  plan.repeats = j.value("repeats", plan.repeats);
  if (j.contains("chain")) plan.chain = chain_config_from_json(j["chain"]);
  if (j.contains("estimators")) plan.estimators = j["estimators"].get<std::vector<std::string>>();
  plan.seed = j.value("seed", plan.seed);
  plan.redraw_truth_per_repeat = j.value("redraw_truth_per_repeat", plan.redraw_truth_per_repeat);
  plan.init_zero = j.value("init_zero", plan.init_zero);
  if (j.contains("rlct")) {
    const json& r = j["rlct"];
    plan.rlct.method = r.value("method", plan.rlct.method);
    plan.rlct.beta1_mult = r.value("beta1_mult", plan.rlct.beta1_mult);
    plan.rlct.beta2_mult = r.value("beta2_mult", plan.rlct.beta2_mult);
    if (r.contains("regression_mults"))
      plan.rlct.regression_mults = r["regression_mults"].get<std::vector<double>>();
  }
  if (j.contains("evidence")) {
    plan.evidence.rungs = j["evidence"].value("rungs", plan.evidence.rungs);
    plan.evidence.power = j["evidence"].value("power", plan.evidence.power);
  }
  return plan;
}

void put_optional(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

std::optional<double> get_optional(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

json cell_to_json(const CellResult& cell) {
  json j;
  j["ok"] = cell.ok;
  if (!cell.ok) j["error"] = cell.error;
  j["seed"] = hex64(cell.cell_seed);
  if (cell.chain_fingerprint) j["chain_fingerprint"] = hex64(cell.chain_fingerprint);
  if (cell.acceptance_rate != 0.0) j["acceptance_rate"] = cell.acceptance_rate;
  put_optional(j, "wbic", cell.wbic);
  put_optional(j, "wbic_mcse", cell.wbic_mcse);
  put_optional(j, "waic_tn", cell.waic_tn);
  put_optional(j, "waic_vn", cell.waic_vn);
  put_optional(j, "waic", cell.waic_value);
  put_optional(j, "waic_mcse", cell.waic_mcse);
  put_optional(j, "rlct", cell.rlct_lambda);
  put_optional(j, "rlct_se", cell.rlct_se);
  put_optional(j, "rlct_ess", cell.rlct_ess);
  put_optional(j, "evidence", cell.evidence_value);
  put_optional(j, "evidence_mcse", cell.evidence_mcse);
  put_optional(j, "bic", cell.bic);
  put_optional(j, "aic", cell.aic);
  return j;
}

CellResult cell_from_json(const json& j) {
  CellResult cell;
  cell.ok = j.value("ok", false);
  cell.error = j.value("error", std::string());
  if (j.contains("seed")) cell.cell_seed = std::stoull(j["seed"].get<std::string>(), nullptr, 16);
  if (j.contains("chain_fingerprint"))
    cell.chain_fingerprint = std::stoull(j["chain_fingerprint"].get<std::string>(), nullptr, 16);
  cell.acceptance_rate = j.value("acceptance_rate", 0.0);
  cell.wbic = get_optional(j, "wbic");
  cell.wbic_mcse = get_optional(j, "wbic_mcse");
  cell.waic_tn = get_optional(j, "waic_tn");
  cell.waic_vn = get_optional(j, "waic_vn");
  cell.waic_value = get_optional(j, "waic");
  cell.waic_mcse = get_optional(j, "waic_mcse");
  cell.rlct_lambda = get_optional(j, "rlct");
  cell.rlct_se = get_optional(j, "rlct_se");
  cell.rlct_ess = get_optional(j, "rlct_ess");
  cell.evidence_value = get_optional(j, "evidence");
  cell.evidence_mcse = get_optional(j, "evidence_mcse");
  cell.bic = get_optional(j, "bic");
  cell.aic = get_optional(j, "aic");
  return cell;
}

json report_to_json(const ExperimentReport& report) {
  json j;
  j["plan"] = plan_to_json(report.plan);
  json reps = json::array();
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    reps.push_back({{"dataset_seed", hex64(report.dataset_seeds[i])},
                    {"dataset_fingerprint", hex64(report.dataset_fingerprints[i])},
                    {"s_n", report.s_n[i]}});
  }
  j["repeats"] = std::move(reps);
  json theory = json::array();
  for (const auto& t : report.theory) {
    if (t)
      theory.push_back({{"lambda", t->lambda}, {"m", t->multiplicity}});
    else
      theory.push_back(nullptr);
  }
  j["theory"] = std::move(theory);
  json cells = json::array();
  for (const auto& row : report.cells) {
    json jrow = json::array();
    for (const auto& cell : row) jrow.push_back(cell_to_json(cell));
    cells.push_back(std::move(jrow));
  }
  j["cells"] = std::move(cells);
  j["selection_counts"] = report.selection_counts;
  json aggs = json::array();
  for (const auto& row : report.aggregates) {
    json means = json::array(), sds = json::array();
    for (std::size_t c = 0; c < row.mean.size(); ++c) {
      if (row.count[c] > 0) {
        means.push_back(row.mean[c]);
        sds.push_back(row.sd[c]);
      } else {
        means.push_back(nullptr);
        sds.push_back(nullptr);
      }
    }
    aggs.push_back({{"estimator", row.estimator},
                    {"mean", std::move(means)},
                    {"sd", std::move(sds)},
                    {"count", row.count}});
  }
  j["aggregates"] = std::move(aggs);
  json cell_seconds = json::array();
  for (const auto& row : report.cells) {
    json jrow = json::array();
    for (const auto& cell : row) jrow.push_back(cell.seconds);
    cell_seconds.push_back(std::move(jrow));
  }
  j["timings"] = {{"total_seconds", report.total_seconds},
                  {"cell_seconds", std::move(cell_seconds)}};
  return j;
}

}  // namespace

std::string ExperimentPlan::to_json_text() const { return plan_to_json(*this).dump(2) + "\n"; }

ExperimentPlan ExperimentPlan::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("plan json: ") + e.what());
  }
  return plan_from_json(j);
}

ExperimentReport report_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("report json: ") + e.what());
  }
  ExperimentReport report;
  report.plan = plan_from_json(j.at("plan"));
  for (const auto& r : j.at("repeats")) {
    report.dataset_seeds.push_back(std::stoull(r.at("dataset_seed").get<std::string>(), nullptr, 16));
    report.dataset_fingerprints.push_back(
        std::stoull(r.at("dataset_fingerprint").get<std::string>(), nullptr, 16));
    report.s_n.push_back(r.at("s_n").get<double>());
  }
  for (const auto& t : j.at("theory")) {
    if (t.is_null())
      report.theory.push_back(std::nullopt);
    else
      report.theory.push_back(RlctTheory{t.at("lambda").get<double>(), t.at("m").get<int>()});
  }
  for (const auto& jrow : j.at("cells")) {
    std::vector<CellResult> row;
    for (const auto& jc : jrow) row.push_back(cell_from_json(jc));
    report.cells.push_back(std::move(row));
  }
  report.selection_counts = j.at("selection_counts").get<std::vector<int>>();
  for (const auto& ja : j.at("aggregates")) {
    AggregateRow row;
    row.estimator = ja.at("estimator").get<std::string>();
    for (const auto& v : ja.at("mean"))
      row.mean.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    for (const auto& v : ja.at("sd"))
      row.sd.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    row.count = ja.at("count").get<std::vector<int>>();
    report.aggregates.push_back(std::move(row));
  }
  if (j.contains("timings")) report.total_seconds = j["timings"].value("total_seconds", 0.0);

  // Stored aggregates are redundant; verify them against the raw cells.
  const auto recomputed = compute_aggregates(report);
  if (recomputed.size() != report.aggregates.size())
    throw ContractError("report json: aggregate rows do not match raw values");
  for (std::size_t r = 0; r < recomputed.size(); ++r) {
    const auto& a = recomputed[r];
    const auto& b = report.aggregates[r];
    if (a.estimator != b.estimator || a.count != b.count)
      throw ContractError("report json: aggregate layout does not match raw values");
    for (std::size_t c = 0; c < a.mean.size(); ++c) {
      const bool a_nan = std::isnan(a.mean[c]), b_nan = std::isnan(b.mean[c]);
      if (a_nan != b_nan || (!a_nan && (std::abs(a.mean[c] - b.mean[c]) > 1e-12 ||
                                        std::abs(a.sd[c] - b.sd[c]) > 1e-12)))
        throw ContractError("report json: stored aggregates disagree with recomputation");
    }
  }
  const auto counts = compute_selection_counts(report);
  if (counts != report.selection_counts)
    throw ContractError("report json: stored selection counts disagree with recomputation");
  return report;
}

namespace {

std::string candidate_label(const ExperimentPlan& plan, int c) {
  const std::string prefix = plan.family == "rrr" ? "H=" : "d=";
  return prefix + std::to_string(plan.candidates[static_cast<std::size_t>(c)]);
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return std::string(buf);
}

std::string render_text(const ExperimentReport& report) {
  const ExperimentPlan& plan = report.plan;
  const int cands = static_cast<int>(plan.candidates.size());
  constexpr std::size_t kW = 12;
  std::string out;
  out += "family=" + plan.family;
  if (plan.family == "rrr")
    out += " M=" + std::to_string(plan.m) + " N=" + std::to_string(plan.n_out) +
           " H0=" + std::to_string(plan.h0);
  else
    out += " d=" + std::to_string(plan.d);
  out += " n=" + std::to_string(plan.n) + " repeats=" + std::to_string(plan.repeats) +
         " seed=" + std::to_string(plan.seed) + "\n";

  out += pad("", 14);
  for (int c = 0; c < cands; ++c) out += pad(candidate_label(plan, c), kW);
  out += '\n';

  const auto emit_row = [&](const std::string& name, const std::vector<double>& vals,
                            const std::vector<int>& count) {
    out += name + std::string(14 - std::min<std::size_t>(14, name.size()), ' ');
    for (int c = 0; c < cands; ++c)
      out += pad(count[static_cast<std::size_t>(c)] > 0 ? fixed1(vals[static_cast<std::size_t>(c)]) : "NA", kW);
    out += '\n';
  };

  for (const auto& row : report.aggregates) {
    std::string label = row.estimator;
    if (label == "wbic") label = "WBIC";
    else if (label == "wbic1") label = "WBIC1";
    else if (label == "wbic2") label = "WBIC2";
    else if (label == "waic") label = "WAIC";
    else if (label == "rlct") label = "RLCT";
    else if (label == "evidence") label = "F";
    else if (label == "bic") label = "BIC";
    else if (label == "aic") label = "AIC";
    emit_row(label + " Ave.", row.mean, row.count);
    emit_row(label + " Std.", row.sd, row.count);
  }

  bool any_theory = false;
  for (const auto& t : report.theory) any_theory = any_theory || t.has_value();
  if (any_theory) {
    out += "theory lambda ";
    for (int c = 0; c < cands; ++c) {
      const auto& t = report.theory[static_cast<std::size_t>(c)];
      out += pad(t ? fixed1(t->lambda) : "NA", kW);
    }
    out += '\n';
    out += "theory m      ";
    for (int c = 0; c < cands; ++c) {
      const auto& t = report.theory[static_cast<std::size_t>(c)];
      out += pad(t ? std::to_string(t->multiplicity) : "NA", kW);
    }
    out += '\n';
  }

  out += "selected      ";
  for (int c = 0; c < cands; ++c)
    out += pad(std::to_string(report.selection_counts[static_cast<std::size_t>(c)]), kW);
  out += '\n';

  int failures = 0;
  for (const auto& row : report.cells)
    for (const auto& cell : row)
      if (!cell.ok) ++failures;
  if (failures > 0) out += "failed cells  " + std::to_string(failures) + "\n";
  return out;
}

std::string render_csv(const ExperimentReport& report) {
  std::string out = "repeat,candidate,estimator,value\n";
  const int repeats = static_cast<int>(report.cells.size());
  const int cands = static_cast<int>(report.plan.candidates.size());
  for (int i = 0; i < repeats; ++i)
    for (int c = 0; c < cands; ++c)
      for (const std::string& est : aggregate_columns()) {
        bool relevant = false;
        for (const auto& row : report.aggregates) relevant = relevant || row.estimator == est;
        if (!relevant) continue;
        const auto v = cell_value(report, i, c, est);
        out += std::to_string(i) + "," +
               std::to_string(report.plan.candidates[static_cast<std::size_t>(c)]) + "," + est + "," +
               (v ? format_double(*v) : "NA") + "\n";
      }
  return out;
}

}  // namespace

std::string render_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::text:
      return render_text(report);
    case ReportFormat::csv:
      return render_csv(report);
    case ReportFormat::json:
      return report_to_json(report).dump(2) + "\n";
  }
  throw ConfigError("render_report: unknown format");
}

std::string report_csv_to_json(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("report csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "repeat,candidate,estimator,value")
    throw ConfigError("report csv: unexpected header '" + line + "'");
  json rows = json::array();
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 4> f;
    std::size_t start = 0;
    for (int k = 0; k < 4; ++k) {
      const std::size_t pos = k < 3 ? line.find(',', start) : std::string::npos;
      if (k < 3 && pos == std::string::npos) throw ConfigError("report csv: malformed row");
      f[static_cast<std::size_t>(k)] = line.substr(start, pos == std::string::npos ? pos : pos - start);
      start = pos + 1;
    }
    json row;
    row["repeat"] = std::stoll(f[0]);
    row["candidate"] = std::stoll(f[1]);
    row["estimator"] = f[2];
    if (f[3] == "NA") {
      row["value"] = nullptr;
    } else {
      double v = 0.0;
      const auto res = std::from_chars(f[3].data(), f[3].data() + f[3].size(), v);
      if (res.ec != std::errc()) throw ConfigError("report csv: bad value '" + f[3] + "'");
      row["value"] = v;
    }
    rows.push_back(std::move(row));
  }
  return json{{"rows", std::move(rows)}}.dump(2) + "\n";
}

std::string report_json_rows_to_csv(const std::string& json_text) {
  const json j = json::parse(json_text);
  std::string out = "repeat,candidate,estimator,value\n";
  for (const auto& row : j.at("rows")) {
    out += std::to_string(row.at("repeat").get<long long>()) + "," +
           std::to_string(row.at("candidate").get<long long>()) + "," +
           row.at("estimator").get<std::string>() + ",";
    if (row.at("value").is_null())
      out += "NA";
    else
      out += format_double(row.at("value").get<double>());
    out += "\n";
  }
  return out;
}

}  // namespace wbic
