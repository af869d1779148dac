// wbic: singular Bayesian model evaluation from the command line.
//
// Subcommands: generate, wbic, waic, rlct, evidence, select, experiment,
// oracle. All randomness is controlled by --seed; exit codes are 0 (success),
// 2 (config error), 3 (numerical/degeneracy error).

#include <cmath>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wbic/criteria.hpp"
#include "wbic/errors.hpp"
#include "wbic/free_energy.hpp"
#include "wbic/harness.hpp"
#include "wbic/io.hpp"
#include "wbic/mcmc.hpp"
#include "wbic/models.hpp"
#include "wbic/numerics.hpp"
#include "wbic/quadrature.hpp"
#include "wbic/rlct.hpp"

namespace {

using nlohmann::json;
using namespace wbic;

struct ModelFlags {
  std::string family = "rrr";
  int rank = 3;
  double sigma = 0.1;
  double noise_std = 1.0;
  double prior_std = 10.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", family, "Model family: rrr or conjugate")
        ->check(CLI::IsMember({"rrr", "conjugate"}));
    cmd->add_option("--rank", rank, "Rank H of the reduced rank model");
    cmd->add_option("--sigma", sigma, "Output noise std of the reduced rank model");
    cmd->add_option("--noise-std", noise_std, "Noise std of the conjugate model");
    cmd->add_option("--prior-std", prior_std, "Prior std");
  }

  std::shared_ptr<Model> build(const Dataset& data) const {
    if (family == "rrr") {
      if (data.input_dim == 0)
        throw ConfigError("rrr model needs a regression dataset (x and y columns)");
      return make_reduced_rank_model(data.input_dim, data.output_dim(), rank, sigma, prior_std);
    }
    if (data.input_dim != 0)
      throw ConfigError("conjugate model needs a plain dataset (x columns only)");
    return make_conjugate_normal_model(data.record_dim, noise_std, prior_std);
  }
};

struct ChainFlags {
  ChainConfig config;
  int n_chains = 1;
  std::uint64_t seed = 0;
  bool init_zero = false;
  std::string chain_out;
  std::string chain_format = "csv";

  void attach(CLI::App* cmd) {
    cmd->add_option("--burn-in", config.burn_in, "Burn-in steps");
    cmd->add_option("--thin", config.thin, "Steps between retained draws");
    cmd->add_option("--draws", config.draws, "Retained draws per chain");
    cmd->add_option("--step-std", config.step_std_init, "Initial proposal std");
    cmd->add_option("--target-accept", config.target_acceptance, "Adaptation target");
    cmd->add_flag("--no-adapt", [this](std::int64_t) { config.adapt = false; },
                  "Disable step-size adaptation");
    cmd->add_flag("--init-zero", init_zero,
                  "Start chains at the zero vector instead of a prior draw");
    cmd->add_option("--n-chains", n_chains, "Independent chains to pool");
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--chain-out", chain_out, "Dump the pooled chain to <prefix>.{csv|bin,json}");
    cmd->add_option("--chain-format", chain_format, "Chain dump format")
        ->check(CLI::IsMember({"csv", "binary"}));
  }

  Chain run(const Model& model, const Dataset& data, double beta) const {
    ChainConfig cfg = config;
    cfg.seed = seed;
    if (init_zero) cfg.init = ParameterVector(static_cast<std::size_t>(model.dim()), 0.0);
    const auto chains = run_chains(TemperedTarget(model, data, beta), cfg, n_chains);
    Chain pooled = pool_chains(chains);
    if (!chain_out.empty())
      write_chain(pooled, cfg, chain_out,
                  chain_format == "csv" ? ChainDumpFormat::csv : ChainDumpFormat::binary);
    return pooled;
  }
};

void emit(const json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

json model_json(const ModelFlags& flags, const Dataset& data) {
  json j;
  j["family"] = flags.family;
  if (flags.family == "rrr") {
    j["M"] = data.input_dim;
    j["N"] = data.output_dim();
    j["H"] = flags.rank;
    j["sigma"] = flags.sigma;
  } else {
    j["d"] = data.record_dim;
    j["noise_std"] = flags.noise_std;
  }
  j["prior_std"] = flags.prior_std;
  return j;
}

std::optional<double> entropy_from_truth(const std::string& truth_path, const Dataset& data) {
  if (truth_path.empty()) return std::nullopt;
  const RrrTruth truth = read_truth_json(truth_path);
  return empirical_entropy(truth, data);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Singular Bayesian model evaluation: WBIC, WAIC, RLCT and free-energy oracles"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "Synthesize a dataset (CSV) and its truth (JSON)");
  std::string gen_family = "rrr";
  int gen_m = 6, gen_n_out = 6, gen_h0 = 3, gen_d = 2;
  double gen_sigma = 0.1, gen_x_std = 3.0, gen_coef_std = 0.2, gen_noise = 1.0;
  std::int64_t gen_n = 500;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "data.csv", gen_truth_out;
  gen->add_option("--family", gen_family)->check(CLI::IsMember({"rrr", "conjugate"}));
  gen->add_option("--m", gen_m, "Input dimension M");
  gen->add_option("--n-out", gen_n_out, "Output dimension N");
  gen->add_option("--h0", gen_h0, "True rank H0");
  gen->add_option("--d", gen_d, "Dimension of the conjugate family");
  gen->add_option("--sigma", gen_sigma, "Output noise std (rrr)");
  gen->add_option("--x-std", gen_x_std, "Input std (rrr)");
  gen->add_option("--coef-std", gen_coef_std, "Coefficient std for A0, B0 (rrr)");
  gen->add_option("--noise-std", gen_noise, "Noise std (conjugate)");
  gen->add_option("--n", gen_n, "Sample count");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--out", gen_out, "Output CSV path");
  gen->add_option("--truth-out", gen_truth_out, "Truth JSON path (rrr)");

  // ---- estimator subcommands ----
  struct EstArgs {
    std::string data_path;
    std::string truth_path;
    std::string out_path;
    ModelFlags model;
    ChainFlags chain;
  };

  const auto attach_common = [](CLI::App* cmd, EstArgs& args) {
    cmd->add_option("--data", args.data_path, "Dataset CSV")->required();
    cmd->add_option("--truth", args.truth_path, "Truth JSON (enables S_n baselining)");
    cmd->add_option("--out", args.out_path, "Write JSON here instead of stdout");
    args.model.attach(cmd);
    args.chain.attach(cmd);
  };

  EstArgs wbic_args;
  auto* wbic_cmd = app.add_subcommand("wbic", "WBIC from one tempered chain at beta = 1/log n");
  attach_common(wbic_cmd, wbic_args);

  EstArgs waic_args;
  auto* waic_cmd = app.add_subcommand("waic", "WAIC from an untempered (beta = 1) chain");
  attach_common(waic_cmd, waic_args);

  EstArgs rlct_args;
  std::string rlct_method = "reweight";
  double rlct_b1 = 1.0, rlct_b2 = 1.5;
  std::vector<double> rlct_mults = {1.0, 1.25, 1.5, 2.0};
  int rlct_h0 = 0;
  int rlct_repeats = 1;
  auto* rlct_cmd = app.add_subcommand("rlct", "RLCT estimate from tempered chains");
  attach_common(rlct_cmd, rlct_args);
  rlct_cmd->add_option("--method", rlct_method)->check(CLI::IsMember({"reweight", "two-chain", "regression"}));
  rlct_cmd->add_option("--beta1-mult", rlct_b1, "beta1 in units of 1/log n");
  rlct_cmd->add_option("--beta2-mult", rlct_b2, "beta2 in units of 1/log n");
  rlct_cmd->add_option("--mults", rlct_mults, "beta multipliers for the regression method");
  rlct_cmd->add_option("--h0", rlct_h0, "True rank (attaches the theory reference)");
  rlct_cmd->add_option("--repeats", rlct_repeats, "Independent estimates to aggregate");

  EstArgs ev_args;
  int ev_rungs = 20;
  double ev_power = 5.0;
  auto* ev_cmd = app.add_subcommand("evidence", "Stepping-stone free energy estimate");
  attach_common(ev_cmd, ev_args);
  ev_cmd->add_option("--rungs", ev_rungs, "Number of ladder rungs J");
  ev_cmd->add_option("--power", ev_power, "Ladder exponent: beta_j = (j/J)^power");

  EstArgs sel_args;
  std::vector<int> sel_ranks = {1, 2, 3, 4, 5, 6};
  auto* sel_cmd = app.add_subcommand("select", "Sweep candidate ranks and pick the WBIC argmin");
  attach_common(sel_cmd, sel_args);
  sel_cmd->add_option("--ranks", sel_ranks, "Candidate ranks");

  // ---- experiment ----
  auto* exp_cmd = app.add_subcommand("experiment", "Run an ExperimentPlan from a JSON config");
  std::string exp_config, exp_out, exp_format = "text";
  bool exp_paper_exact = false;
  std::uint64_t exp_seed = 0;
  exp_cmd->add_option("--config", exp_config, "Plan JSON")->required();
  exp_cmd->add_option("--out", exp_out, "Write the report here instead of stdout");
  exp_cmd->add_option("--format", exp_format)->check(CLI::IsMember({"text", "csv", "json"}));
  exp_cmd->add_flag("--paper-exact", exp_paper_exact, "Restore the published configuration");
  auto* exp_seed_opt = exp_cmd->add_option("--seed", exp_seed, "Override the plan seed");

  // ---- oracle ----
  auto* ora_cmd = app.add_subcommand("oracle", "Grid quadrature checks for models with d <= 3");
  EstArgs ora_args;
  double ora_beta = 1.0, ora_lo = 0.0, ora_hi = 0.0, ora_span = 8.0;
  std::int64_t ora_points = 401;
  bool ora_expected = false;
  ora_cmd->add_option("--data", ora_args.data_path, "Dataset CSV")->required();
  ora_cmd->add_option("--out", ora_args.out_path, "Write JSON here instead of stdout");
  ora_args.model.attach(ora_cmd);
  ora_cmd->add_option("--beta", ora_beta, "Inverse temperature");
  ora_cmd->add_option("--grid-lo", ora_lo, "Grid lower bound (all axes)");
  ora_cmd->add_option("--grid-hi", ora_hi, "Grid upper bound (all axes)");
  ora_cmd->add_option("--grid-span", ora_span, "Half-width in prior stds when lo/hi not given");
  ora_cmd->add_option("--grid-points", ora_points, "Points per axis");
  ora_cmd->add_flag("--expected-nll", ora_expected, "Compute E^beta[nL_n] instead of log Z");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    if (gen_family == "rrr") {
      const auto [data, truth] = generate_rrr_dataset(gen_m, gen_n_out, gen_h0, gen_n, gen_sigma,
                                                      gen_x_std, gen_coef_std, gen_seed);
      write_dataset_csv(data, gen_out);
      if (!gen_truth_out.empty()) write_truth_json(truth, gen_truth_out);
    } else {
      const auto [data, truth] = generate_conjugate_dataset(gen_d, gen_n, gen_noise, gen_seed);
      write_dataset_csv(data, gen_out);
      if (!gen_truth_out.empty())
        throw ConfigError("generate: --truth-out is only available for the rrr family");
    }
    return 0;
  }

  if (wbic_cmd->parsed()) {
    const Dataset data = read_dataset_csv(wbic_args.data_path);
    const auto model = wbic_args.model.build(data);
    const std::int64_t n = data.n();
    const double beta = 1.0 / std::log(static_cast<double>(n));
    const Chain chain = wbic_args.chain.run(*model, data, beta);
    const Criterion value = wbic::wbic(chain, n);
    json j;
    j["estimator"] = "wbic";
    j["n"] = n;
    j["beta"] = beta;
    j["value"] = value.value;
    j["mcse"] = value.mcse;
    if (const auto s_n = entropy_from_truth(wbic_args.truth_path, data)) {
      j["s_n"] = *s_n;
      j["wbic1"] = value.value - static_cast<double>(n) * (*s_n);
    }
    j["model"] = model_json(wbic_args.model, data);
    j["acceptance_rate"] = chain.acceptance_rate;
    j["step_std_final"] = chain.step_std_final;
    j["seed"] = wbic_args.chain.seed;
    j["model_fingerprint"] = hex64(chain.model_fingerprint);
    j["data_fingerprint"] = hex64(chain.data_fingerprint);
    emit(j, wbic_args.out_path);
    return 0;
  }

  if (waic_cmd->parsed()) {
    const Dataset data = read_dataset_csv(waic_args.data_path);
    const auto model = waic_args.model.build(data);
    const Chain chain = waic_args.chain.run(*model, data, 1.0);
    const WaicResult value = waic(*model, chain, data);
    json j;
    j["estimator"] = "waic";
    j["n"] = data.n();
    j["t_n"] = value.t_n;
    j["v_n"] = value.v_n;
    j["value"] = value.value;
    j["mcse"] = value.mcse;
    j["model"] = model_json(waic_args.model, data);
    j["acceptance_rate"] = chain.acceptance_rate;
    j["seed"] = waic_args.chain.seed;
    j["model_fingerprint"] = hex64(chain.model_fingerprint);
    j["data_fingerprint"] = hex64(chain.data_fingerprint);
    emit(j, waic_args.out_path);
    return 0;
  }

  if (rlct_cmd->parsed()) {
    const Dataset data = read_dataset_csv(rlct_args.data_path);
    const auto model = rlct_args.model.build(data);
    const std::int64_t n = data.n();
    const double log_n = std::log(static_cast<double>(n));
    if (rlct_repeats < 1) throw ConfigError("rlct: --repeats must be >= 1");

    const auto estimate_once = [&](std::uint64_t seed) {
      ChainFlags chain_flags = rlct_args.chain;
      chain_flags.seed = seed;
      if (rlct_method == "regression") {
        std::vector<double> betas = rlct_mults;
        std::sort(betas.begin(), betas.end());
        for (double& b : betas) b /= log_n;
        ChainConfig cfg = chain_flags.config;
        cfg.seed = seed;
        if (chain_flags.init_zero)
          cfg.init = ParameterVector(static_cast<std::size_t>(model->dim()), 0.0);
        return rlct_regression(expected_nll_curve(*model, data, betas, cfg));
      }
      if (rlct_method == "reweight") {
        const Chain chain = chain_flags.run(*model, data, rlct_b1 / log_n);
        return rlct_reweighted(chain, rlct_b2 / log_n);
      }
      const Chain c1 = chain_flags.run(*model, data, rlct_b1 / log_n);
      ChainFlags second = chain_flags;
      second.seed = derive_seed(seed, 1);
      second.chain_out.clear();
      const Chain c2 = second.run(*model, data, rlct_b2 / log_n);
      const MeanMcse m1 = batch_means(c1.nll);
      const MeanMcse m2 = batch_means(c2.nll);
      return rlct_two_chain({c1.beta, m1.mean, m1.mcse}, {c2.beta, m2.mean, m2.mcse});
    };

    std::vector<double> lambdas;
    RlctEstimate est;
    for (int rep = 0; rep < rlct_repeats; ++rep) {
      const std::uint64_t seed = rlct_repeats == 1
                                     ? rlct_args.chain.seed
                                     : derive_seed(rlct_args.chain.seed, static_cast<std::uint64_t>(rep));
      est = estimate_once(seed);
      lambdas.push_back(est.lambda_hat);
    }

    if (rlct_args.model.family == "rrr" && rlct_h0 > 0)
      est.theory = theoretical_rlct_rrr(data.input_dim, data.output_dim(), rlct_args.model.rank, rlct_h0);
    else if (rlct_args.model.family == "conjugate")
      est.theory = RlctTheory{0.5 * data.record_dim, 1};
    json j;
    j["estimator"] = "rlct";
    j["method"] = rlct_method;
    j["n"] = n;
    j["beta1"] = est.beta1;
    j["beta2"] = est.beta2;
    if (rlct_repeats == 1) {
      j["lambda_hat"] = est.lambda_hat;
      j["std_error"] = est.std_error;
    } else {
      j["lambda_hat"] = mean_of(lambdas);
      j["std_error"] = sd_of(lambdas) / std::sqrt(static_cast<double>(rlct_repeats));
      j["repeats"] = rlct_repeats;
      j["lambda_per_repeat"] = lambdas;
    }
    j["ess"] = est.weight_ess ? json(*est.weight_ess) : json(nullptr);
    j["low_ess_warning"] = est.low_ess_warning;
    j["theory"] = est.theory ? json{{"lambda", est.theory->lambda}, {"m", est.theory->multiplicity}}
                             : json(nullptr);
    j["model"] = model_json(rlct_args.model, data);
    j["seed"] = rlct_args.chain.seed;
    emit(j, rlct_args.out_path);
    return 0;
  }

  if (ev_cmd->parsed()) {
    const Dataset data = read_dataset_csv(ev_args.data_path);
    const auto model = ev_args.model.build(data);
    ChainConfig cfg = ev_args.chain.config;
    cfg.seed = ev_args.chain.seed;
    if (ev_args.chain.init_zero)
      cfg.init = ParameterVector(static_cast<std::size_t>(model->dim()), 0.0);
    const auto schedule = TemperatureSchedule::power(ev_rungs, ev_power);
    const FreeEnergyEstimate est = stepping_stone(*model, data, schedule, cfg);
    json j;
    j["estimator"] = "evidence";
    j["n"] = data.n();
    j["value"] = est.value;
    j["mcse"] = est.mcse;
    j["schedule"] = est.schedule.betas;
    j["rung_terms"] = est.rung_terms;
    j["rung_mcse"] = est.rung_mcse;
    j["rung_ess"] = est.rung_ess;
    j["total_steps"] = est.total_steps;
    j["model"] = model_json(ev_args.model, data);
    j["seed"] = ev_args.chain.seed;
    std::vector<std::string> rung_seeds;
    for (int rung = 0; rung < ev_rungs; ++rung)
      rung_seeds.push_back(hex64(derive_seed(cfg.seed, static_cast<std::uint64_t>(rung))));
    j["rung_seeds"] = rung_seeds;
    emit(j, ev_args.out_path);
    return 0;
  }

  if (sel_cmd->parsed()) {
    const Dataset data = read_dataset_csv(sel_args.data_path);
    if (sel_args.model.family != "rrr")
      throw ConfigError("select: only the rrr family has a candidate sweep");
    const std::int64_t n = data.n();
    const double beta = 1.0 / std::log(static_cast<double>(n));
    const auto s_n = entropy_from_truth(sel_args.truth_path, data);
    std::vector<CriterionReport> reports;
    for (std::size_t k = 0; k < sel_ranks.size(); ++k) {
      ModelFlags flags = sel_args.model;
      flags.rank = sel_ranks[k];
      const auto model = flags.build(data);
      ChainFlags chain_flags = sel_args.chain;
      chain_flags.seed = derive_seed(sel_args.chain.seed, k);
      chain_flags.chain_out.clear();
      const Chain chain = chain_flags.run(*model, data, beta);
      const Criterion value = wbic::wbic(chain, n);
      CriterionReport rep;
      rep.label = model->label();
      rep.model_dim = model->dim();
      rep.n = n;
      rep.wbic = value.value;
      rep.wbic_mcse = value.mcse;
      rep.chain_fingerprint = fnv1a_doubles(chain.nll, fnv1a_doubles(chain.draws));
      rep.data_fingerprint = chain.data_fingerprint;
      reports.push_back(std::move(rep));
    }
    baseline_reports(reports, s_n);
    const std::size_t winner = select_model(reports);
    json j;
    j["estimator"] = "select";
    j["n"] = n;
    json jr = json::array();
    for (const auto& rep : reports) {
      json r;
      r["label"] = rep.label;
      r["dim"] = rep.model_dim;
      r["wbic"] = rep.wbic;
      r["wbic_mcse"] = rep.wbic_mcse;
      r["wbic2"] = *rep.wbic2;
      if (rep.wbic1) r["wbic1"] = *rep.wbic1;
      r["chain_fingerprint"] = hex64(rep.chain_fingerprint);
      jr.push_back(std::move(r));
    }
    j["reports"] = std::move(jr);
    j["winner_index"] = winner;
    j["winner"] = reports[winner].label;
    j["data_fingerprint"] = hex64(reports[winner].data_fingerprint);
    j["seed"] = sel_args.chain.seed;
    emit(j, sel_args.out_path);
    return 0;
  }

  if (exp_cmd->parsed()) {
    ExperimentPlan plan = ExperimentPlan::from_json_text(read_text_file(exp_config));
    if (exp_paper_exact) plan.apply_paper_exact();
    if (exp_seed_opt->count() > 0) plan.seed = exp_seed;
    const ExperimentReport report = run_experiment(plan);
    const ReportFormat fmt = exp_format == "text"  ? ReportFormat::text
                             : exp_format == "csv" ? ReportFormat::csv
                                                   : ReportFormat::json;
    const std::string text = render_report(report, fmt);
    if (exp_out.empty())
      std::cout << text;
    else
      write_text_file(exp_out, text);
    return 0;
  }

  if (ora_cmd->parsed()) {
    const Dataset data = read_dataset_csv(ora_args.data_path);
    const auto model = ora_args.model.build(data);
    GridSpec grid;
    if (ora_lo != 0.0 || ora_hi != 0.0)
      grid = GridSpec::uniform(model->dim(), ora_lo, ora_hi, ora_points);
    else
      grid = GridSpec::around(model->dim(), 0.0, ora_span * ora_args.model.prior_std, ora_points);
    const GridValue value = ora_expected ? grid_expected_nll(*model, data, ora_beta, grid)
                                         : grid_log_partition(*model, data, ora_beta, grid);
    json j;
    j["estimator"] = ora_expected ? "grid_expected_nll" : "grid_log_partition";
    j["beta"] = ora_beta;
    j["value"] = value.value;
    j["boundary_mass"] = value.boundary_mass;
    j["boundary_warning"] = value.boundary_warning;
    j["refinement_delta"] = value.refinement_delta ? json(*value.refinement_delta) : json(nullptr);
    j["grid"] = {{"lo", grid.axes.front().lo},
                 {"hi", grid.axes.front().hi},
                 {"points", grid.axes.front().points}};
    j["model"] = model_json(ora_args.model, data);
    emit(j, ora_args.out_path);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UnavailableError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
