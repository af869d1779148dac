#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wbic/errors.hpp"
#include "wbic/mcmc.hpp"
#include "wbic/models.hpp"
#include "wbic/numerics.hpp"
#include "wbic/rlct.hpp"

using namespace wbic;

namespace {

Chain synthetic_chain(std::vector<double> nll, double beta) {
  Chain c;
  c.beta = beta;
  c.dim = 1;
  c.data_n = 100;
  c.nll = std::move(nll);
  c.draws.assign(c.nll.size(), 0.0);
  return c;
}

Chain run_at(const Model& model, const Dataset& data, double beta, std::uint64_t seed) {
  ChainConfig cfg;
  cfg.burn_in = 3000;
  cfg.thin = 3;
  cfg.draws = 2000;
  cfg.step_std_init = 0.05;
  cfg.seed = seed;
  return run_chain(TemperedTarget(model, data, beta), cfg);
}

}  // namespace

TEST_CASE("rlct_two_chain: degenerate betas rejected, closed-form regular recovery") {
  CHECK_THROWS_AS(rlct_two_chain({0.2, 1.0, 0.0}, {0.2, 2.0, 0.0}), ContractError);
  CHECK_THROWS_AS(rlct_two_chain({0.2, 1.0, 0.0}, {0.2 + 5e-13, 2.0, 0.0}), ContractError);

  const std::int64_t n = 1000;
  const double log_n = std::log(static_cast<double>(n));
  for (int d : {1, 2, 4}) {
    const auto model = make_conjugate_normal_model(d, 1.0, 10.0);
    const auto [data, truth] = generate_conjugate_dataset(d, n, 1.0, 60 + static_cast<std::uint64_t>(d));
    const double b1 = 1.0 / log_n, b2 = 1.5 / log_n;
    const CurvePoint p1{b1, model->conjugate_expected_nll(b1, data), 0.0};
    const CurvePoint p2{b2, model->conjugate_expected_nll(b2, data), 0.0};
    const RlctEstimate est = rlct_two_chain(p1, p2);
    CHECK(std::abs(est.lambda_hat - 0.5 * d) <= 0.1 * d);  // Lemma 3: lambda = d/2
    CHECK(est.std_error == 0.0);
  }
}

TEST_CASE("exact-curve consistency: a + lambda/beta recovered to 1e-9") {
  const double a = 321.0, lambda = 13.5;
  std::vector<CurvePoint> curve;
  for (double beta : {0.05, 0.09, 0.13, 0.21, 0.4})
    curve.push_back({beta, a + lambda / beta, 0.0});

  const RlctEstimate two = rlct_two_chain(curve[0], curve[3]);
  CHECK(std::abs(two.lambda_hat - lambda) <= 1e-9);

  const RlctEstimate reg = rlct_regression(curve);
  CHECK(std::abs(reg.lambda_hat - lambda) <= 1e-9);
  CHECK(reg.std_error <= 1e-6);

  const RlctEstimate degenerate = rlct_regression(std::vector<CurvePoint>{curve[0], curve[1]});
  CHECK(degenerate.lambda_hat == rlct_two_chain(curve[0], curve[1]).lambda_hat);
  CHECK(degenerate.method == RlctMethod::two_chain);
}

TEST_CASE("scale awareness: adding a constant to every nll never moves lambda") {
  // Two-chain and regression: exact invariance.
  const double c = 987.654;
  const CurvePoint p1{0.1, 500.0, 0.3}, p2{0.15, 420.0, 0.3};
  const double tc_base = rlct_two_chain(p1, p2).lambda_hat;
  const double tc_shift =
      rlct_two_chain({p1.beta, p1.mean + c, p1.mcse}, {p2.beta, p2.mean + c, p2.mcse}).lambda_hat;
  CHECK(std::abs(tc_shift - tc_base) <= 1e-12 * std::abs(tc_base));

  std::vector<CurvePoint> curve, shifted;
  for (double beta : {0.08, 0.12, 0.2, 0.3}) {
    curve.push_back({beta, 50.0 + 7.5 / beta, 0.4});
    shifted.push_back({beta, 50.0 + 7.5 / beta + c, 0.4});
  }
  const double reg_base = rlct_regression(curve).lambda_hat;
  const double reg_shift = rlct_regression(shifted).lambda_hat;
  CHECK(std::abs(reg_shift - reg_base) <= 1e-12 * std::abs(reg_base));

  // Reweighted: the constant cancels in the self-normalized ratio and in the
  // final difference; verify numerically to 1e-9.
  Rng rng = make_rng(77);
  std::normal_distribution<double> gauss(100.0, 5.0);
  std::vector<double> nll(2000);
  for (auto& v : nll) v = gauss(rng);
  const Chain base = synthetic_chain(nll, 0.15);
  for (auto& v : nll) v += c;
  const Chain moved = synthetic_chain(nll, 0.15);
  const RlctEstimate rb = rlct_reweighted(base, 0.22);
  const RlctEstimate rm = rlct_reweighted(moved, 0.22);
  CHECK(std::abs(rb.lambda_hat - rm.lambda_hat) <= 1e-9 * std::max(1.0, std::abs(rb.lambda_hat)));
}

TEST_CASE("rlct_reweighted: distinctness guard and paper-default betas") {
  const Chain chain = synthetic_chain(std::vector<double>(100, 3.0), 0.2);
  CHECK_THROWS_AS(rlct_reweighted(chain, 0.2), ContractError);
  CHECK_THROWS_AS(rlct_reweighted(chain, 0.2 + 1e-15), ContractError);
  CHECK_THROWS_AS(rlct_reweighted(chain, 0.0), ContractError);

  // Cross-method agreement on a conjugate model with the paper's multipliers.
  const std::int64_t n = 1000;
  const double log_n = std::log(static_cast<double>(n));
  const auto model = make_conjugate_normal_model(2, 1.0, 10.0);
  const auto [data, truth] = generate_conjugate_dataset(2, n, 1.0, 81);
  const Chain c1 = run_at(*model, data, 1.0 / log_n, 5);
  const RlctEstimate rw = rlct_reweighted(c1, 1.5 / log_n);
  CHECK(rw.method == RlctMethod::reweight);
  REQUIRE(rw.weight_ess.has_value());
  CHECK(*rw.weight_ess >= 50.0);

  const Chain c2 = run_at(*model, data, 1.5 / log_n, 6);
  const MeanMcse m1 = batch_means(c1.nll);
  const MeanMcse m2 = batch_means(c2.nll);
  const RlctEstimate tc = rlct_two_chain({c1.beta, m1.mean, m1.mcse}, {c2.beta, m2.mean, m2.mcse});
  const double combined = std::sqrt(rw.std_error * rw.std_error + tc.std_error * tc.std_error);
  CHECK(std::abs(rw.lambda_hat - tc.lambda_hat) <= 3.0 * combined);
}

TEST_CASE("rlct_reweighted: weight degeneracy detection") {
  // k unit weights and the rest negligible: Kish ESS is about k.
  const auto spread_chain = [](int k, int total) {
    std::vector<double> nll(static_cast<std::size_t>(total), 0.0);
    for (int i = k; i < total; ++i) nll[static_cast<std::size_t>(i)] = 500.0;
    return synthetic_chain(std::move(nll), 1.0);
  };
  CHECK_THROWS_AS(rlct_reweighted(spread_chain(5, 400), 1.1), DegenerateWeightsError);

  const RlctEstimate warned = rlct_reweighted(spread_chain(30, 400), 1.1);
  CHECK(warned.low_ess_warning);
  REQUIRE(warned.weight_ess.has_value());
  CHECK(*warned.weight_ess >= 10.0);
  CHECK(*warned.weight_ess < 50.0);

  const RlctEstimate fine = rlct_reweighted(spread_chain(400, 400), 1.1);
  CHECK_FALSE(fine.low_ess_warning);
}

TEST_CASE("rlct_regression: closed-form conjugate curve, d = 4") {
  const std::int64_t n = 10000;
  const double log_n = std::log(static_cast<double>(n));
  const auto model = make_conjugate_normal_model(4, 1.0, 10.0);
  const auto [data, truth] = generate_conjugate_dataset(4, n, 1.0, 83);
  std::vector<CurvePoint> curve;
  for (double mult : {0.5, 1.0, 1.5, 2.0}) {
    const double beta = mult / log_n;
    curve.push_back({beta, model->conjugate_expected_nll(beta, data), 0.0});
  }
  const RlctEstimate est = rlct_regression(curve);
  CHECK(est.lambda_hat >= 1.8);
  CHECK(est.lambda_hat <= 2.2);
}

TEST_CASE("regular-model recovery tightens as n grows") {
  const int d = 2;
  const auto model = make_conjugate_normal_model(d, 1.0, 10.0);
  const auto lambda_at = [&](std::int64_t n, std::uint64_t seed) {
    const auto [data, truth] = generate_conjugate_dataset(d, n, 1.0, seed);
    const double log_n = std::log(static_cast<double>(n));
    const double b1 = 1.0 / log_n, b2 = 1.5 / log_n;
    return rlct_two_chain({b1, model->conjugate_expected_nll(b1, data), 0.0},
                          {b2, model->conjugate_expected_nll(b2, data), 0.0})
        .lambda_hat;
  };
  const double err3 = std::abs(lambda_at(1000, 85) - 0.5 * d);
  const double err4 = std::abs(lambda_at(10000, 85) - 0.5 * d);
  CHECK(err4 < err3);
  CHECK(err4 < 0.05 * d);
}
