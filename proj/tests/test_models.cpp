#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wbic/errors.hpp"
#include "wbic/models.hpp"
#include "wbic/numerics.hpp"

using namespace wbic;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// p(x) fixed regardless of w; dim can be zero.
struct FixedDensityModel : Model {
  int d;
  explicit FixedDensityModel(int dim_in) : d(dim_in) { label_ = "fixed"; }
  int dim() const override { return d; }
  double log_likelihood(std::span<const double>, std::span<const double> record) const override {
    return -0.5 * (kLog2Pi + record[0] * record[0]);  // standard normal density
  }
  double log_prior(std::span<const double> w) const override {
    double q = 0.0;
    for (double x : w) q += x * x;
    return -0.5 * d * kLog2Pi - 0.5 * q;
  }
  ParameterVector sample_prior(Rng& rng) const override {
    std::normal_distribution<double> gauss(0.0, 1.0);
    ParameterVector w(static_cast<std::size_t>(d));
    for (auto& x : w) x = gauss(rng);
    return w;
  }
  std::uint64_t fingerprint() const override { return 42; }
};

Dataset plain_dataset(std::vector<double> values, int dim = 1) {
  Dataset d;
  d.record_dim = dim;
  d.input_dim = 0;
  d.values = std::move(values);
  return d;
}

// Gauss-Jordan inverse for the small gauge matrices used below.
std::vector<double> invert(std::vector<double> a, int n) {
  std::vector<double> inv(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(i * n + i)] = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[static_cast<std::size_t>(r * n + col)]) >
          std::abs(a[static_cast<std::size_t>(pivot * n + col)]))
        pivot = r;
    for (int j = 0; j < n; ++j) {
      std::swap(a[static_cast<std::size_t>(col * n + j)], a[static_cast<std::size_t>(pivot * n + j)]);
      std::swap(inv[static_cast<std::size_t>(col * n + j)], inv[static_cast<std::size_t>(pivot * n + j)]);
    }
    const double p = a[static_cast<std::size_t>(col * n + col)];
    REQUIRE(std::abs(p) > 1e-8);
    for (int j = 0; j < n; ++j) {
      a[static_cast<std::size_t>(col * n + j)] /= p;
      inv[static_cast<std::size_t>(col * n + j)] /= p;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[static_cast<std::size_t>(r * n + col)];
      for (int j = 0; j < n; ++j) {
        a[static_cast<std::size_t>(r * n + j)] -= f * a[static_cast<std::size_t>(col * n + j)];
        inv[static_cast<std::size_t>(r * n + j)] -= f * inv[static_cast<std::size_t>(col * n + j)];
      }
    }
  }
  return inv;
}

}  // namespace

TEST_CASE("empirical_log_loss: constant-likelihood model ignores w") {
  const FixedDensityModel model(1);
  const Dataset data = plain_dataset({0.3, -1.2, 2.0});
  const double l1 = empirical_log_loss(model, ParameterVector{0.0}, data);
  const double l2 = empirical_log_loss(model, ParameterVector{17.0}, data);
  CHECK(l1 == l2);

  // And with no free parameters at all.
  const FixedDensityModel none(0);
  CHECK(empirical_log_loss(none, ParameterVector{}, data) == l1);
}

TEST_CASE("empirical_log_loss: hand-evaluated 1-d normal mean model") {
  const auto model = make_conjugate_normal_model(1, 0.7, 5.0);
  const Dataset data = plain_dataset({0.4, -0.9, 1.3});
  const double w = 0.25;
  double direct = 0.0;
  for (double x : {0.4, -0.9, 1.3})
    direct += 0.5 * std::log(2.0 * M_PI * 0.49) + (x - w) * (x - w) / (2.0 * 0.49);
  direct /= 3.0;
  CHECK(empirical_log_loss(*model, ParameterVector{w}, data) ==
        doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("empirical_log_loss: compensated matches naive within 1e-10 relative") {
  const auto [data, truth] = generate_rrr_dataset(4, 4, 2, 5000, 0.1, 3.0, 0.2, 91);
  const auto model = make_reduced_rank_model(4, 4, 2, 0.1, 10.0);
  Rng rng = make_rng(7);
  const ParameterVector w = model->sample_prior(rng);
  double naive = 0.0;
  for (std::int64_t i = 0; i < data.n(); ++i) naive += -model->log_likelihood(w, data.record(i));
  naive /= static_cast<double>(data.n());
  const double value = empirical_log_loss(*model, w, data);
  CHECK(std::abs(value - naive) <= 1e-10 * std::abs(naive));
}

TEST_CASE("empirical_log_loss: non-finite term reports the record index") {
  const auto model = make_conjugate_normal_model(1, 1.0, 1.0);
  Dataset data = plain_dataset({0.0, std::numeric_limits<double>::infinity(), 1.0});
  try {
    empirical_log_loss(*model, ParameterVector{0.0}, data);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.record_index == 1);
  }
}

TEST_CASE("reduced rank model: dimensions and zero-map reduction") {
  const auto model = make_reduced_rank_model(6, 6, 3, 0.1, 10.0);
  CHECK(model->dim() == 36);

  const auto tiny = make_reduced_rank_model(1, 1, 1, 0.5, 10.0);
  CHECK(tiny->dim() == 2);
  Dataset data;
  data.record_dim = 2;
  data.input_dim = 1;
  data.values = {0.7, 1.1};
  // A = B = 0: likelihood is a fixed normal on y.
  const double expect = -0.5 * std::log(2.0 * M_PI * 0.25) - 1.1 * 1.1 / (2.0 * 0.25);
  CHECK(tiny->log_likelihood(ParameterVector{0.0, 0.0}, data.record(0)) ==
        doctest::Approx(expect).epsilon(1e-14));

  CHECK_THROWS_AS(make_reduced_rank_model(0, 1, 1, 0.1, 10.0), ConfigError);
  CHECK_THROWS_AS(make_reduced_rank_model(1, 1, 1, -0.1, 10.0), ConfigError);
}

TEST_CASE("reduced rank model: hand-evaluated Gaussian log density, M=N=2, H=1") {
  const double sigma = 0.3;
  const auto model = make_reduced_rank_model(2, 2, 1, sigma, 10.0);
  // A (1x2) then B (2x1), row-major.
  const ParameterVector w = {0.5, -1.0, 2.0, 0.25};
  const double x0 = 1.5, x1 = -0.5, y0 = 2.2, y1 = 0.1;
  Dataset data;
  data.record_dim = 4;
  data.input_dim = 2;
  data.values = {x0, x1, y0, y1};

  const double ax = 0.5 * x0 + (-1.0) * x1;
  const double m0 = 2.0 * ax, m1 = 0.25 * ax;
  const double q = (y0 - m0) * (y0 - m0) + (y1 - m1) * (y1 - m1);
  const double expect = -std::log(2.0 * M_PI * sigma * sigma) - q / (2.0 * sigma * sigma);
  CHECK(model->log_likelihood(w, data.record(0)) == doctest::Approx(expect).epsilon(1e-14));

  // The bulk evaluator agrees with the per-record path.
  const NllEvaluator nll_of = model->make_nll_evaluator(data);
  CHECK(nll_of(w) == doctest::Approx(-expect).epsilon(1e-12));
}

TEST_CASE("reduced rank model: gauge invariance (A,B) -> (GA, B G^-1)") {
  const int m = 3, n_out = 4, h = 2;
  const auto model = make_reduced_rank_model(m, n_out, h, 0.2, 10.0);
  const auto [data, truth] = generate_rrr_dataset(m, n_out, 2, 50, 0.2, 1.0, 0.5, 3);

  Rng rng = make_rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    ParameterVector w(static_cast<std::size_t>(model->dim()));
    for (auto& v : w) v = gauss(rng);
    std::vector<double> g(static_cast<std::size_t>(h) * h);
    for (auto& v : g) v = gauss(rng);
    g[0] += 2.0;  // keep it comfortably invertible
    g[3] += 2.0;
    const std::vector<double> ginv = invert(g, h);

    ParameterVector w2(w.size());
    // A' = G A
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < m; ++c) {
        double s = 0.0;
        for (int k = 0; k < h; ++k)
          s += g[static_cast<std::size_t>(r * h + k)] * w[static_cast<std::size_t>(k * m + c)];
        w2[static_cast<std::size_t>(r * m + c)] = s;
      }
    // B' = B G^-1
    const std::size_t off = static_cast<std::size_t>(h * m);
    for (int r = 0; r < n_out; ++r)
      for (int c = 0; c < h; ++c) {
        double s = 0.0;
        for (int k = 0; k < h; ++k)
          s += w[off + static_cast<std::size_t>(r * h + k)] * ginv[static_cast<std::size_t>(k * h + c)];
        w2[off + static_cast<std::size_t>(r * h + c)] = s;
      }

    const double l1 = empirical_log_loss(*model, w, data);
    const double l2 = empirical_log_loss(*model, w2, data);
    CHECK(std::abs(l1 - l2) <= 1e-8 * std::max(1.0, std::abs(l1)));
  }
}

TEST_CASE("generate_rrr_dataset: paper defaults, determinism, zero-coef degenerate") {
  const auto [data, truth] = generate_rrr_dataset(6, 6, 3, 500, 0.1, 3.0, 0.2, 12345);
  CHECK(data.n() == 500);
  CHECK(data.input_dim == 6);
  CHECK(data.output_dim() == 6);
  CHECK(truth.a0.size() == 18);
  CHECK(truth.b0.size() == 18);

  const auto [data2, truth2] = generate_rrr_dataset(6, 6, 3, 500, 0.1, 3.0, 0.2, 12345);
  CHECK(data.values == data2.values);  // bit-identical
  CHECK(truth.a0 == truth2.a0);

  const auto [data3, truth3] = generate_rrr_dataset(6, 6, 3, 2000, 0.1, 3.0, 0.0, 7);
  for (double v : truth3.a0) CHECK(v == 0.0);
  double y_mean = 0.0;
  for (std::int64_t i = 0; i < data3.n(); ++i) y_mean += data3.record(i)[6];
  y_mean /= static_cast<double>(data3.n());
  CHECK(std::abs(y_mean) < 5.0 * 0.1 / std::sqrt(2000.0));
}

TEST_CASE("empirical_entropy: Gaussian differential-entropy check over 2e4 samples") {
  const int n_out = 6;
  const double sigma = 0.1;
  const RrrTruth truth = draw_rrr_truth(6, n_out, 3, sigma, 3.0, 0.2, 5);
  const Dataset data = sample_rrr_dataset(truth, 20000, 6);
  const double s_n = empirical_entropy(truth, data);
  const double expect = n_out * std::log(sigma * std::sqrt(2.0 * M_PI)) + n_out / 2.0;
  // sd of each term is about n_out/sqrt(2); allow 5 standard errors
  CHECK(std::abs(s_n - expect) < 5.0 * (n_out / std::sqrt(2.0)) / std::sqrt(20000.0));
}

TEST_CASE("empirical_entropy: zero residual and n=2 hand dataset") {
  RrrTruth truth;
  truth.m = 1;
  truth.n_out = 2;
  truth.h0 = 1;
  truth.a0 = {1.0};
  truth.b0 = {0.5, -0.25};
  truth.sigma = 0.2;
  truth.x_std = 1.0;

  Dataset one;
  one.record_dim = 3;
  one.input_dim = 1;
  one.values = {2.0, 1.0, -0.5};  // y exactly B0 A0 x
  const double expect_zero = 0.5 * 2 * std::log(2.0 * M_PI * 0.04);
  CHECK(empirical_entropy(truth, one) == doctest::Approx(expect_zero).epsilon(1e-14));

  Dataset two;
  two.record_dim = 3;
  two.input_dim = 1;
  two.values = {2.0, 1.1, -0.4, -1.0, -0.6, 0.2};
  double direct = 0.0;
  direct += 0.5 * 2 * std::log(2.0 * M_PI * 0.04) +
            ((1.1 - 1.0) * (1.1 - 1.0) + (-0.4 + 0.5) * (-0.4 + 0.5)) / (2.0 * 0.04);
  direct += 0.5 * 2 * std::log(2.0 * M_PI * 0.04) +
            ((-0.6 + 0.5) * (-0.6 + 0.5) + (0.2 - 0.25) * (0.2 - 0.25)) / (2.0 * 0.04);
  direct /= 2.0;
  CHECK(empirical_entropy(truth, two) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("conjugate oracle: prior-average limit and one-line Gaussian convolution") {
  const int d = 2;
  const double noise = 1.5, prior = 4.0;
  const auto model = make_conjugate_normal_model(d, noise, prior);
  const auto [data, truth] = generate_conjugate_dataset(d, 50, noise, 3);

  // beta -> 0: expected nll approaches the prior average of n L_n.
  double sum_sq = 0.0;
  for (std::int64_t i = 0; i < data.n(); ++i)
    for (int j = 0; j < d; ++j) sum_sq += data.record(i)[j] * data.record(i)[j];
  const double c0 = 0.5 * data.n() * d * std::log(2.0 * M_PI * noise * noise) +
                    sum_sq / (2.0 * noise * noise);
  const double prior_avg = c0 + data.n() * d * prior * prior / (2.0 * noise * noise);
  CHECK(model->conjugate_expected_nll(1e-14, data) == doctest::Approx(prior_avg).epsilon(1e-9));

  // d=1, n=1, noise=prior=1, x=0: F = (1/2) log(4 pi).
  const auto unit = make_conjugate_normal_model(1, 1.0, 1.0);
  const Dataset zero = plain_dataset({0.0});
  CHECK(-unit->conjugate_log_partition(1.0, zero) ==
        doctest::Approx(0.5 * std::log(4.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("conjugate oracle: expected nll equals -d/dbeta log partition (central differences)") {
  const auto model = make_conjugate_normal_model(3, 0.8, 6.0);
  const auto [data, truth] = generate_conjugate_dataset(3, 200, 0.8, 9);
  for (double beta : {0.01, 0.1, 1.0 / std::log(200.0), 0.5, 1.0}) {
    const double h = 1e-6 * beta;
    const double fd = -(model->conjugate_log_partition(beta + h, data) -
                        model->conjugate_log_partition(beta - h, data)) /
                      (2.0 * h);
    const double direct = model->conjugate_expected_nll(beta, data);
    CHECK(std::abs(fd - direct) <= 1e-6 * std::abs(direct));
  }
}

TEST_CASE("theoretical_rlct_rrr: table values and unrealizable formula") {
  const auto t33 = theoretical_rlct_rrr(6, 6, 3, 3);
  REQUIRE(t33.has_value());
  CHECK(t33->lambda == 13.5);
  CHECK(t33->multiplicity == 1);

  const auto t53 = theoretical_rlct_rrr(6, 6, 5, 3);
  REQUIRE(t53.has_value());
  CHECK(t53->lambda == 16.0);
  CHECK(t53->multiplicity == 1);

  const auto t13 = theoretical_rlct_rrr(6, 6, 1, 3);
  REQUIRE(t13.has_value());
  CHECK(t13->lambda == doctest::Approx(1.0 * (6 + 6 - 1) / 2.0));

  const auto t43 = theoretical_rlct_rrr(6, 6, 4, 3);
  REQUIRE(t43.has_value());
  CHECK(t43->multiplicity == 2);

  CHECK(theoretical_rlct_rrr(3, 3, 1, 2)->lambda == doctest::Approx(2.5));
  CHECK_FALSE(theoretical_rlct_rrr(4, 4, 3, 2).has_value());  // realizable, no table
}

TEST_CASE("box constraint truncates the prior and keeps the likelihood") {
  const auto base = make_conjugate_normal_model(2, 1.0, 5.0);
  const auto boxed = with_box_constraint(base, -1.0, 1.0);
  CHECK(boxed->dim() == 2);

  const ParameterVector inside{0.5, -0.5}, outside{1.5, 0.0};
  CHECK(boxed->log_prior(inside) == base->log_prior(inside));
  CHECK(boxed->log_prior(outside) == -std::numeric_limits<double>::infinity());

  Dataset data = plain_dataset({0.2, -0.1}, 2);
  CHECK(boxed->log_likelihood(inside, data.record(0)) ==
        base->log_likelihood(inside, data.record(0)));

  Rng rng = make_rng(15);
  for (int k = 0; k < 50; ++k) {
    const ParameterVector w = boxed->sample_prior(rng);
    for (double x : w) {
      CHECK(x >= -1.0);
      CHECK(x <= 1.0);
    }
  }
  CHECK(boxed->fingerprint() != base->fingerprint());
  CHECK_THROWS_AS(with_box_constraint(base, 2.0, 1.0), ConfigError);
}

TEST_CASE("dataset fingerprint changes with contents") {
  const auto [a, ta] = generate_conjugate_dataset(2, 10, 1.0, 1);
  const auto [b, tb] = generate_conjugate_dataset(2, 10, 1.0, 2);
  CHECK(a.fingerprint() != b.fingerprint());
  const auto [c, tc] = generate_conjugate_dataset(2, 10, 1.0, 1);
  CHECK(a.fingerprint() == c.fingerprint());
}
