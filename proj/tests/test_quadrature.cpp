#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wbic/errors.hpp"
#include "wbic/models.hpp"
#include "wbic/numerics.hpp"
#include "wbic/quadrature.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace wbic;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Singular 1-d toy: p(x|w) = N(x; w^2, 1), prior N(0,1).
struct SquaredMeanModel : Model {
  SquaredMeanModel() { label_ = "squared-mean"; }
  int dim() const override { return 1; }
  double log_likelihood(std::span<const double> w, std::span<const double> record) const override {
    const double r = record[0] - w[0] * w[0];
    return -0.5 * (kLog2Pi + r * r);
  }
  double log_prior(std::span<const double> w) const override {
    return -0.5 * (kLog2Pi + w[0] * w[0]);
  }
  ParameterVector sample_prior(Rng& rng) const override {
    std::normal_distribution<double> gauss(0.0, 1.0);
    return {gauss(rng)};
  }
  std::uint64_t fingerprint() const override { return 101; }
};

// Per-record -log p identically equal to c.
struct ConstantLossModel : Model {
  double c;
  explicit ConstantLossModel(double value) : c(value) { label_ = "constant-loss"; }
  int dim() const override { return 1; }
  double log_likelihood(std::span<const double>, std::span<const double>) const override {
    return -c;
  }
  double log_prior(std::span<const double> w) const override {
    return -0.5 * (kLog2Pi + w[0] * w[0]);
  }
  ParameterVector sample_prior(Rng& rng) const override {
    std::normal_distribution<double> gauss(0.0, 1.0);
    return {gauss(rng)};
  }
  std::uint64_t fingerprint() const override { return 102; }
};

// Adds a constant to another model's log prior; shifts every log-integrand
// value by the same amount.
struct ShiftedPriorModel : Model {
  const Model* base;
  double shift;
  ShiftedPriorModel(const Model& m, double s) : base(&m), shift(s) { label_ = "shifted"; }
  int dim() const override { return base->dim(); }
  double log_likelihood(std::span<const double> w, std::span<const double> r) const override {
    return base->log_likelihood(w, r);
  }
  double log_prior(std::span<const double> w) const override {
    return base->log_prior(w) + shift;
  }
  ParameterVector sample_prior(Rng& rng) const override { return base->sample_prior(rng); }
  std::uint64_t fingerprint() const override { return base->fingerprint() ^ 0x5u; }
};

Dataset gaussian_records(int n, std::uint64_t seed) {
  auto [data, truth] = generate_conjugate_dataset(1, n, 1.0, seed);
  return data;
}

}  // namespace

TEST_CASE("beta = 0 recovers the prior normalization") {
  const auto model = make_conjugate_normal_model(1, 1.0, 2.0);
  const auto [data, truth] = generate_conjugate_dataset(1, 10, 1.0, 4);
  const GridSpec grid = GridSpec::around(1, 0.0, 8.0 * 2.0, 401);
  const GridValue v = grid_log_partition(*model, data, 0.0, grid);
  CHECK(std::abs(v.value) <= 1e-3);
  CHECK_FALSE(v.boundary_warning);
}

TEST_CASE("conjugate log partition matches the closed form within 1e-4") {
  for (int d : {1, 2}) {
    const auto model = make_conjugate_normal_model(d, 1.0, 10.0);
    const auto [data, truth] = generate_conjugate_dataset(d, 40, 1.0, 17);
    const auto* conj = dynamic_cast<const ConjugateNormalModel*>(model.get());
    for (double beta : {0.1, 0.5, 1.0}) {
      const auto post = conj->tempered_posterior(beta, data);
      const double sd = std::sqrt(post.var);
      // Center each axis on the posterior mean; the integrand carries all the
      // mass there.
      GridSpec grid;
      for (int j = 0; j < d; ++j)
        grid.axes.push_back({post.mean[static_cast<std::size_t>(j)] - 10.0 * sd,
                             post.mean[static_cast<std::size_t>(j)] + 10.0 * sd, 401});
      const GridValue v = grid_log_partition(*model, data, beta, grid);
      const double exact = model->conjugate_log_partition(beta, data);
      CHECK(std::abs(v.value - exact) <= 1e-4);
    }
  }
}

TEST_CASE("grid refinement: doubling resolution moves the result by < 1e-5") {
  const auto model = make_conjugate_normal_model(1, 1.0, 10.0);
  const auto [data, truth] = generate_conjugate_dataset(1, 40, 1.0, 23);
  const auto* conj = dynamic_cast<const ConjugateNormalModel*>(model.get());
  const auto post = conj->tempered_posterior(0.5, data);
  const double sd = std::sqrt(post.var);
  const GridSpec coarse = GridSpec::around(1, post.mean[0], 10.0 * sd, 401);
  const GridSpec fine = GridSpec::around(1, post.mean[0], 10.0 * sd, 801);
  const GridValue a = grid_log_partition(*model, data, 0.5, coarse);
  const GridValue b = grid_log_partition(*model, data, 0.5, fine);
  CHECK(std::abs(a.value - b.value) < 1e-5);
  REQUIRE(a.refinement_delta.has_value());
  CHECK(std::abs(*a.refinement_delta) < 1e-4);
}

TEST_CASE("grid_expected_nll: constant loss returns n*c for every beta") {
  const ConstantLossModel model(2.75);
  const Dataset data = gaussian_records(13, 9);
  const GridSpec grid = GridSpec::around(1, 0.0, 8.0, 101);
  for (double beta : {0.05, 0.3, 1.0}) {
    const GridValue v = grid_expected_nll(model, data, beta, grid);
    CHECK(v.value == doctest::Approx(13.0 * 2.75).epsilon(1e-13));
  }
}

TEST_CASE("grid_expected_nll matches the conjugate closed form within 1e-4 relative") {
  const auto model = make_conjugate_normal_model(2, 1.0, 10.0);
  const auto [data, truth] = generate_conjugate_dataset(2, 40, 1.0, 29);
  const auto* conj = dynamic_cast<const ConjugateNormalModel*>(model.get());
  for (double beta : {0.2, 1.0}) {
    const auto post = conj->tempered_posterior(beta, data);
    const double sd = std::sqrt(post.var);
    GridSpec grid;
    for (int j = 0; j < 2; ++j)
      grid.axes.push_back({post.mean[static_cast<std::size_t>(j)] - 10.0 * sd,
                           post.mean[static_cast<std::size_t>(j)] + 10.0 * sd, 401});
    const GridValue v = grid_expected_nll(*model, data, beta, grid);
    const double exact = model->conjugate_expected_nll(beta, data);
    CHECK(std::abs(v.value - exact) <= 1e-4 * std::abs(exact));
  }
}

TEST_CASE("thermodynamic identity: expected nll = -d/dbeta log partition") {
  const SquaredMeanModel model;
  const Dataset data = gaussian_records(25, 31);
  const GridSpec grid = GridSpec::around(1, 0.0, 8.0, 801);
  for (double beta : {0.2, 0.7}) {
    const double h = 1e-5;
    const double fd = -(grid_log_partition(model, data, beta + h, grid).value -
                        grid_log_partition(model, data, beta - h, grid).value) /
                      (2.0 * h);
    const double direct = grid_expected_nll(model, data, beta, grid).value;
    CHECK(std::abs(fd - direct) <= 1e-4 * std::abs(direct));
  }
}

TEST_CASE("Theorem 2 monotonicity: expected nll strictly decreasing in beta") {
  const SquaredMeanModel model;
  const Dataset data = gaussian_records(30, 37);
  const GridSpec grid = GridSpec::around(1, 0.0, 8.0, 801);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 20; ++k) {
    const double beta = static_cast<double>(k) / 20.0;
    const double v = grid_expected_nll(model, data, beta, grid).value;
    CHECK(v < prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("log-sum-exp accumulation is shift invariant") {
  const SquaredMeanModel base;
  const ShiftedPriorModel shifted(base, 500.0);
  const Dataset data = gaussian_records(12, 41);
  const GridSpec grid = GridSpec::around(1, 0.0, 8.0, 401);
  const double a = grid_log_partition(base, data, 0.5, grid).value;
  const double b = grid_log_partition(shifted, data, 0.5, grid).value - 500.0;
  CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));

  const double ea = grid_expected_nll(base, data, 0.5, grid).value;
  const double eb = grid_expected_nll(shifted, data, 0.5, grid).value;
  CHECK(std::abs(ea - eb) <= 1e-12 * std::abs(ea));
}

TEST_CASE("boundary warning fires when the grid is too narrow") {
  const auto model = make_conjugate_normal_model(1, 1.0, 10.0);
  const auto [data, truth] = generate_conjugate_dataset(1, 10, 1.0, 43);
  const GridSpec narrow = GridSpec::around(1, 0.0, 0.3, 21);
  const GridValue v = grid_log_partition(*model, data, 0.0, narrow);
  CHECK(v.boundary_warning);
  CHECK(v.boundary_mass > 0.01);
}

TEST_CASE("guards: dimension, axis count, point count, total size") {
  const auto big = make_conjugate_normal_model(4, 1.0, 10.0);
  const auto [data4, t4] = generate_conjugate_dataset(4, 5, 1.0, 3);
  CHECK_THROWS_AS(grid_log_partition(*big, data4, 1.0, GridSpec::uniform(4, -1, 1, 20)),
                  UnsupportedError);

  const auto model = make_conjugate_normal_model(2, 1.0, 10.0);
  const auto [data, truth] = generate_conjugate_dataset(2, 5, 1.0, 3);
  CHECK_THROWS_AS(grid_log_partition(*model, data, 1.0, GridSpec::uniform(1, -1, 1, 20)),
                  ConfigError);
  CHECK_THROWS_AS(GridSpec::uniform(2, -1, 1, 8).validate(), ConfigError);
  CHECK_THROWS_AS(GridSpec::uniform(2, 1, -1, 20).validate(), ConfigError);
  CHECK_THROWS_AS(GridSpec::uniform(3, -1, 1, 600).validate(), ConfigError);  // 2.16e8 points
}

TEST_CASE("parallel kernel agrees with the serial reference and is thread-count invariant") {
  const auto model = make_conjugate_normal_model(2, 1.0, 10.0);
  const auto [data, truth] = generate_conjugate_dataset(2, 30, 1.0, 53);
  const GridSpec grid = GridSpec::uniform(2, -4.0, 4.0, 201);

  const GridValue serial = grid_log_partition_serial(*model, data, 0.8, grid);
  const GridValue parallel = grid_log_partition(*model, data, 0.8, grid);
  CHECK(std::abs(serial.value - parallel.value) <= 1e-12 * std::max(1.0, std::abs(serial.value)));
  CHECK(serial.boundary_mass == doctest::Approx(parallel.boundary_mass).epsilon(1e-12));

  const GridValue se = grid_expected_nll_serial(*model, data, 0.8, grid);
  const GridValue pe = grid_expected_nll(*model, data, 0.8, grid);
  CHECK(std::abs(se.value - pe.value) <= 1e-12 * std::abs(se.value));

#ifdef _OPENMP
  omp_set_num_threads(3);
  const GridValue three = grid_log_partition(*model, data, 0.8, grid);
  omp_set_num_threads(5);
  const GridValue five = grid_log_partition(*model, data, 0.8, grid);
  CHECK(three.value == five.value);
  CHECK(three.value == parallel.value);
#endif
}
