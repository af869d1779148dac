// Compares the OpenMP kernels against their serial references: the blocked
// reduction, the quadrature sweeps, and pooled multi-chain sampling.

#include <cmath>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#else
#include <chrono>
static double omp_get_wtime() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}
static int omp_get_max_threads() { return 1; }
#endif

#include "wbic/mcmc.hpp"
#include "wbic/models.hpp"
#include "wbic/numerics.hpp"
#include "wbic/quadrature.hpp"

using namespace wbic;

namespace {

template <class F>
double timed(const char* name, const char* variant, F&& f) {
  const double t0 = omp_get_wtime();
  const double value = f();
  const double dt = omp_get_wtime() - t0;
  std::printf("%-28s %-9s %10.4f s   value %.10g\n", name, variant, dt, value);
  return dt;
}

}  // namespace

int main() {
  std::printf("threads: %d\n\n", omp_get_max_threads());

  {
    const std::int64_t n = 50'000'000;
    const auto term = [](std::int64_t i) {
      const double x = static_cast<double>(i % 9973) * 1e-4;
      return std::exp(-x * x);
    };
    const double ts = timed("block_sum 5e7 exp terms", "serial",
                            [&] { return block_sum(n, term, false); });
    const double tp = timed("block_sum 5e7 exp terms", "parallel",
                            [&] { return block_sum(n, term, true); });
    std::printf("  speedup %.2fx\n\n", ts / tp);
  }

  {
    const auto model = make_conjugate_normal_model(2, 1.0, 10.0);
    const auto [data, truth] = generate_conjugate_dataset(2, 200, 1.0, 7);
    const GridSpec grid = GridSpec::around(2, 0.0, 80.0, 801);
    const double ts = timed("grid_log_partition 801^2", "serial", [&] {
      return grid_log_partition_serial(*model, data, 0.5, grid).value;
    });
    const double tp = timed("grid_log_partition 801^2", "parallel", [&] {
      return grid_log_partition(*model, data, 0.5, grid).value;
    });
    std::printf("  speedup %.2fx\n\n", ts / tp);
  }

  {
    const auto [data, truth] = generate_rrr_dataset(6, 6, 3, 500, 0.1, 3.0, 0.2, 11);
    const auto model = make_reduced_rank_model(6, 6, 3, 0.1, 10.0);
    const NllEvaluator nll_of = model->make_nll_evaluator(data);
    Rng rng = make_rng(3);
    const ParameterVector w = model->sample_prior(rng);
    const std::int64_t reps = 20000;
    timed("rrr nll evaluator x2e4", "blocked", [&] {
      double acc = 0.0;
      for (std::int64_t i = 0; i < reps; ++i) acc += nll_of(w) * 1e-9;
      return acc;
    });
    timed("rrr nll per-record x2e4", "naive", [&] {
      double acc = 0.0;
      for (std::int64_t i = 0; i < reps; ++i)
        acc += empirical_log_loss(*model, w, data) * static_cast<double>(data.n()) * 1e-9;
      return acc;
    });
    std::printf("\n");
  }

  {
    const auto [data, truth] = generate_rrr_dataset(3, 3, 1, 200, 0.1, 3.0, 0.2, 13);
    const auto model = make_reduced_rank_model(3, 3, 1, 0.1, 10.0);
    ChainConfig cfg;
    cfg.burn_in = 2000;
    cfg.thin = 5;
    cfg.draws = 2000;
    cfg.step_std_init = 0.01;
    cfg.seed = 99;
    const TemperedTarget target(*model, data, 1.0 / std::log(200.0));
    const double ts = timed("4 chains rrr(3,3,1)", "serial", [&] {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) {
        ChainConfig c = cfg;
        c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
        acc += run_chain(target, c).acceptance_rate;
      }
      return acc;
    });
    const double tp = timed("4 chains rrr(3,3,1)", "parallel", [&] {
      const auto chains = run_chains(target, cfg, 4);
      double acc = 0.0;
      for (const auto& c : chains) acc += c.acceptance_rate;
      return acc;
    });
    std::printf("  speedup %.2fx\n", ts / tp);
  }

  return 0;
}
