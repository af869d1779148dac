#ifndef WBIC_NUMERICS_HPP
#define WBIC_NUMERICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace wbic {

namespace detail {
// Fixed block size for parallel reductions. Blocks are summed sequentially in
// index order, so the result is independent of the number of threads.
constexpr std::int64_t kReduceBlock = 8192;

inline void neumaier_add(double& sum, double& comp, double v) {
  const double t = sum + v;
  if (std::abs(sum) >= std::abs(v))
    comp += (sum - t) + v;
  else
    comp += (v - t) + sum;
  sum = t;
}
}  // namespace detail

// Compensated (Neumaier) sum.
inline double compensated_sum(std::span<const double> v) {
  double s = 0.0, c = 0.0;
  for (double x : v) detail::neumaier_add(s, c, x);
  return s + c;
}

// Deterministic blockwise reduction of K accumulators over i in [0, n).
// f(i) must return std::array<double, K>. The parallel and serial paths visit
// blocks in the same fixed layout; results are run-to-run identical for any
// thread count.
template <int K, class F>
std::array<double, K> block_sum_array(std::int64_t n, F&& f, bool parallel = true) {
  const std::int64_t nb = (n + detail::kReduceBlock - 1) / detail::kReduceBlock;
  std::vector<std::array<double, K>> partial(static_cast<std::size_t>(std::max<std::int64_t>(nb, 1)));

#pragma omp parallel for schedule(static) if (parallel && nb > 1)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::int64_t lo = b * detail::kReduceBlock;
    const std::int64_t hi = std::min(n, lo + detail::kReduceBlock);
    std::array<double, K> s{}, c{};
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::array<double, K> v = f(i);
      for (int k = 0; k < K; ++k) detail::neumaier_add(s[k], c[k], v[k]);
    }
    for (int k = 0; k < K; ++k) s[k] += c[k];
    partial[static_cast<std::size_t>(b)] = s;
  }

  std::array<double, K> s{}, c{};
  for (std::int64_t b = 0; b < nb; ++b)
    for (int k = 0; k < K; ++k) detail::neumaier_add(s[k], c[k], partial[static_cast<std::size_t>(b)][k]);
  for (int k = 0; k < K; ++k) s[k] += c[k];
  return s;
}

template <class F>
double block_sum(std::int64_t n, F&& f, bool parallel = true) {
  return block_sum_array<1>(n, [&](std::int64_t i) { return std::array<double, 1>{f(i)}; },
                            parallel)[0];
}

// Max of f(i) over [0, n); order-independent, parallelized the same way.
template <class F>
double block_max(std::int64_t n, F&& f, bool parallel = true) {
  const std::int64_t nb = (n + detail::kReduceBlock - 1) / detail::kReduceBlock;
  std::vector<double> partial(static_cast<std::size_t>(std::max<std::int64_t>(nb, 1)),
                              -std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(static) if (parallel && nb > 1)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::int64_t lo = b * detail::kReduceBlock;
    const std::int64_t hi = std::min(n, lo + detail::kReduceBlock);
    double m = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = lo; i < hi; ++i) m = std::max(m, f(i));
    partial[static_cast<std::size_t>(b)] = m;
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double x : partial) m = std::max(m, x);
  return m;
}

// log(sum_i exp(v_i)), max-stabilized.
double log_sum_exp(std::span<const double> v);

// log((1/n) sum_i exp(v_i)).
double log_mean_exp(std::span<const double> v);

struct MeanMcse {
  double mean = 0.0;
  double mcse = 0.0;
};

// Mean with batch-means Monte Carlo standard error (floor(sqrt(R)) batches).
MeanMcse batch_means(std::span<const double> v);

// Kish effective sample size of self-normalized importance weights, from
// log-weights: (sum w)^2 / sum w^2.
double weight_ess(std::span<const double> log_weights);

// Sample mean and (n-1)-denominator standard deviation.
double mean_of(std::span<const double> v);
double sd_of(std::span<const double> v);

}  // namespace wbic

#endif
