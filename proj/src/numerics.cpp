#include "wbic/numerics.hpp"

#include <cmath>

#include "wbic/errors.hpp"

namespace wbic {

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw ConfigError("log_sum_exp: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;  // all -inf, or a NaN/inf poisoned the max
  double s = 0.0, c = 0.0;
  for (double x : v) detail::neumaier_add(s, c, std::exp(x - m));
  return m + std::log(s + c);
}

double log_mean_exp(std::span<const double> v) {
  return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return compensated_sum(v) / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0, c = 0.0;
  for (double x : v) detail::neumaier_add(s, c, (x - m) * (x - m));
  return std::sqrt((s + c) / static_cast<double>(n - 1));
}

MeanMcse batch_means(std::span<const double> v) {
  const std::int64_t r = static_cast<std::int64_t>(v.size());
  if (r == 0) throw ConfigError("batch_means: empty input");
  const double mean = mean_of(v);
  if (r < 4) return {mean, 0.0};

  const std::int64_t nb = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(r))));
  const std::int64_t bs = r / nb;  // first nb*bs values are used for the error
  std::vector<double> bm(static_cast<std::size_t>(nb));
  for (std::int64_t b = 0; b < nb; ++b)
    bm[static_cast<std::size_t>(b)] = mean_of(v.subspan(static_cast<std::size_t>(b * bs),
                                                        static_cast<std::size_t>(bs)));
  const double sd = sd_of(bm);
  return {mean, sd / std::sqrt(static_cast<double>(nb))};
}

double weight_ess(std::span<const double> log_weights) {
  if (log_weights.empty()) return 0.0;
  const double l1 = log_sum_exp(log_weights);
  std::vector<double> twice(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) twice[i] = 2.0 * log_weights[i];
  const double l2 = log_sum_exp(twice);
  return std::exp(2.0 * l1 - l2);
}

}  // namespace wbic
