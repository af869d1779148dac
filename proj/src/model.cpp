#include "wbic/model.hpp"

#include <cmath>
#include <cstring>

#include "wbic/errors.hpp"
#include "wbic/numerics.hpp"

namespace wbic {

std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_doubles(std::span<const double> v, std::uint64_t seed) {
  return fnv1a(v.data(), v.size() * sizeof(double), seed);
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = fnv1a(&record_dim, sizeof(record_dim));
  h = fnv1a(&input_dim, sizeof(input_dim), h);
  return fnv1a_doubles(values, h);
}

NllEvaluator Model::make_nll_evaluator(const Dataset& data) const {
  return [this, &data](std::span<const double> w) {
    const std::int64_t n = data.n();
    double s = 0.0, c = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      detail::neumaier_add(s, c, -log_likelihood(w, data.record(i)));
    return s + c;
  };
}

double Model::conjugate_log_partition(double, const Dataset&) const {
  throw UnavailableError("model '" + label_ + "' has no conjugate oracle");
}

double Model::conjugate_expected_nll(double, const Dataset&) const {
  throw UnavailableError("model '" + label_ + "' has no conjugate oracle");
}

double empirical_log_loss(const Model& model, std::span<const double> w, const Dataset& data) {
  const std::int64_t n = data.n();
  if (n < 1) throw ConfigError("empirical_log_loss: empty dataset");
  for (double x : w)
    if (!std::isfinite(x)) throw NumericalError("empirical_log_loss: non-finite parameter");

  double s = 0.0, c = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double ll = model.log_likelihood(w, data.record(i));
    if (!std::isfinite(ll))
      throw NumericalError("empirical_log_loss: non-finite log likelihood at record " +
                               std::to_string(i),
                           i);
    detail::neumaier_add(s, c, -ll);
  }
  return (s + c) / static_cast<double>(n);
}

}  // namespace wbic
