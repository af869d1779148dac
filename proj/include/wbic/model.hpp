#ifndef WBIC_MODEL_HPP
#define WBIC_MODEL_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wbic/rng.hpp"

namespace wbic {

using ParameterVector = std::vector<double>;

// i.i.d. observations, one row per record. Regression records are the
// concatenation [x (input_dim), y (record_dim - input_dim)]; plain records
// have input_dim == 0.
struct Dataset {
  int record_dim = 0;
  int input_dim = 0;
  std::vector<double> values;  // n x record_dim, row-major

  std::int64_t n() const {
    return record_dim == 0 ? 0 : static_cast<std::int64_t>(values.size()) / record_dim;
  }
  std::span<const double> record(std::int64_t i) const {
    return {values.data() + i * record_dim, static_cast<std::size_t>(record_dim)};
  }
  int output_dim() const { return record_dim - input_dim; }

  std::uint64_t fingerprint() const;
};

// Bulk evaluator of n*L_n(w) for one fixed dataset. Families override
// make_nll_evaluator to precompute sufficient statistics or blocked layouts;
// the default sums per-record log likelihoods.
using NllEvaluator = std::function<double(std::span<const double>)>;

class Model {
 public:
  virtual ~Model() = default;

  virtual int dim() const = 0;
  virtual const std::string& label() const { return label_; }

  // log p(record | w); the parameter-free input density r(x) of regression
  // families is excluded (it cancels in every model comparison).
  virtual double log_likelihood(std::span<const double> w,
                                std::span<const double> record) const = 0;

  // log of the prior density; -inf outside the support.
  virtual double log_prior(std::span<const double> w) const = 0;

  virtual ParameterVector sample_prior(Rng& rng) const = 0;

  virtual NllEvaluator make_nll_evaluator(const Dataset& data) const;

  // Closed-form oracle hooks; only conjugate families implement them.
  virtual bool has_conjugate_oracle() const { return false; }
  // log integral of exp(-beta n L_n(w)) phi(w) dw.
  virtual double conjugate_log_partition(double beta, const Dataset& data) const;
  // E_w^beta[n L_n(w)].
  virtual double conjugate_expected_nll(double beta, const Dataset& data) const;

  // Content hash of family name and structural hyperparameters.
  virtual std::uint64_t fingerprint() const = 0;

 protected:
  std::string label_;
};

// L_n(w) = -(1/n) sum_i log p(X_i|w), compensated accumulation.
// Throws NumericalError (with the record index) on a non-finite term.
double empirical_log_loss(const Model& model, std::span<const double> w, const Dataset& data);

// FNV-1a over raw bytes; used for the content fingerprints above.
std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a_doubles(std::span<const double> v, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace wbic

#endif
