#ifndef WBIC_MODELS_HPP
#define WBIC_MODELS_HPP

#include <memory>
#include <optional>
#include <utility>

#include "wbic/model.hpp"

namespace wbic {

// ---------------------------------------------------------------------------
// Conjugate normal-mean family: x ~ N(w, noise_std^2 I_d), w ~ N(0, prior_std^2 I_d).
// Regular model; every tempered-posterior quantity has a closed Gaussian form,
// which backs the oracle hooks used to validate MCMC and the estimators.
// ---------------------------------------------------------------------------

class ConjugateNormalModel : public Model {
 public:
  ConjugateNormalModel(int d, double noise_std, double prior_std);

  int dim() const override { return d_; }
  double log_likelihood(std::span<const double> w, std::span<const double> record) const override;
  double log_prior(std::span<const double> w) const override;
  ParameterVector sample_prior(Rng& rng) const override;
  NllEvaluator make_nll_evaluator(const Dataset& data) const override;

  bool has_conjugate_oracle() const override { return true; }
  double conjugate_log_partition(double beta, const Dataset& data) const override;
  double conjugate_expected_nll(double beta, const Dataset& data) const override;

  // Tempered posterior is N(mean, var I_d); exposed for tests.
  struct TemperedPosterior {
    ParameterVector mean;
    double var;
  };
  TemperedPosterior tempered_posterior(double beta, const Dataset& data) const;

  double noise_std() const { return noise_std_; }
  double prior_std() const { return prior_std_; }

  std::uint64_t fingerprint() const override;

 private:
  struct Stats {
    double sum_sq;                // sum_i ||x_i||^2
    std::vector<double> sum_x;    // sum_i x_i
    double c0;                    // beta-free part of n L_n
    std::int64_t n;
  };
  Stats stats(const Dataset& data) const;

  int d_;
  double noise_std_, prior_std_;
};

std::shared_ptr<Model> make_conjugate_normal_model(int d, double noise_std, double prior_std);

struct ConjugateTruth {
  ParameterVector mean;
  double noise_std = 1.0;
};

// Draws n records from N(mean, noise_std^2 I_d); mean defaults to zero.
std::pair<Dataset, ConjugateTruth> generate_conjugate_dataset(int d, std::int64_t n,
                                                              double noise_std,
                                                              std::uint64_t seed,
                                                              const ParameterVector* mean = nullptr);

// ---------------------------------------------------------------------------
// Reduced rank regression: y = B A x + N(0, sigma^2 I_N), A is HxM, B is NxH.
// Singular whenever H exceeds the rank needed for the truth.
// ---------------------------------------------------------------------------

class ReducedRankModel : public Model {
 public:
  ReducedRankModel(int m, int n_out, int h, double sigma, double prior_std);

  int dim() const override { return h_ * m_ + n_out_ * h_; }
  double log_likelihood(std::span<const double> w, std::span<const double> record) const override;
  double log_prior(std::span<const double> w) const override;
  ParameterVector sample_prior(Rng& rng) const override;
  NllEvaluator make_nll_evaluator(const Dataset& data) const override;

  int input_dim() const { return m_; }
  int output_dim() const { return n_out_; }
  int rank() const { return h_; }
  double sigma() const { return sigma_; }

  // Parameters are A row-major then B row-major.
  std::span<const double> a_part(std::span<const double> w) const {
    return w.subspan(0, static_cast<std::size_t>(h_ * m_));
  }
  std::span<const double> b_part(std::span<const double> w) const {
    return w.subspan(static_cast<std::size_t>(h_ * m_), static_cast<std::size_t>(n_out_ * h_));
  }

  std::uint64_t fingerprint() const override;

 private:
  int m_, n_out_, h_;
  double sigma_, prior_std_;
};

std::shared_ptr<Model> make_reduced_rank_model(int m, int n_out, int h, double sigma,
                                               double prior_std);

struct RrrTruth {
  int m = 0, n_out = 0, h0 = 0;
  std::vector<double> a0;  // h0 x m, row-major
  std::vector<double> b0;  // n_out x h0, row-major
  double sigma = 0.1;
  double x_std = 3.0;

  // B0 A0 x for one input vector.
  std::vector<double> predict(std::span<const double> x) const;
};

// Coefficient matrices drawn entrywise from N(0, coef_std^2).
RrrTruth draw_rrr_truth(int m, int n_out, int h0, double sigma, double x_std, double coef_std,
                        std::uint64_t seed);

// x_i ~ N(0, x_std^2 I), y_i = B0 A0 x_i + N(0, sigma^2 I).
Dataset sample_rrr_dataset(const RrrTruth& truth, std::int64_t n, std::uint64_t seed);

// draw_rrr_truth + sample_rrr_dataset with sub-derived seeds; a pure function
// of its arguments including seed.
std::pair<Dataset, RrrTruth> generate_rrr_dataset(int m, int n_out, int h0, std::int64_t n,
                                                  double sigma, double x_std, double coef_std,
                                                  std::uint64_t seed);

// S_n = -(1/n) sum_i log q(X_i) under the generating truth; q is the
// conditional density of y given x (input density excluded, matching the
// likelihood convention).
double empirical_entropy(const RrrTruth& truth, const Dataset& data);
double empirical_entropy(const ConjugateTruth& truth, const Dataset& data);

// ---------------------------------------------------------------------------
// Reference RLCT values for reduced rank regression.
// ---------------------------------------------------------------------------

struct RlctTheory {
  double lambda = 0.0;
  int multiplicity = 1;
};

// Unrealizable case (H < H0): lambda = H(M+N-H)/2, m = 1. The realizable
// (6,6,H0=3) grid carries tabulated values for H = 1..6. Anything else is
// unavailable.
std::optional<RlctTheory> theoretical_rlct_rrr(int m, int n_out, int h, int h0);

// ---------------------------------------------------------------------------
// Box constraint wrapper: truncates the wrapped prior to [lo, hi]^d by
// returning -inf outside, for callers who want a literally compact parameter
// set. Prior draws are rejection-sampled into the box; the truncation
// constant is left unnormalized (it cancels from every comparison made here).
// ---------------------------------------------------------------------------

class BoxConstrainedModel : public Model {
 public:
  BoxConstrainedModel(std::shared_ptr<const Model> base, double lo, double hi);

  int dim() const override { return base_->dim(); }
  double log_likelihood(std::span<const double> w, std::span<const double> record) const override {
    return base_->log_likelihood(w, record);
  }
  double log_prior(std::span<const double> w) const override;
  ParameterVector sample_prior(Rng& rng) const override;
  NllEvaluator make_nll_evaluator(const Dataset& data) const override {
    return base_->make_nll_evaluator(data);
  }
  std::uint64_t fingerprint() const override;

 private:
  std::shared_ptr<const Model> base_;
  double lo_, hi_;
};

std::shared_ptr<Model> with_box_constraint(std::shared_ptr<const Model> base, double lo, double hi);

}  // namespace wbic

#endif
