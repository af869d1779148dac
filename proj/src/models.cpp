#include "wbic/models.hpp"

#include <cmath>

#include "wbic/errors.hpp"
#include "wbic/numerics.hpp"

namespace wbic {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace

// --------------------------- ConjugateNormalModel ---------------------------

ConjugateNormalModel::ConjugateNormalModel(int d, double noise_std, double prior_std)
    : d_(d), noise_std_(noise_std), prior_std_(prior_std) {
  if (d < 1) throw ConfigError("conjugate normal model: d must be >= 1");
  if (!(noise_std > 0.0) || !(prior_std > 0.0))
    throw ConfigError("conjugate normal model: stds must be positive");
  label_ = "conjugate-normal(d=" + std::to_string(d) + ")";
}

double ConjugateNormalModel::log_likelihood(std::span<const double> w,
                                            std::span<const double> record) const {
  const double s2 = noise_std_ * noise_std_;
  double q = 0.0;
  for (int j = 0; j < d_; ++j) {
    const double r = record[j] - w[j];
    q += r * r;
  }
  return -0.5 * d_ * (kLog2Pi + std::log(s2)) - q / (2.0 * s2);
}

double ConjugateNormalModel::log_prior(std::span<const double> w) const {
  const double t2 = prior_std_ * prior_std_;
  double q = 0.0;
  for (int j = 0; j < d_; ++j) q += w[j] * w[j];
  return -0.5 * d_ * (kLog2Pi + std::log(t2)) - q / (2.0 * t2);
}

ParameterVector ConjugateNormalModel::sample_prior(Rng& rng) const {
  std::normal_distribution<double> gauss(0.0, prior_std_);
  ParameterVector w(static_cast<std::size_t>(d_));
  for (auto& x : w) x = gauss(rng);
  return w;
}

ConjugateNormalModel::Stats ConjugateNormalModel::stats(const Dataset& data) const {
  if (data.record_dim != d_ || data.input_dim != 0)
    throw ConfigError("conjugate normal model: dataset shape mismatch");
  const std::int64_t n = data.n();
  Stats st;
  st.n = n;
  st.sum_x.assign(static_cast<std::size_t>(d_), 0.0);
  double s = 0.0, c = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rec = data.record(i);
    for (int j = 0; j < d_; ++j) {
      st.sum_x[static_cast<std::size_t>(j)] += rec[j];
      detail::neumaier_add(s, c, rec[j] * rec[j]);
    }
  }
  st.sum_sq = s + c;
  const double s2 = noise_std_ * noise_std_;
  st.c0 = 0.5 * n * d_ * (kLog2Pi + std::log(s2)) + st.sum_sq / (2.0 * s2);
  return st;
}

NllEvaluator ConjugateNormalModel::make_nll_evaluator(const Dataset& data) const {
  const Stats st = stats(data);
  const double s2 = noise_std_ * noise_std_;
  const int d = d_;
  return [st, s2, d](std::span<const double> w) {
    double wsq = 0.0, wdx = 0.0;
    for (int j = 0; j < d; ++j) {
      wsq += w[j] * w[j];
      wdx += w[j] * st.sum_x[static_cast<std::size_t>(j)];
    }
    return st.c0 + (st.n * wsq - 2.0 * wdx) / (2.0 * s2);
  };
}

ConjugateNormalModel::TemperedPosterior ConjugateNormalModel::tempered_posterior(
    double beta, const Dataset& data) const {
  const Stats st = stats(data);
  const double s2 = noise_std_ * noise_std_;
  const double t2 = prior_std_ * prior_std_;
  const double a = beta * st.n / s2 + 1.0 / t2;
  TemperedPosterior post;
  post.var = 1.0 / a;
  post.mean.resize(static_cast<std::size_t>(d_));
  for (int j = 0; j < d_; ++j)
    post.mean[static_cast<std::size_t>(j)] = (beta / s2) * st.sum_x[static_cast<std::size_t>(j)] / a;
  return post;
}

double ConjugateNormalModel::conjugate_log_partition(double beta, const Dataset& data) const {
  const Stats st = stats(data);
  const double s2 = noise_std_ * noise_std_;
  const double t2 = prior_std_ * prior_std_;
  const double a = beta * st.n / s2 + 1.0 / t2;
  const double b_sq = (beta / s2) * (beta / s2) * dot(st.sum_x, st.sum_x);
  return -beta * st.c0 - 0.5 * d_ * std::log(t2 * a) + b_sq / (2.0 * a);
}

double ConjugateNormalModel::conjugate_expected_nll(double beta, const Dataset& data) const {
  const Stats st = stats(data);
  const double s2 = noise_std_ * noise_std_;
  const TemperedPosterior post = tempered_posterior(beta, data);
  const double mu_sq = dot(post.mean, post.mean);
  const double mu_dx = dot(post.mean, st.sum_x);
  return st.c0 + (st.n * (mu_sq + d_ * post.var) - 2.0 * mu_dx) / (2.0 * s2);
}

std::uint64_t ConjugateNormalModel::fingerprint() const {
  std::uint64_t h = fnv1a("conjugate-normal", 16);
  h = fnv1a(&d_, sizeof(d_), h);
  const double params[2] = {noise_std_, prior_std_};
  return fnv1a(params, sizeof(params), h);
}

std::shared_ptr<Model> make_conjugate_normal_model(int d, double noise_std, double prior_std) {
  return std::make_shared<ConjugateNormalModel>(d, noise_std, prior_std);
}

std::pair<Dataset, ConjugateTruth> generate_conjugate_dataset(int d, std::int64_t n,
                                                              double noise_std,
                                                              std::uint64_t seed,
                                                              const ParameterVector* mean) {
  if (d < 1 || n < 1) throw ConfigError("generate_conjugate_dataset: d and n must be >= 1");
  if (!(noise_std > 0.0)) throw ConfigError("generate_conjugate_dataset: noise_std must be > 0");
  ConjugateTruth truth;
  truth.noise_std = noise_std;
  truth.mean = mean ? *mean : ParameterVector(static_cast<std::size_t>(d), 0.0);
  if (static_cast<int>(truth.mean.size()) != d)
    throw ConfigError("generate_conjugate_dataset: mean dimension mismatch");

  Dataset data;
  data.record_dim = d;
  data.input_dim = 0;
  data.values.resize(static_cast<std::size_t>(n) * d);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      data.values[static_cast<std::size_t>(i * d + j)] =
          truth.mean[static_cast<std::size_t>(j)] + noise_std * gauss(rng);
  return {std::move(data), std::move(truth)};
}

// ----------------------------- ReducedRankModel -----------------------------

ReducedRankModel::ReducedRankModel(int m, int n_out, int h, double sigma, double prior_std)
    : m_(m), n_out_(n_out), h_(h), sigma_(sigma), prior_std_(prior_std) {
  if (m < 1 || n_out < 1 || h < 1)
    throw ConfigError("reduced rank model: dimensions must be >= 1");
  if (m > 64 || n_out > 64 || h > 64)
    throw ConfigError("reduced rank model: dimensions above 64 are not supported");
  if (!(sigma > 0.0) || !(prior_std > 0.0))
    throw ConfigError("reduced rank model: sigma and prior_std must be positive");
  label_ = "rrr(M=" + std::to_string(m) + ",N=" + std::to_string(n_out) +
           ",H=" + std::to_string(h) + ")";
}

double ReducedRankModel::log_likelihood(std::span<const double> w,
                                        std::span<const double> record) const {
  const double* a = w.data();
  const double* b = w.data() + h_ * m_;
  const double* x = record.data();
  const double* y = record.data() + m_;

  double ax[64];  // H <= 64 is far beyond any use here
  for (int hh = 0; hh < h_; ++hh) {
    double s = 0.0;
    for (int j = 0; j < m_; ++j) s += a[hh * m_ + j] * x[j];
    ax[hh] = s;
  }
  const double s2 = sigma_ * sigma_;
  double q = 0.0;
  for (int nu = 0; nu < n_out_; ++nu) {
    double mean = 0.0;
    for (int hh = 0; hh < h_; ++hh) mean += b[nu * h_ + hh] * ax[hh];
    const double r = y[nu] - mean;
    q += r * r;
  }
  return -0.5 * n_out_ * (kLog2Pi + std::log(s2)) - q / (2.0 * s2);
}

double ReducedRankModel::log_prior(std::span<const double> w) const {
  const double t2 = prior_std_ * prior_std_;
  double q = 0.0;
  for (double x : w) q += x * x;
  return -0.5 * dim() * (kLog2Pi + std::log(t2)) - q / (2.0 * t2);
}

ParameterVector ReducedRankModel::sample_prior(Rng& rng) const {
  std::normal_distribution<double> gauss(0.0, prior_std_);
  ParameterVector w(static_cast<std::size_t>(dim()));
  for (auto& x : w) x = gauss(rng);
  return w;
}

NllEvaluator ReducedRankModel::make_nll_evaluator(const Dataset& data) const {
  if (data.input_dim != m_ || data.output_dim() != n_out_)
    throw ConfigError("reduced rank model: dataset shape mismatch");
  const std::int64_t n = data.n();
  // Pack inputs and outputs contiguously so the residual pass streams.
  auto xs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * m_);
  auto ys = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * n_out_);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rec = data.record(i);
    for (int j = 0; j < m_; ++j) (*xs)[static_cast<std::size_t>(i * m_ + j)] = rec[j];
    for (int nu = 0; nu < n_out_; ++nu)
      (*ys)[static_cast<std::size_t>(i * n_out_ + nu)] = rec[m_ + nu];
  }
  const int m = m_, no = n_out_, h = h_;
  const double s2 = sigma_ * sigma_;
  const double c0 = 0.5 * static_cast<double>(n) * no * (kLog2Pi + std::log(s2));
  return [xs, ys, n, m, no, h, s2, c0](std::span<const double> w) {
    const double* a = w.data();
    const double* b = w.data() + h * m;
    double comp[64 * 64];  // C = B A, N x M
    for (int nu = 0; nu < no; ++nu)
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int hh = 0; hh < h; ++hh) s += b[nu * h + hh] * a[hh * m + j];
        comp[nu * m + j] = s;
      }
    const double* x = xs->data();
    const double* y = ys->data();
    double total = 0.0, carry = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double q = 0.0;
      for (int nu = 0; nu < no; ++nu) {
        double mean = 0.0;
        for (int j = 0; j < m; ++j) mean += comp[nu * m + j] * x[i * m + j];
        const double r = y[i * no + nu] - mean;
        q += r * r;
      }
      detail::neumaier_add(total, carry, q);
    }
    return c0 + (total + carry) / (2.0 * s2);
  };
}

std::uint64_t ReducedRankModel::fingerprint() const {
  std::uint64_t h = fnv1a("reduced-rank", 12);
  const int dims[3] = {m_, n_out_, h_};
  h = fnv1a(dims, sizeof(dims), h);
  const double params[2] = {sigma_, prior_std_};
  return fnv1a(params, sizeof(params), h);
}

std::shared_ptr<Model> make_reduced_rank_model(int m, int n_out, int h, double sigma,
                                               double prior_std) {
  return std::make_shared<ReducedRankModel>(m, n_out, h, sigma, prior_std);
}

std::vector<double> RrrTruth::predict(std::span<const double> x) const {
  std::vector<double> ax(static_cast<std::size_t>(h0), 0.0);
  for (int hh = 0; hh < h0; ++hh)
    for (int j = 0; j < m; ++j) ax[static_cast<std::size_t>(hh)] += a0[hh * m + j] * x[j];
  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  for (int nu = 0; nu < n_out; ++nu)
    for (int hh = 0; hh < h0; ++hh)
      out[static_cast<std::size_t>(nu)] += b0[nu * h0 + hh] * ax[static_cast<std::size_t>(hh)];
  return out;
}

RrrTruth draw_rrr_truth(int m, int n_out, int h0, double sigma, double x_std, double coef_std,
                        std::uint64_t seed) {
  if (m < 1 || n_out < 1 || h0 < 1)
    throw ConfigError("draw_rrr_truth: dimensions must be >= 1");
  if (!(sigma > 0.0) || !(x_std > 0.0) || coef_std < 0.0)
    throw ConfigError("draw_rrr_truth: invalid stds");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RrrTruth truth;
  truth.m = m;
  truth.n_out = n_out;
  truth.h0 = h0;
  truth.sigma = sigma;
  truth.x_std = x_std;
  truth.a0.resize(static_cast<std::size_t>(h0) * m);
  truth.b0.resize(static_cast<std::size_t>(n_out) * h0);
  for (auto& v : truth.a0) v = coef_std * gauss(rng);
  for (auto& v : truth.b0) v = coef_std * gauss(rng);
  return truth;
}

Dataset sample_rrr_dataset(const RrrTruth& truth, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_rrr_dataset: n must be >= 1");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int m = truth.m, n_out = truth.n_out;
  Dataset data;
  data.record_dim = m + n_out;
  data.input_dim = m;
  data.values.resize(static_cast<std::size_t>(n) * data.record_dim);
  std::vector<double> x(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) x[static_cast<std::size_t>(j)] = truth.x_std * gauss(rng);
    const std::vector<double> mean = truth.predict(x);
    double* row = data.values.data() + i * data.record_dim;
    for (int j = 0; j < m; ++j) row[j] = x[static_cast<std::size_t>(j)];
    for (int nu = 0; nu < n_out; ++nu)
      row[m + nu] = mean[static_cast<std::size_t>(nu)] + truth.sigma * gauss(rng);
  }
  return data;
}

std::pair<Dataset, RrrTruth> generate_rrr_dataset(int m, int n_out, int h0, std::int64_t n,
                                                  double sigma, double x_std, double coef_std,
                                                  std::uint64_t seed) {
  RrrTruth truth = draw_rrr_truth(m, n_out, h0, sigma, x_std, coef_std, derive_seed(seed, 0));
  Dataset data = sample_rrr_dataset(truth, n, derive_seed(seed, 1));
  return {std::move(data), std::move(truth)};
}

double empirical_entropy(const RrrTruth& truth, const Dataset& data) {
  if (data.input_dim != truth.m || data.output_dim() != truth.n_out)
    throw ConfigError("empirical_entropy: dataset shape does not match truth");
  const std::int64_t n = data.n();
  if (n < 1) throw ConfigError("empirical_entropy: empty dataset");
  const double s2 = truth.sigma * truth.sigma;
  double s = 0.0, c = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rec = data.record(i);
    const std::vector<double> mean = truth.predict(rec.subspan(0, static_cast<std::size_t>(truth.m)));
    double q = 0.0;
    for (int nu = 0; nu < truth.n_out; ++nu) {
      const double r = rec[truth.m + nu] - mean[static_cast<std::size_t>(nu)];
      q += r * r;
    }
    detail::neumaier_add(s, c, 0.5 * truth.n_out * (kLog2Pi + std::log(s2)) + q / (2.0 * s2));
  }
  return (s + c) / static_cast<double>(n);
}

double empirical_entropy(const ConjugateTruth& truth, const Dataset& data) {
  const int d = static_cast<int>(truth.mean.size());
  if (data.record_dim != d || data.input_dim != 0)
    throw ConfigError("empirical_entropy: dataset shape does not match truth");
  const std::int64_t n = data.n();
  if (n < 1) throw ConfigError("empirical_entropy: empty dataset");
  const double s2 = truth.noise_std * truth.noise_std;
  double s = 0.0, c = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rec = data.record(i);
    double q = 0.0;
    for (int j = 0; j < d; ++j) {
      const double r = rec[j] - truth.mean[static_cast<std::size_t>(j)];
      q += r * r;
    }
    detail::neumaier_add(s, c, 0.5 * d * (kLog2Pi + std::log(s2)) + q / (2.0 * s2));
  }
  return (s + c) / static_cast<double>(n);
}

BoxConstrainedModel::BoxConstrainedModel(std::shared_ptr<const Model> base, double lo, double hi)
    : base_(std::move(base)), lo_(lo), hi_(hi) {
  if (!base_) throw ConfigError("box constraint: null base model");
  if (!(lo < hi)) throw ConfigError("box constraint: need lo < hi");
  label_ = base_->label() + "|box[" + std::to_string(lo) + "," + std::to_string(hi) + "]";
}

double BoxConstrainedModel::log_prior(std::span<const double> w) const {
  for (double x : w)
    if (x < lo_ || x > hi_) return -std::numeric_limits<double>::infinity();
  return base_->log_prior(w);
}

ParameterVector BoxConstrainedModel::sample_prior(Rng& rng) const {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    ParameterVector w = base_->sample_prior(rng);
    bool inside = true;
    for (double x : w) inside = inside && (x >= lo_ && x <= hi_);
    if (inside) return w;
  }
  throw NumericalError("box constraint: prior mass inside the box is too small to sample");
}

std::uint64_t BoxConstrainedModel::fingerprint() const {
  const double bounds[2] = {lo_, hi_};
  return fnv1a(bounds, sizeof(bounds), base_->fingerprint());
}

std::shared_ptr<Model> with_box_constraint(std::shared_ptr<const Model> base, double lo,
                                           double hi) {
  return std::make_shared<BoxConstrainedModel>(std::move(base), lo, hi);
}

std::optional<RlctTheory> theoretical_rlct_rrr(int m, int n_out, int h, int h0) {
  if (m < 1 || n_out < 1 || h < 1 || h0 < 1) throw ConfigError("theoretical_rlct_rrr: bad dims");
  if (m == 6 && n_out == 6 && h0 == 3 && h >= 1 && h <= 6) {
    static constexpr double lambdas[6] = {5.5, 10.0, 13.5, 15.0, 16.0, 17.0};
    static constexpr int mults[6] = {1, 1, 1, 2, 1, 2};
    return RlctTheory{lambdas[h - 1], mults[h - 1]};
  }
  if (h < h0) return RlctTheory{0.5 * h * (m + n_out - h), 1};
  return std::nullopt;
}

}  // namespace wbic
