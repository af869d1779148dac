#include "wbic/quadrature.hpp"

#include <array>
#include <cmath>

#include "wbic/errors.hpp"
#include "wbic/numerics.hpp"

namespace wbic {

GridSpec GridSpec::uniform(int dims, double lo, double hi, std::int64_t points) {
  GridSpec g;
  g.axes.assign(static_cast<std::size_t>(dims), Axis{lo, hi, points});
  return g;
}

GridSpec GridSpec::around(int dims, double center, double halfwidth, std::int64_t points) {
  return uniform(dims, center - halfwidth, center + halfwidth, points);
}

std::int64_t GridSpec::total_points() const {
  std::int64_t total = 1;
  for (const Axis& ax : axes) total *= ax.points;
  return total;
}

void GridSpec::validate() const {
  if (axes.empty()) throw ConfigError("grid spec: no axes");
  for (const Axis& ax : axes) {
    if (!std::isfinite(ax.lo) || !std::isfinite(ax.hi) || !(ax.lo < ax.hi))
      throw ConfigError("grid spec: bounds must be finite with lo < hi");
    if (ax.points < 16) throw ConfigError("grid spec: need at least 16 points per dimension");
  }
  if (total_points() > 100000000LL)
    throw ConfigError("grid spec: more than 1e8 total points");
}

namespace {

constexpr double kLogHalf = -0.6931471805599453094172321214582;

struct GridFrame {
  int dims = 0;
  std::array<double, 3> lo{}, step{};
  std::array<std::int64_t, 3> points{};
  std::int64_t total = 0;
  double log_volume = 0.0;  // sum of log spacing

  explicit GridFrame(const GridSpec& grid) {
    dims = static_cast<int>(grid.axes.size());
    total = 1;
    for (int k = 0; k < dims; ++k) {
      const auto& ax = grid.axes[static_cast<std::size_t>(k)];
      lo[static_cast<std::size_t>(k)] = ax.lo;
      points[static_cast<std::size_t>(k)] = ax.points;
      step[static_cast<std::size_t>(k)] = (ax.hi - ax.lo) / static_cast<double>(ax.points - 1);
      log_volume += std::log(step[static_cast<std::size_t>(k)]);
      total *= ax.points;
    }
  }

  // Decodes a flat index; fills w, the trapezoid endpoint log-weight, and
  // whether the node lies on the grid boundary.
  void node(std::int64_t idx, double* w, double& log_coef, bool& boundary) const {
    log_coef = 0.0;
    boundary = false;
    for (int k = 0; k < dims; ++k) {
      const std::int64_t p = points[static_cast<std::size_t>(k)];
      const std::int64_t i = idx % p;
      idx /= p;
      w[k] = lo[static_cast<std::size_t>(k)] + static_cast<double>(i) * step[static_cast<std::size_t>(k)];
      if (i == 0 || i == p - 1) {
        log_coef += kLogHalf;
        boundary = true;
      }
    }
  }
};

struct PassResult {
  double log_norm = 0.0;       // log sum of exp(li)*coef + log_volume
  double expected_nll = 0.0;   // integrand-weighted mean of n L_n
  double boundary_mass = 0.0;
};

// One max pass plus one sum pass over the nodes of `frame`, where node j of
// the pass maps to flat index `remap(j)` of the frame (identity for the full
// grid, stride-2 embedding for the half grid).
template <class Remap>
PassResult sweep(const GridFrame& frame, std::int64_t count, const Remap& remap,
                 const Model& model, const NllEvaluator& nll_of, double beta, double log_volume,
                 bool parallel) {
  const auto log_integrand = [&](std::int64_t j, double& nll_out, bool& boundary) {
    double w[3];
    double log_coef;
    frame.node(remap(j), w, log_coef, boundary);
    const std::span<const double> ws(w, static_cast<std::size_t>(frame.dims));
    const double lp = model.log_prior(ws);
    double li = lp + log_coef;
    nll_out = 0.0;
    if (beta != 0.0 && lp > -std::numeric_limits<double>::infinity()) {
      nll_out = nll_of(ws);
      li -= beta * nll_out;
    } else if (beta != 0.0) {
      nll_out = std::numeric_limits<double>::infinity();
    }
    return li;
  };

  const double m = block_max(
      count,
      [&](std::int64_t j) {
        double nll;
        bool boundary;
        return log_integrand(j, nll, boundary);
      },
      parallel);
  if (!std::isfinite(m))
    throw NumericalError("grid quadrature: integrand is zero or non-finite everywhere");

  const std::array<double, 3> sums = block_sum_array<3>(
      count,
      [&](std::int64_t j) {
        double nll;
        bool boundary;
        const double li = log_integrand(j, nll, boundary);
        const double e = std::exp(li - m);
        return std::array<double, 3>{e, boundary ? e : 0.0, e == 0.0 ? 0.0 : e * nll};
      },
      parallel);

  PassResult out;
  out.log_norm = m + std::log(sums[0]) + log_volume;
  out.boundary_mass = sums[1] / sums[0];
  out.expected_nll = sums[2] / sums[0];
  return out;
}

GridValue evaluate(const Model& model, const Dataset& data, double beta, const GridSpec& grid,
                   bool want_expected, bool parallel) {
  grid.validate();
  if (model.dim() > 3)
    throw UnsupportedError("grid quadrature supports models with dim <= 3");
  if (static_cast<int>(grid.axes.size()) != model.dim())
    throw ConfigError("grid spec: axis count must equal model dimension");
  if (beta < 0.0 || !std::isfinite(beta))
    throw ConfigError("grid quadrature: beta must be >= 0 and finite");

  const GridFrame frame(grid);
  const NllEvaluator nll_of = model.make_nll_evaluator(data);

  const auto identity = [](std::int64_t j) { return j; };
  const PassResult fine =
      sweep(frame, frame.total, identity, model, nll_of, beta, frame.log_volume, parallel);

  GridValue out;
  out.value = want_expected ? fine.expected_nll : fine.log_norm;
  out.boundary_mass = fine.boundary_mass;
  out.boundary_warning = fine.boundary_mass > 0.01;

  bool all_odd = true;
  for (const auto& ax : grid.axes) all_odd = all_odd && (ax.points % 2 == 1);
  if (all_odd) {
    // Half-resolution pass over the even-index sub-grid (spacing doubled).
    std::array<std::int64_t, 3> half_points{};
    std::int64_t half_total = 1;
    double half_log_volume = 0.0;
    for (int k = 0; k < frame.dims; ++k) {
      half_points[static_cast<std::size_t>(k)] = (frame.points[static_cast<std::size_t>(k)] + 1) / 2;
      half_total *= half_points[static_cast<std::size_t>(k)];
      half_log_volume += std::log(2.0 * frame.step[static_cast<std::size_t>(k)]);
    }
    const auto embed = [&](std::int64_t j) {
      std::int64_t flat = 0, mult = 1;
      for (int k = 0; k < frame.dims; ++k) {
        const std::int64_t i = j % half_points[static_cast<std::size_t>(k)];
        j /= half_points[static_cast<std::size_t>(k)];
        flat += 2 * i * mult;
        mult *= frame.points[static_cast<std::size_t>(k)];
      }
      return flat;
    };
    const PassResult coarse =
        sweep(frame, half_total, embed, model, nll_of, beta, half_log_volume, parallel);
    out.refinement_delta =
        want_expected ? fine.expected_nll - coarse.expected_nll : fine.log_norm - coarse.log_norm;
  }
  return out;
}

}  // namespace

GridValue grid_log_partition(const Model& model, const Dataset& data, double beta,
                             const GridSpec& grid) {
  return evaluate(model, data, beta, grid, false, true);
}

GridValue grid_expected_nll(const Model& model, const Dataset& data, double beta,
                            const GridSpec& grid) {
  return evaluate(model, data, beta, grid, true, true);
}

namespace {

// Independent plain-loop implementation used to validate the blocked kernel:
// same geometry, straightforward two-pass accumulation in index order.
GridValue evaluate_serial_reference(const Model& model, const Dataset& data, double beta,
                                    const GridSpec& grid, bool want_expected) {
  grid.validate();
  if (model.dim() > 3)
    throw UnsupportedError("grid quadrature supports models with dim <= 3");
  if (static_cast<int>(grid.axes.size()) != model.dim())
    throw ConfigError("grid spec: axis count must equal model dimension");
  if (beta < 0.0 || !std::isfinite(beta))
    throw ConfigError("grid quadrature: beta must be >= 0 and finite");

  const GridFrame frame(grid);
  const NllEvaluator nll_of = model.make_nll_evaluator(data);

  const auto log_integrand = [&](std::int64_t idx, double& nll_out, bool& boundary) {
    double w[3];
    double log_coef;
    frame.node(idx, w, log_coef, boundary);
    const std::span<const double> ws(w, static_cast<std::size_t>(frame.dims));
    const double lp = model.log_prior(ws);
    double li = lp + log_coef;
    nll_out = 0.0;
    if (beta != 0.0 && lp > -std::numeric_limits<double>::infinity()) {
      nll_out = nll_of(ws);
      li -= beta * nll_out;
    }
    return li;
  };

  double m = -std::numeric_limits<double>::infinity();
  for (std::int64_t idx = 0; idx < frame.total; ++idx) {
    double nll;
    bool boundary;
    m = std::max(m, log_integrand(idx, nll, boundary));
  }
  if (!std::isfinite(m))
    throw NumericalError("grid quadrature: integrand is zero or non-finite everywhere");

  double norm = 0.0, bmass = 0.0, weighted_nll = 0.0;
  for (std::int64_t idx = 0; idx < frame.total; ++idx) {
    double nll;
    bool boundary;
    const double e = std::exp(log_integrand(idx, nll, boundary) - m);
    norm += e;
    if (boundary) bmass += e;
    if (e != 0.0) weighted_nll += e * nll;
  }

  GridValue out;
  out.value = want_expected ? weighted_nll / norm : m + std::log(norm) + frame.log_volume;
  out.boundary_mass = bmass / norm;
  out.boundary_warning = out.boundary_mass > 0.01;
  return out;
}

}  // namespace

GridValue grid_log_partition_serial(const Model& model, const Dataset& data, double beta,
                                    const GridSpec& grid) {
  return evaluate_serial_reference(model, data, beta, grid, false);
}

GridValue grid_expected_nll_serial(const Model& model, const Dataset& data, double beta,
                                   const GridSpec& grid) {
  return evaluate_serial_reference(model, data, beta, grid, true);
}

}  // namespace wbic
