#ifndef WBIC_QUADRATURE_HPP
#define WBIC_QUADRATURE_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "wbic/model.hpp"

namespace wbic {

// Tensor-product trapezoid grid for d <= 3 oracle integration.
struct GridSpec {
  struct Axis {
    double lo = -80.0;
    double hi = 80.0;
    std::int64_t points = 401;
  };
  std::vector<Axis> axes;

  static GridSpec uniform(int dims, double lo, double hi, std::int64_t points);
  // Prior mean +/- 8 prior std per dimension, 401 points (the default oracle grid).
  static GridSpec around(int dims, double center, double halfwidth, std::int64_t points = 401);

  std::int64_t total_points() const;
  void validate() const;
};

struct GridValue {
  double value = 0.0;
  // Fraction of integrand mass sitting in boundary cells; warning above 1%.
  double boundary_mass = 0.0;
  bool boundary_warning = false;
  // value minus the half-resolution value (present when every axis has an odd
  // point count, so the coarse grid reuses the fine nodes).
  std::optional<double> refinement_delta;
};

// log integral of exp(-beta n L_n(w)) phi(w) dw, trapezoid rule with
// log-sum-exp accumulation. At beta = 1 this is -F.
GridValue grid_log_partition(const Model& model, const Dataset& data, double beta,
                             const GridSpec& grid);

// E_w^beta[n L_n(w)] as a ratio of two grid integrals sharing a single
// integrand pass.
GridValue grid_expected_nll(const Model& model, const Dataset& data, double beta,
                            const GridSpec& grid);

// Serial reference implementations (plain loops, no blocking); kept for
// validating the parallel kernels.
GridValue grid_log_partition_serial(const Model& model, const Dataset& data, double beta,
                                    const GridSpec& grid);
GridValue grid_expected_nll_serial(const Model& model, const Dataset& data, double beta,
                                   const GridSpec& grid);

}  // namespace wbic

#endif
