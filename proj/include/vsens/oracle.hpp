#pragma once

// Perturb-and-observe estimation of the sensitivity matrices by repeated
// power-flow re-solves, and the error metrics used to compare it against
// the analytical matrices.

#include "vsens/sensitivity.hpp"

#include <string>
#include <vector>

namespace vsens {

enum class DifferenceScheme { central, forward };

struct OracleConfig {
  double power_step = 1e-4;  // p.u.
  double tap_step = 0.1;     // taps
  DifferenceScheme scheme = DifferenceScheme::central;
  double mape_floor = 1e-8;
  double solve_tolerance = 1e-12;
  int max_iterations = 500;
  SolverMethod method = SolverMethod::fixed_point;
  unsigned workers = 1;

  void validate() const;
};

/// Column of [dE/dP_k; dtheta/dP_k] for a power injection at node k.
RVector fd_sensitivity_p(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                         std::size_t node, const OracleConfig& config = {});
RVector fd_sensitivity_q(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                         std::size_t node, const OracleConfig& config = {});
/// Column of [dE/dtap; dtheta/dtap] for one regulator. Falls back to a
/// one-sided difference when the central stencil leaves the tap range.
RVector fd_sensitivity_tap(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                           std::size_t regulator, const OracleConfig& config = {});

/// All six matrices, columns distributed over `config.workers` threads.
SensitivityMatrices fd_sensitivity_all(const NetworkModel& model, const NodeIndexMap& index,
                                       const OperatingPoint& op, const OracleConfig& config = {});

struct MatrixError {
  std::string name;
  double mape = 0.0;  // percent
  double mae = 0.0;
  std::size_t counted = 0;   // entries entering the MAPE
  std::size_t excluded = 0;  // entries below the MAPE floor
  // Worst absolute discrepancy.
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  double worst_analytical = 0.0;
  double worst_reference = 0.0;
};

struct ValidationReport {
  std::vector<MatrixError> matrices;
  double analytical_seconds = 0.0;
  double oracle_seconds = 0.0;

  const MatrixError& at(std::string_view name) const;
  double max_mape() const;
};

/// MAPE over entries with |reference| > floor, MAE over all entries.
/// Throws InputError on dimension mismatch.
ValidationReport compare(const SensitivityMatrices& analytical, const SensitivityMatrices& reference,
                         double mape_floor = 1e-8);

}  // namespace vsens
