#pragma once

// Unbalanced power flow for the composite-bus network model.

#include "vsens/netmodel.hpp"

#include <optional>
#include <span>
#include <vector>

namespace vsens {

enum class SolverMethod {
  fixed_point,  // implicit Z-bus current injection sweep
  newton,       // Newton on rectangular voltages with a difference Jacobian
};

struct SolverConfig {
  double tolerance = 1e-10;  // max |power mismatch|, p.u.
  int max_iterations = 200;
  double relaxation = 1.0;   // fixed-point only, in [0.1, 1]
  SolverMethod method = SolverMethod::fixed_point;
  std::optional<CVector> start;  // warm start; flat start when empty

  void validate() const;
};

/// Fictitious constant-power source added on top of the composite injections.
struct ExtraInjection {
  std::size_t node = 0;
  Complex power{};
};

struct OperatingPoint {
  CVector voltage;
  std::vector<double> taps;
  int iterations = 0;
  double mismatch = 0.0;

  RVector magnitude() const { return voltage.cwiseAbs(); }
  RVector angle() const { return voltage.unaryExpr([](Complex v) { return Complex{std::arg(v), 0.0}; }).real(); }
};

/// conj(E) .* (Y E) - conj(S_inj(E) + extra) for every node; zero at slack
/// nodes. A converged operating point drives this to zero.
CVector power_balance_residual(const NetworkModel& model, const NodeIndexMap& index, const CMatrix& y,
                               const CVector& e, std::span<const ExtraInjection> extra = {});

/// |residual| per node, with Y assembled at `taps`.
RVector power_mismatch(const NetworkModel& model, const NodeIndexMap& index, const CVector& e,
                       std::span<const double> taps, std::span<const ExtraInjection> extra = {});

/// Slack phasors on slack nodes and a balanced flat profile elsewhere.
CVector flat_start(const NetworkModel& model, const NodeIndexMap& index);

/// Solves for the node voltages. Throws NonConvergenceError, NumericalError
/// (singular Y_CC) or SingularTransformError.
OperatingPoint solve_power_flow(const NetworkModel& model, const NodeIndexMap& index,
                                std::span<const double> taps, const SolverConfig& config = {},
                                std::span<const ExtraInjection> extra = {});

}  // namespace vsens
