#pragma once

// Analytical voltage magnitude/angle sensitivities to nodal active and
// reactive power injections and to regulator tap positions.
//
// Linearizing the complex power balance at an operating point gives
//
//   C dE/du + j D dtheta/du = F
//
// with C = C1 + C2 + C3 + C4 and D = D1 + D2 + D3. Splitting real and
// imaginary parts yields the real system
//
//   [ Re C  -Im D ] [ dE/du     ]   [ Re F ]
//   [ Im C   Re D ] [ dtheta/du ] = [ Im F ]
//
// whose matrix does not depend on u, so one factorization serves every
// input. Slack nodes are pinned by replacing their rows with unit rows.

#include "vsens/netmodel.hpp"
#include "vsens/powerflow.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace vsens {

struct SensitivityMatrices {
  RMatrix dE_dP, dTheta_dP;          // N x N, p.u./p.u. and rad/p.u.
  RMatrix dE_dQ, dTheta_dQ;          // N x N
  RMatrix dE_dGamma, dTheta_dGamma;  // N x R, p.u./tap and rad/tap

  static constexpr std::array<std::string_view, 6> names{"dE_dP",  "dTheta_dP",    "dE_dQ",
                                                         "dTheta_dQ", "dE_dGamma", "dTheta_dGamma"};
  const RMatrix& operator[](std::size_t k) const;
  RMatrix& operator[](std::size_t k);
};

struct BlockOptions {
  // Off reproduces the classical Wye-load-only formulation (C3 = C4 = D3 = 0).
  bool generalized_terms = true;
};

struct SystemBlocks {
  CMatrix c1, c2, c3, c4;
  CMatrix d1, d2, d3;
  RMatrix augmented;  // 2N x 2N
  std::vector<std::size_t> slack;
  bool slack_applied = false;

  CMatrix c() const { return c1 + c2 + c3 + c4; }
  CMatrix d() const { return d1 + d2 + d3; }
};

/// Assembles every term at the operating point. The augmented matrix equals
/// the Jacobian of the stacked power-balance residual with respect to (E, theta).
SystemBlocks build_system_blocks(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                                 const BlockOptions& options = {});

/// Replaces row i and row N+i of every slack index i with unit rows.
SystemBlocks apply_slack(SystemBlocks blocks, std::span<const std::size_t> slack);

RMatrix rhs_for_p(std::size_t n);
RMatrix rhs_for_q(std::size_t n);
/// One column per regulator: [Re F; Im F] with F = -conj(E) .* (dY/dtap E).
RMatrix rhs_for_taps(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op);

/// LU of a slack-replaced system, reused across right-hand sides.
class FactorizedSystem {
 public:
  static constexpr double kIllConditioned = 1e12;

  explicit FactorizedSystem(const SystemBlocks& blocks);

  /// Zeros the slack rows of `rhs` and solves. Slack rows of the result are
  /// exactly zero. Records the residual.
  RMatrix solve(RMatrix rhs) const;

  double condition_estimate() const { return 1.0 / rcond_; }
  bool ill_conditioned() const { return condition_estimate() > kIllConditioned; }
  double max_residual() const { return max_residual_; }

 private:
  RMatrix a_;
  Eigen::PartialPivLU<RMatrix> lu_;
  std::vector<std::size_t> slack_;
  double rcond_ = 0.0;
  mutable double max_residual_ = 0.0;
};

struct SensitivityResult {
  SensitivityMatrices matrices;
  double condition_estimate = 0.0;
  double max_residual = 0.0;
  bool ill_conditioned = false;
};

SensitivityResult solve_all(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                            const BlockOptions& options = {});

/// Turns `bus` into a voltage-controlled bus: loads removed and a
/// single-phase DER with a very steep volt-var droop on every phase.
NetworkModel make_pv_bus(NetworkModel model, std::string_view bus, double setpoint = 1.0,
                         double droop = -1e6, double p = 0.0);

}  // namespace vsens
