#pragma once

// Composite bus injection model: Wye loads, Delta loads (through the
// voltage-dependent delta-to-wye transform) and volt-var DERs.
//
// Powers are per-unit and follow the load convention for loads (positive =
// consumed) and the generator convention for DERs (positive = injected).
// Per-bus three-vectors are indexed by phase slot a=0, b=1, c=2; Delta load
// pair slots are ab=0, bc=1, ca=2, so the pair starting at phase p lives in
// slot p.

#include "vsens/types.hpp"

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vsens {

using Vector3c = Eigen::Vector3cd;
using Matrix3c = Eigen::Matrix3cd;

/// Piecewise-linear volt-var curve: Q = droop * (E - v_ref) inside
/// [v_lo, v_hi], held at the band-edge value outside.
struct VoltVarCurve {
  double droop = 0.0;  // dQ/dE, p.u. reactive power per p.u. voltage
  double v_ref = 1.0;
  double v_lo = 0.9;
  double v_hi = 1.1;

  double reactive(double e) const;
  /// Local slope; the inside-band value is used at the breakpoints.
  double slope(double e) const;
};

struct WyeLoad {
  std::array<Complex, 3> power{};
};

struct DeltaLoad {
  std::array<Complex, 3> power{};  // ab, bc, ca
  bool empty() const;
};

struct Der1Phase {
  Phase phase = Phase::a;
  double p = 0.0;
  VoltVarCurve curve;
};

struct Der3Phase {
  double p = 0.0;  // total over the three phases
  VoltVarCurve curve;
};

struct CompositeBus {
  std::string bus;
  WyeLoad wye;
  DeltaLoad delta;
  std::vector<Der1Phase> ders_1ph;
  std::optional<Der3Phase> der_3ph;
};

/// Voltage-dependent coefficients mapping Delta pair powers to Wye nodal
/// powers. Columns of unloaded pairs are zero so absent phases are never
/// touched. Throws SingularTransformError when a loaded pair has
/// |E_p - E_k| below 1e-9.
Matrix3c gamma_matrix(const Vector3c& e, const DeltaLoad& load, const std::string& bus = {});

/// Wye-equivalent powers of a Delta load.
Vector3c delta_to_wye(const Vector3c& e, const DeltaLoad& load, const std::string& bus = {});

/// Holomorphic Jacobian d(delta_to_wye)/dE of one bus.
Matrix3c pi_block(const Vector3c& e, const DeltaLoad& load, const std::string& bus = {});

/// Net complex power injected by a composite bus at its nodes (generation
/// minus Wye load minus Wye-equivalent Delta load). `present` masks the
/// declared phases; absent slots are returned as zero.
Vector3c injection_power(const CompositeBus& cb, const Vector3c& e,
                         const std::array<bool, 3>& present = {true, true, true});

struct NetworkModel;
class NodeIndexMap;

/// Delta pair powers laid out on node indices (pair slot p at node (bus, p)).
CVector delta_load_vector(const NetworkModel& model, const NodeIndexMap& index);

/// Block-diagonal Gamma over all buses.
CMatrix build_gamma_block_matrix(const NetworkModel& model, const NodeIndexMap& index,
                                 const CVector& e);

/// Block-diagonal Pi: Jacobian of the Wye-equivalent Delta load vector with
/// respect to the node voltage phasors.
CMatrix pi_matrix(const NetworkModel& model, const NodeIndexMap& index, const CVector& e);

/// Effective single-phase droops on the diagonal (zero outside the band).
RMatrix psi_matrix(const NetworkModel& model, const NodeIndexMap& index, const RVector& e_mag);

/// Three-phase DER coupling: Omega blocks (m/9)*ones, Lambda blocks (m/3)*I,
/// with the droop saturated on the phase-average voltage.
std::pair<RMatrix, RMatrix> omega_lambda_matrices(const NetworkModel& model,
                                                  const NodeIndexMap& index, const RVector& e_mag);

/// Net nodal injection over the whole network.
CVector injection_power(const NetworkModel& model, const NodeIndexMap& index, const CVector& e);

}  // namespace vsens
