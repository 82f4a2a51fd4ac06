#include "vsens/composite.hpp"

#include "vsens/netmodel.hpp"

#include <cmath>

namespace vsens {

namespace {

constexpr double kMinPairVoltage = 1e-9;

// (from, to) phase slots of Delta pair slot p: ab, bc, ca.
constexpr int pair_to(int p) { return (p + 1) % 3; }

Complex pair_difference(const Vector3c& e, int p, const std::string& bus) {
  const Complex d = e(p) - e(pair_to(p));
  if (std::abs(d) < kMinPairVoltage) {
    const std::string pair{phase_char(static_cast<Phase>(p)), phase_char(static_cast<Phase>(pair_to(p)))};
    throw SingularTransformError(bus, "delta-to-wye transform is singular on bus '" + bus + "' pair " + pair +
                                          ": phase voltages have collapsed");
  }
  return d;
}

}  // namespace

double VoltVarCurve::reactive(double e) const {
  const double clamped = std::min(std::max(e, v_lo), v_hi);
  return droop * (clamped - v_ref);
}

double VoltVarCurve::slope(double e) const { return (e < v_lo || e > v_hi) ? 0.0 : droop; }

bool DeltaLoad::empty() const {
  return power[0] == Complex{} && power[1] == Complex{} && power[2] == Complex{};
}

Matrix3c gamma_matrix(const Vector3c& e, const DeltaLoad& load, const std::string& bus) {
  Matrix3c g = Matrix3c::Zero();
  for (int p = 0; p < 3; ++p) {
    if (load.power[p] == Complex{}) continue;
    const int k = pair_to(p);
    const Complex d = pair_difference(e, p, bus);
    g(p, p) = e(p) / d;
    g(k, p) = -e(k) / d;
  }
  return g;
}

Vector3c delta_to_wye(const Vector3c& e, const DeltaLoad& load, const std::string& bus) {
  const Vector3c s(load.power[0], load.power[1], load.power[2]);
  return gamma_matrix(e, load, bus) * s;
}

Matrix3c pi_block(const Vector3c& e, const DeltaLoad& load, const std::string& bus) {
  Matrix3c j = Matrix3c::Zero();
  for (int p = 0; p < 3; ++p) {
    const Complex s = load.power[p];
    if (s == Complex{}) continue;
    const int k = pair_to(p);
    const Complex d = pair_difference(e, p, bus);
    const Complex d2 = d * d;
    // S_p = E_p/d * s, S_k = -E_k/d * s, d = E_p - E_k
    j(p, p) += -s * e(k) / d2;
    j(p, k) += s * e(p) / d2;
    j(k, p) += s * e(k) / d2;
    j(k, k) += -s * e(p) / d2;
  }
  return j;
}

Vector3c injection_power(const CompositeBus& cb, const Vector3c& e, const std::array<bool, 3>& present) {
  Vector3c s = Vector3c::Zero();
  for (int p = 0; p < 3; ++p) s(p) -= cb.wye.power[p];
  if (!cb.delta.empty()) s -= delta_to_wye(e, cb.delta, cb.bus);
  for (const auto& d : cb.ders_1ph) {
    const int p = phase_slot(d.phase);
    s(p) += Complex{d.p, d.curve.reactive(std::abs(e(p)))};
  }
  if (cb.der_3ph) {
    const double avg = (std::abs(e(0)) + std::abs(e(1)) + std::abs(e(2))) / 3.0;
    const Complex per_phase{cb.der_3ph->p / 3.0, cb.der_3ph->curve.reactive(avg) / 3.0};
    for (int p = 0; p < 3; ++p) s(p) += per_phase;
  }
  for (int p = 0; p < 3; ++p)
    if (!present[p]) s(p) = 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Network-wide assembly

namespace {

// Indices of a bus's phases, -1 where absent.
std::array<Eigen::Index, 3> bus_slots(const NodeIndexMap& index, const std::string& bus) {
  std::array<Eigen::Index, 3> slots{-1, -1, -1};
  for (int p = 0; p < 3; ++p)
    if (auto i = index.find(NodeId{bus, static_cast<Phase>(p)})) slots[p] = static_cast<Eigen::Index>(*i);
  return slots;
}

Vector3c gather(const CVector& v, const std::array<Eigen::Index, 3>& slots) {
  Vector3c out = Vector3c::Zero();
  for (int p = 0; p < 3; ++p)
    if (slots[p] >= 0) out(p) = v(slots[p]);
  return out;
}

void scatter_block(CMatrix& m, const std::array<Eigen::Index, 3>& slots, const Matrix3c& block) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (slots[r] >= 0 && slots[c] >= 0) m(slots[r], slots[c]) += block(r, c);
}

}  // namespace

CVector delta_load_vector(const NetworkModel& model, const NodeIndexMap& index) {
  CVector s = CVector::Zero(static_cast<Eigen::Index>(index.size()));
  for (const auto& cb : model.composites) {
    const auto slots = bus_slots(index, cb.bus);
    for (int p = 0; p < 3; ++p)
      if (slots[p] >= 0) s(slots[p]) = cb.delta.power[p];
  }
  return s;
}

CMatrix build_gamma_block_matrix(const NetworkModel& model, const NodeIndexMap& index, const CVector& e) {
  const auto n = static_cast<Eigen::Index>(index.size());
  CMatrix g = CMatrix::Zero(n, n);
  for (const auto& cb : model.composites) {
    if (cb.delta.empty()) continue;
    const auto slots = bus_slots(index, cb.bus);
    scatter_block(g, slots, gamma_matrix(gather(e, slots), cb.delta, cb.bus));
  }
  return g;
}

CMatrix pi_matrix(const NetworkModel& model, const NodeIndexMap& index, const CVector& e) {
  const auto n = static_cast<Eigen::Index>(index.size());
  CMatrix pi = CMatrix::Zero(n, n);
  for (const auto& cb : model.composites) {
    if (cb.delta.empty()) continue;
    const auto slots = bus_slots(index, cb.bus);
    scatter_block(pi, slots, pi_block(gather(e, slots), cb.delta, cb.bus));
  }
  return pi;
}

RMatrix psi_matrix(const NetworkModel& model, const NodeIndexMap& index, const RVector& e_mag) {
  const auto n = static_cast<Eigen::Index>(index.size());
  RMatrix psi = RMatrix::Zero(n, n);
  for (const auto& cb : model.composites) {
    for (const auto& d : cb.ders_1ph) {
      const auto i = static_cast<Eigen::Index>(index.index(NodeId{cb.bus, d.phase}));
      psi(i, i) += d.curve.slope(e_mag(i));
    }
  }
  return psi;
}

std::pair<RMatrix, RMatrix> omega_lambda_matrices(const NetworkModel& model, const NodeIndexMap& index,
                                                  const RVector& e_mag) {
  const auto n = static_cast<Eigen::Index>(index.size());
  RMatrix omega = RMatrix::Zero(n, n);
  RMatrix lambda = RMatrix::Zero(n, n);
  for (const auto& cb : model.composites) {
    if (!cb.der_3ph) continue;
    const auto slots = bus_slots(index, cb.bus);
    for (auto s : slots)
      if (s < 0) throw InputError("three-phase DER on bus '" + cb.bus + "' without three phases");
    const double avg = (e_mag(slots[0]) + e_mag(slots[1]) + e_mag(slots[2])) / 3.0;
    const double m = cb.der_3ph->curve.slope(avg);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) omega(slots[r], slots[c]) += m / 9.0;
      lambda(slots[r], slots[r]) += m / 3.0;
    }
  }
  return {omega, lambda};
}

CVector injection_power(const NetworkModel& model, const NodeIndexMap& index, const CVector& e) {
  CVector s = CVector::Zero(static_cast<Eigen::Index>(index.size()));
  for (const auto& cb : model.composites) {
    const auto slots = bus_slots(index, cb.bus);
    const std::array<bool, 3> present{slots[0] >= 0, slots[1] >= 0, slots[2] >= 0};
    const Vector3c bus_s = injection_power(cb, gather(e, slots), present);
    for (int p = 0; p < 3; ++p)
      if (slots[p] >= 0) s(slots[p]) += bus_s(p);
  }
  return s;
}

}  // namespace vsens
