#pragma once

// Shared fixtures and independent reference computations for the tests.

#include "vsens/feeder_io.hpp"
#include "vsens/oracle.hpp"
#include "vsens/sensitivity.hpp"

#include <algorithm>
#include <string>

namespace vsens::testing {

inline NetworkModel bundled(const std::string& name) {
  return load_feeder(std::string(VSENS_DATA_DIR) + "/" + name);
}

/// Every Delta pair load split evenly onto its two phases as Wye load.
inline NetworkModel wye_only(NetworkModel m) {
  for (auto& cb : m.composites) {
    for (int p = 0; p < 3; ++p) {
      const Complex s = cb.delta.power[static_cast<std::size_t>(p)];
      cb.wye.power[static_cast<std::size_t>(p)] += 0.5 * s;
      cb.wye.power[static_cast<std::size_t>((p + 1) % 3)] += 0.5 * s;
      cb.delta.power[static_cast<std::size_t>(p)] = {};
    }
  }
  return m;
}

/// All DERs at constant power factor (zero droop).
inline NetworkModel constant_pf(NetworkModel m) {
  for (auto& cb : m.composites) {
    for (auto& d : cb.ders_1ph) d.curve.droop = 0.0;
    if (cb.der_3ph) cb.der_3ph->curve.droop = 0.0;
  }
  return m;
}

inline NetworkModel case_a(const NetworkModel& m) { return constant_pf(wye_only(m)); }
inline NetworkModel case_b(const NetworkModel& m) { return constant_pf(m); }
inline NetworkModel case_c(const NetworkModel& m) { return m; }

inline OperatingPoint solve(const NetworkModel& m, const NodeIndexMap& idx, double tol = 1e-12,
                            SolverMethod method = SolverMethod::fixed_point) {
  SolverConfig c;
  c.tolerance = tol;
  c.max_iterations = 500;
  c.method = method;
  return solve_power_flow(m, idx, m.taps(), c);
}

inline double clamp_curve(const VoltVarCurve& c, double e) {
  return c.droop * (std::clamp(e, c.v_lo, c.v_hi) - c.v_ref);
}

/// Net injection written out from the load definitions, without the
/// library's Gamma/injection routines.
inline CVector reference_injection(const NetworkModel& m, const NodeIndexMap& idx, const CVector& e) {
  CVector s = CVector::Zero(e.size());
  for (const auto& cb : m.composites) {
    auto at = [&](int p) { return idx.find(NodeId{cb.bus, static_cast<Phase>(p)}); };
    for (int p = 0; p < 3; ++p) {
      if (auto i = at(p)) s(static_cast<Eigen::Index>(*i)) -= cb.wye.power[static_cast<std::size_t>(p)];
    }
    for (int p = 0; p < 3; ++p) {
      const Complex sd = cb.delta.power[static_cast<std::size_t>(p)];
      if (sd == Complex{}) continue;
      const auto ip = static_cast<Eigen::Index>(*at(p));
      const auto ik = static_cast<Eigen::Index>(*at((p + 1) % 3));
      // Line current I = conj(S / (Ep - Ek)) leaves node p and enters node k.
      const Complex i_line = std::conj(sd / (e(ip) - e(ik)));
      s(ip) -= e(ip) * std::conj(i_line);
      s(ik) += e(ik) * std::conj(i_line);
    }
    for (const auto& d : cb.ders_1ph) {
      const auto i = static_cast<Eigen::Index>(*at(phase_slot(d.phase)));
      s(i) += Complex{d.p, clamp_curve(d.curve, std::abs(e(i)))};
    }
    if (cb.der_3ph) {
      double avg = 0.0;
      for (int p = 0; p < 3; ++p) avg += std::abs(e(static_cast<Eigen::Index>(*at(p)))) / 3.0;
      const Complex per_phase = Complex{cb.der_3ph->p, clamp_curve(cb.der_3ph->curve, avg)} / 3.0;
      for (int p = 0; p < 3; ++p) s(static_cast<Eigen::Index>(*at(p))) += per_phase;
    }
  }
  return s;
}

/// Power balance conj(E)(YE) - conj(S) at every node, slack rows included.
inline CVector reference_residual(const NetworkModel& m, const NodeIndexMap& idx, const CMatrix& y, const RVector& mag,
                                  const RVector& ang) {
  CVector e(mag.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = std::polar(mag(i), ang(i));
  const CVector s = reference_injection(m, idx, e);
  return e.conjugate().cwiseProduct(y * e) - s.conjugate();
}

/// Central-difference Jacobian of [Re g; Im g] with respect to [E; theta].
inline RMatrix reference_jacobian(const NetworkModel& m, const NodeIndexMap& idx, const OperatingPoint& op,
                                  double h = 1e-6) {
  const CMatrix y = assemble_y(m, idx, op.taps);
  const RVector mag = op.magnitude(), ang = op.angle();
  const auto n = mag.size();
  RMatrix jac(2 * n, 2 * n);
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    RVector mp = mag, mm = mag, ap = ang, am = ang;
    if (k < n) {
      mp(k) += h;
      mm(k) -= h;
    } else {
      ap(k - n) += h;
      am(k - n) -= h;
    }
    const CVector d = (reference_residual(m, idx, y, mp, ap) - reference_residual(m, idx, y, mm, am)) / (2.0 * h);
    jac.col(k) << d.real(), d.imag();
  }
  return jac;
}

inline double max_abs(const RMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
inline double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace vsens::testing
