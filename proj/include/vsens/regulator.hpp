#pragma once

// Two-port admittance models of step-voltage regulators.
//
// Matrix layout is [from nodes..., to nodes...]: 2x2 for single-phase units,
// 6x6 (from a,b,c then to a,b,c) for the three-phase Wye-Wye unit. The tap
// position is a continuous real; t = 1 + tap * step_size.

#include "vsens/types.hpp"

#include <string_view>

namespace vsens {

enum class RegulatorType {
  one_phase_from,       // tap on the 'from' winding: t1 = 1 + tap*step, t2 = 1
  one_phase_to,         // tap on the 'to' winding:   t1 = 1, t2 = 1 + tap*step
  three_phase_wye_wye,  // ganged, tap on the 'to' winding of all three phases
};

RegulatorType parse_regulator_type(std::string_view s);
std::string_view to_string(RegulatorType t);

struct RegulatorModel {
  RegulatorType type = RegulatorType::one_phase_to;
  Complex y_t{0.0, 0.0};     // short-circuit admittance, p.u.
  double step_size = 0.00625;
  double tap_min = -16.0;
  double tap_max = 16.0;

  int phase_count() const { return type == RegulatorType::three_phase_wye_wye ? 3 : 1; }
  int dimension() const { return 2 * phase_count(); }

  /// Tap ratios (t1, t2) at a tap position.
  std::pair<double, double> ratios(double tap) const;

  /// Throws InputError when y_t == 0, step_size <= 0, bounds are inverted or
  /// 1 + tap*step_size is not positive over the tap range.
  void validate() const;

  /// Throws InputError when tap lies outside [tap_min, tap_max].
  void check_tap(double tap) const;
};

/// Regulator admittance at a tap position.
CMatrix y_reg(const RegulatorModel& model, double tap);

/// Closed-form increment y_reg(tap) - y_reg(0).
CMatrix delta_y(const RegulatorModel& model, double tap);

/// Derivative of delta_y with respect to a continuous tap position.
CMatrix d_delta_y_d_gamma(const RegulatorModel& model, double tap);

}  // namespace vsens
