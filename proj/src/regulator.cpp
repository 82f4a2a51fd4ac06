#include "vsens/regulator.hpp"

#include <cmath>
#include <string>

namespace vsens {

RegulatorType parse_regulator_type(std::string_view s) {
  if (s == "one_phase_from") return RegulatorType::one_phase_from;
  if (s == "one_phase_to") return RegulatorType::one_phase_to;
  if (s == "three_phase_wye_wye") return RegulatorType::three_phase_wye_wye;
  throw InputError("unknown regulator type '" + std::string(s) + "'");
}

std::string_view to_string(RegulatorType t) {
  switch (t) {
    case RegulatorType::one_phase_from: return "one_phase_from";
    case RegulatorType::one_phase_to: return "one_phase_to";
    case RegulatorType::three_phase_wye_wye: return "three_phase_wye_wye";
  }
  return "?";
}

std::pair<double, double> RegulatorModel::ratios(double tap) const {
  const double t = 1.0 + tap * step_size;
  if (type == RegulatorType::one_phase_from) return {t, 1.0};
  return {1.0, t};
}

void RegulatorModel::validate() const {
  if (y_t == Complex{}) throw InputError("regulator y_t must be nonzero");
  if (!(step_size > 0.0)) throw InputError("regulator step size must be positive");
  if (tap_min > tap_max) throw InputError("regulator tap bounds are inverted");
  if (1.0 + tap_min * step_size <= 0.0 || 1.0 + tap_max * step_size <= 0.0)
    throw InputError("regulator tap ratio must stay positive over the tap range");
}

void RegulatorModel::check_tap(double tap) const {
  if (!std::isfinite(tap) || tap < tap_min || tap > tap_max)
    throw InputError("tap " + std::to_string(tap) + " outside [" + std::to_string(tap_min) + ", " +
                     std::to_string(tap_max) + "]");
}

namespace {

// Spreads a 2x2 per-phase block onto the regulator's port layout.
CMatrix expand(const RegulatorModel& model, const Eigen::Matrix2cd& block) {
  const int n = model.phase_count();
  CMatrix out = CMatrix::Zero(2 * n, 2 * n);
  for (int p = 0; p < n; ++p) {
    out(p, p) = block(0, 0);
    out(p, n + p) = block(0, 1);
    out(n + p, p) = block(1, 0);
    out(n + p, n + p) = block(1, 1);
  }
  return out;
}

}  // namespace

CMatrix y_reg(const RegulatorModel& model, double tap) {
  model.check_tap(tap);
  const auto [t1, t2] = model.ratios(tap);
  const Complex y = model.y_t;
  Eigen::Matrix2cd b;
  b << y / (t1 * t1), -y / (t1 * t2), -y / (t1 * t2), y / (t2 * t2);
  return expand(model, b);
}

CMatrix delta_y(const RegulatorModel& model, double tap) {
  model.check_tap(tap);
  const auto [t1, t2] = model.ratios(tap);
  const Complex y = model.y_t;
  Eigen::Matrix2cd b;
  if (model.type == RegulatorType::one_phase_from) {
    b << 1.0 / (t1 * t1) - 1.0, 1.0 - 1.0 / t1, 1.0 - 1.0 / t1, 0.0;
  } else {
    b << 0.0, 1.0 - 1.0 / t2, 1.0 - 1.0 / t2, 1.0 / (t2 * t2) - 1.0;
  }
  return expand(model, y * b);
}

CMatrix d_delta_y_d_gamma(const RegulatorModel& model, double tap) {
  model.check_tap(tap);
  const auto [t1, t2] = model.ratios(tap);
  const Complex k = model.y_t * model.step_size;
  Eigen::Matrix2cd b;
  if (model.type == RegulatorType::one_phase_from) {
    b << -2.0 / (t1 * t1 * t1), 1.0 / (t1 * t1), 1.0 / (t1 * t1), 0.0;
  } else {
    b << 0.0, 1.0 / (t2 * t2), 1.0 / (t2 * t2), -2.0 / (t2 * t2 * t2);
  }
  return expand(model, k * b);
}

}  // namespace vsens
