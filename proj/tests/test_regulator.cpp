#include "support.hpp"

#include <doctest.h>

using namespace vsens;
using vsens::testing::max_abs;

namespace {

RegulatorModel unit_reg(RegulatorType t) {
  RegulatorModel m;
  m.type = t;
  m.y_t = 1.0;
  return m;
}

}  // namespace

TEST_CASE("delta_y from-side at tap 16") {
  const CMatrix d = delta_y(unit_reg(RegulatorType::one_phase_from), 16);
  CHECK(d(0, 0).real() == doctest::Approx(-0.1735537190).epsilon(1e-9));
  CHECK(d(0, 1).real() == doctest::Approx(0.0909090909).epsilon(1e-9));
  CHECK(d(1, 0).real() == doctest::Approx(0.0909090909).epsilon(1e-9));
  CHECK(std::abs(d(1, 1)) == 0.0);
  CHECK(std::abs(d(0, 0) - (1.0 / 1.21 - 1.0)) < 1e-15);
}

TEST_CASE("delta_y to-side at tap 8") {
  const CMatrix d = delta_y(unit_reg(RegulatorType::one_phase_to), 8);
  CHECK(std::abs(d(0, 0)) == 0.0);
  CHECK(d(0, 1).real() == doctest::Approx(0.0476190476).epsilon(1e-9));
  CHECK(d(1, 1).real() == doctest::Approx(-0.0929705215).epsilon(1e-9));
}

TEST_CASE("y_reg from-side at tap 16") {
  const CMatrix y = y_reg(unit_reg(RegulatorType::one_phase_from), 16);
  CHECK(y(0, 0).real() == doctest::Approx(0.8264462810).epsilon(1e-9));
  CHECK(y(0, 1).real() == doctest::Approx(-0.9090909091).epsilon(1e-9));
  CHECK(y(1, 1).real() == doctest::Approx(1.0));
}

TEST_CASE("d_delta_y_d_gamma closed forms") {
  const double k = 0.00625;
  CMatrix expect(2, 2);
  expect << -2.0 * k, k, k, 0.0;
  CHECK(max_abs(CMatrix(d_delta_y_d_gamma(unit_reg(RegulatorType::one_phase_from), 0) - expect)) < 1e-16);
  const double t = 1.05;
  expect << 0.0, k / (t * t), k / (t * t), -2.0 * k / (t * t * t);
  CHECK(max_abs(CMatrix(d_delta_y_d_gamma(unit_reg(RegulatorType::one_phase_to), 8) - expect)) < 1e-15);
}

TEST_CASE("regulator calculus over the full tap range") {
  for (auto type : {RegulatorType::one_phase_from, RegulatorType::one_phase_to, RegulatorType::three_phase_wye_wye}) {
    RegulatorModel m = unit_reg(type);
    m.y_t = Complex{9.9, -99.0};
    for (int g = -16; g <= 16; ++g) {
      CAPTURE(g);
      const CMatrix diff = y_reg(m, g) - y_reg(m, 0) - delta_y(m, g);
      CHECK(max_abs(diff) <= 1e-14 * max_abs(y_reg(m, 0)));
      RegulatorModel open = m;
      open.tap_min = -17;
      open.tap_max = 17;
      const double h = 1e-4;
      const CMatrix fd = (delta_y(open, g + h) - delta_y(open, g - h)) / (2 * h);
      CHECK(max_abs(CMatrix(fd - d_delta_y_d_gamma(m, g))) < 1e-8 * max_abs(y_reg(m, 0)));
    }
  }
}

TEST_CASE("tap zero leaves the admittance unchanged") {
  for (auto type : {RegulatorType::one_phase_from, RegulatorType::one_phase_to, RegulatorType::three_phase_wye_wye})
    CHECK(max_abs(delta_y(unit_reg(type), 0)) == 0.0);
}

TEST_CASE("three-phase unit has no inter-phase coupling") {
  const CMatrix y = y_reg(unit_reg(RegulatorType::three_phase_wye_wye), 5);
  CHECK(y.rows() == 6);
  CHECK(std::abs(y(0, 1)) == 0.0);
  CHECK(std::abs(y(0, 4)) == 0.0);
  CHECK(std::abs(y(0, 3)) > 0.0);
}

TEST_CASE("invalid regulators are rejected") {
  RegulatorModel m = unit_reg(RegulatorType::one_phase_to);
  CHECK_THROWS_AS(y_reg(m, 17), InputError);
  m.y_t = 0.0;
  CHECK_THROWS_AS(m.validate(), InputError);
  m = unit_reg(RegulatorType::one_phase_to);
  m.step_size = 0.1;
  CHECK_THROWS_AS(m.validate(), InputError);
  CHECK_THROWS_AS(parse_regulator_type("open_delta"), InputError);
}
