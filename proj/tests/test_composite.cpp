#include "support.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace vsens;
using vsens::testing::max_abs;

namespace {

Vector3c balanced(double mag = 1.0) {
  const double a = 2.0 * std::numbers::pi / 3.0;
  return Vector3c{std::polar(mag, 0.0), std::polar(mag, -a), std::polar(mag, a)};
}

DeltaLoad delta_ab(Complex s) {
  DeltaLoad d;
  d.power[0] = s;
  return d;
}

}  // namespace

TEST_CASE("gamma matrix on balanced voltages") {
  const Vector3c w = delta_to_wye(balanced(), delta_ab(1.0));
  CHECK(w(0).real() == doctest::Approx(0.5));
  CHECK(w(0).imag() == doctest::Approx(-0.28867513));
  CHECK(w(1).real() == doctest::Approx(0.5));
  CHECK(w(1).imag() == doctest::Approx(0.28867513));
  CHECK(std::abs(w(2)) == 0.0);
  const Matrix3c g = gamma_matrix(balanced(), delta_ab(1.0));
  CHECK(std::abs(g(0, 1)) == 0.0);
  CHECK(std::abs(g(2, 2)) == 0.0);
}

TEST_CASE("delta to wye conserves power") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0), mag(0.9, 1.1), ang(-0.2, 0.2);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    Vector3c e = balanced();
    for (int p = 0; p < 3; ++p) e(p) *= std::polar(mag(rng), ang(rng));
    DeltaLoad d;
    for (auto& s : d.power) s = Complex{u(rng), u(rng)};
    const Vector3c w = delta_to_wye(e, d);
    const Complex total = d.power[0] + d.power[1] + d.power[2];
    const double scale = std::abs(d.power[0]) + std::abs(d.power[1]) + std::abs(d.power[2]);
    worst = std::max(worst, std::abs(w.sum() - total) / scale);
  }
  CHECK(worst <= 1e-14);
}

TEST_CASE("pi block matches complex differences") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0), mag(0.9, 1.1), ang(-0.2, 0.2);
  for (int point = 0; point < 20; ++point) {
    Vector3c e = balanced();
    for (int p = 0; p < 3; ++p) e(p) *= std::polar(mag(rng), ang(rng));
    DeltaLoad d;
    for (auto& s : d.power) s = Complex{u(rng), u(rng)};
    const Matrix3c pi = pi_block(e, d);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Vector3c ep = e, em = e;
      ep(k) += h;
      em(k) -= h;
      const Vector3c fd_real = (delta_to_wye(ep, d) - delta_to_wye(em, d)) / (2 * h);
      ep = e;
      em = e;
      ep(k) += Complex{0, h};
      em(k) -= Complex{0, h};
      const Vector3c fd_imag = (delta_to_wye(ep, d) - delta_to_wye(em, d)) / Complex{0, 2 * h};
      CHECK((fd_real - pi.col(k)).cwiseAbs().maxCoeff() <= 1e-6);
      // Holomorphic: both directions agree.
      CHECK((fd_imag - pi.col(k)).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("pi scales inversely with a real voltage scaling") {
  DeltaLoad d = delta_ab(Complex{0.3, 0.1});
  d.power[2] = Complex{0.2, -0.05};
  const Vector3c e = balanced();
  const Matrix3c p1 = pi_block(e, d);
  const Matrix3c p2 = pi_block(1.7 * e, d);
  CHECK((p2 - p1 / 1.7).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(pi_block(e, DeltaLoad{}).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("collapsed pair voltage is reported") {
  Vector3c e = balanced();
  e(1) = e(0);
  CHECK_THROWS_AS(gamma_matrix(e, delta_ab(1.0), "bx"), SingularTransformError);
  try {
    delta_to_wye(e, delta_ab(1.0), "bx");
  } catch (const SingularTransformError& err) {
    CHECK(err.bus() == "bx");
  }
  // An unloaded collapsed pair is harmless.
  DeltaLoad bc;
  bc.power[1] = 1.0;
  CHECK_NOTHROW(delta_to_wye(e, bc));
}

TEST_CASE("volt-var curve") {
  const VoltVarCurve c{-2.0, 1.0, 0.9, 1.1};
  CHECK(c.slope(1.0) == -2.0);
  CHECK(c.slope(1.15) == 0.0);
  CHECK(c.slope(1.1) == -2.0);
  CHECK(c.reactive(1.15) == doctest::Approx(-0.2));
  CHECK(c.reactive(0.95) == doctest::Approx(0.1));
}

TEST_CASE("psi, omega and lambda matrices") {
  NetworkModel m;
  m.buses = {{"s", {Phase::a, Phase::b, Phase::c}, 4.16}, {"d", {Phase::a, Phase::b, Phase::c}, 4.16}};
  m.composite("d").ders_1ph.push_back({Phase::b, 0.1, VoltVarCurve{-2.0, 1.0, 0.9, 1.1}});
  m.composite("d").der_3ph = Der3Phase{0.3, VoltVarCurve{9.0, 1.0, 0.9, 1.1}};
  const NodeIndexMap idx = build_node_index(m);
  RVector e = RVector::Ones(6);
  const RMatrix psi = psi_matrix(m, idx, e);
  CHECK(psi(4, 4) == -2.0);
  CHECK(psi.cwiseAbs().sum() == 2.0);
  const auto [omega, lambda] = omega_lambda_matrices(m, idx, e);
  CHECK(max_abs(RMatrix(omega.bottomRightCorner(3, 3) - RMatrix::Ones(3, 3))) < 1e-15);
  CHECK(max_abs(RMatrix(lambda.bottomRightCorner(3, 3) - 3.0 * RMatrix::Identity(3, 3))) < 1e-15);
  CHECK(max_abs(RMatrix(omega.topRows(3))) == 0.0);
  e(4) = 1.15;
  CHECK(psi_matrix(m, idx, e)(4, 4) == 0.0);
  e.tail(3).setConstant(1.2);
  CHECK(max_abs(omega_lambda_matrices(m, idx, e).first) == 0.0);
}

TEST_CASE("injection conventions") {
  CompositeBus load;
  load.wye.power[0] = Complex{0.1, 0.05};
  const Vector3c s = injection_power(load, balanced(), {true, false, false});
  CHECK(std::conj(s(0)) == -Complex(0.1, -0.05));

  CompositeBus der;
  der.ders_1ph.push_back({Phase::a, 0.2, VoltVarCurve{-1.0, 1.0, 0.9, 1.1}});
  const Vector3c g = injection_power(der, balanced(1.02), {true, false, false});
  CHECK(std::conj(g(0)).real() == doctest::Approx(0.2));
  CHECK(std::conj(g(0)).imag() == doctest::Approx(0.02));
}

TEST_CASE("network injection agrees with the written-out reference") {
  for (const char* name : {"feeder4.json", "ring6.json"}) {
    const NetworkModel m = testing::bundled(name);
    const NodeIndexMap idx = build_node_index(m);
    const OperatingPoint op = testing::solve(m, idx);
    CHECK(max_abs(CMatrix(injection_power(m, idx, op.voltage) - testing::reference_injection(m, idx, op.voltage))) <
          1e-14);
  }
}
