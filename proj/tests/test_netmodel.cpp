#include "support.hpp"

#include <doctest.h>

using namespace vsens;
using vsens::testing::max_abs;

namespace {

NetworkModel two_three_phase_buses() {
  NetworkModel m;
  m.buses = {{"b1", {Phase::a, Phase::b, Phase::c}, 4.16}, {"b2", {Phase::a, Phase::b, Phase::c}, 4.16}};
  m.slacks = {{"b1", {Complex{1, 0}, std::polar(1.0, -2.0943951), std::polar(1.0, 2.0943951)}}};
  return m;
}

NetworkModel single_phase_pair(Complex y) {
  NetworkModel m;
  m.buses = {{"s", {Phase::a}, 1.0}, {"r", {Phase::a}, 1.0}};
  CMatrix z(1, 1);
  z(0, 0) = 1.0 / y;
  m.branches.push_back({"l", BranchKind::line, {{"s", Phase::a}}, {{"r", Phase::a}}, line_primitive(z, CMatrix::Zero(1, 1))});
  m.slacks = {{"s", {Complex{1, 0}, {}, {}}}};
  return m;
}

}  // namespace

TEST_CASE("node index ordering") {
  const NetworkModel m = two_three_phase_buses();
  const NodeIndexMap idx = build_node_index(m);
  CHECK(idx.size() == 6);
  CHECK(idx.index({"b2", Phase::b}) == 4);
  CHECK(idx.node(3).str() == "b2.a");
  CHECK(idx.slack_indices() == std::vector<std::size_t>{0, 1, 2});
  CHECK(idx.composite_indices() == std::vector<std::size_t>{3, 4, 5});
  CHECK_THROWS_AS(idx.index({"b3", Phase::a}), InputError);
}

TEST_CASE("partial-phase buses only own their phases") {
  NetworkModel m = two_three_phase_buses();
  m.buses.push_back({"b3", {Phase::a, Phase::c}, 4.16});
  const NodeIndexMap idx = build_node_index(m);
  CHECK(idx.size() == 8);
  CHECK(idx.index({"b3", Phase::c}) == 7);
  CHECK_FALSE(idx.find({"b3", Phase::b}).has_value());
}

TEST_CASE("line stamp") {
  const Complex y{10.0, -30.0};
  const NetworkModel m = single_phase_pair(y);
  const NodeIndexMap idx = build_node_index(m);
  const CMatrix ym = assemble_y_nominal(m, idx);
  CMatrix expect(2, 2);
  expect << y, -y, -y, y;
  CHECK(max_abs(CMatrix(ym - expect)) < 1e-12);
}

TEST_CASE("empty network assembles to a zero matrix") {
  NetworkModel m = two_three_phase_buses();
  const NodeIndexMap idx = build_node_index(m);
  CHECK(max_abs(assemble_y_nominal(m, idx)) == 0.0);
  CHECK(assemble_y_nominal(m, idx).rows() == 6);
}

TEST_CASE("line plus single-phase regulator at tap zero") {
  const Complex y{10.0, -30.0};
  NetworkModel m = single_phase_pair(y);
  m.buses.push_back({"x", {Phase::a}, 1.0});
  RegulatorAttachment r;
  r.id = "reg1";
  r.model.type = RegulatorType::one_phase_to;
  r.model.y_t = Complex{5.0, -50.0};
  r.from = {{"r", Phase::a}};
  r.to = {{"x", Phase::a}};
  m.regulators.push_back(r);
  const NodeIndexMap idx = build_node_index(m);
  const CMatrix ym = assemble_y(m, idx, std::vector<double>{0.0});
  CHECK(ym(1, 1) == y + r.model.y_t);
  CHECK(ym(1, 2) == -r.model.y_t);
  CHECK(max_abs(assemble_delta_y(m, idx, std::vector<double>{0.0})) == 0.0);
}

TEST_CASE("nominal admittance is independent of taps") {
  NetworkModel m = testing::bundled("feeder4.json");
  const NodeIndexMap idx = build_node_index(m);
  const CMatrix y0 = assemble_y_nominal(m, idx);
  for (int g = -16; g <= 16; g += 4) {
    const std::vector<double> taps(m.regulators.size(), double(g));
    m.set_taps(taps);
    CHECK(max_abs(CMatrix(assemble_y_nominal(m, idx) - y0)) == 0.0);
    const CMatrix direct = assemble_y(m, idx, taps);
    CHECK(max_abs(CMatrix(y0 + assemble_delta_y(m, idx, taps) - direct)) < 1e-12);
  }
}

TEST_CASE("regulator derivative stamp matches differences of the increment") {
  const NetworkModel m = testing::bundled("ring6.json");
  const NodeIndexMap idx = build_node_index(m);
  const double h = 1e-5;
  for (std::size_t r = 0; r < m.regulators.size(); ++r) {
    std::vector<double> up = m.taps(), dn = m.taps();
    up[r] += h;
    dn[r] -= h;
    const CMatrix fd = (assemble_delta_y(m, idx, up) - assemble_delta_y(m, idx, dn)) / (2 * h);
    CHECK(max_abs(CMatrix(fd - assemble_d_delta_y(m, idx, r, m.taps()[r]))) < 1e-6);
  }
}

TEST_CASE("primitive builders") {
  const CMatrix sw = switch_primitive(2);
  CHECK(sw.rows() == 4);
  CHECK(std::abs(sw(0, 2) + Complex(5000, -5000)) < 1e-12);

  const CMatrix wye = transformer_primitive(TransformerConnection::wye_wye, Complex{1, -10});
  CHECK(max_abs(CMatrix(wye * CVector::Ones(6))) < 1e-12);

  const CMatrix dy = transformer_primitive(TransformerConnection::delta_wye, Complex{1, -10});
  CHECK(max_abs(CMatrix(dy - dy.transpose())) < 1e-12);
  // Zero-sequence voltage on the delta side drives no current.
  CVector v = CVector::Zero(6);
  v.head(3).setOnes();
  CHECK(max_abs(CMatrix(dy * v)) < 1e-12);
  CHECK_THROWS_AS(transformer_primitive(TransformerConnection::delta_wye, 1.0, 1), InputError);

  CMatrix z = CMatrix::Zero(2, 2);
  CHECK_THROWS_AS(line_primitive(z, z), InputError);
}

TEST_CASE("model validation") {
  NetworkModel m = single_phase_pair(Complex{1, -3});
  CHECK_NOTHROW(m.validate());

  NetworkModel island = m;
  island.buses.push_back({"lonely", {Phase::a}, 1.0});
  CHECK_THROWS_AS(island.validate(), InputError);

  NetworkModel no_slack = m;
  no_slack.slacks.clear();
  CHECK_THROWS_AS(no_slack.validate(), InputError);

  NetworkModel bad_delta = m;
  bad_delta.composite("r").delta.power[0] = 0.1;
  CHECK_THROWS_AS(bad_delta.validate(), InputError);

  NetworkModel dup = m;
  dup.buses.push_back({"r", {Phase::a}, 1.0});
  CHECK_THROWS_AS(dup.validate(), InputError);

  CHECK_THROWS_AS(parse_node_id("b1"), InputError);
  CHECK(parse_node_id("b1.c") == NodeId{"b1", Phase::c});
}
