#include "support.hpp"

#include "vsens/export.hpp"

#include <doctest.h>

#include <numbers>
#include <sstream>

using namespace vsens;

TEST_CASE("numbers use twelve significant digits") {
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(123456789.123456) == "123456789.123");
  CHECK(format_number(1.5e-9) == "1.5e-09");
}

TEST_CASE("matrix csv layout") {
  RMatrix m(2, 1);
  m << 1.25, -2.0;
  std::ostringstream os;
  write_matrix_csv(os, m, {"b1.a", "b1.b"}, {"reg1"});
  CHECK(os.str() == "node,reg1\nb1.a,1.25\nb1.b,-2\n");
  CHECK_THROWS_AS(write_matrix_csv(os, m, {"b1.a"}, {"reg1"}), InputError);
}

TEST_CASE("angle matrices are exported in degrees") {
  SensitivityMatrices s;
  s.dE_dP = RMatrix::Constant(1, 1, 0.5);
  s.dTheta_dP = RMatrix::Constant(1, 1, std::numbers::pi);
  CHECK(export_view(s, 0)(0, 0) == 0.5);
  CHECK(export_view(s, 1)(0, 0) == doctest::Approx(180.0));
}

TEST_CASE("report json round trip") {
  ValidationReport r;
  MatrixError e;
  e.name = "dE_dP";
  e.mape = 0.01;
  e.mae = 1e-7;
  e.counted = 10;
  e.excluded = 2;
  e.worst_row = 3;
  e.worst_col = 1;
  r.matrices.push_back(e);
  const auto j = report_json(r, OracleConfig{});
  const ValidationReport back = report_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.matrices.at(0).excluded == 2);
  CHECK(back.matrices.at(0).worst_row == 3);
  CHECK(back.max_mape() == 0.01);
  std::ostringstream table;
  write_report_table(table, back);
  CHECK(table.str().find("dE_dP") != std::string::npos);
  CHECK_THROWS_AS(report_from_json(nlohmann::json::object()), InputError);
}

TEST_CASE("operating point hash is stable and sensitive") {
  const NetworkModel m = testing::bundled("feeder4.json");
  const NodeIndexMap idx = build_node_index(m);
  OperatingPoint op = testing::solve(m, idx);
  const std::string h = operating_point_hash(op);
  CHECK(h.size() == 16);
  CHECK(operating_point_hash(op) == h);
  op.taps[0] += 1;
  CHECK(operating_point_hash(op) != h);
}
