#include "vsens/export.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace vsens {

namespace {

constexpr double kDegrees = 180.0 / std::numbers::pi;

bool is_angle_matrix(std::size_t which) { return which % 2 == 1; }

nlohmann::ordered_json matrix_rows(const RMatrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(std::stod(format_number(m(i, j))));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_matrix_csv(std::ostream& os, const RMatrix& m, const std::vector<std::string>& rows,
                      const std::vector<std::string>& cols) {
  if (static_cast<Eigen::Index>(rows.size()) != m.rows() || static_cast<Eigen::Index>(cols.size()) != m.cols())
    throw InputError("matrix labels do not match its shape");
  os << "node";
  for (const auto& c : cols) os << ',' << c;
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << format_number(m(i, j));
    os << '\n';
  }
}

std::vector<std::string> column_labels(const NetworkModel& model, const NodeIndexMap& index, std::size_t which) {
  if (which < 4) return index.labels();
  std::vector<std::string> ids;
  for (const auto& r : model.regulators) ids.push_back(r.id);
  return ids;
}

RMatrix export_view(const SensitivityMatrices& s, std::size_t which) {
  return is_angle_matrix(which) ? RMatrix(s[which] * kDegrees) : s[which];
}

std::string operating_point_hash(const OperatingPoint& op) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= ';';
    h *= 1099511628211ULL;
  };
  for (Eigen::Index i = 0; i < op.voltage.size(); ++i) {
    feed(format_number(op.voltage(i).real()));
    feed(format_number(op.voltage(i).imag()));
  }
  for (double t : op.taps) feed(format_number(t));
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_operating_point_csv(std::ostream& os, const NodeIndexMap& index, const OperatingPoint& op) {
  os << "node,magnitude_pu,angle_deg\n";
  const RVector mag = op.magnitude();
  const RVector ang = op.angle();
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    os << index.node(i).str() << ',' << format_number(mag(k)) << ',' << format_number(ang(k) * kDegrees) << '\n';
  }
}

nlohmann::ordered_json operating_point_json(const NetworkModel& model, const NodeIndexMap& index,
                                            const OperatingPoint& op) {
  nlohmann::ordered_json j;
  j["iterations"] = op.iterations;
  j["mismatch"] = op.mismatch;
  j["hash"] = operating_point_hash(op);
  auto taps = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < model.regulators.size(); ++k) taps[model.regulators[k].id] = op.taps.at(k);
  j["taps"] = taps;
  auto nodes = nlohmann::ordered_json::array();
  const RVector mag = op.magnitude();
  const RVector ang = op.angle();
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    nodes.push_back({{"node", index.node(i).str()},
                     {"magnitude_pu", std::stod(format_number(mag(k)))},
                     {"angle_deg", std::stod(format_number(ang(k) * kDegrees))},
                     {"slack", index.is_slack(i)}});
  }
  j["nodes"] = nodes;
  return j;
}

nlohmann::ordered_json sensitivity_json(const NetworkModel& model, const NodeIndexMap& index,
                                        const OperatingPoint& op, const SensitivityResult& result,
                                        double tolerance) {
  nlohmann::ordered_json j;
  j["metadata"] = {{"operating_point_hash", operating_point_hash(op)},
                   {"power_flow_tolerance", tolerance},
                   {"power_flow_mismatch", op.mismatch},
                   {"condition_estimate", result.condition_estimate},
                   {"ill_conditioned", result.ill_conditioned},
                   {"max_residual", result.max_residual},
                   {"angle_unit", "deg"}};
  j["nodes"] = index.labels();
  j["regulators"] = column_labels(model, index, 4);
  auto mats = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < SensitivityMatrices::names.size(); ++k)
    mats[std::string(SensitivityMatrices::names[k])] = matrix_rows(export_view(result.matrices, k));
  j["matrices"] = mats;
  return j;
}

nlohmann::ordered_json report_json(const ValidationReport& report, const OracleConfig& config) {
  nlohmann::ordered_json j;
  j["oracle"] = {{"power_step", config.power_step},
                 {"tap_step", config.tap_step},
                 {"scheme", config.scheme == DifferenceScheme::central ? "central" : "forward"},
                 {"mape_floor", config.mape_floor},
                 {"solve_tolerance", config.solve_tolerance}};
  j["analytical_seconds"] = report.analytical_seconds;
  j["oracle_seconds"] = report.oracle_seconds;
  auto mats = nlohmann::ordered_json::array();
  for (const auto& m : report.matrices) {
    mats.push_back({{"name", m.name},
                    {"mape_percent", m.mape},
                    {"mae", m.mae},
                    {"counted", m.counted},
                    {"excluded", m.excluded},
                    {"worst", {{"row", m.worst_row},
                               {"col", m.worst_col},
                               {"analytical", m.worst_analytical},
                               {"reference", m.worst_reference}}}});
  }
  j["matrices"] = mats;
  j["max_mape_percent"] = report.max_mape();
  return j;
}

ValidationReport report_from_json(const nlohmann::json& j) {
  ValidationReport r;
  try {
    r.analytical_seconds = j.at("analytical_seconds").get<double>();
    r.oracle_seconds = j.at("oracle_seconds").get<double>();
    for (const auto& m : j.at("matrices")) {
      MatrixError e;
      e.name = m.at("name").get<std::string>();
      e.mape = m.at("mape_percent").get<double>();
      e.mae = m.at("mae").get<double>();
      e.counted = m.at("counted").get<std::size_t>();
      e.excluded = m.at("excluded").get<std::size_t>();
      const auto& w = m.at("worst");
      e.worst_row = w.at("row").get<Eigen::Index>();
      e.worst_col = w.at("col").get<Eigen::Index>();
      e.worst_analytical = w.at("analytical").get<double>();
      e.worst_reference = w.at("reference").get<double>();
      r.matrices.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("not a validation report: ") + e.what());
  }
  return r;
}

void write_report_table(std::ostream& os, const ValidationReport& report) {
  os << std::left << std::setw(15) << "matrix" << std::right << std::setw(20) << "MAPE %" << std::setw(20) << "MAE"
     << std::setw(9) << "counted" << std::setw(9) << "excluded" << "  worst (row,col)\n";
  for (const auto& m : report.matrices) {
    os << std::left << std::setw(15) << m.name << std::right << std::setw(20) << format_number(m.mape)
       << std::setw(20) << format_number(m.mae) << std::setw(9) << m.counted << std::setw(9)
       << m.excluded << "  (" << m.worst_row << "," << m.worst_col << ") " << format_number(m.worst_analytical)
       << " vs " << format_number(m.worst_reference) << '\n';
  }
  os << "analytical " << format_number(report.analytical_seconds) << " s, oracle "
     << format_number(report.oracle_seconds) << " s\n";
}

}  // namespace vsens
