#pragma once

// CSV and JSON writers for operating points, sensitivity matrices and
// validation reports. Angles are converted to degrees here and nowhere else.

#include "vsens/oracle.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace vsens {

/// Fixed 12-significant-digit formatting shared by every writer.
std::string format_number(double v);

/// Header "node,<cols...>" then one row per row label.
void write_matrix_csv(std::ostream& os, const RMatrix& m, const std::vector<std::string>& rows,
                      const std::vector<std::string>& cols);

/// Column labels of a sensitivity matrix: node ids or regulator ids.
std::vector<std::string> column_labels(const NetworkModel& model, const NodeIndexMap& index, std::size_t which);

/// Matrix as exported: angle matrices are scaled to degrees.
RMatrix export_view(const SensitivityMatrices& s, std::size_t which);

/// Stable hash of the node voltages and taps (hex FNV-1a over the formatted values).
std::string operating_point_hash(const OperatingPoint& op);

void write_operating_point_csv(std::ostream& os, const NodeIndexMap& index, const OperatingPoint& op);
nlohmann::ordered_json operating_point_json(const NetworkModel& model, const NodeIndexMap& index,
                                            const OperatingPoint& op);

nlohmann::ordered_json sensitivity_json(const NetworkModel& model, const NodeIndexMap& index,
                                        const OperatingPoint& op, const SensitivityResult& result,
                                        double tolerance);

nlohmann::ordered_json report_json(const ValidationReport& report, const OracleConfig& config);
ValidationReport report_from_json(const nlohmann::json& j);
void write_report_table(std::ostream& os, const ValidationReport& report);

}  // namespace vsens
