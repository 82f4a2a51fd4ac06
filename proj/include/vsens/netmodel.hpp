#pragma once

// Network data model, node indexing and admittance assembly.
//
// Everything is per-unit on a single power base. Nodes are (bus, phase)
// pairs; a bus only owns the phases it declares, and the dense index orders
// buses by declaration and phases a < b < c within a bus.

#include "vsens/composite.hpp"
#include "vsens/regulator.hpp"
#include "vsens/types.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vsens {

struct Bus {
  std::string name;
  std::vector<Phase> phases;
  double kv_ll = 1.0;  // line-to-line voltage base

  bool has(Phase p) const;
  std::array<bool, 3> phase_mask() const;
};

enum class BranchKind { line, transformer, capacitor, switch_ };

std::string_view to_string(BranchKind k);

/// A passive element stamped into Y through its primitive admittance.
/// The primitive is ordered [from..., to...]; shunt elements have no `to`.
struct BranchElement {
  std::string name;
  BranchKind kind = BranchKind::line;
  std::vector<NodeId> from;
  std::vector<NodeId> to;
  CMatrix primitive;
};

struct RegulatorAttachment {
  std::string id;
  RegulatorModel model;
  std::vector<NodeId> from;
  std::vector<NodeId> to;
  double tap = 0.0;
};

struct SlackSpec {
  std::string bus;
  std::array<Complex, 3> voltage{};  // by phase slot; only declared phases are used
};

struct NetworkModel {
  double s_base_kva = 1000.0;  // per-phase power base
  std::vector<Bus> buses;
  std::vector<BranchElement> branches;
  std::vector<RegulatorAttachment> regulators;
  std::vector<CompositeBus> composites;
  std::vector<SlackSpec> slacks;

  const Bus& bus(std::string_view name) const;
  const Bus* find_bus(std::string_view name) const;
  const CompositeBus* find_composite(std::string_view bus) const;
  /// Returns the composite bus attached to `bus`, creating an empty one.
  CompositeBus& composite(std::string_view bus);

  std::size_t regulator_index(std::string_view id) const;
  std::vector<double> taps() const;
  void set_taps(std::span<const double> taps);

  /// Throws InputError on any structural problem.
  void validate() const;
};

/// Dense node numbering plus the slack/composite partition.
class NodeIndexMap {
 public:
  NodeIndexMap() = default;

  std::size_t size() const { return nodes_.size(); }
  const NodeId& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<NodeId>& nodes() const { return nodes_; }

  std::size_t index(const NodeId& id) const;
  std::optional<std::size_t> find(const NodeId& id) const;

  bool is_slack(std::size_t i) const { return slack_flag_.at(i); }
  const std::vector<std::size_t>& slack_indices() const { return slack_; }
  const std::vector<std::size_t>& composite_indices() const { return composite_; }

  std::vector<std::string> labels() const;

 private:
  friend NodeIndexMap build_node_index(const NetworkModel& model);

  std::vector<NodeId> nodes_;
  std::map<NodeId, std::size_t> lookup_;
  std::vector<bool> slack_flag_;
  std::vector<std::size_t> slack_;
  std::vector<std::size_t> composite_;
};

NodeIndexMap build_node_index(const NetworkModel& model);

/// Y with every regulator at its nominal ratio (t1 = t2 = 1).
CMatrix assemble_y_nominal(const NetworkModel& model, const NodeIndexMap& index);

/// Regulator increment over Y nominal at the given taps (one per regulator).
CMatrix assemble_delta_y(const NetworkModel& model, const NodeIndexMap& index,
                         std::span<const double> taps);

/// Y with the regulators stamped directly at the given taps.
CMatrix assemble_y(const NetworkModel& model, const NodeIndexMap& index,
                   std::span<const double> taps);

/// d(delta Y)/d(tap) of a single regulator, stamped at its nodes.
CMatrix assemble_d_delta_y(const NetworkModel& model, const NodeIndexMap& index,
                           std::size_t regulator, double tap);

/// Node indices of a regulator's ports, [from..., to...].
std::vector<std::size_t> regulator_ports(const RegulatorAttachment& reg, const NodeIndexMap& index);

// Primitive admittance builders (per-unit).

/// Series impedance matrix plus total shunt admittance split between ends.
CMatrix line_primitive(const CMatrix& z_series, const CMatrix& y_shunt);

enum class TransformerConnection { wye_wye, delta_wye };

/// Two-winding transformer with per-phase leakage admittance y. wye_wye is
/// grounded-wye on both sides over any phase count; delta_wye is a
/// three-phase delta primary ('from') with a grounded-wye secondary ('to').
CMatrix transformer_primitive(TransformerConnection conn, Complex y, int phases = 3);

/// Uncoupled closed switch over `phases` conductors.
CMatrix switch_primitive(int phases, Complex y = Complex{5000.0, -5000.0});

}  // namespace vsens
