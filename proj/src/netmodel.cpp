#include "vsens/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

namespace vsens {

Phase parse_phase(std::string_view s) {
  if (s.size() == 1) {
    switch (std::tolower(static_cast<unsigned char>(s[0]))) {
      case 'a': return Phase::a;
      case 'b': return Phase::b;
      case 'c': return Phase::c;
      default: break;
    }
  }
  throw InputError("unknown phase '" + std::string(s) + "'");
}

NodeId parse_node_id(std::string_view text) {
  const auto dot = text.rfind('.');
  if (dot == std::string_view::npos || dot == 0)
    throw InputError("malformed node id '" + std::string(text) + "', expected bus.phase");
  return NodeId{std::string(text.substr(0, dot)), parse_phase(text.substr(dot + 1))};
}

bool Bus::has(Phase p) const { return std::find(phases.begin(), phases.end(), p) != phases.end(); }

std::array<bool, 3> Bus::phase_mask() const {
  std::array<bool, 3> m{};
  for (Phase p : phases) m[phase_slot(p)] = true;
  return m;
}

std::string_view to_string(BranchKind k) {
  switch (k) {
    case BranchKind::line: return "line";
    case BranchKind::transformer: return "transformer";
    case BranchKind::capacitor: return "capacitor";
    case BranchKind::switch_: return "switch";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// NetworkModel

const Bus* NetworkModel::find_bus(std::string_view name) const {
  for (const auto& b : buses)
    if (b.name == name) return &b;
  return nullptr;
}

const Bus& NetworkModel::bus(std::string_view name) const {
  if (const Bus* b = find_bus(name)) return *b;
  throw InputError("unknown bus '" + std::string(name) + "'");
}

const CompositeBus* NetworkModel::find_composite(std::string_view name) const {
  for (const auto& c : composites)
    if (c.bus == name) return &c;
  return nullptr;
}

CompositeBus& NetworkModel::composite(std::string_view name) {
  for (auto& c : composites)
    if (c.bus == name) return c;
  composites.push_back(CompositeBus{std::string(name), {}, {}, {}, std::nullopt});
  return composites.back();
}

std::size_t NetworkModel::regulator_index(std::string_view id) const {
  for (std::size_t i = 0; i < regulators.size(); ++i)
    if (regulators[i].id == id) return i;
  throw InputError("unknown regulator '" + std::string(id) + "'");
}

std::vector<double> NetworkModel::taps() const {
  std::vector<double> t;
  t.reserve(regulators.size());
  for (const auto& r : regulators) t.push_back(r.tap);
  return t;
}

void NetworkModel::set_taps(std::span<const double> taps) {
  if (taps.size() != regulators.size()) throw InputError("tap vector size does not match regulator count");
  for (std::size_t i = 0; i < taps.size(); ++i) {
    regulators[i].model.check_tap(taps[i]);
    regulators[i].tap = taps[i];
  }
}

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

void require_node(const NetworkModel& m, const NodeId& n, const std::string& who) {
  const Bus* b = m.find_bus(n.bus);
  if (!b) throw InputError(who + " references unknown bus '" + n.bus + "'");
  if (!b->has(n.phase)) throw InputError(who + " references undeclared node '" + n.str() + "'");
}

}  // namespace

void NetworkModel::validate() const {
  if (!(s_base_kva > 0.0)) throw InputError("power base must be positive");

  std::set<std::string> names;
  for (const auto& b : buses) {
    if (b.name.empty()) throw InputError("bus with empty name");
    if (!names.insert(b.name).second) throw InputError("duplicate bus '" + b.name + "'");
    if (b.phases.empty()) throw InputError("bus '" + b.name + "' declares no phases");
    std::set<Phase> ph(b.phases.begin(), b.phases.end());
    if (ph.size() != b.phases.size()) throw InputError("bus '" + b.name + "' repeats a phase");
    if (!(b.kv_ll > 0.0)) throw InputError("bus '" + b.name + "' has non-positive voltage base");
  }

  for (const auto& e : branches) {
    const std::string who = std::string(to_string(e.kind)) + " '" + e.name + "'";
    for (const auto& n : e.from) require_node(*this, n, who);
    for (const auto& n : e.to) require_node(*this, n, who);
    const auto dim = static_cast<Eigen::Index>(e.from.size() + e.to.size());
    if (e.primitive.rows() != dim || e.primitive.cols() != dim)
      throw InputError(who + " primitive admittance is " + std::to_string(e.primitive.rows()) + "x" +
                       std::to_string(e.primitive.cols()) + ", expected " + std::to_string(dim) + "x" +
                       std::to_string(dim));
  }

  std::set<std::pair<NodeId, NodeId>> reg_pairs;
  std::set<std::string> reg_ids;
  for (const auto& r : regulators) {
    const std::string who = "regulator '" + r.id + "'";
    if (!reg_ids.insert(r.id).second) throw InputError("duplicate regulator id '" + r.id + "'");
    r.model.validate();
    r.model.check_tap(r.tap);
    const auto n = static_cast<std::size_t>(r.model.phase_count());
    if (r.from.size() != n || r.to.size() != n)
      throw InputError(who + " needs " + std::to_string(n) + " from/to node(s)");
    for (std::size_t k = 0; k < n; ++k) {
      require_node(*this, r.from[k], who);
      require_node(*this, r.to[k], who);
      if (!reg_pairs.insert({r.from[k], r.to[k]}).second)
        throw InputError(who + " duplicates regulator node pair " + r.from[k].str() + "->" + r.to[k].str());
    }
  }

  std::set<std::string> comp_buses;
  for (const auto& c : composites) {
    const Bus* b = find_bus(c.bus);
    if (!b) throw InputError("load/DER references unknown bus '" + c.bus + "'");
    if (!comp_buses.insert(c.bus).second) throw InputError("bus '" + c.bus + "' has two composite records");
    for (int p = 0; p < 3; ++p) {
      const auto ph = static_cast<Phase>(p);
      if (c.wye.power[p] != Complex{} && !b->has(ph))
        throw InputError("wye load on undeclared node '" + NodeId{c.bus, ph}.str() + "'");
      const auto pk = static_cast<Phase>((p + 1) % 3);
      if (c.delta.power[p] != Complex{} && !(b->has(ph) && b->has(pk)))
        throw InputError("delta load on bus '" + c.bus + "' needs phases " + phase_char(ph) + phase_char(pk));
    }
    for (const auto& d : c.ders_1ph) {
      if (!b->has(d.phase)) throw InputError("DER on undeclared node '" + NodeId{c.bus, d.phase}.str() + "'");
      if (d.curve.v_lo > d.curve.v_hi) throw InputError("DER droop band inverted on bus '" + c.bus + "'");
      if (d.curve.v_ref < d.curve.v_lo || d.curve.v_ref > d.curve.v_hi)
        throw InputError("DER reference voltage outside droop band on bus '" + c.bus + "'");
    }
    if (c.der_3ph) {
      if (b->phases.size() != 3) throw InputError("three-phase DER on bus '" + c.bus + "' without three phases");
      const auto& cv = c.der_3ph->curve;
      if (cv.v_lo > cv.v_hi || cv.v_ref < cv.v_lo || cv.v_ref > cv.v_hi)
        throw InputError("three-phase DER droop band invalid on bus '" + c.bus + "'");
    }
  }

  if (slacks.empty()) throw InputError("network has no slack bus");
  std::set<std::string> slack_buses;
  for (const auto& s : slacks) {
    const Bus& b = bus(s.bus);
    if (!slack_buses.insert(s.bus).second) throw InputError("bus '" + s.bus + "' listed twice as slack");
    for (Phase p : b.phases)
      if (std::abs(s.voltage[phase_slot(p)]) <= 0.0)
        throw InputError("slack bus '" + s.bus + "' has zero voltage on phase " + phase_char(p));
  }

  // Every node must reach a slack node through series elements.
  const NodeIndexMap index = build_node_index(*this);
  DisjointSet ds(index.size());
  auto join = [&](const std::vector<NodeId>& from, const std::vector<NodeId>& to) {
    std::vector<std::size_t> all;
    for (const auto& n : from) all.push_back(index.index(n));
    for (const auto& n : to) all.push_back(index.index(n));
    for (std::size_t k = 1; k < all.size(); ++k) ds.unite(all[0], all[k]);
  };
  for (const auto& e : branches) {
    if (e.to.empty()) continue;
    if (e.kind == BranchKind::transformer) {
      join(e.from, e.to);
    } else {
      for (std::size_t k = 0; k < std::min(e.from.size(), e.to.size()); ++k) join({e.from[k]}, {e.to[k]});
    }
  }
  for (const auto& r : regulators)
    for (std::size_t k = 0; k < r.from.size(); ++k) join({r.from[k]}, {r.to[k]});
  std::set<std::size_t> energized;
  for (std::size_t s : index.slack_indices()) energized.insert(ds.find(s));
  for (std::size_t i = 0; i < index.size(); ++i)
    if (!energized.count(ds.find(i)))
      throw InputError("node '" + index.node(i).str() + "' is not connected to any slack bus");
}

// ---------------------------------------------------------------------------
// NodeIndexMap

std::size_t NodeIndexMap::index(const NodeId& id) const {
  const auto it = lookup_.find(id);
  if (it == lookup_.end()) throw InputError("node '" + id.str() + "' is not indexed");
  return it->second;
}

std::optional<std::size_t> NodeIndexMap::find(const NodeId& id) const {
  const auto it = lookup_.find(id);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> NodeIndexMap::labels() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.str());
  return out;
}

NodeIndexMap build_node_index(const NetworkModel& model) {
  NodeIndexMap m;
  std::set<std::string> seen;
  for (const auto& b : model.buses) {
    if (!seen.insert(b.name).second) throw InputError("duplicate bus '" + b.name + "'");
    if (b.phases.empty()) throw InputError("bus '" + b.name + "' declares no phases");
    const bool slack = std::any_of(model.slacks.begin(), model.slacks.end(),
                                   [&](const SlackSpec& s) { return s.bus == b.name; });
    for (Phase p : {Phase::a, Phase::b, Phase::c}) {
      if (!b.has(p)) continue;
      const std::size_t i = m.nodes_.size();
      m.nodes_.push_back(NodeId{b.name, p});
      m.lookup_.emplace(m.nodes_.back(), i);
      m.slack_flag_.push_back(slack);
      (slack ? m.slack_ : m.composite_).push_back(i);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Assembly

std::vector<std::size_t> regulator_ports(const RegulatorAttachment& reg, const NodeIndexMap& index) {
  std::vector<std::size_t> ports;
  ports.reserve(reg.from.size() + reg.to.size());
  for (const auto& n : reg.from) ports.push_back(index.index(n));
  for (const auto& n : reg.to) ports.push_back(index.index(n));
  return ports;
}

namespace {

void stamp(CMatrix& y, const std::vector<std::size_t>& ports, const CMatrix& block) {
  for (std::size_t r = 0; r < ports.size(); ++r)
    for (std::size_t c = 0; c < ports.size(); ++c)
      y(static_cast<Eigen::Index>(ports[r]), static_cast<Eigen::Index>(ports[c])) +=
          block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void check_taps(const NetworkModel& model, std::span<const double> taps) {
  if (taps.size() != model.regulators.size())
    throw InputError("expected " + std::to_string(model.regulators.size()) + " tap values, got " +
                     std::to_string(taps.size()));
}

}  // namespace

CMatrix assemble_y_nominal(const NetworkModel& model, const NodeIndexMap& index) {
  const auto n = static_cast<Eigen::Index>(index.size());
  CMatrix y = CMatrix::Zero(n, n);
  for (const auto& e : model.branches) {
    std::vector<std::size_t> ports;
    for (const auto& node : e.from) ports.push_back(index.index(node));
    for (const auto& node : e.to) ports.push_back(index.index(node));
    const auto dim = static_cast<Eigen::Index>(ports.size());
    if (e.primitive.rows() != dim || e.primitive.cols() != dim)
      throw InputError("primitive admittance of '" + e.name + "' does not match its node list");
    stamp(y, ports, e.primitive);
  }
  for (const auto& r : model.regulators) stamp(y, regulator_ports(r, index), y_reg(r.model, 0.0));
  return y;
}

CMatrix assemble_delta_y(const NetworkModel& model, const NodeIndexMap& index,
                         std::span<const double> taps) {
  check_taps(model, taps);
  const auto n = static_cast<Eigen::Index>(index.size());
  CMatrix dy = CMatrix::Zero(n, n);
  for (std::size_t k = 0; k < model.regulators.size(); ++k) {
    const auto& r = model.regulators[k];
    if (taps[k] == 0.0) {
      r.model.check_tap(0.0);
      continue;
    }
    stamp(dy, regulator_ports(r, index), delta_y(r.model, taps[k]));
  }
  return dy;
}

CMatrix assemble_y(const NetworkModel& model, const NodeIndexMap& index, std::span<const double> taps) {
  check_taps(model, taps);
  const auto n = static_cast<Eigen::Index>(index.size());
  CMatrix y = CMatrix::Zero(n, n);
  for (const auto& e : model.branches) {
    std::vector<std::size_t> ports;
    for (const auto& node : e.from) ports.push_back(index.index(node));
    for (const auto& node : e.to) ports.push_back(index.index(node));
    stamp(y, ports, e.primitive);
  }
  for (std::size_t k = 0; k < model.regulators.size(); ++k)
    stamp(y, regulator_ports(model.regulators[k], index), y_reg(model.regulators[k].model, taps[k]));
  return y;
}

CMatrix assemble_d_delta_y(const NetworkModel& model, const NodeIndexMap& index, std::size_t regulator,
                           double tap) {
  const auto n = static_cast<Eigen::Index>(index.size());
  CMatrix d = CMatrix::Zero(n, n);
  const auto& r = model.regulators.at(regulator);
  stamp(d, regulator_ports(r, index), d_delta_y_d_gamma(r.model, tap));
  return d;
}

// ---------------------------------------------------------------------------
// Primitive builders

CMatrix line_primitive(const CMatrix& z_series, const CMatrix& y_shunt) {
  const Eigen::Index n = z_series.rows();
  if (z_series.cols() != n || y_shunt.rows() != n || y_shunt.cols() != n)
    throw InputError("line impedance and shunt matrices must be square and equal-sized");
  Eigen::FullPivLU<CMatrix> lu(z_series);
  if (!lu.isInvertible()) throw InputError("line series impedance matrix is singular");
  const CMatrix ys = lu.inverse();
  CMatrix p(2 * n, 2 * n);
  p.topLeftCorner(n, n) = ys + 0.5 * y_shunt;
  p.topRightCorner(n, n) = -ys;
  p.bottomLeftCorner(n, n) = -ys;
  p.bottomRightCorner(n, n) = ys + 0.5 * y_shunt;
  return p;
}

CMatrix transformer_primitive(TransformerConnection conn, Complex y, int phases) {
  if (conn == TransformerConnection::wye_wye) {
    const CMatrix id = CMatrix::Identity(phases, phases);
    CMatrix p(2 * phases, 2 * phases);
    p << y * id, -y * id, -y * id, y * id;
    return p;
  }
  if (phases != 3) throw InputError("delta-wye transformers must be three-phase");
  Eigen::Matrix3cd y_delta, y_wye, y_mutual;
  y_delta << 2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0;
  y_delta *= y / 3.0;
  y_wye = y * Eigen::Matrix3cd::Identity();
  y_mutual << -1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0;
  y_mutual *= y / std::sqrt(3.0);
  CMatrix p(6, 6);
  p << y_delta, y_mutual, y_mutual.transpose(), y_wye;
  return p;
}

CMatrix switch_primitive(int phases, Complex y) {
  return transformer_primitive(TransformerConnection::wye_wye, y, phases);
}

}  // namespace vsens
