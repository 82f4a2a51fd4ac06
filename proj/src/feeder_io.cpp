#include "vsens/feeder_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace vsens {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  throw InputError(path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) schema_error(path, "unknown key '" + key + "'");
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(path, std::string("missing key '") + key + "'");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(path, "expected a finite number");
  return d;
}

double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, path + "." + key);
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) schema_error(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Phase> phases(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) schema_error(path, "expected a non-empty array of phases");
  std::vector<Phase> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    try {
      out.push_back(parse_phase(text(v[i], path)));
    } catch (const InputError& e) {
      schema_error(path + "[" + std::to_string(i) + "]", e.what());
    }
  }
  return out;
}

CMatrix real_matrix(const json& v, const std::string& path, std::size_t n) {
  if (!v.is_array() || v.size() != n) schema_error(path, "expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  CMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = numbers(v[r], path + "[" + std::to_string(r) + "]");
    if (row.size() != n) schema_error(path, "expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
    for (std::size_t c = 0; c < n; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

Complex complex_pair(const json& v, const std::string& path) {
  const auto p = numbers(v, path);
  if (p.size() != 2) schema_error(path, "expected [real, imag]");
  return {p[0], p[1]};
}

// Ohms per phase at a bus's line-to-neutral base.
double impedance_base(const NetworkModel& m, const Bus& b) { return b.kv_ll * b.kv_ll * 1000.0 / (3.0 * m.s_base_kva); }

std::vector<NodeId> nodes_of(const std::string& bus, const std::vector<Phase>& ph) {
  std::vector<NodeId> out;
  for (Phase p : ph) out.push_back(NodeId{bus, p});
  return out;
}

const Bus& bus_ref(const NetworkModel& m, const std::string& name, const std::string& path) {
  const Bus* b = m.find_bus(name);
  if (!b) schema_error(path, "unknown bus '" + name + "'");
  return *b;
}

void parse_bases(NetworkModel& m, const json& j) {
  check_keys(j, "bases", {"s_base_kva"});
  m.s_base_kva = number(require(j, "bases", "s_base_kva"), "bases.s_base_kva");
  if (!(m.s_base_kva > 0.0)) schema_error("bases.s_base_kva", "must be positive");
}

void parse_buses(NetworkModel& m, const json& j) {
  if (!j.is_array()) schema_error("buses", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "buses[" + std::to_string(i) + "]";
    check_keys(j[i], path, {"name", "phases", "kv_ll"});
    Bus b;
    b.name = text(require(j[i], path, "name"), path + ".name");
    b.phases = phases(require(j[i], path, "phases"), path + ".phases");
    b.kv_ll = number(require(j[i], path, "kv_ll"), path + ".kv_ll");
    m.buses.push_back(std::move(b));
  }
}

void parse_lines(NetworkModel& m, const json& j) {
  if (!j.is_array()) schema_error("lines", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string path = "lines[" + std::to_string(i) + "]";
    check_keys(e, path, {"name", "kind", "from", "to", "phases", "length", "r", "x", "b_us"});
    BranchElement br;
    br.name = text(require(e, path, "name"), path + ".name");
    const std::string kind = e.contains("kind") ? text(e["kind"], path + ".kind") : "line";
    const auto from = text(require(e, path, "from"), path + ".from");
    const auto to = text(require(e, path, "to"), path + ".to");
    const auto ph = phases(require(e, path, "phases"), path + ".phases");
    const Bus& fb = bus_ref(m, from, path + ".from");
    const Bus& tb = bus_ref(m, to, path + ".to");
    if (std::abs(fb.kv_ll - tb.kv_ll) > 1e-9 * fb.kv_ll) schema_error(path, "line ends have different voltage bases");
    br.from = nodes_of(from, ph);
    br.to = nodes_of(to, ph);
    const auto n = ph.size();
    if (kind == "switch") {
      for (const char* k : {"length", "r", "x", "b_us"})
        if (e.contains(k)) schema_error(path, std::string("switch does not take '") + k + "'");
      br.kind = BranchKind::switch_;
      br.primitive = switch_primitive(static_cast<int>(n));
    } else if (kind == "line") {
      br.kind = BranchKind::line;
      const double length = number(require(e, path, "length"), path + ".length");
      if (!(length > 0.0)) schema_error(path + ".length", "must be positive");
      const double zb = impedance_base(m, fb);
      const CMatrix z = (real_matrix(require(e, path, "r"), path + ".r", n) +
                         kJ * real_matrix(require(e, path, "x"), path + ".x", n)) * (length / zb);
      CMatrix ysh = CMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      if (e.contains("b_us")) ysh = kJ * real_matrix(e["b_us"], path + ".b_us", n) * (1e-6 * length * zb);
      try {
        br.primitive = line_primitive(z, ysh);
      } catch (const InputError& err) {
        schema_error(path, err.what());
      }
    } else {
      schema_error(path + ".kind", "expected 'line' or 'switch'");
    }
    m.branches.push_back(std::move(br));
  }
}

void parse_transformers(NetworkModel& m, const json& j) {
  if (!j.is_array()) schema_error("transformers", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string path = "transformers[" + std::to_string(i) + "]";
    check_keys(e, path, {"name", "from", "to", "phases", "connection", "r_pu", "x_pu"});
    BranchElement br;
    br.kind = BranchKind::transformer;
    br.name = text(require(e, path, "name"), path + ".name");
    const auto from = text(require(e, path, "from"), path + ".from");
    const auto to = text(require(e, path, "to"), path + ".to");
    bus_ref(m, from, path + ".from");
    bus_ref(m, to, path + ".to");
    const auto ph = phases(require(e, path, "phases"), path + ".phases");
    const auto conn_s = text(require(e, path, "connection"), path + ".connection");
    TransformerConnection conn;
    if (conn_s == "wye_wye") {
      conn = TransformerConnection::wye_wye;
    } else if (conn_s == "delta_wye") {
      conn = TransformerConnection::delta_wye;
      if (ph.size() != 3) schema_error(path, "delta_wye transformers must be three-phase");
    } else {
      schema_error(path + ".connection", "expected 'wye_wye' or 'delta_wye'");
    }
    const Complex z{number(require(e, path, "r_pu"), path + ".r_pu"), number(require(e, path, "x_pu"), path + ".x_pu")};
    if (z == Complex{}) schema_error(path, "transformer impedance must be nonzero");
    br.from = nodes_of(from, ph);
    br.to = nodes_of(to, ph);
    br.primitive = transformer_primitive(conn, 1.0 / z, static_cast<int>(ph.size()));
    m.branches.push_back(std::move(br));
  }
}

void parse_capacitors(NetworkModel& m, const json& j) {
  if (!j.is_array()) schema_error("capacitors", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string path = "capacitors[" + std::to_string(i) + "]";
    check_keys(e, path, {"name", "bus", "phases", "kvar"});
    BranchElement br;
    br.kind = BranchKind::capacitor;
    br.name = text(require(e, path, "name"), path + ".name");
    const auto bus = text(require(e, path, "bus"), path + ".bus");
    bus_ref(m, bus, path + ".bus");
    const auto ph = phases(require(e, path, "phases"), path + ".phases");
    const auto kvar = numbers(require(e, path, "kvar"), path + ".kvar");
    if (kvar.size() != ph.size()) schema_error(path + ".kvar", "needs one value per phase");
    br.from = nodes_of(bus, ph);
    const auto n = static_cast<Eigen::Index>(ph.size());
    br.primitive = CMatrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) br.primitive(k, k) = kJ * (kvar[static_cast<std::size_t>(k)] / m.s_base_kva);
    m.branches.push_back(std::move(br));
  }
}

void parse_regulators(NetworkModel& m, const json& j) {
  if (!j.is_array()) schema_error("regulators", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string path = "regulators[" + std::to_string(i) + "]";
    check_keys(e, path, {"id", "type", "from", "to", "phases", "y_t", "delta_k", "tap_min", "tap_max", "tap"});
    RegulatorAttachment r;
    r.id = text(require(e, path, "id"), path + ".id");
    try {
      r.model.type = parse_regulator_type(text(require(e, path, "type"), path + ".type"));
    } catch (const InputError& err) {
      schema_error(path + ".type", err.what());
    }
    r.model.y_t = complex_pair(require(e, path, "y_t"), path + ".y_t");
    r.model.step_size = number_or(e, path, "delta_k", 0.00625);
    r.model.tap_min = number_or(e, path, "tap_min", -16.0);
    r.model.tap_max = number_or(e, path, "tap_max", 16.0);
    r.tap = number_or(e, path, "tap", 0.0);
    const auto from = text(require(e, path, "from"), path + ".from");
    const auto to = text(require(e, path, "to"), path + ".to");
    bus_ref(m, from, path + ".from");
    bus_ref(m, to, path + ".to");
    const auto ph = phases(require(e, path, "phases"), path + ".phases");
    if (static_cast<int>(ph.size()) != r.model.phase_count())
      schema_error(path + ".phases", "regulator type needs " + std::to_string(r.model.phase_count()) + " phase(s)");
    r.from = nodes_of(from, ph);
    r.to = nodes_of(to, ph);
    m.regulators.push_back(std::move(r));
  }
}

void parse_loads(NetworkModel& m, const json& j) {
  if (!j.is_array()) schema_error("loads", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string path = "loads[" + std::to_string(i) + "]";
    check_keys(e, path, {"name", "bus", "connection", "phases", "kw", "kvar"});
    const auto bus = text(require(e, path, "bus"), path + ".bus");
    bus_ref(m, bus, path + ".bus");
    const auto conn = text(require(e, path, "connection"), path + ".connection");
    const auto kw = numbers(require(e, path, "kw"), path + ".kw");
    const auto kvar = numbers(require(e, path, "kvar"), path + ".kvar");
    const json& ph = require(e, path, "phases");
    if (!ph.is_array() || ph.empty()) schema_error(path + ".phases", "expected a non-empty array");
    if (kw.size() != ph.size() || kvar.size() != ph.size())
      schema_error(path, "kw and kvar need one value per phase entry");
    CompositeBus& cb = m.composite(bus);
    for (std::size_t k = 0; k < ph.size(); ++k) {
      const Complex s = Complex{kw[k], kvar[k]} / m.s_base_kva;
      const std::string tag = text(ph[k], path + ".phases");
      if (conn == "wye") {
        cb.wye.power[phase_slot(parse_phase(tag))] += s;
      } else if (conn == "delta") {
        int slot = -1;
        if (tag == "ab") slot = 0;
        if (tag == "bc") slot = 1;
        if (tag == "ca") slot = 2;
        if (slot < 0) schema_error(path + ".phases", "delta pairs are 'ab', 'bc' or 'ca', got '" + tag + "'");
        cb.delta.power[slot] += s;
      } else {
        schema_error(path + ".connection", "expected 'wye' or 'delta'");
      }
    }
  }
}

VoltVarCurve parse_curve(const NetworkModel& m, const json& e, const std::string& path) {
  VoltVarCurve c;
  c.droop = number_or(e, path, "droop_kvar_per_pu", 0.0) / m.s_base_kva;
  c.v_ref = number_or(e, path, "v_ref", 1.0);
  if (e.contains("v_band")) {
    const auto band = numbers(e["v_band"], path + ".v_band");
    if (band.size() != 2) schema_error(path + ".v_band", "expected [low, high]");
    c.v_lo = band[0];
    c.v_hi = band[1];
  }
  return c;
}

void parse_ders(NetworkModel& m, const json& j) {
  if (!j.is_array()) schema_error("ders", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string path = "ders[" + std::to_string(i) + "]";
    check_keys(e, path, {"name", "bus", "type", "phase", "kw", "droop_kvar_per_pu", "v_ref", "v_band"});
    const auto bus = text(require(e, path, "bus"), path + ".bus");
    bus_ref(m, bus, path + ".bus");
    const auto type = text(require(e, path, "type"), path + ".type");
    const double p = number(require(e, path, "kw"), path + ".kw") / m.s_base_kva;
    const VoltVarCurve curve = parse_curve(m, e, path);
    CompositeBus& cb = m.composite(bus);
    if (type == "one_phase") {
      const Phase ph = parse_phase(text(require(e, path, "phase"), path + ".phase"));
      cb.ders_1ph.push_back(Der1Phase{ph, p, curve});
    } else if (type == "three_phase") {
      if (e.contains("phase")) schema_error(path, "three_phase DERs do not take 'phase'");
      if (cb.der_3ph) schema_error(path, "bus '" + bus + "' already has a three-phase DER");
      cb.der_3ph = Der3Phase{p, curve};
    } else {
      schema_error(path + ".type", "expected 'one_phase' or 'three_phase' (two-phase DERs are not modeled)");
    }
  }
}

void parse_slack(NetworkModel& m, const json& j) {
  const json list = j.is_array() ? j : json::array({j});
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& e = list[i];
    const std::string path = "slack[" + std::to_string(i) + "]";
    check_keys(e, path, {"bus", "voltage_pu", "angle_deg"});
    SlackSpec s;
    s.bus = text(require(e, path, "bus"), path + ".bus");
    const Bus& b = bus_ref(m, s.bus, path + ".bus");
    const auto n = b.phases.size();
    std::vector<double> mag(n, 1.0);
    std::vector<double> ang;
    if (e.contains("voltage_pu")) mag = numbers(e["voltage_pu"], path + ".voltage_pu");
    if (e.contains("angle_deg")) {
      ang = numbers(e["angle_deg"], path + ".angle_deg");
    } else {
      for (Phase p : b.phases) ang.push_back(-120.0 * phase_slot(p));
    }
    if (mag.size() != n || ang.size() != n) schema_error(path, "voltage_pu and angle_deg need one value per bus phase");
    for (std::size_t k = 0; k < n; ++k)
      s.voltage[phase_slot(b.phases[k])] = std::polar(mag[k], ang[k] * std::numbers::pi / 180.0);
    m.slacks.push_back(std::move(s));
  }
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

NetworkModel parse_feeder(std::string_view text, std::string_view source) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": malformed JSON (" << e.what() << ")";
    throw InputError(os.str());
  }

  NetworkModel m;
  try {
    check_keys(root, "feeder",
               {"bases", "buses", "lines", "transformers", "capacitors", "regulators", "loads", "ders", "slack"});
    parse_bases(m, require(root, "feeder", "bases"));
    parse_buses(m, require(root, "feeder", "buses"));
    if (root.contains("lines")) parse_lines(m, root["lines"]);
    if (root.contains("transformers")) parse_transformers(m, root["transformers"]);
    if (root.contains("capacitors")) parse_capacitors(m, root["capacitors"]);
    if (root.contains("regulators")) parse_regulators(m, root["regulators"]);
    if (root.contains("loads")) parse_loads(m, root["loads"]);
    if (root.contains("ders")) parse_ders(m, root["ders"]);
    parse_slack(m, require(root, "feeder", "slack"));
    m.validate();
  } catch (const InputError& e) {
    throw InputError(std::string(source) + ": " + e.what());
  } catch (const json::exception& e) {
    throw InputError(std::string(source) + ": " + e.what());
  }
  return m;
}

NetworkModel load_feeder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feeder file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_feeder(buf.str(), path.string());
}

std::vector<double> parse_tap_overrides(const NetworkModel& model, std::string_view spec) {
  std::vector<double> taps = model.taps();
  std::string_view rest = spec;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw InputError("tap override '" + std::string(item) + "' is not reg=value");
    const std::size_t k = model.regulator_index(item.substr(0, eq));
    const std::string value(item.substr(eq + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) throw InputError("tap override value '" + value + "' is not a number");
    model.regulators[k].model.check_tap(v);
    taps[k] = v;
  }
  return taps;
}

}  // namespace vsens
