// vsens: power flow, sensitivity export, oracle validation and sweeps.

#include "vsens/export.hpp"
#include "vsens/feeder_io.hpp"
#include "vsens/oracle.hpp"
#include "vsens/sensitivity.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace vsens;

namespace {

constexpr double kDegrees = 180.0 / std::numbers::pi;

struct CommonOptions {
  std::string feeder;
  std::string out;
  std::string format = "csv";
  std::string taps;
  double tolerance = 1e-10;
  int max_iterations = 200;
  std::string method = "fixed_point";
};

struct OracleOptions {
  double power_step = 1e-4;
  double tap_step = 0.1;
  std::string scheme = "central";
  double mape_floor = 1e-8;
  double solve_tolerance = 1e-12;
  unsigned workers = 1;
};

struct SweepOptions {
  std::string node;
  std::string regulator;
  std::string quantity = "p";
  std::optional<double> from, to, step;
  std::vector<double> samples;
};

struct Session {
  NetworkModel model;
  NodeIndexMap index;
  std::vector<double> taps;
  SolverConfig solver;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_feeder = true) {
  auto* f = cmd->add_option("--feeder", o.feeder, "Feeder JSON file");
  if (needs_feeder) f->required();
  cmd->add_option("--out", o.out, "Output directory (stdout when omitted)");
  cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--taps", o.taps, "Tap overrides, e.g. reg1=16,reg2=-3");
  cmd->add_option("--tolerance", o.tolerance, "Power-flow mismatch tolerance (p.u.)")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iterations", o.max_iterations, "Power-flow iteration limit")->check(CLI::PositiveNumber);
  cmd->add_option("--method", o.method, "Power-flow method")->check(CLI::IsMember({"fixed_point", "newton"}));
}

SolverMethod parse_method(const std::string& s) { return s == "newton" ? SolverMethod::newton : SolverMethod::fixed_point; }

Session open_session(const CommonOptions& o) {
  Session s;
  s.model = load_feeder(o.feeder);
  s.index = build_node_index(s.model);
  s.taps = o.taps.empty() ? s.model.taps() : parse_tap_overrides(s.model, o.taps);
  s.solver.tolerance = o.tolerance;
  s.solver.max_iterations = o.max_iterations;
  s.solver.method = parse_method(o.method);
  return s;
}

// Writes to <out>/<name>, or to stdout under a "# name" banner when no directory is given.
void emit(const CommonOptions& o, const std::string& name, const std::string& content) {
  if (o.out.empty()) {
    std::cout << "# " << name << '\n' << content;
    return;
  }
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  f << content;
}

std::string taps_text(const NetworkModel& m, const std::vector<double>& taps) {
  std::ostringstream os;
  for (std::size_t k = 0; k < taps.size(); ++k) os << (k ? "," : "") << m.regulators[k].id << '=' << format_number(taps[k]);
  return os.str();
}

int cmd_solve(const CommonOptions& o) {
  const Session s = open_session(o);
  const OperatingPoint op = solve_power_flow(s.model, s.index, s.taps, s.solver);
  if (o.format == "json") {
    emit(o, "operating_point.json", operating_point_json(s.model, s.index, op).dump(2) + "\n");
  } else {
    std::ostringstream csv;
    write_operating_point_csv(csv, s.index, op);
    emit(o, "operating_point.csv", csv.str());
  }
  std::cerr << "converged in " << op.iterations << " iterations, mismatch " << format_number(op.mismatch)
            << ", taps " << taps_text(s.model, op.taps) << '\n';
  return 0;
}

int cmd_sens(const CommonOptions& o) {
  const Session s = open_session(o);
  const OperatingPoint op = solve_power_flow(s.model, s.index, s.taps, s.solver);
  const SensitivityResult r = solve_all(s.model, s.index, op);
  if (o.format == "json") {
    emit(o, "sensitivities.json", sensitivity_json(s.model, s.index, op, r, o.tolerance).dump(2) + "\n");
  } else {
    const auto rows = s.index.labels();
    for (std::size_t k = 0; k < SensitivityMatrices::names.size(); ++k) {
      std::ostringstream csv;
      write_matrix_csv(csv, export_view(r.matrices, k), rows, column_labels(s.model, s.index, k));
      emit(o, std::string(SensitivityMatrices::names[k]) + ".csv", csv.str());
    }
  }
  std::cerr << "N=" << s.index.size() << ", condition estimate " << format_number(r.condition_estimate)
            << ", taps " << taps_text(s.model, op.taps) << '\n';
  if (r.ill_conditioned) std::cerr << "warning: sensitivity system is ill-conditioned\n";
  return 0;
}

OracleConfig oracle_config(const OracleOptions& oo, const CommonOptions& o) {
  OracleConfig c;
  c.power_step = oo.power_step;
  c.tap_step = oo.tap_step;
  c.scheme = oo.scheme == "forward" ? DifferenceScheme::forward : DifferenceScheme::central;
  c.mape_floor = oo.mape_floor;
  c.solve_tolerance = oo.solve_tolerance;
  c.workers = oo.workers;
  c.method = parse_method(o.method);
  c.validate();
  return c;
}

int cmd_validate(const CommonOptions& o, const OracleOptions& oo) {
  Session s = open_session(o);
  s.solver.tolerance = std::min(o.tolerance, oo.solve_tolerance);
  const OracleConfig config = oracle_config(oo, o);
  const OperatingPoint op = solve_power_flow(s.model, s.index, s.taps, s.solver);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const SensitivityResult r = solve_all(s.model, s.index, op);
  const auto t1 = clock::now();
  const SensitivityMatrices ref = fd_sensitivity_all(s.model, s.index, op, config);
  const auto t2 = clock::now();
  ValidationReport report = compare(r.matrices, ref, config.mape_floor);
  report.analytical_seconds = std::chrono::duration<double>(t1 - t0).count();
  report.oracle_seconds = std::chrono::duration<double>(t2 - t1).count();
  if (o.format == "json") {
    emit(o, "validation.json", report_json(report, config).dump(2) + "\n");
  } else {
    std::ostringstream table;
    write_report_table(table, report);
    emit(o, "validation.txt", table.str());
  }
  return 0;
}

std::vector<double> sweep_points(double from, double to, double step) {
  if (!(step > 0.0) || to < from) throw InputError("sweep range needs from <= to and a positive step");
  std::vector<double> pts;
  const auto count = static_cast<long>(std::floor((to - from) / step + 1e-9));
  for (long k = 0; k <= count; ++k) pts.push_back(from + static_cast<double>(k) * step);
  return pts;
}

int cmd_sweep(const CommonOptions& o, const SweepOptions& so) {
  Session s = open_session(o);
  if (so.node.empty() == so.regulator.empty()) throw InputError("sweep needs exactly one of --node or --regulator");
  const bool tap_sweep = !so.regulator.empty();
  std::size_t target = 0;
  std::vector<double> points, samples = so.samples;
  if (tap_sweep) {
    target = s.model.regulator_index(so.regulator);
    const auto& reg = s.model.regulators[target].model;
    points = sweep_points(so.from.value_or(reg.tap_min), so.to.value_or(reg.tap_max), so.step.value_or(1.0));
    if (samples.empty()) samples = {-15, -10, -5, 0, 5, 10, 15};
    for (double p : points) reg.check_tap(p);
  } else {
    if (so.quantity != "p" && so.quantity != "q") throw InputError("--quantity must be p or q");
    target = s.index.index(parse_node_id(so.node));
    points = sweep_points(so.from.value_or(-1000.0), so.to.value_or(1000.0), so.step.value_or(250.0));
    if (samples.empty()) samples = points;
  }

  const Complex unit = so.quantity == "q" ? Complex{0.0, 1.0} : Complex{1.0, 0.0};
  auto solve_at = [&](double x, const std::optional<CVector>& start) {
    SolverConfig sc = s.solver;
    sc.start = start;
    std::vector<double> taps = s.taps;
    if (tap_sweep) {
      taps[target] = x;
      return std::pair{solve_power_flow(s.model, s.index, taps, sc), std::vector<ExtraInjection>{}};
    }
    std::vector<ExtraInjection> extra{{target, unit * (x / s.model.s_base_kva)}};
    return std::pair{solve_power_flow(s.model, s.index, taps, sc, extra), extra};
  };

  const auto labels = s.index.labels();
  const std::string input = tap_sweep ? "tap" : (so.quantity == "p" ? "p_kw" : "q_kvar");
  auto header = [&](const char* e, const char* th) {
    std::string h = input;
    for (const auto& l : labels) h += std::string(",") + e + l;
    for (const auto& l : labels) h += std::string(",") + th + l;
    return h + "\n";
  };

  std::ostringstream series;
  series << header("E_", "theta_deg_");
  std::optional<CVector> warm;
  for (double x : points) {
    const OperatingPoint op = solve_at(x, warm).first;
    warm = op.voltage;
    series << format_number(x);
    const RVector mag = op.magnitude(), ang = op.angle();
    for (Eigen::Index i = 0; i < mag.size(); ++i) series << ',' << format_number(mag(i));
    for (Eigen::Index i = 0; i < ang.size(); ++i) series << ',' << format_number(ang(i) * kDegrees);
    series << '\n';
  }

  std::ostringstream slopes;
  slopes << header("dE_", "dtheta_deg_");
  for (double x : samples) {
    if (tap_sweep) s.model.regulators[target].model.check_tap(x);
    const OperatingPoint op = solve_at(x, std::nullopt).first;
    const SensitivityResult r = solve_all(s.model, s.index, op);
    const auto n = static_cast<Eigen::Index>(s.index.size());
    RVector de(n), dth(n);
    const auto col = static_cast<Eigen::Index>(target);
    if (tap_sweep) {
      de = r.matrices.dE_dGamma.col(col);
      dth = r.matrices.dTheta_dGamma.col(col);
    } else {
      const bool q = so.quantity == "q";
      de = (q ? r.matrices.dE_dQ : r.matrices.dE_dP).col(col) / s.model.s_base_kva;
      dth = (q ? r.matrices.dTheta_dQ : r.matrices.dTheta_dP).col(col) / s.model.s_base_kva;
    }
    slopes << format_number(x);
    for (Eigen::Index i = 0; i < n; ++i) slopes << ',' << format_number(de(i));
    for (Eigen::Index i = 0; i < n; ++i) slopes << ',' << format_number(dth(i) * kDegrees);
    slopes << '\n';
  }
  emit(o, "sweep.csv", series.str());
  emit(o, "sweep_slopes.csv", slopes.str());
  return 0;
}

int cmd_report(const CommonOptions& o, const std::string& input) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw InputError("cannot open report '" + input + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(input + ": " + e.what());
  }
  const ValidationReport report = report_from_json(j);
  if (o.format == "json") {
    OracleConfig config;
    if (j.contains("oracle")) {
      const auto& oc = j["oracle"];
      config.power_step = oc.value("power_step", config.power_step);
      config.tap_step = oc.value("tap_step", config.tap_step);
      config.scheme = oc.value("scheme", std::string("central")) == "forward" ? DifferenceScheme::forward
                                                                             : DifferenceScheme::central;
      config.mape_floor = oc.value("mape_floor", config.mape_floor);
      config.solve_tolerance = oc.value("solve_tolerance", config.solve_tolerance);
    }
    emit(o, "report.json", report_json(report, config).dump(2) + "\n");
  } else {
    std::ostringstream table;
    write_report_table(table, report);
    emit(o, "report.txt", table.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voltage sensitivity analysis for unbalanced distribution feeders"};
  app.require_subcommand(1);

  CommonOptions common;
  OracleOptions oracle;
  SweepOptions sweep;
  std::string report_input;

  auto* solve = app.add_subcommand("solve", "Run the power flow and write node voltages");
  add_common(solve, common);
  auto* sens = app.add_subcommand("sens", "Write the six sensitivity matrices");
  add_common(sens, common);
  auto* validate = app.add_subcommand("validate", "Compare analytical matrices with perturb-and-observe");
  add_common(validate, common);
  validate->add_option("--power-step", oracle.power_step, "Power perturbation (p.u.)")->check(CLI::PositiveNumber);
  validate->add_option("--tap-step", oracle.tap_step, "Tap perturbation")->check(CLI::PositiveNumber);
  validate->add_option("--scheme", oracle.scheme)->check(CLI::IsMember({"central", "forward"}));
  validate->add_option("--mape-floor", oracle.mape_floor, "Reference entries at or below this are excluded");
  validate->add_option("--solve-tolerance", oracle.solve_tolerance, "Tolerance of the re-solves");
  validate->add_option("--workers", oracle.workers, "Oracle worker threads")->check(CLI::PositiveNumber);
  auto* sw = app.add_subcommand("sweep", "Voltage series over an input range with analytical slopes");
  add_common(sw, common);
  sw->add_option("--node", sweep.node, "Injection node, e.g. b1.a");
  sw->add_option("--regulator", sweep.regulator, "Regulator id");
  sw->add_option("--quantity", sweep.quantity, "p or q for node sweeps")->check(CLI::IsMember({"p", "q"}));
  sw->add_option("--from", sweep.from, "Start (kW, kvar or tap)");
  sw->add_option("--to", sweep.to, "End (kW, kvar or tap)");
  sw->add_option("--step", sweep.step, "Step");
  sw->add_option("--samples", sweep.samples, "Points where slopes are reported")->delimiter(',');
  auto* report = app.add_subcommand("report", "Render a saved validation report");
  add_common(report, common, false);
  report->add_option("--input", report_input, "validation.json written by 'validate --format json'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*solve) return cmd_solve(common);
    if (*sens) return cmd_sens(common);
    if (*validate) return cmd_validate(common, oracle);
    if (*sw) return cmd_sweep(common, sweep);
    if (*report) return cmd_report(common, report_input);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
