#include "vsens/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <thread>

namespace vsens {

void OracleConfig::validate() const {
  if (!(power_step > 0.0) || !(tap_step > 0.0)) throw InputError("oracle steps must be positive");
  if (!(mape_floor >= 0.0)) throw InputError("MAPE floor must be non-negative");
  if (!(solve_tolerance > 0.0)) throw InputError("oracle solve tolerance must be positive");
}

namespace {

RVector state(const OperatingPoint& op) {
  const auto n = op.voltage.size();
  RVector x(2 * n);
  x << op.magnitude(), op.angle();
  return x;
}

SolverConfig resolve_config(const OracleConfig& config, const OperatingPoint& op) {
  SolverConfig sc;
  sc.tolerance = config.solve_tolerance;
  sc.max_iterations = config.max_iterations;
  sc.method = config.method;
  sc.start = op.voltage;
  return sc;
}

RVector angle_difference(const RVector& plus, const RVector& minus) {
  // Angles are compared modulo 2*pi.
  RVector d = plus - minus;
  const auto n = d.size() / 2;
  for (Eigen::Index i = n; i < d.size(); ++i) d(i) = std::remainder(d(i), 2.0 * std::numbers::pi);
  return d;
}

RVector fd_power(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op, std::size_t node,
                 Complex unit, const OracleConfig& config) {
  config.validate();
  if (node >= index.size()) throw InputError("node index out of range");
  const SolverConfig sc = resolve_config(config, op);
  const double h = config.power_step;
  auto solve_with = [&](double step) {
    const ExtraInjection x{node, step * unit};
    return state(solve_power_flow(model, index, op.taps, sc, std::span<const ExtraInjection>(&x, 1)));
  };
  if (config.scheme == DifferenceScheme::central) return angle_difference(solve_with(h), solve_with(-h)) / (2.0 * h);
  return angle_difference(solve_with(h), solve_with(0.0)) / h;
}

}  // namespace

RVector fd_sensitivity_p(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                         std::size_t node, const OracleConfig& config) {
  return fd_power(model, index, op, node, Complex{1.0, 0.0}, config);
}

RVector fd_sensitivity_q(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                         std::size_t node, const OracleConfig& config) {
  return fd_power(model, index, op, node, Complex{0.0, 1.0}, config);
}

RVector fd_sensitivity_tap(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                           std::size_t regulator, const OracleConfig& config) {
  config.validate();
  if (regulator >= model.regulators.size()) throw InputError("regulator index out of range");
  const SolverConfig sc = resolve_config(config, op);
  const auto& reg = model.regulators[regulator].model;
  const double h = config.tap_step;
  const double g = op.taps.at(regulator);
  auto solve_at = [&](double tap) {
    std::vector<double> taps = op.taps;
    taps[regulator] = tap;
    return state(solve_power_flow(model, index, taps, sc));
  };
  const bool up_ok = g + h <= reg.tap_max;
  const bool down_ok = g - h >= reg.tap_min;
  if (config.scheme == DifferenceScheme::central && up_ok && down_ok)
    return angle_difference(solve_at(g + h), solve_at(g - h)) / (2.0 * h);
  if (up_ok) return angle_difference(solve_at(g + h), solve_at(g)) / h;
  if (down_ok) return angle_difference(solve_at(g), solve_at(g - h)) / h;
  throw InputError("tap range of regulator '" + model.regulators[regulator].id + "' is narrower than the tap step");
}

SensitivityMatrices fd_sensitivity_all(const NetworkModel& model, const NodeIndexMap& index,
                                       const OperatingPoint& op, const OracleConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(index.size());
  const auto r = static_cast<Eigen::Index>(model.regulators.size());
  RMatrix xp(2 * n, n), xq(2 * n, n), xt(2 * n, r);

  std::vector<std::function<void()>> jobs;
  for (Eigen::Index k = 0; k < n; ++k) {
    jobs.emplace_back([&, k] { xp.col(k) = fd_sensitivity_p(model, index, op, static_cast<std::size_t>(k), config); });
    jobs.emplace_back([&, k] { xq.col(k) = fd_sensitivity_q(model, index, op, static_cast<std::size_t>(k), config); });
  }
  for (Eigen::Index s = 0; s < r; ++s)
    jobs.emplace_back([&, s] { xt.col(s) = fd_sensitivity_tap(model, index, op, static_cast<std::size_t>(s), config); });

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        jobs[j]();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  SensitivityMatrices m;
  m.dE_dP = xp.topRows(n);
  m.dTheta_dP = xp.bottomRows(n);
  m.dE_dQ = xq.topRows(n);
  m.dTheta_dQ = xq.bottomRows(n);
  m.dE_dGamma = xt.topRows(n);
  m.dTheta_dGamma = xt.bottomRows(n);
  return m;
}

const MatrixError& ValidationReport::at(std::string_view name) const {
  for (const auto& m : matrices)
    if (m.name == name) return m;
  throw std::out_of_range("no matrix named " + std::string(name));
}

double ValidationReport::max_mape() const {
  double worst = 0.0;
  for (const auto& m : matrices) worst = std::max(worst, m.mape);
  return worst;
}

ValidationReport compare(const SensitivityMatrices& analytical, const SensitivityMatrices& reference,
                         double mape_floor) {
  ValidationReport report;
  for (std::size_t k = 0; k < SensitivityMatrices::names.size(); ++k) {
    const RMatrix& a = analytical[k];
    const RMatrix& ref = reference[k];
    if (a.rows() != ref.rows() || a.cols() != ref.cols())
      throw InputError("dimension mismatch comparing " + std::string(SensitivityMatrices::names[k]));
    MatrixError err;
    err.name = SensitivityMatrices::names[k];
    double pct_sum = 0.0;
    double abs_sum = 0.0;
    double worst = -1.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double diff = std::abs(a(i, j) - ref(i, j));
        abs_sum += diff;
        if (std::abs(ref(i, j)) > mape_floor) {
          pct_sum += diff / std::abs(ref(i, j));
          ++err.counted;
        } else {
          ++err.excluded;
        }
        if (diff > worst) {
          worst = diff;
          err.worst_row = i;
          err.worst_col = j;
          err.worst_analytical = a(i, j);
          err.worst_reference = ref(i, j);
        }
      }
    }
    const auto total = static_cast<double>(a.size());
    err.mae = total > 0 ? abs_sum / total : 0.0;
    err.mape = err.counted > 0 ? 100.0 * pct_sum / static_cast<double>(err.counted) : 0.0;
    report.matrices.push_back(std::move(err));
  }
  return report;
}

}  // namespace vsens
