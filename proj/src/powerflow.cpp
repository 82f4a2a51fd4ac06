#include "vsens/powerflow.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vsens {

void SolverConfig::validate() const {
  if (!(tolerance > 0.0)) throw InputError("solver tolerance must be positive");
  if (max_iterations < 1) throw InputError("solver needs at least one iteration");
  if (!(relaxation >= 0.1 && relaxation <= 1.0)) throw InputError("relaxation must lie in [0.1, 1]");
}

namespace {

CVector total_injection(const NetworkModel& model, const NodeIndexMap& index, const CVector& e,
                        std::span<const ExtraInjection> extra) {
  CVector s = injection_power(model, index, e);
  for (const auto& x : extra) {
    if (x.node >= index.size()) throw InputError("extra injection references node out of range");
    s(static_cast<Eigen::Index>(x.node)) += x.power;
  }
  return s;
}

Eigen::VectorXi to_eigen(const std::vector<std::size_t>& v) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) out(static_cast<Eigen::Index>(k)) = static_cast<int>(v[k]);
  return out;
}

double max_abs(const CVector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

[[noreturn]] void fail(const char* method, int iterations, double mismatch) {
  std::ostringstream os;
  os << method << " power flow did not converge after " << iterations << " iterations (mismatch "
     << mismatch << " p.u.)";
  throw NonConvergenceError(os.str());
}

}  // namespace

CVector power_balance_residual(const NetworkModel& model, const NodeIndexMap& index, const CMatrix& y,
                               const CVector& e, std::span<const ExtraInjection> extra) {
  const CVector s = total_injection(model, index, e, extra);
  CVector r = e.conjugate().cwiseProduct(y * e) - s.conjugate();
  for (std::size_t i : index.slack_indices()) r(static_cast<Eigen::Index>(i)) = 0.0;
  return r;
}

RVector power_mismatch(const NetworkModel& model, const NodeIndexMap& index, const CVector& e,
                       std::span<const double> taps, std::span<const ExtraInjection> extra) {
  const CMatrix y = assemble_y_nominal(model, index) + assemble_delta_y(model, index, taps);
  return power_balance_residual(model, index, y, e, extra).cwiseAbs();
}

CVector flat_start(const NetworkModel& model, const NodeIndexMap& index) {
  using std::numbers::pi;
  const auto n = static_cast<Eigen::Index>(index.size());
  CVector e(n);
  const SlackSpec& ref = model.slacks.front();
  double ref_angle = 0.0;
  for (const Complex& v : ref.voltage)
    if (std::abs(v) > 0.0) {
      ref_angle = std::arg(v);
      break;
    }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int p = phase_slot(index.node(static_cast<std::size_t>(i)).phase);
    e(i) = std::polar(1.0, ref_angle - 2.0 * pi / 3.0 * p);
  }
  for (const auto& s : model.slacks)
    for (int p = 0; p < 3; ++p)
      if (auto i = index.find(NodeId{s.bus, static_cast<Phase>(p)})) e(static_cast<Eigen::Index>(*i)) = s.voltage[p];
  return e;
}

namespace {

OperatingPoint solve_fixed_point(const NetworkModel& model, const NodeIndexMap& index, const CMatrix& y,
                                 CVector e, const SolverConfig& config, std::span<const ExtraInjection> extra) {
  const Eigen::VectorXi ci = to_eigen(index.composite_indices());
  const Eigen::VectorXi si = to_eigen(index.slack_indices());
  OperatingPoint op;

  if (ci.size() == 0) {
    op.voltage = e;
    return op;
  }

  const CMatrix y_cc = y(ci, ci);
  const CMatrix y_cs = y(ci, si);
  const CVector e_s = e(si);
  Eigen::PartialPivLU<CMatrix> lu(y_cc);
  if (!(std::abs(lu.determinant()) > 0.0) || lu.rcond() < 1e-14)
    throw NumericalError("composite block of the admittance matrix is singular");
  const CVector source = y_cs * e_s;

  double mismatch = max_abs(power_balance_residual(model, index, y, e, extra));
  int it = 0;
  while (mismatch > config.tolerance) {
    if (it >= config.max_iterations) fail("fixed-point", it, mismatch);
    const CVector s = total_injection(model, index, e, extra);
    const CVector current = s(ci).cwiseQuotient(e(ci)).conjugate();
    const CVector next = lu.solve(current - source);
    e(ci) = (1.0 - config.relaxation) * e(ci) + config.relaxation * next;
    ++it;
    mismatch = max_abs(power_balance_residual(model, index, y, e, extra));
    if (!std::isfinite(mismatch)) fail("fixed-point", it, mismatch);
  }
  op.voltage = std::move(e);
  op.iterations = it;
  op.mismatch = mismatch;
  return op;
}

// Real residual over composite nodes as a function of [Re E_C; Im E_C].
RVector stacked_residual(const NetworkModel& model, const NodeIndexMap& index, const CMatrix& y,
                         const CVector& e, const Eigen::VectorXi& ci, std::span<const ExtraInjection> extra) {
  const CVector r = power_balance_residual(model, index, y, e, extra)(ci);
  RVector out(2 * r.size());
  out << r.real(), r.imag();
  return out;
}

OperatingPoint solve_newton(const NetworkModel& model, const NodeIndexMap& index, const CMatrix& y, CVector e,
                            const SolverConfig& config, std::span<const ExtraInjection> extra) {
  const Eigen::VectorXi ci = to_eigen(index.composite_indices());
  const Eigen::Index nc = ci.size();
  OperatingPoint op;
  if (nc == 0) {
    op.voltage = e;
    return op;
  }

  auto perturbed = [&](const CVector& base, Eigen::Index k, double h) {
    CVector v = base;
    const Eigen::Index node = ci(k % nc);
    v(node) += (k < nc) ? Complex{h, 0.0} : Complex{0.0, h};
    return v;
  };

  RVector r = stacked_residual(model, index, y, e, ci, extra);
  double mismatch = max_abs(power_balance_residual(model, index, y, e, extra));
  int it = 0;
  while (mismatch > config.tolerance) {
    if (it >= config.max_iterations) fail("newton", it, mismatch);
    constexpr double h = 1e-7;
    RMatrix jac(2 * nc, 2 * nc);
    for (Eigen::Index k = 0; k < 2 * nc; ++k) {
      const RVector plus = stacked_residual(model, index, y, perturbed(e, k, h), ci, extra);
      const RVector minus = stacked_residual(model, index, y, perturbed(e, k, -h), ci, extra);
      jac.col(k) = (plus - minus) / (2.0 * h);
    }
    const RVector step = jac.partialPivLu().solve(-r);

    // Backtracking on the mismatch norm.
    double alpha = 1.0;
    CVector trial;
    double trial_mismatch = 0.0;
    for (int ls = 0; ls < 30; ++ls) {
      trial = e;
      for (Eigen::Index k = 0; k < nc; ++k) trial(ci(k)) += alpha * Complex{step(k), step(nc + k)};
      trial_mismatch = max_abs(power_balance_residual(model, index, y, trial, extra));
      if (std::isfinite(trial_mismatch) && trial_mismatch < mismatch) break;
      alpha *= 0.5;
    }
    ++it;
    if (!(trial_mismatch < mismatch)) {
      // No further progress possible at this precision.
      if (mismatch <= config.tolerance * 10.0) break;
      fail("newton", it, mismatch);
    }
    e = std::move(trial);
    mismatch = trial_mismatch;
    r = stacked_residual(model, index, y, e, ci, extra);
  }
  op.voltage = std::move(e);
  op.iterations = it;
  op.mismatch = mismatch;
  return op;
}

}  // namespace

OperatingPoint solve_power_flow(const NetworkModel& model, const NodeIndexMap& index,
                                std::span<const double> taps, const SolverConfig& config,
                                std::span<const ExtraInjection> extra) {
  config.validate();
  const CMatrix y = assemble_y_nominal(model, index) + assemble_delta_y(model, index, taps);

  CVector e0 = flat_start(model, index);
  if (config.start) {
    if (config.start->size() != e0.size()) throw InputError("warm-start vector has the wrong size");
    for (std::size_t i : index.composite_indices())
      e0(static_cast<Eigen::Index>(i)) = (*config.start)(static_cast<Eigen::Index>(i));
  }

  OperatingPoint op = config.method == SolverMethod::newton
                          ? solve_newton(model, index, y, std::move(e0), config, extra)
                          : solve_fixed_point(model, index, y, std::move(e0), config, extra);
  op.taps.assign(taps.begin(), taps.end());
  return op;
}

}  // namespace vsens
