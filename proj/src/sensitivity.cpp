#include "vsens/sensitivity.hpp"

#include <cmath>
#include <sstream>

namespace vsens {

const RMatrix& SensitivityMatrices::operator[](std::size_t k) const {
  switch (k) {
    case 0: return dE_dP;
    case 1: return dTheta_dP;
    case 2: return dE_dQ;
    case 3: return dTheta_dQ;
    case 4: return dE_dGamma;
    case 5: return dTheta_dGamma;
    default: throw std::out_of_range("sensitivity matrix index");
  }
}

RMatrix& SensitivityMatrices::operator[](std::size_t k) {
  return const_cast<RMatrix&>(static_cast<const SensitivityMatrices&>(*this)[k]);
}

SystemBlocks build_system_blocks(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                                 const BlockOptions& options) {
  const auto n = static_cast<Eigen::Index>(index.size());
  const CVector& e = op.voltage;
  if (e.size() != n) throw InputError("operating point does not match the node index");

  const CMatrix y = assemble_y_nominal(model, index) + assemble_delta_y(model, index, op.taps);
  const RVector mag = e.cwiseAbs();
  const CVector a = e.cwiseQuotient(mag.cast<Complex>());
  const CVector a_conj = a.conjugate();
  const CVector e_conj = e.conjugate();
  const CVector ye = y * e;

  SystemBlocks b;
  b.c1 = a_conj.cwiseProduct(ye).asDiagonal();
  b.c2 = e_conj.asDiagonal() * y * a.asDiagonal();
  b.d1 = -CMatrix(e_conj.cwiseProduct(ye).asDiagonal());
  b.d2 = e_conj.asDiagonal() * y * e.asDiagonal();

  if (options.generalized_terms) {
    // The load enters the balance as conj(Gamma S); its derivative with
    // respect to conj(E) is conj(Pi).
    const CMatrix pi_conj = pi_matrix(model, index, e).conjugate();
    const RMatrix psi = psi_matrix(model, index, mag);
    const RMatrix omega = omega_lambda_matrices(model, index, mag).first;
    b.c3 = pi_conj * a_conj.asDiagonal();
    b.c4 = kJ * (psi + omega).cast<Complex>();
    b.d3 = -(pi_conj * e_conj.asDiagonal());
  } else {
    b.c3 = CMatrix::Zero(n, n);
    b.c4 = CMatrix::Zero(n, n);
    b.d3 = CMatrix::Zero(n, n);
  }

  const CMatrix c = b.c();
  const CMatrix d = b.d();
  b.augmented.resize(2 * n, 2 * n);
  b.augmented << c.real(), -d.imag(), c.imag(), d.real();
  return b;
}

SystemBlocks apply_slack(SystemBlocks blocks, std::span<const std::size_t> slack) {
  const Eigen::Index n = blocks.augmented.rows() / 2;
  for (std::size_t s : slack) {
    const auto i = static_cast<Eigen::Index>(s);
    if (i >= n) throw InputError("slack index out of range");
    blocks.augmented.row(i).setZero();
    blocks.augmented(i, i) = 1.0;
    blocks.augmented.row(n + i).setZero();
    blocks.augmented(n + i, n + i) = 1.0;
  }
  blocks.slack.assign(slack.begin(), slack.end());
  blocks.slack_applied = true;
  return blocks;
}

RMatrix rhs_for_p(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  RMatrix b = RMatrix::Zero(2 * m, m);
  b.topRows(m).setIdentity();
  return b;
}

RMatrix rhs_for_q(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  RMatrix b = RMatrix::Zero(2 * m, m);
  b.bottomRows(m) = -RMatrix::Identity(m, m);
  return b;
}

RMatrix rhs_for_taps(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op) {
  const auto n = static_cast<Eigen::Index>(index.size());
  const auto r = static_cast<Eigen::Index>(model.regulators.size());
  if (op.taps.size() != model.regulators.size()) throw InputError("operating point taps do not match regulators");
  RMatrix b(2 * n, r);
  const CVector& e = op.voltage;
  for (Eigen::Index s = 0; s < r; ++s) {
    const auto& reg = model.regulators[static_cast<std::size_t>(s)];
    const auto ports = regulator_ports(reg, index);
    const CMatrix dy = d_delta_y_d_gamma(reg.model, op.taps[static_cast<std::size_t>(s)]);
    CVector f = CVector::Zero(n);
    for (std::size_t row = 0; row < ports.size(); ++row) {
      Complex acc{};
      for (std::size_t col = 0; col < ports.size(); ++col)
        acc += dy(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) *
               e(static_cast<Eigen::Index>(ports[col]));
      const auto i = static_cast<Eigen::Index>(ports[row]);
      f(i) -= std::conj(e(i)) * acc;
    }
    b.col(s) << f.real(), f.imag();
  }
  return b;
}

FactorizedSystem::FactorizedSystem(const SystemBlocks& blocks)
    : a_(blocks.augmented), lu_(blocks.augmented), slack_(blocks.slack) {
  if (!blocks.slack_applied) throw InputError("sensitivity system needs slack rows applied before factorization");
  rcond_ = lu_.rcond();
  if (!(rcond_ > 1e-16) || !std::isfinite(rcond_)) {
    std::ostringstream os;
    os << "sensitivity system is singular (condition estimate " << (rcond_ > 0.0 ? 1.0 / rcond_ : INFINITY)
       << ")";
    throw NumericalError(os.str());
  }
}

RMatrix FactorizedSystem::solve(RMatrix rhs) const {
  const Eigen::Index n = a_.rows() / 2;
  if (rhs.rows() != a_.rows()) throw InputError("right-hand side has the wrong row count");
  for (std::size_t s : slack_) {
    rhs.row(static_cast<Eigen::Index>(s)).setZero();
    rhs.row(n + static_cast<Eigen::Index>(s)).setZero();
  }
  RMatrix x = lu_.solve(rhs);
  // One step of iterative refinement.
  RMatrix res = rhs - a_ * x;
  x += lu_.solve(res);
  res = rhs - a_ * x;
  for (std::size_t s : slack_) {
    x.row(static_cast<Eigen::Index>(s)).setZero();
    x.row(n + static_cast<Eigen::Index>(s)).setZero();
  }
  const double r = res.size() == 0 ? 0.0 : res.cwiseAbs().maxCoeff();
  max_residual_ = std::max(max_residual_, r);
  return x;
}

SensitivityResult solve_all(const NetworkModel& model, const NodeIndexMap& index, const OperatingPoint& op,
                            const BlockOptions& options) {
  const std::size_t n = index.size();
  const auto m = static_cast<Eigen::Index>(n);
  const SystemBlocks blocks = apply_slack(build_system_blocks(model, index, op, options), index.slack_indices());
  const FactorizedSystem system(blocks);

  SensitivityResult out;
  const RMatrix xp = system.solve(rhs_for_p(n));
  const RMatrix xq = system.solve(rhs_for_q(n));
  const RMatrix xt = system.solve(rhs_for_taps(model, index, op));
  out.matrices.dE_dP = xp.topRows(m);
  out.matrices.dTheta_dP = xp.bottomRows(m);
  out.matrices.dE_dQ = xq.topRows(m);
  out.matrices.dTheta_dQ = xq.bottomRows(m);
  out.matrices.dE_dGamma = xt.topRows(m);
  out.matrices.dTheta_dGamma = xt.bottomRows(m);
  out.condition_estimate = system.condition_estimate();
  out.ill_conditioned = system.ill_conditioned();
  out.max_residual = system.max_residual();
  return out;
}

NetworkModel make_pv_bus(NetworkModel model, std::string_view bus, double setpoint, double droop, double p) {
  const Bus& b = model.bus(bus);
  const std::vector<Phase> phases = b.phases;
  CompositeBus& cb = model.composite(bus);
  cb.wye = {};
  cb.delta = {};
  cb.der_3ph.reset();
  cb.ders_1ph.clear();
  const double n = static_cast<double>(phases.size());
  for (Phase ph : phases) {
    // Wide band so the droop never saturates.
    cb.ders_1ph.push_back(Der1Phase{ph, p / n, VoltVarCurve{droop, setpoint, 0.0, 10.0}});
  }
  return model;
}

}  // namespace vsens
