#pragma once

#include <Eigen/Dense>

#include <complex>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vsens {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr Complex kJ{0.0, 1.0};

enum class Phase : std::uint8_t { a = 0, b = 1, c = 2 };

inline constexpr char phase_char(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }
inline constexpr int phase_slot(Phase p) { return static_cast<int>(p); }

/// Parses "a", "b" or "c" (case-insensitive). Throws InputError otherwise.
Phase parse_phase(std::string_view s);

/// A (bus, phase) pair. Rendered as "bus.a".
struct NodeId {
  std::string bus;
  Phase phase = Phase::a;

  std::string str() const { return bus + '.' + phase_char(phase); }
  auto operator<=>(const NodeId&) const = default;
};

/// Parses "bus.a". Throws InputError on malformed text.
NodeId parse_node_id(std::string_view text);

/// Bad input data: malformed feeder, unknown reference, out-of-range parameter.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical failure: non-convergence, singular system, collapsed delta voltages.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularTransformError : public NumericalError {
 public:
  SingularTransformError(std::string bus, const std::string& what)
      : NumericalError(what), bus_(std::move(bus)) {}
  const std::string& bus() const { return bus_; }

 private:
  std::string bus_;
};

}  // namespace vsens
