#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace quartic {

using cplx = std::complex<double>;
using Point = Eigen::Vector3d;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

/// Limiting branch of a resolvent on the spectrum: R(z ± i0).
enum class Branch { plus, minus };

inline const char* to_string(Branch b) { return b == Branch::plus ? "+" : "-"; }

/// Japanese bracket <x> = sqrt(1 + |x|^2).
inline double bracket(const Point& x) { return std::sqrt(1.0 + x.squaredNorm()); }

// Error taxonomy. Every failure in the library is one of these.

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A kernel was evaluated exactly on its diagonal where it is singular.
class DiagonalSingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pipeline stage produced a result that invalidates what follows (e.g. an
/// embedded-eigenvalue candidate on the integration range).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A linear solve failed its residual check. Carries the wavenumber when known.
class NearSingularError : public std::runtime_error {
 public:
  NearSingularError(const std::string& what, double lambda)
      : std::runtime_error(what), lambda_(lambda) {}
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

}  // namespace quartic
