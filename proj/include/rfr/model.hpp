#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>

#include "rfr/types.hpp"

namespace rfr {

using StateMap = std::function<Vector(const Vector& x, const Vector& u)>;
using JacobianMap = std::function<Matrix(const Vector& x, const Vector& u)>;

/// One feedback loop of the hierarchy: discrete dynamics x' = f(x,u) + w and
/// measurement y = g(x,u) + v, with Jacobians and noise covariances.
struct SubsystemModel {
  std::string id;
  int n_x = 0;
  int n_y = 0;
  int n_u = 0;
  StateMap f;
  StateMap g;
  JacobianMap jac_A;  // df/dx
  JacobianMap jac_C;  // dg/dx
  Matrix Q;
  Matrix R;
  Micros dt{0};
  Vector mu0;
  Matrix sigma0;
  // f is affine in x (its Jacobian does not depend on x); the Taylor remainder
  // of the dynamics is then identically zero.
  bool linear_dynamics = false;
  // g(x,u) = C x + d(u) with constant C; enables measurement-based error
  // extraction.
  bool linear_measurement = false;

  double rate_hz() const { return 1e6 / static_cast<double>(dt.count()); }
};

/// Throws ContractError if dimensions, covariances or dt are invalid.
void validate(const SubsystemModel& model);

/// Builds an explicit-Euler model x' = x + deriv(x,u) * dt from a continuous
/// derivative and its Jacobian.
SubsystemModel make_euler_model(std::string id, int n_x, int n_y, int n_u, StateMap deriv,
                                JacobianMap deriv_jac, StateMap g, JacobianMap jac_C,
                                Micros dt);

/// Discrete LTI model x' = A x + B u, y = C x.
SubsystemModel make_linear_model(std::string id, const Matrix& A, const Matrix& B,
                                 const Matrix& C, Micros dt);

Vector step_dynamics(const SubsystemModel& model, const Vector& x, const Vector& u,
                     const Vector& w);
Vector measure(const SubsystemModel& model, const Vector& x, const Vector& u,
               const Vector& v);

/// Central finite-difference Jacobian, h = 1e-6 * (1 + |x_i|).
Matrix finite_difference_jacobian(const StateMap& fn, const Vector& x, const Vector& u);

/// Deterministic Gaussian source. The normal draw is a Marsaglia polar
/// transform over mt19937_64 so the stream is identical across standard
/// library implementations.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}

  double standard_normal();
  double uniform01();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Zero-mean draw with covariance cov. Cholesky when cov is positive
/// definite, eigen-decomposition otherwise; NumericalError if cov is not PSD.
Vector sample_noise(const Matrix& cov, NoiseStream& rng);

/// Seed for one (stream owner, stream kind) pair under a master seed. Streams
/// are keyed by name so adding a subsystem never shifts another's noise.
std::uint64_t derive_stream_seed(std::uint64_t master, std::string_view owner,
                                 std::string_view kind);

/// Integer tick counter on the base grid; t is tick * resolution exactly.
class SimClock {
 public:
  explicit SimClock(Micros resolution);

  void advance() { ++tick_; }
  std::int64_t tick() const { return tick_; }
  Micros resolution() const { return resolution_; }
  Micros now() const { return resolution_ * tick_; }
  double seconds() const { return to_seconds(now()); }

 private:
  Micros resolution_;
  std::int64_t tick_ = 0;
};

/// gcd of the given loop periods.
Micros base_resolution(std::span<const Micros> periods);

}  // namespace rfr
