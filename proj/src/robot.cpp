#include "rfr/robot.hpp"

#include <algorithm>
#include <cmath>

namespace rfr {

void RobotParams::validate() const {
  require(R_w > 0 && L_w > 0, "robot: wheel radius and separation must be positive");
  require(l > 0, "robot: dynamic-inversion offset l must be positive");
  require(motor_L > 0 && J > 0, "robot: motor inductance and inertia must be positive");
}

SubsystemModel make_bicycle_model(std::string id, Micros dt) {
  auto deriv = [](const Vector& x, const Vector& u) {
    Vector d(3);
    d << u(0) * std::cos(x(2)), u(0) * std::sin(x(2)), u(1);
    return d;
  };
  auto deriv_jac = [](const Vector& x, const Vector& u) {
    Matrix J = Matrix::Zero(3, 3);
    J(0, 2) = -u(0) * std::sin(x(2));
    J(1, 2) = u(0) * std::cos(x(2));
    return J;
  };
  auto g = [](const Vector& x, const Vector&) { return Vector(x); };
  auto jac_C = [](const Vector&, const Vector&) { return Matrix(Matrix::Identity(3, 3)); };
  SubsystemModel m = make_euler_model(std::move(id), 3, 3, 2, deriv, deriv_jac, g, jac_C, dt);
  m.linear_measurement = true;
  return m;
}

Matrix motor_A_continuous(const RobotParams& p) {
  Matrix A(2, 2);
  A << -p.motor_R / p.motor_L, -p.K_emf / p.motor_L,
       p.K_tor / p.J, -p.K_fric / p.J;
  return A;
}

Matrix motor_B_continuous(const RobotParams& p) {
  Matrix B(2, 1);
  B << 1.0 / p.motor_L, 0.0;
  return B;
}

SubsystemModel make_motor_model(std::string id, const RobotParams& params, Micros dt) {
  params.validate();
  const double h = to_seconds(dt);
  const Matrix A = Matrix::Identity(2, 2) + motor_A_continuous(params) * h;
  const Matrix B = motor_B_continuous(params) * h;
  Matrix C(1, 2);
  C << 0.0, 1.0;
  return make_linear_model(std::move(id), A, B, C, dt);
}

Reference reference_trajectory(double t, const Vector& position, double prev_heading) {
  require(t >= 0.0, "reference_trajectory: t must be non-negative");
  require(position.size() >= 2, "reference_trajectory: position needs x and y");
  const double xr = 2.0 * std::cos(t);
  const double yr = 2.0 * std::sin(t);
  const double dx = xr - position(0);
  const double dy = yr - position(1);
  const double heading = (dx == 0.0 && dy == 0.0) ? prev_heading : std::atan2(dy, dx);
  Reference ref;
  ref.value = Vector(3);
  ref.value << xr, yr, heading;
  ref.rate = Vector(3);
  ref.rate << -2.0 * std::sin(t), 2.0 * std::cos(t), 0.0;
  return ref;
}

Vector dynamic_inversion(double theta, const Vector& input, const RobotParams& params) {
  require(params.l > 0, "dynamic_inversion: l must be positive");
  require(input.size() == 2, "dynamic_inversion: input must have two entries");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Vector u(2);
  u << c * input(0) + s * input(1), (-s * input(0) + c * input(1)) / params.l;
  return u;
}

Vector dynamic_inversion_control(const Vector& x_hat, const Reference& ref,
                                 const RobotParams& params) {
  require(x_hat.size() == 3 && ref.value.size() >= 2 && ref.rate.size() >= 2,
          "dynamic_inversion_control: dimension mismatch");
  Vector input(2);
  input << ref.rate(0) + params.k1_gain * (ref.value(0) - x_hat(0)),
           ref.rate(1) + params.k2_gain * (ref.value(1) - x_hat(1));
  return dynamic_inversion(x_hat(2), input, params);
}

Vector wheel_transform(const Vector& u_outer, const RobotParams& p) {
  require(u_outer.size() == 2, "wheel_transform: expected [v, omega]");
  const double v = u_outer(0);
  const double w = u_outer(1);
  Vector out(2);
  out << (2.0 * v - w * p.L_w) / (2.0 * p.R_w), (2.0 * v + w * p.L_w) / (2.0 * p.R_w);
  return out;
}

Vector wheel_inverse(const Vector& wheels, const RobotParams& p) {
  require(wheels.size() == 2, "wheel_inverse: expected [w_left, w_right]");
  Vector out(2);
  out << p.R_w * (wheels(0) + wheels(1)) / 2.0, p.R_w * (wheels(1) - wheels(0)) / p.L_w;
  return out;
}

double pid_control(PidState& state, double error, double dt, const RobotParams& p) {
  require(dt > 0.0, "pid_control: dt must be positive");
  state.integral += error * dt;
  if (p.Ki > 0.0) {
    const double cap = p.integral_limit / p.Ki;
    state.integral = std::clamp(state.integral, -cap, cap);
  }
  const double out = p.Kp * error + p.Ki * state.integral + p.Kd * (error - state.e_prev) / dt;
  state.e_prev = error;
  return out;
}

Vector DynamicInversionController::control(const Vector& x_hat, const Reference& ref) {
  return dynamic_inversion_control(x_hat, ref, params_);
}

std::unique_ptr<Controller> DynamicInversionController::clone() const {
  return std::make_unique<DynamicInversionController>(*this);
}

Vector PidController::control(const Vector& x_hat, const Reference& ref) {
  require(x_hat.size() == 2 && ref.value.size() >= 1, "PidController: dimension mismatch");
  Vector u(1);
  u << pid_control(state_, ref.value(0) - x_hat(1), dt_, params_);
  return u;
}

std::unique_ptr<Controller> PidController::clone() const {
  return std::make_unique<PidController>(*this);
}

}  // namespace rfr
