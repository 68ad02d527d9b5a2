#pragma once

#include "rfr/framework.hpp"
#include "rfr/model.hpp"

namespace rfr {

/// Ground robot: unicycle trajectory loop over two DC-motor wheel loops.
struct RobotParams {
  double R_w = 0.05;   // wheel radius, m
  double L_w = 0.5;    // wheel separation, m
  double l = 0.2;      // dynamic-inversion offset, m
  double k1_gain = 1.0;
  double k2_gain = 1.0;
  // DC motor
  double motor_R = 1.0;  // ohm
  double motor_L = 0.5;  // H
  double K_tor = 0.01;
  double K_emf = 0.01;
  double K_fric = 0.01;
  double J = 0.01;
  // wheel-speed PID
  double Kp = 13.2;
  double Kd = 0.275;
  double Ki = 1.525;
  double integral_limit = 500.0;  // clamp on Ki * integral, volts

  /// ContractError unless R_w, L_w, l, L, J > 0.
  void validate() const;
};

/// Unicycle pose [x, y, theta] driven by [v, omega], explicit Euler, y = x.
SubsystemModel make_bicycle_model(std::string id, Micros dt);

/// DC motor state [i, w] driven by voltage V, explicit Euler, y = w.
SubsystemModel make_motor_model(std::string id, const RobotParams& params, Micros dt);

/// Continuous-time motor matrices.
Matrix motor_A_continuous(const RobotParams& params);
Matrix motor_B_continuous(const RobotParams& params);

/// Circle of radius 2 traced at 1 rad/s. The heading points from the current
/// position estimate toward the reference point; prev_heading is kept when
/// the two coincide.
Reference reference_trajectory(double t, const Vector& position, double prev_heading);

/// [v, omega] = [c s; -s/l c/l] * input with c, s of the estimated heading.
Vector dynamic_inversion(double theta, const Vector& input, const RobotParams& params);

/// Full trajectory law: input = ref_rate + diag(k1, k2) (ref - position).
Vector dynamic_inversion_control(const Vector& x_hat, const Reference& ref,
                                 const RobotParams& params);

/// [v, omega] -> [w_left, w_right].
Vector wheel_transform(const Vector& u_outer, const RobotParams& params);
/// [w_left, w_right] -> [v, omega].
Vector wheel_inverse(const Vector& wheels, const RobotParams& params);

struct PidState {
  double integral = 0.0;
  double e_prev = 0.0;
};

/// Kp e + Ki sum(e dt) + Kd (e - e_prev) / dt. Ki * integral is clamped to
/// +-integral_limit.
double pid_control(PidState& state, double error, double dt, const RobotParams& params);

class DynamicInversionController final : public Controller {
 public:
  explicit DynamicInversionController(RobotParams params) : params_(params) {}
  Vector control(const Vector& x_hat, const Reference& ref) override;
  std::unique_ptr<Controller> clone() const override;

 private:
  RobotParams params_;
};

/// Tracks the motor speed (state index 1) against ref.value(0).
class PidController final : public Controller {
 public:
  PidController(RobotParams params, Micros dt) : params_(params), dt_(to_seconds(dt)) {}
  Vector control(const Vector& x_hat, const Reference& ref) override;
  std::unique_ptr<Controller> clone() const override;
  const PidState& state() const { return state_; }

 private:
  RobotParams params_;
  double dt_;
  PidState state_;
};

}  // namespace rfr
