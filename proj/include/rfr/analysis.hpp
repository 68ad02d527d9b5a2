#pragma once

#include <vector>

#include "rfr/model.hpp"

namespace rfr {

/// Bounds that parameterize the recovered-error analysis of one subsystem.
/// All vectors have length n_x and are element-wise non-negative.
struct BoundParams {
  Matrix A_bar;       // element-wise bound on the dynamics Jacobian
  Vector eps_delta;   // estimator error bound (at the checkpoint)
  Vector eps_omega;   // process-noise bound per step
  Vector phi_bar;     // accumulated Taylor remainder bound (zero for LTI)
  Vector e_max;       // maximum permissible recovered error
  Micros delta{0};    // minimum time between anomalies
  double mu_hz = 1.0;       // checkpointing frequency in effect
  double mu_star_hz = 1.0;  // accuracy-optimal checkpointing frequency
  Micros tick{0};           // loop period of the subsystem
  std::vector<int> q_indices;  // recovered elements, 0-based

  int n_x() const { return static_cast<int>(eps_delta.size()); }
  /// ContractError on shape or sign violations.
  void validate() const;
};

/// Incremental evaluation of the recovered-error bound after n predict
/// steps from a checkpoint:
///   |A|^n eps_delta + sum_{m=1..n} |A|^m eps_omega + phi_bar
/// Powers are taken of |A_bar| (absolute value first).
class RseeBoundSeries {
 public:
  explicit RseeBoundSeries(const BoundParams& params, bool include_phi = true);

  void advance();
  std::int64_t steps() const { return steps_; }
  Vector value() const;

 private:
  Matrix abs_a_;
  Vector delta_term_;
  Vector omega_power_;
  Vector omega_sum_;
  Vector phi_;
  std::int64_t steps_ = 0;
};

/// Full-length bound after `steps` predictions.
Vector bound_after_steps(const BoundParams& params, std::int64_t steps, bool include_phi = true);

/// B(k, k1) in ticks, restricted to q_indices. Bounds the recovered error at
/// tick k + 1. ContractError if k < k1.
Vector rsee_bound(const BoundParams& params, std::int64_t k, std::int64_t k1);
/// Same with the nonlinear remainder dropped.
Vector rsee_bound_lti(const BoundParams& params, std::int64_t k, std::int64_t k1);

/// Bound on the recovered error at time t of an episode rolled forward from
/// a checkpoint at k1 (full length; select elements as needed). k1 is floored
/// to the subsystem grid.
Vector rsee_bound_at(const BoundParams& params, Micros t, Micros k1);

/// eps_delta projected on the healthy (non-recovered) elements.
Vector estimation_error_bound(const BoundParams& params, const std::vector<int>& healthy_indices);

/// Latest checkpoint time on the 1/mu grid strictly before anomaly onset s;
/// 0 if none. delta is accepted for interface parity and not used by the
/// grid rule.
Micros checkpoint_time_before_anomaly(Micros s, Micros delta, double mu_hz);

struct TmaxResult {
  Micros t_max{0};
  std::int64_t ticks = 0;
  bool violated_at_zero = false;  // E is exceeded before any tolerable duration
  bool capped = false;            // bound never crossed E within the search cap
};

/// Largest tick-aligned T with the recovered-error bound at s + T within
/// e_max on every element of q_indices. The onset s is rounded up to the
/// subsystem grid; k1 is the checkpoint before s at mu_hz.
TmaxResult max_tolerable_duration(const BoundParams& params, Micros s, Micros search_cap);

/// Difference between the bounds for the checkpoint chosen at mu_hz and at
/// mu_star_hz, at time k of an anomaly that began at s; clamped at zero and
/// restricted to q_indices.
Vector accuracy_resource_gap_bound(const BoundParams& params, Micros k, Micros s);

struct DeltaEstimate {
  Vector delta;
  std::vector<bool> from_config;  // element could not be recovered from y
};

/// Estimator error extracted from a measurement by pseudo-inverting a
/// linear-in-state measurement map. Elements outside the row space of C, or
/// every element when g is nonlinear, fall back to config_eps.
DeltaEstimate delta_from_measurements(const SubsystemModel& model, const Vector& y,
                                      const Vector& x_hat, const Vector& u,
                                      const Vector& config_eps);

}  // namespace rfr
