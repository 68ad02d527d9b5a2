#pragma once

#include <memory>

#include "rfr/model.hpp"

namespace rfr {

/// Estimate and its covariance. P is kept symmetric after every update.
struct EstimatorState {
  Vector x_hat;
  Matrix P;

  static EstimatorState initial(const SubsystemModel& model) {
    return {model.mu0, model.sigma0};
  }
};

struct Prediction {
  Vector x_pred;
  Matrix P_pred;
};

struct EstimatorStepResult {
  EstimatorState state;
  Matrix K;
  Vector x_pred;
  Vector innovation;
};

Prediction ekf_predict(const SubsystemModel& model, const EstimatorState& est, const Vector& u);

/// K = P C^T (C P C^T + R)^-1 with C evaluated at (x_pred, u). The innovation
/// covariance is regularized with 1e-12 I before inversion.
Matrix ekf_gain(const SubsystemModel& model, const Matrix& P_pred, const Vector& x_pred,
                const Vector& u);

EstimatorState ekf_update(const SubsystemModel& model, const Vector& x_pred,
                          const Matrix& P_pred, const Matrix& K, const Vector& y_meas,
                          const Vector& u);

/// predict -> gain -> update.
EstimatorStepResult estimator_step(const SubsystemModel& model, const EstimatorState& est,
                                   const Vector& u_prev, const Vector& y_now);

/// Predict / gain / update abstraction used by the framework loop. Recovery
/// only needs `propagate`, the noise-free state prediction.
class Estimator {
 public:
  virtual ~Estimator() = default;

  virtual EstimatorStepResult step(const EstimatorState& est, const Vector& u_prev,
                                   const Vector& y_now) const = 0;
  virtual Vector propagate(const Vector& x, const Vector& u) const = 0;
  virtual const SubsystemModel& model() const = 0;
};

class ExtendedKalmanFilter final : public Estimator {
 public:
  explicit ExtendedKalmanFilter(SubsystemModel model) : model_(std::move(model)) {}

  EstimatorStepResult step(const EstimatorState& est, const Vector& u_prev,
                           const Vector& y_now) const override {
    return estimator_step(model_, est, u_prev, y_now);
  }
  Vector propagate(const Vector& x, const Vector& u) const override { return model_.f(x, u); }
  const SubsystemModel& model() const override { return model_; }

 private:
  SubsystemModel model_;
};

}  // namespace rfr
