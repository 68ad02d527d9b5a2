#include "rfr/estimator.hpp"

namespace rfr {

namespace {
constexpr double kInnovationRegularization = 1e-12;

void check_state(const SubsystemModel& model, const EstimatorState& est) {
  require(est.x_hat.size() == model.n_x, model.id + ": estimate dimension mismatch");
  require(est.P.rows() == model.n_x && est.P.cols() == model.n_x,
          model.id + ": covariance dimension mismatch");
}
}  // namespace

Prediction ekf_predict(const SubsystemModel& model, const EstimatorState& est, const Vector& u) {
  check_state(model, est);
  require(u.size() == model.n_u, model.id + ": input dimension mismatch");
  const Matrix A = model.jac_A(est.x_hat, u);
  return {model.f(est.x_hat, u), A * est.P * A.transpose() + model.Q};
}

Matrix ekf_gain(const SubsystemModel& model, const Matrix& P_pred, const Vector& x_pred,
                const Vector& u) {
  require(P_pred.rows() == model.n_x && P_pred.cols() == model.n_x,
          model.id + ": covariance dimension mismatch");
  const Matrix C = model.jac_C(x_pred, u);
  Matrix S = C * P_pred * C.transpose() + model.R;
  S.diagonal().array() += kInnovationRegularization;
  Eigen::LDLT<Matrix> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().cwiseAbs().minCoeff() <= 0.0) {
    throw NumericalError(model.id + ": innovation covariance is singular");
  }
  // K = P C^T S^-1  <=>  K^T = S^-1 C P^T
  return ldlt.solve(C * P_pred.transpose()).transpose();
}

EstimatorState ekf_update(const SubsystemModel& model, const Vector& x_pred,
                          const Matrix& P_pred, const Matrix& K, const Vector& y_meas,
                          const Vector& u) {
  require(x_pred.size() == model.n_x, model.id + ": prediction dimension mismatch");
  require(K.rows() == model.n_x && K.cols() == model.n_y, model.id + ": gain dimension mismatch");
  require(y_meas.size() == model.n_y, model.id + ": measurement dimension mismatch");
  const Matrix C = model.jac_C(x_pred, u);
  EstimatorState out;
  out.x_hat = x_pred + K * (y_meas - model.g(x_pred, u));
  Matrix P = (Matrix::Identity(model.n_x, model.n_x) - K * C) * P_pred;
  out.P = 0.5 * (P + P.transpose());
  return out;
}

EstimatorStepResult estimator_step(const SubsystemModel& model, const EstimatorState& est,
                                   const Vector& u_prev, const Vector& y_now) {
  const Prediction pred = ekf_predict(model, est, u_prev);
  const Matrix K = ekf_gain(model, pred.P_pred, pred.x_pred, u_prev);
  EstimatorStepResult r;
  r.innovation = y_now - model.g(pred.x_pred, u_prev);
  r.state = ekf_update(model, pred.x_pred, pred.P_pred, K, y_now, u_prev);
  r.K = K;
  r.x_pred = pred.x_pred;
  return r;
}

}  // namespace rfr
