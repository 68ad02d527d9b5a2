#include "rfr/analysis.hpp"

#include <algorithm>

namespace rfr {

namespace {

constexpr double kCompareRelTol = 1e-12;

bool within(double value, double limit) {
  return value <= limit + kCompareRelTol * std::max(1.0, std::abs(limit));
}

Vector restrict_to(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

Micros floor_to(Micros t, Micros grid) { return grid * (t / grid); }

Micros ceil_to(Micros t, Micros grid) {
  const Micros f = floor_to(t, grid);
  return f == t ? t : f + grid;
}

Micros period_of(double hz) {
  require(hz > 0.0, "checkpointing frequency must be positive");
  return from_seconds(1.0 / hz);
}

}  // namespace

void BoundParams::validate() const {
  const Eigen::Index n = eps_delta.size();
  require(n > 0, "bound params: empty state");
  require(A_bar.rows() == n && A_bar.cols() == n, "bound params: A_bar must be n_x x n_x");
  require(eps_omega.size() == n && phi_bar.size() == n, "bound params: vector length mismatch");
  require(e_max.size() == 0 || e_max.size() == n, "bound params: e_max length mismatch");
  require((eps_delta.array() >= 0).all() && (eps_omega.array() >= 0).all() &&
              (phi_bar.array() >= 0).all(),
          "bound params: bound vectors must be non-negative");
  require(tick.count() > 0, "bound params: tick must be positive");
  for (int q : q_indices) require(q >= 0 && q < n, "bound params: q index out of range");
}

RseeBoundSeries::RseeBoundSeries(const BoundParams& params, bool include_phi)
    : abs_a_(params.A_bar.cwiseAbs()),
      delta_term_(params.eps_delta),
      omega_power_(params.eps_omega),
      omega_sum_(Vector::Zero(params.eps_omega.size())),
      phi_(include_phi ? params.phi_bar : Vector::Zero(params.phi_bar.size())) {}

void RseeBoundSeries::advance() {
  delta_term_ = abs_a_ * delta_term_;
  omega_power_ = abs_a_ * omega_power_;
  omega_sum_ += omega_power_;
  ++steps_;
}

Vector RseeBoundSeries::value() const { return delta_term_ + omega_sum_ + phi_; }

Vector bound_after_steps(const BoundParams& params, std::int64_t steps, bool include_phi) {
  require(steps >= 0, "bound: negative step count");
  RseeBoundSeries series(params, include_phi);
  for (std::int64_t i = 0; i < steps; ++i) series.advance();
  return series.value();
}

Vector rsee_bound(const BoundParams& params, std::int64_t k, std::int64_t k1) {
  require(k >= k1, "rsee_bound: k must not precede k1");
  return restrict_to(bound_after_steps(params, k - k1 + 1), params.q_indices);
}

Vector rsee_bound_lti(const BoundParams& params, std::int64_t k, std::int64_t k1) {
  require(k >= k1, "rsee_bound: k must not precede k1");
  return restrict_to(bound_after_steps(params, k - k1 + 1, false), params.q_indices);
}

Vector rsee_bound_at(const BoundParams& params, Micros t, Micros k1) {
  const Micros start = floor_to(k1, params.tick);
  require(t >= start, "rsee_bound_at: t must not precede the checkpoint");
  return bound_after_steps(params, (t - start) / params.tick);
}

Vector estimation_error_bound(const BoundParams& params, const std::vector<int>& healthy_indices) {
  for (int i : healthy_indices) require(i >= 0 && i < params.n_x(), "healthy index out of range");
  return restrict_to(params.eps_delta, healthy_indices);
}

Micros checkpoint_time_before_anomaly(Micros s, Micros /*delta*/, double mu_hz) {
  const Micros period = period_of(mu_hz);
  if (s.count() <= 0) return Micros{0};
  return period * ((s - Micros{1}) / period);
}

TmaxResult max_tolerable_duration(const BoundParams& params, Micros s, Micros search_cap) {
  params.validate();
  require(params.e_max.size() == params.n_x(), "max_tolerable_duration: e_max not set");
  require(!params.q_indices.empty(), "max_tolerable_duration: q_indices empty");

  const Micros onset = ceil_to(s, params.tick);
  const Micros k1 = floor_to(checkpoint_time_before_anomaly(s, params.delta, params.mu_hz), params.tick);
  const std::int64_t lead = (onset - k1) / params.tick;
  const std::int64_t cap_ticks = search_cap / params.tick;

  RseeBoundSeries series(params);
  for (std::int64_t i = 0; i < lead; ++i) series.advance();

  auto fits = [&](const Vector& b) {
    return std::all_of(params.q_indices.begin(), params.q_indices.end(),
                       [&](int q) { return within(b(q), params.e_max(q)); });
  };

  TmaxResult out;
  if (!fits(series.value())) {
    out.violated_at_zero = true;
    return out;
  }
  std::int64_t n = 0;
  while (true) {
    if (n >= cap_ticks) {
      out.capped = true;
      break;
    }
    series.advance();
    if (!fits(series.value())) break;
    ++n;
  }
  out.ticks = n;
  out.t_max = params.tick * n;
  return out;
}

Vector accuracy_resource_gap_bound(const BoundParams& params, Micros k, Micros s) {
  const Micros k1 = checkpoint_time_before_anomaly(s, params.delta, params.mu_hz);
  const Micros k1_star = checkpoint_time_before_anomaly(s, params.delta, params.mu_star_hz);
  const Vector gap = rsee_bound_at(params, k, k1) - rsee_bound_at(params, k, k1_star);
  return restrict_to(gap.cwiseMax(0.0), params.q_indices);
}

DeltaEstimate delta_from_measurements(const SubsystemModel& model, const Vector& y,
                                      const Vector& x_hat, const Vector& u,
                                      const Vector& config_eps) {
  require(config_eps.size() == model.n_x, "delta_from_measurements: config_eps length mismatch");
  DeltaEstimate out;
  out.delta = config_eps;
  out.from_config.assign(static_cast<std::size_t>(model.n_x), true);
  if (!model.linear_measurement) return out;

  const Matrix C = model.jac_C(x_hat, u);
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(C);
  const Matrix pinv = cod.pseudoInverse();
  const Vector full = pinv * (y - model.g(x_hat, u));
  const Matrix proj = pinv * C;  // projector onto the row space of C
  for (int i = 0; i < model.n_x; ++i) {
    Vector e = Vector::Zero(model.n_x);
    e(i) = 1.0;
    if ((proj * e - e).cwiseAbs().maxCoeff() < 1e-9) {
      out.delta(i) = full(i);
      out.from_config[static_cast<std::size_t>(i)] = false;
    }
  }
  return out;
}

}  // namespace rfr
