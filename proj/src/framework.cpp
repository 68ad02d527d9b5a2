#include "rfr/framework.hpp"

#include <algorithm>
#include <set>

namespace rfr {

namespace {
constexpr double kNonzeroGain = 1e-12;
}

Coordinator::Coordinator(Micros checkpoint_period, std::vector<std::string> subsystem_ids,
                         std::vector<Micros> detection_times)
    : period_(checkpoint_period),
      ids_(std::move(subsystem_ids)),
      detection_times_(std::move(detection_times)) {
  require(period_.count() > 0, "checkpoint period must be positive");
  require(ids_.size() == detection_times_.size(), "one detection time per subsystem");
}

std::map<std::string, bool> Coordinator::tick(Micros t) const {
  const bool due = checkpoint_due(t);
  std::map<std::string, bool> out;
  for (const std::string& id : ids_) out[id] = due;
  return out;
}

Micros Coordinator::max_detection_time() const {
  Micros m{0};
  for (Micros d : detection_times_) m = std::max(m, d);
  return m;
}

Micros Coordinator::most_recent_consistent_checkpoint(const SecureStore& store, Micros k) const {
  std::vector<std::vector<Micros>> times;
  times.reserve(ids_.size());
  for (const std::string& id : ids_) times.push_back(store.save_times(id));
  return rfr::most_recent_consistent_checkpoint(times, detection_times_, k);
}

Micros most_recent_consistent_checkpoint(std::span<const std::vector<Micros>> save_times,
                                         std::span<const Micros> detection_times, Micros k) {
  if (save_times.empty()) throw UnrecoverableError("no subsystems registered");
  Micros max_detect{0};
  for (Micros d : detection_times) max_detect = std::max(max_detect, d);

  // Walk the first subsystem's times newest-first and test membership in the
  // others (all lists are sorted ascending).
  const std::vector<Micros>& first = save_times.front();
  for (auto it = first.rbegin(); it != first.rend(); ++it) {
    const Micros t = *it;
    if (k - t <= max_detect) continue;
    const bool common = std::all_of(save_times.begin() + 1, save_times.end(),
                                    [t](const std::vector<Micros>& ts) {
                                      return std::binary_search(ts.begin(), ts.end(), t);
                                    });
    if (common) return t;
  }
  throw UnrecoverableError("no consistent checkpoint outside the detection window");
}

const char* to_string(ConsistencyVerdict v) {
  switch (v) {
    case ConsistencyVerdict::consistent: return "consistent";
    case ConsistencyVerdict::partly_inconsistent: return "partly-inconsistent";
    case ConsistencyVerdict::fully_inconsistent: return "fully-inconsistent";
  }
  return "?";
}

ConsistencyVerdict classify_checkpoint_set(std::span<const SubsystemSnapshot> snapshots) {
  require(!snapshots.empty(), "classify_checkpoint_set: empty snapshot set");
  std::set<Micros> all;
  for (const SubsystemSnapshot& s : snapshots) {
    require(!s.element_times.empty(), "classify_checkpoint_set: subsystem without elements");
    const std::set<Micros> own(s.element_times.begin(), s.element_times.end());
    if (own.size() > 1) return ConsistencyVerdict::fully_inconsistent;
    all.insert(own.begin(), own.end());
  }
  return all.size() == 1 ? ConsistencyVerdict::consistent
                         : ConsistencyVerdict::partly_inconsistent;
}

bool safe_stop_check(Micros episode_start, Micros k, Micros t_max) {
  return k - episode_start > t_max;
}

std::vector<int> recovery_mask(const Matrix& K, const AdsOutput& ads, int n_x) {
  std::vector<int> mask(static_cast<std::size_t>(n_x), 0);
  if (ads.kind == AdsKind::generic) {
    if (anomaly_detected(ads)) std::fill(mask.begin(), mask.end(), 1);
    return mask;
  }
  require(K.rows() == n_x && K.cols() == static_cast<Eigen::Index>(ads.flags.size()),
          "recovery_mask: gain and flag dimensions disagree");
  Vector flags(K.cols());
  for (Eigen::Index j = 0; j < K.cols(); ++j) flags(j) = ads.flags[static_cast<std::size_t>(j)];
  const Vector dependence = K.cwiseAbs() * flags;
  for (int i = 0; i < n_x; ++i) mask[static_cast<std::size_t>(i)] = dependence(i) > kNonzeroGain;
  return mask;
}

Vector roll_forward(const Estimator& estimator, const Vector& x_start,
                    std::span<const ControlRecord> controls) {
  Vector x = x_start;
  for (const ControlRecord& c : controls) x = estimator.propagate(x, c.u);
  return x;
}

SubsystemRuntime::SubsystemRuntime(std::shared_ptr<const Estimator> est_impl,
                                   std::unique_ptr<Controller> ctrl, AdsConfig ads_config,
                                   AnomalySchedule anomaly_schedule, Micros max_duration)
    : estimator(std::move(est_impl)),
      controller(std::move(ctrl)),
      ads(std::move(ads_config)),
      schedule(std::move(anomaly_schedule)),
      t_max(max_duration) {
  require(estimator != nullptr, "runtime needs an estimator");
  require(controller != nullptr, "runtime needs a controller");
  est = EstimatorState::initial(estimator->model());
  u_prev = Vector::Zero(estimator->model().n_u);
}

RecoveryResult roll_forward_recover(SubsystemRuntime& rt, const SecureStore& store,
                                    const Coordinator& coord, const Vector& x_hat,
                                    const Matrix& K, const AdsOutput& ads, Micros k) {
  const SubsystemModel& model = rt.model();
  RecoveryResult r;
  if (!rt.detected_prev || !rt.rf_prev) {
    const Micros k1 = coord.most_recent_consistent_checkpoint(store, k);
    const RetrievedRange range = store.retrieve(rt.id(), k1, k);
    if (range.checkpoints.empty() || range.checkpoints.front().t != k1) {
      throw UnrecoverableError(rt.id() + ": checkpoint at consistent time missing");
    }
    const std::int64_t steps = (k - k1) / model.dt;
    if (static_cast<std::int64_t>(range.controls.size()) != steps) {
      throw UnrecoverableError(rt.id() + ": control log has gaps between checkpoint and now");
    }
    for (std::size_t i = 0; i < range.controls.size(); ++i) {
      if (range.controls[i].t != k1 + model.dt * static_cast<std::int64_t>(i)) {
        throw UnrecoverableError(rt.id() + ": control log has gaps between checkpoint and now");
      }
    }
    r.x_rf = roll_forward(*rt.estimator, range.checkpoints.front().x_hat, range.controls);
    r.k1 = k1;
    r.from_checkpoint = true;
    rt.episode_k1 = k1;
  } else {
    r.x_rf = rt.estimator->propagate(*rt.rf_prev, rt.u_prev);
    r.k1 = rt.episode_k1.value_or(Micros{0});
  }

  r.mask = recovery_mask(K, ads, model.n_x);
  r.x_hat = x_hat;
  for (int i = 0; i < model.n_x; ++i) {
    if (r.mask[static_cast<std::size_t>(i)] != 0) r.x_hat(i) = r.x_rf(i);
  }
  rt.rf_prev = r.x_rf;
  return r;
}

const char* to_string(SafeStopReason r) {
  switch (r) {
    case SafeStopReason::none: return "none";
    case SafeStopReason::anomaly_duration_exceeded: return "anomaly_duration_exceeded";
    case SafeStopReason::unrecoverable: return "unrecoverable";
  }
  return "?";
}

TickOutcome subsystem_tick(SubsystemRuntime& rt, SecureStore& store, const Coordinator& coord,
                           bool c_k, const Vector& y_meas, const Reference& ref, Micros k) {
  const SubsystemModel& model = rt.model();
  require(y_meas.size() == model.n_y, model.id + ": measurement dimension mismatch");
  TickOutcome out;

  if (rt.started) {
    EstimatorStepResult step = rt.estimator->step(rt.est, rt.u_prev, y_meas);
    rt.est = std::move(step.state);
    out.K = std::move(step.K);
    out.innovation = std::move(step.innovation);

    rt.ads_window.push_back({k, y_meas, out.innovation});
    const std::int64_t window_len =
        std::max<std::int64_t>(1, rt.ads.detection_time / model.dt);
    while (static_cast<std::int64_t>(rt.ads_window.size()) > window_len) rt.ads_window.pop_front();
  } else {
    out.K = Matrix::Zero(model.n_x, model.n_y);
    out.innovation = Vector::Zero(model.n_y);
  }

  const std::vector<AdsSample> window(rt.ads_window.begin(), rt.ads_window.end());
  out.ads = ads_evaluate(rt.ads, window, rt.schedule, k, model.n_y);
  out.detected = anomaly_detected(out.ads);

  if (out.detected) {
    if (!rt.episode_start) rt.episode_start = k;
    try {
      RecoveryResult rec = roll_forward_recover(rt, store, coord, rt.est.x_hat, out.K, out.ads, k);
      rt.est.x_hat = rec.x_hat;
      out.recovery = std::move(rec);
    } catch (const UnrecoverableError& e) {
      out.safe_stop = SafeStopReason::unrecoverable;
      out.safe_stop_detail = e.what();
    } catch (const IntegrityError& e) {
      out.safe_stop = SafeStopReason::unrecoverable;
      out.safe_stop_detail = e.what();
    }
  } else {
    rt.rf_prev.reset();
    rt.episode_start.reset();
    rt.episode_k1.reset();
  }

  out.x_hat = rt.est.x_hat;
  out.P = rt.est.P;
  if (out.safe_stop != SafeStopReason::none) {
    out.u = Vector::Zero(model.n_u);
    return out;
  }

  out.u = rt.controller->control(rt.est.x_hat, ref);
  store.append_control(model.id, {k, out.u});

  if (!out.detected && c_k) {
    store.append_checkpoint(model.id, {k, rt.est.x_hat, out.ads.flags});
    out.checkpoint_saved = true;
  }

  if (out.detected && safe_stop_check(*rt.episode_start, k, rt.t_max)) {
    out.safe_stop = SafeStopReason::anomaly_duration_exceeded;
    out.safe_stop_detail = model.id + ": anomaly episode exceeded the maximum tolerable duration";
  }

  rt.detected_prev = out.detected;
  rt.u_prev = out.u;
  rt.started = true;
  return out;
}

}  // namespace rfr
