#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfr/anomaly.hpp"
#include "rfr/checkpoint_store.hpp"
#include "rfr/estimator.hpp"

namespace rfr {

/// Reference handed to a loop controller: the target state and, when the
/// controller needs it, its time derivative.
struct Reference {
  Vector value;
  Vector rate;
};

/// Control law u = h(x_hat, x_ref). Implementations may keep internal state.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual Vector control(const Vector& x_hat, const Reference& ref) = 0;
  virtual std::unique_ptr<Controller> clone() const = 0;
};

/// Issues the synchronized checkpoint booleans and answers most-recent
/// consistent checkpoint queries for the whole hierarchy.
class Coordinator {
 public:
  /// checkpoint_period must be a positive multiple of every loop period.
  Coordinator(Micros checkpoint_period, std::vector<std::string> subsystem_ids,
              std::vector<Micros> detection_times);

  bool checkpoint_due(Micros t) const { return t.count() % period_.count() == 0; }
  /// Same boolean for every subsystem, delivered on the same tick.
  std::map<std::string, bool> tick(Micros t) const;

  Micros period() const { return period_; }
  const std::vector<std::string>& subsystems() const { return ids_; }
  Micros max_detection_time() const;

  /// Most recent save time common to all subsystems with k - t > max detection
  /// time. UnrecoverableError if none exists.
  Micros most_recent_consistent_checkpoint(const SecureStore& store, Micros k) const;

 private:
  Micros period_;
  std::vector<std::string> ids_;
  std::vector<Micros> detection_times_;
};

Micros most_recent_consistent_checkpoint(std::span<const std::vector<Micros>> save_times,
                                         std::span<const Micros> detection_times, Micros k);

enum class ConsistencyVerdict { consistent, partly_inconsistent, fully_inconsistent };

const char* to_string(ConsistencyVerdict v);

/// Per-subsystem timestamps of each saved state element.
struct SubsystemSnapshot {
  std::string id;
  std::vector<Micros> element_times;
};

ConsistencyVerdict classify_checkpoint_set(std::span<const SubsystemSnapshot> snapshots);

/// True iff k - episode_start > t_max.
bool safe_stop_check(Micros episode_start, Micros k, Micros t_max);

/// State elements that depend on flagged sensors: nonzero pattern of |K| * flags
/// (|entry| > 1e-12) for a specific detector, every element for a generic one.
std::vector<int> recovery_mask(const Matrix& K, const AdsOutput& ads, int n_x);

/// Repeated noise-free prediction from x_start through the given controls.
Vector roll_forward(const Estimator& estimator, const Vector& x_start,
                    std::span<const ControlRecord> controls);

/// Everything one loop carries between ticks.
struct SubsystemRuntime {
  SubsystemRuntime(std::shared_ptr<const Estimator> estimator, std::unique_ptr<Controller> controller,
                   AdsConfig ads, AnomalySchedule schedule, Micros t_max);

  const SubsystemModel& model() const { return estimator->model(); }
  const std::string& id() const { return estimator->model().id; }

  std::shared_ptr<const Estimator> estimator;
  std::unique_ptr<Controller> controller;
  AdsConfig ads;
  AnomalySchedule schedule;
  Micros t_max;

  EstimatorState est;
  Vector u_prev;
  bool started = false;
  std::deque<AdsSample> ads_window;
  bool detected_prev = false;
  std::optional<Vector> rf_prev;  // set iff the previous tick was anomalous
  std::optional<Micros> episode_start;
  std::optional<Micros> episode_k1;
};

struct RecoveryResult {
  Vector x_hat;  // merged estimate
  Vector x_rf;   // roll-forward estimate
  std::vector<int> mask;
  Micros k1{0};
  bool from_checkpoint = false;  // true on the first tick of an episode
};

/// Replaces the anomalous elements of x_hat with the roll-forward estimate.
/// On the first detected tick the roll-forward starts from the most recent
/// consistent checkpoint; afterwards it extends the cached value by one step.
RecoveryResult roll_forward_recover(SubsystemRuntime& rt, const SecureStore& store,
                                    const Coordinator& coord, const Vector& x_hat,
                                    const Matrix& K, const AdsOutput& ads, Micros k);

enum class SafeStopReason { none, anomaly_duration_exceeded, unrecoverable };

const char* to_string(SafeStopReason r);

struct TickOutcome {
  Vector u;
  Vector x_hat;
  Matrix K;
  Matrix P;
  Vector innovation;
  AdsOutput ads;
  bool detected = false;
  std::optional<RecoveryResult> recovery;
  bool checkpoint_saved = false;
  SafeStopReason safe_stop = SafeStopReason::none;
  std::string safe_stop_detail;
};

/// One loop iteration: estimate, detect, recover, control, log, checkpoint,
/// safe-stop check. c_k is the coordinator boolean for this tick.
TickOutcome subsystem_tick(SubsystemRuntime& rt, SecureStore& store, const Coordinator& coord,
                           bool c_k, const Vector& y_meas, const Reference& ref, Micros k);

}  // namespace rfr
