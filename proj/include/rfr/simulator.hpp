#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rfr/framework.hpp"
#include "rfr/scenario.hpp"

namespace rfr {

/// One loop iteration as seen from outside the loop.
struct TickRecord {
  Micros t{0};
  Vector x_true;
  Vector y_meas;   // as delivered, anomaly included
  Vector x_hat;    // framework estimate (recovered elements substituted)
  Vector x_ekf;    // uncorrected EKF fed the same measurements and controls
  std::optional<Vector> x_rf;  // roll-forward estimate, recovery ticks only
  std::vector<int> mask;       // recovered elements, zeros when healthy
  Vector u;
  std::vector<int> ads_flags;
  bool detected = false;
  bool ckpt_event = false;
  std::optional<Micros> k1;
  std::optional<Vector> rsee_bound;  // recovery ticks, when bounds are known
  std::optional<Vector> ee_bound;
  Vector p_diag;
  bool safe_stop = false;
};

struct SubsystemTrace {
  std::string id;
  std::vector<std::string> state_names;
  std::vector<std::string> sensor_names;
  std::vector<std::string> control_names;
  std::optional<BoundParams> bounds;
  std::vector<TickRecord> records;
};

struct SafeStopEvent {
  Micros t{0};
  std::string subsystem;
  SafeStopReason reason = SafeStopReason::none;
  std::string detail;
};

/// One detected-anomaly episode of one loop.
struct RecoveryEpisode {
  std::string subsystem;
  Micros detected_at{0};
  Micros k1{0};
  Micros last_tick{0};
};

struct SimulationTrace {
  std::vector<SubsystemTrace> subsystems;
  std::optional<SafeStopEvent> safe_stop;
  std::vector<RecoveryEpisode> episodes;
  std::shared_ptr<SecureStore> store;
  Micros checkpoint_period{0};
  std::vector<Micros> detection_times;

  const SubsystemTrace& subsystem(const std::string& id) const;
};

struct RunOptions {
  // Skip bound evaluation entirely (no calibration when the config has no
  // bounds). Calibration runs use this.
  bool skip_bounds = false;
  std::string store_key = resolve_store_key();
};

/// Runs the hierarchy on the base tick grid. Within a base tick the
/// coordinator fires first, then the trajectory loop, then the motor loops in
/// order. Loops without configured bounds are calibrated first unless
/// skip_bounds is set. Throws ConfigError when the config is invalid.
SimulationTrace run_scenario(const ScenarioConfig& cfg, const RunOptions& options = {});

/// Calibrated bound inputs for every loop (outer first) from the configured
/// calibration seeds.
std::vector<BoundSpec> calibrate_bound_params(const ScenarioConfig& cfg);

/// Config with calibrated bounds filled in wherever they are missing.
ScenarioConfig with_calibrated_bounds(const ScenarioConfig& cfg);

}  // namespace rfr
