#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rfr/analysis.hpp"
#include "rfr/anomaly.hpp"
#include "rfr/robot.hpp"

namespace rfr {

enum class PlantMode { ideal, coupled };

const char* to_string(PlantMode m);
PlantMode plant_mode_from_string(const std::string& s);

/// Bound inputs that are properties of the loop rather than of the schedule.
struct BoundSpec {
  Matrix A_bar;
  Vector eps_delta;
  Vector eps_omega;
  Vector phi_bar;
};

struct SubsystemConfig {
  std::string id;
  Micros dt{0};
  Matrix Q;
  Matrix R;
  Vector mu0;
  Matrix sigma0;
  Micros t_max{0};  // safe-stop threshold on episode duration
  Vector e_max;     // maximum permissible recovered error
  std::optional<BoundSpec> bounds;
  AdsConfig ads;
  std::vector<AnomalyWindow> anomalies;
};

struct CalibrationConfig {
  std::uint64_t seed = 900001;
  int runs = 20;
};

/// Robot hierarchy: one trajectory loop over two wheel-motor loops.
struct ScenarioConfig {
  Micros horizon{0};
  std::uint64_t seed = 42;
  PlantMode plant_mode = PlantMode::ideal;
  double checkpoint_hz = 1.0;
  RobotParams robot;
  Micros delta{0};       // minimum spacing between anomaly windows
  double k_sigma = 6.0;  // noise quantile used for calibrated bounds
  CalibrationConfig calibration;
  bool prune_controls = false;
  SubsystemConfig outer;
  std::vector<SubsystemConfig> inner;

  std::vector<const SubsystemConfig*> subsystems() const;
  std::vector<SubsystemConfig*> subsystems();
};

/// Ground-robot case study: 10 Hz trajectory loop, two 100 Hz motor loops,
/// checkpoints at 1 Hz, anomalies on [3.25, 5) and [8.25, 10).
ScenarioConfig build_case_study();

/// Every violated invariant, empty when the config is valid.
std::vector<std::string> validation_failures(const ScenarioConfig& cfg);
/// ConfigError listing every failure.
void validate(const ScenarioConfig& cfg);

/// JSON text -> config, merged over build_case_study(). Throws ConfigError on
/// malformed input (all field errors together) or failed validation.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ScenarioConfig& cfg);

/// gcd of all loop periods.
Micros base_tick(const ScenarioConfig& cfg);
Micros checkpoint_period(const ScenarioConfig& cfg);
/// 1 / lcm of all loop periods: checkpoints on every tick common to all loops.
double accuracy_optimal_rate(const ScenarioConfig& cfg);

/// Elements of x that feed a sensor flagged by some anomaly window: the
/// nonzero columns of C restricted to the flagged rows.
std::vector<int> anomalous_state_indices(const SubsystemModel& model,
                                         const SubsystemConfig& sub);

/// Loop model with the configured noise and initial distribution.
SubsystemModel build_model(const ScenarioConfig& cfg, const SubsystemConfig& sub, bool outer);

/// Full BoundParams for one loop from its bound inputs and the scenario rates.
BoundParams make_bound_params(const ScenarioConfig& cfg, const SubsystemConfig& sub,
                              const BoundSpec& inputs, bool outer);

}  // namespace rfr
