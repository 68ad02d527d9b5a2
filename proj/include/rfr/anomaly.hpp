#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rfr/types.hpp"

namespace rfr {

/// Additive sensor anomaly active on [t_start, t_end): y' = y + Gamma * y_a.
struct AnomalyWindow {
  Micros t_start{0};
  Micros t_end{0};
  Vector y_a;
  std::vector<int> gamma;  // diagonal of the 0/1 sensor-selection matrix

  bool contains(Micros t) const { return t >= t_start && t < t_end; }
};

/// Anomaly windows of one subsystem, sorted and non-overlapping.
class AnomalySchedule {
 public:
  AnomalySchedule() = default;
  /// Throws ContractError on overlap, empty windows, non-binary gamma or a
  /// gamma / y_a length different from n_y.
  AnomalySchedule(std::vector<AnomalyWindow> windows, int n_y);

  const std::vector<AnomalyWindow>& windows() const { return windows_; }
  const AnomalyWindow* active(Micros t) const;
  bool empty() const { return windows_.empty(); }

 private:
  std::vector<AnomalyWindow> windows_;
};

enum class AdsKind { specific, generic };
enum class AdsMode { oracle, residual_threshold };

struct AdsConfig {
  AdsKind kind = AdsKind::specific;
  AdsMode mode = AdsMode::oracle;
  Micros detection_time{0};
  double threshold = 0.0;  // residual mode only
  // Minimum healthy-sensor count some detectors require. Stored, not used by
  // the oracle detector.
  std::optional<int> zeta;
};

struct AdsOutput {
  AdsKind kind = AdsKind::specific;
  std::vector<int> flags;  // length n_y for specific, length 1 for generic
  Micros detection_time{0};
};

/// One entry of the detector's measurement window.
struct AdsSample {
  Micros t{0};
  Vector y;
  Vector innovation;
};

Vector inject_anomaly(const Vector& y_healthy, const AnomalySchedule& schedule, Micros t);

/// Oracle mode raises the window's gamma pattern for t in
/// [t_start + detection_time, t_end); windows shorter than the detection time
/// are never flagged. Residual mode flags sensors whose mean absolute
/// innovation over the window exceeds the threshold. An empty window reports
/// all sensors healthy.
AdsOutput ads_evaluate(const AdsConfig& config, std::span<const AdsSample> window,
                       const AnomalySchedule& schedule, Micros t, int n_y);

/// Union of the flags (specific) or the single flag (generic).
bool anomaly_detected(const AdsOutput& out);

}  // namespace rfr
