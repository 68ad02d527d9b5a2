#include "rfr/anomaly.hpp"

#include <algorithm>

namespace rfr {

AnomalySchedule::AnomalySchedule(std::vector<AnomalyWindow> windows, int n_y)
    : windows_(std::move(windows)) {
  std::sort(windows_.begin(), windows_.end(),
            [](const AnomalyWindow& a, const AnomalyWindow& b) { return a.t_start < b.t_start; });
  for (std::size_t i = 0; i < windows_.size(); ++i) {
    const AnomalyWindow& w = windows_[i];
    require(w.t_start < w.t_end, "anomaly window must have t_start < t_end");
    require(w.y_a.size() == n_y, "anomaly vector length must equal n_y");
    require(static_cast<int>(w.gamma.size()) == n_y, "gamma length must equal n_y");
    for (int g : w.gamma) require(g == 0 || g == 1, "gamma entries must be 0 or 1");
    if (i > 0) require(windows_[i - 1].t_end <= w.t_start, "anomaly windows overlap");
  }
}

const AnomalyWindow* AnomalySchedule::active(Micros t) const {
  for (const AnomalyWindow& w : windows_) {
    if (w.contains(t)) return &w;
  }
  return nullptr;
}

Vector inject_anomaly(const Vector& y_healthy, const AnomalySchedule& schedule, Micros t) {
  const AnomalyWindow* w = schedule.active(t);
  if (w == nullptr) return y_healthy;
  Vector y = y_healthy;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (w->gamma[static_cast<std::size_t>(i)] == 1) y(i) += w->y_a(i);
  }
  return y;
}

AdsOutput ads_evaluate(const AdsConfig& config, std::span<const AdsSample> window,
                       const AnomalySchedule& schedule, Micros t, int n_y) {
  std::vector<int> flags(static_cast<std::size_t>(n_y), 0);

  if (!window.empty()) {
    if (config.mode == AdsMode::oracle) {
      for (const AnomalyWindow& w : schedule.windows()) {
        const Micros raised = w.t_start + config.detection_time;
        if (t >= raised && t < w.t_end) {
          flags = w.gamma;
          break;
        }
      }
    } else {
      Vector mean_abs = Vector::Zero(n_y);
      for (const AdsSample& s : window) mean_abs += s.innovation.cwiseAbs();
      mean_abs /= static_cast<double>(window.size());
      for (int i = 0; i < n_y; ++i) flags[static_cast<std::size_t>(i)] = mean_abs(i) > config.threshold;
    }
  }

  AdsOutput out;
  out.kind = config.kind;
  out.detection_time = config.detection_time;
  if (config.kind == AdsKind::generic) {
    out.flags = {std::any_of(flags.begin(), flags.end(), [](int f) { return f != 0; }) ? 1 : 0};
  } else {
    out.flags = std::move(flags);
  }
  return out;
}

bool anomaly_detected(const AdsOutput& out) {
  return std::any_of(out.flags.begin(), out.flags.end(), [](int f) { return f != 0; });
}

}  // namespace rfr
