#include "rfr/simulator.hpp"

#include <cmath>

namespace rfr {

namespace {

struct Loop {
  const SubsystemConfig* cfg = nullptr;
  bool outer = false;
  std::shared_ptr<const ExtendedKalmanFilter> ekf;
  std::unique_ptr<SubsystemRuntime> rt;
  EstimatorState shadow;
  Vector x_true;
  NoiseStream process{0};
  NoiseStream measurement{0};
  std::optional<BoundParams> bounds;
  SubsystemTrace* trace = nullptr;
};

std::unique_ptr<Controller> make_controller(const ScenarioConfig& cfg, const SubsystemConfig& s,
                                            bool outer) {
  if (outer) return std::make_unique<DynamicInversionController>(cfg.robot);
  return std::make_unique<PidController>(cfg.robot, s.dt);
}

}  // namespace

const SubsystemTrace& SimulationTrace::subsystem(const std::string& id) const {
  for (const SubsystemTrace& s : subsystems) {
    if (s.id == id) return s;
  }
  throw ContractError("no subsystem named " + id + " in trace");
}

SimulationTrace run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  validate(config);
  const ScenarioConfig cfg = options.skip_bounds ? config : with_calibrated_bounds(config);

  SimulationTrace trace;
  trace.store = std::make_shared<SecureStore>(options.store_key);
  trace.checkpoint_period = checkpoint_period(cfg);

  const std::vector<const SubsystemConfig*> subs = cfg.subsystems();
  std::vector<std::string> ids;
  for (const SubsystemConfig* s : subs) {
    ids.push_back(s->id);
    trace.detection_times.push_back(s->ads.detection_time);
  }
  const Coordinator coord(trace.checkpoint_period, ids, trace.detection_times);

  trace.subsystems.resize(subs.size());
  std::vector<Loop> loops(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const SubsystemConfig& s = *subs[i];
    const bool outer = i == 0;
    Loop& L = loops[i];
    L.cfg = &s;
    L.outer = outer;
    L.ekf = std::make_shared<const ExtendedKalmanFilter>(build_model(cfg, s, outer));
    const SubsystemModel& model = L.ekf->model();
    L.rt = std::make_unique<SubsystemRuntime>(L.ekf, make_controller(cfg, s, outer), s.ads,
                                              AnomalySchedule(s.anomalies, model.n_y), s.t_max);
    L.shadow = EstimatorState::initial(model);
    NoiseStream init(derive_stream_seed(cfg.seed, s.id, "init"));
    L.x_true = model.mu0 + sample_noise(model.sigma0, init);
    L.process = NoiseStream(derive_stream_seed(cfg.seed, s.id, "process"));
    L.measurement = NoiseStream(derive_stream_seed(cfg.seed, s.id, "measurement"));
    if (!options.skip_bounds && s.bounds) L.bounds = make_bound_params(cfg, s, *s.bounds, outer);

    SubsystemTrace& st = trace.subsystems[i];
    st.id = s.id;
    if (outer) {
      st.state_names = {"x", "y", "theta"};
      st.sensor_names = {"x", "y", "theta"};
      st.control_names = {"v", "omega"};
    } else {
      st.state_names = {"i", "w"};
      st.sensor_names = {"w"};
      st.control_names = {"V"};
    }
    st.bounds = L.bounds;
    st.records.reserve(static_cast<std::size_t>(cfg.horizon / s.dt));
    L.trace = &st;
  }

  const Micros base = base_tick(cfg);
  const std::int64_t n_ticks = cfg.horizon / base;
  Vector wheel_refs = Vector::Zero(2);
  double prev_heading = cfg.outer.mu0(2);

  for (SimClock clock(base); clock.tick() < n_ticks; clock.advance()) {
    const Micros t = clock.now();
    const bool c_k = coord.checkpoint_due(t);

    for (std::size_t i = 0; i < loops.size(); ++i) {
      Loop& L = loops[i];
      if (t.count() % L.cfg->dt.count() != 0) continue;
      const SubsystemModel& model = L.ekf->model();
      SubsystemRuntime& rt = *L.rt;
      const Vector u_prev = rt.u_prev;

      if (rt.started) {
        Vector u_plant = u_prev;
        if (L.outer && cfg.plant_mode == PlantMode::coupled) {
          Vector wheels(2);
          wheels << loops[1].x_true(1), loops[2].x_true(1);
          u_plant = wheel_inverse(wheels, cfg.robot);
        }
        L.x_true = step_dynamics(model, L.x_true, u_plant, sample_noise(model.Q, L.process));
      }
      const Vector y_clean = measure(model, L.x_true, u_prev, sample_noise(model.R, L.measurement));
      const Vector y = inject_anomaly(y_clean, rt.schedule, t);

      Reference ref;
      if (L.outer) {
        ref = reference_trajectory(to_seconds(t), rt.est.x_hat, prev_heading);
        prev_heading = ref.value(2);
      } else {
        ref.value = Vector::Constant(1, wheel_refs(static_cast<Eigen::Index>(i) - 1));
        ref.rate = Vector::Zero(1);
      }

      TickOutcome out = subsystem_tick(rt, *trace.store, coord, c_k, y, ref, t);
      // The shadow filter sees exactly what the framework saw.
      if (!L.trace->records.empty()) L.shadow = estimator_step(model, L.shadow, u_prev, y).state;

      TickRecord rec;
      rec.t = t;
      rec.x_true = L.x_true;
      rec.y_meas = y;
      rec.x_hat = out.x_hat;
      rec.x_ekf = L.shadow.x_hat;
      rec.mask.assign(static_cast<std::size_t>(model.n_x), 0);
      rec.u = out.u;
      rec.ads_flags = out.ads.flags;
      rec.detected = out.detected;
      rec.ckpt_event = out.checkpoint_saved;
      rec.p_diag = out.P.diagonal();
      if (out.recovery) {
        rec.x_rf = out.recovery->x_rf;
        rec.mask = out.recovery->mask;
        rec.k1 = out.recovery->k1;
        if (out.recovery->from_checkpoint) {
          trace.episodes.push_back({model.id, t, out.recovery->k1, t});
        } else {
          for (auto it = trace.episodes.rbegin(); it != trace.episodes.rend(); ++it) {
            if (it->subsystem == model.id) {
              it->last_tick = t;
              break;
            }
          }
        }
        if (L.bounds) rec.rsee_bound = rsee_bound_at(*L.bounds, t, out.recovery->k1);
      }
      if (L.bounds) rec.ee_bound = L.bounds->eps_delta;
      rec.safe_stop = out.safe_stop != SafeStopReason::none;
      L.trace->records.push_back(std::move(rec));

      if (out.safe_stop != SafeStopReason::none) {
        trace.safe_stop = SafeStopEvent{t, model.id, out.safe_stop, out.safe_stop_detail};
        return trace;
      }
      if (L.outer) wheel_refs = wheel_transform(out.u, cfg.robot);
    }

    if (c_k && cfg.prune_controls) {
      try {
        const Micros keep_from = coord.most_recent_consistent_checkpoint(*trace.store, t);
        for (const std::string& id : ids) trace.store->prune_controls_before(id, keep_from);
      } catch (const UnrecoverableError&) {
        // nothing old enough to prune yet
      }
    }
  }
  return trace;
}

}  // namespace rfr
