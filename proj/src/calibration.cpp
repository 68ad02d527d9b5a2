#include "rfr/simulator.hpp"

namespace rfr {

namespace {

void absmax_into(Matrix& acc, const Matrix& m) { acc = acc.cwiseMax(m.cwiseAbs()); }

// Accumulated remainder along the re-rolled path of one episode:
// Phi_{n+1} = |A_bar| Phi_n + |f(x_n) - f(r_n) - A(r_n)(x_n - r_n)|.
Vector episode_remainder(const SubsystemModel& model, const Matrix& abs_a,
                         const SubsystemTrace& st, const SecureStore& store,
                         const RecoveryEpisode& ep) {
  Vector phi = Vector::Zero(model.n_x);
  Vector worst = phi;
  const RetrievedRange range = store.retrieve(model.id, ep.k1, ep.last_tick + model.dt);
  if (range.checkpoints.empty()) return worst;
  Vector r = range.checkpoints.front().x_hat;
  for (const ControlRecord& c : range.controls) {
    const auto idx = static_cast<std::size_t>(c.t / model.dt);
    if (idx >= st.records.size()) break;
    const Vector& x = st.records[idx].x_true;
    const Vector rem = model.f(x, c.u) - model.f(r, c.u) - model.jac_A(r, c.u) * (x - r);
    phi = abs_a * phi + rem.cwiseAbs();
    worst = worst.cwiseMax(phi);
    r = model.f(r, c.u);
  }
  return worst;
}

}  // namespace

std::vector<BoundSpec> calibrate_bound_params(const ScenarioConfig& cfg) {
  validate(cfg);
  const std::vector<const SubsystemConfig*> subs = cfg.subsystems();
  std::vector<SubsystemModel> models;
  for (std::size_t i = 0; i < subs.size(); ++i) models.push_back(build_model(cfg, *subs[i], i == 0));

  std::vector<SimulationTrace> runs;
  for (int r = 0; r < cfg.calibration.runs; ++r) {
    ScenarioConfig c = cfg;
    c.seed = cfg.calibration.seed + static_cast<std::uint64_t>(r);
    RunOptions opt;
    opt.skip_bounds = true;
    runs.push_back(run_scenario(c, opt));
  }

  std::vector<BoundSpec> out(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const SubsystemModel& m = models[i];
    Vector max_p = m.sigma0.diagonal();
    Matrix a_bar = Matrix::Zero(m.n_x, m.n_x);
    for (const SimulationTrace& run : runs) {
      for (const TickRecord& rec : run.subsystems[i].records) {
        max_p = max_p.cwiseMax(rec.p_diag);
        absmax_into(a_bar, m.jac_A(rec.x_true, rec.u));
        absmax_into(a_bar, m.jac_A(rec.x_hat, rec.u));
        if (rec.x_rf) absmax_into(a_bar, m.jac_A(*rec.x_rf, rec.u));
      }
    }

    Vector phi = Vector::Zero(m.n_x);
    if (!m.linear_dynamics) {
      for (const SimulationTrace& run : runs) {
        for (const RecoveryEpisode& ep : run.episodes) {
          if (ep.subsystem != m.id) continue;
          phi = phi.cwiseMax(episode_remainder(m, a_bar, run.subsystems[i], *run.store, ep));
        }
      }
    }

    BoundSpec& b = out[i];
    b.A_bar = a_bar;
    b.eps_delta = cfg.k_sigma * max_p.cwiseMax(0.0).cwiseSqrt();
    b.eps_omega = cfg.k_sigma * m.Q.diagonal().cwiseMax(0.0).cwiseSqrt();
    b.phi_bar = phi;
  }
  return out;
}

ScenarioConfig with_calibrated_bounds(const ScenarioConfig& cfg) {
  bool missing = false;
  for (const SubsystemConfig* s : cfg.subsystems()) missing = missing || !s->bounds;
  if (!missing) return cfg;
  const std::vector<BoundSpec> calibrated = calibrate_bound_params(cfg);
  ScenarioConfig out = cfg;
  std::vector<SubsystemConfig*> subs = out.subsystems();
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->bounds) subs[i]->bounds = calibrated[i];
  }
  return out;
}

}  // namespace rfr
