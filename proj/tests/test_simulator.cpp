#include <gtest/gtest.h>

#include "rfr/simulator.hpp"
#include "rfr/trace_csv.hpp"

using namespace rfr;

namespace {

Micros s(double sec) { return from_seconds(sec); }

RunOptions opts() { return {true, "sim-test-key"}; }

const SimulationTrace& case_study_trace() {
  static const SimulationTrace tr = run_scenario(build_case_study(), opts());
  return tr;
}

}  // namespace

TEST(Simulator, RecordCounts) {
  const SimulationTrace& tr = case_study_trace();
  EXPECT_EQ(tr.subsystem("outer").records.size(), 100u);
  EXPECT_EQ(tr.subsystem("inner-1").records.size(), 1000u);
  EXPECT_EQ(tr.subsystem("inner-2").records.size(), 1000u);
  EXPECT_FALSE(tr.safe_stop.has_value());
}

TEST(Simulator, Deterministic) {
  const SimulationTrace again = run_scenario(build_case_study(), opts());
  for (const SubsystemTrace& st : case_study_trace().subsystems)
    EXPECT_EQ(csv_text(st), csv_text(again.subsystem(st.id)));
}

TEST(Simulator, SeedChangesNoise) {
  ScenarioConfig cfg = build_case_study();
  cfg.seed = 43;
  const SimulationTrace other = run_scenario(cfg, opts());
  EXPECT_NE(csv_text(other.subsystem("outer")), csv_text(case_study_trace().subsystem("outer")));
}

TEST(Simulator, CheckpointsSkipDetectedTicks) {
  const SimulationTrace& tr = case_study_trace();
  std::vector<Micros> expect;
  for (double t : {0.0, 1.0, 2.0, 3.0, 5.0, 6.0, 7.0, 8.0}) expect.push_back(s(t));
  for (const std::string id : {"outer", "inner-1", "inner-2"}) EXPECT_EQ(tr.store->save_times(id), expect) << id;
}

TEST(Simulator, CheckpointEventsMatchStore) {
  const SimulationTrace& tr = case_study_trace();
  for (const SubsystemTrace& st : tr.subsystems) {
    std::vector<Micros> events;
    for (const TickRecord& r : st.records)
      if (r.ckpt_event) events.push_back(r.t);
    EXPECT_EQ(events, tr.store->save_times(st.id)) << st.id;
  }
  EXPECT_TRUE(tr.store->verify_integrity());
}

TEST(Simulator, EpisodesStartFromPrecedingCheckpoint) {
  const SimulationTrace& tr = case_study_trace();
  int outer = 0;
  for (const RecoveryEpisode& e : tr.episodes) {
    if (e.subsystem != "outer") continue;
    ++outer;
    if (e.detected_at == s(3.5)) EXPECT_EQ(e.k1, s(3.0));
    else if (e.detected_at == s(8.5)) EXPECT_EQ(e.k1, s(8.0));
    else ADD_FAILURE() << "unexpected detection at " << to_seconds(e.detected_at);
  }
  EXPECT_EQ(outer, 2);
  EXPECT_EQ(tr.episodes.size(), 6u);
}

TEST(Simulator, IncrementalRollForwardEqualsFullReroll) {
  const ScenarioConfig cfg = build_case_study();
  const SimulationTrace& tr = case_study_trace();
  for (const SubsystemTrace& st : tr.subsystems) {
    const bool outer = st.id == "outer";
    const SubsystemConfig& sub = outer ? cfg.outer : (st.id == "inner-1" ? cfg.inner[0] : cfg.inner[1]);
    const ExtendedKalmanFilter ekf(build_model(cfg, sub, outer));
    int checked = 0;
    for (const TickRecord& r : st.records) {
      if (!r.x_rf) continue;
      const RetrievedRange range = tr.store->retrieve(st.id, *r.k1, r.t);
      ASSERT_FALSE(range.checkpoints.empty());
      const Vector full = roll_forward(ekf, range.checkpoints.front().x_hat, range.controls);
      const double scale = std::max(1.0, full.cwiseAbs().maxCoeff());
      ASSERT_LE((full - *r.x_rf).cwiseAbs().maxCoeff(), 1e-9 * scale) << st.id << " t=" << to_seconds(r.t);
      ++checked;
    }
    EXPECT_GT(checked, 0) << st.id;
  }
}

TEST(Simulator, MaskedElementsTakeRollForwardValue) {
  for (const TickRecord& r : case_study_trace().subsystem("outer").records) {
    if (!r.x_rf) {
      ASSERT_EQ(r.mask, (std::vector<int>{0, 0, 0}));
      continue;
    }
    EXPECT_EQ(r.mask[0], 1);
    EXPECT_EQ(r.mask[1], 1);
    for (int i = 0; i < 3; ++i) {
      if (r.mask[static_cast<std::size_t>(i)]) {
        ASSERT_EQ(r.x_hat(i), (*r.x_rf)(i));
      }
    }
  }
}

TEST(Simulator, ZeroNoiseEstimateConverges) {
  ScenarioConfig cfg = build_case_study();
  for (SubsystemConfig* sub : cfg.subsystems()) {
    sub->Q *= 1e-12;
    sub->R *= 1e-12;
    sub->anomalies.clear();
  }
  const SimulationTrace tr = run_scenario(cfg, opts());
  for (const SubsystemTrace& st : tr.subsystems) {
    const TickRecord& last = st.records.back();
    const double scale = std::max(1.0, last.x_true.cwiseAbs().maxCoeff());
    EXPECT_LE((last.x_hat - last.x_true).cwiseAbs().maxCoeff(), 1e-3 * scale) << st.id;
  }
}

TEST(Simulator, SafeStopWhenEpisodeOutlastsTmax) {
  ScenarioConfig cfg = build_case_study();
  cfg.inner[0].t_max = s(0.1);
  const SimulationTrace tr = run_scenario(cfg, opts());
  ASSERT_TRUE(tr.safe_stop.has_value());
  EXPECT_EQ(tr.safe_stop->subsystem, "inner-1");
  EXPECT_EQ(tr.safe_stop->t, s(3.61));
  EXPECT_EQ(tr.safe_stop->reason, SafeStopReason::anomaly_duration_exceeded);
  EXPECT_TRUE(tr.subsystem("inner-1").records.back().safe_stop);
}

TEST(Simulator, PruningKeepsRecoveryIdentical) {
  ScenarioConfig cfg = build_case_study();
  cfg.prune_controls = true;
  const SimulationTrace pruned = run_scenario(cfg, opts());
  for (const SubsystemTrace& st : case_study_trace().subsystems)
    EXPECT_EQ(csv_text(st), csv_text(pruned.subsystem(st.id)));
  EXPECT_LT(pruned.store->control_count("inner-1"), case_study_trace().store->control_count("inner-1"));
}

TEST(Simulator, CoupledPlantRuns) {
  ScenarioConfig cfg = build_case_study();
  cfg.plant_mode = PlantMode::coupled;
  const SimulationTrace tr = run_scenario(cfg, opts());
  EXPECT_EQ(tr.subsystem("outer").records.size(), 100u);
  EXPECT_NE(csv_text(tr.subsystem("outer")), csv_text(case_study_trace().subsystem("outer")));
}

TEST(Simulator, InvalidConfigThrows) {
  ScenarioConfig cfg = build_case_study();
  cfg.checkpoint_hz = 3.0;
  EXPECT_THROW(run_scenario(cfg, opts()), ConfigError);
}
