#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rfr/framework.hpp"

using namespace rfr;

namespace {

Micros s(double sec) { return from_seconds(sec); }

// u = first entry of ref.value - x, enough to exercise the tick plumbing.
class EchoController final : public Controller {
 public:
  Vector control(const Vector& x_hat, const Reference& ref) override {
    return (ref.value - x_hat).head(1);
  }
  std::unique_ptr<Controller> clone() const override { return std::make_unique<EchoController>(*this); }
};

std::shared_ptr<const ExtendedKalmanFilter> scalar_ekf(double q = 0.0) {
  Matrix one = Matrix::Identity(1, 1);
  SubsystemModel m = make_linear_model("s", one, one, one, Micros{100000});
  m.Q << q;
  m.R << 1.0;
  m.sigma0 << 1.0;
  return std::make_shared<const ExtendedKalmanFilter>(m);
}

SubsystemRuntime scalar_runtime(AnomalySchedule sch, Micros t_max = s(5.0)) {
  return SubsystemRuntime(scalar_ekf(), std::make_unique<EchoController>(),
                          {AdsKind::specific, AdsMode::oracle, s(0.25), 0.0, std::nullopt},
                          std::move(sch), t_max);
}

Reference ref1(double v) { return {Vector::Constant(1, v), Vector::Zero(1)}; }

}  // namespace

TEST(Coordinator, TriggersOnGrid) {
  const Coordinator c(s(1.0), {"outer", "inner-1", "inner-2"}, {s(0.25), s(0.25), s(0.25)});
  for (const auto& [id, b] : c.tick(s(3.0))) EXPECT_TRUE(b) << id;
  for (const auto& [id, b] : c.tick(s(3.1))) EXPECT_FALSE(b) << id;
}

TEST(Coordinator, BaseTickPeriodAlwaysTriggers) {
  const Coordinator c(s(0.01), {"a", "b"}, {Micros{0}, Micros{0}});
  for (int k = 0; k < 500; ++k) EXPECT_TRUE(c.checkpoint_due(Micros{k * 10000}));
}

TEST(ConsistentCheckpoint, CaseStudyTrace) {
  const std::vector<Micros> t{s(0), s(1), s(2), s(3)};
  const std::vector<std::vector<Micros>> saves{t, t, t};
  const std::vector<Micros> d{s(0.25), s(0.25), s(0.25)};
  EXPECT_EQ(most_recent_consistent_checkpoint(saves, d, s(3.5)), s(3.0));
}

TEST(ConsistentCheckpoint, MixedRates) {
  const std::vector<std::vector<Micros>> saves{{s(0), s(10), s(20), s(30)}, {s(0), s(20)}};
  const std::vector<Micros> d{s(5), s(5)};
  EXPECT_EQ(most_recent_consistent_checkpoint(saves, d, s(35)), s(20));
}

TEST(ConsistentCheckpoint, NoCommonElementThrows) {
  const std::vector<std::vector<Micros>> saves{{s(1), s(3)}, {s(2), s(4)}};
  const std::vector<Micros> d{s(0), s(0)};
  EXPECT_THROW(most_recent_consistent_checkpoint(saves, d, s(10)), UnrecoverableError);
}

TEST(ConsistentCheckpoint, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> nsub(1, 4), ntimes(0, 12), tval(0, 40), dval(0, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = nsub(rng);
    std::vector<std::vector<Micros>> saves(static_cast<std::size_t>(n));
    std::vector<std::vector<std::int64_t>> raw(static_cast<std::size_t>(n));
    std::vector<Micros> det;
    std::vector<std::int64_t> det_raw;
    for (int i = 0; i < n; ++i) {
      std::set<std::int64_t> ts;
      for (int j = ntimes(rng); j > 0; --j) ts.insert(tval(rng));
      for (std::int64_t t : ts) {
        raw[static_cast<std::size_t>(i)].push_back(t);
        saves[static_cast<std::size_t>(i)].push_back(Micros{t});
      }
      det_raw.push_back(dval(rng));
      det.push_back(Micros{det_raw.back()});
    }
    const std::int64_t k = tval(rng) + 5;
    const auto expect = oracle::consistent_checkpoint(raw, det_raw, k);
    if (expect) {
      EXPECT_EQ(most_recent_consistent_checkpoint(saves, det, Micros{k}), Micros{*expect});
    } else {
      EXPECT_THROW(most_recent_consistent_checkpoint(saves, det, Micros{k}), UnrecoverableError);
    }
  }
}

TEST(Classify, Verdicts) {
  const std::vector<SubsystemSnapshot> uniform{{"outer", {s(3), s(3), s(3)}}, {"inner-1", {s(3), s(3)}}};
  EXPECT_EQ(classify_checkpoint_set(uniform), ConsistencyVerdict::consistent);
  const std::vector<SubsystemSnapshot> partly{{"outer", {s(3), s(3), s(3)}}, {"inner-1", {s(2.9), s(2.9)}}};
  EXPECT_EQ(classify_checkpoint_set(partly), ConsistencyVerdict::partly_inconsistent);
  const std::vector<SubsystemSnapshot> fully{{"outer", {s(3), s(2.9), s(3)}}, {"inner-1", {s(3), s(3)}}};
  EXPECT_EQ(classify_checkpoint_set(fully), ConsistencyVerdict::fully_inconsistent);
}

TEST(SafeStop, StrictInequality) {
  EXPECT_FALSE(safe_stop_check(s(3.25), s(3.5), s(5)));
  EXPECT_FALSE(safe_stop_check(s(3.5), s(8.5), s(5)));
  EXPECT_TRUE(safe_stop_check(s(3.5), s(8.51), s(5)));
}

TEST(RecoveryMask, FollowsGainPattern) {
  Matrix K = Matrix::Zero(3, 3);
  K(0, 0) = 0.6;
  K(1, 1) = 0.6;
  K(2, 2) = 0.6;
  AdsOutput ads{AdsKind::specific, {1, 1, 0}, s(0.25)};
  EXPECT_EQ(recovery_mask(K, ads, 3), (std::vector<int>{1, 1, 0}));
  K(2, 0) = 0.01;
  EXPECT_EQ(recovery_mask(K, ads, 3), (std::vector<int>{1, 1, 1}));
  K(2, 0) = 1e-13;
  EXPECT_EQ(recovery_mask(K, ads, 3), (std::vector<int>{1, 1, 0}));
}

TEST(RecoveryMask, OppositeSignsDoNotCancel) {
  Matrix K(1, 2);
  K << 0.5, -0.5;
  EXPECT_EQ(recovery_mask(K, {AdsKind::specific, {1, 1}, s(0)}, 1), std::vector<int>{1});
}

TEST(RecoveryMask, GenericReplacesEverything) {
  EXPECT_EQ(recovery_mask(Matrix::Zero(3, 3), {AdsKind::generic, {1}, s(0)}, 3), (std::vector<int>{1, 1, 1}));
}

TEST(RollForward, ScalarMatchesClosedForm) {
  const auto ekf = scalar_ekf();
  const std::vector<ControlRecord> controls{{s(0), Vector::Constant(1, 0.5)}, {s(0.1), Vector::Constant(1, 0.5)}};
  const Vector x = roll_forward(*ekf, Vector::Constant(1, 1.0), controls);
  EXPECT_DOUBLE_EQ(x(0), 2.0);
  const Matrix one = Matrix::Identity(1, 1);
  EXPECT_DOUBLE_EQ(oracle::lti_closed_form(one, one, Vector::Constant(1, 1.0),
                                           {Vector::Constant(1, 0.5), Vector::Constant(1, 0.5)})(0),
                   2.0);
}

TEST(SubsystemTick, HealthyCheckpointTick) {
  SubsystemRuntime rt = scalar_runtime(AnomalySchedule());
  SecureStore store("k");
  const Coordinator coord(s(1.0), {"s"}, {s(0.25)});
  const TickOutcome out = subsystem_tick(rt, store, coord, true, Vector::Constant(1, 0.0), ref1(1.0), s(0));
  EXPECT_TRUE(out.checkpoint_saved);
  EXPECT_FALSE(out.recovery.has_value());
  EXPECT_EQ(store.checkpoint_count("s"), 1u);
  EXPECT_EQ(store.control_count("s"), 1u);
}

TEST(SubsystemTick, DetectedTickRecoversAndSkipsCheckpoint) {
  const AnomalySchedule sch({{s(0.45), s(2.0), Vector::Constant(1, 100.0), {1}}}, 1);
  SubsystemRuntime rt = scalar_runtime(sch);
  SecureStore store("k");
  const Coordinator coord(s(0.2), {"s"}, {s(0.25)});
  std::optional<TickOutcome> first_detected;
  for (int k = 0; k <= 10; ++k) {
    const Micros t = s(0.1 * k);
    Vector y = inject_anomaly(Vector::Constant(1, 0.0), sch, t);
    TickOutcome out = subsystem_tick(rt, store, coord, coord.checkpoint_due(t), y, ref1(0.0), t);
    if (out.detected) {
      EXPECT_FALSE(out.checkpoint_saved);
      ASSERT_TRUE(out.recovery.has_value());
      EXPECT_EQ(out.x_hat(0), out.recovery->x_rf(0));
      if (!first_detected) first_detected = out;
    }
  }
  ASSERT_TRUE(first_detected.has_value());
  EXPECT_TRUE(first_detected->recovery->from_checkpoint);
  EXPECT_EQ(first_detected->recovery->k1, s(0.4));
  EXPECT_EQ(store.save_times("s"), (std::vector<Micros>{s(0), s(0.2), s(0.4), s(0.6)}));
}

TEST(SubsystemTick, SafeStopAfterTmax) {
  const AnomalySchedule sch({{s(0.45), s(5.0), Vector::Constant(1, 100.0), {1}}}, 1);
  SubsystemRuntime rt = scalar_runtime(sch, s(0.3));
  SecureStore store("k");
  const Coordinator coord(s(0.2), {"s"}, {s(0.25)});
  Micros stopped{-1};
  for (int k = 0; k <= 20 && stopped.count() < 0; ++k) {
    const Micros t = s(0.1 * k);
    const TickOutcome out = subsystem_tick(rt, store, coord, coord.checkpoint_due(t),
                                           inject_anomaly(Vector::Zero(1), sch, t), ref1(0.0), t);
    if (out.safe_stop == SafeStopReason::anomaly_duration_exceeded) stopped = t;
  }
  // detected from 0.7; 1.0 - 0.7 = T_max is not enough, 1.1 is.
  EXPECT_EQ(stopped, s(1.1));
}

TEST(SubsystemTick, NoCheckpointMeansSafeStop) {
  const AnomalySchedule sch({{s(0.05), s(5.0), Vector::Constant(1, 100.0), {1}}}, 1);
  SubsystemRuntime rt = scalar_runtime(sch);
  SecureStore store("k");
  // "other" never saves, so no consistent checkpoint exists.
  const Coordinator coord(s(1.0), {"s", "other"}, {s(0.25), s(0.25)});
  SafeStopReason reason = SafeStopReason::none;
  for (int k = 0; k <= 5 && reason == SafeStopReason::none; ++k) {
    const Micros t = s(0.1 * k);
    reason = subsystem_tick(rt, store, coord, coord.checkpoint_due(t),
                            inject_anomaly(Vector::Zero(1), sch, t), ref1(0.0), t)
                 .safe_stop;
  }
  EXPECT_EQ(reason, SafeStopReason::unrecoverable);
}

TEST(RollForwardRecover, NoiselessRecoveryEqualsTruth) {
  // Zero process noise and an exact model: the roll-forward from a checkpoint
  // that equals the truth stays on the truth.
  Matrix A(2, 2), B(2, 1), C(1, 2);
  A << 1.0, 0.1, 0.0, 1.0;
  B << 0.0, 0.1;
  C << 1.0, 0.0;
  SubsystemModel m = make_linear_model("s", A, B, C, Micros{100000});
  m.R << 1e-6;
  m.sigma0 = Matrix::Zero(2, 2);
  auto ekf = std::make_shared<const ExtendedKalmanFilter>(m);
  const AnomalySchedule sch({{s(1.05), s(3.0), Vector::Constant(1, 50.0), {1}}}, 1);
  SubsystemRuntime rt(ekf, std::make_unique<EchoController>(),
                      {AdsKind::specific, AdsMode::oracle, s(0.25), 0.0, std::nullopt}, sch, s(5.0));
  SecureStore store("k");
  const Coordinator coord(s(0.5), {"s"}, {s(0.25)});
  Vector x = Vector::Zero(2);
  int recovered = 0;
  for (int k = 0; k < 30; ++k) {
    const Micros t = s(0.1 * k);
    if (k > 0) x = A * x + B * rt.u_prev;
    Reference ref{Vector::Constant(2, std::sin(0.3 * k)), Vector::Zero(2)};
    const TickOutcome out = subsystem_tick(rt, store, coord, coord.checkpoint_due(t),
                                           inject_anomaly(C * x, sch, t), ref, t);
    if (out.recovery) {
      ++recovered;
      EXPECT_LE((out.recovery->x_rf - x).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  EXPECT_GT(recovered, 10);
}
