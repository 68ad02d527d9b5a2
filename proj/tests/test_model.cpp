#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rfr/model.hpp"
#include "rfr/robot.hpp"

using namespace rfr;

namespace {

SubsystemModel scalar_model() {
  Matrix A(1, 1), B(1, 1), C(1, 1);
  A << 1.0;
  B << 1.0;
  C << 1.0;
  SubsystemModel m = make_linear_model("s", A, B, C, Micros{10000});
  m.Q << 0.5;
  m.R << 1.0;
  m.sigma0 << 1.0;
  return m;
}

}  // namespace

TEST(Model, ValidateRejectsDimensionMismatch) {
  SubsystemModel m = scalar_model();
  EXPECT_NO_THROW(validate(m));
  m.Q = Matrix::Identity(2, 2);
  EXPECT_THROW(validate(m), ContractError);
}

TEST(Model, ValidateRejectsNonPositiveDt) {
  SubsystemModel m = scalar_model();
  m.dt = Micros{0};
  EXPECT_THROW(validate(m), ContractError);
}

TEST(Model, StepAndMeasureCheckDimensions) {
  SubsystemModel m = scalar_model();
  EXPECT_THROW(step_dynamics(m, Vector::Zero(2), Vector::Zero(1), Vector::Zero(1)), ContractError);
  EXPECT_THROW(measure(m, Vector::Zero(1), Vector::Zero(1), Vector::Zero(3)), ContractError);
  EXPECT_DOUBLE_EQ(step_dynamics(m, Vector::Constant(1, 2.0), Vector::Constant(1, 1.0),
                                 Vector::Constant(1, 0.5))(0),
                   3.5);
}

TEST(Model, JacobiansMatchCentralDifferences) {
  RobotParams rp;
  const SubsystemModel bike = make_bicycle_model("outer", Micros{100000});
  const SubsystemModel motor = make_motor_model("inner", rp, Micros{10000});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (const SubsystemModel* m : {&bike, &motor}) {
    for (int trial = 0; trial < 100; ++trial) {
      Vector x(m->n_x), u(m->n_u);
      for (int i = 0; i < m->n_x; ++i) x(i) = d(rng);
      for (int i = 0; i < m->n_u; ++i) u(i) = d(rng);
      const Matrix fd_a = oracle::central_difference([&](const Vector& z) { return m->f(z, u); }, x);
      const Matrix fd_c = oracle::central_difference([&](const Vector& z) { return m->g(z, u); }, x);
      const Matrix A = m->jac_A(x, u);
      const Matrix C = m->jac_C(x, u);
      EXPECT_LE((A - fd_a).cwiseAbs().maxCoeff(), 1e-4 * std::max(1.0, A.cwiseAbs().maxCoeff()));
      EXPECT_LE((C - fd_c).cwiseAbs().maxCoeff(), 1e-4 * std::max(1.0, C.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Model, LibraryFiniteDifferenceAgreesWithOracle) {
  const SubsystemModel bike = make_bicycle_model("outer", Micros{100000});
  Vector x(3), u(2);
  x << 0.3, -1.0, 0.7;
  u << 1.5, -0.4;
  const Matrix lib = finite_difference_jacobian(bike.f, x, u);
  const Matrix ref = oracle::central_difference([&](const Vector& z) { return bike.f(z, u); }, x);
  EXPECT_LE((lib - ref).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Model, BicycleJacobianAtRest) {
  const SubsystemModel bike = make_bicycle_model("outer", Micros{100000});
  Vector u(2);
  u << 1.0, 0.0;
  const Matrix A = bike.jac_A(Vector::Zero(3), u);
  EXPECT_DOUBLE_EQ(A(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(A(1, 2), 0.1);
}

TEST(Noise, EmpiricalCovarianceWithinFivePercent) {
  const Matrix cov = 0.01 * Matrix::Identity(3, 3);
  NoiseStream rng(123);
  const int n = 100000;
  Matrix acc = Matrix::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const Vector w = sample_noise(cov, rng);
    acc += w * w.transpose();
  }
  acc /= n;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(acc(i, i), 0.01, 0.05 * 0.01);
  EXPECT_LT(std::abs(acc(0, 1)), 0.05 * 0.01);
}

TEST(Noise, SameSeedSameSequence) {
  NoiseStream a(7), b(7);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.standard_normal(), b.standard_normal());
}

TEST(Noise, SingularCovarianceSamplesInItsRange) {
  Matrix cov = Matrix::Zero(3, 3);
  cov(0, 0) = 1.0;
  cov(1, 1) = 2.0;
  NoiseStream rng(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_noise(cov, rng)(2), 0.0);
}

TEST(Noise, NonPsdCovarianceThrows) {
  Matrix cov = Matrix::Identity(2, 2);
  cov(1, 1) = -1.0;
  NoiseStream rng(5);
  EXPECT_THROW(sample_noise(cov, rng), NumericalError);
}

TEST(Noise, StreamSeedsDependOnOwnerAndKind) {
  const auto a = derive_stream_seed(42, "outer", "process");
  EXPECT_EQ(a, derive_stream_seed(42, "outer", "process"));
  EXPECT_NE(a, derive_stream_seed(42, "outer", "measurement"));
  EXPECT_NE(a, derive_stream_seed(42, "inner-1", "process"));
  EXPECT_NE(a, derive_stream_seed(43, "outer", "process"));
}

TEST(Clock, TickArithmeticIsExact) {
  SimClock c(Micros{10000});
  for (int i = 0; i < 123457; ++i) c.advance();
  EXPECT_EQ(c.now(), Micros{10000} * 123457);
}

TEST(Clock, BaseResolutionIsGcd) {
  const std::vector<Micros> p{Micros{100000}, Micros{10000}, Micros{25000}};
  EXPECT_EQ(base_resolution(p), Micros{5000});
}
