#include "rfr/model.hpp"

#include <numeric>
#include <sstream>

namespace rfr {

namespace {

void check_covariance(const Matrix& m, int n, const std::string& name, const std::string& id) {
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream os;
    os << id << ": " << name << " must be " << n << "x" << n;
    throw ContractError(os.str());
  }
  if (!m.isApprox(m.transpose(), 1e-12) && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ContractError(id + ": " + name + " is not symmetric");
  }
  if (n == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
    throw ContractError(id + ": " + name + " is not positive semi-definite");
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void validate(const SubsystemModel& model) {
  const std::string& id = model.id;
  require(model.n_x > 0 && model.n_y > 0 && model.n_u >= 0, id + ": dimensions must be positive");
  require(static_cast<bool>(model.f) && static_cast<bool>(model.g) &&
              static_cast<bool>(model.jac_A) && static_cast<bool>(model.jac_C),
          id + ": model maps are not set");
  require(model.dt.count() > 0, id + ": dt must be positive");
  require(model.mu0.size() == model.n_x, id + ": mu0 dimension mismatch");
  check_covariance(model.Q, model.n_x, "Q", id);
  check_covariance(model.R, model.n_y, "R", id);
  check_covariance(model.sigma0, model.n_x, "Sigma0", id);
}

SubsystemModel make_euler_model(std::string id, int n_x, int n_y, int n_u, StateMap deriv,
                                JacobianMap deriv_jac, StateMap g, JacobianMap jac_C,
                                Micros dt) {
  const double h = to_seconds(dt);
  SubsystemModel m;
  m.id = std::move(id);
  m.n_x = n_x;
  m.n_y = n_y;
  m.n_u = n_u;
  m.f = [deriv, h](const Vector& x, const Vector& u) -> Vector { return x + deriv(x, u) * h; };
  m.jac_A = [deriv_jac, h, n_x](const Vector& x, const Vector& u) -> Matrix {
    return Matrix::Identity(n_x, n_x) + deriv_jac(x, u) * h;
  };
  m.g = std::move(g);
  m.jac_C = std::move(jac_C);
  m.dt = dt;
  m.Q = Matrix::Zero(n_x, n_x);
  m.R = Matrix::Zero(n_y, n_y);
  m.mu0 = Vector::Zero(n_x);
  m.sigma0 = Matrix::Zero(n_x, n_x);
  return m;
}

SubsystemModel make_linear_model(std::string id, const Matrix& A, const Matrix& B,
                                 const Matrix& C, Micros dt) {
  require(A.rows() == A.cols(), "A must be square");
  require(B.rows() == A.rows(), "B rows must match A");
  require(C.cols() == A.rows(), "C cols must match A");
  SubsystemModel m;
  m.id = std::move(id);
  m.n_x = static_cast<int>(A.rows());
  m.n_y = static_cast<int>(C.rows());
  m.n_u = static_cast<int>(B.cols());
  m.f = [A, B](const Vector& x, const Vector& u) -> Vector { return A * x + B * u; };
  m.jac_A = [A](const Vector&, const Vector&) -> Matrix { return A; };
  m.g = [C](const Vector& x, const Vector&) -> Vector { return C * x; };
  m.jac_C = [C](const Vector&, const Vector&) -> Matrix { return C; };
  m.Q = Matrix::Zero(m.n_x, m.n_x);
  m.R = Matrix::Zero(m.n_y, m.n_y);
  m.dt = dt;
  m.mu0 = Vector::Zero(m.n_x);
  m.sigma0 = Matrix::Zero(m.n_x, m.n_x);
  m.linear_dynamics = true;
  m.linear_measurement = true;
  return m;
}

Vector step_dynamics(const SubsystemModel& model, const Vector& x, const Vector& u,
                     const Vector& w) {
  require(x.size() == model.n_x, model.id + ": state dimension mismatch");
  require(u.size() == model.n_u, model.id + ": input dimension mismatch");
  require(w.size() == model.n_x, model.id + ": process noise dimension mismatch");
  return model.f(x, u) + w;
}

Vector measure(const SubsystemModel& model, const Vector& x, const Vector& u, const Vector& v) {
  require(x.size() == model.n_x, model.id + ": state dimension mismatch");
  require(u.size() == model.n_u, model.id + ": input dimension mismatch");
  require(v.size() == model.n_y, model.id + ": measurement noise dimension mismatch");
  return model.g(x, u) + v;
}

Matrix finite_difference_jacobian(const StateMap& fn, const Vector& x, const Vector& u) {
  const Vector f0 = fn(x, u);
  Matrix J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x(i)));
    Vector xp = x;
    Vector xm = x;
    xp(i) += h;
    xm(i) -= h;
    J.col(i) = (fn(xp, u) - fn(xm, u)) / (2.0 * h);
  }
  return J;
}

double NoiseStream::uniform01() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NoiseStream::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double a = 0.0;
  double b = 0.0;
  double s = 0.0;
  do {
    a = 2.0 * uniform01() - 1.0;
    b = 2.0 * uniform01() - 1.0;
    s = a * a + b * b;
  } while (s >= 1.0 || s == 0.0);
  const double k = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = b * k;
  has_spare_ = true;
  return a * k;
}

Vector sample_noise(const Matrix& cov, NoiseStream& rng) {
  require(cov.rows() == cov.cols(), "covariance must be square");
  const Eigen::Index n = cov.rows();
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.standard_normal();

  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL() * z;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of covariance failed");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
    throw NumericalError("covariance is not positive semi-definite");
  }
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * z;
}

std::uint64_t derive_stream_seed(std::uint64_t master, std::string_view owner,
                                 std::string_view kind) {
  std::uint64_t h = fnv1a(owner);
  h = fnv1a("/", h);
  h = fnv1a(kind, h);
  return splitmix64(splitmix64(master) ^ h);
}

SimClock::SimClock(Micros resolution) : resolution_(resolution) {
  require(resolution.count() > 0, "clock resolution must be positive");
}

Micros base_resolution(std::span<const Micros> periods) {
  require(!periods.empty(), "need at least one period");
  std::int64_t g = 0;
  for (Micros p : periods) {
    require(p.count() > 0, "periods must be positive");
    g = std::gcd(g, p.count());
  }
  return Micros{g};
}

}  // namespace rfr
