#include "rfr/scenario.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace rfr {

using nlohmann::json;

namespace {

std::string join_failures(const std::vector<std::string>& failures) {
  std::string out = "invalid scenario:";
  for (const std::string& f : failures) out += "\n  - " + f;
  return out;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

Micros lcm_micros(Micros a, Micros b) { return Micros{std::lcm(a.count(), b.count())}; }

// ---- JSON helpers. Each reader records failures rather than throwing so
// that one parse reports every problem.

struct Reader {
  std::vector<std::string> failures;

  bool number(const json& j, const std::string& path, double& out) {
    if (!j.is_number()) {
      failures.push_back(path + ": expected a number");
      return false;
    }
    out = j.get<double>();
    return true;
  }

  void seconds(const json& obj, const char* key, const std::string& path, Micros& out) {
    if (!obj.contains(key)) return;
    double s = 0;
    if (number(obj.at(key), path + "." + key, s)) out = from_seconds(s);
  }

  void real(const json& obj, const char* key, const std::string& path, double& out) {
    if (!obj.contains(key)) return;
    number(obj.at(key), path + "." + key, out);
  }

  void vector(const json& obj, const char* key, const std::string& path, Vector& out) {
    if (!obj.contains(key)) return;
    const json& j = obj.at(key);
    const std::string p = path + "." + key;
    if (!j.is_array()) {
      failures.push_back(p + ": expected an array of numbers");
      return;
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!number(j[i], p + "[" + std::to_string(i) + "]", v(static_cast<Eigen::Index>(i)))) return;
    }
    out = v;
  }

  // Either a flat array (diagonal) or an array of rows.
  void matrix(const json& obj, const char* key, const std::string& path, Matrix& out) {
    if (!obj.contains(key)) return;
    const json& j = obj.at(key);
    const std::string p = path + "." + key;
    if (!j.is_array() || j.empty()) {
      failures.push_back(p + ": expected a non-empty array (diagonal) or array of rows");
      return;
    }
    if (!j.front().is_array()) {
      Vector d;
      vector(obj, key, path, d);
      if (d.size() == static_cast<Eigen::Index>(j.size())) out = d.asDiagonal();
      return;
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      if (!j[r].is_array() || j[r].size() != cols) {
        failures.push_back(p + ": rows must be arrays of equal length");
        return;
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (!number(j[r][c], p + "[" + std::to_string(r) + "][" + std::to_string(c) + "]",
                    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))))
          return;
      }
    }
    out = m;
  }

  void ads(const json& obj, const std::string& path, AdsConfig& out) {
    if (!obj.is_object()) {
      failures.push_back(path + ": expected an object");
      return;
    }
    if (obj.contains("kind")) {
      const json& k = obj.at("kind");
      if (k == "specific") out.kind = AdsKind::specific;
      else if (k == "generic") out.kind = AdsKind::generic;
      else failures.push_back(path + ".kind: expected \"specific\" or \"generic\"");
    }
    if (obj.contains("mode")) {
      const json& m = obj.at("mode");
      if (m == "oracle") out.mode = AdsMode::oracle;
      else if (m == "residual_threshold") out.mode = AdsMode::residual_threshold;
      else failures.push_back(path + ".mode: expected \"oracle\" or \"residual_threshold\"");
    }
    seconds(obj, "detection_time_s", path, out.detection_time);
    real(obj, "threshold", path, out.threshold);
    if (obj.contains("zeta")) {
      if (obj.at("zeta").is_null()) out.zeta.reset();
      else if (obj.at("zeta").is_number_integer()) out.zeta = obj.at("zeta").get<int>();
      else failures.push_back(path + ".zeta: expected an integer or null");
    }
  }

  void anomalies(const json& j, const std::string& path, std::vector<AnomalyWindow>& out) {
    if (!j.is_array()) {
      failures.push_back(path + ": expected an array");
      return;
    }
    std::vector<AnomalyWindow> windows;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      const json& w = j[i];
      if (!w.is_object()) {
        failures.push_back(p + ": expected an object");
        continue;
      }
      AnomalyWindow a;
      for (const char* key : {"t_start", "t_end", "y_a", "gamma"}) {
        if (!w.contains(key)) failures.push_back(p + ": missing " + key);
      }
      seconds(w, "t_start", p, a.t_start);
      seconds(w, "t_end", p, a.t_end);
      vector(w, "y_a", p, a.y_a);
      if (w.contains("gamma")) {
        const json& g = w.at("gamma");
        if (!g.is_array()) {
          failures.push_back(p + ".gamma: expected an array of 0/1");
        } else {
          for (const json& e : g) {
            if (!e.is_number_integer()) {
              failures.push_back(p + ".gamma: expected integers");
              break;
            }
            a.gamma.push_back(e.get<int>());
          }
        }
      }
      windows.push_back(std::move(a));
    }
    out = std::move(windows);
  }

  void bounds(const json& j, const std::string& path, std::optional<BoundSpec>& out) {
    if (j.is_null()) {
      out.reset();
      return;
    }
    if (!j.is_object()) {
      failures.push_back(path + ": expected an object or null");
      return;
    }
    BoundSpec b;
    for (const char* key : {"A_bar", "eps_delta", "eps_omega", "phi_bar"}) {
      if (!j.contains(key)) failures.push_back(path + ": missing " + key);
    }
    matrix(j, "A_bar", path, b.A_bar);
    vector(j, "eps_delta", path, b.eps_delta);
    vector(j, "eps_omega", path, b.eps_omega);
    vector(j, "phi_bar", path, b.phi_bar);
    out = std::move(b);
  }

  void subsystem(const json& j, const std::string& path, SubsystemConfig& s) {
    if (!j.is_object()) {
      failures.push_back(path + ": expected an object");
      return;
    }
    if (j.contains("id")) {
      if (j.at("id").is_string()) s.id = j.at("id").get<std::string>();
      else failures.push_back(path + ".id: expected a string");
    }
    seconds(j, "dt_s", path, s.dt);
    matrix(j, "Q", path, s.Q);
    matrix(j, "R", path, s.R);
    vector(j, "mu0", path, s.mu0);
    matrix(j, "sigma0", path, s.sigma0);
    seconds(j, "t_max_s", path, s.t_max);
    vector(j, "e_max", path, s.e_max);
    if (j.contains("bounds")) bounds(j.at("bounds"), path + ".bounds", s.bounds);
    if (j.contains("ads")) ads(j.at("ads"), path + ".ads", s.ads);
    if (j.contains("anomalies")) anomalies(j.at("anomalies"), path + ".anomalies", s.anomalies);
  }

  void robot(const json& j, const std::string& path, RobotParams& r) {
    if (!j.is_object()) {
      failures.push_back(path + ": expected an object");
      return;
    }
    real(j, "R_w", path, r.R_w);
    real(j, "L_w", path, r.L_w);
    real(j, "l", path, r.l);
    real(j, "k1_gain", path, r.k1_gain);
    real(j, "k2_gain", path, r.k2_gain);
    real(j, "motor_R", path, r.motor_R);
    real(j, "motor_L", path, r.motor_L);
    real(j, "K_tor", path, r.K_tor);
    real(j, "K_emf", path, r.K_emf);
    real(j, "K_fric", path, r.K_fric);
    real(j, "J", path, r.J);
    real(j, "Kp", path, r.Kp);
    real(j, "Kd", path, r.Kd);
    real(j, "Ki", path, r.Ki);
    real(j, "integral_limit", path, r.integral_limit);
  }
};

json to_json(const Vector& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

json to_json(const Matrix& m) {
  const bool diagonal = m.rows() == m.cols() &&
                        (m - Matrix(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  if (diagonal) return to_json(Vector(m.diagonal()));
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vector(m.row(r).transpose())));
  return j;
}

json to_json(const SubsystemConfig& s) {
  json j;
  j["id"] = s.id;
  j["dt_s"] = to_seconds(s.dt);
  j["Q"] = to_json(s.Q);
  j["R"] = to_json(s.R);
  j["mu0"] = to_json(s.mu0);
  j["sigma0"] = to_json(s.sigma0);
  j["t_max_s"] = to_seconds(s.t_max);
  j["e_max"] = to_json(s.e_max);
  if (s.bounds) {
    j["bounds"] = {{"A_bar", to_json(s.bounds->A_bar)},
                   {"eps_delta", to_json(s.bounds->eps_delta)},
                   {"eps_omega", to_json(s.bounds->eps_omega)},
                   {"phi_bar", to_json(s.bounds->phi_bar)}};
  } else {
    j["bounds"] = nullptr;
  }
  json ads;
  ads["kind"] = s.ads.kind == AdsKind::specific ? "specific" : "generic";
  ads["mode"] = s.ads.mode == AdsMode::oracle ? "oracle" : "residual_threshold";
  ads["detection_time_s"] = to_seconds(s.ads.detection_time);
  ads["threshold"] = s.ads.threshold;
  ads["zeta"] = s.ads.zeta ? json(*s.ads.zeta) : json(nullptr);
  j["ads"] = ads;
  json an = json::array();
  for (const AnomalyWindow& w : s.anomalies) {
    an.push_back({{"t_start", to_seconds(w.t_start)},
                  {"t_end", to_seconds(w.t_end)},
                  {"y_a", to_json(w.y_a)},
                  {"gamma", w.gamma}});
  }
  j["anomalies"] = an;
  return j;
}

bool is_psd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    return false;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

void check_subsystem(const SubsystemConfig& s, int n_x, int n_y, std::vector<std::string>& f) {
  const std::string p = s.id.empty() ? std::string("<unnamed>") : s.id;
  const auto nx = static_cast<Eigen::Index>(n_x);
  const auto ny = static_cast<Eigen::Index>(n_y);
  if (s.id.empty()) f.push_back("subsystem id must not be empty");
  if (s.dt.count() <= 0) f.push_back(p + ": dt_s must be positive");
  if (s.Q.rows() != nx || s.Q.cols() != nx || !is_psd(s.Q))
    f.push_back(p + ": Q must be a symmetric PSD " + std::to_string(n_x) + "x" + std::to_string(n_x) + " matrix");
  if (s.R.rows() != ny || s.R.cols() != ny || !is_psd(s.R))
    f.push_back(p + ": R must be a symmetric PSD " + std::to_string(n_y) + "x" + std::to_string(n_y) + " matrix");
  if (s.mu0.size() != nx) f.push_back(p + ": mu0 must have " + std::to_string(n_x) + " entries");
  if (s.sigma0.rows() != nx || s.sigma0.cols() != nx || !is_psd(s.sigma0))
    f.push_back(p + ": sigma0 must be a symmetric PSD " + std::to_string(n_x) + "x" + std::to_string(n_x) + " matrix");
  if (s.t_max.count() <= 0) f.push_back(p + ": t_max_s must be positive");
  if (s.e_max.size() != nx || (s.e_max.array() <= 0).any())
    f.push_back(p + ": e_max must have " + std::to_string(n_x) + " positive entries");
  if (s.ads.detection_time.count() < 0) f.push_back(p + ": ads.detection_time_s must be non-negative");
  if (s.ads.mode == AdsMode::residual_threshold) {
    if (s.dt.count() > 0 && s.ads.detection_time.count() % s.dt.count() != 0)
      f.push_back(p + ": ads.detection_time_s must be a multiple of dt_s in residual_threshold mode");
    if (!(s.ads.threshold > 0)) f.push_back(p + ": ads.threshold must be positive in residual_threshold mode");
  }
  if (s.bounds) {
    const BoundSpec& b = *s.bounds;
    if (b.A_bar.rows() != nx || b.A_bar.cols() != nx)
      f.push_back(p + ": bounds.A_bar must be " + std::to_string(n_x) + "x" + std::to_string(n_x));
    for (const auto& [name, v] : {std::pair<const char*, const Vector*>{"eps_delta", &b.eps_delta},
                                  {"eps_omega", &b.eps_omega},
                                  {"phi_bar", &b.phi_bar}}) {
      if (v->size() != nx || (v->array() < 0).any())
        f.push_back(p + ": bounds." + name + " must have " + std::to_string(n_x) + " non-negative entries");
    }
  }
  for (std::size_t i = 0; i < s.anomalies.size(); ++i) {
    const AnomalyWindow& w = s.anomalies[i];
    const std::string q = p + ": anomalies[" + std::to_string(i) + "]";
    if (w.t_start.count() < 0 || w.t_end <= w.t_start) f.push_back(q + " needs 0 <= t_start < t_end");
    if (w.y_a.size() != ny) f.push_back(q + ".y_a must have " + std::to_string(n_y) + " entries");
    if (static_cast<Eigen::Index>(w.gamma.size()) != ny)
      f.push_back(q + ".gamma must have " + std::to_string(n_y) + " entries");
    for (int g : w.gamma) {
      if (g != 0 && g != 1) {
        f.push_back(q + ".gamma entries must be 0 or 1");
        break;
      }
    }
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> failures)
    : std::runtime_error(join_failures(failures)), failures_(std::move(failures)) {}

const char* to_string(PlantMode m) { return m == PlantMode::ideal ? "ideal" : "coupled"; }

PlantMode plant_mode_from_string(const std::string& s) {
  if (s == "ideal") return PlantMode::ideal;
  if (s == "coupled") return PlantMode::coupled;
  throw ConfigError({"plant_mode must be \"ideal\" or \"coupled\", got \"" + s + "\""});
}

std::vector<const SubsystemConfig*> ScenarioConfig::subsystems() const {
  std::vector<const SubsystemConfig*> out{&outer};
  for (const SubsystemConfig& s : inner) out.push_back(&s);
  return out;
}

std::vector<SubsystemConfig*> ScenarioConfig::subsystems() {
  std::vector<SubsystemConfig*> out{&outer};
  for (SubsystemConfig& s : inner) out.push_back(&s);
  return out;
}

ScenarioConfig build_case_study() {
  ScenarioConfig c;
  c.horizon = from_seconds(10.0);
  c.seed = 42;
  c.checkpoint_hz = 1.0;
  c.delta = from_seconds(1.0);

  const Micros detect = from_seconds(0.25);
  auto windows = [](const Vector& y_a, std::vector<int> gamma) {
    return std::vector<AnomalyWindow>{
        {from_seconds(3.25), from_seconds(5.0), y_a, gamma},
        {from_seconds(8.25), from_seconds(10.0), -y_a, gamma}};
  };

  SubsystemConfig& o = c.outer;
  o.id = "outer";
  o.dt = from_seconds(0.1);
  o.Q = 0.01 * Matrix::Identity(3, 3);
  o.R = 0.01 * Matrix::Identity(3, 3);
  o.mu0 = vec({2.0, 0.0, 1.5707963267948966});
  o.sigma0 = 0.01 * Matrix::Identity(3, 3);
  o.t_max = from_seconds(5.0);
  o.e_max = vec({5.0, 5.0, 3.141592653589793});
  o.ads = {AdsKind::specific, AdsMode::oracle, detect, 0.0, std::nullopt};
  o.anomalies = windows(vec({5.0, 5.0, 0.0}), {1, 1, 0});

  for (const char* id : {"inner-1", "inner-2"}) {
    SubsystemConfig s;
    s.id = id;
    s.dt = from_seconds(0.01);
    s.Q = 2500.0 * Matrix::Identity(2, 2);
    s.R = 2500.0 * Matrix::Identity(1, 1);
    s.mu0 = Vector::Zero(2);
    s.sigma0 = Matrix::Identity(2, 2);
    s.t_max = from_seconds(5.0);
    s.e_max = vec({50000.0, 50000.0});
    s.ads = {AdsKind::specific, AdsMode::oracle, detect, 0.0, std::nullopt};
    s.anomalies = windows(vec({20000.0}), {1});
    c.inner.push_back(std::move(s));
  }
  return c;
}

Micros base_tick(const ScenarioConfig& cfg) {
  std::vector<Micros> periods;
  for (const SubsystemConfig* s : cfg.subsystems()) periods.push_back(s->dt);
  return base_resolution(periods);
}

Micros checkpoint_period(const ScenarioConfig& cfg) {
  require(cfg.checkpoint_hz > 0, "checkpoint_hz must be positive");
  return from_seconds(1.0 / cfg.checkpoint_hz);
}

double accuracy_optimal_rate(const ScenarioConfig& cfg) {
  Micros l{1};
  for (const SubsystemConfig* s : cfg.subsystems()) l = lcm_micros(l, s->dt);
  return 1e6 / static_cast<double>(l.count());
}

std::vector<std::string> validation_failures(const ScenarioConfig& cfg) {
  std::vector<std::string> f;
  if (cfg.inner.size() != 2) f.push_back("inner must list exactly two wheel-motor loops");
  check_subsystem(cfg.outer, 3, 3, f);
  for (const SubsystemConfig& s : cfg.inner) check_subsystem(s, 2, 1, f);

  std::vector<std::string> ids;
  for (const SubsystemConfig* s : cfg.subsystems()) {
    if (std::find(ids.begin(), ids.end(), s->id) != ids.end())
      f.push_back("duplicate subsystem id \"" + s->id + "\"");
    ids.push_back(s->id);
  }

  try {
    cfg.robot.validate();
  } catch (const ContractError& e) {
    f.push_back(e.what());
  }
  if (cfg.calibration.runs < 1) f.push_back("calibration.runs must be at least 1");
  if (!(cfg.k_sigma > 0)) f.push_back("analysis.k_sigma must be positive");
  if (cfg.delta.count() < 0) f.push_back("analysis.delta_s must be non-negative");

  bool periods_ok = true;
  for (const SubsystemConfig* s : cfg.subsystems()) periods_ok = periods_ok && s->dt.count() > 0;
  if (!periods_ok) return f;

  const Micros base = base_tick(cfg);
  if (cfg.horizon.count() <= 0) {
    f.push_back("horizon_s must be positive");
  } else if (cfg.horizon.count() % base.count() != 0) {
    f.push_back("horizon_s must be a multiple of the base tick (" + std::to_string(to_seconds(base)) + " s)");
  }
  if (!(cfg.checkpoint_hz > 0)) {
    f.push_back("checkpoint_hz must be positive");
  } else {
    const Micros period = checkpoint_period(cfg);
    for (const SubsystemConfig* s : cfg.subsystems()) {
      if (period.count() % s->dt.count() != 0) {
        f.push_back("checkpoint period (1/checkpoint_hz) must be a multiple of every loop period; " +
                    s->id + " has dt_s=" + std::to_string(to_seconds(s->dt)));
      }
    }
  }

  for (const SubsystemConfig* s : cfg.subsystems()) {
    std::vector<AnomalyWindow> w = s->anomalies;
    std::sort(w.begin(), w.end(),
              [](const AnomalyWindow& a, const AnomalyWindow& b) { return a.t_start < b.t_start; });
    for (std::size_t i = 1; i < w.size(); ++i) {
      if (w[i].t_start < w[i - 1].t_end) {
        f.push_back(s->id + ": anomaly windows overlap");
      } else if (w[i].t_start - w[i - 1].t_end < cfg.delta) {
        f.push_back(s->id + ": anomaly windows must be at least analysis.delta_s apart");
      }
    }
  }
  return f;
}

void validate(const ScenarioConfig& cfg) {
  std::vector<std::string> f = validation_failures(cfg);
  if (!f.empty()) throw ConfigError(std::move(f));
}

ScenarioConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"top level must be a JSON object"});

  ScenarioConfig cfg = build_case_study();
  Reader r;
  r.seconds(root, "horizon_s", "", cfg.horizon);
  if (root.contains("seed")) {
    if (root.at("seed").is_number_unsigned()) cfg.seed = root.at("seed").get<std::uint64_t>();
    else r.failures.push_back("seed: expected a non-negative integer");
  }
  if (root.contains("plant_mode")) {
    const json& m = root.at("plant_mode");
    if (m == "ideal") cfg.plant_mode = PlantMode::ideal;
    else if (m == "coupled") cfg.plant_mode = PlantMode::coupled;
    else r.failures.push_back("plant_mode: expected \"ideal\" or \"coupled\"");
  }
  r.real(root, "checkpoint_hz", "", cfg.checkpoint_hz);
  if (root.contains("robot")) r.robot(root.at("robot"), "robot", cfg.robot);
  if (root.contains("analysis")) {
    const json& a = root.at("analysis");
    r.seconds(a, "delta_s", "analysis", cfg.delta);
    r.real(a, "k_sigma", "analysis", cfg.k_sigma);
  }
  if (root.contains("calibration")) {
    const json& c = root.at("calibration");
    if (c.contains("seed")) {
      if (c.at("seed").is_number_unsigned()) cfg.calibration.seed = c.at("seed").get<std::uint64_t>();
      else r.failures.push_back("calibration.seed: expected a non-negative integer");
    }
    if (c.contains("runs")) {
      if (c.at("runs").is_number_integer()) cfg.calibration.runs = c.at("runs").get<int>();
      else r.failures.push_back("calibration.runs: expected an integer");
    }
  }
  if (root.contains("store") && root.at("store").contains("prune_controls")) {
    const json& p = root.at("store").at("prune_controls");
    if (p.is_boolean()) cfg.prune_controls = p.get<bool>();
    else r.failures.push_back("store.prune_controls: expected a boolean");
  }
  if (root.contains("subsystems")) {
    const json& subs = root.at("subsystems");
    if (subs.contains("outer")) r.subsystem(subs.at("outer"), "subsystems.outer", cfg.outer);
    if (subs.contains("inner")) {
      const json& in = subs.at("inner");
      if (!in.is_array()) {
        r.failures.push_back("subsystems.inner: expected an array");
      } else {
        std::vector<SubsystemConfig> merged;
        for (std::size_t i = 0; i < in.size(); ++i) {
          SubsystemConfig base = i < cfg.inner.size() ? cfg.inner[i] : cfg.inner.front();
          r.subsystem(in[i], "subsystems.inner[" + std::to_string(i) + "]", base);
          merged.push_back(std::move(base));
        }
        cfg.inner = std::move(merged);
      }
    }
  }
  if (!r.failures.empty()) throw ConfigError(std::move(r.failures));
  validate(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ScenarioConfig& cfg) {
  json j;
  j["horizon_s"] = to_seconds(cfg.horizon);
  j["seed"] = cfg.seed;
  j["plant_mode"] = to_string(cfg.plant_mode);
  j["checkpoint_hz"] = cfg.checkpoint_hz;
  const RobotParams& r = cfg.robot;
  j["robot"] = {{"R_w", r.R_w}, {"L_w", r.L_w}, {"l", r.l}, {"k1_gain", r.k1_gain},
                {"k2_gain", r.k2_gain}, {"motor_R", r.motor_R}, {"motor_L", r.motor_L},
                {"K_tor", r.K_tor}, {"K_emf", r.K_emf}, {"K_fric", r.K_fric}, {"J", r.J},
                {"Kp", r.Kp}, {"Kd", r.Kd}, {"Ki", r.Ki}, {"integral_limit", r.integral_limit}};
  j["analysis"] = {{"delta_s", to_seconds(cfg.delta)}, {"k_sigma", cfg.k_sigma}};
  j["calibration"] = {{"seed", cfg.calibration.seed}, {"runs", cfg.calibration.runs}};
  j["store"] = {{"prune_controls", cfg.prune_controls}};
  json inner = json::array();
  for (const SubsystemConfig& s : cfg.inner) inner.push_back(to_json(s));
  j["subsystems"] = {{"outer", to_json(cfg.outer)}, {"inner", inner}};
  return j.dump(2) + "\n";
}

std::vector<int> anomalous_state_indices(const SubsystemModel& model, const SubsystemConfig& sub) {
  std::vector<int> flagged(static_cast<std::size_t>(model.n_y), 0);
  for (const AnomalyWindow& w : sub.anomalies) {
    for (std::size_t i = 0; i < w.gamma.size() && i < flagged.size(); ++i) flagged[i] |= w.gamma[i];
  }
  const Matrix C = model.jac_C(model.mu0, Vector::Zero(model.n_u));
  std::vector<int> out;
  for (int x = 0; x < model.n_x; ++x) {
    for (int y = 0; y < model.n_y; ++y) {
      if (flagged[static_cast<std::size_t>(y)] != 0 && C(y, x) != 0.0) {
        out.push_back(x);
        break;
      }
    }
  }
  return out;
}

SubsystemModel build_model(const ScenarioConfig& cfg, const SubsystemConfig& sub, bool outer) {
  SubsystemModel m = outer ? make_bicycle_model(sub.id, sub.dt) : make_motor_model(sub.id, cfg.robot, sub.dt);
  m.Q = sub.Q;
  m.R = sub.R;
  m.mu0 = sub.mu0;
  m.sigma0 = sub.sigma0;
  validate(m);
  return m;
}

BoundParams make_bound_params(const ScenarioConfig& cfg, const SubsystemConfig& sub,
                              const BoundSpec& inputs, bool outer) {
  BoundParams p;
  p.A_bar = inputs.A_bar;
  p.eps_delta = inputs.eps_delta;
  p.eps_omega = inputs.eps_omega;
  p.phi_bar = inputs.phi_bar;
  p.e_max = sub.e_max;
  p.delta = cfg.delta;
  p.mu_hz = cfg.checkpoint_hz;
  p.mu_star_hz = accuracy_optimal_rate(cfg);
  p.tick = sub.dt;
  p.q_indices = anomalous_state_indices(build_model(cfg, sub, outer), sub);
  p.validate();
  return p;
}

}  // namespace rfr
