#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rfr/simulator.hpp"
#include "rfr/trace_csv.hpp"

namespace rfr {

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;
constexpr int kSafeStop = 3;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<std::string> plant_mode;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("config", a.config, "scenario JSON file")->required();
  cmd->add_option("--seed", a.seed, "override the master seed");
  cmd->add_option("--out-dir", a.out_dir, "directory for CSV and store output")->capture_default_str();
  cmd->add_option("--plant-mode", a.plant_mode, "ideal or coupled");
}

ScenarioConfig load_with_overrides(const CommonArgs& a) {
  ScenarioConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.plant_mode) cfg.plant_mode = plant_mode_from_string(*a.plant_mode);
  validate(cfg);
  return cfg;
}

std::string vec_str(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v(i));
  return s + "]";
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path().empty() ? "." : p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  f << text;
}

int cmd_run(const CommonArgs& a, std::ostream& out) {
  const ScenarioConfig cfg = load_with_overrides(a);
  const SimulationTrace trace = run_scenario(cfg);
  for (const auto& p : emit_csv(trace, a.out_dir)) out << "wrote " << p.string() << "\n";
  const std::filesystem::path store_path = std::filesystem::path(a.out_dir) / "store.bin";
  trace.store->save(store_path);
  out << "wrote " << store_path.string() << "\n";
  for (const RecoveryEpisode& e : trace.episodes) {
    out << "recovery " << e.subsystem << " detected=" << format_double(to_seconds(e.detected_at))
        << " k1=" << format_double(to_seconds(e.k1))
        << " last=" << format_double(to_seconds(e.last_tick)) << "\n";
  }
  if (trace.safe_stop) {
    out << "safe stop at t=" << format_double(to_seconds(trace.safe_stop->t)) << " in "
        << trace.safe_stop->subsystem << " (" << to_string(trace.safe_stop->reason) << ")\n";
    return kSafeStop;
  }
  return kOk;
}

int cmd_bounds(const CommonArgs& a, std::ostream& out) {
  const ScenarioConfig cfg = with_calibrated_bounds(load_with_overrides(a));
  std::ostringstream csv;
  csv << "subsystem,onset,k1,k1_optimal,t_max,t_max_capped,violated_at_zero,rsee_bound_at_detection,"
         "gap_bound_at_detection,ee_bound\n";
  const std::vector<const SubsystemConfig*> subs = cfg.subsystems();
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const SubsystemConfig& s = *subs[i];
    const BoundParams bp = make_bound_params(cfg, s, *s.bounds, i == 0);
    out << s.id << ": A_bar diag " << vec_str(bp.A_bar.diagonal()) << ", eps_delta "
        << vec_str(bp.eps_delta) << ", eps_omega " << vec_str(bp.eps_omega) << ", phi_bar "
        << vec_str(bp.phi_bar) << ", mu " << format_double(bp.mu_hz) << " Hz, mu* "
        << format_double(bp.mu_star_hz) << " Hz\n";
    for (const AnomalyWindow& w : s.anomalies) {
      const Micros k1 = checkpoint_time_before_anomaly(w.t_start, bp.delta, bp.mu_hz);
      const Micros k1s = checkpoint_time_before_anomaly(w.t_start, bp.delta, bp.mu_star_hz);
      const TmaxResult tm = max_tolerable_duration(bp, w.t_start, cfg.horizon);
      Micros detect = w.t_start + s.ads.detection_time;
      if (detect.count() % s.dt.count() != 0) detect += s.dt - Micros{detect.count() % s.dt.count()};
      const Vector rsee = rsee_bound_at(bp, detect, k1);
      const Vector gap = accuracy_resource_gap_bound(bp, detect, w.t_start);
      Vector rsee_q(static_cast<Eigen::Index>(bp.q_indices.size()));
      for (std::size_t q = 0; q < bp.q_indices.size(); ++q)
        rsee_q(static_cast<Eigen::Index>(q)) = rsee(bp.q_indices[q]);
      csv << s.id << "," << format_double(to_seconds(w.t_start)) << ","
          << format_double(to_seconds(k1)) << "," << format_double(to_seconds(k1s)) << ","
          << format_double(to_seconds(tm.t_max)) << "," << tm.capped << "," << tm.violated_at_zero
          << "," << vec_str(rsee_q) << "," << vec_str(gap) << "," << vec_str(bp.eps_delta) << "\n";
    }
  }
  out << csv.str();
  write_file(std::filesystem::path(a.out_dir) / "bounds.csv", csv.str());
  return kOk;
}

int cmd_compare(const CommonArgs& a, std::ostream& out) {
  const ScenarioConfig base = with_calibrated_bounds(load_with_overrides(a));
  ScenarioConfig optimal = base;
  optimal.checkpoint_hz = accuracy_optimal_rate(base);
  const SimulationTrace tr = run_scenario(base);
  const SimulationTrace to = run_scenario(optimal);

  std::ostringstream csv;
  csv << "subsystem,t,element,empirical_gap,gap_bound\n";
  int violations = 0;
  std::size_t rows = 0;
  const std::vector<const SubsystemConfig*> subs = base.subsystems();
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const SubsystemConfig& s = *subs[i];
    const BoundParams bp = make_bound_params(base, s, *s.bounds, i == 0);
    const auto& ra = tr.subsystems[i].records;
    const auto& rb = to.subsystems[i].records;
    const AnomalySchedule schedule(s.anomalies, static_cast<int>(s.R.rows()));
    for (std::size_t k = 0; k < ra.size() && k < rb.size(); ++k) {
      if (!ra[k].x_rf || !rb[k].x_rf) continue;
      const AnomalyWindow* w = schedule.active(ra[k].t);
      if (w == nullptr) continue;
      const Vector bound_full = [&] {
        Vector g = Vector::Zero(bp.n_x());
        const Vector gq = accuracy_resource_gap_bound(bp, ra[k].t, w->t_start);
        for (std::size_t q = 0; q < bp.q_indices.size(); ++q) g(bp.q_indices[q]) = gq(static_cast<Eigen::Index>(q));
        return g;
      }();
      for (int q : bp.q_indices) {
        const double emp = std::abs((*ra[k].x_rf)(q) - (*rb[k].x_rf)(q));
        if (emp > bound_full(q)) ++violations;
        csv << s.id << "," << format_double(to_seconds(ra[k].t)) << ","
            << tr.subsystems[i].state_names[static_cast<std::size_t>(q)] << "," << format_double(emp)
            << "," << format_double(bound_full(q)) << "\n";
        ++rows;
      }
    }
  }
  write_file(std::filesystem::path(a.out_dir) / "compare.csv", csv.str());
  out << "compared mu=" << format_double(base.checkpoint_hz) << " Hz against mu*="
      << format_double(optimal.checkpoint_hz) << " Hz: " << rows << " samples, " << violations
      << " above the gap bound\n";
  return kOk;
}

int cmd_checkpoints(const CommonArgs& a, std::ostream& out) {
  const ScenarioConfig cfg = load_with_overrides(a);
  RunOptions opt;
  opt.skip_bounds = true;
  const SimulationTrace trace = run_scenario(cfg, opt);
  std::ostringstream csv;
  csv << "event,subsystem,t,checkpoint_t\n";
  for (const SubsystemTrace& st : trace.subsystems) {
    for (const TickRecord& r : st.records) {
      if (r.ckpt_event) csv << "create," << st.id << "," << format_double(to_seconds(r.t)) << ",\n";
    }
  }
  for (const RecoveryEpisode& e : trace.episodes) {
    csv << "use," << e.subsystem << "," << format_double(to_seconds(e.detected_at)) << ","
        << format_double(to_seconds(e.k1)) << "\n";
  }
  out << csv.str();
  write_file(std::filesystem::path(a.out_dir) / "checkpoints.csv", csv.str());
  return trace.safe_stop ? kSafeStop : kOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Checkpointing and roll-forward recovery simulator", "rfr"};
  bool print_default = false;
  app.add_flag("--print-default", print_default, "print the robot case-study config with calibrated bounds");
  CommonArgs args;
  CLI::App* run = app.add_subcommand("run", "simulate and write per-loop CSVs and the store");
  CLI::App* bounds = app.add_subcommand("bounds", "evaluate the analytic bounds without simulating");
  CLI::App* compare = app.add_subcommand("compare", "paired runs at mu and mu*, empirical gap vs bound");
  CLI::App* checkpoints = app.add_subcommand("checkpoints", "checkpoint creation and usage table");
  for (CLI::App* c : {run, bounds, compare, checkpoints}) add_common(c, args);
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kInvalid;
  }

  try {
    if (print_default) {
      out << dump_config(with_calibrated_bounds(build_case_study()));
      return kOk;
    }
    if (run->parsed()) return cmd_run(args, out);
    if (bounds->parsed()) return cmd_bounds(args, out);
    if (compare->parsed()) return cmd_compare(args, out);
    if (checkpoints->parsed()) return cmd_checkpoints(args, out);
    err << app.help();
    return kInvalid;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace rfr
