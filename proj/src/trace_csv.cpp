#include "rfr/trace_csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace rfr {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("not a number: \"" + s + "\"");
  return v;
}

namespace {

void add_names(std::vector<std::string>& h, const std::string& prefix,
               const std::vector<std::string>& names) {
  for (const std::string& n : names) h.push_back(prefix + n);
}

std::vector<std::string> flag_names(const SubsystemTrace& st) {
  if (!st.records.empty() && st.records.front().ads_flags.size() != st.sensor_names.size())
    return {"any"};
  return st.sensor_names;
}

void put_vector(std::string& line, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) line += "," + format_double(v(i));
}

void put_optional(std::string& line, const std::optional<Vector>& v, std::size_t n) {
  if (v) {
    put_vector(line, *v);
  } else {
    for (std::size_t i = 0; i < n; ++i) line += ",";
  }
}

void put_ints(std::string& line, const std::vector<int>& v) {
  for (int x : v) line += "," + std::to_string(x);
}

}  // namespace

std::vector<std::string> csv_header(const SubsystemTrace& st) {
  std::vector<std::string> h{"t"};
  add_names(h, "x_true_", st.state_names);
  add_names(h, "y_meas_", st.sensor_names);
  add_names(h, "x_hat_", st.state_names);
  add_names(h, "x_rf_", st.state_names);
  add_names(h, "x_ekf_", st.state_names);
  add_names(h, "recovered_mask_", st.state_names);
  add_names(h, "u_", st.control_names);
  add_names(h, "ads_flag_", flag_names(st));
  h.push_back("ckpt_event");
  add_names(h, "rsee_bound_", st.state_names);
  add_names(h, "ee_bound_", st.state_names);
  h.push_back("safe_stop");
  return h;
}

std::string csv_text(const SubsystemTrace& st) {
  const std::size_t n = st.state_names.size();
  std::string out;
  const std::vector<std::string> header = csv_header(st);
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (const TickRecord& r : st.records) {
    std::string line = format_double(to_seconds(r.t));
    put_vector(line, r.x_true);
    put_vector(line, r.y_meas);
    put_vector(line, r.x_hat);
    put_optional(line, r.x_rf, n);
    put_vector(line, r.x_ekf);
    put_ints(line, r.mask);
    put_vector(line, r.u);
    put_ints(line, r.ads_flags);
    line += r.ckpt_event ? ",1" : ",0";
    put_optional(line, r.rsee_bound, n);
    put_optional(line, r.ee_bound, n);
    line += r.safe_stop ? ",1" : ",0";
    out += line + "\n";
  }
  return out;
}

std::vector<std::filesystem::path> emit_csv(const SimulationTrace& trace,
                                            const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> paths;
  for (const SubsystemTrace& st : trace.subsystems) {
    const std::filesystem::path p = dir / (st.id + ".csv");
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out << csv_text(st);
    if (!out) throw std::runtime_error("write failed for " + p.string());
    paths.push_back(p);
  }
  return paths;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::out_of_range("no CSV column " + name);
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace rfr
