#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rfr/simulator.hpp"

namespace rfr {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

std::vector<std::string> csv_header(const SubsystemTrace& st);

/// Writes <dir>/<subsystem id>.csv for every loop and returns the paths.
/// Missing values (x_rf and rsee_bound outside recovery) are empty cells.
std::vector<std::filesystem::path> emit_csv(const SimulationTrace& trace,
                                            const std::filesystem::path& dir);

/// CSV text for one loop.
std::string csv_text(const SubsystemTrace& st);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

}  // namespace rfr
