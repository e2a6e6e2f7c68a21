#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "safeteleop/detail/format.hpp"
#include "safeteleop/harness.hpp"

namespace safeteleop {

namespace {

constexpr const char* kHeader =
    "k,x,y,z,u_teleop_x,u_teleop_y,u_teleop_z,u_filtered_x,u_filtered_y,u_filtered_z,h_eff,status";

void append_vec(std::string& line, const Eigen::Vector3d& v) {
  for (int a = 0; a < 3; ++a) {
    line.push_back(',');
    detail::append_number(line, v[a]);
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void export_csv(const TrialLog& log, std::ostream& os) {
  os << kHeader << '\n';
  std::string line;
  for (const StepRecord& r : log.records) {
    line = std::to_string(r.k);
    append_vec(line, r.x);
    append_vec(line, r.u_teleop);
    append_vec(line, r.u_filtered);
    line.push_back(',');
    detail::append_number(line, r.h_eff);
    line.push_back(',');
    line += to_string(r.status);
    line.push_back('\n');
    os << line;
  }
  if (!os) throw std::runtime_error("failed to write trial log");
}

void export_csv(const TrialLog& log, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  export_csv(log, os);
}

TrialLog read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kHeader) throw std::runtime_error("trial log header mismatch");
  TrialLog log;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 12) throw std::runtime_error("trial log row has " + std::to_string(f.size()) + " fields");
    StepRecord r;
    r.k = std::stoll(f[0]);
    for (int a = 0; a < 3; ++a) {
      r.x[a] = detail::parse_number(f[1 + a]);
      r.u_teleop[a] = detail::parse_number(f[4 + a]);
      r.u_filtered[a] = detail::parse_number(f[7 + a]);
    }
    r.h_eff = detail::parse_number(f[10]);
    r.status = parse_status(f[11]);
    log.records.push_back(r);
  }
  return log;
}

void export_slice(const TesdfField& field, Axis axis, double coord, const std::string& path) {
  const Eigen::MatrixXd values = slice(field, axis, coord);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_slice_csv(os, values);
}

}  // namespace safeteleop
