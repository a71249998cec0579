#include "liftnet/trace.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace liftnet {

namespace {

// Shortest round-trip decimal form, deterministic across runs.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace CSV: " + path);
  out << "iter,objective,du,dV,dW,theta";
  for (const auto& name : trace.nnz_names) out << ",nnz_" << name;
  out << "\n";
  for (const auto& row : trace.rows) {
    out << row.iter << ',' << fmt(row.objective) << ',' << fmt(row.du) << ','
        << fmt(row.dV) << ',' << fmt(row.dW) << ',' << fmt(row.theta);
    for (double z : row.nnz) out << ',' << fmt(z);
    out << "\n";
  }
}

void write_timing_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write timing CSV: " + path);
  out << "iter,seconds\n";
  for (const auto& row : trace.rows) {
    out << row.iter << ',' << fmt(row.seconds) << "\n";
  }
}

TrainTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace CSV: " + path);
  TrainTrace trace;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty trace CSV: " + path);
  }
  {
    std::istringstream header(line);
    std::string col;
    int idx = 0;
    while (std::getline(header, col, ',')) {
      if (idx >= 6) {
        if (col.rfind("nnz_", 0) != 0) {
          throw std::runtime_error("unexpected trace column '" + col + "' in " +
                                   path);
        }
        trace.nnz_names.push_back(col.substr(4));
      }
      ++idx;
    }
    if (idx < 6) throw std::runtime_error("malformed trace header: " + path);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != 6 + trace.nnz_names.size()) {
      throw std::runtime_error("malformed trace row in " + path);
    }
    TrainTraceRow row;
    row.iter = static_cast<int>(cells[0]);
    row.objective = cells[1];
    row.du = cells[2];
    row.dV = cells[3];
    row.dW = cells[4];
    row.theta = cells[5];
    row.nnz.assign(cells.begin() + 6, cells.end());
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

}  // namespace liftnet
