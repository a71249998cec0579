#pragma once

#include <string>
#include <vector>

namespace liftnet {

// One row per completed iteration (= one full pass over the training set).
// du/dV/dW are the summed per-block delta norms between consecutive
// iterates, the quantities bounded by L theta_t/(1-theta_t) in the
// convergence analysis. nnz holds the fraction of entries with |w| > 1e-6
// per learnable hidden matrix, in canonical (layer, source) order.
struct TrainTraceRow {
  int iter = 0;
  double objective = 0.0;
  double du = 0.0;
  double dV = 0.0;
  double dW = 0.0;
  double theta = 0.0;
  double seconds = 0.0;
  std::vector<double> nnz;
};

struct TrainTrace {
  std::vector<TrainTraceRow> rows;
  std::vector<std::string> nnz_names;  // e.g. "w1_0"
  bool aborted = false;
  std::string abort_reason;
};

constexpr double kNonzeroThreshold = 1e-6;

// Deterministic trace CSV: iter,objective,du,dV,dW,theta,nnz_...
// Wall-clock timing is not part of this file so that identical runs write
// byte-identical traces; write_timing_csv carries the measured seconds.
void write_trace_csv(const TrainTrace& trace, const std::string& path);

// iter,seconds sidecar with the measured per-iteration wall time.
void write_timing_csv(const TrainTrace& trace, const std::string& path);

// Parses a trace written by write_trace_csv (used by the comparison tool).
TrainTrace read_trace_csv(const std::string& path);

}  // namespace liftnet
