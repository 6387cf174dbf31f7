#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rflab/diagnostics.hpp"

namespace rflab {

// 17-significant-digit decimal rendering used by every emitted file.
std::string format_g17(double v);

// trajectory.csv: header
//   t,mu,E,F,N,sup_S,sup_H,sup_Rm,res_divfv,res_comm,res_sev,res_heq
// N is empty when absent; res_sev/res_heq are empty at endpoint records.
std::string trajectory_csv_text(const std::vector<DiagnosticsRecord>& records);
void write_trajectory_csv(const std::string& path, const std::vector<DiagnosticsRecord>& records);
std::string csv_row(const DiagnosticsRecord& d);
extern const char* kTrajectoryCsvHeader;

// state snapshots
struct Snapshot {
  int record_index = 0;
  TrajectoryRecord record;
  StepStats stats;
  // previous record (metric + potential only); lets a resumed run rebuild
  // centered time differences across the restart point
  std::optional<double> prev_t;
  std::optional<MetricState> prev_state;
  std::optional<ScalarField> prev_f;
};

void write_snapshot(const std::string& path, const Snapshot& snap);
Snapshot read_snapshot(const std::string& path);

void write_report_json(const std::string& path, const std::vector<BoundCheckReport>& reports);

// Minimal static SVG line plot (one or more series over time).
struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};
void write_plot_svg(const std::string& path, const std::string& title,
                    const std::vector<PlotSeries>& series);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace rflab
