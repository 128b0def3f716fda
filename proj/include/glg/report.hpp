#pragma once

// CSV and JSON reports, plus CSV matrix files for recovered artifacts.

#include "glg/experiment.hpp"

#include <string>
#include <vector>

namespace glg::cli {

/// Columns of the CSV report for these rows. Metric columns cover the
/// metrics present in any row; wall time appears only when recorded.
std::vector<std::string> csv_columns(const std::vector<ReportRow>& rows);

std::string format_csv(const std::vector<ReportRow>& rows);

/// {"config": ..., "rows": [...]}; the config makes the run reproducible.
nlohmann::json report_json(const ExperimentConfig& config, const std::vector<ReportRow>& rows);
std::vector<ReportRow> rows_from_json(const nlohmann::json& doc);

/// Writes <dir>/report.<format> and returns its path.
std::string emit_report(const ExperimentConfig& config, const std::vector<ReportRow>& rows,
                        const std::string& format, const std::string& dir);

std::vector<ReportRow> load_report_json(const std::string& path);

void write_matrix_csv(const num::Matrix& m, const std::string& path);
num::Matrix read_matrix_csv(const std::string& path);

}  // namespace glg::cli
