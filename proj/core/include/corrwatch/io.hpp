#pragma once

#include <string>
#include <utility>
#include <vector>

#include "corrwatch/calibrate.hpp"
#include "corrwatch/simlab.hpp"

namespace corrwatch {

// Comma-delimited UTF-8 stream file, rows = time steps, columns = variables; a first
// row that fails numeric parsing throughout is treated as a header. Returns p x T
// (columns = time). Cell errors carry 1-based physical row/column.
Matrix read_stream_csv(const std::string& path, std::vector<std::string>* names = nullptr);

void write_stream_csv(const std::string& path, const Matrix& columns_are_time,
                      const std::vector<std::string>& names = {});

struct ReportRow {
    long t = 0;
    double statistic = 0;
    double threshold = 0;
    bool alarmed = false;
    long argmax_candidate = 0;
};

struct RunReport {
    std::vector<ReportRow> rows;  // strictly increasing in t
    long first_alarm = -1;        // -1 = no alarm
    std::vector<std::pair<std::string, std::string>> config;  // echoed settings, in order
};

void write_report(const std::string& path, const RunReport& report);
RunReport read_report(const std::string& path);

// Plain-text key=value calibration file, versioned with a format tag.
struct CalibrationFile {
    int p = 0;
    DetectorConfig config;  // thresholds filled in (threshold_sum / threshold_max)
    long q = 0, M = 0;
    double gamma = 0;
    std::uint64_t seed = 0;
    CalibrationMethod method = CalibrationMethod::EmpiricalQuantile;
    CalibrationDiagnostics diagnostics;      // for the calibrated kind (Sum when combined)
    CalibrationDiagnostics diagnostics_max;  // second component when kind == Combined
    bool has_secondary = false;
};

void write_calibration(const std::string& path, const CalibrationFile& f);
CalibrationFile read_calibration(const std::string& path);

// One row per replication (seed, stopping_time, censored) plus '#' summary lines.
void write_experiment_csv(const std::string& path, const ExperimentResult& result);

}  // namespace corrwatch
