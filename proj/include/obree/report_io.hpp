#pragma once

// Report files. CSV format writes estimates.csv (long format), summary.csv,
// diagnostics.csv and manifest.json; JSON format writes report.json and
// manifest.json. Numbers use %.17g so every double survives a round trip.

#include "obree/harness.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace obree {

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(std::string_view name);

/// Exact text of each file, for byte comparisons without touching disk.
std::string estimates_csv(const ExperimentReport& report);
std::string summary_csv(const ExperimentReport& report);
std::string diagnostics_csv(const ExperimentReport& report);
std::string manifest_json(const ExperimentConfig& config);
std::string report_json(const ExperimentReport& report);

/// Creates `dir` if needed. Throws std::runtime_error naming the path on I/O failure.
void export_report(const ExperimentReport& report, const std::filesystem::path& dir,
                   ReportFormat format);

/// Reads a directory written by export_report (either format) and recomputes summaries.
ExperimentReport read_report(const std::filesystem::path& dir);

/// %.17g, or "NA" for NaN.
std::string format_double(double x);

}  // namespace obree
