#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "latentsteg/evaluation.hpp"

namespace lsteg {

nlohmann::json fit_to_json(const GaussianFit& f);
GaussianFit fit_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const ErrorReport& report);

/// Table-shaped CSVs; the P_E grid is in percent with one decimal.
std::string pe_table_csv(const ErrorReport& report);
std::string accuracy_table_csv(const ErrorReport& report);
std::string pe_vs_batch_csv(const ErrorReport& report);
/// Norm histogram of one class with the expected count under its Gaussian fit.
std::string histogram_csv(const ErrorReport& report, bool stego);

/// Writes report.json, pe_table.csv, accuracy_table.csv, hist_cover.csv,
/// hist_stego.csv and pe_vs_batch.csv into `dir` (created if needed).
/// Returns the written paths.
std::vector<std::filesystem::path> emit_report(const ErrorReport& report,
                                               const std::filesystem::path& dir);

}  // namespace lsteg
