#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdfdr/types.hpp"

namespace tdfdr::csv {

//! Format a double with 17 significant digits, enough to round-trip
//! IEEE-754 binary64 exactly.
std::string format(double value);

//! `index,label,score` with label in {T, D}.
void write_competition(const CompetitionResult& result, std::ostream& out);
void write_competition(const CompetitionResult& result,
                       const std::filesystem::path& path);

CompetitionResult read_competition(std::istream& in,
                                   const std::string& source_name = "<input>");
CompetitionResult read_competition(const std::filesystem::path& path);

//! Samples-by-variables numeric matrix with a mandatory header row.
//! Column names go to `column_names` when non-null.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path,
                            std::vector<std::string>* column_names = nullptr);

//! Single numeric column; a non-numeric first line is treated as a header.
Eigen::VectorXd read_column(const std::filesystem::path& path);

//! One entry per sample, each "control" or "case"; returns true for case.
std::vector<bool> read_groups(const std::filesystem::path& path);

} // namespace tdfdr::csv
