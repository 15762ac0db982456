#pragma once

/// \file report.hpp
/// \brief Run-directory artefacts: CSV tables, SVG plots, the consolidated report.

#include <filesystem>
#include <string>

#include "carlab/cli/checks.hpp"

namespace carlab::cli {

/// Header row then one line per row, every value printed with %.17g, so equal
/// tables give byte-identical text.
std::string to_csv(const Table& t);

/// Line plot of plot_y against plot_x; non-positive values are dropped on log axes.
std::string to_svg(const Table& t);

/// Writes <name>.csv and, when the table has plot columns, <name>.svg.
void write_table(const std::filesystem::path& dir, const Table& t);

/// Writes the whole string to path, replacing any previous content.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Reads summary.json and the tables it lists, writes report.txt and returns
/// its text. Throws when the directory lacks either.
std::string emit_report(const std::filesystem::path& run_dir);

}  // namespace carlab::cli
