#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bsgd/operators.hpp"
#include "bsgd/solver.hpp"

namespace bsgd {

/// Shortest round-trip decimal representation ('.' separator, locale-free).
std::string format_double(double v);

/// Row-major CSV, one matrix row per line.
void write_matrix_csv(const std::filesystem::path& path, const MatrixRef& m);
/// Throws ParseError (with line number) on ragged rows or bad numbers and
/// IoError when the file cannot be read.
Matrix read_matrix_csv(const std::filesystem::path& path);

/// One value per line.
void write_vector_csv(const std::filesystem::path& path, const VectorRef& v);
/// Accepts one value per line or a single row.
Vector read_vector_csv(const std::filesystem::path& path);

/// Header `epoch,objective,residual,bregman,delta1,delta2,step`.
void write_record_csv(const std::filesystem::path& path, const ConvergenceRecord& record);
std::string record_csv(const ConvergenceRecord& record);

/// 8-bit binary PGM (P5) of a row-major image, min-max scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const VectorRef& image, int width, int height);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static SVG line chart; the ordinate is log10-scaled when log_y is set
/// (non-positive values are dropped).
std::string svg_line_plot(const std::string& title, const std::vector<PlotSeries>& series,
                          bool log_y);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bsgd
