#include "bsgd/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "bsgd/errors.hpp"

namespace bsgd {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_row(const std::string& line, std::size_t line_no,
                              const std::filesystem::path& path) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    std::size_t b = pos;
    std::size_t e = end;
    while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    double v = 0.0;
    const char* first = line.data() + b;
    const char* last = line.data() + e;
    if (b < e && line[b] == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (b == e || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": invalid number '" +
                       line.substr(b, e - b) + "'");
    }
    row.push_back(v);
    pos = end + 1;
  }
  return row;
}

std::vector<std::vector<double>> parse_csv(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.push_back(parse_row(line, line_no, path));
    if (rows.size() > 1 && rows.back().size() != rows.front().size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(rows.front().size()) + " columns, found " +
                       std::to_string(rows.back().size()));
    }
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data");
  return rows;
}

}  // namespace

void write_matrix_csv(const std::filesystem::path& path, const MatrixRef& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  write_text(path, out);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = parse_csv(path);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void write_vector_csv(const std::filesystem::path& path, const VectorRef& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += format_double(v[i]);
    out += '\n';
  }
  write_text(path, out);
}

Vector read_vector_csv(const std::filesystem::path& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.cols() != 1 && m.rows() != 1) {
    throw ParseError(path.string() + ": expected a single row or column");
  }
  return m.cols() == 1 ? Vector(m.col(0)) : Vector(m.row(0).transpose());
}

std::string record_csv(const ConvergenceRecord& record) {
  std::string out = "epoch,objective,residual,bregman,delta1,delta2,step\n";
  for (const auto& r : record.rows) {
    out += std::to_string(r.epoch);
    for (double v : {r.objective, r.residual, r.bregman, r.delta1, r.delta2, r.step}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_record_csv(const std::filesystem::path& path, const ConvergenceRecord& record) {
  write_text(path, record_csv(record));
}

void write_pgm(const std::filesystem::path& path, const VectorRef& image, int width, int height) {
  if (width < 1 || height < 1 || image.size() != static_cast<Eigen::Index>(width) * height) {
    throw DimensionError("pgm: image size does not match width * height");
  }
  const double lo = image.minCoeff();
  const double hi = image.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const double scaled = std::round(255.0 * (image[i] - lo) / span);
    out += static_cast<char>(static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0)));
  }
  write_text(path, out);
}

std::string svg_line_plot(const std::string& title, const std::vector<PlotSeries>& series,
                          bool log_y) {
  constexpr double kWidth = 720.0;
  constexpr double kHeight = 440.0;
  constexpr double kLeft = 70.0;
  constexpr double kRight = 160.0;
  constexpr double kTop = 40.0;
  constexpr double kBottom = 50.0;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  auto transform = [&](double y) { return log_y ? std::log10(y) : y; };
  double x_min = INFINITY, x_max = -INFINITY, y_min = INFINITY, y_max = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (log_y && !(s.y[i] > 0.0)) continue;
      if (!std::isfinite(s.y[i])) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, transform(s.y[i]));
      y_max = std::max(y_max, transform(s.y[i]));
    }
  }
  if (!std::isfinite(x_min)) x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (transform(y) - y_min) / (y_max - y_min)) * ph; };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto label = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return std::string(buf);
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
         fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fmt(kLeft) + "\" y=\"24\" font-size=\"14\">" + title + "</text>\n";
  out += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) +
         "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fy = y_min + (y_max - y_min) * t / 4.0;
    const double ypos = kTop + (1.0 - t / 4.0) * ph;
    const double shown = log_y ? std::pow(10.0, fy) : fy;
    out += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(ypos + 4) +
           "\" text-anchor=\"end\">" + label(shown) + "</text>\n";
    const double fx = x_min + (x_max - x_min) * t / 4.0;
    out += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(kTop + ph + 18) +
           "\" text-anchor=\"middle\">" + label(fx) + "</text>\n";
  }
  out += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 10) +
         "\" text-anchor=\"middle\">epoch</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if ((log_y && !(s.y[i] > 0.0)) || !std::isfinite(s.y[i])) continue;
      points += fmt(px(s.x[i])) + "," + fmt(py(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 16.0 + 18.0 * static_cast<double>(k);
    out += "<line x1=\"" + fmt(kWidth - kRight + 12) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
           fmt(kWidth - kRight + 32) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fmt(kWidth - kRight + 38) + "\" y=\"" + fmt(ly) + "\">" + s.label +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace bsgd
