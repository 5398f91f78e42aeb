#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "likelihood.hpp"
#include "results.hpp"
#include "rng.hpp"
#include "sample_matrix.hpp"
#include "solver.hpp"

namespace rcdens {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// one CSV record; quoted fields have their quotes stripped
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (quoted) {
      if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

// empty cells and nan spellings become NaN (the row is dropped later);
// anything else non-numeric is an error
inline double parse_cell(const std::string& raw, std::size_t line_no) {
  const std::string s = trim(raw);
  if (s.empty() || s == "nan" || s == "NaN" || s == "NAN" || s == "NA") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw std::runtime_error("csv: non-numeric cell '" + s + "' on line " +
                             std::to_string(line_no));
  }
  return v;
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

struct ColumnTransform {
  double scale = 1.0;
  double offset = 0.0;
};

struct CsvOptions {
  // columns of the file to keep, in output order [X..., Y]; empty keeps all
  std::vector<int> columns;
  // per selected column, applied as value*scale + offset
  std::vector<std::optional<ColumnTransform>> transforms;
  bool has_header = false;
  bool add_intercept = false;
  std::optional<std::size_t> subsample;
  std::uint64_t seed = 0;
};

// CSV ingestion: select columns, drop rows with non-finite values, apply the
// affine transforms, optionally prepend the all-ones column and draw a
// uniform subsample without replacement.
inline SampleMatrix read_csv(const std::string& path, const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (opts.has_header && line_no == 1) continue;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    std::vector<double> row;
    if (opts.columns.empty()) {
      row.reserve(fields.size());
      for (const std::string& f : fields) row.push_back(detail::parse_cell(f, line_no));
    } else {
      row.reserve(opts.columns.size());
      for (int c : opts.columns) {
        if (c < 0 || static_cast<std::size_t>(c) >= fields.size()) {
          throw std::runtime_error("csv: column " + std::to_string(c) + " missing on line " +
                                   std::to_string(line_no));
        }
        row.push_back(detail::parse_cell(fields[static_cast<std::size_t>(c)], line_no));
      }
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw std::runtime_error("csv: ragged row on line " + std::to_string(line_no));
    }
    bool finite = true;
    for (double v : row) {
      if (!std::isfinite(v)) {
        finite = false;
        break;
      }
    }
    if (finite) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv: no usable rows in '" + path + "'");
  if (!opts.transforms.empty() && opts.transforms.size() != width) {
    throw std::runtime_error("csv: one transform slot per selected column required");
  }

  for (auto& row : rows) {
    for (std::size_t j = 0; j < opts.transforms.size(); ++j) {
      if (opts.transforms[j]) {
        row[j] = row[j] * opts.transforms[j]->scale + opts.transforms[j]->offset;
      }
    }
  }

  if (opts.subsample) {
    if (*opts.subsample > rows.size()) {
      throw std::runtime_error("csv: subsample exceeds the " + std::to_string(rows.size()) +
                               " surviving rows");
    }
    Rng rng(opts.seed);
    const std::vector<std::size_t> keep = rng.sample_indices(rows.size(), *opts.subsample);
    std::vector<std::vector<double>> picked;
    picked.reserve(keep.size());
    for (std::size_t i : keep) picked.push_back(std::move(rows[i]));
    rows = std::move(picked);
  }

  const std::size_t cols = width + (opts.add_intercept ? 1 : 0);
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (opts.add_intercept) data.push_back(1.0);
    data.insert(data.end(), row.begin(), row.end());
  }
  return SampleMatrix(rows.size(), cols, std::move(data));
}

inline void write_csv(const std::string& path, const SampleMatrix& sample) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < sample.rows(); ++i) {
    for (std::size_t j = 0; j < sample.cols(); ++j) {
      if (j > 0) out << ',';
      out << detail::format_g17(sample(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("csv: write failed for '" + path + "'");
}

// --- density dump ----------------------------------------------------------
//
// Line-oriented text format (one file per estimate):
//   rcdens-density v1
//   dim <d>
//   k <cells per axis>
//   range <axis> <lo> <hi>          (one line per axis)
//   alpha <value>
//   alpha_method <User|Lepskii|CV>
//   penalty <none|l2|h1|entropy>
//   n <sample rows>
//   timestamp <opaque string>
//   values <m>
//   <m density values, %.17g, one per line, flat row-major order>
// Values round-trip losslessly; the header reconstructs the grid.

struct DensityDump {
  DensityEstimate density;
  double alpha = 0.0;
  AlphaMethod alpha_method = AlphaMethod::User;
  PenaltyKind penalty = PenaltyKind::None;
  std::size_t n_sample = 0;
  std::string timestamp;
};

inline void write_density_dump(std::ostream& out, const DensityDump& dump) {
  const Grid& g = dump.density.grid;
  out << "rcdens-density v1\n";
  out << "dim " << g.dim() << '\n';
  out << "k " << g.points_per_axis() << '\n';
  for (int a = 0; a < g.dim(); ++a) {
    out << "range " << a << ' ' << detail::format_g17(g.range(a).lo) << ' '
        << detail::format_g17(g.range(a).hi) << '\n';
  }
  out << "alpha " << detail::format_g17(dump.alpha) << '\n';
  out << "alpha_method " << to_string(dump.alpha_method) << '\n';
  out << "penalty " << to_string(dump.penalty) << '\n';
  out << "n " << dump.n_sample << '\n';
  out << "timestamp " << dump.timestamp << '\n';
  out << "values " << dump.density.values.size() << '\n';
  for (double v : dump.density.values) out << detail::format_g17(v) << '\n';
}

inline void write_density_dump(const std::string& path, const DensityDump& dump) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump: cannot open '" + path + "' for writing");
  write_density_dump(out, dump);
  if (!out) throw std::runtime_error("dump: write failed for '" + path + "'");
}

inline DensityDump read_density_dump(std::istream& in) {
  auto expect = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dump: truncated file");
    if (line.rfind(key, 0) != 0) {
      throw std::runtime_error("dump: expected '" + key + "' line, got '" + line + "'");
    }
    return detail::trim(line.substr(key.size()));
  };

  std::string header;
  if (!std::getline(in, header) || header != "rcdens-density v1") {
    throw std::runtime_error("dump: unrecognized header");
  }
  const int dim = std::stoi(expect("dim"));
  const int k = std::stoi(expect("k"));
  if (dim < 2 || dim > kMaxDim) throw std::runtime_error("dump: bad dim");
  std::vector<AxisRange> ranges;
  for (int a = 0; a < dim; ++a) {
    std::istringstream ls(expect("range"));
    int axis;
    double lo, hi;
    if (!(ls >> axis >> lo >> hi) || axis != a) throw std::runtime_error("dump: bad range line");
    ranges.push_back(AxisRange{lo, hi});
  }
  DensityDump dump;
  dump.alpha = std::stod(expect("alpha"));
  dump.alpha_method = alpha_method_from_string(expect("alpha_method"));
  dump.penalty = penalty_from_string(expect("penalty"));
  dump.n_sample = static_cast<std::size_t>(std::stoull(expect("n")));
  dump.timestamp = expect("timestamp");
  const std::size_t m = static_cast<std::size_t>(std::stoull(expect("values")));
  Grid grid(k, dim, std::move(ranges));
  if (grid.cell_count() != m) throw std::runtime_error("dump: value count does not match grid");
  std::vector<double> values(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dump: truncated values");
    values[j] = std::stod(line);
  }
  dump.density = DensityEstimate{std::move(values), std::move(grid)};
  return dump;
}

inline DensityDump read_density_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dump: cannot open '" + path + "'");
  return read_density_dump(in);
}

// --- plot data and SVG ------------------------------------------------------

enum class PlotKind { Contour, Surface };

inline const char* to_string(PlotKind k) {
  return k == PlotKind::Contour ? "contour" : "surface";
}

namespace detail {

inline const char* axis_name(int a) {
  static const char* names[] = {"b0", "b1", "b2"};
  return names[a];
}

inline void write_marginal_block(std::ostream& out, const Marginal2D& m) {
  out << "# block " << axis_name(m.axis_a) << ' ' << axis_name(m.axis_b) << '\n';
  out << "# k " << m.points_per_axis << ' ' << m.points_per_axis << '\n';
  const int k = m.points_per_axis;
  for (int i = 0; i < k; ++i) {
    const double x = m.ranges[0].lo + (i + 0.5) * m.step[0];
    for (int j = 0; j < k; ++j) {
      const double y = m.ranges[1].lo + (j + 0.5) * m.step[1];
      out << format_g17(x) << ' ' << format_g17(y) << ' '
          << format_g17(m.values[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) +
                                 static_cast<std::size_t>(j)])
          << '\n';
    }
    out << '\n';  // scanline break, gnuplot-style
  }
}

}  // namespace detail

// Gridded x/y/z triples at cell centers: one block for a 2-D density, the
// three bivariate marginals (b0,b1), (b0,b2), (b1,b2) for a 3-D one.
inline void emit_plot_data(std::ostream& out, const DensityEstimate& f, PlotKind kind) {
  out << "# rcdens plot v1\n";
  out << "# kind " << to_string(kind) << '\n';
  if (f.grid.dim() == 2) {
    detail::write_marginal_block(out, marginal_2d(f, 0, 1));
  } else {
    detail::write_marginal_block(out, marginal_2d(f, 0, 1));
    out << '\n';
    detail::write_marginal_block(out, marginal_2d(f, 0, 2));
    out << '\n';
    detail::write_marginal_block(out, marginal_2d(f, 1, 2));
  }
}

inline void emit_plot_data(const std::string& path, const DensityEstimate& f, PlotKind kind) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("plot: cannot open '" + path + "' for writing");
  emit_plot_data(out, f, kind);
  if (!out) throw std::runtime_error("plot: write failed for '" + path + "'");
}

namespace detail {

// fixed 10-level scale, dark to bright
inline const char* level_color(int level) {
  static const char* ramp[10] = {"#440154", "#482878", "#3e4a89", "#31688e", "#26828e",
                                 "#1f9e89", "#35b779", "#6ece58", "#b5de2b", "#fde725"};
  return ramp[std::clamp(level, 0, 9)];
}

inline void write_svg_marginal(std::ostream& out, const Marginal2D& m, double x_off,
                               double panel, double pad) {
  const int k = m.points_per_axis;
  double zmax = 0.0;
  for (double v : m.values) zmax = std::max(zmax, v);
  if (zmax <= 0.0) zmax = 1.0;
  const double cell = panel / k;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double z =
          m.values[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)];
      int level = static_cast<int>(std::floor(z / zmax * 10.0));
      level = std::clamp(level, 0, 9);
      const double x = x_off + pad + i * cell;
      const double y = pad + (k - 1 - j) * cell;  // axis b up the page
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
          << cell << "\" fill=\"" << level_color(level) << "\"/>\n";
    }
  }
  out << "<rect x=\"" << x_off + pad << "\" y=\"" << pad << "\" width=\"" << panel
      << "\" height=\"" << panel << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << x_off + pad << "\" y=\"" << pad + panel + 16 << "\" font-size=\"12\">"
      << axis_name(m.axis_a) << " in [" << m.ranges[0].lo << ", " << m.ranges[0].hi << "], "
      << axis_name(m.axis_b) << " in [" << m.ranges[1].lo << ", " << m.ranges[1].hi
      << "]</text>\n";
}

}  // namespace detail

// Self-contained SVG heat map with a 10-level linear color scale; 3-D
// densities render their three bivariate marginals side by side.
inline void write_svg(std::ostream& out, const DensityEstimate& f) {
  std::vector<Marginal2D> panels;
  if (f.grid.dim() == 2) {
    panels.push_back(marginal_2d(f, 0, 1));
  } else {
    panels.push_back(marginal_2d(f, 0, 1));
    panels.push_back(marginal_2d(f, 0, 2));
    panels.push_back(marginal_2d(f, 1, 2));
  }
  const double panel = 240.0, pad = 20.0;
  const double width = panels.size() * (panel + 2 * pad);
  const double height = panel + 2 * pad + 20.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    detail::write_svg_marginal(out, panels[p], static_cast<double>(p) * (panel + 2 * pad), panel,
                               pad);
  }
  out << "</svg>\n";
}

inline void write_svg(const std::string& path, const DensityEstimate& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg: cannot open '" + path + "' for writing");
  write_svg(out, f);
  if (!out) throw std::runtime_error("svg: write failed for '" + path + "'");
}

}  // namespace rcdens
