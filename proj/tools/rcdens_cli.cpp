// Command line front end: simulate samples, estimate coefficient densities,
// refine/report/plot saved estimates.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <rcdens/rcdens.hpp>

namespace {

using nlohmann::json;

std::string iso_timestamp() {
  std::time_t t;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::time(nullptr);
  }
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::stod(cur));
  return out;
}

struct SimFlags {
  std::size_t n = 1000;
  int dim = 2;
  std::uint64_t seed = 0;
  double x_low = -2.0, x_high = 2.0;
  double noise_sd = 0.0;
  std::vector<std::string> mu;
  std::vector<std::string> cov;
  std::string weights;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f, bool with_n) {
  if (with_n) cmd->add_option("--n", f.n, "number of rows to simulate");
  cmd->add_option("--dim", f.dim, "coefficient dimension (2 or 3)")->check(CLI::Range(2, 3));
  cmd->add_option("--x-low", f.x_low, "regressor range lower end");
  cmd->add_option("--x-high", f.x_high, "regressor range upper end");
  cmd->add_option("--noise-sd", f.noise_sd, "sd of optional additive noise on Y");
  cmd->add_option("--mu", f.mu, "mixture component mean, comma separated (repeatable)");
  cmd->add_option("--cov", f.cov,
                  "mixture component covariance, row-major comma separated (repeatable)");
  cmd->add_option("--weights", f.weights, "mixture weights, comma separated");
}

rcdens::SampleMatrix run_simulate(const SimFlags& f) {
  rcdens::SimulateOptions opts;
  opts.seed = f.seed;
  opts.x_low = f.x_low;
  opts.x_high = f.x_high;
  opts.noise_sd = f.noise_sd;
  if (!f.mu.empty()) {
    if (!f.cov.empty() && f.cov.size() != f.mu.size()) {
      throw std::invalid_argument("simulate: --cov count must match --mu count");
    }
    for (std::size_t c = 0; c < f.mu.size(); ++c) {
      rcdens::MixtureComponent comp;
      const std::vector<double> m = parse_number_list(f.mu[c]);
      if (static_cast<int>(m.size()) != f.dim) {
        throw std::invalid_argument("simulate: --mu needs one value per dimension");
      }
      for (int d = 0; d < f.dim; ++d) comp.mean[static_cast<std::size_t>(d)] = m[static_cast<std::size_t>(d)];
      if (!f.cov.empty()) {
        const std::vector<double> v = parse_number_list(f.cov[c]);
        if (static_cast<int>(v.size()) != f.dim * f.dim) {
          throw std::invalid_argument("simulate: --cov needs dim*dim values");
        }
        for (int i = 0; i < f.dim; ++i) {
          for (int j = 0; j < f.dim; ++j) {
            comp.cov[static_cast<std::size_t>(i * rcdens::kMaxDim + j)] =
                v[static_cast<std::size_t>(i * f.dim + j)];
          }
        }
      } else {
        for (int i = 0; i < f.dim; ++i) {
          comp.cov[static_cast<std::size_t>(i * rcdens::kMaxDim + i)] = 0.01;
        }
      }
      opts.components.push_back(comp);
    }
  }
  if (!f.weights.empty()) opts.weights = parse_number_list(f.weights);
  return rcdens::sim_sample(f.n, f.dim, opts);
}

struct CsvFlags {
  std::string path;
  std::vector<int> columns;
  std::vector<std::string> transforms;  // IDX:SCALE:OFFSET on selected columns
  bool has_header = false;
  bool add_intercept = false;
  std::optional<std::size_t> subsample;
};

rcdens::SampleMatrix run_read_csv(const CsvFlags& f, std::uint64_t seed) {
  rcdens::CsvOptions opts;
  opts.columns = f.columns;
  opts.has_header = f.has_header;
  opts.add_intercept = f.add_intercept;
  opts.seed = seed;
  if (f.subsample) opts.subsample = *f.subsample;
  if (!f.transforms.empty()) {
    std::size_t width = f.columns.size();
    if (width == 0) {
      for (const std::string& t : f.transforms) {
        const std::size_t idx = static_cast<std::size_t>(std::stoi(t.substr(0, t.find(':'))));
        width = std::max(width, idx + 1);
      }
    }
    opts.transforms.assign(width, std::nullopt);
    for (const std::string& t : f.transforms) {
      const std::size_t c1 = t.find(':');
      const std::size_t c2 = t.find(':', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos) {
        throw std::invalid_argument("csv: --transform expects IDX:SCALE:OFFSET");
      }
      const int idx = std::stoi(t.substr(0, c1));
      if (idx < 0 || static_cast<std::size_t>(idx) >= opts.transforms.size()) {
        throw std::invalid_argument("csv: --transform column index out of range");
      }
      opts.transforms[static_cast<std::size_t>(idx)] =
          rcdens::ColumnTransform{std::stod(t.substr(c1 + 1, c2 - c1 - 1)), std::stod(t.substr(c2 + 1))};
    }
  }
  return rcdens::read_csv(f.path, opts);
}

int cmd_simulate(const SimFlags& flags, const std::string& out_path) {
  const rcdens::SampleMatrix sample = run_simulate(flags);
  rcdens::write_csv(out_path, sample);
  std::cout << "wrote " << sample.rows() << " rows x " << sample.cols() << " cols to " << out_path
            << "\n";
  return 0;
}

struct EstimateFlags {
  SimFlags sim;
  std::optional<std::size_t> sim_n;
  CsvFlags csv;
  int grid_points = 20;
  std::vector<double> range_b0, range_b1, range_b2;
  std::string penalty = "h1";
  std::string alpha = "0.25";
  int cv_folds = 10;
  int alpha_count = 10;
  double lepskii_c = 1.0;
  double lepskii_r = 1.3;
  bool shift = false;
  int n_shifts = 10;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  int max_iter = 100;
  std::string dump_operator, load_operator;
  std::string out_path;
};

int cmd_estimate(const EstimateFlags& f) {
  using namespace rcdens;

  SampleMatrix sample = [&] {
    if (f.sim_n) {
      SimFlags sim = f.sim;
      sim.n = *f.sim_n;
      sim.seed = f.seed;
      return run_simulate(sim);
    }
    if (f.csv.path.empty()) {
      throw std::invalid_argument("estimate: provide --simulate N or --csv PATH");
    }
    return run_read_csv(f.csv, f.seed);
  }();

  const int dim = static_cast<int>(sample.coef_dim());
  std::vector<AxisRange> ranges;
  auto push_range = [&](const std::vector<double>& r) {
    if (r.empty()) {
      ranges.push_back(AxisRange{-5.0, 5.0});
    } else if (r.size() == 2) {
      ranges.push_back(AxisRange{r[0], r[1]});
    } else {
      throw std::invalid_argument("estimate: axis ranges take exactly two values");
    }
  };
  push_range(f.range_b0);
  push_range(f.range_b1);
  if (dim == 3) {
    push_range(f.range_b2);
  } else if (!f.range_b2.empty()) {
    throw std::invalid_argument("estimate: --range-b2 needs a 3-dimensional model");
  }
  const Grid grid(f.grid_points, dim, ranges);

  const PenaltyKind kind = penalty_from_string(f.penalty);
  SolverOptions opts;
  opts.tolerance = f.tol;
  opts.max_iter = f.max_iter;

  const OperatorMatrix op = [&] {
    if (!f.load_operator.empty()) {
      OperatorMatrix cached = OperatorMatrix::load(f.load_operator, sample);
      if (cached.grid() != grid) {
        throw std::runtime_error("estimate: cached operator was built on a different grid");
      }
      return cached;
    }
    return build_operator(sample, grid);
  }();
  if (!f.dump_operator.empty()) op.dump(f.dump_operator);

  // alpha: a number, or one of the two selection rules
  double alpha_value = 0.0;
  AlphaMethod method = AlphaMethod::User;
  std::vector<EstimationReport> ladder_reports;
  if (f.alpha == "lepskii") {
    const AlphaLadder ladder =
        make_alpha_ladder(sample.rows(), f.lepskii_c, f.lepskii_r, f.alpha_count);
    LepskiiResult res = lepskii(op, ladder, kind, opts);
    alpha_value = res.alpha;
    method = AlphaMethod::Lepskii;
    ladder_reports = std::move(res.reports);
    std::cout << "lepskii: picked alpha " << alpha_value << " (index " << res.j_bal << ")\n";
  } else if (f.alpha == "cv") {
    const AlphaLadder ladder =
        make_alpha_ladder(sample.rows(), f.lepskii_c, f.lepskii_r, f.alpha_count);
    const CvSelection sel =
        cv_select(sample, grid, f.cv_folds, ladder.values, kind, opts, f.seed);
    alpha_value = sel.alpha;
    method = AlphaMethod::CV;
    std::cout << "cv: picked alpha " << alpha_value << " (loss " << sel.loss << ", "
              << sel.trace.size() << " evaluations)\n";
  } else {
    try {
      std::size_t used = 0;
      alpha_value = std::stod(f.alpha, &used);
      if (used != f.alpha.size()) throw std::invalid_argument(f.alpha);
    } catch (const std::exception&) {
      throw std::invalid_argument("estimate: --alpha expects a number, 'lepskii', or 'cv'");
    }
  }

  EstimationReport report = [&] {
    if (f.shift) {
      return shift_estimate(sample, grid, alpha_value, kind, opts, f.n_shifts, f.seed, method);
    }
    if (method == AlphaMethod::Lepskii) {
      // the ladder already solved this alpha on the full operator
      for (auto& r : ladder_reports) {
        if (r.alpha == alpha_value) return std::move(r);
      }
    }
    EstimationReport r = solve(op, alpha_value, kind, opts);
    r.alpha_method = method;
    return r;
  }();

  DensityDump dump;
  dump.density = report.f;
  dump.alpha = report.alpha;
  dump.alpha_method = report.alpha_method;
  dump.penalty = kind;
  dump.n_sample = sample.rows();
  dump.timestamp = iso_timestamp();
  write_density_dump(f.out_path, dump);

  std::cout << "estimate: " << report.details.iterations << " iterations, objective "
            << report.details.final_objective << ", kkt " << report.details.kkt_residual << ", "
            << report.details.termination << "; wrote " << f.out_path << "\n";
  return 0;
}

int cmd_refine(const std::string& in_path, int new_k, const std::string& out_path) {
  rcdens::DensityDump dump = rcdens::read_density_dump(in_path);
  rcdens::RefineResult refined = rcdens::refine(dump.density, new_k);
  dump.density = std::move(refined.density);
  dump.timestamp = iso_timestamp();
  rcdens::write_density_dump(out_path, dump);
  std::cout << "refine: " << new_k << " points per axis, clamped mass " << refined.clamped_mass
            << "; wrote " << out_path << "\n";
  return 0;
}

int cmd_report(const std::string& in_path, int top, const std::string& out_path) {
  const rcdens::DensityDump dump = rcdens::read_density_dump(in_path);
  const rcdens::DensityEstimate& f = dump.density;

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("report: cannot open '" + out_path + "' for writing");
    out = &file;
  }

  const auto ev = rcdens::expected_value(f);
  json jev = json::array();
  for (int a = 0; a < f.grid.dim(); ++a) jev.push_back(ev[static_cast<std::size_t>(a)]);
  *out << json{{"ev", jev}}.dump() << '\n';

  const rcdens::ModePoint mx = rcdens::maxval(f);
  json jloc = json::array();
  for (int a = 0; a < f.grid.dim(); ++a) jloc.push_back(mx.location[static_cast<std::size_t>(a)]);
  *out << json{{"maxval", {{"value", mx.value}, {"location", jloc}}}}.dump() << '\n';

  json jmodes = json::array();
  for (const auto& m : rcdens::modes(f, top)) {
    json loc = json::array();
    for (int a = 0; a < f.grid.dim(); ++a) loc.push_back(m.location[static_cast<std::size_t>(a)]);
    jmodes.push_back({{"value", m.value}, {"location", loc}});
  }
  *out << json{{"modes", jmodes}}.dump() << '\n';

  json meta{{"alpha", dump.alpha},
            {"alpha_method", rcdens::to_string(dump.alpha_method)},
            {"penalty", rcdens::to_string(dump.penalty)},
            {"n", dump.n_sample},
            {"mass", f.mass()}};
  *out << meta.dump() << '\n';
  return 0;
}

int cmd_plot(const std::string& in_path, const std::string& out_path, const std::string& svg_path,
             const std::string& type) {
  const rcdens::DensityDump dump = rcdens::read_density_dump(in_path);
  const rcdens::PlotKind kind =
      type == "surface" ? rcdens::PlotKind::Surface : rcdens::PlotKind::Contour;
  if (type != "surface" && type != "contour") {
    throw std::invalid_argument("plot: --type must be contour or surface");
  }
  rcdens::emit_plot_data(out_path, dump.density, kind);
  std::cout << "plot: wrote " << out_path;
  if (!svg_path.empty()) {
    rcdens::write_svg(svg_path, dump.density);
    std::cout << " and " << svg_path;
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonparametric random-coefficients density estimation"};
  app.require_subcommand(1);

  // simulate
  SimFlags sim_flags;
  std::string sim_out = "sample.csv";
  CLI::App* sim = app.add_subcommand("simulate", "draw a synthetic sample and write it as CSV");
  add_sim_flags(sim, sim_flags, true);
  sim->add_option("--seed", sim_flags.seed, "random seed");
  sim->add_option("--out", sim_out, "output CSV path");

  // estimate
  EstimateFlags est;
  CLI::App* estimate = app.add_subcommand("estimate", "estimate the coefficient density");
  std::size_t est_sim_n = 0;
  CLI::Option* opt_sim = estimate->add_option("--simulate", est_sim_n, "simulate N rows instead of reading CSV");
  add_sim_flags(estimate, est.sim, false);
  CLI::Option* opt_csv = estimate->add_option("--csv", est.csv.path, "input CSV path");
  opt_csv->excludes(opt_sim);
  estimate->add_option("--columns", est.csv.columns, "file columns to keep, output order [X..,Y]");
  estimate->add_flag("--has-header", est.csv.has_header, "skip the first CSV line");
  estimate->add_flag("--add-intercept", est.csv.add_intercept, "prepend an all-ones column");
  estimate->add_option("--transform", est.csv.transforms,
                       "affine transform IDX:SCALE:OFFSET on a selected column (repeatable)");
  std::size_t est_subsample = 0;
  CLI::Option* opt_sub = estimate->add_option("--subsample", est_subsample, "subsample the CSV rows");
  estimate->add_option("--grid-points", est.grid_points, "cells per axis")->check(CLI::Range(2, 512));
  estimate->add_option("--range-b0", est.range_b0, "intercept axis range LO HI")->expected(2);
  estimate->add_option("--range-b1", est.range_b1, "first slope axis range LO HI")->expected(2);
  estimate->add_option("--range-b2", est.range_b2, "second slope axis range LO HI")->expected(2);
  estimate->add_option("--penalty", est.penalty,
                       "none|l2|h1|entropy; penalties carry the cell-volume weight, so alpha "
                       "is calibrated against the continuous integrals");
  estimate->add_option("--alpha", est.alpha, "regularization parameter, or lepskii|cv");
  estimate->add_option("--cv-folds", est.cv_folds, "folds for cross validation");
  estimate->add_option("--alpha-count", est.alpha_count, "ladder length for lepskii/cv");
  estimate->add_option("--lepskii-c", est.lepskii_c, "ladder constant c");
  estimate->add_option("--lepskii-r", est.lepskii_r, "ladder ratio r");
  estimate->add_flag("--shift", est.shift, "stabilize with randomized intercept shifts");
  estimate->add_option("--n-shifts", est.n_shifts, "number of intercept shifts");
  estimate->add_option("--seed", est.seed, "random seed");
  estimate->add_option("--tol", est.tol, "solver tolerance");
  estimate->add_option("--max-iter", est.max_iter, "solver iteration cap");
  estimate->add_option("--dump-operator", est.dump_operator, "write the operator cache here");
  estimate->add_option("--load-operator", est.load_operator, "reuse a cached operator");
  estimate->add_option("--out", est.out_path, "output density dump path")->required();

  // refine
  std::string ref_in, ref_out;
  int ref_k = 0;
  CLI::App* refine = app.add_subcommand("refine", "spline-refine a dump onto a finer grid");
  refine->add_option("--in", ref_in, "input density dump")->required();
  refine->add_option("--grid-points", ref_k, "cells per axis of the refined grid")->required();
  refine->add_option("--out", ref_out, "output density dump")->required();

  // report
  std::string rep_in, rep_out;
  int rep_top = 4;
  CLI::App* report = app.add_subcommand("report", "summarize a dump as JSON lines");
  report->add_option("--in", rep_in, "input density dump")->required();
  report->add_option("--top", rep_top, "maximum number of modes to list");
  report->add_option("--out", rep_out, "write JSON lines here instead of stdout");

  // plot
  std::string plot_in, plot_out, plot_svg, plot_type = "contour";
  CLI::App* plot = app.add_subcommand("plot", "emit gridded plot data (and optional SVG)");
  plot->add_option("--in", plot_in, "input density dump")->required();
  plot->add_option("--out", plot_out, "output plot-data path")->required();
  plot->add_option("--svg", plot_svg, "also write an SVG heat map here");
  plot->add_option("--type", plot_type, "contour|surface");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_flags, sim_out);
    if (estimate->parsed()) {
      if (opt_sim->count() > 0) est.sim_n = est_sim_n;
      if (opt_sub->count() > 0) est.csv.subsample = est_subsample;
      return cmd_estimate(est);
    }
    if (refine->parsed()) return cmd_refine(ref_in, ref_k, ref_out);
    if (report->parsed()) return cmd_report(rep_in, rep_top, rep_out);
    if (plot->parsed()) return cmd_plot(plot_in, plot_out, plot_svg, plot_type);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
