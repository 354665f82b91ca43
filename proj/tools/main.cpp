// stablefield: simulation and extrapolation of alpha-stable random fields.
//
// Subcommands: simulate, predict, covariation, benchmark. Exit codes:
// 0 success, 2 configuration error, 3 numerical failure. Errors appear as a
// single machine-readable line on stderr: "error: <category>: <message>".

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stablefield/covariation.hpp"
#include "stablefield/experiments.hpp"
#include "stablefield/field_models.hpp"
#include "stablefield/kernels.hpp"
#include "stablefield/predictors.hpp"
#include "stablefield/stable.hpp"

namespace sf = stablefield;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

sf::Point parse_point(const std::string& text) {
  sf::Point p;
  std::istringstream ss(text);
  std::string cell;
  if (!std::getline(ss, cell, ',')) throw CLI::ValidationError("point", "empty point");
  p.x = std::stod(cell);
  if (std::getline(ss, cell, ',')) p.y = std::stod(cell);
  return p;
}

std::ofstream open_fresh(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

// Model flags shared by simulate/predict/covariation.
struct ModelSpec {
  std::string model = "levy-sheet";
  double alpha = 1.5;
  int dim = 2;
  int cells = 128;
  double sill = 7.0;
  double range = 0.1;
  std::string cov_family = "gaussian";
  double ou_rate = 1.0;
  double ma_radius = 0.25;
  double domain_lo = 0.0;
  double domain_hi = 1.0;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--model", model, "levy-sheet | ou | ma-exp | sub-gaussian | gaussian")
        ->default_val(model);
    cmd->add_option("--alpha", alpha, "stability index in (1,2]")->default_val(alpha);
    cmd->add_option("--dim", dim, "field dimension (levy-sheet, ma-exp)")->default_val(dim);
    cmd->add_option("--cells", cells, "integration cells per axis")->default_val(cells);
    cmd->add_option("--sill", sill, "covariance sill C(0)")->default_val(sill);
    cmd->add_option("--range", range, "covariance range")->default_val(range);
    cmd->add_option("--cov", cov_family, "covariance family: gaussian | exponential")
        ->default_val(cov_family);
    cmd->add_option("--ou-rate", ou_rate, "Ornstein-Uhlenbeck rate")->default_val(ou_rate);
    cmd->add_option("--ma-radius", ma_radius, "moving-average kernel support radius")
        ->default_val(ma_radius);
    cmd->add_option("--domain-lo", domain_lo, "integration domain lower bound")
        ->default_val(domain_lo);
    cmd->add_option("--domain-hi", domain_hi, "integration domain upper bound")
        ->default_val(domain_hi);
  }

  sf::CovarianceModel covariance() const {
    const auto family = [&] {
      if (cov_family == "gaussian") return sf::CovarianceModel::Family::kGaussian;
      if (cov_family == "exponential") return sf::CovarianceModel::Family::kExponential;
      throw CLI::ValidationError("--cov", "unknown covariance family: " + cov_family);
    }();
    return {family, sill, range};
  }

  bool gaussian_family() const { return model == "sub-gaussian" || model == "gaussian"; }

  sf::FieldModel field_model() const {
    if (model == "levy-sheet") return sf::FieldModel::levy_sheet(alpha, dim);
    if (model == "ou") return sf::FieldModel::ornstein_uhlenbeck(alpha, ou_rate);
    if (model == "ma-exp") {
      const double r = ma_radius;
      return sf::FieldModel::moving_average(
          alpha, dim,
          [r](sf::Point d) {
            return std::exp(-3.0 * std::sqrt(d.x * d.x + d.y * d.y) / r);
          },
          r);
    }
    if (model == "sub-gaussian") return sf::FieldModel::sub_gaussian(alpha, covariance());
    if (model == "gaussian") return sf::FieldModel::sub_gaussian(2.0, covariance());
    throw CLI::ValidationError("--model", "unknown model: " + model);
  }

  sf::DiscreteMeasureGrid grid(const std::vector<sf::Point>& sites_hint) const {
    const auto m = field_model();
    if (!m.is_kernel_model())
      throw CLI::ValidationError("--model", "kernel model required for this operation");
    if (m.dim() == 1) {
      double lo = domain_lo, hi = domain_hi;
      if (std::holds_alternative<sf::OrnsteinUhlenbeck>(m.family)) {
        // Cover the exponential tail to the left of the earliest site.
        double min_site = hi, max_site = lo;
        for (const auto& p : sites_hint) {
          min_site = std::min(min_site, p.x);
          max_site = std::max(max_site, p.x);
        }
        const double width = std::log(1e14) / (ou_rate * alpha);
        lo = std::min(lo, min_site - width);
        hi = std::max(hi, max_site);
      }
      return sf::DiscreteMeasureGrid::line(lo, hi, static_cast<std::size_t>(cells));
    }
    return sf::DiscreteMeasureGrid::box({domain_lo, domain_lo}, {domain_hi, domain_hi},
                                        static_cast<std::size_t>(cells),
                                        static_cast<std::size_t>(cells));
  }
};

std::vector<sf::Point> eval_grid(int resolution, int dim) {
  std::vector<sf::Point> pts;
  if (dim == 1) {
    for (int i = 0; i < resolution; ++i)
      pts.push_back({static_cast<double>(i) / (resolution - 1), 0.0});
    return pts;
  }
  for (int j = 0; j < resolution; ++j)
    for (int i = 0; i < resolution; ++i)
      pts.push_back({static_cast<double>(i) / (resolution - 1),
                     static_cast<double>(j) / (resolution - 1)});
  return pts;
}

// --- simulate ----------------------------------------------------------------

struct SimulateArgs {
  ModelSpec spec;
  int grid_resolution = 50;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::string out_dir = ".";
  bool surface_script = false;
  std::string sites_csv;
};

int cmd_simulate(const SimulateArgs& args) {
  std::vector<sf::Point> sites;
  if (!args.sites_csv.empty()) {
    const auto data = sf::read_sites_csv_file(args.sites_csv);
    sites = data.sites;
  } else {
    const auto m = args.spec.field_model();
    sites = eval_grid(args.grid_resolution, m.dim());
  }

  sf::RngStream rng(args.seed, args.stream);
  sf::FieldRealization real;
  if (args.spec.gaussian_family()) {
    if (args.spec.model == "gaussian") {
      real = sf::simulate_gaussian_field(args.spec.covariance(), sites, 2, rng);
    } else {
      real = sf::simulate_subgaussian_field(args.spec.covariance(), args.spec.alpha, sites, 2,
                                            rng);
    }
  } else {
    const auto model = args.spec.field_model();
    const auto grid = args.spec.grid(sites);
    real = sf::simulate_field(model, sites, grid, rng);
    if (real.coverage_warning)
      std::cerr << "warning: kernel mass outside the integration grid exceeds tolerance\n";
  }

  fs::create_directories(args.out_dir);
  const std::string csv = (fs::path(args.out_dir) / "realization.csv").string();
  real.write_csv_file(csv);
  std::cout << csv << "\n";
  if (args.surface_script && real.dim == 2) {
    const std::string gp = (fs::path(args.out_dir) / "realization.gp").string();
    sf::write_surface_plot_script(gp, "realization.csv", real.model_tag);
    std::cout << gp << "\n";
  }
  return 0;
}

// --- predict -----------------------------------------------------------------

struct PredictArgs {
  ModelSpec spec;
  std::string obs_csv;
  std::vector<std::string> target_texts;
  std::string targets_csv;
  std::vector<std::string> methods{"col"};
  std::string out_dir = ".";
  int threads = 1;
};

int cmd_predict(const PredictArgs& args) {
  const auto obs = sf::read_sites_csv_file(args.obs_csv);
  if (obs.sites.empty()) throw CLI::ValidationError("--obs", "no observations");

  std::vector<sf::Point> targets;
  for (const auto& t : args.target_texts) targets.push_back(parse_point(t));
  if (!args.targets_csv.empty()) {
    const auto data = sf::read_sites_csv_file(args.targets_csv);
    targets.insert(targets.end(), data.sites.begin(), data.sites.end());
  }
  if (targets.empty()) throw CLI::ValidationError("--target", "no targets given");

  const auto model = args.spec.field_model();
  sf::SiteSystem sys = [&] {
    if (model.is_kernel_model()) {
      return sf::SiteSystem::kernel_system(model, args.spec.grid(obs.sites), obs.sites,
                                           targets.front());
    }
    return sf::SiteSystem::gaussian_system(model, obs.sites, targets.front());
  }();

  fs::create_directories(args.out_dir);
  const std::string weights_path = (fs::path(args.out_dir) / "weights.csv").string();
  const std::string pred_path = (fs::path(args.out_dir) / "predictions.csv").string();
  auto wos = open_fresh(weights_path);
  auto pos = open_fresh(pred_path);

  std::string whead = obs.dim == 2 ? "target_x,target_y" : "target_x";
  for (std::size_t i = 1; i <= obs.sites.size(); ++i)
    whead += ",lambda_" + std::to_string(i);
  wos << whead << ",method,residual\n";
  pos << (obs.dim == 2 ? "target_x,target_y,method,value\n" : "target_x,method,value\n");

  for (const auto& method_name_str : args.methods) {
    const sf::Method method = sf::method_from_name(method_name_str);
    if (method == sf::Method::kML && model.is_kernel_model())
      throw CLI::ValidationError("--method",
                                 "ml requires a sub-gaussian or gaussian model");
    const auto weights = sf::weight_field(sys, targets, method, args.threads);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const auto& w = weights[t];
      std::string row = fmt(targets[t].x);
      if (obs.dim == 2) row += "," + fmt(targets[t].y);
      for (Eigen::Index i = 0; i < w.lambda.size(); ++i) row += "," + fmt(w.lambda(i));
      const double residual = method == sf::Method::kMCL ? w.constraint_residual
                                                         : w.first_order_residual;
      wos << row << "," << method_name_str << "," << fmt(residual) << "\n";

      const double value = sf::predict(w, obs.values);
      std::string prow = fmt(targets[t].x);
      if (obs.dim == 2) prow += "," + fmt(targets[t].y);
      pos << prow << "," << method_name_str << "," << fmt(value) << "\n";
    }
  }
  std::cout << weights_path << "\n" << pred_path << "\n";
  return 0;
}

// --- covariation -------------------------------------------------------------

struct CovariationArgs {
  ModelSpec spec;
  std::string s_text, t_text;
  std::string obs_csv;
  std::string target_text;
  std::string out_dir = ".";
};

int cmd_covariation(const CovariationArgs& args) {
  const auto model = args.spec.field_model();

  if (!args.s_text.empty() || !args.t_text.empty()) {
    if (args.s_text.empty() || args.t_text.empty())
      throw CLI::ValidationError("--s/--t", "both points are required for pair mode");
    const sf::Point s = parse_point(args.s_text);
    const sf::Point t = parse_point(args.t_text);
    double value;
    if (model.is_kernel_model()) {
      const auto grid = args.spec.grid({s, t});
      value = sf::covariation_kernel(model, grid, s, t);
    } else {
      value = sf::covariation_subgaussian(model.covariance(), model.alpha, s, t);
    }
    std::cout << fmt(value) << "\n";
    return 0;
  }

  if (args.obs_csv.empty() || args.target_text.empty())
    throw CLI::ValidationError("covariation",
                               "need either --s/--t or --obs and --target");
  const auto obs = sf::read_sites_csv_file(args.obs_csv);
  const sf::Point target = parse_point(args.target_text);
  sf::SiteSystem sys = model.is_kernel_model()
                           ? sf::SiteSystem::kernel_system(model, args.spec.grid(obs.sites),
                                                           obs.sites, target)
                           : sf::SiteSystem::gaussian_system(model, obs.sites, target);
  const auto cs = sf::build_covariation_system(sys);

  fs::create_directories(args.out_dir);
  const std::string kpath = (fs::path(args.out_dir) / "k_matrix.csv").string();
  const std::string bpath = (fs::path(args.out_dir) / "b_vector.csv").string();
  {
    auto os = open_fresh(kpath);
    os << "# K(j,i) = [X(t_i), X(t_j)]_alpha\n";
    for (Eigen::Index j = 0; j < cs.K.rows(); ++j) {
      std::string row;
      for (Eigen::Index i = 0; i < cs.K.cols(); ++i) {
        if (i > 0) row += ",";
        row += fmt(cs.K(j, i));
      }
      os << row << "\n";
    }
  }
  {
    auto os = open_fresh(bpath);
    os << "# b(j) = [X(t0), X(t_j)]_alpha\n";
    for (Eigen::Index j = 0; j < cs.b.size(); ++j) os << fmt(cs.b(j)) << "\n";
  }
  std::cout << kpath << "\n" << bpath << "\n";
  return 0;
}

// --- benchmark -----------------------------------------------------------------

struct BenchmarkArgs {
  std::string field = "sub-gaussian";
  sf::BenchmarkConfig config;
  std::vector<std::string> methods;
};

int cmd_benchmark(BenchmarkArgs& args) {
  args.config.field = [&] {
    if (args.field == "sub-gaussian") return sf::BenchmarkConfig::Field::kSubGaussian;
    if (args.field == "levy-sheet") return sf::BenchmarkConfig::Field::kLevySheet;
    throw CLI::ValidationError("--field", "unknown field type: " + args.field);
  }();
  args.config.methods = args.methods;

  const auto result = sf::run_benchmark(args.config);
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %12s %12s %12s %12s %12s %12s\n", "method",
                "5%-quant", "1st quart", "median", "mean", "3rd quart", "95%-quant");
  std::cout << line;
  for (std::size_t m = 0; m < result.summary.methods.size(); ++m) {
    const auto& row = result.summary.rows[m];
    std::snprintf(line, sizeof line, "%-8s %12.4f %12.4f %12.4f %12.4f %12.4f %12.4f\n",
                  result.summary.methods[m].c_str(), row.q05, row.q25, row.median, row.mean,
                  row.q75, row.q95);
    std::cout << line;
  }
  for (const auto& f : result.files_written) std::cout << f << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alpha-stable random fields: simulation and linear extrapolation"};
  app.set_config("--config", "", "plain key=value configuration file");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sf::kVersion) + " (rng " + sf::kRngVersion +
                                        ", kernels " + sf::kernels::active().name + ")");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a field realization");
  sim.spec.add_flags(sim_cmd);
  sim_cmd->add_option("--grid", sim.grid_resolution, "evaluation grid per axis")
      ->default_val(sim.grid_resolution);
  sim_cmd->add_option("--sites", sim.sites_csv, "CSV of sites to evaluate instead of a grid");
  sim_cmd->add_option("--seed", sim.seed)->default_val(sim.seed);
  sim_cmd->add_option("--stream", sim.stream)->default_val(sim.stream);
  sim_cmd->add_option("--out", sim.out_dir)->default_val(sim.out_dir);
  sim_cmd->add_flag("--surface", sim.surface_script, "also write a gnuplot script");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "extrapolate from observations");
  pred.spec.add_flags(pred_cmd);
  pred_cmd->add_option("--obs", pred.obs_csv, "observations CSV (x[,y],value)")->required();
  pred_cmd->add_option("--target", pred.target_texts, "target point 'x[,y]' (repeatable)");
  pred_cmd->add_option("--targets", pred.targets_csv, "CSV of target points");
  pred_cmd->add_option("--method", pred.methods, "lsl | col | mcl | ml (repeatable)")
      ->default_val(pred.methods);
  pred_cmd->add_option("--threads", pred.threads)->default_val(pred.threads);
  pred_cmd->add_option("--out", pred.out_dir)->default_val(pred.out_dir);

  CovariationArgs cov;
  auto* cov_cmd = app.add_subcommand("covariation", "covariation queries");
  cov.spec.add_flags(cov_cmd);
  cov_cmd->add_option("--s", cov.s_text, "first point 'x[,y]'");
  cov_cmd->add_option("--t", cov.t_text, "second point 'x[,y]'");
  cov_cmd->add_option("--obs", cov.obs_csv, "observations CSV for system mode");
  cov_cmd->add_option("--target", cov.target_text, "target point for system mode");
  cov_cmd->add_option("--out", cov.out_dir)->default_val(cov.out_dir);

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Monte Carlo extrapolation study");
  bench_cmd->add_option("--field", bench.field, "sub-gaussian | levy-sheet")
      ->default_val(bench.field);
  bench_cmd->add_option("--alpha", bench.config.alpha)->default_val(bench.config.alpha);
  bench_cmd->add_option("--realizations", bench.config.realizations)
      ->default_val(bench.config.realizations);
  bench_cmd->add_option("--grid", bench.config.grid_resolution)
      ->default_val(bench.config.grid_resolution);
  bench_cmd->add_option("--cells", bench.config.measure_cells)
      ->default_val(bench.config.measure_cells);
  bench_cmd->add_option("--sill", bench.config.cov.sill)->default_val(bench.config.cov.sill);
  bench_cmd->add_option("--range", bench.config.cov.range)
      ->default_val(bench.config.cov.range);
  bench_cmd->add_option("--methods", bench.methods,
                        "subset of lsl,col,mcl,ml,cs (default: all applicable)")
      ->delimiter(',');
  bench_cmd->add_option("--seed", bench.config.seed)->default_val(bench.config.seed);
  bench_cmd->add_option("--threads", bench.config.threads)
      ->default_val(bench.config.threads);
  bench_cmd->add_option("--jitter", bench.config.jitter_scale)
      ->default_val(bench.config.jitter_scale);
  bench_cmd->add_option("--out", bench.config.out_dir, "output directory")->required();
  bench_cmd->add_flag("!--no-raw", bench.config.write_raw, "skip the raw deviations CSV");
  bench_cmd->add_flag("--surfaces", bench.config.write_surfaces,
                      "write first-realization surface panels");

  try {
    app.parse(argc, argv);
    if (sim_cmd->parsed()) return cmd_simulate(sim);
    if (pred_cmd->parsed()) return cmd_predict(pred);
    if (cov_cmd->parsed()) return cmd_covariation(cov);
    if (bench_cmd->parsed()) return cmd_benchmark(bench);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const sf::numerical_error& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 3;
  }
}
