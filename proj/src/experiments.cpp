#include "stablefield/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "stablefield/kernels.hpp"
#include "stablefield/stable.hpp"

namespace stablefield {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::ofstream open_fresh(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

bool is_subgaussian_only(const std::string& m) { return m == "ml" || m == "cs"; }

// Evaluation grid {i/(g-1)}^2 including the boundary, plus the index map
// identifying grid points that coincide with observation sites.
struct EvalLayout {
  std::vector<Point> eval_pts;
  std::vector<Point> joint_pts;          // observation sites first, then unique grid points
  std::vector<std::size_t> joint_index;  // eval point -> joint index
  std::vector<int> site_hit;             // eval point -> obs index or -1
};

EvalLayout build_layout(int resolution, const std::vector<Point>& obs) {
  EvalLayout layout;
  layout.joint_pts = obs;
  const int g = resolution;
  layout.eval_pts.reserve(static_cast<std::size_t>(g) * g);
  for (int j = 0; j < g; ++j) {
    const double y = static_cast<double>(j) / static_cast<double>(g - 1);
    for (int i = 0; i < g; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(g - 1);
      Point p{x, y};
      int hit = -1;
      for (std::size_t s = 0; s < obs.size(); ++s) {
        if (same_point(p, obs[s], 2)) {
          hit = static_cast<int>(s);
          break;
        }
      }
      layout.eval_pts.push_back(p);
      layout.site_hit.push_back(hit);
      if (hit >= 0) {
        layout.joint_index.push_back(static_cast<std::size_t>(hit));
      } else {
        layout.joint_index.push_back(layout.joint_pts.size());
        layout.joint_pts.push_back(p);
      }
    }
  }
  return layout;
}

struct WeightMatrix {
  std::string method;
  MatrixXd w;  // eval points x n; empty for cs
};

}  // namespace

std::vector<Point> default_observation_sites() {
  return {{0.2, 0.2}, {0.2, 0.5}, {0.2, 0.8}, {0.5, 0.2}, {0.5, 0.5},
          {0.5, 0.8}, {0.8, 0.2}, {0.8, 0.5}, {0.8, 0.8}};
}

void BenchmarkConfig::validate() const {
  if (realizations < 1) throw std::invalid_argument("benchmark: realizations must be >= 1");
  if (grid_resolution < 2) throw std::invalid_argument("benchmark: grid resolution must be >= 2");
  if (measure_cells < 2) throw std::invalid_argument("benchmark: measure cells must be >= 2");
  if (observation_sites.empty()) throw std::invalid_argument("benchmark: no observation sites");
  if (!(alpha > 1.0) || alpha > 2.0)
    throw std::invalid_argument("benchmark: alpha must lie in (1,2]");
  if (field == Field::kSubGaussian && alpha >= 2.0)
    throw std::invalid_argument("benchmark: sub-Gaussian study needs alpha < 2");
  if (threads < 1) throw std::invalid_argument("benchmark: threads must be >= 1");
  for (const auto& m : methods) {
    if (m != "lsl" && m != "col" && m != "mcl" && m != "ml" && m != "cs")
      throw std::invalid_argument("benchmark: unknown method " + m);
    if (field == Field::kLevySheet && is_subgaussian_only(m))
      throw std::invalid_argument("benchmark: method " + m +
                                  " applies to sub-Gaussian fields only");
  }
}

std::vector<std::string> BenchmarkConfig::effective_methods() const {
  if (!methods.empty()) return methods;
  if (field == Field::kSubGaussian) return {"lsl", "col", "ml", "mcl", "cs"};
  return {"lsl", "col", "mcl"};
}

SummaryRow summary_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summary_stats: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  SummaryRow row;
  row.q05 = quantile_sorted(sorted, 0.05);
  row.q25 = quantile_sorted(sorted, 0.25);
  row.median = quantile_sorted(sorted, 0.50);
  row.q75 = quantile_sorted(sorted, 0.75);
  row.q95 = quantile_sorted(sorted, 0.95);
  row.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
             static_cast<double>(sorted.size());
  return row;
}

void export_surface(const std::string& csv_path, std::span<const Point> pts,
                    std::span<const double> values, const std::string& comment) {
  if (pts.size() != values.size())
    throw std::invalid_argument("export_surface: size mismatch");
  auto os = open_fresh(csv_path);
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "x,y,value\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out += fmt(pts[i].x) + "," + fmt(pts[i].y) + "," + fmt(values[i]) + "\n";
  }
  os << out;
}

void write_surface_plot_script(const std::string& gp_path, const std::string& csv_name,
                               const std::string& title) {
  auto os = open_fresh(gp_path);
  os << "set datafile separator ','\n"
     << "set pm3d map\n"
     << "set size square\n"
     << "set title '" << title << "'\n"
     << "splot '" << csv_name << "' every ::1 using 1:2:3 with pm3d notitle\n"
     << "pause -1\n";
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  const std::vector<std::string> methods = config.effective_methods();
  const std::vector<Point>& obs_sites = config.observation_sites;
  const std::size_t n = obs_sites.size();
  const EvalLayout layout = build_layout(config.grid_resolution, obs_sites);
  const std::size_t n_eval = layout.eval_pts.size();
  const std::size_t per_method = n_eval * static_cast<std::size_t>(config.realizations);

  const bool subgaussian = config.field == BenchmarkConfig::Field::kSubGaussian;

  // --- realization-independent weights per method --------------------------
  SiteSystem sys = [&] {
    if (subgaussian) {
      return SiteSystem::gaussian_system(FieldModel::sub_gaussian(config.alpha, config.cov),
                                         obs_sites, Point{0.0, 0.0});
    }
    const auto grid = DiscreteMeasureGrid::box(
        {0.0, 0.0}, {1.0, 1.0}, static_cast<std::size_t>(config.measure_cells),
        static_cast<std::size_t>(config.measure_cells));
    return SiteSystem::kernel_system(FieldModel::levy_sheet(config.alpha, 2), grid, obs_sites,
                                     Point{0.0, 0.0});
  }();

  std::vector<WeightMatrix> weight_fields;
  for (const auto& m : methods) {
    WeightMatrix wm;
    wm.method = m;
    if (m != "cs") {
      const auto weights =
          weight_field(sys, layout.eval_pts, method_from_name(m), config.threads);
      wm.w.resize(static_cast<Index>(n_eval), static_cast<Index>(n));
      for (std::size_t i = 0; i < n_eval; ++i)
        wm.w.row(static_cast<Index>(i)) = weights[i].lambda.transpose();
    }
    weight_fields.push_back(std::move(wm));
  }

  // --- shared simulation machinery -----------------------------------------
  // Sub-Gaussian: one Cholesky factor of the joint covariance, reused by all
  // realizations and by the conditional simulations.
  MatrixXd joint_chol;
  Eigen::LLT<MatrixXd> obs_llt;
  MatrixXd c_eval_obs;  // C(eval point, obs site)
  DiscreteMeasureGrid measure_grid = DiscreteMeasureGrid::line(0.0, 1.0, 2);
  if (subgaussian) {
    joint_chol = cholesky_with_jitter(covariance_matrix(config.cov, layout.joint_pts),
                                      config.jitter_scale * config.cov.sill)
                     .matrixL();
    obs_llt.compute(covariance_matrix(config.cov, {layout.joint_pts.data(), n}));
    if (obs_llt.info() != Eigen::Success)
      throw numerical_error("benchmark: observation covariance not SPD");
    c_eval_obs.resize(static_cast<Index>(n_eval), static_cast<Index>(n));
    for (std::size_t i = 0; i < n_eval; ++i)
      for (std::size_t j = 0; j < n; ++j)
        c_eval_obs(static_cast<Index>(i), static_cast<Index>(j)) =
            config.cov.at(layout.eval_pts[i], obs_sites[j]);
  } else {
    measure_grid = sys.grid();
  }

  // --- realizations ---------------------------------------------------------
  // Deviations land in per-realization slots, so pooling order (and thus any
  // quantile) is independent of the thread count.
  std::vector<std::vector<double>> pooled(methods.size());
  for (auto& buf : pooled) buf.resize(per_method);
  std::vector<double> site_dev(static_cast<std::size_t>(config.realizations), 0.0);

  // First-realization surfaces for the figure panels.
  std::vector<double> surface_field;
  std::vector<std::vector<double>> surface_methods(methods.size());

  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto run_realization = [&](int r) {
    const std::size_t slot = static_cast<std::size_t>(r) * n_eval;
    VectorXd x_joint(static_cast<Index>(layout.joint_pts.size()));

    if (subgaussian) {
      RngStream field_rng(config.seed, static_cast<std::uint64_t>(r) * 4);
      const double a_draw = sample_subgaussian_A(config.alpha, field_rng);
      VectorXd z(static_cast<Index>(layout.joint_pts.size()));
      field_rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
      x_joint = joint_chol.template triangularView<Eigen::Lower>() * z;
      x_joint *= std::sqrt(a_draw);
    } else {
      RngStream field_rng(config.seed, static_cast<std::uint64_t>(r) * 4);
      const std::vector<double> draws =
          simulate_measure(measure_grid, config.alpha, field_rng);
      const auto& ops = kernels::active();
      const double* cx = measure_grid.centers_x().data();
      const double* cy = measure_grid.centers_y().data();
      for (std::size_t i = 0; i < layout.joint_pts.size(); ++i) {
        x_joint(static_cast<Index>(i)) =
            ops.masked_window_sum2(cx, cy, draws.data(), draws.size(), 0.0,
                                   layout.joint_pts[i].x, 0.0, layout.joint_pts[i].y);
      }
    }

    const VectorXd observed = x_joint.head(static_cast<Index>(n));
    double worst_site_dev = 0.0;

    for (std::size_t m = 0; m < methods.size(); ++m) {
      VectorXd predicted;
      if (methods[m] == "cs") {
        RngStream cs_rng(config.seed, static_cast<std::uint64_t>(r) * 4 + 2);
        const double a_cs = sample_subgaussian_A(config.alpha, cs_rng);
        const double root_a = std::sqrt(a_cs);
        VectorXd z(static_cast<Index>(layout.joint_pts.size()));
        cs_rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
        const VectorXd g_unc = joint_chol.template triangularView<Eigen::Lower>() * z;
        const VectorXd resid =
            observed / root_a - g_unc.head(static_cast<Index>(n));
        const VectorXd coeff = obs_llt.solve(resid);
        predicted.resize(static_cast<Index>(n_eval));
        for (std::size_t i = 0; i < n_eval; ++i) {
          predicted(static_cast<Index>(i)) =
              root_a * (g_unc(static_cast<Index>(layout.joint_index[i])) +
                        c_eval_obs.row(static_cast<Index>(i)).dot(coeff));
        }
      } else {
        predicted = weight_fields[m].w * observed;
      }

      double* out = pooled[m].data() + slot;
      for (std::size_t i = 0; i < n_eval; ++i) {
        const double dev =
            x_joint(static_cast<Index>(layout.joint_index[i])) - predicted(static_cast<Index>(i));
        out[i] = dev;
        if (layout.site_hit[i] >= 0) worst_site_dev = std::max(worst_site_dev, std::abs(dev));
      }

      if (r == 0 && config.write_surfaces) {
        surface_methods[m].assign(predicted.data(), predicted.data() + predicted.size());
      }
    }

    if (r == 0 && config.write_surfaces) {
      surface_field.resize(n_eval);
      for (std::size_t i = 0; i < n_eval; ++i)
        surface_field[i] = x_joint(static_cast<Index>(layout.joint_index[i]));
    }
    site_dev[static_cast<std::size_t>(r)] = worst_site_dev;
  };

  auto run_block = [&](int begin, int end) {
    try {
      for (int r = begin; r < end; ++r) run_realization(r);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (config.threads <= 1) {
    run_block(0, config.realizations);
  } else {
    std::vector<std::thread> pool;
    const int workers = std::min(config.threads, config.realizations);
    const int chunk = (config.realizations + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(config.realizations, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_block, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  BenchmarkResult result;
  result.deviations_per_method = per_method;
  result.max_abs_deviation_at_sites =
      *std::max_element(site_dev.begin(), site_dev.end());
  result.summary.methods = methods;
  for (std::size_t m = 0; m < methods.size(); ++m)
    result.summary.rows.push_back(summary_stats(pooled[m]));

  // --- outputs ---------------------------------------------------------------
  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    const auto path = [&](const std::string& name) {
      return (fs::path(config.out_dir) / name).string();
    };

    {
      auto os = open_fresh(path("summary.csv"));
      std::string out = "method,q05,q25,median,mean,q75,q95\n";
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const auto& row = result.summary.rows[m];
        out += methods[m] + "," + fmt(row.q05) + "," + fmt(row.q25) + "," + fmt(row.median) +
               "," + fmt(row.mean) + "," + fmt(row.q75) + "," + fmt(row.q95) + "\n";
      }
      os << out;
      result.files_written.push_back(path("summary.csv"));
    }
    {
      auto os = open_fresh(path("summary.txt"));
      char line[256];
      std::snprintf(line, sizeof line, "%-8s %12s %12s %12s %12s %12s %12s\n", "method",
                    "5%-quant", "1st quart", "median", "mean", "3rd quart", "95%-quant");
      os << line;
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const auto& row = result.summary.rows[m];
        std::snprintf(line, sizeof line, "%-8s %12.4f %12.4f %12.4f %12.4f %12.4f %12.4f\n",
                      methods[m].c_str(), row.q05, row.q25, row.median, row.mean, row.q75,
                      row.q95);
        os << line;
      }
      result.files_written.push_back(path("summary.txt"));
    }
    if (config.write_raw) {
      auto os = open_fresh(path("deviations.csv"));
      std::string out = "method,realization,x,y,deviation\n";
      out.reserve(1 << 20);
      for (std::size_t m = 0; m < methods.size(); ++m) {
        for (int r = 0; r < config.realizations; ++r) {
          const double* dev = pooled[m].data() + static_cast<std::size_t>(r) * n_eval;
          for (std::size_t i = 0; i < n_eval; ++i) {
            out += methods[m] + "," + std::to_string(r) + "," + fmt(layout.eval_pts[i].x) +
                   "," + fmt(layout.eval_pts[i].y) + "," + fmt(dev[i]) + "\n";
            if (out.size() > (1 << 20)) {
              os << out;
              out.clear();
            }
          }
        }
      }
      os << out;
      result.files_written.push_back(path("deviations.csv"));
    }
    if (config.write_surfaces && !surface_field.empty()) {
      export_surface(path("surface_field.csv"), layout.eval_pts, surface_field,
                     "realization 0, simulated field");
      write_surface_plot_script(path("surface_field.gp"), "surface_field.csv",
                                "simulated field");
      result.files_written.push_back(path("surface_field.csv"));
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const std::string base = "surface_" + methods[m];
        export_surface(path(base + ".csv"), layout.eval_pts, surface_methods[m],
                       "realization 0, " + methods[m] + " extrapolation");
        write_surface_plot_script(path(base + ".gp"), base + ".csv",
                                  methods[m] + " extrapolation");
        result.files_written.push_back(path(base + ".csv"));
      }
    }
  }
  return result;
}

}  // namespace stablefield
