#include "stablefield/field_models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stablefield/kernels.hpp"
#include "stablefield/stable.hpp"

namespace stablefield {
namespace {

void require_dim(int dim) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("dim must be 1 or 2");
}

void format_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

CovarianceModel::CovarianceModel(Family family_, double sill_, double range_)
    : family(family_), sill(sill_), range(range_) {
  if (!(sill > 0.0)) throw std::invalid_argument("CovarianceModel: sill must be > 0");
  if (!(range > 0.0)) throw std::invalid_argument("CovarianceModel: range must be > 0");
}

double CovarianceModel::operator()(double h) const {
  const double u = h / range;
  return family == Family::kGaussian ? sill * std::exp(-u * u) : sill * std::exp(-std::abs(u));
}

double CovarianceModel::at(const Point& a, const Point& b) const {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return (*this)(std::sqrt(dx * dx + dy * dy));
}

FieldModel FieldModel::levy_sheet(double alpha, int dim) {
  require_dim(dim);
  if (!(alpha > 1.0) || alpha > 2.0)
    throw std::invalid_argument("FieldModel: alpha must lie in (1,2]");
  return {alpha, LevySheet{dim}};
}

FieldModel FieldModel::moving_average(double alpha, int dim, std::function<double(Point)> f,
                                      double support_radius) {
  require_dim(dim);
  if (!(alpha > 1.0) || alpha > 2.0)
    throw std::invalid_argument("FieldModel: alpha must lie in (1,2]");
  if (!f) throw std::invalid_argument("FieldModel: moving average needs a kernel");
  if (!(support_radius > 0.0))
    throw std::invalid_argument("FieldModel: support radius must be > 0");
  return {alpha, MovingAverage{dim, std::move(f), support_radius}};
}

FieldModel FieldModel::ornstein_uhlenbeck(double alpha, double rate) {
  if (!(alpha > 1.0) || alpha > 2.0)
    throw std::invalid_argument("FieldModel: alpha must lie in (1,2]");
  if (!(rate > 0.0)) throw std::invalid_argument("FieldModel: OU rate must be > 0");
  return {alpha, OrnsteinUhlenbeck{rate}};
}

FieldModel FieldModel::sub_gaussian(double alpha, CovarianceModel cov) {
  if (!(alpha > 1.0) || alpha > 2.0)
    throw std::invalid_argument("FieldModel: alpha must lie in (1,2]");
  return {alpha, SubGaussian{cov}};
}

int FieldModel::dim() const {
  if (const auto* ls = std::get_if<LevySheet>(&family)) return ls->dim;
  if (const auto* ma = std::get_if<MovingAverage>(&family)) return ma->dim;
  if (std::holds_alternative<OrnsteinUhlenbeck>(family)) return 1;
  return 2;  // sub-Gaussian fields are used on the plane here; 1D sites have y=0
}

const CovarianceModel& FieldModel::covariance() const {
  const auto* sg = std::get_if<SubGaussian>(&family);
  if (sg == nullptr)
    throw std::invalid_argument("FieldModel: only sub-Gaussian models carry a covariance");
  return sg->cov;
}

std::string FieldModel::tag() const {
  if (std::holds_alternative<LevySheet>(family)) return "levy-sheet";
  if (std::holds_alternative<MovingAverage>(family)) return "moving-average";
  if (std::holds_alternative<OrnsteinUhlenbeck>(family)) return "ornstein-uhlenbeck";
  return "sub-gaussian";
}

double eval_kernel(const FieldModel& model, const Point& t, const Point& x) {
  if (const auto* ls = std::get_if<LevySheet>(&model.family)) {
    const bool in_x = x.x >= 0.0 && x.x <= t.x;
    if (ls->dim == 1) return in_x ? 1.0 : 0.0;
    return (in_x && x.y >= 0.0 && x.y <= t.y) ? 1.0 : 0.0;
  }
  if (const auto* ma = std::get_if<MovingAverage>(&model.family)) {
    const Point d{t.x - x.x, ma->dim == 2 ? t.y - x.y : 0.0};
    const double r2 = d.x * d.x + d.y * d.y;
    if (r2 > ma->support_radius * ma->support_radius) return 0.0;
    return ma->kernel(d);
  }
  if (const auto* ou = std::get_if<OrnsteinUhlenbeck>(&model.family)) {
    const double lag = t.x - x.x;
    return lag >= 0.0 ? std::exp(-ou->rate * lag) : 0.0;
  }
  throw std::invalid_argument("eval_kernel: sub-Gaussian fields have no kernel representation");
}

void kernel_column(const FieldModel& model, const Point& t, const DiscreteMeasureGrid& grid,
                   std::span<double> out) {
  const std::size_t n = grid.cell_count();
  if (out.size() != n) throw std::invalid_argument("kernel_column: output size mismatch");
  const double* cx = grid.centers_x().data();
  const double* cy = grid.dim() == 2 ? grid.centers_y().data() : nullptr;

  if (const auto* ls = std::get_if<LevySheet>(&model.family)) {
    if (ls->dim == 1) {
      for (std::size_t k = 0; k < n; ++k) out[k] = (cx[k] >= 0.0 && cx[k] <= t.x) ? 1.0 : 0.0;
    } else {
      for (std::size_t k = 0; k < n; ++k)
        out[k] = (cx[k] >= 0.0 && cx[k] <= t.x && cy[k] >= 0.0 && cy[k] <= t.y) ? 1.0 : 0.0;
    }
    return;
  }
  if (const auto* ou = std::get_if<OrnsteinUhlenbeck>(&model.family)) {
    for (std::size_t k = 0; k < n; ++k) {
      const double lag = t.x - cx[k];
      out[k] = lag >= 0.0 ? std::exp(-ou->rate * lag) : 0.0;
    }
    return;
  }
  if (const auto* ma = std::get_if<MovingAverage>(&model.family)) {
    const double r2max = ma->support_radius * ma->support_radius;
    for (std::size_t k = 0; k < n; ++k) {
      const Point d{t.x - cx[k], ma->dim == 2 ? t.y - cy[k] : 0.0};
      const double r2 = d.x * d.x + d.y * d.y;
      out[k] = r2 > r2max ? 0.0 : ma->kernel(d);
    }
    return;
  }
  throw std::invalid_argument("kernel_column: sub-Gaussian fields have no kernel representation");
}

double kernel_mass_alpha(const FieldModel& model, const Point& t,
                         const DiscreteMeasureGrid& grid) {
  std::vector<double> col(grid.cell_count());
  kernel_column(model, t, grid, col);
  return grid.cell_volume() *
         kernels::active().abs_pow_sum(col.data(), col.size(), model.alpha);
}

CoverageReport check_grid_coverage(const FieldModel& model, std::span<const Point> sites,
                                   const DiscreteMeasureGrid& grid, double tol) {
  const DiscreteMeasureGrid wide = grid.doubled();
  CoverageReport report;
  report.tolerance = tol;
  for (const Point& t : sites) {
    const double inside = kernel_mass_alpha(model, t, grid);
    const double total = kernel_mass_alpha(model, t, wide);
    const double outside = std::max(0.0, total - inside);
    const double rel = outside / std::max(inside, 1e-300);
    report.worst_outside_fraction = std::max(report.worst_outside_fraction, rel);
  }
  report.ok = report.worst_outside_fraction <= tol;
  return report;
}

void FieldRealization::write_csv(std::ostream& os) const {
  std::string out;
  out += "# model=" + model_tag;
  out += " alpha=";
  format_double(out, alpha);
  out += " seed=" + std::to_string(seed) + " stream=" + std::to_string(stream);
  out += "\n";
  if (std::isfinite(a_draw)) {
    out += "# a_draw=";
    format_double(out, a_draw);
    out += "\n";
  }
  if (coverage_warning) out += "# warning=grid-coverage\n";
  out += dim == 2 ? "x,y,value\n" : "x,value\n";
  for (std::size_t i = 0; i < sites.size(); ++i) {
    format_double(out, sites[i].x);
    if (dim == 2) {
      out += ',';
      format_double(out, sites[i].y);
    }
    out += ',';
    format_double(out, values[i]);
    out += '\n';
  }
  os << out;
}

void FieldRealization::write_csv_file(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_csv(os);
}

SiteData read_sites_csv(std::istream& is) {
  SiteData data;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      data.dim = std::count(line.begin(), line.end(), ',') >= 2 ? 2 : 1;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    Point p;
    if (!std::getline(row, cell, ',')) continue;
    p.x = std::stod(cell);
    if (data.dim == 2) {
      if (!std::getline(row, cell, ',')) throw std::runtime_error("bad CSV row: " + line);
      p.y = std::stod(cell);
    }
    if (!std::getline(row, cell, ',')) throw std::runtime_error("bad CSV row: " + line);
    data.sites.push_back(p);
    data.values.push_back(std::stod(cell));
  }
  if (!header_seen) throw std::runtime_error("CSV has no header row");
  return data;
}

SiteData read_sites_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_sites_csv(is);
}

std::vector<double> simulate_measure(const DiscreteMeasureGrid& grid, double alpha,
                                     RngStream& rng) {
  const double scale = std::pow(grid.cell_volume(), 1.0 / alpha);
  std::vector<double> draws(grid.cell_count());
  if (grid.symmetric()) {
    const StableParams law(alpha, scale, 0.0, 0.0);
    for (double& d : draws) d = sample_stable(law, rng);
  } else {
    for (std::size_t k = 0; k < draws.size(); ++k) {
      const StableParams law(alpha, scale, grid.skewness(k), 0.0);
      draws[k] = sample_stable(law, rng);
    }
  }
  return draws;
}

FieldRealization simulate_field(const FieldModel& model, std::span<const Point> sites,
                                const DiscreteMeasureGrid& grid, RngStream& rng,
                                bool check_coverage) {
  if (!model.is_kernel_model())
    throw std::invalid_argument("simulate_field: use simulate_subgaussian_field");
  if (model.dim() != grid.dim())
    throw std::invalid_argument("simulate_field: model/grid dimension mismatch");

  FieldRealization out;
  out.dim = model.dim();
  out.model_tag = model.tag();
  out.alpha = model.alpha;
  out.seed = rng.seed();
  out.stream = rng.stream();
  out.sites.assign(sites.begin(), sites.end());
  out.measure_draws = simulate_measure(grid, model.alpha, rng);
  out.values.resize(sites.size());

  const auto& ops = kernels::active();
  const std::size_t cells = grid.cell_count();
  if (std::holds_alternative<LevySheet>(model.family)) {
    const double* m = out.measure_draws.data();
    if (out.dim == 1) {
      for (std::size_t i = 0; i < sites.size(); ++i)
        out.values[i] = ops.masked_window_sum(grid.centers_x().data(), m, cells, 0.0, sites[i].x);
    } else {
      for (std::size_t i = 0; i < sites.size(); ++i)
        out.values[i] = ops.masked_window_sum2(grid.centers_x().data(), grid.centers_y().data(),
                                               m, cells, 0.0, sites[i].x, 0.0, sites[i].y);
    }
  } else {
    std::vector<double> col(cells);
    const Eigen::Map<const Eigen::VectorXd> m(out.measure_draws.data(), cells);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      kernel_column(model, sites[i], grid, col);
      out.values[i] = Eigen::Map<const Eigen::VectorXd>(col.data(), cells).dot(m);
    }
  }

  if (check_coverage) {
    out.coverage_warning = !check_grid_coverage(model, sites, grid).ok;
  }
  return out;
}

Eigen::MatrixXd covariance_matrix(const CovarianceModel& cov, std::span<const Point> pts) {
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd sigma(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double value = cov.at(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]);
      sigma(i, j) = value;
      sigma(j, i) = value;
    }
  }
  return sigma;
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd sigma, double jitter) {
  double added = jitter;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::MatrixXd work = sigma;
    if (added > 0.0) work.diagonal().array() += added;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) return llt;
    added = added > 0.0 ? added * 100.0 : jitter;
  }
  // Report how indefinite the matrix looks.
  const Eigen::VectorXd d = sigma.ldlt().vectorD();
  throw numerical_error("cholesky_with_jitter: factorization failed; min eigenvalue estimate " +
                        std::to_string(d.minCoeff()) + ", jitter reached " +
                        std::to_string(added));
}

FieldRealization simulate_gaussian_field(const CovarianceModel& cov,
                                         std::span<const Point> sites, int dim,
                                         RngStream& rng, double jitter_scale) {
  require_dim(dim);
  const auto llt = cholesky_with_jitter(covariance_matrix(cov, sites), jitter_scale * cov.sill);
  Eigen::VectorXd z(static_cast<Eigen::Index>(sites.size()));
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  const Eigen::VectorXd values = llt.matrixL() * z;

  FieldRealization out;
  out.dim = dim;
  out.model_tag = "gaussian";
  out.alpha = 2.0;
  out.seed = rng.seed();
  out.stream = rng.stream();
  out.sites.assign(sites.begin(), sites.end());
  out.values.assign(values.data(), values.data() + values.size());
  return out;
}

FieldRealization simulate_subgaussian_field(const CovarianceModel& cov, double alpha,
                                            std::span<const Point> sites, int dim,
                                            RngStream& rng, double jitter_scale) {
  const double a = sample_subgaussian_A(alpha, rng);
  FieldRealization out = simulate_gaussian_field(cov, sites, dim, rng, jitter_scale);
  const double root_a = std::sqrt(a);
  for (double& v : out.values) v *= root_a;
  out.model_tag = "sub-gaussian";
  out.alpha = alpha;
  out.a_draw = a;
  return out;
}

}  // namespace stablefield
