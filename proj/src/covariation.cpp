#include "stablefield/covariation.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "stablefield/kernels.hpp"
#include "stablefield/stable.hpp"

namespace stablefield {
namespace {

void check_sites(const std::vector<Point>& sites, int dim) {
  if (sites.empty()) throw std::invalid_argument("SiteSystem: needs at least one site");
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      if (same_point(sites[i], sites[j], dim))
        throw std::invalid_argument("SiteSystem: observation sites must be pairwise distinct");
}

}  // namespace

SiteSystem SiteSystem::kernel_system(FieldModel model, DiscreteMeasureGrid grid,
                                     std::vector<Point> sites, Point target) {
  if (!model.is_kernel_model())
    throw std::invalid_argument("SiteSystem: sub-Gaussian models use gaussian_system");
  if (model.dim() != grid.dim())
    throw std::invalid_argument("SiteSystem: model/grid dimension mismatch");
  check_sites(sites, model.dim());

  auto cache = std::make_shared<KernelCache>();
  cache->grid = std::move(grid);
  const std::size_t cells = cache->grid.cell_count();
  cache->site_kernels.resize(static_cast<Eigen::Index>(cells),
                             static_cast<Eigen::Index>(sites.size()));
  for (std::size_t i = 0; i < sites.size(); ++i) {
    kernel_column(model, sites[i], cache->grid,
                  {cache->site_kernels.col(static_cast<Eigen::Index>(i)).data(), cells});
  }

  SiteSystem sys;
  sys.model_ = std::move(model);
  sys.sites_ = std::move(sites);
  sys.target_ = target;
  sys.cache_ = std::move(cache);
  sys.target_kernel_.resize(static_cast<Eigen::Index>(cells));
  kernel_column(sys.model_, target, sys.cache_->grid, {sys.target_kernel_.data(), cells});
  return sys;
}

SiteSystem SiteSystem::gaussian_system(FieldModel model, std::vector<Point> sites,
                                       Point target) {
  if (model.is_kernel_model())
    throw std::invalid_argument("SiteSystem: kernel models use kernel_system");
  check_sites(sites, model.dim());
  SiteSystem sys;
  sys.model_ = std::move(model);
  sys.sites_ = std::move(sites);
  sys.target_ = target;
  return sys;
}

const DiscreteMeasureGrid& SiteSystem::grid() const {
  if (!cache_) throw std::logic_error("SiteSystem: no grid on a (sub-)Gaussian system");
  return cache_->grid;
}

const Eigen::MatrixXd& SiteSystem::site_kernels() const {
  if (!cache_) throw std::logic_error("SiteSystem: no kernels on a (sub-)Gaussian system");
  return cache_->site_kernels;
}

const Eigen::VectorXd& SiteSystem::target_kernel() const {
  if (!cache_) throw std::logic_error("SiteSystem: no kernels on a (sub-)Gaussian system");
  return target_kernel_;
}

double SiteSystem::cell_volume() const { return grid().cell_volume(); }

SiteSystem SiteSystem::with_target(const Point& target) const {
  SiteSystem sys(*this);
  sys.target_ = target;
  if (cache_) {
    kernel_column(model_, target, cache_->grid,
                  {sys.target_kernel_.data(), static_cast<std::size_t>(sys.target_kernel_.size())});
  }
  return sys;
}

int SiteSystem::coincident_site() const {
  for (std::size_t i = 0; i < sites_.size(); ++i)
    if (same_point(target_, sites_[i], model_.dim())) return static_cast<int>(i);
  return -1;
}

double scale_of_combination(const SiteSystem& sys, std::span<const double> weights) {
  if (!sys.kernel_based())
    throw std::invalid_argument("scale_of_combination: kernel systems only");
  if (weights.size() != sys.n() + 1)
    throw std::invalid_argument("scale_of_combination: expected n+1 weights");

  const Eigen::Map<const Eigen::VectorXd> lam(weights.data() + 1,
                                              static_cast<Eigen::Index>(sys.n()));
  Eigen::VectorXd combo = sys.site_kernels() * lam;
  if (weights[0] != 0.0) combo += weights[0] * sys.target_kernel();
  const double mass = kernels::active().abs_pow_sum(
      combo.data(), static_cast<std::size_t>(combo.size()), sys.alpha());
  return std::pow(sys.cell_volume() * mass, 1.0 / sys.alpha());
}

double sigma_alpha_target(const SiteSystem& sys) {
  if (sys.kernel_based()) {
    const auto& f0 = sys.target_kernel();
    return sys.cell_volume() * kernels::active().abs_pow_sum(
                                   f0.data(), static_cast<std::size_t>(f0.size()), sys.alpha());
  }
  const double c0 = sys.model().covariance().sill;
  return std::pow(c0 / 2.0, sys.alpha() / 2.0);
}

double covariation_kernel(const FieldModel& model, const DiscreteMeasureGrid& grid,
                          const Point& s, const Point& t) {
  if (!model.is_kernel_model())
    throw std::invalid_argument("covariation_kernel: kernel models only");
  if (!(model.alpha > 1.0))
    throw std::invalid_argument("covariation_kernel: requires alpha > 1");
  const std::size_t cells = grid.cell_count();
  std::vector<double> fs(cells), ft(cells);
  kernel_column(model, s, grid, fs);
  kernel_column(model, t, grid, ft);
  return grid.cell_volume() *
         kernels::active().dot_signed_pow(fs.data(), ft.data(), cells, model.alpha - 1.0);
}

double covariation_subgaussian(const CovarianceModel& cov, double alpha, const Point& s,
                               const Point& t) {
  if (!(alpha > 1.0) || alpha > 2.0)
    throw std::invalid_argument("covariation_subgaussian: alpha must lie in (1,2]");
  return std::pow(2.0, -alpha / 2.0) * cov.at(s, t) *
         std::pow(cov.sill, (alpha - 2.0) / 2.0);
}

double estimate_covariation_flom(std::span<const double> x, std::span<const double> y,
                                 double alpha, double p, double sigma_y, double beta_y) {
  if (x.empty() || x.size() != y.size())
    throw std::invalid_argument("estimate_covariation_flom: need equal-length nonempty samples");
  if (!(p >= 1.0) || !(p < alpha))
    throw std::invalid_argument("estimate_covariation_flom: requires 1 <= p < alpha");
  if (beta_y != 0.0)
    throw std::invalid_argument(
        "estimate_covariation_flom: only the symmetric case (beta_y = 0) is supported");
  const auto& ops = kernels::active();
  const double num = ops.dot_signed_pow(x.data(), y.data(), y.size(), p - 1.0);
  const double den = ops.abs_pow_sum(y.data(), y.size(), p);
  if (den == 0.0)
    throw std::invalid_argument("estimate_covariation_flom: y samples are identically zero");
  return num / den * std::pow(sigma_y, alpha);
}

double sigma_from_flom(std::span<const double> x, double alpha, double p) {
  if (x.empty()) throw std::invalid_argument("sigma_from_flom: empty sample");
  const double mean_pow =
      kernels::active().abs_pow_sum(x.data(), x.size(), p) / static_cast<double>(x.size());
  return std::pow(mean_pow, 1.0 / p) / moment_constant(alpha, p);
}

Eigen::VectorXd gradient_scale_alpha(const SiteSystem& sys, std::span<const double> lambda) {
  if (!sys.kernel_based())
    throw std::invalid_argument("gradient_scale_alpha: kernel systems only");
  if (lambda.size() != sys.n())
    throw std::invalid_argument("gradient_scale_alpha: expected n weights");

  const Eigen::Map<const Eigen::VectorXd> lam(lambda.data(),
                                              static_cast<Eigen::Index>(sys.n()));
  Eigen::VectorXd residual = sys.site_kernels() * lam - sys.target_kernel();
  Eigen::VectorXd transformed(residual.size());
  kernels::active().signed_pow(residual.data(), static_cast<std::size_t>(residual.size()),
                               sys.alpha() - 1.0, transformed.data());
  return sys.alpha() * sys.cell_volume() * (sys.site_kernels().transpose() * transformed);
}

FullDimReport full_dimensionality_check(const SiteSystem& sys) {
  if (!sys.kernel_based())
    throw std::invalid_argument("full_dimensionality_check: kernel systems only");
  FullDimReport report;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.site_kernels());
  const auto& sv = svd.singularValues();
  report.smax = sv(0);
  report.smin = sv(sv.size() - 1);
  report.ratio = report.smax > 0.0 ? report.smin / report.smax : 0.0;
  report.full_dimensional = report.smax > 0.0 && report.ratio > report.threshold;
  return report;
}

double skewness_of_combination(const SiteSystem& sys, std::span<const double> lambda) {
  if (!sys.kernel_based())
    throw std::invalid_argument("skewness_of_combination: kernel systems only");
  if (lambda.size() != sys.n())
    throw std::invalid_argument("skewness_of_combination: expected n weights");

  const Eigen::Map<const Eigen::VectorXd> lam(lambda.data(),
                                              static_cast<Eigen::Index>(sys.n()));
  const Eigen::VectorXd combo = sys.site_kernels() * lam;
  const auto& grid = sys.grid();
  const std::size_t cells = grid.cell_count();

  Eigen::VectorXd signed_alpha(combo.size());
  kernels::active().signed_pow(combo.data(), cells, sys.alpha(), signed_alpha.data());

  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    numerator += signed_alpha(static_cast<Eigen::Index>(k)) * grid.skewness(k);
    denominator += std::abs(signed_alpha(static_cast<Eigen::Index>(k)));
  }
  if (denominator == 0.0)
    throw std::domain_error("skewness_of_combination: combination has zero scale");
  return numerator / denominator;
}

CovariationSystem build_covariation_system(const SiteSystem& sys) {
  const Eigen::Index n = static_cast<Eigen::Index>(sys.n());
  CovariationSystem out;
  out.K.resize(n, n);
  out.b.resize(n);

  if (sys.kernel_based()) {
    const auto& F = sys.site_kernels();
    const std::size_t cells = static_cast<std::size_t>(F.rows());
    const double vol = sys.cell_volume();
    const double p = sys.alpha() - 1.0;
    Eigen::VectorXd sp(F.rows());
    const auto& ops = kernels::active();
    for (Eigen::Index j = 0; j < n; ++j) {
      ops.signed_pow(F.col(j).data(), cells, p, sp.data());
      for (Eigen::Index i = 0; i < n; ++i) out.K(j, i) = vol * F.col(i).dot(sp);
      out.b(j) = vol * sys.target_kernel().dot(sp);
    }
    return out;
  }

  const auto& cov = sys.model().covariance();
  const double alpha = sys.alpha();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      out.K(j, i) = covariation_subgaussian(cov, alpha, sys.sites()[static_cast<std::size_t>(i)],
                                            sys.sites()[static_cast<std::size_t>(j)]);
    }
    out.b(j) = covariation_subgaussian(cov, alpha, sys.target(),
                                       sys.sites()[static_cast<std::size_t>(j)]);
  }
  return out;
}

Eigen::VectorXd mcl_objective_vector(const SiteSystem& sys) {
  const Eigen::Index n = static_cast<Eigen::Index>(sys.n());
  Eigen::VectorXd a(n);
  if (sys.kernel_based()) {
    const auto& F = sys.site_kernels();
    const double vol = sys.cell_volume();
    Eigen::VectorXd sp(F.rows());
    kernels::active().signed_pow(sys.target_kernel().data(),
                                 static_cast<std::size_t>(F.rows()), sys.alpha() - 1.0,
                                 sp.data());
    for (Eigen::Index i = 0; i < n; ++i) a(i) = vol * F.col(i).dot(sp);
    return a;
  }
  const auto& cov = sys.model().covariance();
  for (Eigen::Index i = 0; i < n; ++i)
    a(i) = covariation_subgaussian(cov, sys.alpha(), sys.sites()[static_cast<std::size_t>(i)],
                                   sys.target());
  return a;
}

}  // namespace stablefield
