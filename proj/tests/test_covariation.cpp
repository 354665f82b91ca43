#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "stablefield/covariation.hpp"
#include "stablefield/stable.hpp"

using namespace stablefield;

namespace {

SiteSystem levy_motion_fixture(double alpha = 1.5, std::size_t cells = 1024) {
  return SiteSystem::kernel_system(FieldModel::levy_sheet(alpha, 1),
                                   DiscreteMeasureGrid::line(0.0, 1.0, cells),
                                   {{1.0, 0.0}}, {0.75, 0.0});
}

FieldModel triangle_ma(double alpha, double radius) {
  return FieldModel::moving_average(
      alpha, 1, [radius](Point d) { return std::max(0.0, 1.0 - std::abs(d.x) / radius); },
      radius);
}

}  // namespace

TEST_CASE("scale of combinations on the unit-interval sheet") {
  const auto sys = levy_motion_fixture();
  SUBCASE("unit weight at the endpoint has unit scale") {
    const std::vector<double> w{0.0, 1.0};
    CHECK(scale_of_combination(sys, w) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("all-zero weights have zero scale") {
    const std::vector<double> w{0.0, 0.0};
    CHECK(scale_of_combination(sys, w) == 0.0);
  }
  SUBCASE("error-combination scale follows the two-piece closed form") {
    for (double lam : {0.0, 0.3, 0.9, 1.4, -0.2}) {
      const std::vector<double> w{-1.0, lam};
      const double expect = std::pow(
          0.75 * std::pow(std::abs(1.0 - lam), 1.5) + 0.25 * std::pow(std::abs(lam), 1.5),
          1.0 / 1.5);
      CHECK(scale_of_combination(sys, w) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("covariation via kernels") {
  const auto model = FieldModel::levy_sheet(1.5, 1);
  const auto grid = DiscreteMeasureGrid::line(0.0, 1.0, 1024);
  SUBCASE("the analytic value three quarters") {
    CHECK(covariation_kernel(model, grid, {0.75, 0}, {1.0, 0}) == 0.75);
  }
  SUBCASE("diagonal equals sigma^alpha") {
    const auto sys = levy_motion_fixture();
    const double kappa = covariation_kernel(model, grid, {0.75, 0}, {0.75, 0});
    const std::vector<double> w{1.0, 0.0};  // indicator weight on the target
    CHECK(kappa == doctest::Approx(std::pow(scale_of_combination(sys, w), 1.5)).epsilon(1e-12));
  }
  SUBCASE("disjoint kernel supports have zero covariation") {
    const auto ma = triangle_ma(1.5, 0.1);
    const auto g = DiscreteMeasureGrid::line(0.0, 2.0, 2048);
    CHECK(covariation_kernel(ma, g, {0.3, 0}, {1.7, 0}) == 0.0);
  }
}

TEST_CASE("sub-gaussian covariation closed form") {
  const CovarianceModel cov{CovarianceModel::Family::kGaussian, 7.0, 0.1};
  CHECK(covariation_subgaussian(cov, 1.5, {0.2, 0.2}, {0.2, 0.2}) ==
        doctest::Approx(std::pow(3.5, 0.75)).epsilon(1e-14));
  CHECK(covariation_subgaussian(cov, 1.5, {0.0, 0.0}, {100.0, 0.0}) ==
        doctest::Approx(0.0).epsilon(1e-30));
  CHECK(covariation_subgaussian(cov, 2.0, {0.0, 0.0}, {0.05, 0.0}) ==
        doctest::Approx(0.5 * cov(0.05)).epsilon(1e-14));
}

TEST_CASE("moment-ratio covariation estimator") {
  SUBCASE("independent pairs estimate near zero") {
    RngStream rng(21, 0);
    const StableParams law(1.5, 1.0, 0.0, 0.0);
    const int n = 100000;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = sample_stable(law, rng);
      y[i] = sample_stable(law, rng);
    }
    CHECK(std::abs(estimate_covariation_flom(x, y, 1.5, 1.0, 1.0)) < 0.05);
  }
  SUBCASE("a variable against itself recovers sigma^alpha") {
    RngStream rng(22, 0);
    const StableParams law(1.5, 1.0, 0.0, 0.0);
    const int n = 100000;
    std::vector<double> x(n);
    for (auto& v : x) v = sample_stable(law, rng);
    CHECK(estimate_covariation_flom(x, x, 1.5, 1.0, 1.0) == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("sub-gaussian pairs recover the closed form") {
    const CovarianceModel cov{CovarianceModel::Family::kGaussian, 7.0, 0.1};
    const double alpha = 1.5;
    const Point s{0.0, 0.0}, t{0.05, 0.0};
    RngStream rng(23, 0);
    const int n = 100000;
    std::vector<double> x(n), y(n);
    const std::vector<Point> pts{s, t};
    for (int i = 0; i < n; ++i) {
      const auto real = simulate_subgaussian_field(cov, alpha, pts, 2, rng);
      x[i] = real.values[0];
      y[i] = real.values[1];
    }
    const double sigma_y = std::sqrt(cov.sill / 2.0);
    const double expect = covariation_subgaussian(cov, alpha, s, t);
    CHECK(estimate_covariation_flom(x, y, alpha, 1.0, sigma_y) ==
          doctest::Approx(expect).epsilon(0.10));
  }
  SUBCASE("input validation") {
    std::vector<double> x{1.0}, y{1.0};
    CHECK_THROWS_AS(estimate_covariation_flom({}, {}, 1.5, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(estimate_covariation_flom(x, y, 1.5, 0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(estimate_covariation_flom(x, y, 1.5, 1.6, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(estimate_covariation_flom(x, y, 1.5, 1.0, 1.0, 0.5), std::invalid_argument);
  }
}

TEST_CASE("moment-ratio scale estimator") {
  SUBCASE("recovers the scale of a width-two stable law") {
    RngStream rng(24, 0);
    const StableParams law(1.5, 2.0, 0.0, 0.0);
    std::vector<double> x(100000);
    for (auto& v : x) v = sample_stable(law, rng);
    CHECK(sigma_from_flom(x, 1.5, 1.0) == doctest::Approx(2.0).epsilon(0.05));
  }
  SUBCASE("all-zero sample has zero scale") {
    const std::vector<double> x(100, 0.0);
    CHECK(sigma_from_flom(x, 1.5, 1.0) == 0.0);
  }
  SUBCASE("gaussian boundary case") {
    RngStream rng(25, 0);
    std::vector<double> x(100000);
    for (auto& v : x) v = std::sqrt(2.0) * rng.normal();  // N(0,2) = S_2(1,0,0)
    CHECK(sigma_from_flom(x, 2.0, 1.0) == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("empty sample rejected") {
    CHECK_THROWS_AS(sigma_from_flom({}, 1.5, 1.0), std::invalid_argument);
  }
}

TEST_CASE("scale gradient matches central finite differences") {
  RngStream rng(26, 0);
  for (double alpha : {1.3, 1.7}) {
    // Lévy sheet in 2D
    {
      const auto grid = DiscreteMeasureGrid::box({0, 0}, {1, 1}, 64, 64);
      std::vector<Point> sites{{0.2, 0.2}, {0.5, 0.5}, {0.8, 0.3}};
      auto sys = SiteSystem::kernel_system(FieldModel::levy_sheet(alpha, 2), grid, sites,
                                           {0.4, 0.6});
      auto objective = [&](std::span<const double> lam) {
        std::vector<double> w(lam.size() + 1);
        w[0] = -1.0;
        for (std::size_t i = 0; i < lam.size(); ++i) w[i + 1] = lam[i];
        return std::pow(scale_of_combination(sys, w), alpha);
      };
      for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> lam(3);
        for (auto& v : lam) v = 2.0 * rng.uniform01() - 0.5;
        const auto grad = gradient_scale_alpha(sys, lam);
        const auto fd = oracles::central_diff(objective, lam, 1e-6);
        for (int j = 0; j < 3; ++j)
          CHECK(grad(j) == doctest::Approx(fd[j]).epsilon(1e-4));
      }
    }
    // moving average in 1D
    {
      const auto model = triangle_ma(alpha, 0.3);
      const auto grid = DiscreteMeasureGrid::line(-0.5, 1.5, 2048);
      std::vector<Point> sites{{0.2, 0}, {0.45, 0}, {0.8, 0}};
      auto sys = SiteSystem::kernel_system(model, grid, sites, {0.5, 0});
      auto objective = [&](std::span<const double> lam) {
        std::vector<double> w(lam.size() + 1);
        w[0] = -1.0;
        for (std::size_t i = 0; i < lam.size(); ++i) w[i + 1] = lam[i];
        return std::pow(scale_of_combination(sys, w), alpha);
      };
      for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> lam(3);
        for (auto& v : lam) v = 2.0 * rng.uniform01() - 0.5;
        const auto grad = gradient_scale_alpha(sys, lam);
        const auto fd = oracles::central_diff(objective, lam, 1e-6);
        for (int j = 0; j < 3; ++j)
          CHECK(grad(j) == doctest::Approx(fd[j]).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("gradient vanishes at the analytic optimum") {
  const auto sys = levy_motion_fixture();
  const std::vector<double> lam{0.9};
  CHECK(std::abs(gradient_scale_alpha(sys, lam)(0)) < 1e-12);
}

TEST_CASE("full dimensionality") {
  SUBCASE("staircase indicators are independent, confirmed by the Gram determinant") {
    const auto grid = DiscreteMeasureGrid::line(0.0, 1.0, 1024);
    auto sys = SiteSystem::kernel_system(FieldModel::levy_sheet(1.5, 1), grid,
                                         {{0.25, 0}, {0.5, 0}, {1.0, 0}}, {0.3, 0});
    const auto report = full_dimensionality_check(sys);
    CHECK(report.full_dimensional);
    // Gram matrix of indicator kernels is [min(t_i, t_j)]; its determinant
    // for 1/4 < 1/2 < 1 is 1/4 * 1/4 * 1/2 = 1/32 > 0.
    const double det = 0.25 * (0.5 * 1.0 - 0.5 * 0.5) - 0.25 * (0.25 - 0.25 * 0.5) +
                       0.25 * (0.25 * 0.5 - 0.5 * 0.25);
    CHECK(det > 0.0);
  }
  SUBCASE("two sites inside one cell collapse to identical kernels") {
    const auto grid = DiscreteMeasureGrid::line(0.0, 1.0, 16);
    auto sys = SiteSystem::kernel_system(FieldModel::levy_sheet(1.5, 1), grid,
                                         {{0.50, 0}, {0.51, 0}}, {0.3, 0});
    CHECK(!full_dimensionality_check(sys).full_dimensional);
  }
  SUBCASE("a single site with nonzero kernel is full dimensional") {
    CHECK(full_dimensionality_check(levy_motion_fixture()).full_dimensional);
  }
  SUBCASE("duplicate sites are rejected at construction") {
    const auto grid = DiscreteMeasureGrid::line(0.0, 1.0, 16);
    CHECK_THROWS_AS(SiteSystem::kernel_system(FieldModel::levy_sheet(1.5, 1), grid,
                                              {{0.5, 0}, {0.5, 0}}, {0.3, 0}),
                    std::invalid_argument);
  }
}

TEST_CASE("skewness of combinations") {
  const auto model = FieldModel::levy_sheet(1.5, 1);
  SUBCASE("symmetric grid gives zero") {
    auto grid = DiscreteMeasureGrid::line(0.0, 1.0, 64);
    auto sys = SiteSystem::kernel_system(model, grid, {{1.0, 0}}, {0.5, 0});
    CHECK(skewness_of_combination(sys, std::vector<double>{0.7}) == 0.0);
  }
  SUBCASE("totally skewed grid saturates at one and flips with the weight sign") {
    auto grid = DiscreteMeasureGrid::line(0.0, 1.0, 64, 1.0);
    auto sys = SiteSystem::kernel_system(model, grid, {{1.0, 0}}, {0.5, 0});
    CHECK(skewness_of_combination(sys, std::vector<double>{0.7}) ==
          doctest::Approx(1.0).epsilon(1e-14));
    CHECK(skewness_of_combination(sys, std::vector<double>{-1.0}) ==
          doctest::Approx(-1.0).epsilon(1e-14));
  }
  SUBCASE("zero-scale combination is rejected") {
    auto grid = DiscreteMeasureGrid::line(0.0, 1.0, 64);
    auto sys = SiteSystem::kernel_system(model, grid, {{1.0, 0}}, {0.5, 0});
    CHECK_THROWS_AS(skewness_of_combination(sys, std::vector<double>{0.0}),
                    std::domain_error);
  }
}

TEST_CASE("covariation is linear in its first argument") {
  const auto model = triangle_ma(1.5, 0.3);
  const auto grid = DiscreteMeasureGrid::line(-0.5, 1.5, 512);
  const Point s{0.3, 0}, u{0.5, 0}, t{0.45, 0};
  const double a = 1.7, b = -0.4;
  // [a X(s) + b X(u), X(t)] computed from the combined kernel
  std::vector<double> fs(grid.cell_count()), fu(grid.cell_count()), ft(grid.cell_count());
  kernel_column(model, s, grid, fs);
  kernel_column(model, u, grid, fu);
  kernel_column(model, t, grid, ft);
  double combined = 0;
  for (std::size_t k = 0; k < grid.cell_count(); ++k)
    combined += (a * fs[k] + b * fu[k]) * signed_power(ft[k], 0.5) * grid.cell_volume();
  const double expect = a * covariation_kernel(model, grid, s, t) +
                        b * covariation_kernel(model, grid, u, t);
  CHECK(combined == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("at alpha=2 the kernel covariation is half the discretized covariance") {
  const auto model = triangle_ma(2.0, 0.3);
  const auto grid = DiscreteMeasureGrid::line(-0.5, 1.5, 512);
  const Point s{0.3, 0}, t{0.4, 0};
  std::vector<double> fs(grid.cell_count()), ft(grid.cell_count());
  kernel_column(model, s, grid, fs);
  kernel_column(model, t, grid, ft);
  double cov = 0;  // Cov(X_s, X_t) = 2 integral f_s f_t dm at alpha = 2
  for (std::size_t k = 0; k < grid.cell_count(); ++k)
    cov += 2.0 * fs[k] * ft[k] * grid.cell_volume();
  CHECK(covariation_kernel(model, grid, s, t) == doctest::Approx(0.5 * cov).epsilon(1e-12));
}

TEST_CASE("moving-average covariation is translation invariant") {
  const auto model = triangle_ma(1.5, 0.3);
  const auto grid = DiscreteMeasureGrid::line(-1.0, 3.0, 4096);
  const double k1 = covariation_kernel(model, grid, {0.3, 0}, {0.5, 0});
  const double k2 = covariation_kernel(model, grid, {1.3, 0}, {1.5, 0});
  CHECK(k1 == doctest::Approx(k2).epsilon(1e-10));
}

TEST_CASE("covariation system honours the argument order") {
  // K(j,i) = [X(t_i), X(t_j)] is not symmetric for alpha < 2.
  const auto model = FieldModel::ornstein_uhlenbeck(1.5, 2.0);
  const auto grid = DiscreteMeasureGrid::line(-10.0, 1.0, 4096);
  auto sys = SiteSystem::kernel_system(model, grid, {{0.2, 0}, {0.8, 0}}, {1.0, 0});
  const auto cs = build_covariation_system(sys);
  CHECK(cs.K(0, 1) ==
        doctest::Approx(covariation_kernel(model, grid, {0.8, 0}, {0.2, 0})).epsilon(1e-13));
  CHECK(cs.K(1, 0) ==
        doctest::Approx(covariation_kernel(model, grid, {0.2, 0}, {0.8, 0})).epsilon(1e-13));
  CHECK(cs.K(0, 1) != doctest::Approx(cs.K(1, 0)).epsilon(1e-6));
  const auto a = mcl_objective_vector(sys);
  CHECK(a(0) ==
        doctest::Approx(covariation_kernel(model, grid, {0.2, 0}, {1.0, 0})).epsilon(1e-13));
}
