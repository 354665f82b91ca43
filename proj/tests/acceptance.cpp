// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stablefield/covariation.hpp"
#include "stablefield/experiments.hpp"
#include "stablefield/predictors.hpp"
#include "stablefield/stable.hpp"

using namespace stablefield;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

namespace {

int g_failed = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  if (!pass) ++g_failed;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SiteSystem levy_motion(double alpha) {
  return SiteSystem::kernel_system(FieldModel::levy_sheet(alpha, 1),
                                   DiscreteMeasureGrid::line(0.0, 1.0, 1024),
                                   {{1.0, 0.0}}, {0.75, 0.0});
}

PredictionProblem problem_of(SiteSystem sys) {
  const auto n = sys.n();
  return {std::move(sys), VectorXd::Zero(static_cast<Eigen::Index>(n))};
}

std::vector<Point> nine_sites() { return default_observation_sites(); }

// --- criteria ----------------------------------------------------------------

void analytic_example() {
  const auto t0 = Clock::now();
  char buf[160];
  const auto col = col_weights(problem_of(levy_motion(1.5)));
  bool pass = std::abs(col.lambda(0) - 0.75) <= 1e-12;
  double worst = 0.0;
  for (double alpha : {1.2, 1.5, 1.8}) {
    const double expect = 1.0 / (1.0 + std::pow(1.0 / 3.0, 1.0 / (alpha - 1.0)));
    const auto lsl = lsl_weights(problem_of(levy_motion(alpha)));
    worst = std::max(worst, std::abs(lsl.lambda(0) - expect));
  }
  pass = pass && worst <= 1e-6;
  const double dt = seconds_since(t0);
  pass = pass && dt < 1.0;
  std::snprintf(buf, sizeof buf, "col err %.2e, lsl worst err %.2e, %.2f s",
                std::abs(col.lambda(0) - 0.75), worst, dt);
  report("analytic-example", pass, buf);
}

void mcl_one_site() {
  const auto w = mcl_weights(problem_of(levy_motion(1.5)));
  const double expect = std::pow(0.75, 2.0 / 3.0);
  char buf[120];
  std::snprintf(buf, sizeof buf, "lambda %.12f vs %.12f", w.lambda(0), expect);
  report("mcl-one-site-closed-form", std::abs(w.lambda(0) - expect) <= 1e-6, buf);
}

void triple_equality() {
  RngStream rng(2024, 0);
  double worst_pair = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Point> sites;
    for (int i = 0; i < 9; ++i) sites.push_back({rng.uniform01(), rng.uniform01()});
    const CovarianceModel cov{CovarianceModel::Family::kGaussian,
                              0.5 + 10.0 * rng.uniform01(), 0.05 + 0.3 * rng.uniform01()};
    const double alpha = 1.001 + 0.998 * rng.uniform01();
    auto sys = SiteSystem::gaussian_system(FieldModel::sub_gaussian(alpha, cov), sites,
                                           {rng.uniform01(), rng.uniform01()});
    const auto prob = problem_of(std::move(sys));
    const auto l = lsl_weights(prob), c = col_weights(prob), m = ml_weights_subgaussian(prob);
    worst_pair = std::max(worst_pair, (l.lambda - c.lambda).lpNorm<Eigen::Infinity>());
    worst_pair = std::max(worst_pair, (m.lambda - c.lambda).lpNorm<Eigen::Infinity>());
    worst_pair = std::max(worst_pair, (l.lambda - m.lambda).lpNorm<Eigen::Infinity>());
  }
  // alpha = 2: production COL against an independently coded kriging solve
  double worst_kriging = 0.0;
  RngStream rng2(2025, 0);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<Point> sites;
    for (int i = 0; i < 9; ++i) sites.push_back({rng2.uniform01(), rng2.uniform01()});
    const CovarianceModel cov{CovarianceModel::Family::kGaussian,
                              0.5 + 6.0 * rng2.uniform01(), 0.08 + 0.2 * rng2.uniform01()};
    const Point target{rng2.uniform01(), rng2.uniform01()};
    auto sys = SiteSystem::gaussian_system(FieldModel::sub_gaussian(2.0, cov), sites, target);
    const auto col = col_weights(problem_of(std::move(sys)));
    std::vector<std::vector<double>> sigma(9, std::vector<double>(9));
    std::vector<double> rhs(9);
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < 9; ++j) sigma[i][j] = cov.at(sites[i], sites[j]);
      rhs[i] = cov.at(target, sites[i]);
    }
    const auto krig = oracles::kriging_weights(sigma, rhs);
    for (int i = 0; i < 9; ++i)
      worst_kriging = std::max(worst_kriging, std::abs(col.lambda(i) - krig[i]));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "pairwise %.2e (tol 1e-8), kriging %.2e (tol 1e-10)",
                worst_pair, worst_kriging);
  report("triple-equality", worst_pair <= 1e-8 && worst_kriging <= 1e-10, buf);
}

void mcl_proportionality() {
  RngStream rng(2026, 0);
  double worst = 1.0;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Point> sites;
    for (int i = 0; i < 9; ++i) sites.push_back({rng.uniform01(), rng.uniform01()});
    const CovarianceModel cov{CovarianceModel::Family::kGaussian,
                              0.5 + 6.0 * rng.uniform01(), 0.08 + 0.2 * rng.uniform01()};
    const Point target{rng.uniform01(), rng.uniform01()};
    auto sys = SiteSystem::gaussian_system(FieldModel::sub_gaussian(2.0, cov), sites, target);
    const auto prob = problem_of(std::move(sys));
    const auto mcl = mcl_weights(prob);
    std::vector<std::vector<double>> sigma(9, std::vector<double>(9));
    std::vector<double> rhs(9);
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < 9; ++j) sigma[i][j] = cov.at(sites[i], sites[j]);
      rhs[i] = cov.at(target, sites[i]);
    }
    const auto krig = oracles::kriging_weights(sigma, rhs);
    double dot = 0, nk = 0;
    for (int i = 0; i < 9; ++i) {
      dot += mcl.lambda(i) * krig[i];
      nk += krig[i] * krig[i];
    }
    worst = std::min(worst, dot / (mcl.lambda.norm() * std::sqrt(nk)));
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "min cosine %.12f (tol 1 - 1e-6)", worst);
  report("mcl-kriging-proportionality", worst >= 1.0 - 1e-6, buf);
}

void ou_closed_form() {
  const double rate = 2.0;
  auto sys = SiteSystem::kernel_system(FieldModel::ornstein_uhlenbeck(1.5, rate),
                                       DiscreteMeasureGrid::line(-12.0, 1.0, 1 << 14),
                                       {{0.2, 0}, {0.5, 0}, {0.8, 0}}, {1.0, 0});
  const auto w = col_weights(problem_of(std::move(sys)));
  const double expect = std::exp(-rate * 0.2);
  const double err = std::max({std::abs(w.lambda(0)), std::abs(w.lambda(1)),
                               std::abs(w.lambda(2) - expect)});
  char buf[120];
  std::snprintf(buf, sizeof buf, "worst err %.2e (tol 1e-8)", err);
  report("ou-closed-form", err <= 1e-8, buf);
}

void gradient_correctness() {
  RngStream rng(2027, 0);
  double worst = 0.0;
  for (double alpha : {1.3, 1.7}) {
    const auto sheet_sys = SiteSystem::kernel_system(
        FieldModel::levy_sheet(alpha, 2), DiscreteMeasureGrid::box({0, 0}, {1, 1}, 64, 64),
        {{0.2, 0.2}, {0.5, 0.5}, {0.8, 0.3}}, {0.4, 0.6});
    const double radius = 0.3;
    const auto ma_sys = SiteSystem::kernel_system(
        FieldModel::moving_average(
            alpha, 1,
            [radius](Point d) { return std::max(0.0, 1.0 - std::abs(d.x) / radius); },
            radius),
        DiscreteMeasureGrid::line(-0.5, 1.5, 2048), {{0.2, 0}, {0.45, 0}, {0.8, 0}},
        {0.5, 0});
    for (const SiteSystem* sys : {&sheet_sys, &ma_sys}) {
      auto objective = [&](std::span<const double> lam) {
        std::vector<double> w(lam.size() + 1);
        w[0] = -1.0;
        for (std::size_t i = 0; i < lam.size(); ++i) w[i + 1] = lam[i];
        return std::pow(scale_of_combination(*sys, w), sys->alpha());
      };
      for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> lam(3);
        for (auto& v : lam) v = 2.0 * rng.uniform01() - 0.5;
        const auto grad = gradient_scale_alpha(*sys, lam);
        const auto fd = oracles::central_diff(objective, lam, 1e-6);
        for (int j = 0; j < 3; ++j) {
          const double rel = std::abs(grad(j) - fd[j]) /
                             std::max(std::abs(fd[j]), 1e-8);
          worst = std::max(worst, rel);
        }
      }
    }
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "worst relative error %.2e (tol 1e-4)", worst);
  report("gradient-correctness", worst <= 1e-4, buf);
}

void exactness_suite() {
  bool pass = true;
  // Every method snaps to the basis vector on site coincidence.
  auto kernel_sys = SiteSystem::kernel_system(
      FieldModel::levy_sheet(1.5, 2), DiscreteMeasureGrid::box({0, 0}, {1, 1}, 64, 64),
      nine_sites(), {0.5, 0.5});
  const auto kp = problem_of(kernel_sys);
  for (const auto& w : {lsl_weights(kp), col_weights(kp), mcl_weights(kp)})
    pass = pass && w.lambda(4) == 1.0 && w.lambda.norm() == 1.0;
  const CovarianceModel cov{CovarianceModel::Family::kGaussian, 7.0, 0.1};
  auto gauss_sys = SiteSystem::gaussian_system(FieldModel::sub_gaussian(1.5, cov),
                                               nine_sites(), {0.8, 0.8});
  const auto gp = problem_of(std::move(gauss_sys));
  for (const auto& w :
       {lsl_weights(gp), col_weights(gp), mcl_weights(gp), ml_weights_subgaussian(gp)})
    pass = pass && w.lambda(8) == 1.0 && w.lambda.norm() == 1.0;

  // Benchmark pipeline: a 51-point grid hits the sites; deviations vanish.
  BenchmarkConfig levy;
  levy.field = BenchmarkConfig::Field::kLevySheet;
  levy.realizations = 10;
  levy.grid_resolution = 51;
  levy.measure_cells = 64;
  levy.seed = 10;
  levy.write_raw = false;
  const double dev_levy = run_benchmark(levy).max_abs_deviation_at_sites;

  BenchmarkConfig sg;
  sg.field = BenchmarkConfig::Field::kSubGaussian;
  sg.realizations = 10;
  sg.grid_resolution = 51;
  sg.seed = 10;
  sg.write_raw = false;
  const double dev_sg = run_benchmark(sg).max_abs_deviation_at_sites;

  char buf[160];
  std::snprintf(buf, sizeof buf, "site deviations: levy %.2e, sub-gaussian %.2e (tol 1e-10)",
                dev_levy, dev_sg);
  report("exactness-suite", pass && dev_levy <= 1e-10 && dev_sg <= 1e-10, buf);
}

void mcl_feasibility_dominance() {
  double worst_constraint = 0.0;
  double worst_margin = 0.0;
  RngStream rng(2028, 0);
  for (int rep = 0; rep < 8; ++rep) {
    auto sys = SiteSystem::kernel_system(
        FieldModel::levy_sheet(1.5, 2), DiscreteMeasureGrid::box({0, 0}, {1, 1}, 64, 64),
        nine_sites(), {0.05 + 0.9 * rng.uniform01(), 0.05 + 0.9 * rng.uniform01()});
    const auto prob = problem_of(sys);
    const auto mcl = mcl_weights(prob);
    worst_constraint = std::max(worst_constraint, mcl.constraint_residual);
    const auto col = col_weights(prob);
    const auto a = mcl_objective_vector(sys);
    std::vector<double> w(sys.n() + 1, 0.0);
    for (std::size_t i = 0; i < sys.n(); ++i)
      w[i + 1] = col.lambda(static_cast<Eigen::Index>(i));
    const double col_scale = scale_of_combination(sys, w);
    if (col_scale > 0.0) {
      const double sigma0 = std::pow(sigma_alpha_target(sys), 1.0 / sys.alpha());
      const double col_obj = (sigma0 / col_scale) * col.lambda.dot(a);
      worst_margin = std::max(worst_margin, col_obj - mcl.lambda.dot(a));
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "constraint %.2e (tol 1e-8), dominance margin %.2e",
                worst_constraint, worst_margin);
  report("mcl-feasibility-dominance", worst_constraint <= 1e-8 && worst_margin <= 1e-10, buf);
}

void flom_estimator() {
  const CovarianceModel cov{CovarianceModel::Family::kGaussian, 7.0, 0.1};
  const double alpha = 1.5;
  const Point s{0.0, 0.0}, t{0.05, 0.0};
  RngStream rng(2029, 0);
  const int n = 100000;
  std::vector<double> x(n), y(n);
  const std::vector<Point> pts{s, t};
  for (int i = 0; i < n; ++i) {
    const auto real = simulate_subgaussian_field(cov, alpha, pts, 2, rng);
    x[i] = real.values[0];
    y[i] = real.values[1];
  }
  const double expect = covariation_subgaussian(cov, alpha, s, t);
  const double est = estimate_covariation_flom(x, y, alpha, 1.0, std::sqrt(cov.sill / 2.0));
  const double rel = std::abs(est - expect) / expect;
  char buf[120];
  std::snprintf(buf, sizeof buf, "estimate %.4f vs %.4f, rel %.3f (tol 0.10)", est, expect,
                rel);
  report("flom-estimator", rel <= 0.10, buf);
}

void sampler_checks() {
  RngStream rng(2030, 0);
  const StableParams law(2.0, 1.3, 0.0, 0.0);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = sample_stable(law, rng);
    s += v;
    s2 += v * v;
  }
  const double var = s2 / n - (s / n) * (s / n);
  const double want = 2.0 * 1.3 * 1.3;
  const bool var_ok = std::abs(var - want) <= 0.05 * want;

  RngStream arng(2031, 0);
  bool positive = true;
  for (int i = 0; i < 1000000; ++i)
    positive = positive && sample_subgaussian_A(1.5, arng) > 0.0;

  RngStream d1(555, 3), d2(555, 3);
  bool deterministic = true;
  for (int i = 0; i < 1000; ++i)
    deterministic = deterministic &&
                    sample_stable(StableParams(1.5, 1, 0, 0), d1) ==
                        sample_stable(StableParams(1.5, 1, 0, 0), d2);

  char buf[160];
  std::snprintf(buf, sizeof buf, "var %.4f vs %.4f, positivity %s, determinism %s", var,
                want, positive ? "yes" : "NO", deterministic ? "byte-exact" : "BROKEN");
  report("sampler-checks", var_ok && positive && deterministic, buf);
}

void desk_scale_reproduction() {
  const auto t0 = Clock::now();
  BenchmarkConfig sg;
  sg.field = BenchmarkConfig::Field::kSubGaussian;
  sg.realizations = 200;
  sg.grid_resolution = 50;
  sg.seed = 10;
  sg.write_raw = false;
  const auto sub = run_benchmark(sg);
  double worst_median = 0.0;
  for (const auto& row : sub.summary.rows)
    worst_median = std::max(worst_median, std::abs(row.median));

  BenchmarkConfig levy;
  levy.field = BenchmarkConfig::Field::kLevySheet;
  levy.realizations = 200;
  levy.grid_resolution = 50;
  levy.measure_cells = 128;
  levy.seed = 10;
  levy.write_raw = false;
  const auto sheet = run_benchmark(levy);
  const auto& lsl_row = sheet.summary.rows[0];  // methods default to lsl first
  const bool quartiles_ok = std::abs(lsl_row.q25 - (-0.1246)) <= 0.30 * 0.1246 &&
                            std::abs(lsl_row.q75 - 0.1226) <= 0.30 * 0.1226;

  // conditional simulation honours its conditioning values
  const CovarianceModel cov{CovarianceModel::Family::kGaussian, 7.0, 0.1};
  RngStream rng(2032, 0);
  auto field = simulate_subgaussian_field(cov, 1.5, nine_sites(), 2, rng);
  std::vector<Point> targets = nine_sites();
  targets.push_back({0.33, 0.61});
  const auto cs = conditional_simulate_subgaussian(cov, 1.5, nine_sites(), field.values,
                                                   targets, rng);
  double cs_err = 0.0;
  for (std::size_t i = 0; i < 9; ++i)
    cs_err = std::max(cs_err, std::abs(cs.values[i] - field.values[i]));

  const double dt = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "medians<=%.4f (tol 0.05), lsl quartiles (%.4f, %.4f), cs honor %.2e, %.0f s",
                worst_median, lsl_row.q25, lsl_row.q75, cs_err, dt);
  report("desk-scale-reproduction",
         worst_median <= 0.05 && quartiles_ok && cs_err <= 1e-10 && dt <= 600.0, buf);
}

void continuity_probe() {
  auto sys = SiteSystem::kernel_system(FieldModel::levy_sheet(1.5, 1),
                                       DiscreteMeasureGrid::line(0.0, 1.0, 4096),
                                       {{0.25, 0}, {0.5, 0}, {1.0, 0}}, {0.1, 0});
  bool pass = true;
  std::string detail;
  for (auto method : {Method::kLSL, Method::kCOL, Method::kMCL}) {
    double previous = 1e300;
    bool decreasing = true;
    for (int level = 0; level < 4; ++level) {
      const int pts = 9 * (1 << level);
      std::vector<Point> path(pts);
      for (int i = 0; i < pts; ++i)
        path[i] = {0.05 + 0.9 * static_cast<double>(i) / (pts - 1), 0.0};
      const auto ws = weight_field(sys, path, method);
      double max_jump = 0.0;
      for (int i = 0; i + 1 < pts; ++i)
        max_jump = std::max(max_jump,
                            (ws[i + 1].lambda - ws[i].lambda).lpNorm<Eigen::Infinity>());
      if (level > 0) decreasing = decreasing && max_jump < previous;
      previous = max_jump;
    }
    pass = pass && decreasing;
    detail += std::string(method_name(method)) + (decreasing ? " ok " : " NOT-DECREASING ");
  }
  report("continuity-probe", pass, detail);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  analytic_example();
  mcl_one_site();
  triple_equality();
  mcl_proportionality();
  ou_closed_form();
  gradient_correctness();
  exactness_suite();
  mcl_feasibility_dominance();
  flom_estimator();
  sampler_checks();
  desk_scale_reproduction();
  continuity_probe();
  std::printf("---\n%s (%d criterion failures, %.0f s total)\n",
              g_failed == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", g_failed,
              seconds_since(t0));
  return g_failed == 0 ? 0 : 1;
}
