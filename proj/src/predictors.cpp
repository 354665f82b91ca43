#include "stablefield/predictors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "stablefield/kernels.hpp"
#include "stablefield/stable.hpp"

namespace stablefield {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kLslTol = 1e-9;
constexpr int kMaxIterations = 500;

PredictorWeights basis_vector(std::size_t n, int i, Method m) {
  PredictorWeights w;
  w.lambda = VectorXd::Zero(static_cast<Index>(n));
  w.lambda(i) = 1.0;
  w.method = m;
  w.achieved_scale = 0.0;
  w.first_order_residual = 0.0;
  if (m == Method::kMCL) w.constraint_residual = 0.0;
  return w;
}

// --- (sub-)Gaussian plumbing -----------------------------------------------

struct GaussianParts {
  MatrixXd sigma;  // [C(t_i - t_j)]
  VectorXd c0;     // [C(t0 - t_i)]
  double c00;      // C(0)
};

GaussianParts gaussian_parts(const SiteSystem& sys) {
  const auto& cov = sys.model().covariance();
  GaussianParts parts;
  parts.sigma = covariance_matrix(cov, sys.sites());
  parts.c0.resize(static_cast<Index>(sys.n()));
  for (std::size_t i = 0; i < sys.n(); ++i)
    parts.c0(static_cast<Index>(i)) = cov.at(sys.target(), sys.sites()[i]);
  parts.c00 = cov.sill;
  return parts;
}

Eigen::LLT<MatrixXd> factor_spd(const MatrixXd& m, double sill) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  return cholesky_with_jitter(m, 1e-10 * sill);
}

// Scale of the prediction error for a weight vector.
double error_scale_kernel(const SiteSystem& sys, const VectorXd& lambda) {
  std::vector<double> w(sys.n() + 1);
  w[0] = -1.0;
  for (std::size_t i = 0; i < sys.n(); ++i) w[i + 1] = lambda(static_cast<Index>(i));
  return scale_of_combination(sys, w);
}

double error_scale_gaussian(const GaussianParts& g, const VectorXd& lambda) {
  const double quad =
      lambda.dot(g.sigma * lambda) - 2.0 * lambda.dot(g.c0) + g.c00;
  return std::sqrt(std::max(quad, 0.0) / 2.0);
}

// --- convex L^alpha minimizer ----------------------------------------------
//
// minimize phi(lambda) = vol * sum_k |(F lambda - g0)_k|^alpha  (1 < alpha <= 2)
//
// IRLS directions (the Gauss-Newton bound of the smoothed Hessian) with an
// Armijo line search on the true objective and a shrinking smoothing
// parameter. Plain damped gradient descent needs far more than the iteration
// cap on ill-conditioned systems, so the weighted-least-squares direction is
// used instead; the exit certificate below is unchanged.

struct LalphaResult {
  VectorXd lambda;
  int iterations = 0;
  double grad_norm = 0.0;
  double objective = 0.0;
  bool converged = false;
};

LalphaResult minimize_lalpha_impl(const MatrixXd& F, const VectorXd& g0, double alpha,
                                  double vol, VectorXd lambda, double tol, int max_iter,
                                  int depth) {
  const auto& ops = kernels::active();
  const std::size_t cells = static_cast<std::size_t>(F.rows());
  const Index n = F.cols();

  LalphaResult out;
  if (n == 0) {
    out.lambda = lambda;
    out.objective = vol * ops.abs_pow_sum(g0.data(), cells, alpha);
    out.converged = true;
    return out;
  }

  VectorXd r = F * lambda - g0;
  double obj = vol * ops.abs_pow_sum(r.data(), cells, alpha);
  const double r0_rms = std::sqrt(r.squaredNorm() / static_cast<double>(cells));
  double eps = 1e-3 * r0_rms;
  const double eps_floor = 1e-14 * r0_rms + 1e-300;

  VectorXd sp(F.rows()), weights(F.rows()), smooth(F.rows());
  MatrixXd weighted(F.rows(), n);
  VectorXd grad(n);

  int it = 0;
  for (; it < max_iter; ++it) {
    ops.signed_pow(r.data(), cells, alpha - 1.0, sp.data());
    grad.noalias() = alpha * vol * (F.transpose() * sp);
    out.grad_norm = grad.norm();
    if (out.grad_norm <= tol * (1.0 + obj)) {
      out.converged = true;
      break;
    }

    // Newton system with epsilon-smoothed curvature weights
    // (the exact Hessian wherever r != 0 is alpha (alpha-1) F^T |r|^{a-2} F).
    smooth = (r.array().square() + eps * eps).sqrt().matrix();
    ops.signed_pow(smooth.data(), cells, alpha - 2.0, weights.data());
    weighted = (F.array().colwise() * weights.array()).matrix();
    MatrixXd h = alpha * (alpha - 1.0) * vol * (F.transpose() * weighted);

    VectorXd dir;
    double ridge = 1e-14 * h.trace();
    for (int attempt = 0;; ++attempt) {
      Eigen::LDLT<MatrixXd> ldlt(h);
      if (ldlt.info() == Eigen::Success) {
        dir = -ldlt.solve(grad);
        if (dir.allFinite()) break;
      }
      if (attempt >= 6) throw numerical_error("L^alpha solver: Newton system unsolvable");
      h.diagonal().array() += ridge;
      ridge *= 100.0;
    }
    double slope = dir.dot(grad);
    if (!(slope < 0.0)) {
      dir = -grad;
      slope = dir.dot(grad);
    }

    // Backtracking with two acceptance regimes. While the predicted decrease
    // is resolvable in floating point, standard Armijo on the objective.
    // Below that resolution Armijo is blind, so a step is accepted only when
    // the gradient norm strictly shrinks - the quantity the exit certificate
    // measures. Newton steps contract it quadratically near the optimum.
    double step = 1.0;
    bool accepted = false;
    VectorXd cand, r_cand;
    double obj_cand = 0.0;
    const double flat_scale = 1e-13 * (1.0 + std::abs(obj));
    while (step > 1e-16) {
      cand = lambda + step * dir;
      r_cand = F * cand - g0;
      obj_cand = vol * ops.abs_pow_sum(r_cand.data(), cells, alpha);
      if (std::abs(step * slope) > flat_scale) {
        if (obj_cand <= obj + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      } else {
        ops.signed_pow(r_cand.data(), cells, alpha - 1.0, sp.data());
        const double cand_grad_norm = (alpha * vol * (F.transpose() * sp)).norm();
        if (cand_grad_norm <= out.grad_norm * (1.0 - 1e-4)) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled; the polish below gets its chance

    lambda.swap(cand);
    r.swap(r_cand);
    obj = obj_cand;
    eps = std::max(0.3 * eps, eps_floor);
  }

  out.iterations = it;
  out.objective = obj;
  out.lambda = std::move(lambda);
  if (out.converged) return out;

  ops.signed_pow(r.data(), cells, alpha - 1.0, sp.data());
  out.grad_norm = (alpha * vol * (F.transpose() * sp)).norm();
  out.objective = obj;
  if (out.grad_norm <= tol * (1.0 + obj)) {
    out.converged = true;
    return out;
  }

  // Sparse-support polish. Optima of these objectives often put exact zeros
  // on a subset of the weights; iterates can only rattle around them at
  // roundoff level, and each rattling component feeds an |r|^{alpha-1}
  // noise floor into the gradient. Freeze the noise-level components at
  // exactly zero, re-solve the reduced problem, and keep the result if the
  // full gradient improves.
  if (depth == 0 && n > 1) {
    for (int round = 0; round < 2 && !out.converged; ++round) {
      const double eta = 1e-6 * (1.0 + out.lambda.cwiseAbs().maxCoeff());
      std::vector<Index> keep;
      for (Index j = 0; j < n; ++j) {
        if (std::abs(out.lambda(j)) > eta) keep.push_back(j);
      }
      if (keep.empty()) {
        // candidate: the exact zero vector
        const double obj_zero = vol * ops.abs_pow_sum(g0.data(), cells, alpha);
        ops.signed_pow(g0.data(), cells, alpha - 1.0, sp.data());
        const double grad_zero = (alpha * vol * (F.transpose() * sp)).norm();
        if (grad_zero < out.grad_norm &&
            obj_zero <= out.objective + 1e-13 * (1.0 + std::abs(out.objective))) {
          out.lambda.setZero();
          out.grad_norm = grad_zero;
          out.objective = obj_zero;
          out.converged = grad_zero <= tol * (1.0 + obj_zero);
        }
        break;
      }
      if (keep.size() == static_cast<std::size_t>(n)) break;

      MatrixXd f_red(F.rows(), static_cast<Index>(keep.size()));
      VectorXd warm(static_cast<Index>(keep.size()));
      for (std::size_t i = 0; i < keep.size(); ++i) {
        f_red.col(static_cast<Index>(i)) = F.col(keep[i]);
        warm(static_cast<Index>(i)) = out.lambda(keep[i]);
      }
      // The frozen components replicate the reduced stationarity residual
      // in the full gradient, so the reduced solve must run tighter.
      const double tol_red = 0.1 * tol / std::sqrt(static_cast<double>(n));
      LalphaResult sub = minimize_lalpha_impl(f_red, g0, alpha, vol, std::move(warm),
                                              tol_red, max_iter / 2, depth + 1);
      VectorXd full = VectorXd::Zero(n);
      for (std::size_t i = 0; i < keep.size(); ++i)
        full(keep[i]) = sub.lambda(static_cast<Index>(i));

      VectorXd r_full = F * full - g0;
      const double obj_full = vol * ops.abs_pow_sum(r_full.data(), cells, alpha);
      ops.signed_pow(r_full.data(), cells, alpha - 1.0, sp.data());
      const double grad_full = (alpha * vol * (F.transpose() * sp)).norm();
      if (grad_full < out.grad_norm &&
          obj_full <= out.objective + 1e-13 * (1.0 + std::abs(out.objective))) {
        out.lambda = std::move(full);
        out.grad_norm = grad_full;
        out.objective = obj_full;
        out.iterations += sub.iterations;
        out.converged = grad_full <= tol * (1.0 + obj_full);
      } else {
        break;
      }
    }
  }
  return out;
}

LalphaResult minimize_lalpha(const MatrixXd& F, const VectorXd& g0, double alpha,
                             double vol, VectorXd lambda, double tol, int max_iter) {
  return minimize_lalpha_impl(F, g0, alpha, vol, std::move(lambda), tol, max_iter, 0);
}

// Indicator-family kernels repeat the same (site kernels, target kernel) row
// on every cell of a rectangle, so the L^alpha objective collapses to a few
// dozen distinct rows. Rescaling each distinct row by (count * vol)^{1/alpha}
// reproduces the exact objective and gradient, and shrinks the solver's work
// per iteration by three orders of magnitude.
struct AggregatedRows {
  MatrixXd f;
  VectorXd g0;
};

bool aggregate_rows(const MatrixXd& F, const VectorXd& g0, double alpha, double vol,
                    AggregatedRows& out) {
  const Index cells = F.rows();
  const Index n = F.cols();
  std::map<std::vector<double>, double> groups;
  std::vector<double> key(static_cast<std::size_t>(n) + 1);
  for (Index k = 0; k < cells; ++k) {
    for (Index j = 0; j < n; ++j) key[static_cast<std::size_t>(j)] = F(k, j);
    key[static_cast<std::size_t>(n)] = g0(k);
    groups[key] += vol;
  }
  if (groups.size() * 4 > static_cast<std::size_t>(cells)) return false;

  out.f.resize(static_cast<Index>(groups.size()), n);
  out.g0.resize(static_cast<Index>(groups.size()));
  Index row = 0;
  for (const auto& [pattern, weight] : groups) {
    const double scale = std::pow(weight, 1.0 / alpha);
    for (Index j = 0; j < n; ++j) out.f(row, j) = scale * pattern[static_cast<std::size_t>(j)];
    out.g0(row) = scale * pattern[static_cast<std::size_t>(n)];
    ++row;
  }
  return true;
}

void require_full_dimensional(const SiteSystem& sys) {
  const FullDimReport report = full_dimensionality_check(sys);
  if (!report.full_dimensional)
    throw numerical_error("site kernels are not full-dimensional (singular value ratio " +
                          std::to_string(report.ratio) + ")");
}

// --- per-method cores (shared by the single-shot API and weight_field) -----

PredictorWeights col_core(const SiteSystem& sys) {
  const int hit = sys.coincident_site();
  if (hit >= 0) return basis_vector(sys.n(), hit, Method::kCOL);

  const CovariationSystem cs = build_covariation_system(sys);
  Eigen::PartialPivLU<MatrixXd> lu(cs.K);
  const double rc = lu.rcond();
  if (!std::isfinite(rc) || rc < 1e-14)
    throw numerical_error("COL: covariation matrix is numerically singular (rcond " +
                          std::to_string(rc) + ")");
  PredictorWeights w;
  w.method = Method::kCOL;
  w.lambda = lu.solve(cs.b);
  w.first_order_residual = (cs.K * w.lambda - cs.b).norm();
  if (sys.kernel_based()) {
    w.achieved_scale = error_scale_kernel(sys, w.lambda);
  } else {
    w.achieved_scale = error_scale_gaussian(gaussian_parts(sys), w.lambda);
  }
  return w;
}

PredictorWeights lsl_core(const SiteSystem& sys, const VectorXd* warm, bool checked) {
  const int hit = sys.coincident_site();
  if (hit >= 0) return basis_vector(sys.n(), hit, Method::kLSL);

  PredictorWeights w;
  w.method = Method::kLSL;

  if (!sys.kernel_based()) {
    // sigma^alpha is ((1/2) quadratic form)^{alpha/2}; the minimizer is the
    // kriging solution for any alpha.
    const GaussianParts g = gaussian_parts(sys);
    const auto llt = factor_spd(g.sigma, g.c00);
    w.lambda = llt.solve(g.c0);
    w.first_order_residual = (g.sigma * w.lambda - g.c0).norm();
    w.achieved_scale = error_scale_gaussian(g, w.lambda);
    w.iterations = 1;
    return w;
  }

  if (!checked) require_full_dimensional(sys);

  // A target kernel that vanishes on the whole grid makes the zero vector the
  // exact minimizer (the objective is a norm of the combination).
  if (sys.target_kernel().cwiseAbs().maxCoeff() == 0.0) {
    w.lambda = VectorXd::Zero(static_cast<Index>(sys.n()));
    w.achieved_scale = 0.0;
    w.first_order_residual = 0.0;
    return w;
  }

  VectorXd start = VectorXd::Zero(static_cast<Index>(sys.n()));
  if (warm != nullptr) {
    start = *warm;
  } else {
    try {
      start = col_core(sys).lambda;
    } catch (const numerical_error&) {
      // COL may be singular even when LSL is well posed; start from zero.
    }
  }

  AggregatedRows agg;
  LalphaResult res =
      aggregate_rows(sys.site_kernels(), sys.target_kernel(), sys.alpha(),
                     sys.cell_volume(), agg)
          ? minimize_lalpha(agg.f, agg.g0, sys.alpha(), 1.0, std::move(start), kLslTol,
                            kMaxIterations)
          : minimize_lalpha(sys.site_kernels(), sys.target_kernel(), sys.alpha(),
                            sys.cell_volume(), std::move(start), kLslTol, kMaxIterations);
  // Targets whose optimum pins pattern sums at exact zeros leave an
  // |ulp|^{alpha-1} noise floor under the gradient that doubles cannot beat;
  // such solves return with the achieved residual in the diagnostics instead
  // of failing, as long as the weights are accurate to well beyond anything
  // the downstream pipelines resolve.
  if (!res.converged && res.grad_norm > 1e-6 * (1.0 + res.objective))
    throw numerical_error("LSL: no convergence after " + std::to_string(res.iterations) +
                          " iterations; gradient norm " + std::to_string(res.grad_norm) +
                          " at objective " + std::to_string(res.objective));
  w.lambda = std::move(res.lambda);
  w.achieved_scale = std::pow(res.objective, 1.0 / sys.alpha());
  w.first_order_residual = res.grad_norm;
  w.iterations = res.iterations;
  return w;
}

// Gradient of sigma^alpha of the plain combination sum lambda_i X(t_i)
// (no target term); the MCL Lagrange condition aligns it with a.
VectorXd combination_scale_gradient(const SiteSystem& sys, const VectorXd& lambda) {
  const std::size_t cells = static_cast<std::size_t>(sys.site_kernels().rows());
  VectorXd combo = sys.site_kernels() * lambda;
  VectorXd sp(combo.size());
  kernels::active().signed_pow(combo.data(), cells, sys.alpha() - 1.0, sp.data());
  return sys.alpha() * sys.cell_volume() * (sys.site_kernels().transpose() * sp);
}

double alignment_residual(const VectorXd& a, const VectorXd& g) {
  const double gg = g.squaredNorm();
  if (gg == 0.0) return 1.0;
  return (a - (a.dot(g) / gg) * g).norm() / a.norm();
}

PredictorWeights mcl_core(const SiteSystem& sys, const VectorXd* warm, bool checked) {
  const int hit = sys.coincident_site();
  if (hit >= 0) return basis_vector(sys.n(), hit, Method::kMCL);

  PredictorWeights w;
  w.method = Method::kMCL;
  const Index n = static_cast<Index>(sys.n());

  const VectorXd a = mcl_objective_vector(sys);
  const double sigma0_alpha = sigma_alpha_target(sys);

  if (sigma0_alpha == 0.0) {
    // X(t0) is a.s. zero; the only admissible combination is the zero one.
    w.lambda = VectorXd::Zero(n);
    w.achieved_scale = 0.0;
    w.first_order_residual = 0.0;
    w.constraint_residual = 0.0;
    return w;
  }
  Index jmax = 0;
  const double amax = a.cwiseAbs().maxCoeff(&jmax);
  if (amax == 0.0)
    throw numerical_error("MCL: all covariations with the target vanish; "
                          "the maximizer is not unique");

  if (!sys.kernel_based()) {
    const GaussianParts g = gaussian_parts(sys);
    const auto llt = factor_spd(g.sigma, g.c00);
    VectorXd dir = llt.solve(g.c0);
    const double quad = dir.dot(g.sigma * dir);
    if (!(quad > 0.0)) throw numerical_error("MCL: degenerate covariance system");
    w.lambda = dir * std::sqrt(g.c00 / quad);
    const double sigma_hat = std::sqrt(w.lambda.dot(g.sigma * w.lambda) / 2.0);
    const double sigma0 = std::sqrt(g.c00 / 2.0);
    w.constraint_residual = std::abs(sigma_hat - sigma0) / sigma0;
    w.first_order_residual = alignment_residual(a, g.sigma * w.lambda);
    w.achieved_scale = error_scale_gaussian(g, w.lambda);
    w.iterations = 1;
    return w;
  }

  if (!checked) require_full_dimensional(sys);
  const MatrixXd& F = sys.site_kernels();
  const double vol = sys.cell_volume();
  const double sigma0 = std::pow(sigma0_alpha, 1.0 / sys.alpha());

  // Direction via the equivalent convex program: minimize sigma^alpha of the
  // combination subject to <a, lambda> = amax, eliminating lambda_{jmax}.
  VectorXd lambda_constrained(n);
  int iterations = 0;
  if (n == 1) {
    lambda_constrained(0) = amax / a(0);
  } else {
    MatrixXd reduced(F.rows(), n - 1);
    Index col = 0;
    for (Index i = 0; i < n; ++i) {
      if (i == jmax) continue;
      reduced.col(col) = F.col(i) - (a(i) / a(jmax)) * F.col(jmax);
      ++col;
    }
    VectorXd offset = (amax / a(jmax)) * F.col(jmax);
    double reduced_vol = vol;
    AggregatedRows agg;
    if (aggregate_rows(reduced, -offset, sys.alpha(), vol, agg)) {
      reduced = std::move(agg.f);
      offset = -agg.g0;
      reduced_vol = 1.0;
    }

    // Candidate starts on the constraint plane, best objective first: the
    // previous target's solution (warm), the COL weights, and the trivial
    // single-site point. Projection onto <a, lambda> = amax can blow up for
    // vectors nearly orthogonal to a, so such candidates are dropped, and a
    // failed solve falls back to the next start before giving up.
    std::vector<VectorXd> starts;
    const auto add_projected = [&](VectorXd v) {
      const double along = a.dot(v);
      if (std::abs(along) <= 1e-8 * amax * (1.0 + v.cwiseAbs().maxCoeff())) return;
      starts.push_back(v * (amax / along));
    };
    if (warm != nullptr) add_projected(*warm);
    if (warm == nullptr || starts.empty()) {
      try {
        add_projected(col_core(sys).lambda);
      } catch (const numerical_error&) {
      }
    }
    {
      VectorXd trivial = VectorXd::Zero(n);
      trivial(jmax) = amax / a(jmax);
      starts.push_back(std::move(trivial));
    }
    std::vector<double> probe(sys.n() + 1, 0.0);
    std::stable_sort(starts.begin(), starts.end(), [&](const VectorXd& u, const VectorXd& v) {
      for (Index i = 0; i < n; ++i) probe[static_cast<std::size_t>(i) + 1] = u(i);
      const double su = scale_of_combination(sys, probe);
      for (Index i = 0; i < n; ++i) probe[static_cast<std::size_t>(i) + 1] = v(i);
      return su < scale_of_combination(sys, probe);
    });

    LalphaResult res;
    bool solved = false;
    for (const VectorXd& start_full : starts) {
      VectorXd start(n - 1);
      col = 0;
      for (Index i = 0; i < n; ++i) {
        if (i == jmax) continue;
        start(col++) = start_full(i);
      }
      res = minimize_lalpha(reduced, -offset, sys.alpha(), reduced_vol, std::move(start),
                            1e-10, kMaxIterations);
      if (res.converged || res.grad_norm <= 1e-6 * (1.0 + res.objective)) {
        solved = true;
        break;
      }
    }
    if (!solved)
      throw numerical_error("MCL: no convergence; reduced gradient norm " +
                            std::to_string(res.grad_norm));
    iterations = res.iterations;
    col = 0;
    double correction = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (i == jmax) continue;
      lambda_constrained(i) = res.lambda(col);
      correction += a(i) * res.lambda(col);
      ++col;
    }
    lambda_constrained(jmax) = (amax - correction) / a(jmax);
  }

  std::vector<double> comb(sys.n() + 1, 0.0);
  for (Index i = 0; i < n; ++i) comb[static_cast<std::size_t>(i) + 1] = lambda_constrained(i);
  const double sigma_dir = scale_of_combination(sys, comb);
  if (!(sigma_dir > 0.0)) throw numerical_error("MCL: zero-scale direction");

  w.lambda = lambda_constrained * (sigma0 / sigma_dir);
  for (Index i = 0; i < n; ++i) comb[static_cast<std::size_t>(i) + 1] = w.lambda(i);
  const double sigma_hat = scale_of_combination(sys, comb);
  w.constraint_residual = std::abs(sigma_hat - sigma0) / sigma0;
  w.first_order_residual = alignment_residual(a, combination_scale_gradient(sys, w.lambda));
  w.achieved_scale = error_scale_kernel(sys, w.lambda);
  w.iterations = iterations;
  return w;
}

PredictorWeights ml_core(const SiteSystem& sys) {
  if (sys.kernel_based())
    throw std::invalid_argument("ML prediction requires a (sub-)Gaussian model");
  const int hit = sys.coincident_site();
  if (hit >= 0) return basis_vector(sys.n(), hit, Method::kML);

  const Index n = static_cast<Index>(sys.n());
  const auto& cov = sys.model().covariance();
  std::vector<Point> pts(sys.sites());
  pts.push_back(sys.target());

  // Omega = 2 B B^T; A = B^{-1}; lambda_i = -a_{n+1,i} / a_{n+1,n+1}.
  // The last row of A solves B^T x = e_{n+1}.
  const MatrixXd omega_half = 0.5 * covariance_matrix(cov, pts);
  const auto llt = factor_spd(omega_half, 0.5 * cov.sill);
  const MatrixXd b_factor = llt.matrixL();
  VectorXd e = VectorXd::Zero(n + 1);
  e(n) = 1.0;
  const VectorXd x = b_factor.transpose().triangularView<Eigen::Upper>().solve(e);

  PredictorWeights w;
  w.method = Method::kML;
  w.lambda = -x.head(n) / x(n);

  const GaussianParts g = gaussian_parts(sys);
  w.first_order_residual = (g.sigma * w.lambda - g.c0).norm();
  w.achieved_scale = error_scale_gaussian(g, w.lambda);
  return w;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::kLSL: return "lsl";
    case Method::kCOL: return "col";
    case Method::kMCL: return "mcl";
    case Method::kML: return "ml";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "lsl") return Method::kLSL;
  if (name == "col") return Method::kCOL;
  if (name == "mcl") return Method::kMCL;
  if (name == "ml") return Method::kML;
  throw std::invalid_argument("unknown method: " + name);
}

PredictionProblem::PredictionProblem(SiteSystem sys_, Eigen::VectorXd observed_)
    : sys(std::move(sys_)), observed(std::move(observed_)) {
  if (static_cast<std::size_t>(observed.size()) != sys.n())
    throw std::invalid_argument("PredictionProblem: observed length != site count");
}

PredictorWeights col_weights(const PredictionProblem& problem) { return col_core(problem.sys); }

PredictorWeights lsl_weights(const PredictionProblem& problem) {
  return lsl_core(problem.sys, nullptr, false);
}

PredictorWeights mcl_weights(const PredictionProblem& problem) {
  return mcl_core(problem.sys, nullptr, false);
}

PredictorWeights ml_weights_subgaussian(const PredictionProblem& problem) {
  return ml_core(problem.sys);
}

double predict(const PredictorWeights& weights, std::span<const double> observed) {
  if (static_cast<std::size_t>(weights.lambda.size()) != observed.size())
    throw std::invalid_argument("predict: weight/observation length mismatch");
  return weights.lambda.dot(
      Eigen::Map<const VectorXd>(observed.data(), static_cast<Index>(observed.size())));
}

std::vector<PredictorWeights> weight_field(const SiteSystem& sys,
                                           std::span<const Point> targets, Method method,
                                           int threads) {
  if (threads < 1) throw std::invalid_argument("weight_field: threads must be >= 1");
  const bool needs_full_dim =
      sys.kernel_based() && (method == Method::kLSL || method == Method::kMCL);
  if (needs_full_dim) require_full_dimensional(sys);

  std::vector<PredictorWeights> results(targets.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;

  // COL is a fixed linear system across targets: factor K and the
  // signed-power site transforms once, then each target costs one kernel
  // column, one small gemv and one back-substitution.
  if (method == Method::kCOL && sys.kernel_based()) {
    const CovariationSystem cs = build_covariation_system(sys);
    Eigen::PartialPivLU<MatrixXd> lu(cs.K);
    const double rc = lu.rcond();
    if (!std::isfinite(rc) || rc < 1e-14)
      throw numerical_error("COL: covariation matrix is numerically singular (rcond " +
                            std::to_string(rc) + ")");
    const MatrixXd& F = sys.site_kernels();
    const std::size_t cells = static_cast<std::size_t>(F.rows());
    const Index n = F.cols();
    MatrixXd sp(F.rows(), n);
    for (Index j = 0; j < n; ++j) {
      kernels::active().signed_pow(F.col(j).data(), cells, sys.alpha() - 1.0,
                                   sp.col(j).data());
    }
    const double vol = sys.cell_volume();
    SiteSystem local = sys;
    for (std::size_t idx = 0; idx < targets.size(); ++idx) {
      local = local.with_target(targets[idx]);
      const int hit = local.coincident_site();
      if (hit >= 0) {
        results[idx] = basis_vector(local.n(), hit, Method::kCOL);
        continue;
      }
      const VectorXd b = vol * (sp.transpose() * local.target_kernel());
      PredictorWeights w;
      w.method = Method::kCOL;
      w.lambda = lu.solve(b);
      w.first_order_residual = (cs.K * w.lambda - b).norm();
      results[idx] = std::move(w);
    }
    return results;
  }

  auto run_block = [&](std::size_t begin, std::size_t end) {
    const VectorXd* warm = nullptr;
    for (std::size_t idx = begin; idx < end; ++idx) {
      try {
        const SiteSystem local = sys.with_target(targets[idx]);
        switch (method) {
          case Method::kLSL: results[idx] = lsl_core(local, warm, true); break;
          case Method::kMCL: results[idx] = mcl_core(local, warm, true); break;
          case Method::kCOL: results[idx] = col_core(local); break;
          case Method::kML: results[idx] = ml_core(local); break;
        }
      } catch (const numerical_error& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure)
          failure = std::make_exception_ptr(numerical_error(
              std::string(e.what()) + " [target (" + std::to_string(targets[idx].x) + ", " +
              std::to_string(targets[idx].y) + ")]"));
        return;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      if (results[idx].lambda.size() > 0 &&
          (method == Method::kLSL || method == Method::kMCL))
        warm = &results[idx].lambda;
    }
  };

  const std::size_t count = targets.size();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads),
                                                    std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    run_block(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_block, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

FieldRealization conditional_simulate_subgaussian(
    const CovarianceModel& cov, double alpha, std::span<const Point> obs_sites,
    std::span<const double> observed, std::span<const Point> targets, RngStream& rng,
    double jitter_scale) {
  if (obs_sites.size() != observed.size())
    throw std::invalid_argument("conditional simulation: site/value length mismatch");

  const std::size_t n = obs_sites.size();
  const double a_draw = sample_subgaussian_A(alpha, rng);
  const double root_a = std::sqrt(a_draw);

  // Joint unconditional Gaussian draw over observation sites plus targets,
  // sharing indices for targets that coincide with observation sites (exact
  // duplicates would make the joint covariance singular).
  std::vector<Point> joint(obs_sites.begin(), obs_sites.end());
  std::vector<std::size_t> target_index(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::size_t found = joint.size();
    for (std::size_t i = 0; i < joint.size(); ++i) {
      if (same_point(targets[t], joint[i], 2)) {
        found = i;
        break;
      }
    }
    if (found == joint.size()) joint.push_back(targets[t]);
    target_index[t] = found;
  }

  const auto joint_llt =
      cholesky_with_jitter(covariance_matrix(cov, joint), jitter_scale * cov.sill);
  VectorXd z(static_cast<Index>(joint.size()));
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  const VectorXd g_unc = joint_llt.matrixL() * z;

  VectorXd krig_coeff;
  if (n > 0) {
    // Residuals at the conditioning sites, interpolated by simple kriging.
    Eigen::LLT<MatrixXd> obs_llt(
        covariance_matrix(cov, {joint.data(), n}));
    if (obs_llt.info() != Eigen::Success)
      throw numerical_error("conditional simulation: conditioning covariance not SPD");
    VectorXd resid(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      resid(static_cast<Index>(i)) = observed[i] / root_a - g_unc(static_cast<Index>(i));
    krig_coeff = obs_llt.solve(resid);
  }

  FieldRealization out;
  out.dim = 2;
  out.model_tag = "sub-gaussian-cs";
  out.alpha = alpha;
  out.seed = rng.seed();
  out.stream = rng.stream();
  out.a_draw = a_draw;
  out.sites.assign(targets.begin(), targets.end());
  out.values.resize(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    double g_cond = g_unc(static_cast<Index>(target_index[t]));
    if (n > 0) {
      for (std::size_t i = 0; i < n; ++i)
        g_cond += cov.at(targets[t], obs_sites[i]) * krig_coeff(static_cast<Index>(i));
    }
    out.values[t] = root_a * g_cond;
  }
  return out;
}

FieldRealization conditional_simulate_subgaussian(const PredictionProblem& problem,
                                                  std::span<const Point> targets,
                                                  RngStream& rng, double jitter_scale) {
  const auto& sys = problem.sys;
  if (sys.kernel_based())
    throw std::invalid_argument("conditional simulation requires a sub-Gaussian model");
  return conditional_simulate_subgaussian(
      sys.model().covariance(), sys.alpha(), sys.sites(),
      {problem.observed.data(), static_cast<std::size_t>(problem.observed.size())}, targets,
      rng, jitter_scale);
}

}  // namespace stablefield
