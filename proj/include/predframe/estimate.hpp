#pragma once

#include "predframe/model.hpp"
#include "predframe/optimize.hpp"
#include "predframe/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace predframe {

struct OptimizerConfig {
  int max_iters = 500;
  double tol = 1e-8;
  int restarts = 3;
  /// Start from this point instead of the moment-based initial values.
  std::optional<Eigen::VectorXd> fixed_init;
};

struct EstimationResult {
  EstimationResult(ParamVector theta, Eigen::MatrixXd upsilon)
      : theta_hat(std::move(theta)), upsilon_hat(std::move(upsilon)) {}

  ParamVector theta_hat;
  /// Estimate of the asymptotic covariance of sqrt(T)(theta_hat - theta0).
  Eigen::MatrixXd upsilon_hat;
  /// Innovation variance (ARMA11).
  std::optional<double> sigma_eps2_hat;
  /// E[eps^4] (GARCH family).
  std::optional<double> kurtosis_hat;
  double objective = 0;
  int iterations = 0;
  bool converged = true;
  /// theta_hat was moved onto the boundary of the parameter set.
  bool clamped = false;
  /// ARMA11 estimate with alpha close to -beta: upsilon_hat is unreliable.
  bool near_common_root = false;
};

// AR(1) ------------------------------------------------------------------

/// OLS slope sum X_t X_{t-1} / sum X_{t-1}^2 with covariance 1 - beta^2.
inline EstimationResult estimate_ar1_ols(const Series& series) {
  const auto& x = series.values();
  if (x.size() < 3) throw StructuralError("AR1 estimation needs at least 3 observations");
  double num = 0, den = 0;
  for (std::size_t t = 1; t < x.size(); ++t) {
    num += x[t] * x[t - 1];
    den += x[t - 1] * x[t - 1];
  }
  if (!(den > 0)) throw DomainError("degenerate series: all lagged values are zero");
  double beta = num / den;
  bool clamped = false;
  if (std::abs(beta) > 1 - kDelta) {
    beta = std::copysign(1 - kDelta, beta);
    clamped = true;
  }
  EstimationResult r{ParamVector::ar1(beta), Eigen::MatrixXd::Constant(1, 1, 1 - beta * beta)};
  double rss = 0;
  for (std::size_t t = 1; t < x.size(); ++t) rss += std::pow(x[t] - beta * x[t - 1], 2);
  r.objective = rss;
  r.clamped = clamped;
  return r;
}

// ARMA(1,1) ----------------------------------------------------------------

/// Lag-k autocorrelation of the ARMA(1,1) process
/// X_t - omega = alpha eps_{t-1} + beta (X_{t-1} - omega) + eps_t.
inline double arma_autocorrelation(double alpha, double beta, long k) {
  if (k < 0) k = -k;
  if (k == 0) return 1.0;
  return (alpha + beta) * (1 + alpha * beta) / (1 + 2 * alpha * beta + alpha * alpha) *
         std::pow(beta, static_cast<double>(k - 1));
}

/// Variance of the ARMA(1,1) process per unit innovation variance.
inline double arma_unit_variance(double alpha, double beta) {
  return (1 + 2 * alpha * beta + alpha * alpha) / (1 - beta * beta);
}

/// Covariance matrix of (X_1..X_T) divided by the innovation variance:
/// the autocorrelation matrix scaled by arma_unit_variance. Identity when
/// alpha = beta = 0.
inline Eigen::MatrixXd arma_scaled_covariance(double alpha, double beta, std::size_t T) {
  const auto n = static_cast<Eigen::Index>(T);
  const double g0 = arma_unit_variance(alpha, beta);
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) G(i, j) = g0 * arma_autocorrelation(alpha, beta, i - j);
  }
  return G;
}

/// Solves the symmetric Toeplitz system toeplitz(col) y = rhs with the
/// Levinson-Durbin recursion in O(T^2).
inline std::vector<double> levinson_solve(std::span<const double> col, std::span<const double> rhs) {
  const std::size_t n = col.size();
  if (rhs.size() != n || n == 0) throw StructuralError("levinson_solve: size mismatch");
  if (!(col[0] > 0)) throw DomainError("levinson_solve: non-positive diagonal");
  std::vector<double> y(n), f(n), f_next(n);
  // f: forward vector with toeplitz_k f = e_1 (symmetric case: backward = reversed forward).
  f[0] = 1.0 / col[0];
  y[0] = rhs[0] / col[0];
  for (std::size_t k = 1; k < n; ++k) {
    double ef = 0;
    for (std::size_t i = 0; i < k; ++i) ef += col[k - i] * f[i];
    const double denom = 1.0 - ef * ef;
    if (!(std::abs(denom) > 1e-300)) throw DomainError("levinson_solve: singular leading minor");
    for (std::size_t i = 0; i <= k; ++i) {
      const double fi = i < k ? f[i] : 0.0;
      const double bi = i > 0 ? f[k - i] : 0.0;  // backward vector = reversed forward
      f_next[i] = (fi - ef * bi) / denom;
    }
    std::copy_n(f_next.begin(), k + 1, f.begin());
    double ey = 0;
    for (std::size_t i = 0; i < k; ++i) ey += col[k - i] * y[i];
    const double c = rhs[k] - ey;
    // backward vector b_i = f[k - i]
    for (std::size_t i = 0; i <= k; ++i) y[i] = (i < k ? y[i] : 0.0) + c * f[k - i];
  }
  return y;
}

/// Standardized one-step innovations of v under the ARMA(1,1) model with
/// unit innovation variance, computed by the innovations algorithm.
///
/// For any two series u, v: u' G^{-1} v = dot(e(u), e(v)) with G the
/// scaled covariance matrix above, in O(T).
inline std::vector<double> arma_standardized_innovations(std::span<const double> v, double alpha,
                                                         double beta) {
  std::vector<double> e(v.size());
  double r = arma_unit_variance(alpha, beta);  // one-step MSE ratio r_{n-1}
  double pred = 0;
  for (std::size_t n = 0; n < v.size(); ++n) {
    e[n] = (v[n] - pred) / std::sqrt(r);
    const double theta_n = alpha / r;
    pred = beta * v[n] + theta_n * (v[n] - pred);
    r = 1 + alpha * alpha - alpha * theta_n;
  }
  return e;
}

/// Weighted least-squares criterion with omega profiled out in closed form.
struct ArmaProfile {
  double omega = 0;
  /// (X - omega 1)' G^{-1} (X - omega 1)
  double objective = 0;
};

inline ArmaProfile arma_profile(std::span<const double> x, double alpha, double beta) {
  const std::vector<double> ones(x.size(), 1.0);
  const auto ex = arma_standardized_innovations(x, alpha, beta);
  const auto ei = arma_standardized_innovations(ones, alpha, beta);
  double ii = 0, ix = 0, xx = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    ii += ei[t] * ei[t];
    ix += ei[t] * ex[t];
    xx += ex[t] * ex[t];
  }
  const double omega = ix / ii;
  return {omega, std::max(xx - omega * ix, 0.0)};
}

/// Asymptotic covariance of sqrt(T)(theta_hat - theta0) for the ARMA(1,1)
/// weighted least-squares estimator, in (omega, alpha, beta) order.
inline Eigen::MatrixXd arma_upsilon(double alpha, double beta, double sigma_eps2) {
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(3, 3);
  const double s = alpha + beta, s2 = s * s, ab = 1 + alpha * beta;
  U(0, 0) = sigma_eps2 * (1 + alpha) * (1 + alpha) / ((1 - beta) * (1 - beta));
  U(1, 1) = ab * ab * (1 - alpha * alpha) / s2;
  U(2, 2) = ab * ab * (1 - beta * beta) / s2;
  U(1, 2) = U(2, 1) = -ab * (1 - alpha * alpha) * (1 - beta * beta) / s2;
  return U;
}

namespace detail {

/// Initial (alpha, beta) from the first two sample autocorrelations.
inline Eigen::Vector2d arma_moment_init(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  auto acov = [&](std::size_t k) {
    double s = 0;
    for (std::size_t t = k; t < x.size(); ++t) s += (x[t] - mean) * (x[t - k] - mean);
    return s / n;
  };
  const double g0 = acov(0);
  const double r1 = g0 > 0 ? acov(1) / g0 : 0.0, r2 = g0 > 0 ? acov(2) / g0 : 0.0;
  double beta = std::abs(r1) > 1e-3 ? std::clamp(r2 / r1, -0.9, 0.9) : 0.5;
  // r1 (1 + 2 a b + a^2) = (a + b)(1 + a b)  =>  quadratic in a
  const double qa = r1 - beta, qb = 2 * r1 * beta - 1 - beta * beta, qc = r1 - beta;
  double alpha = 0.1;
  if (std::abs(qa) > 1e-12) {
    const double disc = qb * qb - 4 * qa * qc;
    if (disc >= 0) {
      const double a1 = (-qb + std::sqrt(disc)) / (2 * qa), a2 = (-qb - std::sqrt(disc)) / (2 * qa);
      alpha = std::abs(a1) < std::abs(a2) ? a1 : a2;
    }
  } else {
    alpha = 0.0;
  }
  alpha = std::clamp(alpha, -0.9, 0.9);
  if (std::abs(alpha) < 0.05) alpha = std::copysign(0.05, alpha == 0 ? 1.0 : alpha);
  if (std::abs(alpha + beta) < 0.05) beta = std::clamp(beta + 0.1, -0.9, 0.9);
  return {alpha, beta};
}

/// Moves a point that violates the "not equal" constraints by at most delta.
inline bool arma_nudge(double& alpha, double& beta) {
  bool moved = false;
  if (std::abs(alpha) < kDelta) alpha = std::copysign(kDelta, alpha), moved = true;
  if (std::abs(beta) < kDelta) beta = std::copysign(kDelta, beta), moved = true;
  if (std::abs(alpha + beta) < kDelta) {
    beta = -alpha + std::copysign(kDelta, beta + alpha == 0 ? 1.0 : beta + alpha);
    moved = true;
  }
  return moved;
}

}  // namespace detail

/// Weighted least-squares estimator of ARMA(1,1): minimizes
/// (X - omega 1)' G^{-1}(alpha, beta) (X - omega 1) with omega profiled.
inline EstimationResult estimate_arma_wls(const Series& series, const OptimizerConfig& cfg = {}) {
  const std::span<const double> x(series.values());
  if (x.size() < 10) throw StructuralError("ARMA11 estimation needs at least 10 observations");

  const double hi = 1 - kDelta;
  const Box box{Eigen::Vector2d(-hi, -hi), Eigen::Vector2d(hi, hi)};
  auto f = [&](const Eigen::VectorXd& p) { return arma_profile(x, p[0], p[1]).objective; };

  std::vector<Eigen::Vector2d> starts;
  if (cfg.fixed_init) {
    const auto& v = *cfg.fixed_init;
    starts.emplace_back(v[v.size() - 2], v[v.size() - 1]);
  } else {
    starts.push_back(detail::arma_moment_init(x));
    const Eigen::Vector2d extra[] = {{0.3, 0.3}, {-0.3, 0.6}, {0.5, -0.2}, {-0.5, -0.3}};
    for (int i = 0; i + 1 < cfg.restarts && i < 4; ++i) starts.push_back(extra[i]);
  }

  const Eigen::Vector2d step(0.1, 0.1);
  SimplexResult best;
  int iterations = 0;
  bool any_converged = false;
  for (const auto& s : starts) {
    auto r = nelder_mead(f, s, step, box, cfg.max_iters, cfg.tol, cfg.tol);
    iterations += r.iterations;
    any_converged = any_converged || r.converged;
    if (r.f < best.f) best = r;
  }
  auto polish = nelder_mead(f, best.x, Eigen::Vector2d(0.02, 0.02), box, cfg.max_iters, cfg.tol,
                            cfg.tol);
  iterations += polish.iterations;
  if (polish.f <= best.f) best = polish;

  double alpha = best.x[0], beta = best.x[1];
  bool clamped = box.on_boundary(best.x, 0.0);
  clamped = detail::arma_nudge(alpha, beta) || clamped;
  const auto prof = arma_profile(x, alpha, beta);
  const double T = static_cast<double>(x.size());
  const double s2 = prof.objective / (T - 3);

  EstimationResult r{ParamVector::arma11(prof.omega, alpha, beta), arma_upsilon(alpha, beta, s2)};
  r.sigma_eps2_hat = s2;
  r.objective = prof.objective;
  r.iterations = iterations;
  r.converged = any_converged && polish.converged;
  r.clamped = clamped;
  r.near_common_root = std::abs(alpha + beta) < 1e-6;
  return r;
}

// GARCH family ---------------------------------------------------------------

namespace detail {

inline double sample_variance(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double s = 0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / n;
}

/// Conditional variances sigma~_t^2, t = 1..T, of the GARCH or T-GARCH
/// recursion started from the sample variance (standard deviation) with X_0 = 0.
inline std::vector<double> conditional_variances(const ParamVector& theta, std::span<const double> x) {
  std::vector<double> h(x.size());
  const double w = theta.omega(), b = theta.beta();
  const double v0 = sample_variance(x);
  if (theta.kind() == ModelKind::GARCH11) {
    const double a = theta.alpha();
    double prev_h = v0, prev_x = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      prev_h = w + a * prev_x * prev_x + b * prev_h;
      h[t] = prev_h;
      prev_x = x[t];
    }
  } else {
    const double ap = theta.alpha_plus(), am = theta.alpha_minus();
    double prev_s = std::sqrt(v0), prev_x = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      prev_s = w + ap * pos(prev_x) + am * neg(prev_x) + b * prev_s;
      h[t] = prev_s * prev_s;
      prev_x = x[t];
    }
  }
  return h;
}

}  // namespace detail

/// Negative Gaussian quasi log-likelihood
/// 1/2 sum_t [log(2 pi sigma~_t^2) + X_t^2 / sigma~_t^2].
inline double gaussian_nll(const ParamVector& theta, const Series& series) {
  if (!is_garch_family(theta.kind())) {
    throw StructuralError("gaussian_nll is defined for garch11 and tgarch11");
  }
  require_valid(theta);
  const std::span<const double> x(series.values());
  if (x.empty()) throw StructuralError("empty series");
  const auto h = detail::conditional_variances(theta, x);
  const double log2pi = std::log(2 * std::numbers::pi);
  double nll = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    assert(h[t] > 0);
    nll += log2pi + std::log(h[t]) + x[t] * x[t] / h[t];
  }
  return 0.5 * nll;
}

/// Sample QML covariance (k - 1) J^{-1} with
/// k = mean X_t^4 / sigma~_t^4 and J = mean (1/sigma~_t^4) d sigma~_t^2 d sigma~_t^2'.
/// T-GARCH derivatives are taken for sigma~_t and mapped by d sigma^2 = 2 sigma d sigma.
struct QmlCovariance {
  Eigen::MatrixXd upsilon;
  double kurtosis = 0;
};

inline QmlCovariance qml_covariance(const ParamVector& theta, std::span<const double> x) {
  const auto r = static_cast<Eigen::Index>(theta.size());
  const double w = theta.omega(), b = theta.beta();
  const double v0 = detail::sample_variance(x);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(r), base(r), d2(r);
  double k4 = 0;
  const bool garch = theta.kind() == ModelKind::GARCH11;
  double prev = garch ? v0 : std::sqrt(v0), prev_x = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    double h;
    if (garch) {
      base << 1.0, prev_x * prev_x, prev;
      const double cur = w + theta.alpha() * prev_x * prev_x + b * prev;
      d = base + b * d;
      d2 = d;
      h = cur;
      prev = cur;
    } else {
      base << 1.0, detail::pos(prev_x), detail::neg(prev_x), prev;
      const double cur = w + theta.alpha_plus() * detail::pos(prev_x) +
                         theta.alpha_minus() * detail::neg(prev_x) + b * prev;
      d = base + b * d;
      d2 = 2.0 * cur * d;
      h = cur * cur;
      prev = cur;
    }
    J.noalias() += d2 * d2.transpose() / (h * h);
    k4 += x[t] * x[t] * x[t] * x[t] / (h * h);
    prev_x = x[t];
  }
  const double n = static_cast<double>(x.size());
  J /= n;
  k4 /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    throw DomainError("covariance-singular: information matrix is not invertible");
  }
  Eigen::MatrixXd inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                        eig.eigenvectors().transpose();
  inv = 0.5 * (inv + inv.transpose());
  return {(k4 - 1.0) * inv, k4};
}

namespace detail {

inline Box qml_box(ModelKind kind) {
  const double big = 1.0 / kDelta;
  if (kind == ModelKind::GARCH11) {
    return {Eigen::Vector3d(kDelta, 0, 0), Eigen::Vector3d(big, big, 1 - kDelta)};
  }
  return {Eigen::Vector4d(kDelta, 0, 0, 0), Eigen::Vector4d(big, big, big, 1 - kDelta)};
}

inline std::vector<Eigen::VectorXd> qml_starts(ModelKind kind, std::span<const double> x, int count) {
  const double v = std::max(sample_variance(x), 1e-12);
  std::vector<Eigen::VectorXd> out;
  if (kind == ModelKind::GARCH11) {
    const double ab[][2] = {{0.1, 0.8}, {0.05, 0.9}, {0.2, 0.6}, {0.1, 0.5}};
    for (int i = 0; i < count && i < 4; ++i) {
      const double a = ab[i][0], b = ab[i][1];
      out.push_back(Eigen::Vector3d(v * (1 - a - b), a, b));
    }
  } else {
    const double s = std::sqrt(v);
    const double ab[][3] = {{0.05, 0.1, 0.8}, {0.1, 0.1, 0.7}, {0.05, 0.05, 0.9}, {0.15, 0.15, 0.5}};
    for (int i = 0; i < count && i < 4; ++i) {
      const double ap = ab[i][0], am = ab[i][1], b = ab[i][2];
      // E|X| = E[sigma] E|eps| with E[sigma] = omega / (1 - b - (ap + am) E[eps+])
      const double omega = std::max(s * (1 - b - 0.4 * (ap + am)), 0.01 * s);
      out.push_back(Eigen::Vector4d(omega, ap, am, b));
    }
  }
  return out;
}

}  // namespace detail

/// Gaussian quasi-maximum-likelihood estimator for GARCH(1,1) and T-GARCH(1,1).
inline EstimationResult estimate_qml(ModelKind kind, const Series& series,
                                     const OptimizerConfig& cfg = {}) {
  if (!is_garch_family(kind)) throw StructuralError("estimate_qml supports garch11 and tgarch11");
  const std::span<const double> x(series.values());
  if (x.size() < 50) throw StructuralError("QML estimation needs at least 50 observations");

  const Box box = detail::qml_box(kind);
  const ParamVector proto(kind, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(kind))));
  const double log2pi = std::log(2 * std::numbers::pi);
  auto f = [&](const Eigen::VectorXd& p) {
    const ParamVector theta = proto.with_values(p);
    if (kind == ModelKind::TGARCH11 && !(p[1] + p[2] > 0)) return std::numeric_limits<double>::max();
    const auto h = detail::conditional_variances(theta, x);
    double nll = 0;
    for (std::size_t t = 0; t < x.size(); ++t) nll += std::log(h[t]) + x[t] * x[t] / h[t];
    return 0.5 * (nll + log2pi * static_cast<double>(x.size()));
  };

  std::vector<Eigen::VectorXd> starts;
  if (cfg.fixed_init) {
    starts.push_back(*cfg.fixed_init);
  } else {
    starts = detail::qml_starts(kind, x, std::max(cfg.restarts, 1));
  }

  auto step_for = [](const Eigen::VectorXd& p, double scale) {
    Eigen::VectorXd s(p.size());
    s[0] = std::max(scale * std::abs(p[0]), 1e-4);
    for (Eigen::Index i = 1; i < p.size(); ++i) s[i] = scale * 0.5;
    return s;
  };

  SimplexResult best;
  int iterations = 0;
  bool any_converged = false;
  for (const auto& s : starts) {
    auto r = nelder_mead(f, s, step_for(s, 0.2), box, cfg.max_iters, cfg.tol, cfg.tol);
    iterations += r.iterations;
    any_converged = any_converged || r.converged;
    if (r.f < best.f) best = r;
  }
  auto polish = nelder_mead(f, best.x, step_for(best.x, 0.02), box, cfg.max_iters, cfg.tol, cfg.tol);
  iterations += polish.iterations;
  if (polish.f <= best.f) best = polish;

  const ParamVector theta = proto.with_values(best.x);
  auto cov = qml_covariance(theta, x);
  EstimationResult r{theta, cov.upsilon};
  r.kurtosis_hat = cov.kurtosis;
  r.objective = best.f;
  r.iterations = iterations;
  r.converged = any_converged && polish.converged;
  r.clamped = box.on_boundary(best.x, 0.0);
  return r;
}

/// Dispatches to the estimator of the model family.
inline EstimationResult estimate(ModelKind kind, const Series& series, const OptimizerConfig& cfg = {}) {
  switch (kind) {
    case ModelKind::AR1: return estimate_ar1_ols(series);
    case ModelKind::ARMA11: return estimate_arma_wls(series, cfg);
    case ModelKind::GARCH11:
    case ModelKind::TGARCH11: return estimate_qml(kind, series, cfg);
  }
  throw StructuralError("unknown model");
}

}  // namespace predframe
