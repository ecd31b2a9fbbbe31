#pragma once

#include "predframe/model.hpp"
#include "predframe/types.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace predframe {

/// Where the observed part of the prediction window begins.
///
/// Observations before `t1` (split constants) and before the window
/// (starting values) are replaced by zeros; no other policy is supported.
struct TruncationSpec {
  std::size_t t1 = 1;
};

/// Prediction function, its gradient and Hessian at one parameter point.
struct PredEval {
  double value = 0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  /// Closed-form contribution of the presample part of the expansion.
  double tail_mass = 0;
};

namespace detail {

inline void check_window(const Series& window, const TruncationSpec& trunc) {
  if (window.empty()) throw StructuralError("prediction window is empty");
  if (trunc.t1 < 1 || trunc.t1 > window.size()) {
    throw StructuralError("truncation start t1=" + std::to_string(trunc.t1) +
                          " outside window of length " + std::to_string(window.size()));
  }
}

/// Weighted sums sum_k w_k(r) f(x_{T-k}) and their first two derivatives in r,
/// where w_k(r) = r^k and the sum runs over the retained observations.
struct PowerSums {
  double s0 = 0, s1 = 0, s2 = 0;
};

template <class F>
PowerSums power_sums(std::span<const double> x, std::size_t t1, double r, F&& f) {
  PowerSums s;
  const std::size_t T = x.size();
  // p2 = r^{k-2}, p1 = r^{k-1}, p0 = r^k
  double p2 = 0, p1 = 0, p0 = 1;
  for (std::size_t k = 0; k + t1 <= T; ++k) {
    const double v = f(x[T - 1 - k]);
    const double kk = static_cast<double>(k);
    s.s0 += p0 * v;
    if (k >= 1) s.s1 += kk * p1 * v;
    if (k >= 2) s.s2 += kk * (kk - 1) * p2 * v;
    p2 = p1;
    p1 = p0;
    p0 *= r;
  }
  return s;
}

}  // namespace detail

/// Evaluates the one-step prediction function with zeros substituted for
/// observations before `trunc.t1` and for the presample, the deterministic
/// omega-only tail summed in closed form.
///
/// AR1:      psi = beta X_T                                     (conditional mean)
/// ARMA11:   psi = omega + sum_k (-alpha)^k (alpha+beta)(X_{T-k} - omega)
/// GARCH11:  psi = sum_k beta^k (omega + alpha X_{T-k}^2)       (conditional variance)
/// TGARCH11: psi = sum_k beta^k (omega + a+ X+_{T-k} + a- X-_{T-k})  (volatility)
inline PredEval evaluate_prediction(const ParamVector& theta, const Series& window,
                                    const TruncationSpec& trunc = {}) {
  require_valid(theta);
  detail::check_window(window, trunc);
  const std::span<const double> x(window.values());
  const std::size_t T = x.size();
  const std::size_t t1 = trunc.t1;
  const auto r = static_cast<Eigen::Index>(theta.size());

  PredEval out;
  out.gradient = Eigen::VectorXd::Zero(r);
  out.hessian = Eigen::MatrixXd::Zero(r, r);

  switch (theta.kind()) {
    case ModelKind::AR1: {
      const double xT = x[T - 1];
      out.value = theta.beta() * xT;
      out.gradient[0] = xT;
      break;
    }
    case ModelKind::GARCH11: {
      const double w = theta.omega(), a = theta.alpha(), b = theta.beta();
      const auto s = detail::power_sums(x, t1, b, [](double v) { return v * v; });
      const double c = 1.0 / (1.0 - b);
      out.value = w * c + a * s.s0;
      out.tail_mass = w * std::pow(b, static_cast<double>(T)) * c;
      out.gradient << c, s.s0, w * c * c + a * s.s1;
      out.hessian(0, 2) = out.hessian(2, 0) = c * c;
      out.hessian(1, 2) = out.hessian(2, 1) = s.s1;
      out.hessian(2, 2) = 2.0 * w * c * c * c + a * s.s2;
      break;
    }
    case ModelKind::TGARCH11: {
      const double w = theta.omega(), ap = theta.alpha_plus(), am = theta.alpha_minus();
      const double b = theta.beta();
      const auto sp = detail::power_sums(x, t1, b, detail::pos);
      const auto sm = detail::power_sums(x, t1, b, detail::neg);
      const double c = 1.0 / (1.0 - b);
      out.value = w * c + ap * sp.s0 + am * sm.s0;
      out.tail_mass = w * std::pow(b, static_cast<double>(T)) * c;
      out.gradient << c, sp.s0, sm.s0, w * c * c + ap * sp.s1 + am * sm.s1;
      out.hessian(0, 3) = out.hessian(3, 0) = c * c;
      out.hessian(1, 3) = out.hessian(3, 1) = sp.s1;
      out.hessian(2, 3) = out.hessian(3, 2) = sm.s1;
      out.hessian(3, 3) = 2.0 * w * c * c * c + ap * sp.s2 + am * sm.s2;
      break;
    }
    case ModelKind::ARMA11: {
      const double w = theta.omega(), a = theta.alpha(), b = theta.beta();
      // Sums in q = -alpha; d/dalpha = -d/dq.
      const auto s = detail::power_sums(x, t1, -a, [](double v) { return v; });
      const double s0 = s.s0, s0a = -s.s1, s0aa = s.s2;
      const double u = 1.0 / (1.0 + a);
      out.value = w * (1.0 - b) * u + (a + b) * s0;
      out.tail_mass = -(a + b) * w * std::pow(-a, static_cast<double>(T)) * u;
      out.gradient << (1.0 - b) * u, -w * (1.0 - b) * u * u + s0 + (a + b) * s0a, -w * u + s0;
      out.hessian(0, 1) = out.hessian(1, 0) = -(1.0 - b) * u * u;
      out.hessian(0, 2) = out.hessian(2, 0) = -u;
      out.hessian(1, 1) = 2.0 * w * (1.0 - b) * u * u * u + 2.0 * s0a + (a + b) * s0aa;
      out.hessian(1, 2) = out.hessian(2, 1) = w * u * u + s0a;
      break;
    }
  }
  return out;
}

/// sqrt(T) |psi^s(t1_trunc) - psi^s(t1_full)| for a window of length T.
///
/// The difference is summed directly from the terms present in one expansion
/// and absent from the other, so it stays accurate far below the rounding
/// level of psi itself.
inline double prediction_gap(const ParamVector& theta, const Series& window,
                             const TruncationSpec& t1_full, const TruncationSpec& t1_trunc) {
  require_valid(theta);
  detail::check_window(window, t1_full);
  detail::check_window(window, t1_trunc);
  const std::size_t T = window.size();
  const std::size_t lo = std::min(t1_full.t1, t1_trunc.t1);
  const std::size_t hi = std::max(t1_full.t1, t1_trunc.t1);

  double diff = 0;
  for (std::size_t j = lo; j < hi; ++j) {
    const double xj = window.at(j);
    const double k = static_cast<double>(T - j);
    switch (theta.kind()) {
      case ModelKind::AR1:
        break;  // psi depends on X_T only, and j < T here
      case ModelKind::GARCH11:
        diff += theta.alpha() * std::pow(theta.beta(), k) * xj * xj;
        break;
      case ModelKind::TGARCH11:
        diff += std::pow(theta.beta(), k) * (theta.alpha_plus() * detail::pos(xj) +
                                             theta.alpha_minus() * detail::neg(xj));
        break;
      case ModelKind::ARMA11:
        diff += (theta.alpha() + theta.beta()) * std::pow(-theta.alpha(), k) * xj;
        break;
    }
  }
  return std::sqrt(static_cast<double>(T)) * std::abs(diff);
}

// Conditional risk measures ---------------------------------------------------

/// Innovation quantile and expected-shortfall factor at level a.
struct RiskLevel {
  double a = 0.05;
  /// a-quantile of the innovation law.
  double xi_a = 0;
  /// -E[eps | eps < xi_a].
  double mu_a = 0;
};

/// Empirical a-quantile using the left-continuous inverse:
/// the ceil(a n)-th order statistic.
inline double innovation_quantile(std::span<const double> residuals, double a) {
  if (!(a > 0 && a < 1)) throw StructuralError("quantile level must lie in (0,1)");
  if (residuals.empty()) throw StructuralError("no residuals");
  std::vector<double> v(residuals.begin(), residuals.end());
  for (double r : v) {
    if (!std::isfinite(r)) throw StructuralError("non-finite residual");
  }
  const std::size_t n = v.size();
  auto k = static_cast<std::size_t>(std::ceil(a * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  std::nth_element(v.begin(), v.begin() + static_cast<long>(k - 1), v.end());
  return v[k - 1];
}

/// Empirical quantile and expected-shortfall factor of a residual sample.
inline RiskLevel empirical_risk_level(std::span<const double> residuals, double a) {
  RiskLevel out;
  out.a = a;
  out.xi_a = innovation_quantile(residuals, a);
  double sum = 0;
  std::size_t n = 0;
  for (double r : residuals) {
    if (r < out.xi_a) {
      sum += r;
      ++n;
    }
  }
  out.mu_a = n > 0 ? -sum / static_cast<double>(n) : -out.xi_a;
  if (out.mu_a < 0) throw DomainError("expected-shortfall factor is negative at this level");
  return out;
}

namespace detail {
inline void require_tgarch(const ParamVector& theta) {
  if (theta.kind() != ModelKind::TGARCH11) {
    throw DomainError("conditional VaR/ES mapping is only defined for tgarch11");
  }
}
}  // namespace detail

/// Conditional VaR of X_{T+1}: -xi_a times the conditional volatility.
inline double conditional_var(const ParamVector& theta, const Series& window,
                              const TruncationSpec& trunc, double xi_a) {
  detail::require_tgarch(theta);
  if (!std::isfinite(xi_a)) throw StructuralError("xi_a must be finite");
  return -xi_a * evaluate_prediction(theta, window, trunc).value;
}

/// Conditional ES of X_{T+1}: mu_a times the conditional volatility
/// (positive for small a).
inline double conditional_es(const ParamVector& theta, const Series& window,
                             const TruncationSpec& trunc, double mu_a) {
  detail::require_tgarch(theta);
  if (!std::isfinite(mu_a)) throw StructuralError("mu_a must be finite");
  return mu_a * evaluate_prediction(theta, window, trunc).value;
}

}  // namespace predframe
