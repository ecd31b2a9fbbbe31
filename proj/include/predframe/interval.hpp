#pragma once

#include "predframe/estimate.hpp"
#include "predframe/predict.hpp"
#include "predframe/types.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string_view>

namespace predframe {

struct InfeasibleSplit : DomainError {
  using DomainError::DomainError;
};

/// Sample split into an estimation part X_{1:T_E} and a prediction part
/// X_{T_P:T}, with T_E = T - floor(T^b) and T_P = T - floor(T^a).
struct SplitPlan {
  std::size_t T = 0;
  double a_exp = 0.5;
  double b_exp = 0.8;
  std::size_t T_E = 0;
  std::size_t T_P = 0;
  /// Normalizing rate sqrt(T_E).
  double m_TE = 0;
  /// log T.
  double l_T = 0;

  /// (T - T_P) / log T; should be large for the asymptotics to apply.
  double gap_ratio() const { return static_cast<double>(T - T_P) / l_T; }
};

inline SplitPlan make_split_plan(std::size_t T, double a_exp = 0.5, double b_exp = 0.8) {
  if (T < 8) throw StructuralError("split plan needs T >= 8");
  if (!(a_exp > 0 && a_exp < b_exp && b_exp < 1)) {
    throw StructuralError("split exponents must satisfy 0 < a < b < 1");
  }
  const double t = static_cast<double>(T);
  // The tiny relative bump keeps exact powers (e.g. 10000^0.5) from flooring down.
  auto floor_pow = [&](double e) {
    return static_cast<std::size_t>(std::floor(std::pow(t, e) * (1 + 1e-12)));
  };
  SplitPlan p;
  p.T = T;
  p.a_exp = a_exp;
  p.b_exp = b_exp;
  const std::size_t lb = floor_pow(b_exp), la = floor_pow(a_exp);
  if (lb >= T || la >= T) throw InfeasibleSplit("split plan: T too small for these exponents");
  p.T_E = T - lb;
  p.T_P = T - la;
  if (!(1 < p.T_E && p.T_E < p.T_P && p.T_P <= T)) {
    throw InfeasibleSplit("split plan violates 1 < T_E < T_P <= T (T_E=" + std::to_string(p.T_E) +
                          ", T_P=" + std::to_string(p.T_P) + ")");
  }
  p.m_TE = std::sqrt(static_cast<double>(p.T_E));
  p.l_T = std::log(t);
  return p;
}

// Standard normal --------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); }

/// Inverse standard-normal CDF: Acklam's rational approximation followed by
/// one Halley correction step.
inline double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) throw StructuralError("normal_quantile: p must lie in (0,1)");
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425, p_high = 1 - p_low;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= p_high) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1 + 0.5 * x * u);
}

// Intervals --------------------------------------------------------------------

enum class Scheme { TwoProcess, SampleSplit, NaivePlugin };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::TwoProcess: return "2ip";
    case Scheme::SampleSplit: return "spl";
    case Scheme::NaivePlugin: return "naive";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "2ip") return Scheme::TwoProcess;
  if (s == "spl") return Scheme::SampleSplit;
  if (s == "naive") return Scheme::NaivePlugin;
  throw StructuralError("unknown scheme '" + std::string(s) + "'");
}

/// Delta-method interval center +- z_{(1+level)/2} v_hat / scale for the
/// one-step prediction function.
struct ConfidenceInterval {
  double center = 0;
  double half_width = 0;
  double level = 0.9;
  Scheme scheme = Scheme::TwoProcess;
  /// sqrt(grad' Upsilon_hat grad).
  double v_hat = 0;
  /// sqrt of the estimation sample size.
  double scale = 1;
  /// The estimate behind the interval sits on the boundary of the parameter set.
  bool clamped = false;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd upsilon_hat;
  std::optional<std::size_t> T_E, T_P;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  bool covers(double value) const { return lower() <= value && value <= upper(); }
};

/// Builds the interval from an estimate and the prediction evaluated at it.
inline ConfidenceInterval delta_method_interval(const EstimationResult& est, const PredEval& pred,
                                                double scale, double level, Scheme scheme) {
  if (!(level > 0 && level < 1)) throw StructuralError("confidence level must lie in (0,1)");
  ConfidenceInterval ci;
  ci.center = pred.value;
  ci.level = level;
  ci.scheme = scheme;
  const double v2 = pred.gradient.dot(est.upsilon_hat * pred.gradient);
  ci.v_hat = std::sqrt(std::max(v2, 0.0));
  ci.scale = scale;
  ci.half_width = normal_quantile(0.5 * (1 + level)) * ci.v_hat / scale;
  ci.clamped = est.clamped;
  ci.theta_hat = est.theta_hat.values();
  ci.gradient = pred.gradient;
  ci.upsilon_hat = est.upsilon_hat;
  return ci;
}

/// Estimate on one process, predict on an independent one.
inline ConfidenceInterval ci_two_process(ModelKind kind, const Series& est_series,
                                         const Series& pred_series, const TruncationSpec& trunc,
                                         double level, const OptimizerConfig& cfg = {}) {
  const auto est = estimate(kind, est_series, cfg);
  const auto pred = evaluate_prediction(est.theta_hat, pred_series, trunc);
  return delta_method_interval(est, pred, std::sqrt(static_cast<double>(est_series.size())), level,
                               Scheme::TwoProcess);
}

/// Estimate on X_{1:T_E}, predict from X_{T_P:T} with earlier values set to zero.
inline ConfidenceInterval ci_sample_split(ModelKind kind, const Series& series, const SplitPlan& plan,
                                          double level, const OptimizerConfig& cfg = {}) {
  if (plan.T != series.size()) {
    throw StructuralError("split plan built for T=" + std::to_string(plan.T) +
                          " but series has length " + std::to_string(series.size()));
  }
  const auto est = estimate(kind, series.slice(1, plan.T_E), cfg);
  const auto pred = evaluate_prediction(est.theta_hat, series, TruncationSpec{plan.T_P});
  auto ci = delta_method_interval(est, pred, plan.m_TE, level, Scheme::SampleSplit);
  ci.T_E = plan.T_E;
  ci.T_P = plan.T_P;
  return ci;
}

/// Estimate and predict from the same full sample.
inline ConfidenceInterval ci_naive_plugin(ModelKind kind, const Series& series,
                                          const TruncationSpec& trunc, double level,
                                          const OptimizerConfig& cfg = {}) {
  const auto est = estimate(kind, series, cfg);
  const auto pred = evaluate_prediction(est.theta_hat, series, trunc);
  return delta_method_interval(est, pred, std::sqrt(static_cast<double>(series.size())), level,
                               Scheme::NaivePlugin);
}

}  // namespace predframe
