#pragma once

#include "predframe/estimate.hpp"
#include "predframe/interval.hpp"
#include "predframe/model.hpp"
#include "predframe/predict.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

namespace predframe {

// Parallel loop ------------------------------------------------------------

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Work items share no
/// state through this function; the first exception thrown is rethrown.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  std::mutex error_mu;
  for (unsigned w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// Derivative and truncation checks --------------------------------------------

struct GradientCheck {
  /// Max relative error of the analytic gradient against central differences of psi.
  double gradient_error = 0;
  /// Max relative error of the analytic Hessian against central differences of the gradient.
  double hessian_error = 0;

  double max_error() const { return std::max(gradient_error, hessian_error); }
};

/// Relative errors are |fd - analytic| / max(|analytic|, floor).
inline GradientCheck gradient_check(const ParamVector& theta, const Series& window,
                                    const TruncationSpec& trunc = {}, double h = 1e-5,
                                    double floor = 1e-2) {
  if (!(h > 0)) throw StructuralError("gradient_check: h must be positive");
  const auto base = evaluate_prediction(theta, window, trunc);
  GradientCheck out;
  const auto n = static_cast<Eigen::Index>(theta.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd up = theta.values(), dn = theta.values();
    up[i] += h;
    dn[i] -= h;
    // Use the step that is actually representable.
    const double span = up[i] - dn[i];
    const auto eu = evaluate_prediction(theta.with_values(up), window, trunc);
    const auto ed = evaluate_prediction(theta.with_values(dn), window, trunc);
    const double fd = (eu.value - ed.value) / span;
    out.gradient_error = std::max(out.gradient_error, std::abs(fd - base.gradient[i]) /
                                                          std::max(std::abs(base.gradient[i]), floor));
    const Eigen::VectorXd fd_col = (eu.gradient - ed.gradient) / span;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double an = base.hessian(j, i);
      out.hessian_error =
          std::max(out.hessian_error, std::abs(fd_col[j] - an) / std::max(std::abs(an), floor));
    }
  }
  return out;
}

struct DecayRow {
  std::size_t t1 = 0;
  double gap = 0;
  bool operator==(const DecayRow&) const = default;
};

/// prediction_gap between truncation at each t1 and the full window, sorted by t1.
inline std::vector<DecayRow> truncation_decay(const ParamVector& theta, const Series& window,
                                              std::vector<std::size_t> t1_grid) {
  std::sort(t1_grid.begin(), t1_grid.end());
  std::vector<DecayRow> out;
  out.reserve(t1_grid.size());
  for (std::size_t t1 : t1_grid) {
    out.push_back({t1, prediction_gap(theta, window, TruncationSpec{1}, TruncationSpec{t1})});
  }
  return out;
}

// Kolmogorov-Smirnov -----------------------------------------------------------

/// One-sample KS statistic of `sample` against the standard normal cdf.
inline double ks_statistic(std::vector<double> sample) {
  if (sample.empty()) throw StructuralError("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = normal_cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

// True asymptotic covariance ---------------------------------------------------

inline constexpr std::size_t kLongRunLength = 1'000'000;

/// Asymptotic covariance of sqrt(T)(theta_hat - theta0) at the true parameter.
///
/// Closed form for AR1 and ARMA11. For the GARCH family the information
/// matrix is averaged along one simulated path of `long_run` observations and
/// combined with the exact fourth moment of the innovation law.
inline Eigen::MatrixXd true_upsilon(const ParamVector& theta0, const InnovationSpec& innov,
                                    std::uint64_t seed, std::size_t long_run = kLongRunLength) {
  require_valid(theta0);
  switch (theta0.kind()) {
    case ModelKind::AR1:
      return Eigen::MatrixXd::Constant(1, 1, 1 - theta0.beta() * theta0.beta());
    case ModelKind::ARMA11:
      return arma_upsilon(theta0.alpha(), theta0.beta(), innov.sigma_eps * innov.sigma_eps);
    case ModelKind::GARCH11:
    case ModelKind::TGARCH11: {
      const auto path = simulate(theta0, innov, long_run, seed);
      const auto cov = qml_covariance(theta0, path.values());
      const double k0 = innovation_fourth_moment(innov);
      return cov.upsilon * ((k0 - 1.0) / (cov.kurtosis - 1.0));
    }
  }
  throw StructuralError("unknown model");
}

// Replicated estimates --------------------------------------------------------

using Estimator = std::function<EstimationResult(const Series&)>;

struct ReplicationSet {
  /// sqrt(T)(theta_hat - theta0) for each successful replication, in replication order.
  std::vector<Eigen::VectorXd> scaled_errors;
  std::size_t failures = 0;
  std::size_t clamped = 0;
};

/// Simulates `reps` independent series of length T and estimates each one.
/// Replication i draws from derive_seed(seed, i); failures are counted, not thrown.
inline ReplicationSet replicate_estimates(const ParamVector& theta0, const InnovationSpec& innov,
                                          std::size_t T, std::size_t reps, std::uint64_t seed,
                                          unsigned jobs = 1, Estimator estimator = {}) {
  if (!estimator) {
    const ModelKind kind = theta0.kind();
    estimator = [kind](const Series& s) { return estimate(kind, s); };
  }
  std::vector<std::optional<std::pair<Eigen::VectorXd, bool>>> slots(reps);
  const double rt = std::sqrt(static_cast<double>(T));
  parallel_for(reps, jobs, [&](std::size_t i) {
    try {
      const auto x = simulate(theta0, innov, T, derive_seed(seed, i));
      const auto est = estimator(x);
      Eigen::VectorXd e = rt * (est.theta_hat.values() - theta0.values());
      if (e.allFinite()) slots[i] = std::make_pair(std::move(e), est.clamped);
    } catch (const std::exception&) {
    }
  });
  ReplicationSet out;
  for (auto& s : slots) {
    if (!s) {
      ++out.failures;
      continue;
    }
    if (s->second) ++out.clamped;
    out.scaled_errors.push_back(std::move(s->first));
  }
  return out;
}

struct NormalityReport {
  /// Max over coordinates.
  double ks = 0;
  std::vector<double> ks_by_coordinate;
  std::size_t used = 0;
  std::size_t failures = 0;
};

/// KS statistics of each coordinate of sqrt(T)(theta_hat - theta0), standardized
/// by the diagonal of `upsilon0`.
inline NormalityReport normality_from(const ReplicationSet& reps, const Eigen::MatrixXd& upsilon0) {
  if (reps.scaled_errors.empty()) throw DomainError("no successful replications");
  NormalityReport out;
  out.used = reps.scaled_errors.size();
  out.failures = reps.failures;
  for (Eigen::Index j = 0; j < upsilon0.rows(); ++j) {
    const double sd = std::sqrt(upsilon0(j, j));
    std::vector<double> z;
    z.reserve(out.used);
    for (const auto& e : reps.scaled_errors) z.push_back(e[j] / sd);
    out.ks_by_coordinate.push_back(ks_statistic(std::move(z)));
  }
  out.ks = *std::max_element(out.ks_by_coordinate.begin(), out.ks_by_coordinate.end());
  return out;
}

inline NormalityReport normality_check(const ParamVector& theta0, const InnovationSpec& innov,
                                       std::size_t T, std::size_t reps, std::uint64_t seed,
                                       unsigned jobs = 1, Estimator estimator = {}) {
  if (reps < 200) throw StructuralError("normality_check needs reps >= 200");
  const auto set = replicate_estimates(theta0, innov, T, reps, seed, jobs, std::move(estimator));
  return normality_from(set, true_upsilon(theta0, innov, derive_seed(seed, reps, 7)));
}

/// Sample covariance (divisor n-1) of the scaled errors.
inline Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& xs) {
  if (xs.size() < 2) throw DomainError("sample covariance needs at least two points");
  const Eigen::Index r = xs.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(r);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(r, r);
  for (const auto& x : xs) S += (x - mean) * (x - mean).transpose();
  return S / static_cast<double>(xs.size() - 1);
}

/// ||S - upsilon0||_F / ||upsilon0||_F.
inline double covariance_error(const ReplicationSet& reps, const Eigen::MatrixXd& upsilon0) {
  return (sample_covariance(reps.scaled_errors) - upsilon0).norm() / upsilon0.norm();
}

// Coverage experiments -------------------------------------------------------

struct ExperimentConfig {
  ParamVector theta0 = ParamVector::ar1(0.5);
  InnovationSpec innov;
  std::size_t T = 1000;
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  std::vector<Scheme> schemes{Scheme::TwoProcess, Scheme::SampleSplit};
  double a_exp = 0.5;
  double b_exp = 0.8;
  double level = 0.9;
  /// Truncation used by the 2IP and naive schemes.
  TruncationSpec trunc;
  /// Count replications with a boundary estimate as failures.
  bool exclude_clamped = false;
  OptimizerConfig optimizer;
  unsigned jobs = 1;
  /// Grid for the decay diagnostic; empty skips it.
  std::vector<std::size_t> decay_grid;

  ModelKind kind() const { return theta0.kind(); }
};

struct SchemeStats {
  Scheme scheme = Scheme::TwoProcess;
  double coverage = 0;
  double avg_half_width = 0;
  std::size_t reps_used = 0;
  std::size_t failures = 0;
  /// Replications whose estimate sat on the boundary (kept unless excluded).
  std::size_t clamped = 0;
  bool operator==(const SchemeStats&) const = default;
};

struct CoverageReport {
  std::vector<SchemeStats> schemes;
  std::optional<double> gradient_check_max_err;
  std::vector<DecayRow> decay_table;
  std::optional<double> ks_statistic;
  bool operator==(const CoverageReport&) const = default;

  const SchemeStats& at(Scheme s) const {
    for (const auto& x : schemes) {
      if (x.scheme == s) return x;
    }
    throw StructuralError("scheme not in report");
  }
};

namespace detail {

struct RepOutcome {
  bool ok = false;
  bool covered = false;
  bool clamped = false;
  double half_width = 0;
};

}  // namespace detail

/// Monte Carlo coverage of the conditional intervals for psi_{T+1}.
///
/// Replication i simulates its main process from derive_seed(seed, i, 0) and,
/// for the 2IP scheme, an independent prediction process from
/// derive_seed(seed, i, 1). The true psi is evaluated at theta0 on the
/// prediction-side window with the same truncation as the interval.
inline CoverageReport run_coverage(const ExperimentConfig& cfg) {
  require_valid(cfg.theta0);
  if (cfg.reps < 1) throw StructuralError("reps must be >= 1");
  if (cfg.T < 8) throw StructuralError("T must be >= 8");
  if (cfg.schemes.empty()) throw StructuralError("no schemes requested");
  if (!(cfg.level > 0 && cfg.level < 1)) throw StructuralError("level must lie in (0,1)");
  const ModelKind kind = cfg.kind();
  std::optional<SplitPlan> plan;
  for (Scheme s : cfg.schemes) {
    if (s == Scheme::SampleSplit && !plan) plan = make_split_plan(cfg.T, cfg.a_exp, cfg.b_exp);
  }
  if (cfg.trunc.t1 < 1 || cfg.trunc.t1 > cfg.T) throw StructuralError("truncation start outside window");

  const std::size_t ns = cfg.schemes.size();
  std::vector<detail::RepOutcome> outcomes(cfg.reps * ns);

  parallel_for(cfg.reps, cfg.jobs, [&](std::size_t i) {
    std::optional<Series> main, other;
    try {
      main = simulate(cfg.theta0, cfg.innov, cfg.T, derive_seed(cfg.seed, i, 0));
    } catch (const std::exception&) {
      return;
    }
    for (std::size_t k = 0; k < ns; ++k) {
      auto& out = outcomes[i * ns + k];
      try {
        ConfidenceInterval ci;
        double truth = 0;
        switch (cfg.schemes[k]) {
          case Scheme::TwoProcess:
            if (!other) other = simulate(cfg.theta0, cfg.innov, cfg.T, derive_seed(cfg.seed, i, 1));
            ci = ci_two_process(kind, *main, *other, cfg.trunc, cfg.level, cfg.optimizer);
            truth = evaluate_prediction(cfg.theta0, *other, cfg.trunc).value;
            break;
          case Scheme::SampleSplit:
            ci = ci_sample_split(kind, *main, *plan, cfg.level, cfg.optimizer);
            truth = evaluate_prediction(cfg.theta0, *main, TruncationSpec{plan->T_P}).value;
            break;
          case Scheme::NaivePlugin:
            ci = ci_naive_plugin(kind, *main, cfg.trunc, cfg.level, cfg.optimizer);
            truth = evaluate_prediction(cfg.theta0, *main, cfg.trunc).value;
            break;
        }
        if (!std::isfinite(ci.center) || !std::isfinite(ci.half_width)) continue;
        out.clamped = ci.clamped;
        if (cfg.exclude_clamped && ci.clamped) continue;
        out.ok = true;
        out.covered = ci.covers(truth);
        out.half_width = ci.half_width;
      } catch (const std::exception&) {
        out.ok = false;
      }
    }
  });

  CoverageReport report;
  for (std::size_t k = 0; k < ns; ++k) {
    SchemeStats st;
    st.scheme = cfg.schemes[k];
    std::size_t covered = 0;
    double width = 0;
    for (std::size_t i = 0; i < cfg.reps; ++i) {
      const auto& o = outcomes[i * ns + k];
      if (o.clamped) ++st.clamped;
      if (!o.ok) {
        ++st.failures;
        continue;
      }
      ++st.reps_used;
      if (o.covered) ++covered;
      width += o.half_width;
    }
    if (st.reps_used > 0) {
      st.coverage = static_cast<double>(covered) / static_cast<double>(st.reps_used);
      st.avg_half_width = width / static_cast<double>(st.reps_used);
    }
    report.schemes.push_back(st);
  }

  // Diagnostics on the first replication's path at theta0.
  try {
    const auto x = simulate(cfg.theta0, cfg.innov, cfg.T, derive_seed(cfg.seed, 0, 0));
    report.gradient_check_max_err = gradient_check(cfg.theta0, x, cfg.trunc).max_error();
    if (!cfg.decay_grid.empty()) report.decay_table = truncation_decay(cfg.theta0, x, cfg.decay_grid);
  } catch (const std::exception&) {
  }
  return report;
}

}  // namespace predframe
