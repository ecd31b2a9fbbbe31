#pragma once

#include "predframe/types.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace predframe {

namespace detail {
/// x+ = max(x, 0) and x- = max(-x, 0).
inline double pos(double x) { return x > 0 ? x : 0.0; }
inline double neg(double x) { return x < 0 ? -x : 0.0; }
}  // namespace detail

// Parameter validation ---------------------------------------------------

struct Verdict {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  explicit operator bool() const { return ok(); }
};

/// Checks the compact parameter set of each family. The GARCH log-moment
/// stationarity condition depends on the innovation law and is handled by
/// stationarity_margin instead.
inline Verdict validate_params(const ParamVector& theta, double delta = kDelta) {
  Verdict v;
  auto require = [&](bool cond, const char* what) {
    if (!(cond)) v.violations.emplace_back(what);
  };
  for (double x : theta.values()) require(std::isfinite(x), "finite parameters");
  switch (theta.kind()) {
    case ModelKind::AR1:
      require(std::abs(theta.beta()) <= 1 - delta, "|beta| <= 1-delta");
      break;
    case ModelKind::ARMA11: {
      const double a = theta.alpha(), b = theta.beta();
      require(std::abs(a) <= 1 - delta, "|alpha| <= 1-delta");
      require(std::abs(b) <= 1 - delta, "|beta| <= 1-delta");
      require(std::abs(a) >= delta, "alpha != 0");
      require(std::abs(b) >= delta, "beta != 0");
      require(std::abs(a + b) >= delta, "alpha != -beta");
      break;
    }
    case ModelKind::GARCH11:
      require(theta.omega() >= delta, "omega >= delta");
      require(theta.alpha() >= 0, "alpha >= 0");
      require(theta.beta() >= 0, "beta >= 0");
      require(theta.beta() <= 1 - delta, "beta <= 1-delta");
      break;
    case ModelKind::TGARCH11:
      require(theta.omega() >= delta, "omega >= delta");
      require(theta.alpha_plus() >= 0, "alpha_plus >= 0");
      require(theta.alpha_minus() >= 0, "alpha_minus >= 0");
      require(theta.beta() >= 0, "beta >= 0");
      require(theta.beta() <= 1 - delta, "beta <= 1-delta");
      require(theta.alpha_plus() + theta.alpha_minus() > 0, "alpha_plus + alpha_minus > 0");
      break;
  }
  return v;
}

inline void require_valid(const ParamVector& theta) {
  auto v = validate_params(theta);
  if (!v) {
    std::string msg = "invalid " + std::string(to_string(theta.kind())) + " parameters:";
    for (const auto& s : v.violations) msg += " [" + s + "]";
    throw ValidationError(msg);
  }
}

// Innovations --------------------------------------------------------------

struct StdNormal {};

/// Student-t scaled to unit variance. nu > 4 keeps the fourth moment finite.
struct StdStudentT {
  double nu = 8.0;
};

/// Resampling from a fixed pool of draws.
struct Empirical {
  std::vector<double> draws;
};

/// Deterministic stream of zeros. Only meant for recursion tests.
struct ZeroNoise {};

struct InnovationSpec {
  std::variant<StdNormal, StdStudentT, Empirical, ZeroNoise> law = StdNormal{};
  /// Innovation scale for AR1/ARMA11. Must be 1 for the GARCH family.
  double sigma_eps = 1.0;

  bool is_zero_noise() const { return std::holds_alternative<ZeroNoise>(law); }
};

/// Draws standardized innovations according to an InnovationSpec.
class InnovationSampler {
 public:
  InnovationSampler(const InnovationSpec& spec, bool unit_variance) : spec_(spec) {
    if (!(spec.sigma_eps > 0) || !std::isfinite(spec.sigma_eps)) {
      throw StructuralError("sigma_eps must be positive");
    }
    if (auto* t = std::get_if<StdStudentT>(&spec_.law)) {
      if (!(t->nu > 4)) throw StructuralError("Student-t innovations need nu > 4");
      t_scale_ = std::sqrt((t->nu - 2.0) / t->nu);
    }
    if (auto* e = std::get_if<Empirical>(&spec_.law)) {
      if (e->draws.empty()) throw StructuralError("empirical innovation pool is empty");
      const double n = static_cast<double>(e->draws.size());
      const double mean = std::accumulate(e->draws.begin(), e->draws.end(), 0.0) / n;
      double ss = 0;
      for (double& x : e->draws) {
        x -= mean;
        ss += x * x;
      }
      if (unit_variance) {
        if (!(ss > 0)) throw StructuralError("empirical innovation pool has zero variance");
        const double s = std::sqrt(ss / n);
        for (double& x : e->draws) x /= s;
      }
    }
  }

  template <class Rng>
  double operator()(Rng& rng) {
    return std::visit(
        [&](auto& law) -> double {
          using L = std::decay_t<decltype(law)>;
          if constexpr (std::is_same_v<L, StdNormal>) {
            return normal_(rng);
          } else if constexpr (std::is_same_v<L, StdStudentT>) {
            const double z = normal_(rng);
            std::chi_squared_distribution<double> chi(law.nu);
            return t_scale_ * z / std::sqrt(chi(rng) / law.nu);
          } else if constexpr (std::is_same_v<L, Empirical>) {
            std::uniform_int_distribution<std::size_t> pick(0, law.draws.size() - 1);
            return law.draws[pick(rng)];
          } else {
            return 0.0;
          }
        },
        spec_.law);
  }

 private:
  InnovationSpec spec_;
  std::normal_distribution<double> normal_;
  double t_scale_ = 1.0;
};

/// Fourth moment E[eps^4] of the standardized innovation law.
inline double innovation_fourth_moment(const InnovationSpec& spec) {
  return std::visit(
      [](const auto& law) -> double {
        using L = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<L, StdNormal>) {
          return 3.0;
        } else if constexpr (std::is_same_v<L, StdStudentT>) {
          return 3.0 * (law.nu - 2.0) / (law.nu - 4.0);
        } else if constexpr (std::is_same_v<L, Empirical>) {
          const double n = static_cast<double>(law.draws.size());
          const double mean = std::accumulate(law.draws.begin(), law.draws.end(), 0.0) / n;
          double m2 = 0, m4 = 0;
          for (double x : law.draws) {
            const double d = (x - mean) * (x - mean);
            m2 += d;
            m4 += d * d;
          }
          m2 /= n;
          m4 /= n;
          return m4 / (m2 * m2);
        } else {
          return 0.0;
        }
      },
      spec.law);
}

// Seeding --------------------------------------------------------------

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `stream` within replication `rep` of a run seeded with `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t rep, std::uint64_t stream = 0) {
  return mix_seed(mix_seed(mix_seed(seed) ^ rep) ^ (stream + 0x51ED2701ULL));
}

// Simulation -------------------------------------------------------------

inline constexpr std::size_t kDefaultBurnIn = 500;

struct SimulationOptions {
  std::size_t burn_in = kDefaultBurnIn;
  /// Value of X before the first simulated step.
  double x0 = 0.0;
};

/// Simulates T observations after discarding `burn_in` steps.
///
/// The path starts from X = x0 with the variance (volatility) recursion at its
/// fixed point omega/(1-beta).
inline Series simulate(const ParamVector& theta, const InnovationSpec& innov, std::size_t T,
                       std::uint64_t seed, const SimulationOptions& opt = {}) {
  require_valid(theta);
  if (T == 0) throw StructuralError("simulate: T must be positive");
  const ModelKind kind = theta.kind();
  if (is_garch_family(kind) && innov.sigma_eps != 1.0) {
    throw ValidationError("GARCH-family simulation requires sigma_eps = 1");
  }
  InnovationSampler draw(innov, is_garch_family(kind));
  std::mt19937_64 rng(seed);
  const double scale = is_garch_family(kind) ? 1.0 : innov.sigma_eps;

  const std::size_t n = opt.burn_in + T;
  std::vector<double> out;
  out.reserve(T);
  double x = opt.x0;
  double eps_prev = 0.0;
  const double omega = theta.omega(), beta = theta.beta();
  // Conditional variance (GARCH) or conditional volatility (T-GARCH).
  double h = is_garch_family(kind) ? omega / (1.0 - beta) : 0.0;

  for (std::size_t t = 1; t <= n; ++t) {
    const double eps = draw(rng);
    switch (kind) {
      case ModelKind::AR1:
        x = beta * x + scale * eps;
        break;
      case ModelKind::ARMA11: {
        const double e = scale * eps;
        x = omega + theta.alpha() * eps_prev + beta * (x - omega) + e;
        eps_prev = e;
        break;
      }
      case ModelKind::GARCH11:
        h = omega + theta.alpha() * x * x + beta * h;
        assert(h >= omega);
        x = std::sqrt(h) * eps;
        break;
      case ModelKind::TGARCH11: {
        const double xp = detail::pos(x), xm = detail::neg(x);
        h = omega + theta.alpha_plus() * xp + theta.alpha_minus() * xm + beta * h;
        assert(h >= omega);
        x = h * eps;
        break;
      }
    }
    if (t > opt.burn_in) out.push_back(x);
  }
  return Series(std::move(out));
}

// Stationarity -------------------------------------------------------------

struct StationarityMargin {
  /// Monte Carlo estimate of E[ln(alpha eps^2 + beta)] (GARCH) or
  /// E[ln(alpha+ eps+ + alpha- eps- + beta)] (T-GARCH).
  double value = 0;
  /// Standard error of the estimate (0 when the integrand is constant).
  double std_error = 0;
  /// Set when some draw made the log argument zero; value is then -inf.
  bool log_of_zero = false;

  /// Negative margin certifies strict stationarity up to MC error.
  bool stationary() const { return value < 0; }
};

inline StationarityMargin stationarity_margin(const ParamVector& theta, const InnovationSpec& innov,
                                              std::size_t n_draws, std::uint64_t seed) {
  if (!is_garch_family(theta.kind())) {
    throw StructuralError("stationarity_margin is defined for GARCH11 and TGARCH11 only");
  }
  require_valid(theta);
  if (n_draws < 1000) throw StructuralError("stationarity_margin needs at least 1000 draws");

  const bool garch = theta.kind() == ModelKind::GARCH11;
  const double beta = theta.beta();
  const bool constant = garch ? theta.alpha() == 0.0
                              : (theta.alpha_plus() == 0.0 && theta.alpha_minus() == 0.0);
  if (constant) {
    if (beta == 0.0) return {-std::numeric_limits<double>::infinity(), 0.0, true};
    return {std::log(beta), 0.0, false};
  }

  InnovationSampler draw(innov, true);
  std::mt19937_64 rng(seed);
  double mean = 0, m2 = 0;
  for (std::size_t i = 1; i <= n_draws; ++i) {
    const double e = draw(rng);
    const double arg = garch ? theta.alpha() * e * e + beta
                             : theta.alpha_plus() * detail::pos(e) +
                                   theta.alpha_minus() * detail::neg(e) + beta;
    if (!(arg > 0)) return {-std::numeric_limits<double>::infinity(), 0.0, true};
    const double y = std::log(arg);
    const double d = y - mean;
    mean += d / static_cast<double>(i);
    m2 += d * (y - mean);
  }
  const double n = static_cast<double>(n_draws);
  return {mean, std::sqrt(m2 / (n - 1) / n), false};
}

}  // namespace predframe
