#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace predframe {

/// Width of the margin used to turn the open parameter constraints
/// (|beta| < 1, omega > 0, ...) into a compact parameter set.
inline constexpr double kDelta = 1e-6;

// Errors ---------------------------------------------------------------

/// Malformed input: wrong dimensions, empty data, out-of-range arguments.
struct StructuralError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Parameters outside the admissible set of the model.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerically degenerate data or estimates (zero denominators, singular
/// covariance, operations not defined for a model).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model families --------------------------------------------------------

enum class ModelKind { AR1, ARMA11, GARCH11, TGARCH11 };

inline constexpr std::size_t param_count(ModelKind kind) {
  switch (kind) {
    case ModelKind::AR1: return 1;
    case ModelKind::ARMA11: return 3;
    case ModelKind::GARCH11: return 3;
    case ModelKind::TGARCH11: return 4;
  }
  return 0;
}

inline constexpr bool is_garch_family(ModelKind kind) {
  return kind == ModelKind::GARCH11 || kind == ModelKind::TGARCH11;
}

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::AR1: return "ar1";
    case ModelKind::ARMA11: return "arma11";
    case ModelKind::GARCH11: return "garch11";
    case ModelKind::TGARCH11: return "tgarch11";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "ar1") return ModelKind::AR1;
  if (name == "arma11") return ModelKind::ARMA11;
  if (name == "garch11") return ModelKind::GARCH11;
  if (name == "tgarch11") return ModelKind::TGARCH11;
  throw StructuralError("unknown model '" + std::string(name) + "'");
}

/// Parameter names in storage order.
inline std::vector<std::string> param_names(ModelKind kind) {
  switch (kind) {
    case ModelKind::AR1: return {"beta"};
    case ModelKind::ARMA11: return {"omega", "alpha", "beta"};
    case ModelKind::GARCH11: return {"omega", "alpha", "beta"};
    case ModelKind::TGARCH11: return {"omega", "alpha_plus", "alpha_minus", "beta"};
  }
  return {};
}

/// Parameter vector tagged with its model family.
///
/// Storage order: AR1 (beta); ARMA11 (omega, alpha, beta);
/// GARCH11 (omega, alpha, beta); TGARCH11 (omega, alpha_plus, alpha_minus, beta).
class ParamVector {
 public:
  ParamVector(ModelKind kind, Eigen::VectorXd values) : kind_(kind), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != param_count(kind_)) {
      throw StructuralError("parameter vector for " + std::string(to_string(kind_)) + " needs " +
                            std::to_string(param_count(kind_)) + " entries, got " +
                            std::to_string(values_.size()));
    }
  }

  static ParamVector ar1(double beta) { return {ModelKind::AR1, make({beta})}; }
  static ParamVector arma11(double omega, double alpha, double beta) {
    return {ModelKind::ARMA11, make({omega, alpha, beta})};
  }
  static ParamVector garch11(double omega, double alpha, double beta) {
    return {ModelKind::GARCH11, make({omega, alpha, beta})};
  }
  static ParamVector tgarch11(double omega, double alpha_plus, double alpha_minus, double beta) {
    return {ModelKind::TGARCH11, make({omega, alpha_plus, alpha_minus, beta})};
  }

  ModelKind kind() const { return kind_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  /// Same family, new values.
  ParamVector with_values(Eigen::VectorXd values) const { return {kind_, std::move(values)}; }

  // Named access. `beta` is the last entry for every family.
  double beta() const { return values_[values_.size() - 1]; }
  double omega() const { return kind_ == ModelKind::AR1 ? 0.0 : values_[0]; }
  double alpha() const { return values_[1]; }
  double alpha_plus() const { return values_[1]; }
  double alpha_minus() const { return values_[2]; }

 private:
  static Eigen::VectorXd make(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
  }

  ModelKind kind_;
  Eigen::VectorXd values_;
};

/// Observations X_{t0}, X_{t0+1}, ... in time order.
class Series {
 public:
  Series() = default;
  explicit Series(std::vector<double> values, long t0 = 1) : values_(std::move(values)), t0_(t0) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw StructuralError("series value at t=" + std::to_string(t0_ + static_cast<long>(i)) +
                              " is not finite");
      }
    }
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  long t0() const { return t0_; }
  const std::vector<double>& values() const { return values_; }

  /// 1-based access relative to the start of the series.
  double at(std::size_t t) const { return values_.at(t - 1); }
  double back() const { return values_.back(); }

  /// Observations first..last (1-based, inclusive) with the time index kept.
  Series slice(std::size_t first, std::size_t last) const {
    if (first < 1 || last > values_.size() || first > last) {
      throw StructuralError("slice [" + std::to_string(first) + ", " + std::to_string(last) +
                            "] outside series of length " + std::to_string(values_.size()));
    }
    return Series(std::vector<double>(values_.begin() + static_cast<long>(first - 1),
                                      values_.begin() + static_cast<long>(last)),
                  t0_ + static_cast<long>(first) - 1);
  }

 private:
  std::vector<double> values_;
  long t0_ = 1;
};

}  // namespace predframe
