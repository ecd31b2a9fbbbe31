// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Usage: acceptance [criterion numbers...]   (default: all)

#include "predframe/estimate.hpp"
#include "predframe/interval.hpp"
#include "predframe/io.hpp"
#include "predframe/model.hpp"
#include "predframe/predict.hpp"
#include "predframe/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace predframe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const unsigned kJobs = default_jobs();

// 1 ------------------------------------------------------------------------

ParamVector random_interior(ModelKind kind, std::mt19937_64& rng) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto sgn = [&] { return u(0, 1) < 0.5 ? -1.0 : 1.0; };
  switch (kind) {
    case ModelKind::AR1:
      return ParamVector::ar1(u(-0.9, 0.9));
    case ModelKind::ARMA11: {
      double a, b;
      do {
        a = sgn() * u(0.1, 0.8);
        b = sgn() * u(0.1, 0.8);
      } while (std::abs(a + b) < 0.1);
      return ParamVector::arma11(u(-2, 2), a, b);
    }
    case ModelKind::GARCH11: {
      const double a = u(0.02, 0.2);
      return ParamVector::garch11(u(0.05, 1.0), a, u(0.5, std::min(0.9, 0.97 - a)));
    }
    case ModelKind::TGARCH11:
      return ParamVector::tgarch11(u(0.05, 0.5), u(0.02, 0.15), u(0.02, 0.15), u(0.5, 0.85));
  }
  throw StructuralError("unknown model");
}

bool zero_structure_holds(const ParamVector& th, const Eigen::MatrixXd& H) {
  switch (th.kind()) {
    case ModelKind::AR1:
      return H(0, 0) == 0.0;
    case ModelKind::GARCH11:
      return H(0, 0) == 0.0 && H(0, 1) == 0.0 && H(1, 0) == 0.0 && H(1, 1) == 0.0;
    case ModelKind::ARMA11:
      return H(0, 0) == 0.0 && H(2, 2) == 0.0;
    case ModelKind::TGARCH11:
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (H(i, j) != 0.0) return false;
        }
      }
      return true;
  }
  return false;
}

Outcome derivative_fidelity() {
  std::mt19937_64 rng(20240101);
  double gmax = 0, hmax = 0;
  bool zeros = true;
  for (ModelKind kind : {ModelKind::AR1, ModelKind::ARMA11, ModelKind::GARCH11, ModelKind::TGARCH11}) {
    for (int p = 0; p < 5; ++p) {
      const auto th = random_interior(kind, rng);
      const auto x = simulate(th, {}, 200, rng());
      const auto g = gradient_check(th, x, {}, 1e-5);
      gmax = std::max(gmax, g.gradient_error);
      hmax = std::max(hmax, g.hessian_error);
      zeros = zeros && zero_structure_holds(th, evaluate_prediction(th, x).hessian);
    }
  }
  return {gmax < 1e-6 && hmax < 1e-4 && zeros,
          fmt("max grad rel err %.2e (<1e-6), max hess rel err %.2e (<1e-4), zero structure %s", gmax, hmax,
              zeros ? "exact" : "VIOLATED")};
}

// 2 ------------------------------------------------------------------------

Outcome hand_oracles() {
  const auto ols = estimate_ar1_ols(Series({1.0, 0.5, 0.25}));
  const bool a = ols.theta_hat.beta() == 0.5 && ols.upsilon_hat(0, 0) == 0.75;
  const double psi = evaluate_prediction(ParamVector::garch11(0.1, 0.1, 0.8), Series({1.0, -1.0})).value;
  const bool b = std::abs(psi - 0.68) < 1e-12;
  const auto plan = make_split_plan(1000, 0.5, 0.8);
  const bool c = plan.T_E == 749 && plan.T_P == 969;
  const double rho = arma_autocorrelation(0.5, 0.3, 1);
  const bool d = std::abs(rho - 0.593548) <= 1e-6;
  return {a && b && c && d, fmt("beta_hat=%.17g upsilon=%.17g psi=%.15g (T_E,T_P)=(%zu,%zu) rho1=%.8f",
                                ols.theta_hat.beta(), ols.upsilon_hat(0, 0), psi, plan.T_E, plan.T_P, rho)};
}

// 3 ------------------------------------------------------------------------

// sqrt(T) * sum_{j < t1} alpha beta^{T-j} X_j^2 in long double, written out directly.
long double brute_gap(const std::vector<double>& x, std::size_t t1, double alpha, double beta) {
  const std::size_t T = x.size();
  long double s = 0;
  for (std::size_t j = 1; j < t1; ++j) {
    s += static_cast<long double>(alpha) * std::pow(static_cast<long double>(beta), static_cast<long double>(T - j)) *
         static_cast<long double>(x[j - 1]) * static_cast<long double>(x[j - 1]);
  }
  return std::sqrt(static_cast<long double>(T)) * s;
}

Outcome truncation_decay_check() {
  const auto th = ParamVector::garch11(0.1, 0.1, 0.8);
  const std::vector<std::size_t> grid{100, 200, 300};
  const int windows = 200;
  std::vector<double> mean(grid.size(), 0.0);
  double max_brute_err = 0;
  for (int w = 0; w < windows; ++w) {
    const auto x = simulate(th, {}, 400, derive_seed(3, static_cast<std::uint64_t>(w)));
    const auto tab = truncation_decay(th, x, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto oracle = static_cast<double>(brute_gap(x.values(), grid[k], 0.1, 0.8));
      max_brute_err = std::max(max_brute_err, std::abs(tab[k].gap - oracle) / oracle);
      mean[k] += tab[k].gap / windows;
    }
  }
  const double expect = std::pow(0.8, 100);
  const double r1 = mean[0] / mean[1] / expect, r2 = mean[1] / mean[2] / expect;
  const bool decay = r1 >= 0.5 && r1 <= 2 && r2 >= 0.5 && r2 <= 2;
  return {decay && max_brute_err <= 1e-12,
          fmt("mean-gap ratios / beta^100: %.3f, %.3f (within [0.5,2]); max rel diff to brute-force %.1e (<=1e-12)",
              r1, r2, max_brute_err)};
}

// 4 ------------------------------------------------------------------------

Outcome asymptotic_normality() {
  std::ostringstream msg;
  // AR1: ten runs, 1000 reps each.
  int ar1_ok = 0;
  const double ar1_crit = 1.63 / std::sqrt(1000.0);
  double ar1_worst = 0;
  for (int run = 0; run < 10; ++run) {
    const auto r = normality_check(ParamVector::ar1(0.5), {}, 2000, 1000, derive_seed(400, run), kJobs);
    ar1_worst = std::max(ar1_worst, r.ks);
    if (r.ks < ar1_crit) ++ar1_ok;
  }
  msg << fmt("AR1 %d/10 runs KS<%.4f (worst %.4f)", ar1_ok, ar1_crit, ar1_worst);

  auto majority = [&](const ParamVector& th, std::size_t T, std::size_t reps, int runs, std::uint64_t seed,
                      const char* name) {
    const double crit = 1.95 / std::sqrt(static_cast<double>(reps));
    const auto U = true_upsilon(th, {}, derive_seed(seed, 999));
    int ok = 0;
    msg << fmt("; %s KS", name);
    for (int run = 0; run < runs; ++run) {
      const auto set = replicate_estimates(th, {}, T, reps, derive_seed(seed, run), kJobs);
      const auto r = normality_from(set, U);
      msg << fmt(" %.4f", r.ks);
      if (r.ks < crit) ++ok;
    }
    msg << fmt(" (<%.4f in %d/%d)", crit, ok, runs);
    return 2 * ok > runs;
  };
  const bool arma = majority(ParamVector::arma11(1, 0.4, 0.5), 4000, 500, 3, 410, "ARMA11");
  const bool garch = majority(ParamVector::garch11(0.1, 0.1, 0.8), 4000, 500, 3, 420, "GARCH11");
  return {ar1_ok >= 9 && arma && garch, msg.str()};
}

// 5 ------------------------------------------------------------------------

Outcome covariance_consistency() {
  std::ostringstream msg;
  bool all = true;
  const std::pair<const char*, ParamVector> cases[] = {
      {"AR1", ParamVector::ar1(0.5)},
      {"ARMA11", ParamVector::arma11(1, 0.4, 0.5)},
      {"GARCH11", ParamVector::garch11(0.1, 0.1, 0.8)},
      {"TGARCH11", ParamVector::tgarch11(0.1, 0.05, 0.1, 0.8)}};
  std::uint64_t seed = 500;
  for (const auto& [name, th] : cases) {
    const auto U = true_upsilon(th, {}, derive_seed(seed, 999));
    const auto set = replicate_estimates(th, {}, 2000, 500, seed, kJobs);
    const double err = covariance_error(set, U);
    all = all && err < 0.2;
    msg << fmt("%s%s %.3f", seed == 500 ? "" : "; ", name, err);
    ++seed;
  }
  msg << " (rel Frobenius, <0.20)";
  return {all, msg.str()};
}

// 6 ------------------------------------------------------------------------

Outcome coverage() {
  std::ostringstream msg;
  bool all = true;
  auto one = [&](const char* name, const ParamVector& th, std::size_t T, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.theta0 = th;
    cfg.T = T;
    cfg.reps = 2000;
    cfg.seed = seed;
    cfg.level = 0.9;
    cfg.schemes = {Scheme::TwoProcess, Scheme::SampleSplit};
    cfg.jobs = kJobs;
    const auto rep = run_coverage(cfg);
    const auto& a = rep.at(Scheme::TwoProcess);
    const auto& b = rep.at(Scheme::SampleSplit);
    const bool ok = a.coverage >= 0.88 && a.coverage <= 0.92 && b.coverage >= 0.88 && b.coverage <= 0.92 &&
                    std::abs(a.coverage - b.coverage) <= 0.025;
    all = all && ok;
    msg << fmt("%s%s 2IP %.4f SPL %.4f |diff| %.4f (failures %zu/%zu)", msg.tellp() > 0 ? "; " : "", name,
               a.coverage, b.coverage, std::abs(a.coverage - b.coverage), a.failures, b.failures);
  };
  one("AR1 T=1000", ParamVector::ar1(0.5), 1000, 600);
  one("GARCH11 T=4000", ParamVector::garch11(0.1, 0.1, 0.8), 4000, 601);
  return {all, msg.str()};
}

// 7 ------------------------------------------------------------------------

Outcome risk_mapping() {
  const auto th = ParamVector::tgarch11(0.1, 0.05, 0.1, 0.8);
  const auto x = simulate(th, {}, 1'000'000, 700);
  const auto h = detail::conditional_variances(th, x.values());
  std::vector<double> resid(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) resid[t] = x.values()[t] / std::sqrt(h[t]);
  const auto lvl = empirical_risk_level(resid, 0.05);
  const bool q = std::abs(lvl.xi_a + 1.6449) < 0.01 && std::abs(lvl.mu_a - 2.0627) < 0.01;

  bool linear = true;
  double ratio0 = 0;
  for (int w = 0; w < 5; ++w) {
    const auto win = x.slice(1 + 1000 * static_cast<std::size_t>(w), 1000 * static_cast<std::size_t>(w + 1));
    const double psi = evaluate_prediction(th, win).value;
    const double var = conditional_var(th, win, {}, lvl.xi_a), es = conditional_es(th, win, {}, lvl.mu_a);
    linear = linear && var == -lvl.xi_a * psi && es == lvl.mu_a * psi;
    const double ratio = var / psi;
    if (w == 0) ratio0 = ratio;
    linear = linear && std::abs(ratio - ratio0) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(ratio0);
  }
  return {q && linear, fmt("xi_a=%.4f (-1.6449) mu_a=%.4f (2.0627); VaR=-xi*psi, ES=mu*psi %s", lvl.xi_a, lvl.mu_a,
                           linear ? "exact" : "VIOLATED")};
}

// 8 ------------------------------------------------------------------------

Outcome determinism() {
  ExperimentConfig cfg;
  cfg.theta0 = ParamVector::garch11(0.1, 0.1, 0.8);
  cfg.T = 500;
  cfg.reps = 64;
  cfg.seed = 800;
  cfg.schemes = {Scheme::TwoProcess, Scheme::SampleSplit, Scheme::NaivePlugin};
  cfg.decay_grid = {1, 100, 250};
  cfg.jobs = 1;
  const auto a = run_coverage(cfg);
  cfg.jobs = 8;
  const auto b = run_coverage(cfg);
  const std::string ja = to_json(a, cfg).dump(), jb = to_json(b, cfg).dump();
  const bool same = a == b && ja == jb;
  return {same, fmt("jobs=1 vs jobs=8 reports %s (2IP coverage %.4f)", same ? "bit-identical" : "DIFFER",
                    a.at(Scheme::TwoProcess).coverage)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "derivative fidelity", 10, derivative_fidelity},
      {2, "hand-computed oracles", 1, hand_oracles},
      {3, "truncation decay", 5, truncation_decay_check},
      {4, "asymptotic normality", 600, asymptotic_normality},
      {5, "covariance consistency", 900, covariance_consistency},
      {6, "coverage", 1800, coverage},
      {7, "risk mapping", 30, risk_mapping},
      {8, "determinism", 1e300, determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %d %s: %s; %.1fs%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s < 1e300 ? fmt(" (budget %.0fs)", c.budget_s).c_str() : "");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
