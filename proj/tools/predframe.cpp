// predframe command-line frontend.
//
// Exit status: 0 success, 1 domain or data error, 2 usage error.

#include "predframe/estimate.hpp"
#include "predframe/interval.hpp"
#include "predframe/io.hpp"
#include "predframe/model.hpp"
#include "predframe/predict.hpp"
#include "predframe/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pf = predframe;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared option groups ----------------------------------------------------

struct ModelOpts {
  std::string model = "ar1";
  std::vector<double> theta;
  std::optional<double> omega, alpha, alpha_plus, alpha_minus, beta;

  void add(CLI::App* app) {
    app->add_option("--model", model, "ar1 | arma11 | garch11 | tgarch11")
        ->check(CLI::IsMember({"ar1", "arma11", "garch11", "tgarch11"}));
    app->add_option("--theta", theta, "all parameters in storage order")->delimiter(',');
    app->add_option("--omega", omega);
    app->add_option("--alpha", alpha);
    app->add_option("--alpha-plus", alpha_plus);
    app->add_option("--alpha-minus", alpha_minus);
    app->add_option("--beta", beta);
  }

  pf::ModelKind kind() const { return pf::parse_model_kind(model); }

  bool given() const { return !theta.empty() || omega || alpha || alpha_plus || alpha_minus || beta; }

  /// Named values override the model's default point.
  pf::ParamVector params() const {
    const auto k = kind();
    Eigen::VectorXd v;
    if (!theta.empty()) {
      if (theta.size() != pf::param_count(k)) {
        throw UsageError("--theta needs " + std::to_string(pf::param_count(k)) + " values for " + model);
      }
      v = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    } else {
      switch (k) {
        case pf::ModelKind::AR1:
          v = Eigen::VectorXd::Constant(1, beta.value_or(0.5));
          break;
        case pf::ModelKind::ARMA11:
          v = Eigen::Vector3d(omega.value_or(1.0), alpha.value_or(0.4), beta.value_or(0.5));
          break;
        case pf::ModelKind::GARCH11:
          v = Eigen::Vector3d(omega.value_or(0.1), alpha.value_or(0.1), beta.value_or(0.8));
          break;
        case pf::ModelKind::TGARCH11:
          v = Eigen::Vector4d(omega.value_or(0.1), alpha_plus.value_or(0.05),
                              alpha_minus.value_or(0.1), beta.value_or(0.8));
          break;
      }
    }
    pf::ParamVector p(k, v);
    const auto verdict = pf::validate_params(p);
    if (!verdict) {
      std::string msg = "invalid parameters for " + model + ":";
      for (const auto& s : verdict.violations) msg += " [" + s + "]";
      throw UsageError(msg);
    }
    return p;
  }
};

struct InnovOpts {
  std::string law = "normal";
  double nu = 8.0;
  double sigma_eps = 1.0;
  std::string pool_path;

  void add(CLI::App* app) {
    app->add_option("--innov", law, "normal | t | empirical")
        ->check(CLI::IsMember({"normal", "t", "empirical"}));
    app->add_option("--nu", nu, "Student-t degrees of freedom (> 4)");
    app->add_option("--sigma-eps", sigma_eps, "innovation scale for ar1/arma11");
    app->add_option("--innov-file", pool_path, "CSV (t,x) of draws for --innov empirical");
  }

  pf::InnovationSpec spec() const {
    pf::InnovationSpec s;
    s.sigma_eps = sigma_eps;
    if (law == "t") {
      if (!(nu > 4)) throw UsageError("--nu must exceed 4");
      s.law = pf::StdStudentT{nu};
    } else if (law == "empirical") {
      if (pool_path.empty()) throw UsageError("--innov empirical needs --innov-file");
      s.law = pf::Empirical{pf::load_series(pool_path).values()};
    }
    if (!(sigma_eps > 0)) throw UsageError("--sigma-eps must be positive");
    return s;
  }
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PREDFRAME_SEED")) {
    std::uint64_t v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("PREDFRAME_SEED is not an unsigned integer");
    return v;
  }
  return 1;
}

/// Writes to `path`, or standard output when empty.
template <class F>
void emit(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write(out);
}

void emit_json(const std::string& path, const json& j) {
  emit(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

json eval_json(const pf::PredEval& e) {
  return {{"psi", e.value},
          {"gradient", pf::to_json_vector(e.gradient)},
          {"hessian", pf::to_json_matrix(e.hessian)},
          {"tail_mass", e.tail_mass}};
}

// --config ---------------------------------------------------------------

/// Appends "--key value" for every config entry whose flag is absent from the
/// command line, so explicit flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config must be a JSON object");

  auto present = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  auto scalar = [](const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) return pf::format_double(v.get<double>());
    throw UsageError("unsupported config value " + v.dump());
  };
  for (const auto& [key, v] : cfg.items()) {
    const std::string flag = "--" + key;
    if (present(flag)) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) args.push_back(flag);
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) joined += (joined.empty() ? "" : ",") + scalar(e);
      args.push_back(flag);
      args.push_back(joined);
    } else {
      args.push_back(flag);
      args.push_back(scalar(v));
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction-function estimation and conditional confidence intervals"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "predframe 1.0");

  // simulate
  ModelOpts sim_m;
  InnovOpts sim_i;
  std::size_t sim_T = 1000, sim_burn = pf::kDefaultBurnIn;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "simulate a series and write it as CSV");
  sim_m.add(sim);
  sim_i.add(sim);
  sim->add_option("--T", sim_T, "number of observations")->check(CLI::PositiveNumber);
  sim->add_option("--burn-in", sim_burn);
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out", sim_out, "output CSV (default stdout)");

  // estimate
  std::string est_model = "ar1", est_in, est_col = "x", est_out;
  int est_restarts = 3;
  auto* est = app.add_subcommand("estimate", "estimate parameters and their covariance");
  est->add_option("--model", est_model)->check(CLI::IsMember({"ar1", "arma11", "garch11", "tgarch11"}));
  est->add_option("--in", est_in, "input CSV")->required();
  est->add_option("--column", est_col);
  est->add_option("--restarts", est_restarts)->check(CLI::PositiveNumber);
  est->add_option("--out", est_out, "output JSON (default stdout)");

  // predict
  ModelOpts pr_m;
  std::string pr_in, pr_col = "x", pr_out;
  std::size_t pr_t1 = 1;
  auto* pr = app.add_subcommand("predict", "evaluate the one-step prediction function");
  pr_m.add(pr);
  pr->add_option("--in", pr_in)->required();
  pr->add_option("--column", pr_col);
  pr->add_option("--t1", pr_t1, "first observation kept in the window")->check(CLI::PositiveNumber);
  pr->add_option("--out", pr_out);

  // ci
  std::string ci_model = "ar1", ci_scheme = "spl", ci_in, ci_pred_in, ci_col = "x", ci_out;
  double ci_a = 0.5, ci_b = 0.8, ci_level = 0.9;
  std::size_t ci_t1 = 1;
  auto* ci = app.add_subcommand("ci", "confidence interval for the next-step prediction function");
  ci->add_option("--model", ci_model)->check(CLI::IsMember({"ar1", "arma11", "garch11", "tgarch11"}));
  ci->add_option("--scheme", ci_scheme, "spl | 2ip | naive")->check(CLI::IsMember({"spl", "2ip", "naive"}));
  ci->add_option("--a", ci_a, "prediction exponent");
  ci->add_option("--b", ci_b, "estimation exponent");
  ci->add_option("--level", ci_level);
  ci->add_option("--in", ci_in, "series used for estimation (and prediction unless 2ip)")->required();
  ci->add_option("--pred-in", ci_pred_in, "independent prediction series for 2ip");
  ci->add_option("--column", ci_col);
  ci->add_option("--t1", ci_t1, "truncation start for 2ip and naive")->check(CLI::PositiveNumber);
  ci->add_option("--out", ci_out);

  // coverage
  ModelOpts cov_m;
  InnovOpts cov_i;
  std::size_t cov_T = 1000, cov_reps = 1000, cov_t1 = 1;
  std::optional<std::uint64_t> cov_seed;
  std::vector<std::string> cov_schemes{"2ip", "spl"};
  double cov_a = 0.5, cov_b = 0.8, cov_level = 0.9;
  bool cov_excl = false;
  unsigned cov_jobs = pf::default_jobs();
  std::vector<std::size_t> cov_grid;
  std::string cov_out, cov_table;
  auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage of the interval schemes");
  cov_m.add(cov);
  cov_i.add(cov);
  cov->add_option("--T", cov_T)->check(CLI::Range(std::size_t{8}, std::size_t{100000000}));
  cov->add_option("--reps", cov_reps)->check(CLI::PositiveNumber);
  cov->add_option("--seed", cov_seed);
  cov->add_option("--schemes", cov_schemes)->delimiter(',')->check(CLI::IsMember({"spl", "2ip", "naive"}));
  cov->add_option("--a", cov_a);
  cov->add_option("--b", cov_b);
  cov->add_option("--level", cov_level);
  cov->add_option("--t1", cov_t1)->check(CLI::PositiveNumber);
  cov->add_flag("--exclude-clamped", cov_excl, "count boundary estimates as failures");
  cov->add_option("--jobs", cov_jobs, "worker threads")->check(CLI::PositiveNumber);
  cov->add_option("--decay-grid", cov_grid, "t1 values for the truncation diagnostic")->delimiter(',');
  cov->add_option("--out", cov_out, "report JSON (default stdout)");
  cov->add_option("--table", cov_table, "also write the per-scheme table as CSV");

  // check
  ModelOpts chk_m;
  InnovOpts chk_i;
  std::size_t chk_T = 200;
  std::optional<std::uint64_t> chk_seed;
  double chk_h = 1e-5;
  std::vector<std::size_t> chk_grid;
  std::string chk_in, chk_out, chk_table;
  auto* chk = app.add_subcommand("check", "derivative and truncation diagnostics");
  chk_m.add(chk);
  chk_i.add(chk);
  chk->add_option("--T", chk_T)->check(CLI::PositiveNumber);
  chk->add_option("--seed", chk_seed);
  chk->add_option("--step", chk_h, "finite-difference step")->check(CLI::PositiveNumber);
  chk->add_option("--t1-grid", chk_grid)->delimiter(',');
  chk->add_option("--in", chk_in, "use this window instead of a simulated one");
  chk->add_option("--out", chk_out);
  chk->add_option("--table", chk_table, "decay table CSV");

  // risk
  ModelOpts rk_m;
  std::string rk_in, rk_col = "x", rk_out;
  double rk_a = 0.05;
  std::size_t rk_t1 = 1;
  auto* rk = app.add_subcommand("risk", "conditional VaR and ES for tgarch11");
  rk_m.add(rk);
  rk->add_option("--in", rk_in)->required();
  rk->add_option("--column", rk_col);
  rk->add_option("--level-a", rk_a, "tail probability")->check(CLI::Range(1e-9, 1 - 1e-9));
  rk->add_option("--t1", rk_t1)->check(CLI::PositiveNumber);
  rk->add_option("--out", rk_out);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*sim) {
      const auto theta = sim_m.params();
      const auto x = pf::simulate(theta, sim_i.spec(), sim_T, resolve_seed(sim_seed),
                                  pf::SimulationOptions{sim_burn, 0.0});
      emit(sim_out, [&](std::ostream& os) { pf::write_series(os, x); });
    } else if (*est) {
      const auto x = pf::load_series(est_in, est_col);
      pf::OptimizerConfig oc;
      oc.restarts = est_restarts;
      const auto r = pf::estimate(pf::parse_model_kind(est_model), x, oc);
      emit_json(est_out, pf::to_json(r, x.size()));
    } else if (*pr) {
      const auto theta = pr_m.params();
      const auto x = pf::load_series(pr_in, pr_col);
      if (pr_t1 > x.size()) throw UsageError("--t1 exceeds the series length");
      json j = eval_json(pf::evaluate_prediction(theta, x, pf::TruncationSpec{pr_t1}));
      j["schema_version"] = pf::kSchemaVersion;
      j["model"] = pr_m.model;
      j["T"] = x.size();
      j["t1"] = pr_t1;
      emit_json(pr_out, j);
    } else if (*ci) {
      const auto kind = pf::parse_model_kind(ci_model);
      const auto scheme = pf::parse_scheme(ci_scheme);
      if (!(ci_level > 0 && ci_level < 1)) throw UsageError("--level must lie in (0,1)");
      if (scheme == pf::Scheme::TwoProcess && ci_pred_in.empty()) throw UsageError("--scheme 2ip needs --pred-in");
      const auto x = pf::load_series(ci_in, ci_col);
      pf::ConfidenceInterval out;
      json extra;
      switch (scheme) {
        case pf::Scheme::SampleSplit: {
          pf::SplitPlan plan;
          try {
            plan = pf::make_split_plan(x.size(), ci_a, ci_b);
          } catch (const pf::InfeasibleSplit&) {
            throw;
          } catch (const pf::StructuralError& e) {
            throw UsageError(e.what());
          }
          out = pf::ci_sample_split(kind, x, plan, ci_level);
          extra["gap_ratio"] = plan.gap_ratio();
          break;
        }
        case pf::Scheme::TwoProcess: {
          const auto y = pf::load_series(ci_pred_in, ci_col);
          if (ci_t1 > y.size()) throw UsageError("--t1 exceeds the prediction series length");
          out = pf::ci_two_process(kind, x, y, pf::TruncationSpec{ci_t1}, ci_level);
          break;
        }
        case pf::Scheme::NaivePlugin:
          if (ci_t1 > x.size()) throw UsageError("--t1 exceeds the series length");
          out = pf::ci_naive_plugin(kind, x, pf::TruncationSpec{ci_t1}, ci_level);
          break;
      }
      json j = pf::to_json(out, kind);
      for (const auto& [k, v] : extra.items()) j[k] = v;
      emit_json(ci_out, j);
    } else if (*cov) {
      pf::ExperimentConfig cfg;
      cfg.theta0 = cov_m.params();
      cfg.innov = cov_i.spec();
      cfg.T = cov_T;
      cfg.reps = cov_reps;
      cfg.seed = resolve_seed(cov_seed);
      cfg.schemes.clear();
      for (const auto& s : cov_schemes) cfg.schemes.push_back(pf::parse_scheme(s));
      cfg.a_exp = cov_a;
      cfg.b_exp = cov_b;
      if (!(cov_level > 0 && cov_level < 1)) throw UsageError("--level must lie in (0,1)");
      cfg.level = cov_level;
      if (cov_t1 > cov_T) throw UsageError("--t1 exceeds --T");
      cfg.trunc.t1 = cov_t1;
      cfg.exclude_clamped = cov_excl;
      cfg.jobs = cov_jobs;
      cfg.decay_grid = cov_grid;
      const auto rep = pf::run_coverage(cfg);
      emit_json(cov_out, pf::to_json(rep, cfg));
      if (!cov_table.empty()) emit(cov_table, [&](std::ostream& os) { pf::write_coverage_table(os, rep); });
    } else if (*chk) {
      const auto theta = chk_m.params();
      const auto seed = resolve_seed(chk_seed);
      const auto x = chk_in.empty() ? pf::simulate(theta, chk_i.spec(), chk_T, seed) : pf::load_series(chk_in);
      for (auto t1 : chk_grid) {
        if (t1 < 1 || t1 > x.size()) throw UsageError("--t1-grid value outside the window");
      }
      const auto g = pf::gradient_check(theta, x, {}, chk_h);
      const auto table = pf::truncation_decay(theta, x, chk_grid);
      json j;
      j["schema_version"] = pf::kSchemaVersion;
      j["model"] = chk_m.model;
      j["T"] = x.size();
      j["gradient_error"] = g.gradient_error;
      j["hessian_error"] = g.hessian_error;
      j["gradient_check_max_err"] = g.max_error();
      json d = json::array();
      for (const auto& r : table) d.push_back({{"t1", r.t1}, {"gap", r.gap}});
      j["decay_table"] = d;
      if (pf::is_garch_family(theta.kind())) {
        const auto m = pf::stationarity_margin(theta, chk_i.spec(), 100000, seed);
        j["stationarity_margin"] = m.log_of_zero ? json(nullptr) : json(m.value);
        j["stationarity_margin_se"] = m.std_error;
      }
      emit_json(chk_out, j);
      if (!chk_table.empty()) emit(chk_table, [&](std::ostream& os) { pf::write_decay_table(os, table); });
    } else if (*rk) {
      if (rk_m.kind() != pf::ModelKind::TGARCH11) {
        throw pf::DomainError("risk mapping is only defined for tgarch11");
      }
      const auto x = pf::load_series(rk_in, rk_col);
      if (rk_t1 > x.size()) throw UsageError("--t1 exceeds the series length");
      json j;
      j["schema_version"] = pf::kSchemaVersion;
      j["model"] = rk_m.model;
      std::optional<pf::ParamVector> theta;
      if (rk_m.given()) {
        theta = rk_m.params();
      } else {
        theta = pf::estimate(pf::ModelKind::TGARCH11, x).theta_hat;
        j["estimated"] = true;
      }
      const auto h = pf::detail::conditional_variances(*theta, x.values());
      std::vector<double> resid(x.size());
      for (std::size_t t = 0; t < x.size(); ++t) resid[t] = x.values()[t] / std::sqrt(h[t]);
      const auto lvl = pf::empirical_risk_level(resid, rk_a);
      const pf::TruncationSpec tr{rk_t1};
      j["theta"] = pf::to_json_vector(theta->values());
      j["a"] = rk_a;
      j["xi_a"] = lvl.xi_a;
      j["mu_a"] = lvl.mu_a;
      j["psi"] = pf::evaluate_prediction(*theta, x, tr).value;
      j["var"] = pf::conditional_var(*theta, x, tr, lvl.xi_a);
      j["es"] = pf::conditional_es(*theta, x, tr, lvl.mu_a);
      emit_json(rk_out, j);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
