#include "hmsh/hmsh.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#ifndef HMSH_VERSION
#define HMSH_VERSION "unknown"
#endif

using namespace hmsh;
namespace fs = std::filesystem;

namespace {

struct Outputs {
  fs::path dir;
  std::vector<std::string> files;

  std::ofstream open(const std::string& name) {
    std::ofstream os(dir / name);
    if (!os) throw Error("cannot write '" + (dir / name).string() + "'");
    os << std::setprecision(17);
    files.push_back(name);
    return os;
  }
  std::string path(const std::string& name) {
    files.push_back(name);
    return (dir / name).string();
  }
};

std::optional<double> optional_double(const Config& c, const std::string& key) {
  const std::string v = c.get(key, "");
  if (v.empty()) return std::nullopt;
  double x;
  if (!parse_double(v, x)) throw ConfigError(key, "expected a number or nothing, got '" + v + "'");
  return x;
}

ShrinkageHyper read_hyper(const Config& c, const std::string& prefix, ShrinkageHyper h) {
  h.nu_gamma = c.get_double(prefix + ".nu_gamma", h.nu_gamma);
  h.a_local = c.get_double(prefix + ".a_local", h.a_local);
  h.s_global = c.get_double(prefix + ".s_global", h.s_global);
  h.nu_global = c.get_double(prefix + ".nu_global", h.nu_global);
  return h;
}

TimeSeriesData read_data(const Config& c) {
  const std::string path = c.get_path("data.path", "");
  if (path.empty()) throw ConfigError("data.path", "required setting is missing");
  const CsvTable t = read_csv(path);
  const int lags = c.get_int("data.lags", 1);
  if (lags < 0) throw ConfigError("data.lags", "must be nonnegative");
  const bool constant = c.get_bool("data.constant", true);
  const auto rows = t.values.rows();
  return build_regressors(t.values, lags, constant ? constant_term(rows) : Matrix(rows, 0));
}

std::vector<bool> read_nonstationary(const Config& c, int n) {
  const std::string v = c.get("data.nonstationary", "all");
  if (v == "all") return std::vector<bool>(static_cast<std::size_t>(n), true);
  if (v == "none") return std::vector<bool>(static_cast<std::size_t>(n), false);
  const auto flags = c.get_int_list("data.nonstationary", "");
  if (static_cast<int>(flags.size()) != n) throw ConfigError("data.nonstationary", "need all, none or one 0/1 flag per variable");
  std::vector<bool> out;
  for (int f : flags) out.push_back(f != 0);
  return out;
}

PriorSpec read_prior(const Config& c, const TimeSeriesData& d) {
  const int n = static_cast<int>(d.N());
  PriorSpec p = PriorSpec::defaults(n, d.lag_order, d.deterministic_count, read_nonstationary(c, n));
  p.b_shape = c.get_double("prior.b_shape", p.b_shape);
  p.set_variance_concentration(c.get_double("prior.variance_concentration", 1.0));
  p.transition_concentration = c.get_double("prior.transition_concentration", p.transition_concentration);
  p.initial_concentration = c.get_double("prior.initial_concentration", p.initial_concentration);
  p.transition_stickiness = c.get_double("prior.transition_stickiness", p.transition_stickiness);
  p.fixed_gamma_a = optional_double(c, "prior.fixed_gamma_a");
  p.fixed_gamma_b = optional_double(c, "prior.fixed_gamma_b");
  p.a_hyper = read_hyper(c, "prior.a_hyper", p.a_hyper);
  p.b_hyper = read_hyper(c, "prior.b_hyper", p.b_hyper);
  p.validate(d.N(), d.K());
  return p;
}

VolatilitySpec read_volatility(const Config& c, const std::string& name) {
  VolatilitySpec v = VolatilitySpec::parse(name);
  if (v.variant == VolatilityVariant::Exh) v = VolatilitySpec::exh(c.get_int_list("model.breakpoints", ""));
  v.validate();
  return v;
}

SamplerConfig read_sampler(const Config& c, SamplerConfig s = {}) {
  s.total_draws = c.get_int("sampler.draws", s.total_draws);
  s.burn_in = c.get_int("sampler.burn_in", s.burn_in);
  s.thinning = c.get_int("sampler.thinning", s.thinning);
  s.seed = c.get_u64("sampler.seed", s.seed);
  s.occupancy_retry_cap = c.get_int("sampler.occupancy_retry_cap", s.occupancy_retry_cap);
  s.validate();
  return s;
}

struct Estimated {
  TimeSeriesData data;
  PriorSpec prior;
  PosteriorSample posterior;
};

// Loads input.posterior when given, otherwise estimates the configured model
// and stores posterior.bin.
Estimated estimate_or_load(const Config& c, Outputs& out) {
  Estimated e;
  e.data = read_data(c);
  e.prior = read_prior(c, e.data);
  const std::string input = c.get_path("input.posterior", "");
  if (!input.empty()) {
    e.posterior = read_posterior(input);
    if (e.posterior.draws.front().b0.rows() != e.data.N()) throw DataError("posterior does not match the data dimension");
    return e;
  }
  const VolatilitySpec v = read_volatility(c, c.get("model.volatility", "HMSH(20)"));
  const SamplerConfig s = read_sampler(c);
  const bool normalize = c.get_bool("estimate.normalize", true);
  PosteriorSample raw = run_sampler(e.data, v, e.prior, s);
  e.posterior = normalize ? normalize_draws(raw) : std::move(raw);
  write_posterior(out.path("posterior.bin"), e.posterior);
  return e;
}

void write_summary(Outputs& out, const PosteriorSample& post, double mass) {
  auto os = out.open("summary.csv");
  os << "parameter,mean,sd,hpd_lower,hpd_upper\n";
  auto row = [&](const std::string& name, const std::function<double(const ParameterState&)>& f) {
    std::vector<double> v;
    v.reserve(post.size());
    double sum = 0.0;
    for (const auto& d : post.draws) {
      v.push_back(f(d));
      sum += v.back();
    }
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const Interval iv = hpd_interval(v, mass);
    os << name << "," << mean << "," << std::sqrt(ss / std::max<double>(1.0, static_cast<double>(v.size()) - 1.0)) << ","
       << iv.lower << "," << iv.upper << "\n";
  };
  const auto& f = post.draws.front();
  const auto n = f.b0.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      row("B0[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]", [=](const ParameterState& d) { return d.b0(i, j); });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < f.a.cols(); ++k)
      row("A[" + std::to_string(i + 1) + "," + std::to_string(k + 1) + "]", [=](const ParameterState& d) { return d.a(i, k); });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index m = 0; m < f.variances[static_cast<std::size_t>(i)].size(); ++m)
      row("sigma2[" + std::to_string(i + 1) + "," + std::to_string(m + 1) + "]",
          [=](const ParameterState& d) { return d.variances[static_cast<std::size_t>(i)](m); });
  if (post.volatility.variant != VolatilityVariant::Exh)
    for (Eigen::Index i = 0; i < n; ++i)
      row("unconditional_variance[" + std::to_string(i + 1) + "]",
          [=](const ParameterState& d) { return unconditional_variance(d, static_cast<int>(i)); });
}

void cmd_estimate(const Config& c, Outputs& out) {
  const Estimated e = estimate_or_load(c, out);
  write_summary(out, e.posterior, c.get_double("estimate.mass", 0.9));
  auto os = out.open("diagnostics.csv");
  os << "model,draws,burn_in,thinning,sweeps,occupancy_redraws,occupancy_fallbacks\n";
  const auto& p = e.posterior;
  os << p.volatility.name() << "," << p.size() << "," << p.burn_in << "," << p.thinning << "," << p.diagnostics.sweeps << ","
     << p.diagnostics.occupancy_redraws << "," << p.diagnostics.occupancy_fallbacks << "\n";
}

void cmd_verify(const Config& c, Outputs& out) {
  const Estimated e = estimate_or_load(c, out);
  auto os = out.open("sddr.csv");
  os << "shock,log_numerator,log_denominator,log_sddr,sddr,log_numerator_se,draws,l_value_decision\n";
  const int n = e.posterior.draws.front().shocks();
  for (int i = 0; i < n; ++i) {
    const SddrResult r = compute_sddr(e.posterior, e.prior, i);
    os << i + 1 << "," << r.log_numerator << "," << r.log_denominator << "," << r.log_sddr << "," << std::exp(r.log_sddr) << ","
       << r.log_numerator_se << "," << r.num_draws_used << "," << (decide_l_value(r) ? "heteroskedastic" : "homoskedastic")
       << "\n";
  }
}

void cmd_irf(const Config& c, Outputs& out) {
  const Estimated e = estimate_or_load(c, out);
  const int horizon = c.get_int("irf.horizon", 20);
  const double mass = c.get_double("irf.mass", 0.9);
  if (horizon < 0) throw ConfigError("irf.horizon", "must be nonnegative");
  if (!(mass > 0.0 && mass < 1.0)) throw ConfigError("irf.mass", "must lie in (0, 1)");
  const auto& post = e.posterior;
  const auto n = post.draws.front().b0.rows();
  {
    const IrfSummary s = summarize_irfs(post, horizon, mass);
    auto os = out.open("irf.csv");
    os << "horizon,variable,shock,mean,hpd_lower,hpd_upper\n";
    for (int h = 0; h <= horizon; ++h)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          os << h << "," << i + 1 << "," << j + 1 << "," << s.mean[h](i, j) << "," << s.lower[h](i, j) << "," << s.upper[h](i, j)
             << "\n";
  }
  {
    Matrix mean = Matrix::Zero(n, n);
    for (const auto& d : post.draws) mean += fevd_impact(d);
    mean /= static_cast<double>(post.size());
    auto os = out.open("fevd.csv");
    os << "variable,shock,impact_share\n";
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) os << i + 1 << "," << j + 1 << "," << mean(i, j) << "\n";
  }
  {
    auto os = out.open("sd_paths.csv");
    os << "t,shock,mean,hpd_lower,hpd_upper\n";
    for (Eigen::Index j = 0; j < n; ++j) {
      const Matrix p = conditional_sd_path(post, static_cast<int>(j), mass);
      for (Eigen::Index t = 0; t < p.rows(); ++t)
        os << t + 1 << "," << j + 1 << "," << p(t, 0) << "," << p(t, 1) << "," << p(t, 2) << "\n";
    }
  }
  const int variable = c.get_int("irf.variable", 0);
  if (variable != 0) {
    if (variable < 1 || variable > n) throw ConfigError("irf.variable", "must be between 1 and the number of variables");
    const auto picks = select_shock(post, variable - 1);
    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    for (int p : picks) ++counts[static_cast<std::size_t>(p)];
    auto os = out.open("shock_selection.csv");
    os << "variable,shock,share_of_draws\n";
    for (Eigen::Index j = 0; j < n; ++j)
      os << variable << "," << j + 1 << "," << counts[static_cast<std::size_t>(j)] / static_cast<double>(picks.size()) << "\n";
  }
}

ExperimentSettings read_experiment(const Config& c, bool rejection) {
  ExperimentSettings s = ExperimentSettings::preset(c.get("simulate.preset", "desk"), rejection);
  auto join = [](const auto& items) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) os << (i ? ", " : "") << items[i];
    return os.str();
  };
  s.dgps = c.get_list("simulate.dgps", join(s.dgps));
  s.models = c.get_list("simulate.models", join(s.models));
  if (rejection) s.scenarios = c.get_list("simulate.scenarios", join(s.scenarios));
  s.sample_sizes = c.get_int_list("simulate.T", join(s.sample_sizes));
  s.replications = c.get_int("simulate.replications", s.replications);
  s.exh_every = c.get_int("simulate.exh_every", s.exh_every);
  s.seed = c.get_u64("simulate.seed", s.seed);
  s.sampler = read_sampler(c, s.sampler);
  s.validate();
  return s;
}

void cmd_simulate_rmse(const Config& c, Outputs& out, int threads) {
  ExperimentSettings s = read_experiment(c, false);
  s.threads = threads;
  const McReport r = run_rmse_experiment(s);
  {
    auto os = out.open("rmse_b0.csv");
    write_rmse_table(os, r, s, false);
  }
  {
    auto os = out.open("rmse_sigma.csv");
    write_rmse_table(os, r, s, true);
  }
  {
    auto os = out.open("rmse_cells.csv");
    write_rmse_cells(os, r);
  }
  auto os = out.open("failures.csv");
  write_failures(os, r);
}

void cmd_simulate_reject(const Config& c, Outputs& out, int threads) {
  ExperimentSettings s = read_experiment(c, true);
  s.threads = threads;
  const McReport r = run_rejection_experiment(s);
  {
    auto os = out.open("rejection.csv");
    write_rejection_table(os, r, s);
  }
  {
    auto os = out.open("rejection_sddr.csv");
    write_rejection_cells(os, r);
  }
  auto os = out.open("failures.csv");
  write_failures(os, r);
}

void cmd_forecast(const Config& c, Outputs& out, int threads) {
  const TimeSeriesData data = read_data(c);
  const PriorSpec prior = read_prior(c, data);
  const SamplerConfig base = read_sampler(c);
  std::vector<ForecastModel> models;
  for (const auto& name : c.get_list("forecast.models", "EXH, MSH(20), HMSH(20)")) {
    SamplerConfig s = base;
    s.seed = derive_seed(base.seed, fnv1a(name));
    models.push_back({name, read_volatility(c, name), prior, s});
  }
  ForecastOptions opt;
  opt.benchmark = c.get("forecast.benchmark", models.front().name);
  opt.warm_draws = c.get_int("forecast.warm_draws", opt.warm_draws);
  opt.warm_burn_in = c.get_int("forecast.warm_burn_in", opt.warm_burn_in);
  opt.standardize = c.get_bool("forecast.standardize", opt.standardize);
  opt.threads = threads;
  const int first = c.get_int("forecast.first_origin", static_cast<int>(data.T() * 3 / 4));
  const int step = c.get_int("forecast.step", 1);
  const ForecastReport r = evaluate(models, data, first, step, opt);
  {
    auto os = out.open("forecast.csv");
    write_forecast_table(os, r);
  }
  {
    auto os = out.open("forecast_levels.csv");
    write_forecast_levels(os, r);
  }
  auto os = out.open("forecast_trace.csv");
  write_forecast_trace(os, r);
}

int run(const std::string& command, Config& cfg, int threads) {
  const auto start = std::chrono::steady_clock::now();
  Outputs out;
  out.dir = cfg.get_path("output", "hmsh-out");
  fs::create_directories(out.dir);
  if (command == "estimate") cmd_estimate(cfg, out);
  else if (command == "verify") cmd_verify(cfg, out);
  else if (command == "irf") cmd_irf(cfg, out);
  else if (command == "simulate-rmse") cmd_simulate_rmse(cfg, out, threads);
  else if (command == "simulate-reject") cmd_simulate_reject(cfg, out, threads);
  else if (command == "forecast") cmd_forecast(cfg, out, threads);
  for (const auto& k : cfg.unused_keys()) std::cerr << "warning: setting '" << k << "' is not used by " << command << "\n";
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(out.dir.string(), command, cfg, HMSH_VERSION, wall, out.files);
  std::cout << "wrote";
  for (const auto& f : out.files) std::cout << " " << (out.dir / f).string();
  std::cout << " " << (out.dir / "manifest.cfg").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian SVARs with sparse heterogeneous Markov-switching heteroskedasticity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(HMSH_VERSION));

  struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out, data, model, preset;
    std::optional<std::uint64_t> seed;
    std::optional<int> draws;
    int threads = default_thread_count();
  };
  Common opts;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"estimate", "Run the Gibbs sampler; writes posterior.bin, summary.csv, diagnostics.csv"},
      {"verify", "Savage-Dickey homoskedasticity check per shock; writes sddr.csv"},
      {"irf", "Impulse responses, impact FEVD and conditional SD paths"},
      {"simulate-rmse", "Monte Carlo RMSE ratios of B0 and conditional SDs"},
      {"simulate-reject", "Monte Carlo rejection rates for homoskedasticity of shock 1"},
      {"forecast", "Recursive one-step forecast evaluation (LPS, RMSFE, MAFE)"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", opts.config, "Config file of key = value lines");
    sub->add_option("-s,--set", opts.sets, "Override a setting: key=value (repeatable)");
    sub->add_option("-o,--out", opts.out, "Output directory (setting: output)");
    sub->add_option("--data", opts.data, "Data CSV (setting: data.path)");
    sub->add_option("--model", opts.model, "Volatility model, e.g. HMSH(20) (setting: model.volatility)");
    sub->add_option("--seed", opts.seed, "Sampler seed (setting: sampler.seed; simulate.seed for simulate-*)");
    sub->add_option("--draws", opts.draws, "Total Gibbs sweeps (setting: sampler.draws)");
    sub->add_option("--preset", opts.preset, "simulate-*: desk or paper (setting: simulate.preset)");
    sub->add_option("--threads", opts.threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  std::string command;
  for (auto* s : subs)
    if (s->parsed()) command = s->get_name();

  try {
    Config cfg = opts.config.empty() ? Config{} : Config::load(opts.config);
    auto absolute = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
    const bool simulate = command.rfind("simulate", 0) == 0;
    if (!opts.out.empty()) cfg.set("output", absolute(opts.out));
    if (!opts.data.empty()) cfg.set("data.path", absolute(opts.data));
    if (!opts.model.empty()) cfg.set("model.volatility", opts.model);
    if (!opts.preset.empty()) cfg.set("simulate.preset", opts.preset);
    if (opts.seed) cfg.set(simulate ? "simulate.seed" : "sampler.seed", std::to_string(*opts.seed));
    if (opts.draws) cfg.set("sampler.draws", std::to_string(*opts.draws));
    for (const auto& s : opts.sets) cfg.set_assignment(s);
    return run(command, cfg, opts.threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
