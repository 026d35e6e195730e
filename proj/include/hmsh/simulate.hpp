#pragma once

#include "hmsh/gibbs.hpp"
#include "hmsh/inference.hpp"
#include "hmsh/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hmsh {

// ---------------------------------------------------------------------------
// Data-generating processes for the bivariate system B0 y_t = u_t

enum class DgpKind { SV, GARCH, MSH2, HMSH2, Homoskedastic };

inline std::string dgp_name(DgpKind k) {
  switch (k) {
    case DgpKind::SV: return "SV";
    case DgpKind::GARCH: return "GARCH";
    case DgpKind::MSH2: return "MSH";
    case DgpKind::HMSH2: return "HMSH";
    case DgpKind::Homoskedastic: return "HOMO";
  }
  return "?";
}

inline DgpKind parse_dgp(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "SV") return DgpKind::SV;
  if (t == "GARCH") return DgpKind::GARCH;
  if (t == "MSH" || t == "MSH2" || t == "MSH(2)") return DgpKind::MSH2;
  if (t == "HMSH" || t == "HMSH2" || t == "HMSH(2)") return DgpKind::HMSH2;
  if (t == "HOMO" || t == "HOMOSKEDASTIC") return DgpKind::Homoskedastic;
  throw ConfigError("simulate.dgps", "unknown DGP '" + text + "'");
}

inline Matrix monte_carlo_b0() { return (Matrix(2, 2) << 100.0, 80.0, -20.0, 200.0).finished(); }

// Regime parameters shared by the MSH2 and HMSH2 laws.
inline TransitionMatrix dgp_transition() { return (Matrix(2, 2) << 0.98, 0.02, 0.02, 0.98).finished(); }
inline std::vector<Vector> dgp_regime_variances() {
  return {(Vector(2) << 1.99, 0.01).finished(), (Vector(2) << 0.85, 1.15).finished()};
}

// Scenario labels name the homoskedastic shocks: "1&2", "1", "2", "none".
inline std::vector<bool> heteroskedastic_flags(const std::string& label) {
  if (label == "1&2") return {false, false};
  if (label == "1") return {false, true};
  if (label == "2") return {true, false};
  if (label == "none") return {true, true};
  throw ConfigError("simulate.scenarios", "unknown scenario '" + label + "'");
}

struct DgpSpec {
  DgpKind kind = DgpKind::HMSH2;
  std::vector<bool> heteroskedastic{true, true};
  int T = 260;
  Matrix b0 = monte_carlo_b0();
  std::uint64_t seed = 1;

  static DgpSpec scenario(DgpKind kind, const std::string& label, int t_len, std::uint64_t seed) {
    DgpSpec s;
    s.kind = kind;
    s.heteroskedastic = heteroskedastic_flags(label);
    s.T = t_len;
    s.seed = seed;
    return s;
  }

  void validate() const {
    if (T < 1) throw ConfigError("simulate.T", "sample size must be positive");
    if (b0.rows() != b0.cols() || static_cast<std::size_t>(b0.rows()) != heteroskedastic.size())
      throw ConfigError("simulate.b0", "B0 must be square with one flag per shock");
    if (std::abs(b0.determinant()) < 1e-12) throw ConfigError("simulate.b0", "B0 must be nonsingular");
    if ((kind == DgpKind::MSH2 || kind == DgpKind::HMSH2) && b0.rows() != 2)
      throw ConfigError("simulate.b0", "regime-switching DGPs are bivariate");
  }
};

struct SimulatedData {
  Matrix y;       // T x N
  Matrix u;       // T x N structural shocks
  Matrix sigma2;  // T x N conditional variances
  Matrix b0;
  std::vector<StatePath> paths;  // per shock; empty unless regime switching
};

// Every random stream is derived from spec.seed: volatility of shock n uses
// stream n, shock innovations use stream 1000 + n, the regime chain of shock n
// uses stream 2000 + n. MSH2 drives all heteroskedastic shocks with the chain
// of the first of them, so with one heteroskedastic shock MSH2 and HMSH2
// produce identical data.
inline SimulatedData generate(const DgpSpec& spec) {
  spec.validate();
  const auto n = spec.b0.rows();
  const auto t_len = static_cast<Eigen::Index>(spec.T);
  SimulatedData out;
  out.b0 = spec.b0;
  out.sigma2 = Matrix::Ones(t_len, n);
  out.u.resize(t_len, n);

  const bool switching = spec.kind == DgpKind::MSH2 || spec.kind == DgpKind::HMSH2;
  if (switching) {
    const auto variances = dgp_regime_variances();
    const Vector ergodic = Vector::Constant(2, 0.5);
    out.paths.resize(static_cast<std::size_t>(n));
    int leader = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!spec.heteroskedastic[static_cast<std::size_t>(i)]) continue;
      if (leader < 0) leader = static_cast<int>(i);
      const auto src = spec.kind == DgpKind::MSH2 ? leader : static_cast<int>(i);
      Rng chain_rng(derive_seed(spec.seed, 2000 + static_cast<std::uint64_t>(src)));
      out.paths[static_cast<std::size_t>(i)] = simulate_chain(dgp_transition(), ergodic, static_cast<std::size_t>(t_len), chain_rng);
      const Vector& v = variances[static_cast<std::size_t>(i)];
      for (Eigen::Index t = 0; t < t_len; ++t) out.sigma2(t, i) = v(out.paths[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]);
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    Rng eps(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(i)));
    const bool het = spec.kind != DgpKind::Homoskedastic && spec.heteroskedastic[static_cast<std::size_t>(i)];
    if (het && spec.kind == DgpKind::SV) {
      Rng vol(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
      double h = 0.0;
      for (Eigen::Index t = 0; t < t_len; ++t) {
        h = 0.92 * h + vol.normal();
        out.sigma2(t, i) = std::exp(0.5 * h);
      }
    }
    if (het && spec.kind == DgpKind::GARCH) {
      // sigma2_0 = 1 and u_0 ~ N(0, sigma2_0) start the recursion
      Rng vol(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
      double prev_var = 1.0;
      double prev_u = vol.normal();
      for (Eigen::Index t = 0; t < t_len; ++t) {
        const double var = 0.02 + 0.28 * prev_u * prev_u + 0.7 * prev_var;
        out.sigma2(t, i) = var;
        out.u(t, i) = std::sqrt(var) * eps.normal();
        prev_var = var;
        prev_u = out.u(t, i);
      }
      continue;
    }
    for (Eigen::Index t = 0; t < t_len; ++t) out.u(t, i) = std::sqrt(out.sigma2(t, i)) * eps.normal();
  }
  out.y = (spec.b0.partialPivLu().solve(out.u.transpose())).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo experiments

// B0 elements a priori N(0, 1000); no autoregressive part.
inline PriorSpec mc_prior() {
  PriorSpec p = PriorSpec::defaults(2, 0, 0);
  p.fixed_gamma_b = 1000.0;
  return p;
}

inline VolatilitySpec model_for(const std::string& name, int t_len, int exh_every = 130) {
  VolatilitySpec v = VolatilitySpec::parse(name);
  if (v.variant == VolatilityVariant::Exh) v = VolatilitySpec::exh_every(exh_every, t_len);
  return v;
}

inline TimeSeriesData mc_data(const Matrix& y) { return {y, Matrix::Zero(y.rows(), 0), 0, 0}; }

struct ExperimentSettings {
  std::vector<std::string> dgps{"SV", "GARCH", "MSH", "HMSH"};
  std::vector<std::string> models{"EXH", "MSH(20)", "MSH(2)", "HMSH(20)", "HMSH(2)"};
  std::vector<std::string> scenarios{"1&2", "1", "2", "none"};
  std::vector<int> sample_sizes{260, 780};
  int replications = 100;
  int exh_every = 130;
  SamplerConfig sampler{11000, 1000, 5, 0, 100, true};
  std::uint64_t seed = 20240601;
  int threads = 1;

  static ExperimentSettings paper() { return {}; }

  // Reduced replications and chain length; T = 260 only.
  static ExperimentSettings desk(bool rejection) {
    ExperimentSettings s;
    s.sample_sizes = {260};
    s.replications = rejection ? 20 : 10;
    s.sampler = {6000, 2000, 2, 0, 100, true};
    return s;
  }

  static ExperimentSettings preset(const std::string& name, bool rejection) {
    if (name == "paper") return paper();
    if (name == "desk") return desk(rejection);
    throw ConfigError("simulate.preset", "unknown preset '" + name + "' (expected desk or paper)");
  }

  void validate() const {
    if (replications < 1) throw ConfigError("simulate.replications", "must be at least 1");
    if (dgps.empty()) throw ConfigError("simulate.dgps", "at least one DGP required");
    if (models.empty()) throw ConfigError("simulate.models", "at least one model required");
    if (sample_sizes.empty()) throw ConfigError("simulate.T", "at least one sample size required");
    for (const auto& d : dgps) parse_dgp(d);
    for (const auto& m : models) model_for(m, 260, exh_every).validate();
    for (const auto& s : scenarios) heteroskedastic_flags(s);
    for (int t : sample_sizes)
      if (t < 10) throw ConfigError("simulate.T", "sample sizes must be at least 10");
    if (exh_every < 1) throw ConfigError("simulate.exh_every", "must be positive");
    sampler.validate();
  }
};

inline PosteriorSample fit_mc_model(const Matrix& y, const std::string& model, const ExperimentSettings& s,
                                    std::uint64_t seed) {
  SamplerConfig cfg = s.sampler;
  cfg.seed = seed;
  return run_sampler(mc_data(y), model_for(model, static_cast<int>(y.rows()), s.exh_every), mc_prior(), cfg);
}

struct RmseCell {
  int T = 0;
  std::string dgp;
  std::string model;
  double b0_rmse = 0.0;
  double sigma_rmse = 0.0;
  double b0_ratio = 0.0;     // relative to HMSH(20); NaN without that model
  double sigma_ratio = 0.0;
  int ok = 0;
  std::vector<double> b0_sq_error;     // per replication, sum over elements; NaN on failure
  std::vector<double> sigma_sq_error;  // per replication, sum over shocks and periods
};

struct RejectionCell {
  int T = 0;
  std::string scenario;
  std::string dgp;
  std::string model;
  double l_rate = 0.0;
  double q_rate = 0.0;  // NaN when fewer than 20 null values were available
  double critical = 0.0;
  int ok = 0;
  std::vector<double> log_sddr;  // per replication; NaN on failure
};

struct ReplicationFailure {
  std::string cell;
  int replication = 0;
  std::string message;
};

struct McReport {
  int replications = 0;
  std::vector<RmseCell> rmse;
  std::vector<RejectionCell> rejection;
  std::vector<ReplicationFailure> failures;
};

inline std::uint64_t data_seed(std::uint64_t master, const std::string& tag, int t_len, int rep) {
  return derive_seed(derive_seed(master, fnv1a(tag)), static_cast<std::uint64_t>(t_len) * 100003ULL + static_cast<std::uint64_t>(rep));
}

inline bool is_rmse_benchmark(const std::string& model) {
  const VolatilitySpec v = VolatilitySpec::parse(model);
  return v.variant == VolatilityVariant::Hmsh && v.regimes == 20 && v.sparse;
}

// B0 and conditional-SD estimation errors of the posterior means, after
// normalizing every draw against the true B0. Ratios are relative to the
// HMSH(20) model on the same data sets.
inline McReport run_rmse_experiment(const ExperimentSettings& s) {
  s.validate();
  struct Job {
    int T;
    std::string dgp, model;
    int rep;
  };
  std::vector<Job> jobs;
  for (int t : s.sample_sizes)
    for (const auto& d : s.dgps)
      for (const auto& m : s.models)
        for (int r = 0; r < s.replications; ++r) jobs.push_back({t, d, m, r});
  std::vector<double> b0_err(jobs.size()), sd_err(jobs.size());
  std::vector<std::string> errors(jobs.size());

  parallel_for(jobs.size(), s.threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    try {
      const DgpKind kind = parse_dgp(job.dgp);
      const auto spec = DgpSpec::scenario(kind, "none", job.T, data_seed(s.seed, "rmse|" + dgp_name(kind), job.T, job.rep));
      const SimulatedData sim = generate(spec);
      const PosteriorSample raw = fit_mc_model(sim.y, job.model, s, derive_seed(spec.seed, fnv1a(job.model)));
      const PosteriorSample post = normalize_draws(raw, sim.b0);
      Matrix b0_mean = Matrix::Zero(2, 2);
      Matrix sd_mean = Matrix::Zero(job.T, 2);
      for (const auto& d : post.draws) {
        b0_mean += d.b0;
        for (int n = 0; n < 2; ++n)
          for (int t = 0; t < job.T; ++t) sd_mean(t, n) += std::sqrt(d.sigma2(n, t));
      }
      b0_mean /= static_cast<double>(post.size());
      sd_mean /= static_cast<double>(post.size());
      b0_err[j] = (b0_mean - sim.b0).squaredNorm();
      sd_err[j] = (sd_mean - sim.sigma2.cwiseSqrt()).squaredNorm();
    } catch (const std::exception& e) {
      b0_err[j] = sd_err[j] = std::numeric_limits<double>::quiet_NaN();
      errors[j] = e.what();
    }
  });

  McReport report;
  report.replications = s.replications;
  std::size_t j = 0;
  for (int t : s.sample_sizes)
    for (const auto& d : s.dgps) {
      const std::size_t first = report.rmse.size();
      for (const auto& m : s.models) {
        RmseCell c;
        c.T = t;
        c.dgp = dgp_name(parse_dgp(d));
        c.model = m;
        double b_acc = 0.0, s_acc = 0.0;
        for (int r = 0; r < s.replications; ++r, ++j) {
          c.b0_sq_error.push_back(b0_err[j]);
          c.sigma_sq_error.push_back(sd_err[j]);
          if (!errors[j].empty()) {
            report.failures.push_back({"rmse|T=" + std::to_string(t) + "|" + c.dgp + "|" + m, r, errors[j]});
            continue;
          }
          b_acc += b0_err[j];
          s_acc += sd_err[j];
          ++c.ok;
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        c.b0_rmse = c.ok ? std::sqrt(b_acc / (4.0 * c.ok)) : nan;
        c.sigma_rmse = c.ok ? std::sqrt(s_acc / (2.0 * t * c.ok)) : nan;
        report.rmse.push_back(std::move(c));
      }
      const RmseCell* bench = nullptr;
      for (std::size_t k = first; k < report.rmse.size(); ++k)
        if (is_rmse_benchmark(report.rmse[k].model)) bench = &report.rmse[k];
      for (std::size_t k = first; k < report.rmse.size(); ++k) {
        auto& c = report.rmse[k];
        c.b0_ratio = bench ? c.b0_rmse / bench->b0_rmse : std::numeric_limits<double>::quiet_NaN();
        c.sigma_ratio = bench ? c.sigma_rmse / bench->sigma_rmse : std::numeric_limits<double>::quiet_NaN();
      }
    }
  return report;
}

// Homoskedasticity verification of shock 1 (index 0). Data of the "1&2"
// scenario do not depend on the volatility law, so it is simulated and fitted
// once per (model, T) and shared by every DGP column; those values also
// calibrate the q-value critical point.
inline McReport run_rejection_experiment(const ExperimentSettings& s) {
  s.validate();
  struct Job {
    int T;
    std::string data_tag;
    DgpKind kind;
    std::string scenario, model;
    int rep;
  };
  // MSH and HMSH share data when only one shock switches.
  auto tag_of = [](DgpKind kind, const std::string& scenario) {
    if (scenario == "1&2") return std::string("null");
    const bool single = scenario == "1" || scenario == "2";
    if (single && (kind == DgpKind::MSH2 || kind == DgpKind::HMSH2)) return "MS|" + scenario;
    return dgp_name(kind) + "|" + scenario;
  };
  std::vector<Job> jobs;
  std::vector<std::string> keys;
  std::map<std::string, std::size_t> index;
  auto key_of = [](int t, const std::string& tag, const std::string& model, int rep) {
    return std::to_string(t) + "|" + tag + "|" + model + "|" + std::to_string(rep);
  };
  for (int t : s.sample_sizes)
    for (const auto& sc : s.scenarios)
      for (const auto& d : s.dgps) {
        const DgpKind kind = parse_dgp(d);
        const std::string tag = tag_of(kind, sc);
        for (const auto& m : s.models)
          for (int r = 0; r < s.replications; ++r) {
            const std::string key = key_of(t, tag, m, r);
            if (!index.emplace(key, keys.size()).second) continue;
            keys.push_back(key);
            jobs.push_back({t, tag, sc == "1&2" ? DgpKind::Homoskedastic : kind, sc, m, r});
          }
      }
  // the null is always needed for the q-value
  for (int t : s.sample_sizes)
    for (const auto& m : s.models)
      for (int r = 0; r < s.replications; ++r) {
        const std::string key = key_of(t, "null", m, r);
        if (!index.emplace(key, keys.size()).second) continue;
        keys.push_back(key);
        jobs.push_back({t, "null", DgpKind::Homoskedastic, "1&2", m, r});
      }

  std::vector<double> values(jobs.size());
  std::vector<std::string> errors(jobs.size());
  parallel_for(jobs.size(), s.threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    try {
      const auto spec = DgpSpec::scenario(job.kind, job.scenario, job.T, data_seed(s.seed, "reject|" + job.data_tag, job.T, job.rep));
      const SimulatedData sim = generate(spec);
      const PosteriorSample raw = fit_mc_model(sim.y, job.model, s, derive_seed(spec.seed, fnv1a(job.model)));
      const PosteriorSample post = normalize_draws(raw, sim.b0);
      values[j] = compute_sddr(post, mc_prior(), 0).log_sddr;
    } catch (const std::exception& e) {
      values[j] = std::numeric_limits<double>::quiet_NaN();
      errors[j] = e.what();
    }
  });
  auto lookup = [&](const std::string& key) { return index.at(key); };

  McReport report;
  report.replications = s.replications;
  for (std::size_t j = 0; j < jobs.size(); ++j)
    if (!errors[j].empty()) report.failures.push_back({"reject|" + keys[j], jobs[j].rep, errors[j]});
  for (int t : s.sample_sizes)
    for (const auto& m : s.models) {
      std::vector<double> null_values;
      for (int r = 0; r < s.replications; ++r) {
        const double v = values[lookup(key_of(t, "null", m, r))];
        if (std::isfinite(v)) null_values.push_back(v);
      }
      const double critical =
          null_values.size() >= 20 ? critical_q_value(null_values) : std::numeric_limits<double>::quiet_NaN();
      for (const auto& sc : s.scenarios)
        for (const auto& d : s.dgps) {
          const DgpKind kind = parse_dgp(d);
          RejectionCell c;
          c.T = t;
          c.scenario = sc;
          c.dgp = dgp_name(kind);
          c.model = m;
          c.critical = critical;
          int l = 0, q = 0;
          for (int r = 0; r < s.replications; ++r) {
            const double v = values[lookup(key_of(t, tag_of(kind, sc), m, r))];
            c.log_sddr.push_back(v);
            if (!std::isfinite(v)) continue;
            ++c.ok;
            if (v < 0.0) ++l;
            if (v < critical) ++q;
          }
          c.l_rate = c.ok ? static_cast<double>(l) / c.ok : std::numeric_limits<double>::quiet_NaN();
          c.q_rate = c.ok && std::isfinite(critical) ? static_cast<double>(q) / c.ok : std::numeric_limits<double>::quiet_NaN();
          report.rejection.push_back(std::move(c));
        }
    }
  return report;
}

// ---------------------------------------------------------------------------
// Table output. Missing cells (the SV model, failed cells) print as NA.

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

// Rows T x DGP, one column per model plus SV; `sigma` selects the
// conditional-SD table instead of the B0 table.
inline void write_rmse_table(std::ostream& os, const McReport& r, const ExperimentSettings& s, bool sigma) {
  os << "T,DGP";
  for (const auto& m : s.models) os << "," << m;
  os << ",SV\n";
  for (int t : s.sample_sizes)
    for (const auto& d : s.dgps) {
      os << t << "," << dgp_name(parse_dgp(d));
      for (const auto& m : s.models) {
        double v = std::numeric_limits<double>::quiet_NaN();
        for (const auto& c : r.rmse)
          if (c.T == t && c.dgp == dgp_name(parse_dgp(d)) && c.model == m) v = sigma ? c.sigma_ratio : c.b0_ratio;
        os << "," << format_number(v);
      }
      os << ",NA\n";
    }
}

// Long format: one row per (T, DGP, model) with levels and ratios.
inline void write_rmse_cells(std::ostream& os, const McReport& r) {
  os << "T,DGP,model,replications_ok,b0_rmse,sigma_rmse,b0_ratio,sigma_ratio\n";
  for (const auto& c : r.rmse)
    os << c.T << "," << c.dgp << "," << c.model << "," << c.ok << "," << format_number(c.b0_rmse) << ","
       << format_number(c.sigma_rmse) << "," << format_number(c.b0_ratio) << "," << format_number(c.sigma_ratio) << "\n";
}

// Panel A (l-value) then Panel B (q-value); rows T x scenario; columns are
// model:DGP groups, the SV model group printed as NA.
inline void write_rejection_table(std::ostream& os, const McReport& r, const ExperimentSettings& s) {
  std::vector<std::string> dgps;
  for (const auto& d : s.dgps) dgps.push_back(dgp_name(parse_dgp(d)));
  os << "panel,T,homoskedastic_shocks";
  for (const auto& m : s.models)
    for (const auto& d : dgps) os << "," << m << ":" << d;
  for (const auto& d : dgps) os << ",SV:" << d;
  os << "\n";
  for (const char* panel : {"l-value", "q-value"}) {
    const bool q = panel[0] == 'q';
    for (int t : s.sample_sizes)
      for (const auto& sc : s.scenarios) {
        os << panel << "," << t << "," << sc;
        for (const auto& m : s.models)
          for (const auto& d : dgps) {
            double v = std::numeric_limits<double>::quiet_NaN();
            for (const auto& c : r.rejection)
              if (c.T == t && c.scenario == sc && c.dgp == d && c.model == m) v = q ? c.q_rate : c.l_rate;
            os << "," << format_number(v);
          }
        for (std::size_t k = 0; k < dgps.size(); ++k) os << ",NA";
        os << "\n";
      }
  }
}

inline void write_rejection_cells(std::ostream& os, const McReport& r) {
  os << "T,homoskedastic_shocks,DGP,model,replication,log_sddr\n";
  for (const auto& c : r.rejection)
    for (std::size_t k = 0; k < c.log_sddr.size(); ++k)
      os << c.T << "," << c.scenario << "," << c.dgp << "," << c.model << "," << k << "," << format_number(c.log_sddr[k]) << "\n";
}

inline void write_failures(std::ostream& os, const McReport& r) {
  os << "cell,replication,message\n";
  for (const auto& f : r.failures) {
    std::string msg = f.message;
    for (auto& ch : msg)
      if (ch == ',' || ch == '\n') ch = ';';
    os << f.cell << "," << f.replication << "," << msg << "\n";
  }
}

}  // namespace hmsh
