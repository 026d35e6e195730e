#pragma once

#include "hmsh/gibbs.hpp"
#include "hmsh/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hmsh {

// One posterior draw's one-step predictive law: y = mean + B0^{-1} u with u_n
// independent across Markov processes and, within process p, a finite mixture
// over its regimes with weights regime_probs[p].
struct DrawDensity {
  Matrix b0;
  Vector mean;
  std::vector<Vector> variances;
  std::vector<int> process_of_shock;
  std::vector<Vector> regime_probs;
  double log_abs_det = 0.0;

  double log_density(const Vector& y) const {
    constexpr double kLogTwoPi = 1.8378770664093453;
    const Vector u = b0 * (y - mean);
    double total = log_abs_det;
    for (std::size_t p = 0; p < regime_probs.size(); ++p) {
      const Vector& w = regime_probs[p];
      std::vector<double> terms;
      terms.reserve(static_cast<std::size_t>(w.size()));
      for (Eigen::Index m = 0; m < w.size(); ++m) {
        if (w(m) <= 0.0) continue;
        double l = std::log(w(m));
        for (std::size_t n = 0; n < process_of_shock.size(); ++n) {
          if (process_of_shock[n] != static_cast<int>(p)) continue;
          const double var = variances[n](m);
          l += -0.5 * (kLogTwoPi + std::log(var) + u(static_cast<Eigen::Index>(n)) * u(static_cast<Eigen::Index>(n)) / var);
        }
        terms.push_back(l);
      }
      total += log_sum_exp(terms);
    }
    return total;
  }

  Vector sample(Rng& rng) const {
    const auto n = b0.rows();
    std::vector<int> regime(regime_probs.size());
    for (std::size_t p = 0; p < regime_probs.size(); ++p) regime[p] = sample_index(regime_probs[p], rng);
    Vector u(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      u(i) = std::sqrt(variances[idx](regime[static_cast<std::size_t>(process_of_shock[idx])])) * rng.normal();
    }
    return mean + b0.partialPivLu().solve(u);
  }
};

// Equal-weight mixture over posterior draws.
struct PredictiveDensity {
  std::vector<DrawDensity> draws;

  double log_density(const Vector& y) const {
    if (draws.empty()) throw ParameterError("predictive density has no draws");
    std::vector<double> l;
    l.reserve(draws.size());
    for (const auto& d : draws) l.push_back(d.log_density(y));
    return log_sum_exp(l) - std::log(static_cast<double>(draws.size()));
  }

  Vector mean() const {
    if (draws.empty()) throw ParameterError("predictive density has no draws");
    Vector m = Vector::Zero(draws.front().mean.size());
    for (const auto& d : draws) m += d.mean;
    return m / static_cast<double>(draws.size());
  }

  Vector sample(Rng& rng) const {
    const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(draws.size()));
    return draws[std::min(k, draws.size() - 1)].sample(rng);
  }
};

// Builds the draw's predictive law for period `origin` (0-based row of data)
// from a draw estimated on rows [0, origin). Regime probabilities are the
// filtered probabilities at origin-1 propagated one step by P.
inline DrawDensity draw_density(const ParameterState& s, const VolatilitySpec& spec, const TimeSeriesData& data,
                                Eigen::Index origin) {
  if (origin < 1 || origin >= data.T()) throw ParameterError("forecast origin outside the sample");
  DrawDensity d;
  d.b0 = s.b0;
  const double det = s.b0.determinant();
  if (!(std::abs(det) > 0.0) || !std::isfinite(det)) throw NumericalError("singular predictive covariance");
  d.log_abs_det = std::log(std::abs(det));
  d.mean = s.a * data.x.row(origin).transpose();
  d.variances = s.variances;
  d.process_of_shock = s.process_of_shock;
  const int m = spec.regimes;
  const int processes = spec.process_count(static_cast<int>(data.N()));
  if (spec.variant == VolatilityVariant::Exh) {
    Vector w = Vector::Zero(m);
    w(std::min(spec.exh_regime(origin), m - 1)) = 1.0;
    d.regime_probs.assign(1, w);
    return d;
  }
  const TimeSeriesData window = data.head(origin);
  const Matrix u = structural_residuals(window, s);
  for (int p = 0; p < processes; ++p) {
    const auto& tp = s.transitions[static_cast<std::size_t>(p)];
    const FilterResult f = forward_filter(regime_loglikelihoods(u, s, spec, p), tp, s.initials[static_cast<std::size_t>(p)]);
    Vector w = tp.transpose() * f.filtered.row(origin - 1).transpose();
    d.regime_probs.push_back(w / w.sum());
  }
  return d;
}

inline PredictiveDensity predictive_density(const PosteriorSample& sample, const TimeSeriesData& data, Eigen::Index origin) {
  if (sample.empty()) throw ParameterError("predictive density needs posterior draws");
  PredictiveDensity out;
  out.draws.reserve(sample.size());
  for (const auto& s : sample.draws) out.draws.push_back(draw_density(s, sample.volatility, data, origin));
  return out;
}

// ---------------------------------------------------------------------------
// Recursive evaluation

struct ForecastModel {
  std::string name;
  VolatilitySpec volatility;
  PriorSpec prior;
  SamplerConfig sampler;  // chain at the first origin
};

struct ForecastOptions {
  std::string benchmark;  // model name; empty means the first model
  int warm_draws = 500;   // chain length at later origins, started from the previous origin's last draw
  int warm_burn_in = 100;
  bool standardize = true;  // RMSFE/MAFE ratios per variable, then averaged; false pools all variables
  int threads = 1;
};

struct OriginRecord {
  Eigen::Index origin = 0;  // row of data being forecast
  bool ok = false;
  std::string message;  // failure reason when !ok
  double log_score = std::numeric_limits<double>::quiet_NaN();
  Vector error;  // y - predictive mean
};

struct ModelForecast {
  std::string name;
  std::vector<OriginRecord> origins;
  double lps = 0.0;
  Vector rmsfe;  // per variable
  Vector mafe;
  int evaluated = 0;
  int skipped = 0;
};

struct ForecastComparison {
  std::string model;
  double lps_difference = 0.0;
  double rmsfe_ratio = 1.0;
  double mafe_ratio = 1.0;
  int common_origins = 0;
};

struct ForecastReport {
  std::string benchmark;
  bool standardized = true;
  std::vector<ModelForecast> models;
  std::vector<ForecastComparison> comparisons;
};

// Per-variable RMSFE and MAFE over rows of `errors`.
inline void point_metrics(const Matrix& errors, Vector& rmsfe, Vector& mafe) {
  const auto n = static_cast<double>(errors.rows());
  if (errors.rows() == 0) {
    rmsfe = mafe = Vector::Constant(errors.cols(), std::numeric_limits<double>::quiet_NaN());
    return;
  }
  rmsfe = (errors.array().square().colwise().sum() / n).sqrt().transpose();
  mafe = (errors.array().abs().colwise().sum() / n).transpose();
}

inline double safe_ratio(double num, double den) {
  if (num == 0.0 && den == 0.0) return 1.0;
  return num / den;
}

inline ForecastComparison compare_forecasts(const ModelForecast& model, const ModelForecast& bench, bool standardize) {
  ForecastComparison c;
  c.model = model.name;
  std::vector<std::size_t> mi, bi;
  for (std::size_t i = 0; i < model.origins.size(); ++i) {
    if (!model.origins[i].ok) continue;
    for (std::size_t j = 0; j < bench.origins.size(); ++j)
      if (bench.origins[j].ok && bench.origins[j].origin == model.origins[i].origin) {
        mi.push_back(i);
        bi.push_back(j);
        break;
      }
  }
  c.common_origins = static_cast<int>(mi.size());
  if (mi.empty()) {
    c.lps_difference = c.rmsfe_ratio = c.mafe_ratio = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  const auto n = model.origins[mi.front()].error.size();
  Matrix em(static_cast<Eigen::Index>(mi.size()), n), eb(static_cast<Eigen::Index>(mi.size()), n);
  double lm = 0.0, lb = 0.0;
  for (std::size_t k = 0; k < mi.size(); ++k) {
    em.row(static_cast<Eigen::Index>(k)) = model.origins[mi[k]].error.transpose();
    eb.row(static_cast<Eigen::Index>(k)) = bench.origins[bi[k]].error.transpose();
    lm += model.origins[mi[k]].log_score;
    lb += bench.origins[bi[k]].log_score;
  }
  c.lps_difference = (lm - lb) / static_cast<double>(mi.size());
  Vector rm, mm, rb, mb;
  point_metrics(em, rm, mm);
  point_metrics(eb, rb, mb);
  if (standardize) {
    double r = 0.0, a = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      r += safe_ratio(rm(i), rb(i));
      a += safe_ratio(mm(i), mb(i));
    }
    c.rmsfe_ratio = r / static_cast<double>(n);
    c.mafe_ratio = a / static_cast<double>(n);
  } else {
    c.rmsfe_ratio = safe_ratio(std::sqrt(em.array().square().sum()), std::sqrt(eb.array().square().sum()));
    c.mafe_ratio = safe_ratio(em.array().abs().sum(), eb.array().abs().sum());
  }
  return c;
}

inline void summarize_model(ModelForecast& f, Eigen::Index n) {
  Matrix e(0, n);
  double lps = 0.0;
  f.evaluated = f.skipped = 0;
  for (const auto& o : f.origins) {
    if (!o.ok) {
      ++f.skipped;
      continue;
    }
    e.conservativeResize(e.rows() + 1, Eigen::NoChange);
    e.row(e.rows() - 1) = o.error.transpose();
    lps += o.log_score;
    ++f.evaluated;
  }
  f.lps = f.evaluated ? lps / f.evaluated : std::numeric_limits<double>::quiet_NaN();
  point_metrics(e, f.rmsfe, f.mafe);
}

// Seeds per origin are derive_seed(model sampler seed, origin).
inline ModelForecast forecast_model(const ForecastModel& model, const TimeSeriesData& data, Eigen::Index first_origin,
                                    Eigen::Index step, const ForecastOptions& opt) {
  ModelForecast f;
  f.name = model.name;
  ParameterState last;
  bool have_last = false;
  for (Eigen::Index origin = first_origin; origin < data.T(); origin += step) {
    OriginRecord rec;
    rec.origin = origin;
    try {
      SamplerConfig cfg = model.sampler;
      if (have_last) {
        cfg.total_draws = opt.warm_draws;
        cfg.burn_in = opt.warm_burn_in;
      }
      cfg.seed = derive_seed(model.sampler.seed, static_cast<std::uint64_t>(origin));
      const PosteriorSample post = run_sampler(data.head(origin), model.volatility, model.prior, cfg, have_last ? &last : nullptr);
      const PredictiveDensity pd = predictive_density(post, data, origin);
      const Vector y = data.y.row(origin).transpose();
      rec.log_score = pd.log_density(y);
      rec.error = y - pd.mean();
      if (!std::isfinite(rec.log_score)) throw NumericalError("non-finite log predictive score");
      rec.ok = true;
      last = post.draws.back();
      have_last = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.message = e.what();
      rec.error = Vector::Constant(data.N(), std::numeric_limits<double>::quiet_NaN());
    }
    f.origins.push_back(std::move(rec));
  }
  summarize_model(f, data.N());
  return f;
}

// Expanding window: the model is estimated on rows [0, origin) and scored on
// row origin, for origin = first_origin, first_origin + step, ... < T. Models
// run concurrently; origins within a model run in sequence.
inline ForecastReport evaluate(const std::vector<ForecastModel>& models, const TimeSeriesData& data,
                               Eigen::Index first_origin, Eigen::Index step = 1, const ForecastOptions& opt = {}) {
  if (models.empty()) throw ConfigError("forecast.models", "at least one model required");
  if (step < 1) throw ConfigError("forecast.step", "must be positive");
  if (first_origin < 1 || first_origin >= data.T())
    throw ConfigError("forecast.first_origin", "must leave at least one evaluation point");
  if (opt.warm_draws < 1 || opt.warm_burn_in < 0 || opt.warm_burn_in >= opt.warm_draws)
    throw ConfigError("forecast.warm_draws", "warm chain must be longer than its burn-in");
  ForecastReport report;
  report.standardized = opt.standardize;
  report.benchmark = opt.benchmark.empty() ? models.front().name : opt.benchmark;
  std::size_t bench = models.size();
  for (std::size_t i = 0; i < models.size(); ++i)
    if (models[i].name == report.benchmark) bench = i;
  if (bench == models.size()) throw ConfigError("forecast.benchmark", "benchmark '" + report.benchmark + "' is not among the models");

  report.models.resize(models.size());
  parallel_for(models.size(), opt.threads,
               [&](std::size_t i) { report.models[i] = forecast_model(models[i], data, first_origin, step, opt); });
  for (const auto& m : report.models) report.comparisons.push_back(compare_forecasts(m, report.models[bench], opt.standardize));
  return report;
}

inline std::string forecast_number(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

// Columns: LPS difference, RMSFE ratio, MAFE ratio against the benchmark.
inline void write_forecast_table(std::ostream& os, const ForecastReport& r) {
  os << "model,lps_difference,rmsfe_ratio,mafe_ratio,common_origins,benchmark\n";
  for (const auto& c : r.comparisons)
    os << c.model << "," << forecast_number(c.lps_difference) << "," << forecast_number(c.rmsfe_ratio) << ","
       << forecast_number(c.mafe_ratio) << "," << c.common_origins << "," << r.benchmark << "\n";
}

inline void write_forecast_levels(std::ostream& os, const ForecastReport& r) {
  os << "model,variable,lps,rmsfe,mafe,evaluated,skipped\n";
  for (const auto& m : r.models)
    for (Eigen::Index i = 0; i < m.rmsfe.size(); ++i)
      os << m.name << "," << i + 1 << "," << forecast_number(m.lps) << "," << forecast_number(m.rmsfe(i)) << ","
         << forecast_number(m.mafe(i)) << "," << m.evaluated << "," << m.skipped << "\n";
}

// One row per (model, origin); failed origins carry status "skipped".
inline void write_forecast_trace(std::ostream& os, const ForecastReport& r) {
  os << "model,origin,status,log_score";
  const auto n = r.models.empty() || r.models.front().origins.empty() ? 0 : r.models.front().origins.front().error.size();
  for (Eigen::Index i = 0; i < n; ++i) os << ",error_" << i + 1;
  os << ",message\n";
  for (const auto& m : r.models)
    for (const auto& o : m.origins) {
      os << m.name << "," << o.origin << "," << (o.ok ? "ok" : "skipped") << "," << forecast_number(o.log_score);
      for (Eigen::Index i = 0; i < o.error.size(); ++i) os << "," << forecast_number(o.error(i));
      std::string msg = o.message;
      for (auto& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      os << "," << msg << "\n";
    }
}

}  // namespace hmsh
