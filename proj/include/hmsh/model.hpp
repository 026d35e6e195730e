#pragma once

#include "hmsh/distributions.hpp"
#include "hmsh/error.hpp"
#include "hmsh/linalg.hpp"
#include "hmsh/markov.hpp"

#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace hmsh {

// Observations y (T x N) and regressors x (T x K), K = N p + D, with row t of
// x equal to [y_{t-1}', ..., y_{t-p}', d_t'].
struct TimeSeriesData {
  Matrix y;
  Matrix x;
  int lag_order = 0;
  int deterministic_count = 0;

  Eigen::Index T() const noexcept { return y.rows(); }
  Eigen::Index N() const noexcept { return y.cols(); }
  Eigen::Index K() const noexcept { return x.cols(); }

  // First `rows` observations; used for expanding-window estimation.
  TimeSeriesData head(Eigen::Index rows) const {
    if (rows < 0 || rows > T()) throw DataError("window exceeds sample");
    return {y.topRows(rows), x.topRows(rows), lag_order, deterministic_count};
  }
};

inline Matrix constant_term(Eigen::Index rows) { return Matrix::Ones(rows, 1); }

// `deterministics` has one row per raw observation (aligned with raw_y) or
// zero columns for no deterministic terms.
inline TimeSeriesData build_regressors(const Matrix& raw_y, int lag_order, const Matrix& deterministics) {
  if (lag_order < 0) throw DataError("lag order must be nonnegative");
  const auto t_raw = raw_y.rows();
  const auto n = raw_y.cols();
  if (t_raw <= lag_order) throw DataError("sample too short for the lag order");
  const auto d = deterministics.cols();
  if (d > 0 && deterministics.rows() != t_raw) throw DataError("deterministic terms must have one row per observation");
  const auto t_len = t_raw - lag_order;
  TimeSeriesData data;
  data.lag_order = lag_order;
  data.deterministic_count = static_cast<int>(d);
  data.y = raw_y.bottomRows(t_len);
  data.x.resize(t_len, n * lag_order + d);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const auto raw_t = t + lag_order;
    for (int l = 1; l <= lag_order; ++l) data.x.block(t, (l - 1) * n, 1, n) = raw_y.row(raw_t - l);
    if (d > 0) data.x.block(t, n * lag_order, 1, d) = deterministics.row(raw_t);
  }
  return data;
}

enum class VolatilityVariant { Exh, Msh, Hmsh };

struct VolatilitySpec {
  VolatilityVariant variant = VolatilityVariant::Hmsh;
  int regimes = 20;
  bool sparse = true;
  std::vector<int> breakpoints;  // EXH: first row index of each new regime

  static VolatilitySpec exh(std::vector<int> breaks) {
    VolatilitySpec v;
    v.variant = VolatilityVariant::Exh;
    v.breakpoints = std::move(breaks);
    v.regimes = static_cast<int>(v.breakpoints.size()) + 1;
    v.sparse = false;
    return v;
  }
  static VolatilitySpec msh(int m, bool sparse) { return {VolatilityVariant::Msh, m, sparse, {}}; }
  static VolatilitySpec hmsh(int m, bool sparse) { return {VolatilityVariant::Hmsh, m, sparse, {}}; }

  // EXH with a regime change every `every` observations over a sample of T.
  static VolatilitySpec exh_every(int every, int t_len) {
    std::vector<int> b;
    for (int t = every; t < t_len; t += every) b.push_back(t);
    return exh(std::move(b));
  }

  int process_count(int shocks) const { return variant == VolatilityVariant::Hmsh ? shocks : 1; }
  int process_of(int shock) const { return variant == VolatilityVariant::Hmsh ? shock : 0; }

  StatePath exh_path(Eigen::Index t_len) const {
    StatePath path(static_cast<std::size_t>(t_len), 0);
    for (Eigen::Index t = 0; t < t_len; ++t) path[static_cast<std::size_t>(t)] = exh_regime(t);
    return path;
  }
  int exh_regime(Eigen::Index t) const {
    int r = 0;
    for (int b : breakpoints)
      if (t >= b) ++r;
    return r;
  }

  MarkovSpec markov_spec(Eigen::Index t_len) const {
    if (variant == VolatilityVariant::Exh) return MarkovSpec::exogenous(exh_path(t_len), regimes);
    return sparse ? MarkovSpec::sparse(regimes) : MarkovSpec::stationary(regimes);
  }

  void validate() const {
    if (regimes < 1) throw ConfigError("model.regimes", "regime count must be at least 1");
    if (variant == VolatilityVariant::Exh) {
      if (regimes != static_cast<int>(breakpoints.size()) + 1)
        throw ConfigError("model.breakpoints", "EXH regime count must equal breakpoints + 1");
      for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        if (breakpoints[i] <= 0 || (i > 0 && breakpoints[i] <= breakpoints[i - 1]))
          throw ConfigError("model.breakpoints", "breakpoints must be positive and strictly increasing");
      }
    }
  }

  std::string name() const {
    switch (variant) {
      case VolatilityVariant::Exh: return "EXH";
      case VolatilityVariant::Msh: return "MSH(" + std::to_string(regimes) + ")";
      case VolatilityVariant::Hmsh: return "HMSH(" + std::to_string(regimes) + ")";
    }
    return "?";
  }

  // "MSH(M)" / "HMSH(M)": sparse when M > 2 unless suffixed ",stationary";
  // ",sparse" forces the sparse representation. "EXH" needs breakpoints set
  // separately.
  static VolatilitySpec parse(const std::string& text) {
    static const std::regex re(R"(^\s*(EXH|MSH|HMSH)\s*(?:\(\s*(\d+)\s*(?:,\s*(sparse|stationary)\s*)?\))?\s*$)",
                               std::regex::icase);
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw ConfigError("model.volatility", "unrecognized model '" + text + "'");
    std::string kind = m[1].str();
    for (auto& c : kind) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (kind == "EXH") return exh({});
    if (!m[2].matched) throw ConfigError("model.volatility", "regime count required, e.g. HMSH(20)");
    const int regimes = std::stoi(m[2].str());
    if (regimes < 1) throw ConfigError("model.regimes", "regime count must be at least 1");
    bool sparse = regimes > 2;
    if (m[3].matched) sparse = m[3].str().size() == 6;  // "sparse" vs "stationary"
    return kind == "MSH" ? msh(regimes, sparse) : hmsh(regimes, sparse);
  }
};

struct ShrinkageHyper {
  double nu_gamma;   // IG2 shape of gamma_n | s_n
  double a_local;    // gamma shape of s_n | s
  double s_global;   // IG2 scale of s
  double nu_global;  // IG2 shape of s
};

struct PriorSpec {
  Matrix a_mean;   // N x K, row n = m_{n.A}'
  Vector a_scale;  // K, diagonal of Omega_A
  ShrinkageHyper a_hyper{10.0, 10.0, 10.0, 10.0};
  std::vector<Matrix> b_scale;  // Omega_{B.n}, r_{B.n} x r_{B.n}
  double b_shape = 1.0;         // nu_B >= N
  ShrinkageHyper b_hyper{10.0, 10.0, 1.0, 100.0};
  double variance_concentration = 1.0;  // e_sigma
  double variance_prior_scale = 1.0;    // IG2 scale entering the variance full conditional
  double variance_prior_shape = 2.0;    // IG2 shape, = 2 e_sigma
  double transition_concentration = 1.0;
  double initial_concentration = 1.0;
  double transition_stickiness = 0.0;
  std::optional<double> fixed_gamma_a;  // disables the A hierarchy
  std::optional<double> fixed_gamma_b;  // disables the B0 hierarchy
  Mask a_free;  // N x K
  Mask b_free;  // N x N

  Eigen::Index N() const noexcept { return b_free.rows(); }
  Eigen::Index K() const noexcept { return a_free.cols(); }

  // Minnesota-style defaults. nonstationary[n] puts a prior mean of 1 on the
  // own first lag of variable n; empty means every variable is nonstationary.
  static PriorSpec defaults(int n, int lag_order, int deterministic_count, std::vector<bool> nonstationary = {}) {
    if (nonstationary.empty()) nonstationary.assign(static_cast<std::size_t>(n), true);
    if (static_cast<int>(nonstationary.size()) != n)
      throw ConfigError("prior.nonstationary", "one flag per variable required");
    const int k = n * lag_order + deterministic_count;
    PriorSpec p;
    p.a_mean = Matrix::Zero(n, k);
    if (lag_order >= 1)
      for (int i = 0; i < n; ++i)
        if (nonstationary[static_cast<std::size_t>(i)]) p.a_mean(i, i) = 1.0;
    p.a_scale.resize(k);
    for (int l = 1; l <= lag_order; ++l) p.a_scale.segment((l - 1) * n, n).setConstant(1.0 / (double(l) * l));
    if (deterministic_count > 0) p.a_scale.tail(deterministic_count).setConstant(100.0);
    p.b_shape = n;
    p.a_free = Mask::Constant(n, k, true);
    p.set_b_restrictions(Mask::Constant(n, n, true));
    return p;
  }

  // Installs B0 restrictions and resets Omega_{B.n} to identity of matching size.
  void set_b_restrictions(const Mask& free) {
    b_free = free;
    b_scale.clear();
    for (Eigen::Index i = 0; i < free.rows(); ++i) {
      const auto r = free.row(i).count();
      b_scale.push_back(Matrix::Identity(r, r));
    }
  }

  // Sets e_sigma and the matching IG2 representation s = 1, nu = 2 e_sigma.
  void set_variance_concentration(double e) {
    variance_concentration = e;
    variance_prior_scale = 1.0;
    variance_prior_shape = 2.0 * e;
  }

  void validate(Eigen::Index n, Eigen::Index k) const {
    auto fail = [](const char* field, const char* msg) { throw ConfigError(field, msg); };
    if (a_mean.rows() != n || a_mean.cols() != k) fail("prior.a_mean", "dimension mismatch");
    if (a_scale.size() != k) fail("prior.a_scale", "dimension mismatch");
    if ((a_scale.array() <= 0.0).any()) fail("prior.a_scale", "must be positive");
    if (a_free.rows() != n || a_free.cols() != k) fail("prior.a_free", "dimension mismatch");
    if (b_free.rows() != n || b_free.cols() != n) fail("prior.b_free", "dimension mismatch");
    if (static_cast<Eigen::Index>(b_scale.size()) != n) fail("prior.b_scale", "one matrix per equation required");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = b_free.row(i).count();
      if (r == 0) fail("prior.b_free", "each B0 row needs at least one free element");
      if (b_scale[static_cast<std::size_t>(i)].rows() != r || b_scale[static_cast<std::size_t>(i)].cols() != r)
        fail("prior.b_scale", "dimension mismatch with restrictions");
      Eigen::LLT<Matrix> llt(b_scale[static_cast<std::size_t>(i)]);
      if (llt.info() != Eigen::Success) fail("prior.b_scale", "must be positive definite");
    }
    if (b_shape < static_cast<double>(n)) fail("prior.b_shape", "must be at least N");
    for (const auto* h : {&a_hyper, &b_hyper}) {
      if (!(h->nu_gamma > 0 && h->a_local > 0 && h->s_global > 0 && h->nu_global > 0))
        fail("prior.hyper", "shrinkage hyper-parameters must be positive");
    }
    if (!(variance_concentration > 0)) fail("prior.variance_concentration", "must be positive");
    if (!(variance_prior_scale > 0) || !(variance_prior_shape > 0)) fail("prior.variance_prior", "must be positive");
    if (!(transition_concentration > 0)) fail("prior.transition_concentration", "must be positive");
    if (!(initial_concentration > 0)) fail("prior.initial_concentration", "must be positive");
    if (transition_stickiness < 0) fail("prior.transition_stickiness", "must be nonnegative");
    if (fixed_gamma_a && !(*fixed_gamma_a > 0)) fail("prior.fixed_gamma_a", "must be positive");
    if (fixed_gamma_b && !(*fixed_gamma_b > 0)) fail("prior.fixed_gamma_b", "must be positive");
  }
};

struct ShrinkageState {
  Vector gamma;   // gamma_{.n}
  Vector local;   // s_{.n}
  double global = 1.0;  // s_.
};

// One full Gibbs draw.
struct ParameterState {
  Matrix a;   // N x K
  Matrix b0;  // N x N
  std::vector<Vector> variances;        // per shock, length M_n, mean 1
  std::vector<int> process_of_shock;    // which path drives shock n
  std::vector<StatePath> paths;         // per Markov process
  std::vector<TransitionMatrix> transitions;  // empty for EXH
  std::vector<Vector> initials;               // empty for EXH
  ShrinkageState shrinkage_a;
  ShrinkageState shrinkage_b;
  // IGD full-conditional parameters used when the variances were drawn;
  // consumed by the Rao-Blackwellized Savage-Dickey numerator.
  std::vector<IgdParams> variance_posterior;

  int shocks() const noexcept { return static_cast<int>(b0.rows()); }

  const StatePath& path_of(int shock) const { return paths[static_cast<std::size_t>(process_of_shock[static_cast<std::size_t>(shock)])]; }

  double sigma2(int shock, Eigen::Index t) const {
    return variances[static_cast<std::size_t>(shock)](path_of(shock)[static_cast<std::size_t>(t)]);
  }

  Vector sigma2_at(Eigen::Index t) const {
    Vector out(shocks());
    for (int n = 0; n < shocks(); ++n) out(n) = sigma2(n, t);
    return out;
  }

  // Throws NumericalError naming the first violated invariant.
  void check_invariants(const Mask* a_free = nullptr, const Mask* b_free = nullptr) const {
    const int n = shocks();
    for (int i = 0; i < n; ++i) {
      const Vector& v = variances[static_cast<std::size_t>(i)];
      if (std::abs(v.mean() - 1.0) >= 1e-12) throw NumericalError("normalization violated for shock " + std::to_string(i));
      if ((v.array() <= 0.0).any() || !v.allFinite()) throw NumericalError("nonpositive variance");
    }
    const double scale = std::max(1.0, b0.cwiseAbs().maxCoeff());
    if (std::abs(b0.determinant()) <= 1e-12 * std::pow(scale, n)) throw NumericalError("B0 is singular");
    for (const auto* s : {&shrinkage_a, &shrinkage_b}) {
      if (s->gamma.size() && ((s->gamma.array() <= 0.0).any() || (s->local.array() <= 0.0).any() || !(s->global > 0.0)))
        throw NumericalError("shrinkage parameter not positive");
    }
    if (a_free) {
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
          if (!(*a_free)(i, j) && a(i, j) != 0.0) throw NumericalError("A restriction violated");
    }
    if (b_free) {
      for (Eigen::Index i = 0; i < b0.rows(); ++i)
        for (Eigen::Index j = 0; j < b0.cols(); ++j)
          if (!(*b_free)(i, j) && b0(i, j) != 0.0) throw NumericalError("B0 restriction violated");
    }
  }
};

struct SamplerDiagnostics {
  std::int64_t sweeps = 0;
  std::int64_t occupancy_redraws = 0;    // rejected FFBS draws under the occupancy rule
  std::int64_t occupancy_fallbacks = 0;  // sweeps that retained the previous path
};

struct PosteriorSample {
  std::vector<ParameterState> draws;
  int burn_in = 0;
  int thinning = 1;
  SamplerDiagnostics diagnostics;
  VolatilitySpec volatility;
  int lag_order = 0;
  int deterministic_count = 0;

  std::size_t size() const noexcept { return draws.size(); }
  bool empty() const noexcept { return draws.empty(); }
};

// u_t = B0 (y_t - A x_t), returned row-wise (T x N).
inline Matrix structural_residuals(const TimeSeriesData& data, const ParameterState& state) {
  if (state.b0.rows() != data.N() || state.a.rows() != data.N() || state.a.cols() != data.K())
    throw ParameterError("state dimensions do not match data");
  Matrix eps = data.y;
  if (data.K() > 0) eps.noalias() -= data.x * state.a.transpose();
  return eps * state.b0.transpose();
}

// Sigma_t = B0^{-1} diag(sigma_t^2) B0^{-1}'.
inline Matrix predictive_covariance(const ParameterState& state, Eigen::Index t) {
  Eigen::PartialPivLU<Matrix> lu(state.b0);
  const double scale = std::max(1.0, state.b0.cwiseAbs().maxCoeff());
  if (std::abs(lu.determinant()) <= 1e-12 * std::pow(scale, state.shocks())) throw NumericalError("B0 is singular");
  const Matrix inv = lu.inverse();
  Matrix sigma = inv * state.sigma2_at(t).asDiagonal() * inv.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

// E[sigma^2_{n, s_{n,t}}] under the ergodic distribution of the shock's chain.
inline double unconditional_variance(const ParameterState& state, int shock) {
  const auto proc = static_cast<std::size_t>(state.process_of_shock[static_cast<std::size_t>(shock)]);
  const Vector& v = state.variances[static_cast<std::size_t>(shock)];
  if (state.transitions.empty()) return v.mean();
  return ergodic_probabilities(state.transitions[proc]).dot(v);
}

}  // namespace hmsh
