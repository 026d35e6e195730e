#pragma once

// Gibbs sampler for the SVAR with (heterogeneous) Markov-switching
// heteroskedasticity. One sweep updates, in this order:
//   state paths -> transition and initial probabilities -> normalized
//   variances -> B0 (row by row) -> A (row by row) -> shrinkage hierarchies.
// The order is part of the reproducibility contract.

#include "hmsh/distributions.hpp"
#include "hmsh/error.hpp"
#include "hmsh/linalg.hpp"
#include "hmsh/markov.hpp"
#include "hmsh/model.hpp"
#include "hmsh/rng.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace hmsh {

struct SamplerConfig {
  int total_draws = 2000;
  int burn_in = -1;  // negative: half of total_draws
  int thinning = 1;
  std::uint64_t seed = 42;
  int occupancy_retry_cap = 100;
  bool likelihood = true;  // false: prior-only chain

  int effective_burn_in() const { return burn_in < 0 ? total_draws / 2 : burn_in; }

  void validate() const {
    if (total_draws < 1) throw ConfigError("sampler.draws", "must be positive");
    if (thinning < 1) throw ConfigError("sampler.thinning", "must be positive");
    if (effective_burn_in() >= total_draws) throw ConfigError("sampler.burn_in", "must be smaller than sampler.draws");
    if (occupancy_retry_cap < 1) throw ConfigError("sampler.occupancy_retry_cap", "must be positive");
  }
};

namespace detail {

inline Eigen::LLT<Matrix> checked_llt(const Matrix& precision, const char* block) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(block) + ": posterior precision not positive definite");
  return llt;
}

// Draw from N(P^{-1} l, P^{-1}) given the Cholesky factor of P.
inline Vector draw_gaussian_canonical(const Eigen::LLT<Matrix>& llt, const Vector& linear, Rng& rng) {
  Vector z(linear.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  Vector mean = llt.solve(linear);
  return mean + llt.matrixU().solve(z);
}

inline double ig2_mean_or_scale(double scale, double shape) { return shape > 2.0 ? scale / (shape - 2.0) : scale; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Autoregressive block

// Per-sweep quantities for the A block: X' W_k X with W_k = diag(1/sigma^2_{k,t}).
struct ARowCache {
  std::vector<Matrix> xwx;  // N matrices, K x K
  Matrix residuals;         // T x N, structural residuals kept current
};

inline ARowCache prepare_a_cache(const TimeSeriesData& data, const ParameterState& state) {
  ARowCache cache;
  const auto n = data.N();
  cache.residuals = structural_residuals(data, state);
  cache.xwx.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    Vector w(data.T());
    for (Eigen::Index t = 0; t < data.T(); ++t) w(t) = 1.0 / state.sigma2(static_cast<int>(k), t);
    cache.xwx[static_cast<std::size_t>(k)] = data.x.transpose() * w.asDiagonal() * data.x;
  }
  return cache;
}

// Full conditional of row n of A given every other block. Row a_n enters all
// structural equations through column n of B0:
//   u_{k,t} = c_{k,t} - B0_{kn} a_n x_t,  c_{k,t} = u_{k,t} + B0_{kn} a_n x_t,
// so the Gaussian conditional pools the N equations with weights
// B0_{kn}^2 / sigma^2_{k,t}. Updates cache.residuals in place.
inline Vector sample_a_row(int n, const TimeSeriesData& data, const ParameterState& state, const PriorSpec& prior,
                           ARowCache& cache, Rng& rng, bool likelihood = true) {
  const auto shocks = data.N();
  const auto idx = free_indices(prior.a_free.row(n));
  const auto r = static_cast<Eigen::Index>(idx.size());
  Vector row = Vector::Zero(data.K());
  if (r == 0) return row;
  const double gamma = prior.fixed_gamma_a ? *prior.fixed_gamma_a : state.shrinkage_a.gamma(n);

  Matrix precision = Matrix::Zero(r, r);
  Vector linear(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double prior_prec = 1.0 / (gamma * prior.a_scale(idx[static_cast<std::size_t>(i)]));
    precision(i, i) = prior_prec;
    linear(i) = prior_prec * prior.a_mean(n, idx[static_cast<std::size_t>(i)]);
  }

  const Vector a_old = state.a.row(n).transpose();
  if (likelihood && data.T() > 0) {
    Matrix s = Matrix::Zero(data.K(), data.K());
    Vector l = Vector::Zero(data.K());
    for (Eigen::Index k = 0; k < shocks; ++k) {
      const double b = state.b0(k, n);
      if (b == 0.0) continue;
      const Matrix& xwx = cache.xwx[static_cast<std::size_t>(k)];
      Vector wu(data.T());
      for (Eigen::Index t = 0; t < data.T(); ++t) wu(t) = cache.residuals(t, k) / state.sigma2(static_cast<int>(k), t);
      s.noalias() += (b * b) * xwx;
      l.noalias() += b * (data.x.transpose() * wu) + (b * b) * (xwx * a_old);
    }
    for (Eigen::Index i = 0; i < r; ++i) {
      linear(i) += l(idx[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < r; ++j) precision(i, j) += s(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
  }

  const auto llt = detail::checked_llt(precision, "A row");
  const Vector draw = detail::draw_gaussian_canonical(llt, linear, rng);
  for (Eigen::Index i = 0; i < r; ++i) row(idx[static_cast<std::size_t>(i)]) = draw(i);

  if (data.T() > 0 && data.K() > 0) {
    const Vector delta_fit = data.x * (row - a_old);  // T
    cache.residuals.noalias() -= delta_fit * state.b0.col(n).transpose();
  }
  return row;
}

// Convenience overload building the per-sweep cache from scratch.
inline Vector sample_a_row(int n, const TimeSeriesData& data, const ParameterState& state, const PriorSpec& prior,
                           Rng& rng, bool likelihood = true) {
  ARowCache cache = prepare_a_cache(data, state);
  return sample_a_row(n, data, state, prior, cache, rng, likelihood);
}

// ---------------------------------------------------------------------------
// Structural block

// Row-by-row draw of B0 from its generalized-normal full conditional
//   p(b_n | rest) ∝ |det B0|^{kappa} exp(-0.5 b_n Psi_n b_n'),
//   Psi_n = gamma_{B.n}^{-1} Omega_{B.n}^{-1} + V_n (sum_t eps_t eps_t' / sigma^2_{n,t}) V_n',
//   kappa = T + nu_B - N.
// In the whitened coordinates beta = b_n L (Psi_n = L L') the determinant is
// linear in beta along one direction; that coordinate has density
// ∝ |w|^kappa exp(-w^2/2) (w^2 ~ Gamma((kappa+1)/2, 2), random sign) and the
// orthogonal ones are standard normal.
inline Matrix sample_b0(const TimeSeriesData& data, const ParameterState& state, const PriorSpec& prior, Rng& rng,
                        bool likelihood = true) {
  const auto n = data.N();
  Matrix b0 = state.b0;
  Matrix eps = data.y;
  if (data.K() > 0) eps.noalias() -= data.x * state.a.transpose();
  const double t_eff = likelihood ? static_cast<double>(data.T()) : 0.0;
  const double kappa = t_eff + prior.b_shape - static_cast<double>(n);

  for (Eigen::Index row = 0; row < n; ++row) {
    const auto idx = free_indices(prior.b_free.row(row));
    const auto r = static_cast<Eigen::Index>(idx.size());
    const Matrix v = selector(prior.b_free.row(row));  // r x N
    const double gamma = prior.fixed_gamma_b ? *prior.fixed_gamma_b : state.shrinkage_b.gamma(row);

    Matrix precision = prior.b_scale[static_cast<std::size_t>(row)].inverse() / gamma;
    if (likelihood && data.T() > 0) {
      Vector w(data.T());
      for (Eigen::Index t = 0; t < data.T(); ++t) w(t) = 1.0 / state.sigma2(static_cast<int>(row), t);
      const Matrix moments = eps.transpose() * w.asDiagonal() * eps;  // N x N
      precision.noalias() += v * moments * v.transpose();
    }
    precision = 0.5 * (precision + precision.transpose());
    const auto llt = detail::checked_llt(precision, "B0 row");

    // direction orthogonal to the other rows
    Vector w_dir;
    if (n == 1) {
      w_dir = Vector::Ones(1);
    } else {
      Matrix others(n - 1, n);
      Eigen::Index k = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != row) others.row(k++) = b0.row(i);
      Eigen::HouseholderQR<Matrix> qr(others.transpose());
      const Matrix q = qr.householderQ();
      w_dir = q.col(n - 1);
    }
    // det(B0) = b_n V w * c, with c independent of b_n; in whitened
    // coordinates b_n = beta L^{-1}, so det ∝ beta . (L^{-1} V w).
    Vector dir = llt.matrixL().solve(v * w_dir);
    const double dir_norm = dir.norm();
    if (!(dir_norm > 0.0)) throw NumericalError("B0 row: degenerate determinant direction");
    dir /= dir_norm;
    Matrix basis;
    {
      Eigen::HouseholderQR<Matrix> qr(dir);
      basis = qr.householderQ();  // first column = ±dir
    }
    Vector alpha(r);
    const double w2 = rng.gamma(0.5 * (kappa + 1.0), 2.0);
    alpha(0) = (rng.coin() ? 1.0 : -1.0) * std::sqrt(w2);
    for (Eigen::Index i = 1; i < r; ++i) alpha(i) = rng.normal();
    const Vector beta = basis * alpha;
    const Vector b_free = llt.matrixU().solve(beta);  // L^{-T} beta
    b0.row(row).setZero();
    for (Eigen::Index i = 0; i < r; ++i) b0(row, idx[static_cast<std::size_t>(i)]) = b_free(i);
  }
  return b0;
}

// ---------------------------------------------------------------------------
// Normalized variances

// IGD full-conditional parameters: z_m ~ IG2(s + sum_{t: s_t = m} u_t^2, nu + T_m).
inline IgdParams variance_full_conditional(const Vector& residuals_n, const StatePath& path_n, int regimes,
                                           const PriorSpec& prior, bool likelihood = true) {
  Vector scales = Vector::Constant(regimes, prior.variance_prior_scale);
  Vector shapes = Vector::Constant(regimes, prior.variance_prior_shape);
  if (likelihood) {
    if (static_cast<Eigen::Index>(path_n.size()) != residuals_n.size())
      throw ParameterError("path and residual lengths differ");
    for (Eigen::Index t = 0; t < residuals_n.size(); ++t) {
      const int m = path_n[static_cast<std::size_t>(t)];
      scales(m) += residuals_n(t) * residuals_n(t);
      shapes(m) += 1.0;
    }
  }
  return IgdParams(std::move(scales), std::move(shapes));
}

// sigma^2_{n,m} = M_n x_m with x ~ IGD; mean over regimes is 1 by construction.
inline Vector sample_variances(const IgdParams& params, Rng& rng) {
  const auto m = params.dimension();
  if (m == 1) return Vector::Ones(1);
  Vector x = igd_sample(params, rng);
  Vector out = static_cast<double>(m) * x;
  // exact mean 1 up to one rounding
  out /= out.mean();
  return out;
}

inline Vector sample_variances(int n, const Vector& residuals_n, const StatePath& path_n, int regimes,
                               const PriorSpec& prior, Rng& rng, bool likelihood = true) {
  (void)n;
  return sample_variances(variance_full_conditional(residuals_n, path_n, regimes, prior, likelihood), rng);
}

// ---------------------------------------------------------------------------
// Shrinkage hierarchies
//   gamma_n | s_n ~ IG2(s_n, nu),  s_n | s ~ G(scale s, shape a),  s ~ IG2(s_, nu_)
// Full conditionals:
//   gamma_n ~ IG2(s_n + q_n, nu + r_n + extra_shape)
//   s_n     ~ G(scale 1/(1/s + 1/(2 gamma_n)), shape a + nu/2)
//   s       ~ IG2(s_ + 2 sum s_n, nu_ + 2 N a)
// q_n is the prior quadratic form of row n and r_n its dimension.
inline ShrinkageState sample_shrinkage(const Vector& quadratic, const Vector& dims, const ShrinkageHyper& h,
                                       const ShrinkageState& current, Rng& rng, double extra_shape = 0.0) {
  const auto n = quadratic.size();
  ShrinkageState out = current;
  out.gamma.resize(n);
  out.local.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double scale = current.local(i) + quadratic(i);
    if (!(scale > 0.0) || !std::isfinite(scale)) throw NumericalError("shrinkage: nonpositive scale accumulation");
    out.gamma(i) = ig2_sample(scale, h.nu_gamma + dims(i) + extra_shape, rng);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rate = 1.0 / current.global + 0.5 / out.gamma(i);
    out.local(i) = gamma_sample(h.a_local + 0.5 * h.nu_gamma, 1.0 / rate, rng);
  }
  const double global_scale = h.s_global + 2.0 * out.local.sum();
  out.global = ig2_sample(global_scale, h.nu_global + 2.0 * static_cast<double>(n) * h.a_local, rng);
  return out;
}

inline ShrinkageState prior_mean_shrinkage(const ShrinkageHyper& h, Eigen::Index n) {
  ShrinkageState s;
  s.global = detail::ig2_mean_or_scale(h.s_global, h.nu_global);
  s.local = Vector::Constant(n, h.a_local * s.global);
  s.gamma = Vector::Constant(n, detail::ig2_mean_or_scale(s.local(0), h.nu_gamma));
  return s;
}

inline ShrinkageState fixed_shrinkage(double gamma, Eigen::Index n) {
  return {Vector::Constant(n, gamma), Vector::Ones(n), 1.0};
}

// Quadratic forms entering the A hierarchy.
inline void a_quadratic_forms(const ParameterState& state, const PriorSpec& prior, Vector& q, Vector& r) {
  const auto n = state.a.rows();
  q = Vector::Zero(n);
  r = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < state.a.cols(); ++j) {
      if (!prior.a_free(i, j)) continue;
      const double d = state.a(i, j) - prior.a_mean(i, j);
      q(i) += d * d / prior.a_scale(j);
      r(i) += 1.0;
    }
  }
}

inline void b_quadratic_forms(const ParameterState& state, const PriorSpec& prior, Vector& q, Vector& r) {
  const auto n = state.b0.rows();
  q = Vector::Zero(n);
  r = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = free_indices(prior.b_free.row(i));
    Vector b(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) b(static_cast<Eigen::Index>(j)) = state.b0(i, idx[j]);
    q(i) = b.dot(prior.b_scale[static_cast<std::size_t>(i)].ldlt().solve(b));
    r(i) = static_cast<double>(idx.size());
  }
}

// ---------------------------------------------------------------------------
// Sampler

// T x M log-likelihood of each regime of Markov process `process`: the sum
// over the shocks it drives of log N(u_{n,t}; 0, sigma^2_{n,m}).
inline Matrix regime_loglikelihoods(const Matrix& u, const ParameterState& s, const VolatilitySpec& spec, int process) {
  constexpr double kLogTwoPi = 1.8378770664093453;
  const int m = spec.regimes;
  Matrix loglik = Matrix::Zero(u.rows(), m);
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    if (spec.process_of(static_cast<int>(i)) != process) continue;
    const Vector& var = s.variances[static_cast<std::size_t>(i)];
    for (int r = 0; r < m; ++r) {
      const double c = -0.5 * (kLogTwoPi + std::log(var(r)));
      loglik.col(r).array() += c - (0.5 / var(r)) * u.col(i).array().square();
    }
  }
  return loglik;
}

class Sampler {
 public:
  Sampler(TimeSeriesData data, VolatilitySpec spec, PriorSpec prior, SamplerConfig config)
      : data_(std::move(data)), spec_(std::move(spec)), prior_(std::move(prior)), config_(config) {
    spec_.validate();
    prior_.validate(data_.N(), data_.K());
    config_.validate();
    if (data_.N() < 1) throw DataError("no variables");
  }

  const TimeSeriesData& data() const noexcept { return data_; }
  const VolatilitySpec& spec() const noexcept { return spec_; }
  const PriorSpec& prior() const noexcept { return prior_; }
  const SamplerConfig& config() const noexcept { return config_; }
  SamplerDiagnostics& diagnostics() noexcept { return diagnostics_; }

  int processes() const { return spec_.process_count(static_cast<int>(data_.N())); }

  ParameterState initial_state(Rng& rng) const {
    const auto n = data_.N();
    const auto k = data_.K();
    const int m = spec_.regimes;
    ParameterState s;
    s.a = prior_.a_mean;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < k; ++j)
        if (!prior_.a_free(i, j)) s.a(i, j) = 0.0;
    s.b0 = initial_b0();
    s.variances.assign(static_cast<std::size_t>(n), Vector::Ones(m));
    s.process_of_shock.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s.process_of_shock[static_cast<std::size_t>(i)] = spec_.process_of(i);
    const MarkovSpec ms = spec_.markov_spec(data_.T());
    for (int p = 0; p < processes(); ++p) {
      if (spec_.variant == VolatilityVariant::Exh) {
        s.paths.push_back(ms.fixed_path);
        continue;
      }
      TransitionMatrix tp(m, m);
      for (int i = 0; i < m; ++i)
        tp.row(i) = dirichlet_sample(Vector::Constant(m, prior_.transition_concentration), rng).transpose();
      Vector init = dirichlet_sample(Vector::Constant(m, prior_.initial_concentration), rng);
      StatePath path = simulate_chain(tp, init, static_cast<std::size_t>(data_.T()), rng);
      for (int attempt = 0; attempt < config_.occupancy_retry_cap && !enforce_min_occupancy(path, ms); ++attempt)
        path = simulate_chain(tp, init, static_cast<std::size_t>(data_.T()), rng);
      if (!enforce_min_occupancy(path, ms)) path = block_path(data_.T(), m);
      s.paths.push_back(std::move(path));
      s.transitions.push_back(std::move(tp));
      s.initials.push_back(std::move(init));
    }
    s.shrinkage_a = prior_.fixed_gamma_a ? fixed_shrinkage(*prior_.fixed_gamma_a, n) : prior_mean_shrinkage(prior_.a_hyper, n);
    s.shrinkage_b = prior_.fixed_gamma_b ? fixed_shrinkage(*prior_.fixed_gamma_b, n) : prior_mean_shrinkage(prior_.b_hyper, n);
    s.variance_posterior.assign(static_cast<std::size_t>(n),
                                IgdParams(Vector::Constant(m, prior_.variance_prior_scale),
                                          Vector::Constant(m, prior_.variance_prior_shape)));
    return s;
  }

  // One Gibbs sweep in the fixed block order.
  void sweep(ParameterState& s, Rng& rng) {
    const bool lik = config_.likelihood;
    const auto n = data_.N();
    Matrix u = structural_residuals(data_, s);

    sample_paths(s, u, rng);
    if (spec_.variant != VolatilityVariant::Exh) {
      const MarkovSpec ms = spec_.markov_spec(data_.T());
      for (int p = 0; p < processes(); ++p) {
        const StatePath& path = s.paths[static_cast<std::size_t>(p)];
        s.transitions[static_cast<std::size_t>(p)] =
            sample_transition(path, prior_.transition_concentration, ms, rng, prior_.transition_stickiness);
        s.initials[static_cast<std::size_t>(p)] =
            path.empty() ? dirichlet_sample(Vector::Constant(spec_.regimes, prior_.initial_concentration), rng)
                         : sample_initial(path.front(), prior_.initial_concentration, spec_.regimes, rng);
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      IgdParams post = variance_full_conditional(u.col(i), s.path_of(static_cast<int>(i)), spec_.regimes, prior_, lik);
      s.variances[static_cast<std::size_t>(i)] = sample_variances(post, rng);
      s.variance_posterior[static_cast<std::size_t>(i)] = std::move(post);
    }
    s.b0 = sample_b0(data_, s, prior_, rng, lik);
    if (data_.K() > 0) {
      ARowCache cache = prepare_a_cache(data_, s);
      for (Eigen::Index i = 0; i < n; ++i) s.a.row(i) = sample_a_row(static_cast<int>(i), data_, s, prior_, cache, rng, lik).transpose();
    }
    Vector q, r;
    if (!prior_.fixed_gamma_a && data_.K() > 0) {
      a_quadratic_forms(s, prior_, q, r);
      s.shrinkage_a = sample_shrinkage(q, r, prior_.a_hyper, s.shrinkage_a, rng);
    }
    if (!prior_.fixed_gamma_b) {
      b_quadratic_forms(s, prior_, q, r);
      s.shrinkage_b = sample_shrinkage(q, r, prior_.b_hyper, s.shrinkage_b, rng, prior_.b_shape - static_cast<double>(n));
    }
    ++diagnostics_.sweeps;
  }

  // Regime paths given residuals; EXH paths never change. Stationary
  // processes are re-drawn until every regime holds at least three periods;
  // after occupancy_retry_cap failures the previous path is kept.
  void sample_paths(ParameterState& s, const Matrix& u, Rng& rng) {
    if (spec_.variant == VolatilityVariant::Exh) return;
    const int m = spec_.regimes;
    const auto t_len = data_.T();
    const MarkovSpec ms = spec_.markov_spec(t_len);
    for (int p = 0; p < processes(); ++p) {
      const Matrix loglik = config_.likelihood ? regime_loglikelihoods(u, s, spec_, p) : Matrix::Zero(t_len, m);
      const auto& tp = s.transitions[static_cast<std::size_t>(p)];
      const auto& init = s.initials[static_cast<std::size_t>(p)];
      StatePath draw = ffbs(loglik, tp, init, rng);
      if (ms.min_occupancy > 0) {
        int attempts = 1;
        while (!enforce_min_occupancy(draw, ms) && attempts < config_.occupancy_retry_cap) {
          ++diagnostics_.occupancy_redraws;
          draw = ffbs(loglik, tp, init, rng);
          ++attempts;
        }
        if (!enforce_min_occupancy(draw, ms)) {
          ++diagnostics_.occupancy_redraws;
          ++diagnostics_.occupancy_fallbacks;
          continue;
        }
      }
      s.paths[static_cast<std::size_t>(p)] = std::move(draw);
    }
  }

  // Extends paths to the current sample length (after the data window grew).
  void extend_state(ParameterState& s, Rng& rng) const {
    const auto t_len = static_cast<std::size_t>(data_.T());
    if (spec_.variant == VolatilityVariant::Exh) {
      s.paths.assign(1, spec_.exh_path(data_.T()));
      return;
    }
    for (int p = 0; p < processes(); ++p) {
      StatePath& path = s.paths[static_cast<std::size_t>(p)];
      const auto& tp = s.transitions[static_cast<std::size_t>(p)];
      if (path.size() > t_len) path.resize(t_len);
      while (path.size() < t_len) {
        const int next = path.empty() ? sample_index(s.initials[static_cast<std::size_t>(p)], rng)
                                      : sample_index(tp.row(path.back()).transpose(), rng);
        path.push_back(next);
      }
    }
  }

 private:
  static StatePath block_path(Eigen::Index t_len, int m) {
    StatePath path(static_cast<std::size_t>(t_len));
    for (Eigen::Index t = 0; t < t_len; ++t) path[static_cast<std::size_t>(t)] = static_cast<int>((t * m) / std::max<Eigen::Index>(t_len, 1));
    return path;
  }

  // Inverse lower Cholesky factor of the residual covariance, so the initial
  // structural shocks are orthonormal.
  Matrix initial_b0() const {
    const auto n = data_.N();
    const auto t_len = data_.T();
    Matrix eps = data_.y;
    if (data_.K() > 0) {
      if (t_len > data_.K() + n) {
        const Matrix coef = data_.x.colPivHouseholderQr().solve(data_.y);
        eps = data_.y - data_.x * coef;
      } else {
        eps = data_.y - data_.x * prior_.a_mean.transpose();
      }
    }
    Matrix b0 = Matrix::Identity(n, n);
    if (t_len > n) {
      Matrix centered = eps.rowwise() - eps.colwise().mean();
      Matrix cov = (centered.transpose() * centered) / static_cast<double>(t_len - 1);
      Eigen::LLT<Matrix> llt(cov);
      if (llt.info() == Eigen::Success) {
        Matrix l = llt.matrixL();
        b0 = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
      }
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (!prior_.b_free(i, j)) b0(i, j) = 0.0;
    if (std::abs(b0.determinant()) < 1e-300) {
      b0 = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double sd = t_len > 1 ? std::sqrt((eps.col(i).array() - eps.col(i).mean()).square().sum() / double(t_len - 1)) : 1.0;
        b0(i, i) = sd > 0 ? 1.0 / sd : 1.0;
      }
    }
    return b0;
  }

  TimeSeriesData data_;
  VolatilitySpec spec_;
  PriorSpec prior_;
  SamplerConfig config_;
  SamplerDiagnostics diagnostics_;
};

// Runs the chain from `start`, storing post-burn-in draws every `thinning`
// sweeps. Block failures are rethrown with the sweep index attached.
inline PosteriorSample run_sampler(const TimeSeriesData& data, const VolatilitySpec& spec, const PriorSpec& prior,
                                   const SamplerConfig& config, const ParameterState* start = nullptr) {
  Sampler sampler(data, spec, prior, config);
  Rng rng(config.seed);
  ParameterState state;
  if (start) {
    state = *start;
    sampler.extend_state(state, rng);
  } else {
    state = sampler.initial_state(rng);
  }
  PosteriorSample out;
  out.burn_in = config.effective_burn_in();
  out.thinning = config.thinning;
  out.volatility = spec;
  out.lag_order = data.lag_order;
  out.deterministic_count = data.deterministic_count;
  out.draws.reserve(static_cast<std::size_t>((config.total_draws - out.burn_in) / config.thinning + 1));
  for (int it = 0; it < config.total_draws; ++it) {
    try {
      sampler.sweep(state, rng);
      if (it >= out.burn_in && (it - out.burn_in) % config.thinning == 0) {
        state.check_invariants(&prior.a_free, &prior.b_free);
        out.draws.push_back(state);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("sweep " + std::to_string(it) + ": " + e.what());
    }
  }
  out.diagnostics = sampler.diagnostics();
  return out;
}

}  // namespace hmsh
