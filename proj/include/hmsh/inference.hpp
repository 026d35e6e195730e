#pragma once

// Post-sampling analysis: Savage-Dickey homoskedasticity verification,
// signed-permutation normalization of the shocks, impulse responses, FEVD on
// impact, shock selection and conditional standard-deviation paths.

#include "hmsh/distributions.hpp"
#include "hmsh/error.hpp"
#include "hmsh/linalg.hpp"
#include "hmsh/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace hmsh {

// ---------------------------------------------------------------------------
// Quantiles and intervals

// Sample quantile with linear interpolation between order statistics
// (h = (n - 1) p, the "type 7" rule). Values 1..100 give 5.95 at p = 0.05.
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ParameterError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Interval {
  double lower;
  double upper;
};

// Shortest interval containing ceil(mass * n) of the sorted draws; ties go to
// the lowest starting point.
inline Interval hpd_interval(std::vector<double> draws, double mass = 0.9) {
  if (draws.empty()) throw ParameterError("HPD interval of an empty sample");
  if (!(mass > 0.0 && mass <= 1.0)) throw ParameterError("HPD mass outside (0, 1]");
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9)));
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + m <= n; ++i) {
    const double w = draws[i + m - 1] - draws[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {draws[best], draws[best + m - 1]};
}

inline Interval central_interval(const std::vector<double>& draws, double mass) {
  const double tail = 0.5 * (1.0 - mass);
  return {quantile(draws, tail), quantile(draws, 1.0 - tail)};
}

// ---------------------------------------------------------------------------
// Savage-Dickey density ratio for homoskedasticity of one shock

struct SddrResult {
  double log_numerator = 0.0;
  double log_denominator = 0.0;
  double log_sddr = 0.0;
  int shock_index = 0;
  int num_draws_used = 0;
  double log_numerator_se = 0.0;  // delta-method MC standard error of log_numerator
};

// Numerator: log of the posterior-average IGD full-conditional density at the
// simplex centre (1/M, ..., 1/M). Denominator: the Dirichlet(e_sigma) prior
// log-density at the same point.
inline SddrResult compute_sddr(const PosteriorSample& sample, const PriorSpec& prior, int shock) {
  if (sample.empty()) throw ParameterError("SDDR needs a non-empty posterior sample");
  const auto& first = sample.draws.front();
  if (shock < 0 || shock >= first.shocks()) throw ParameterError("SDDR shock index out of range");
  const auto m = first.variance_posterior[static_cast<std::size_t>(shock)].dimension();
  if (m < 2) throw ParameterError("SDDR undefined for a single-regime shock");
  const Vector centre = Vector::Constant(m, 1.0 / static_cast<double>(m));

  std::vector<double> logs;
  logs.reserve(sample.size());
  for (const auto& d : sample.draws) logs.push_back(igd_logpdf(centre, d.variance_posterior[static_cast<std::size_t>(shock)]));
  const double lse = log_sum_exp(logs);
  const double n = static_cast<double>(logs.size());

  SddrResult r;
  r.shock_index = shock;
  r.num_draws_used = static_cast<int>(logs.size());
  r.log_numerator = lse - std::log(n);
  r.log_denominator = dirichlet_logpdf(centre, Vector::Constant(m, prior.variance_concentration));
  r.log_sddr = r.log_numerator - r.log_denominator;
  // weights relative to their mean; the SE of log(mean) is sd(w)/(mean(w) sqrt(n))
  double acc = 0.0;
  for (double l : logs) {
    const double w = std::exp(l - r.log_numerator);
    acc += (w - 1.0) * (w - 1.0);
  }
  r.log_numerator_se = n > 1 ? std::sqrt(acc / (n - 1.0) / n) : std::numeric_limits<double>::infinity();
  return r;
}

// l-value rule: reject homoskedasticity when SDDR < 1.
inline bool decide_l_value(const SddrResult& r) { return r.log_sddr < 0.0; }

// q-value rule: the 5th percentile (type 7) of SDDR values simulated under
// the null. Rejection is `value < critical`.
inline double critical_q_value(const std::vector<double>& null_values, double level = 0.05) {
  if (null_values.size() < 20) throw ParameterError("critical q-value needs at least 20 null values");
  return quantile(null_values, level);
}

// ---------------------------------------------------------------------------
// Impulse responses and FEVD

struct IrfArray {
  std::vector<Matrix> responses;  // h = 0..H; (i, j): variable i, shock j

  int horizon() const { return static_cast<int>(responses.size()) - 1; }
  double operator()(int h, Eigen::Index i, Eigen::Index j) const { return responses[static_cast<std::size_t>(h)](i, j); }
};

inline Matrix checked_inverse(const Matrix& b0) {
  Eigen::PartialPivLU<Matrix> lu(b0);
  const double scale = std::max(1.0, b0.cwiseAbs().maxCoeff());
  if (!(std::abs(lu.determinant()) > 1e-12 * std::pow(scale, b0.rows()))) throw NumericalError("B0 is singular");
  return lu.inverse();
}

// Theta_0 = B0^{-1}, Theta_h = sum_{i=1..min(h,p)} A_i Theta_{h-i}, where A_i
// is the N x N block of A multiplying y_{t-i}. Deterministic columns are ignored.
inline IrfArray impulse_responses(const ParameterState& state, int lag_order, int horizon) {
  if (horizon < 0) throw ParameterError("IRF horizon must be nonnegative");
  const auto n = state.b0.rows();
  if (state.a.cols() < n * lag_order) throw ParameterError("lag order exceeds the columns of A");
  IrfArray out;
  out.responses.push_back(checked_inverse(state.b0));
  for (int h = 1; h <= horizon; ++h) {
    Matrix theta = Matrix::Zero(n, n);
    for (int i = 1; i <= std::min(h, lag_order); ++i)
      theta.noalias() += state.a.block(0, (i - 1) * n, n, n) * out.responses[static_cast<std::size_t>(h - i)];
    out.responses.push_back(std::move(theta));
  }
  return out;
}

// share(i, j) = [B0^{-1}]_{ij}^2 / sum_k [B0^{-1}]_{ik}^2 (unit shock variances).
inline Matrix fevd_impact(const ParameterState& state) {
  Matrix sq = checked_inverse(state.b0).array().square().matrix();
  for (Eigen::Index i = 0; i < sq.rows(); ++i) {
    const double total = sq.row(i).sum();
    if (!(total > 0.0)) throw NumericalError("FEVD: zero row in B0^{-1}");
    sq.row(i) /= total;
  }
  return sq;
}

// Per draw, the shock with the largest impact FEVD share of the variable;
// ties go to the lowest shock index.
inline std::vector<int> select_shock(const PosteriorSample& sample, int variable) {
  std::vector<int> out;
  out.reserve(sample.size());
  for (const auto& d : sample.draws) {
    if (variable < 0 || variable >= d.shocks()) throw ParameterError("variable index out of range");
    const Matrix f = fevd_impact(d);
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < f.cols(); ++j)
      if (f(variable, j) > f(variable, best)) best = j;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Signed-permutation normalization

// New shock j is old shock perm[j], with its B0 row multiplied by signs[j].
struct SignedPermutation {
  std::vector<int> perm;
  std::vector<int> signs;

  static SignedPermutation identity(int n) {
    SignedPermutation p;
    p.perm.resize(static_cast<std::size_t>(n));
    std::iota(p.perm.begin(), p.perm.end(), 0);
    p.signs.assign(static_cast<std::size_t>(n), 1);
    return p;
  }
  bool is_identity() const {
    for (std::size_t j = 0; j < perm.size(); ++j)
      if (perm[j] != static_cast<int>(j) || signs[j] != 1) return false;
    return true;
  }
  bool operator==(const SignedPermutation&) const = default;
};

// Relabels the shocks of a draw. Per-shock objects (variances, IGD
// parameters, B0 shrinkage) move with their shock; under HMSH the Markov
// processes are per shock and move too. A is indexed by variables and stays.
inline ParameterState apply(const SignedPermutation& sp, const ParameterState& s) {
  const int n = s.shocks();
  ParameterState out = s;
  const bool per_shock_processes = static_cast<int>(s.paths.size()) == n && n > 1 && [&] {
    for (int i = 0; i < n; ++i)
      if (s.process_of_shock[static_cast<std::size_t>(i)] != i) return false;
    return true;
  }();
  for (int j = 0; j < n; ++j) {
    const auto src = static_cast<std::size_t>(sp.perm[static_cast<std::size_t>(j)]);
    const auto dst = static_cast<std::size_t>(j);
    out.b0.row(j) = static_cast<double>(sp.signs[dst]) * s.b0.row(static_cast<Eigen::Index>(src));
    out.variances[dst] = s.variances[src];
    if (!s.variance_posterior.empty()) out.variance_posterior[dst] = s.variance_posterior[src];
    if (s.shrinkage_b.gamma.size() == n) {
      out.shrinkage_b.gamma(j) = s.shrinkage_b.gamma(static_cast<Eigen::Index>(src));
      out.shrinkage_b.local(j) = s.shrinkage_b.local(static_cast<Eigen::Index>(src));
    }
    if (per_shock_processes) {
      out.paths[dst] = s.paths[src];
      if (!s.transitions.empty()) out.transitions[dst] = s.transitions[src];
      if (!s.initials.empty()) out.initials[dst] = s.initials[src];
    } else {
      out.process_of_shock[dst] = s.process_of_shock[src];
    }
  }
  return out;
}

namespace detail {

// Optimal signs for a fixed permutation give score sum_j |<ref_j, b_perm[j]>|;
// the Frobenius distance is minimized by maximizing it.
inline double permutation_score(const Matrix& dots, const std::vector<int>& perm) {
  double s = 0.0;
  for (std::size_t j = 0; j < perm.size(); ++j) s += std::abs(dots(static_cast<Eigen::Index>(j), perm[j]));
  return s;
}

// Maximum-weight assignment (Hungarian algorithm, O(n^3)); returns perm with
// perm[j] the column assigned to row j.
inline std::vector<int> max_assignment(const Matrix& weight) {
  const int n = static_cast<int>(weight.rows());
  const double big = weight.cwiseAbs().maxCoeff();
  // minimize cost = big - weight; 1-based potentials
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = (big - weight(i0 - 1, j - 1)) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) perm[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return perm;
}

}  // namespace detail

// Signed permutation minimizing ||S P B0 - reference||_F. Exhaustive over all
// N! orderings for N <= 6 (signs are optimal row by row for each ordering);
// larger systems solve the equivalent assignment problem exactly. Only a
// strictly better score replaces the incumbent, so the identity wins ties.
inline SignedPermutation find_signed_permutation(const Matrix& b0, const Matrix& reference) {
  const auto n = static_cast<int>(b0.rows());
  if (reference.rows() != n || reference.cols() != b0.cols()) throw ParameterError("reference dimension mismatch");
  const Matrix dots = reference * b0.transpose();  // (j, k) = <ref_j, b_k>
  SignedPermutation best = SignedPermutation::identity(n);
  if (n <= 6) {
    std::vector<int> perm = best.perm;
    double best_score = detail::permutation_score(dots, perm);
    const double tol = 1e-12 * std::max(1.0, best_score);
    while (std::next_permutation(perm.begin(), perm.end())) {
      const double sc = detail::permutation_score(dots, perm);
      if (sc > best_score + tol) {
        best_score = sc;
        best.perm = perm;
      }
    }
  } else {
    const std::vector<int> perm = detail::max_assignment(dots.cwiseAbs());
    if (detail::permutation_score(dots, perm) > detail::permutation_score(dots, best.perm) * (1.0 + 1e-12)) best.perm = perm;
  }
  for (int j = 0; j < n; ++j) best.signs[static_cast<std::size_t>(j)] = dots(j, best.perm[static_cast<std::size_t>(j)]) < 0.0 ? -1 : 1;
  return best;
}

// Draw whose B0 is closest (Frobenius) to the element-wise posterior median.
inline Matrix default_reference(const PosteriorSample& sample) {
  if (sample.empty()) throw ParameterError("reference of an empty sample");
  const auto n = sample.draws.front().b0.rows();
  Matrix med(n, n);
  std::vector<double> col(sample.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      for (std::size_t d = 0; d < sample.size(); ++d) col[d] = sample.draws[d].b0(i, j);
      med(i, j) = quantile(col, 0.5);
    }
  std::size_t best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < sample.size(); ++d) {
    const double v = (sample.draws[d].b0 - med).squaredNorm();
    if (v < dist) {
      dist = v;
      best = d;
    }
  }
  return sample.draws[best].b0;
}

inline PosteriorSample normalize_draws(const PosteriorSample& sample, const Matrix& reference) {
  PosteriorSample out = sample;
  for (auto& d : out.draws) {
    const auto sp = find_signed_permutation(d.b0, reference);
    if (!sp.is_identity()) d = apply(sp, d);
  }
  return out;
}

inline PosteriorSample normalize_draws(const PosteriorSample& sample) {
  if (sample.empty()) return sample;
  return normalize_draws(sample, default_reference(sample));
}

// ---------------------------------------------------------------------------
// Summaries

// Per period: posterior mean of sigma_{n, s_{n,t}} and the HPD interval,
// widened to contain the mean when a multimodal posterior puts it outside.
// Columns: mean, lower, upper.
inline Matrix conditional_sd_path(const PosteriorSample& sample, int shock, double mass = 0.9) {
  if (sample.empty()) throw ParameterError("conditional SD path of an empty sample");
  const auto t_len = static_cast<Eigen::Index>(sample.draws.front().path_of(shock).size());
  Matrix out(t_len, 3);
  std::vector<double> v(sample.size());
  for (Eigen::Index t = 0; t < t_len; ++t) {
    double sum = 0.0;
    for (std::size_t d = 0; d < sample.size(); ++d) {
      v[d] = std::sqrt(sample.draws[d].sigma2(shock, t));
      sum += v[d];
    }
    double mean = sum / static_cast<double>(v.size());
    Interval iv = hpd_interval(v, mass);
    const double eps = 1e-12 * std::max(1.0, std::abs(mean));
    // rounding in the mean snaps to the bound; a genuine gap widens the bound
    if (mean < iv.lower) {
      if (iv.lower - mean <= eps) mean = iv.lower;
      else iv.lower = mean;
    }
    if (mean > iv.upper) {
      if (mean - iv.upper <= eps) mean = iv.upper;
      else iv.upper = mean;
    }
    out(t, 0) = mean;
    out(t, 1) = iv.lower;
    out(t, 2) = iv.upper;
  }
  return out;
}

struct IrfSummary {
  std::vector<Matrix> mean, lower, upper;  // per horizon, N x N
};

inline IrfSummary summarize_irfs(const PosteriorSample& sample, int horizon, double mass = 0.9) {
  if (sample.empty()) throw ParameterError("IRF summary of an empty sample");
  std::vector<IrfArray> all;
  all.reserve(sample.size());
  for (const auto& d : sample.draws) all.push_back(impulse_responses(d, sample.lag_order, horizon));
  const auto n = sample.draws.front().b0.rows();
  IrfSummary s;
  std::vector<double> v(all.size());
  for (int h = 0; h <= horizon; ++h) {
    Matrix mean(n, n), lo(n, n), hi(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        double sum = 0.0;
        for (std::size_t d = 0; d < all.size(); ++d) {
          v[d] = all[d](h, i, j);
          sum += v[d];
        }
        mean(i, j) = sum / static_cast<double>(v.size());
        const Interval iv = hpd_interval(v, mass);
        lo(i, j) = iv.lower;
        hi(i, j) = iv.upper;
      }
    s.mean.push_back(mean);
    s.lower.push_back(lo);
    s.upper.push_back(hi);
  }
  return s;
}

}  // namespace hmsh
