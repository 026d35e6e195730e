#pragma once

// Discrete regime machinery. Regimes are 0-based in code: a path over M
// regimes takes values in {0, ..., M-1}. The initial probability vector is
// the distribution of the first in-sample state (t = 0).

#include "hmsh/distributions.hpp"
#include "hmsh/error.hpp"
#include "hmsh/linalg.hpp"
#include "hmsh/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

namespace hmsh {

using TransitionMatrix = Matrix;
using StatePath = std::vector<int>;

enum class MarkovKind { Stationary, Sparse, Exogenous };

struct MarkovSpec {
  int regimes = 1;
  MarkovKind kind = MarkovKind::Sparse;
  int min_occupancy = 0;
  StatePath fixed_path;  // Exogenous only

  static MarkovSpec stationary(int m) { return {m, MarkovKind::Stationary, 3, {}}; }
  static MarkovSpec sparse(int m) { return {m, MarkovKind::Sparse, 0, {}}; }
  static MarkovSpec exogenous(StatePath path, int m) { return {m, MarkovKind::Exogenous, 0, std::move(path)}; }

  void validate() const {
    if (regimes < 1) throw ParameterError("regime count must be at least 1");
    if (kind == MarkovKind::Stationary && min_occupancy != 3)
      throw ParameterError("stationary Markov processes require min_occupancy = 3");
    if (kind != MarkovKind::Stationary && min_occupancy != 0)
      throw ParameterError("sparse and exogenous processes require min_occupancy = 0");
    if (kind == MarkovKind::Exogenous) {
      for (int s : fixed_path)
        if (s < 0 || s >= regimes) throw ParameterError("exogenous path regime out of range");
    }
  }
};

inline void validate_transition(const TransitionMatrix& p, double tol = 1e-12) {
  if (p.rows() != p.cols() || p.rows() < 1) throw ParameterError("transition matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if ((p.row(i).array() < 0.0).any() || (p.row(i).array() > 1.0).any())
      throw ParameterError("transition probabilities must lie in [0, 1]");
    if (std::abs(p.row(i).sum() - 1.0) > tol) throw ParameterError("transition matrix rows must sum to 1");
  }
}

inline std::vector<int> regime_occupancy(const StatePath& path, int regimes) {
  std::vector<int> counts(static_cast<std::size_t>(regimes), 0);
  for (int s : path) {
    if (s < 0 || s >= regimes) throw ParameterError("state path regime out of range");
    ++counts[static_cast<std::size_t>(s)];
  }
  return counts;
}

// counts(i, j) = number of t >= 1 with path[t-1] = i and path[t] = j.
inline Matrix transition_counts(const StatePath& path, int regimes) {
  Matrix counts = Matrix::Zero(regimes, regimes);
  for (std::size_t t = 1; t < path.size(); ++t) {
    const int from = path[t - 1];
    const int to = path[t];
    if (from < 0 || from >= regimes || to < 0 || to >= regimes)
      throw ParameterError("state path regime out of range");
    counts(from, to) += 1.0;
  }
  return counts;
}

inline bool enforce_min_occupancy(const StatePath& path, const MarkovSpec& spec) {
  if (spec.min_occupancy <= 0) return true;
  const auto counts = regime_occupancy(path, spec.regimes);
  for (int c : counts)
    if (c < spec.min_occupancy) return false;
  return true;
}

struct FilterResult {
  Matrix filtered;  // T x M, row t = P(s_t | data up to t)
  Matrix predicted; // T x M, row t = P(s_t | data up to t-1)
  double log_likelihood = 0.0;
};

// Hamilton filter in scaled form; each likelihood row is shifted by its max
// before exponentiation so very small likelihoods do not underflow.
inline FilterResult forward_filter(const Matrix& regime_loglik, const TransitionMatrix& transition,
                                   const SimplexPoint& initial) {
  const auto t_len = regime_loglik.rows();
  const auto m = regime_loglik.cols();
  if (transition.rows() != m || transition.cols() != m || initial.size() != m)
    throw ParameterError("FFBS dimension mismatch");
  FilterResult out;
  out.filtered.resize(t_len, m);
  out.predicted.resize(t_len, m);
  Vector pred = initial;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    out.predicted.row(t) = pred.transpose();
    const double row_max = regime_loglik.row(t).maxCoeff();
    if (!std::isfinite(row_max)) throw NumericalError("degenerate regime likelihood at t = " + std::to_string(t));
    Vector joint = pred.array() * (regime_loglik.row(t).transpose().array() - row_max).exp();
    const double total = joint.sum();
    if (!(total > 0.0)) throw NumericalError("degenerate regime likelihood at t = " + std::to_string(t));
    out.log_likelihood += row_max + std::log(total);
    joint /= total;
    out.filtered.row(t) = joint.transpose();
    pred = transition.transpose() * joint;
  }
  return out;
}

inline int sample_index(const Vector& probs, Rng& rng) {
  const double total = probs.sum();
  double u = rng.uniform() * total;
  const auto m = probs.size();
  for (Eigen::Index i = 0; i < m; ++i) {
    u -= probs(i);
    if (u < 0.0) return static_cast<int>(i);
  }
  for (Eigen::Index i = m - 1; i >= 0; --i)
    if (probs(i) > 0.0) return static_cast<int>(i);
  return static_cast<int>(m - 1);
}

// Forward filter, backward sampler: one draw from p(s_0..s_{T-1} | data).
inline StatePath ffbs(const Matrix& regime_loglik, const TransitionMatrix& transition, const SimplexPoint& initial,
                      Rng& rng) {
  const auto t_len = regime_loglik.rows();
  const auto m = regime_loglik.cols();
  StatePath path(static_cast<std::size_t>(t_len), 0);
  if (t_len == 0) return path;
  if (m == 1) {
    for (Eigen::Index t = 0; t < t_len; ++t)
      if (!std::isfinite(regime_loglik(t, 0))) throw NumericalError("degenerate regime likelihood");
    return path;
  }
  const FilterResult f = forward_filter(regime_loglik, transition, initial);
  path[static_cast<std::size_t>(t_len - 1)] = sample_index(f.filtered.row(t_len - 1).transpose(), rng);
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const int next = path[static_cast<std::size_t>(t + 1)];
    const Vector w = f.filtered.row(t).transpose().array() * transition.col(next).array();
    path[static_cast<std::size_t>(t)] = sample_index(w, rng);
  }
  return path;
}

// Exact smoothed marginals P(s_t = m | all data) by forward-backward.
inline Matrix smoothed_probabilities(const Matrix& regime_loglik, const TransitionMatrix& transition,
                                     const SimplexPoint& initial) {
  const auto t_len = regime_loglik.rows();
  const auto m = regime_loglik.cols();
  const FilterResult f = forward_filter(regime_loglik, transition, initial);
  Matrix smooth(t_len, m);
  if (t_len == 0) return smooth;
  smooth.row(t_len - 1) = f.filtered.row(t_len - 1);
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const Vector pred_next = transition.transpose() * f.filtered.row(t).transpose();
    Vector ratio(m);
    for (Eigen::Index j = 0; j < m; ++j) ratio(j) = pred_next(j) > 0.0 ? smooth(t + 1, j) / pred_next(j) : 0.0;
    smooth.row(t) = (f.filtered.row(t).transpose().array() * (transition * ratio).array()).transpose();
  }
  return smooth;
}

// Row-wise Dirichlet posterior concentrations: prior + transition counts,
// plus an optional stickiness boost on the diagonal.
inline Matrix transition_posterior_concentration(const StatePath& path, double prior_concentration,
                                                 const MarkovSpec& spec, double diagonal_boost = 0.0) {
  detail::require_positive(prior_concentration, "transition concentration");
  Matrix conc = transition_counts(path, spec.regimes).array() + prior_concentration;
  conc.diagonal().array() += diagonal_boost;
  return conc;
}

inline TransitionMatrix sample_transition(const StatePath& path, double prior_concentration, const MarkovSpec& spec,
                                          Rng& rng, double diagonal_boost = 0.0) {
  const Matrix conc = transition_posterior_concentration(path, prior_concentration, spec, diagonal_boost);
  TransitionMatrix p(spec.regimes, spec.regimes);
  for (int i = 0; i < spec.regimes; ++i) p.row(i) = dirichlet_sample(conc.row(i).transpose(), rng).transpose();
  return p;
}

inline SimplexPoint sample_initial(int path_start, double prior_concentration, int regimes, Rng& rng) {
  detail::require_positive(prior_concentration, "initial concentration");
  if (path_start < 0 || path_start >= regimes) throw ParameterError("initial regime out of range");
  Vector conc = Vector::Constant(regimes, prior_concentration);
  conc(path_start) += 1.0;
  return dirichlet_sample(conc, rng);
}

// Draw a path from the Markov chain itself (no data).
inline StatePath simulate_chain(const TransitionMatrix& transition, const SimplexPoint& initial, std::size_t length,
                                Rng& rng) {
  StatePath path(length, 0);
  if (length == 0) return path;
  path[0] = sample_index(initial, rng);
  for (std::size_t t = 1; t < length; ++t) path[t] = sample_index(transition.row(path[t - 1]).transpose(), rng);
  return path;
}

// Stationary distribution pi with pi P = pi, sum(pi) = 1, from the stacked
// least-squares system [P' - I; 1'] pi = [0; 1]. Throws unless exactly one
// eigenvalue of P has unit modulus.
inline SimplexPoint ergodic_probabilities(const TransitionMatrix& transition) {
  validate_transition(transition, 1e-10);
  const auto m = transition.rows();
  if (m == 1) return Vector::Ones(1);
  Eigen::EigenSolver<Matrix> eig(transition, false);
  int unit = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    if (std::abs(eig.eigenvalues()(i)) > 1.0 - 1e-9) ++unit;
  if (unit != 1) throw NumericalError("transition matrix has no unique stationary distribution (reducible or periodic)");
  Matrix lhs(m + 1, m);
  lhs.topRows(m) = transition.transpose() - Matrix::Identity(m, m);
  lhs.bottomRows(1).setOnes();
  Vector rhs = Vector::Zero(m + 1);
  rhs(m) = 1.0;
  Vector pi = lhs.colPivHouseholderQr().solve(rhs);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

}  // namespace hmsh
