#pragma once

// Test-only reference computations, written independently of the library
// code paths they check.

#include "hmsh/distributions.hpp"
#include "hmsh/markov.hpp"

#include <cmath>
#include <vector>

namespace oracles {

using hmsh::Matrix;
using hmsh::Rng;
using hmsh::Vector;

struct HmmInstance {
  Matrix loglik;
  Matrix transition;
  Vector initial;
};

inline HmmInstance random_hmm(int t_len, int m, Rng& rng) {
  HmmInstance inst;
  inst.loglik.resize(t_len, m);
  for (int t = 0; t < t_len; ++t)
    for (int j = 0; j < m; ++j) inst.loglik(t, j) = 2.0 * rng.normal();
  inst.transition.resize(m, m);
  for (int i = 0; i < m; ++i) inst.transition.row(i) = hmsh::dirichlet_sample(Vector::Ones(m), rng).transpose();
  inst.initial = hmsh::dirichlet_sample(Vector::Ones(m), rng);
  return inst;
}

// Exact marginals P(s_t = j | data) by summing over all M^T paths.
inline Matrix enumerate_marginals(const Matrix& loglik, const Matrix& transition, const Vector& initial) {
  const int t_len = static_cast<int>(loglik.rows());
  const int m = static_cast<int>(loglik.cols());
  Matrix marg = Matrix::Zero(t_len, m);
  if (t_len == 0) return marg;
  long total = 1;
  for (int t = 0; t < t_len; ++t) total *= m;
  std::vector<int> path(static_cast<std::size_t>(t_len));
  double norm = 0.0;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int t = 0; t < t_len; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(c % m);
      c /= m;
    }
    double w = initial(path[0]) * std::exp(loglik(0, path[0]));
    for (int t = 1; t < t_len; ++t)
      w *= transition(path[static_cast<std::size_t>(t - 1)], path[static_cast<std::size_t>(t)]) *
           std::exp(loglik(t, path[static_cast<std::size_t>(t)]));
    norm += w;
    for (int t = 0; t < t_len; ++t) marg(t, path[static_cast<std::size_t>(t)]) += w;
  }
  return marg / norm;
}

// Batch-means Monte Carlo standard error of the mean of a (possibly
// autocorrelated) chain.
inline double batch_means_se(const std::vector<double>& x, int batches = 50) {
  const std::size_t n = x.size();
  const std::size_t len = n / static_cast<std::size_t>(batches);
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += x[static_cast<std::size_t>(b) * len + i];
    means.push_back(s / static_cast<double>(len));
  }
  double mu = 0.0;
  for (double v : means) mu += v;
  mu /= batches;
  double var = 0.0;
  for (double v : means) var += (v - mu) * (v - mu);
  var /= (batches - 1);
  return std::sqrt(var / batches);
}

inline double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double iid_se(const std::vector<double>& x) {
  const double mu = mean(x);
  double v = 0.0;
  for (double a : x) v += (a - mu) * (a - mu);
  v /= static_cast<double>(x.size() - 1);
  return std::sqrt(v / static_cast<double>(x.size()));
}

}  // namespace oracles
