#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace hmsh {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
// Restriction pattern: true marks an estimated (free) element.
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) return kNegInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

inline double log_sum_exp(const std::vector<double>& v) {
  return log_sum_exp(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

// Selector matrix V (r x k) for the free entries of one restriction row,
// so that full_row = free_row * V.
inline Matrix selector(const Eigen::Ref<const Eigen::Matrix<bool, 1, Eigen::Dynamic>>& free) {
  const auto k = free.size();
  const auto r = free.count();
  Matrix v = Matrix::Zero(r, k);
  Eigen::Index j = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (free(c)) v(j++, c) = 1.0;
  }
  return v;
}

inline std::vector<Eigen::Index> free_indices(const Eigen::Ref<const Eigen::Matrix<bool, 1, Eigen::Dynamic>>& free) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index c = 0; c < free.size(); ++c) {
    if (free(c)) idx.push_back(c);
  }
  return idx;
}

}  // namespace hmsh
