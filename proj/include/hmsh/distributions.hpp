#pragma once

// Samplers and log-densities used by the Gibbs sampler and the Savage-Dickey
// verification.
//
// Parameter conventions
//   IG2(s, nu)  inverse gamma 2, density
//                 Gamma(nu/2)^{-1} (s/2)^{nu/2} z^{-(nu+2)/2} exp(-s / (2z)).
//               Equivalently 1/z ~ Gamma(shape = nu/2, rate = s/2), i.e. the
//               common IG(alpha, beta) with alpha = nu/2 and beta = s/2.
//               Mean s / (nu - 2) for nu > 2.
//   G(scale, shape)  gamma with density x^{shape-1} exp(-x/scale), mean
//               shape * scale.
//   IGD(s, nu)  Inverse Gamma-based Dirichlet: x = z / sum(z) for independent
//               z_m ~ IG2(s_m, nu_m).
//
// All simplex densities (IGD, Dirichlet) are with respect to Lebesgue measure
// on the first M-1 coordinates, the last coordinate being 1 minus the rest.

#include "hmsh/error.hpp"
#include "hmsh/linalg.hpp"
#include "hmsh/rng.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace hmsh {

using SimplexPoint = Vector;

namespace detail {

inline void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << what << " must be positive and finite, got " << value;
    throw ParameterError(os.str());
  }
}

inline void require_positive(const Vector& values, const char* what) {
  for (Eigen::Index i = 0; i < values.size(); ++i) require_positive(values(i), what);
}

}  // namespace detail

struct IgdParams {
  Vector scales;
  Vector shapes;

  IgdParams() = default;
  IgdParams(Vector s, Vector nu) : scales(std::move(s)), shapes(std::move(nu)) { validate(); }

  Eigen::Index dimension() const noexcept { return scales.size(); }

  void validate() const {
    if (scales.size() < 1 || scales.size() != shapes.size()) {
      throw ParameterError("IGD scales and shapes must have equal nonzero length");
    }
    detail::require_positive(scales, "IGD scale");
    detail::require_positive(shapes, "IGD shape");
  }
};

// True when x lies strictly inside the simplex and sums to one within tol.
inline bool is_interior_simplex(const Vector& x, double tol = 1e-12) {
  if (x.size() == 0) return false;
  if (x.size() == 1) return std::abs(x(0) - 1.0) <= tol;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) > 0.0) || !(x(i) < 1.0)) return false;
  }
  return std::abs(x.sum() - 1.0) <= tol;
}

inline double gamma_sample(double shape, double scale, Rng& rng) {
  detail::require_positive(shape, "gamma shape");
  detail::require_positive(scale, "gamma scale");
  return rng.gamma(shape, scale);
}

inline double gamma_logpdf(double x, double shape, double scale) {
  detail::require_positive(shape, "gamma shape");
  detail::require_positive(scale, "gamma scale");
  if (!(x > 0.0)) return kNegInf;
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

inline double ig2_sample(double scale, double shape, Rng& rng) {
  detail::require_positive(scale, "IG2 scale");
  detail::require_positive(shape, "IG2 shape");
  return scale / (2.0 * rng.gamma(0.5 * shape, 1.0));
}

inline double ig2_logpdf(double z, double scale, double shape) {
  detail::require_positive(scale, "IG2 scale");
  detail::require_positive(shape, "IG2 shape");
  if (!(z > 0.0)) return kNegInf;
  return -std::lgamma(0.5 * shape) + 0.5 * shape * std::log(0.5 * scale) -
         0.5 * (shape + 2.0) * std::log(z) - 0.5 * scale / z;
}

inline SimplexPoint igd_sample(const IgdParams& params, Rng& rng) {
  params.validate();
  const auto m = params.dimension();
  Vector z(m);
  for (Eigen::Index i = 0; i < m; ++i) z(i) = ig2_sample(params.scales(i), params.shapes(i), rng);
  return z / z.sum();
}

// log f_IGD(x | s, nu)
//   = lgamma(V/2) - sum lgamma(nu_m/2) + sum (nu_m/2) log s_m
//     - sum ((nu_m+2)/2) log x_m - (V/2) log(sum s_m/x_m),   V = sum nu_m.
inline double igd_logpdf(const SimplexPoint& x, const IgdParams& params) {
  params.validate();
  const auto m = params.dimension();
  if (x.size() != m) throw ParameterError("IGD point dimension does not match parameters");
  if (m == 1) {
    if (std::abs(x(0) - 1.0) > 1e-12) throw DomainError("one-dimensional IGD point must equal 1");
    return 0.0;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(x(i) > 0.0) || !(x(i) < 1.0)) throw DomainError("IGD point must be interior to the simplex");
  }
  const Vector log_s = params.scales.array().log();
  const Vector log_x = x.array().log();
  const double total_shape = params.shapes.sum();
  double out = std::lgamma(0.5 * total_shape);
  for (Eigen::Index i = 0; i < m; ++i) {
    out += -std::lgamma(0.5 * params.shapes(i)) + 0.5 * params.shapes(i) * log_s(i) -
           0.5 * (params.shapes(i) + 2.0) * log_x(i);
  }
  const Vector log_ratio = log_s - log_x;
  out -= 0.5 * total_shape * log_sum_exp(log_ratio);
  return out;
}

inline SimplexPoint dirichlet_sample(const Vector& alphas, Rng& rng) {
  if (alphas.size() < 1) throw ParameterError("Dirichlet needs at least one concentration");
  detail::require_positive(alphas, "Dirichlet concentration");
  Vector g(alphas.size());
  for (Eigen::Index i = 0; i < alphas.size(); ++i) g(i) = rng.gamma(alphas(i), 1.0);
  const double total = g.sum();
  if (!(total > 0.0)) {
    // all gammas underflowed (tiny concentrations); fall back to a point mass
    Eigen::Index arg;
    alphas.maxCoeff(&arg);
    Vector e = Vector::Zero(alphas.size());
    e(arg) = 1.0;
    return e;
  }
  return g / total;
}

inline double dirichlet_logpdf(const SimplexPoint& x, const Vector& alphas) {
  if (alphas.size() < 1) throw ParameterError("Dirichlet needs at least one concentration");
  detail::require_positive(alphas, "Dirichlet concentration");
  if (x.size() != alphas.size()) throw ParameterError("Dirichlet point dimension does not match parameters");
  if (x.size() == 1) return 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) > 0.0) || !(x(i) < 1.0)) throw DomainError("Dirichlet point must be interior to the simplex");
  }
  double out = std::lgamma(alphas.sum());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out += -std::lgamma(alphas(i)) + (alphas(i) - 1.0) * std::log(x(i));
  }
  return out;
}

inline double normal_logpdf(double x, double variance) {
  constexpr double kLogTwoPi = 1.8378770664093453;
  return -0.5 * (kLogTwoPi + std::log(variance) + x * x / variance);
}

}  // namespace hmsh
