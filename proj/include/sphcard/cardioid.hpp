#pragma once

// The spherical cardioid family on S^d with density proportional to
// 1 + rho * Ctilde_k(x'mu): density evaluation, canonical parameter
// form, convolution, vectorized moments and covariances, characteristic
// and moment-generating functions, projected (1-D) distributions, and
// parameter bridges from von Mises-Fisher and Watson laws.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "sphcard/common.hpp"
#include "sphcard/geometry.hpp"
#include "sphcard/specfun.hpp"

namespace sphcard {

// Parameters (d, k, mu, rho) with |rho| <= 1, k >= 1.  The constructor
// validates; it does not canonicalize.
struct CardioidParams {
  CardioidParams(int d_in, int k_in, UnitVector mu_in, double rho_in)
      : d(d_in), k(k_in), mu(std::move(mu_in)), rho(rho_in) {
    if (k < 1) throw std::domain_error("CardioidParams: order k must be >= 1");
    detail::validate_basis(PolyBasis{d, k});
    if (mu.sphere_dim() != d) {
      throw std::domain_error("CardioidParams: mu dimension does not match d");
    }
    if (std::fabs(rho) > 1.0 + 1e-12) {
      throw std::domain_error("CardioidParams: |rho| must be <= 1");
    }
    rho = std::clamp(rho, -1.0, 1.0);
  }

  int d;
  int k;
  UnitVector mu;
  double rho;

  PolyBasis basis() const { return PolyBasis{d, k}; }
};

inline double density(const CardioidParams& p, const UnitVector& x) {
  if (x.ambient_dim() != p.d + 1) {
    throw std::domain_error("density: point dimension does not match parameters");
  }
  const double val =
      (1.0 + p.rho * gegenbauer_tilde(p.basis(), x.dot(p.mu))) / surface_area(p.d);
  return std::max(val, 0.0);
}

inline double log_density(const CardioidParams& p, const UnitVector& x) {
  if (x.ambient_dim() != p.d + 1) {
    throw std::domain_error("log_density: point dimension does not match parameters");
  }
  const double u = std::max(p.rho * gegenbauer_tilde(p.basis(), x.dot(p.mu)), -1.0);
  if (u == -1.0) return -std::numeric_limits<double>::infinity();
  return std::log1p(u) - std::log(surface_area(p.d));
}

// Canonical representative of the identifiable parameter class:
//   odd k: rho >= 0 (flip (mu, rho) -> (-mu, -rho));
//   even k, d >= 2: first nonzero coordinate of mu positive;
//   d = 1: angle of mu reduced to [0, 2pi/k).
inline CardioidParams canonicalize(const CardioidParams& p) {
  int d = p.d, k = p.k;
  Eigen::VectorXd mu = p.mu.coords();
  double rho = p.rho;
  if (k % 2 == 1 && rho < 0.0) {
    mu = -mu;
    rho = -rho;
  }
  if (d == 1) {
    double theta = std::atan2(mu(1), mu(0));
    const double period = 2.0 * std::numbers::pi_v<double> / k;
    theta = std::fmod(theta, period);
    if (theta < 0.0) theta += period;
    if (theta >= period) theta = 0.0;
    return CardioidParams(1, k, UnitVector::from_angle(theta), rho);
  }
  if (k % 2 == 0) {
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      if (mu(i) != 0.0) {
        if (mu(i) < 0.0) mu = -mu;
        break;
      }
    }
  }
  return CardioidParams(d, k, UnitVector(mu), rho);
}

// Convolution within the family: the result keeps order k1; the
// concentration is rho1 rho2 / dim_harm(k1, d) when k1 = k2 and 0
// otherwise.  On the circle the locations' angles add; for d >= 2 the
// location is the outer (mixing) one.
inline CardioidParams convolve(const CardioidParams& p1, const CardioidParams& p2) {
  if (p1.d != p2.d) throw std::domain_error("convolve: dimension mismatch");
  const double rho =
      (p1.k == p2.k)
          ? p1.rho * p2.rho / basis_constants(p1.k, p1.d).dim_harm
          : 0.0;
  if (p1.d == 1) {
    const double th1 = std::atan2(p1.mu.coords()(1), p1.mu.coords()(0));
    const double th2 = std::atan2(p2.mu.coords()(1), p2.mu.coords()(0));
    return CardioidParams(1, p1.k, UnitVector::from_angle(th1 + th2), rho);
  }
  return CardioidParams(p1.d, p1.k, p2.mu, rho);
}

namespace detail {

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline double double_factorial_odd(int n) {
  // (n)!! for odd n, with (-1)!! = 1
  double r = 1.0;
  for (int i = n; i >= 1; i -= 2) r *= i;
  return r;
}

inline Eigen::VectorXd vec_identity(int dim) {
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
  return Eigen::Map<Eigen::VectorXd>(eye.data(), dim * dim);
}

// f_{j,m,k} = int_{-1}^1 t^{m-2j} (1-t^2)^{d/2-1+j} C_k(t) dt via its
// finite Gamma-ratio series; every Gamma argument stays >= 1/2.
inline double moment_f_coef(int d, int k, int m, int j) {
  double series = 0.0;
  for (int s = 0; s <= k / 2; ++s) {
    double num = (d == 1) ? std::tgamma(static_cast<double>(k - s))
                          : std::tgamma((d - 1) / 2.0 + (k - s));
    double term = std::pow(2.0, k - 2 * s) * num /
                  (factorial(s) * factorial(k - 2 * s));
    term *= std::tgamma((m + k + 1) / 2.0 - j - s) /
            std::tgamma((d + k + m + 1) / 2.0 - s);
    series += (s % 2 == 0) ? term : -term;
  }
  const double pref = (d == 1)
                          ? std::tgamma(0.5 + j) * k / 2.0
                          : std::tgamma(d / 2.0 + j) / std::tgamma((d - 1) / 2.0);
  return pref * series;
}

// General moment expression valid for every m >= 1:
//   mu_{d+1,m} + (rho / C_k(1)) (omega_{d-1}/omega_d) *
//     Sym( sum_j e_{j,k,m} mu^{(x)(m-2j)} (x) vec(I - mu mu')^{(x)j} );
// the rho part carries the indicator 1{m + k even}.
inline SymTensorVec moment_general(const CardioidParams& p, int m) {
  const int dim = p.d + 1;
  check_budget(m, dim);
  SymTensorVec out = uniform_moment(p.d, m);
  if ((m + p.k) % 2 != 0 || p.rho == 0.0) return out;
  Eigen::VectorXd mu = p.mu.coords();
  Eigen::MatrixXd proj =
      Eigen::MatrixXd::Identity(dim, dim) - mu * mu.transpose();
  Eigen::VectorXd vec_proj = Eigen::Map<Eigen::VectorXd>(proj.data(), dim * dim);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ipow(dim, m));
  for (int j = 0; 2 * j <= m; ++j) {
    double coef = binomial(m, 2 * j) * double_factorial_odd(2 * j - 1);
    for (int r = 0; r < j; ++r) coef /= (p.d + 2.0 * r);
    coef *= moment_f_coef(p.d, p.k, m, j);
    acc += coef * kron(kron_pow(mu, m - 2 * j), kron_pow(vec_proj, j));
  }
  const double scale = p.rho / basis_constants(p.k, p.d).c_at_one *
                       surface_area(p.d - 1) / surface_area(p.d);
  SymTensorVec raw{m, dim, scale * acc};
  SymTensorVec sym = symmetrizer_apply(m, dim, raw);
  out.data += sym.data;
  return out;
}

// Specialized expression at m = k:
//   mu_{d+1,k} + (rho / dim_harm) Sym( sum_j a_{k,j} (vec I)^{(x)j} (x) mu^{(x)(k-2j)} )
// with a_{k,j} = (-1)^j [k!/(2^j (k-2j)! j!)] / prod_{r=1}^{j} (2(k-r)+d-1).
inline SymTensorVec moment_at_order(const CardioidParams& p) {
  const int m = p.k;
  const int dim = p.d + 1;
  check_budget(m, dim);
  SymTensorVec out = uniform_moment(p.d, m);
  if (p.rho == 0.0) return out;
  Eigen::VectorXd mu = p.mu.coords();
  Eigen::VectorXd vi = vec_identity(dim);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ipow(dim, m));
  for (int j = 0; 2 * j <= m; ++j) {
    double a = factorial(m) / (std::pow(2.0, j) * factorial(m - 2 * j) * factorial(j));
    for (int r = 1; r <= j; ++r) a /= (2.0 * (m - r) + p.d - 1.0);
    if (j % 2 == 1) a = -a;
    acc += a * kron(kron_pow(vi, j), kron_pow(mu, m - 2 * j));
  }
  const double scale = p.rho / basis_constants(p.k, p.d).dim_harm;
  SymTensorVec raw{m, dim, scale * acc};
  SymTensorVec sym = symmetrizer_apply(m, dim, raw);
  out.data += sym.data;
  return out;
}

}  // namespace detail

// E[X^{(x)m}] as a flat symmetric tensor.  Order m below k or with
// m - k odd reduces to the uniform moment; m = k uses the specialized
// coefficients; other orders use the general expression.
inline SymTensorVec moment_vectorized(const CardioidParams& p, int m) {
  if (m < 1) throw std::domain_error("moment_vectorized: m must be >= 1");
  detail::check_budget(m, p.d + 1);
  if (m < p.k) return uniform_moment(p.d, m);
  if (m == p.k) return detail::moment_at_order(p);
  if ((m - p.k) % 2 != 0) return uniform_moment(p.d, m);
  return detail::moment_general(p, m);
}

// V[X^{(x)m}] = unvec( E[X^{(x)2m}] - E[X^{(x)m}] (x) E[X^{(x)m}] ).
inline Eigen::MatrixXd moment_covariance(const CardioidParams& p, int m) {
  if (m < 1) throw std::domain_error("moment_covariance: m must be >= 1");
  detail::check_budget(2 * m, p.d + 1);
  const Eigen::VectorXd e2m = moment_vectorized(p, 2 * m).data;
  const Eigen::VectorXd em = moment_vectorized(p, m).data;
  const Eigen::VectorXd flat = e2m - kron(em, em);
  const Eigen::Index n = detail::ipow(p.d + 1, m);
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) out(r, c) = flat(c * n + r);
  }
  return 0.5 * (out + out.transpose());
}

enum class CharFnKind { cf, mgf };

// Characteristic function (kind = cf) or moment generating function
// (kind = mgf) at the argument t in R^{d+1}:
//   (2/s)^{(d-1)/2} { e_0 I_{(d-1)/2}(s)
//                     + (rho/dim_harm) e_k I_{(2k+d-1)/2}(s) C_k(mu't/s) },
// s = ||t||, with e_l = Gamma((d-1)/2)(l + (d-1)/2) for d >= 2 and
// e_l = 2 - delta_{l,0} for d = 1; the cf substitutes i^l J for I.
inline std::complex<double> char_fn(const CardioidParams& p, const Eigen::VectorXd& t,
                                    CharFnKind kind) {
  if (t.size() != p.d + 1) {
    throw std::domain_error("char_fn: argument dimension does not match parameters");
  }
  const double s = t.norm();
  if (s < 1e-10) return {1.0, 0.0};
  const double alpha = (p.d - 1) / 2.0;
  const double nu0 = alpha;
  const double nuk = (2.0 * p.k + p.d - 1.0) / 2.0;
  const double e0 = (p.d == 1) ? 1.0 : std::tgamma(alpha) * alpha;
  const double ek = (p.d == 1) ? 2.0 : std::tgamma(alpha) * (p.k + alpha);
  const double ck = gegenbauer(p.basis(), p.mu.coords().dot(t) / s);
  const double w = p.rho / basis_constants(p.k, p.d).dim_harm;
  if (kind == CharFnKind::mgf) {
    const double v0 = detail::bessel_i_scaled(nu0, s, alpha);
    const double vk = detail::bessel_i_scaled(nuk, s, alpha);
    return {e0 * v0 + w * ek * vk * ck, 0.0};
  }
  const double v0 = detail::bessel_j_scaled(nu0, s, alpha);
  const double vk = detail::bessel_j_scaled(nuk, s, alpha);
  static const std::complex<double> iunit[4] = {
      {1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  return std::complex<double>(e0 * v0, 0.0) + iunit[p.k % 4] * (w * ek * vk * ck);
}

// --- Projected (1-D) distributions --------------------------------------

// Density of gamma'U for U uniform on S^d:
// f_d(x) = (omega_{d-1}/omega_d)(1 - x^2)^{d/2 - 1}.
inline double proj_unif_pdf(int d, double x) {
  if (d < 1) throw std::domain_error("proj_unif_pdf: dimension must be >= 1");
  x = clamp_unit(x);
  return surface_area(d - 1) / surface_area(d) *
         std::pow(1.0 - x * x, d / 2.0 - 1.0);
}

// Cdf of gamma'U for U uniform on S^d, through the regularized
// incomplete beta function (closed forms at d = 1, 2).
inline double proj_unif_cdf(int d, double x) {
  if (d < 1) throw std::domain_error("proj_unif_cdf: dimension must be >= 1");
  x = clamp_unit(x);
  if (d == 1) return 1.0 - std::acos(x) / std::numbers::pi_v<double>;
  if (d == 2) return 0.5 * (x + 1.0);
  const double sign = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  return 0.5 * (1.0 + sign * reg_inc_beta(x * x, 0.5, d / 2.0));
}

namespace detail {

// eta_k(s) = (omega_{d-1}/omega_d) C_k(s) / C_k(1)^2, the coefficient
// of the concentration term in the projected cdf.
inline double proj_eta(int d, int k, double s) {
  const double c1 = basis_constants(k, d).c_at_one;
  return surface_area(d - 1) / surface_area(d) * gegenbauer(PolyBasis{d, k}, s) /
         (c1 * c1);
}

// G_k(x): antiderivative factor of the projected density's polynomial
// part; vanishes at x = +-1.
inline double proj_g(int d, int k, double x) {
  x = clamp_unit(x);
  if (d == 1) return std::sin(k * std::acos(x)) / k;
  return (d - 1.0) / (k * (k + d - 1.0)) * gegenbauer(PolyBasis{d + 2, k - 1}, x) *
         std::pow(1.0 - x * x, d / 2.0);
}

}  // namespace detail

// Density of gamma'X: f_d(x) [1 + rho Ctilde_k(gamma'mu) Ctilde_k(x)].
inline double proj_pdf(const CardioidParams& p, const UnitVector& gamma, double x) {
  if (gamma.ambient_dim() != p.d + 1) {
    throw std::domain_error("proj_pdf: direction dimension does not match parameters");
  }
  x = clamp_unit(x);
  const double mod = 1.0 + p.rho * gegenbauer_tilde(p.basis(), gamma.dot(p.mu)) *
                               gegenbauer_tilde(p.basis(), x);
  return proj_unif_pdf(p.d, x) * std::max(mod, 0.0);
}

// Cdf of gamma'X: F_d(x) - rho eta_k(gamma'mu) G_k(x).
inline double proj_cdf(const CardioidParams& p, const UnitVector& gamma, double x) {
  if (gamma.ambient_dim() != p.d + 1) {
    throw std::domain_error("proj_cdf: direction dimension does not match parameters");
  }
  x = clamp_unit(x);
  const double val = proj_unif_cdf(p.d, x) -
                     p.rho * detail::proj_eta(p.d, p.k, gamma.dot(p.mu)) *
                         detail::proj_g(p.d, p.k, x);
  return std::clamp(val, 0.0, 1.0);
}

// Projected distribution bundle: the law of gamma'X under params.
struct ProjectedCdf {
  CardioidParams params;
  UnitVector gamma;

  double cdf(double x) const { return proj_cdf(params, gamma, x); }
  double pdf(double x) const { return proj_pdf(params, gamma, x); }
};

// --- Approximation bridges ----------------------------------------------

// von Mises-Fisher(mu, kappa) maps to order k = 1 with rho = kappa;
// the approximation is intended for 0 <= kappa <= 1, and `degraded`
// (when provided) is set if kappa lies outside that range.
inline CardioidParams vmf_to_cardioid(const UnitVector& mu, double kappa, int d,
                                      bool* degraded = nullptr) {
  if (std::fabs(kappa) > 1.0 + 1e-12) {
    throw std::domain_error("vmf_to_cardioid: resulting concentration outside [-1,1]");
  }
  if (degraded) *degraded = (kappa < 0.0 || kappa > 1.0);
  return CardioidParams(d, 1, mu, std::clamp(kappa, -1.0, 1.0));
}

// Watson(mu, kappa) maps to order k = 2 with rho = d kappa/(d+1+kappa).
inline CardioidParams watson_to_cardioid(const UnitVector& mu, double kappa, int d,
                                         bool* degraded = nullptr) {
  const double rho = d * kappa / (d + 1.0 + kappa);
  if (std::fabs(rho) > 1.0 + 1e-12) {
    throw std::domain_error("watson_to_cardioid: resulting concentration outside [-1,1]");
  }
  if (degraded) *degraded = false;
  return CardioidParams(d, 2, mu, std::clamp(rho, -1.0, 1.0));
}

}  // namespace sphcard
