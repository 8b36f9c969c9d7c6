#pragma once

// Special functions layer: ultraspherical (Gegenbauer/Chebyshev)
// polynomials with their normalization constants, regularized incomplete
// beta, Bessel functions of the first kind, and Gaussian quadrature
// rules.  Everything here is a pure function; the quadrature cache is
// initialized under a lock and read-only afterwards.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include "sphcard/common.hpp"

namespace sphcard {

// Degree/dimension pair selecting the polynomial family: Chebyshev T_k
// when d == 1, Gegenbauer C_k^{(d-1)/2} when d >= 2.
struct PolyBasis {
  int d = 1;
  int k = 0;
};

// Constants attached to a basis element:
//   tau      : orthogonality ratio (mean of C_k(g'u)C_k(g'v) over uniform
//              g equals C_k(u'v)/tau),
//   dim_harm : dimension of the degree-k spherical harmonic space,
//   c_norm   : squared-norm constant (omega_d/omega_{d-1}) dim_harm/tau^2,
//   c_at_one : value of the polynomial at x = 1, equal to dim_harm/tau.
struct BasisConstants {
  double tau = 1.0;
  double dim_harm = 1.0;
  double c_norm = 1.0;
  double c_at_one = 1.0;
};

// Degrees above this are outside the supported envelope (forward
// recurrence accuracy and harmonic-dimension overflow are untested
// beyond it).
inline constexpr int kMaxDegree = 64;

namespace detail {

inline void validate_basis(const PolyBasis& b) {
  if (b.d < 1) throw std::domain_error("PolyBasis: dimension must be >= 1");
  if (b.k < 0) throw std::domain_error("PolyBasis: degree must be >= 0");
  if (b.k > kMaxDegree) {
    throw capability_error("PolyBasis: degree exceeds supported maximum " +
                           std::to_string(kMaxDegree));
  }
}

// Binomial coefficient as long double; exact for all values below 2^63.
inline long double binomial(int n, int r) {
  if (r < 0 || n < 0 || r > n) return 0.0L;
  r = std::min(r, n - r);
  long double res = 1.0L;
  for (int i = 1; i <= r; ++i) {
    res = res * (n - r + i) / i;
    if (res > 1e300L) throw capability_error("binomial: value overflows double range");
  }
  if (res < 9.2e18L) res = std::round(res);
  return res;
}

}  // namespace detail

// Surface area omega_d of the unit sphere S^d embedded in R^{d+1};
// omega_0 = 2 by convention (two points).
inline double surface_area(int d) {
  if (d < 0) throw std::domain_error("surface_area: dimension must be >= 0");
  constexpr double pi = std::numbers::pi_v<double>;
  switch (d) {
    case 0: return 2.0;
    case 1: return 2.0 * pi;
    case 2: return 4.0 * pi;
    case 3: return 2.0 * pi * pi;
    default:
      return 2.0 * std::pow(pi, (d + 1) / 2.0) / std::tgamma((d + 1) / 2.0);
  }
}

inline BasisConstants basis_constants(int k, int d) {
  detail::validate_basis(PolyBasis{d, k});
  BasisConstants out;
  if (d == 1) {
    out.tau = (k == 0) ? 1.0 : 2.0;
    out.dim_harm = (k == 0) ? 1.0 : 2.0;
    out.c_at_one = 1.0;  // T_k(1) = 1
  } else {
    out.tau = 1.0 + 2.0 * k / (d - 1.0);
    out.dim_harm = static_cast<double>(detail::binomial(d + k, k) -
                                       detail::binomial(d + k - 2, k - 2));
    out.c_at_one = static_cast<double>(detail::binomial(d + k - 2, k));
  }
  out.c_norm = (surface_area(d) / surface_area(d - 1)) * out.dim_harm / (out.tau * out.tau);
  return out;
}

// C_k^{(d-1)/2}(x) for d >= 2 (forward three-term recurrence), T_k(x)
// for d = 1 (trigonometric form, stable near |x| = 1).
inline double gegenbauer(const PolyBasis& basis, double x) {
  detail::validate_basis(basis);
  x = clamp_unit(x);
  const int k = basis.k;
  const int d = basis.d;
  if (d == 1) return std::cos(k * std::acos(x));
  if (k == 0) return 1.0;
  double prev = 1.0;             // C_0
  double cur = (d - 1.0) * x;    // C_1
  for (int j = 1; j < k; ++j) {
    double nxt = ((2.0 * j + d - 1.0) * x * cur - (j + d - 2.0) * prev) / (j + 1.0);
    prev = cur;
    cur = nxt;
  }
  return cur;
}

// Normalized polynomial C_k(x)/C_k(1), bounded by 1 in modulus.
inline double gegenbauer_tilde(const PolyBasis& basis, double x) {
  detail::validate_basis(basis);
  if (basis.d == 1) return gegenbauer(basis, x);
  return gegenbauer(basis, x) / basis_constants(basis.k, basis.d).c_at_one;
}

// d/dx C_k^{(d-1)/2}(x).  For d >= 2 this is (d-1) C_{k-1}^{(d+1)/2}(x);
// for d = 1 it is k U_{k-1}(x) = k sin(k acos x)/sin(acos x), with the
// limit k^2 sign(x)^{k+1} at the endpoints.
inline double gegenbauer_deriv(const PolyBasis& basis, double x) {
  detail::validate_basis(basis);
  x = clamp_unit(x);
  const int k = basis.k;
  if (k == 0) return 0.0;
  if (basis.d == 1) {
    if (1.0 - std::fabs(x) < 1e-13) {
      double sign = (x > 0.0) ? 1.0 : ((k + 1) % 2 == 0 ? 1.0 : -1.0);
      return k * k * sign;
    }
    double th = std::acos(x);
    return k * std::sin(k * th) / std::sin(th);
  }
  return (basis.d - 1.0) * gegenbauer(PolyBasis{basis.d + 2, k - 1}, x);
}

// Regularized incomplete beta function I_x(a, b), modified Lentz
// continued fraction with the symmetry split at x = (a+1)/(a+b+2).
namespace detail {

inline double inc_beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double dd = 1.0 - qab * x / qap;
  if (std::fabs(dd) < tiny) dd = tiny;
  dd = 1.0 / dd;
  double h = dd;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    dd = 1.0 + aa * dd;
    if (std::fabs(dd) < tiny) dd = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    dd = 1.0 / dd;
    h *= dd * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    dd = 1.0 + aa * dd;
    if (std::fabs(dd) < tiny) dd = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    dd = 1.0 / dd;
    const double del = dd * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) return h;
  }
  throw numeric_error("reg_inc_beta: continued fraction did not converge");
}

}  // namespace detail

inline double reg_inc_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("reg_inc_beta: x must lie in [0,1]");
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("reg_inc_beta: a, b must be positive");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double lfront = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                        a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(lfront) * detail::inc_beta_cf(x, a, b) / a;
  }
  return 1.0 - std::exp(lfront) * detail::inc_beta_cf(1.0 - x, b, a) / b;
}

namespace detail {

// Power series for I_nu; every term is positive, so there is no
// cancellation for any (nu, x).
inline double bessel_i_series(double nu, double x) {
  if (x == 0.0) return (nu == 0.0) ? 1.0 : 0.0;
  const double q = 0.25 * x * x;
  double term = std::exp(nu * std::log(0.5 * x) - std::lgamma(nu + 1.0));
  double sum = term;
  for (int m = 1; m <= 2000; ++m) {
    term *= q / (m * (m + nu));
    sum += term;
    if (term <= sum * 1e-17) return sum;
  }
  throw numeric_error("bessel_first_kind: I series did not converge");
}

// Scaled variant (2/x)^alpha I_nu(x): folding the prefactor into the
// leading exponent keeps the value finite as x -> 0 when nu >= alpha.
inline double bessel_i_scaled(double nu, double x, double alpha) {
  if (x < 1e-280) {
    if (nu == alpha) return std::exp(-std::lgamma(nu + 1.0));
    return (nu > alpha) ? 0.0 : std::numeric_limits<double>::infinity();
  }
  const double q = 0.25 * x * x;
  double term = std::exp((nu - alpha) * std::log(0.5 * x) - std::lgamma(nu + 1.0));
  double sum = term;
  for (int m = 1; m <= 2000; ++m) {
    term *= q / (m * (m + nu));
    sum += term;
    if (term <= sum * 1e-17) return sum;
  }
  throw numeric_error("bessel_i_scaled: series did not converge");
}

// Alternating series for J_nu; used only where the terms decrease from
// the start (x <= 2 sqrt(nu+1)), so no significant cancellation occurs.
inline double bessel_j_series(double nu, double x) {
  if (x == 0.0) return (nu == 0.0) ? 1.0 : 0.0;
  const double q = 0.25 * x * x;
  double term = std::exp(nu * std::log(0.5 * x) - std::lgamma(nu + 1.0));
  double sum = term;
  for (int m = 1; m <= 2000; ++m) {
    term *= -q / (m * (m + nu));
    sum += term;
    if (std::fabs(term) <= std::fabs(sum) * 1e-17 + 1e-300) return sum;
  }
  throw numeric_error("bessel_first_kind: J series did not converge");
}

// Downward (Miller) recurrence for J_nu, nu = n + f with f in {0, 1/2}.
// The unnormalized descent is fixed by the even-order sum identity
// J_0 + 2 sum J_{2m} = 1 in the integer case and by the elementary
// closed values of J_{1/2}, J_{3/2} in the half-integer case (the pair
// sin x and sin x / x - cos x never vanishes together).
inline double bessel_j_miller(double nu, double x) {
  const int n_target = static_cast<int>(std::floor(nu + 0.25));
  const double f = nu - n_target;  // 0 or 0.5
  const int mtop = n_target + 25 + static_cast<int>(1.5 * x);
  double jp = 0.0;        // order mtop + 1 + f
  double jc = 1e-30;      // order mtop + f
  double saved = 0.0;     // unnormalized value at the target order
  double even_sum = 0.0;  // j_0 + 2 sum_{m even >= 2} j_m, built on the fly
  double j_half = 0.0, j_3half = 0.0;
  for (int m = mtop; m >= 0; --m) {
    // jc holds order m + f here
    if (m == n_target) saved = jc;
    if (f == 0.0) {
      if (m != 0 && m % 2 == 0) even_sum += 2.0 * jc;
      if (m == 0) even_sum += jc;
    } else {
      if (m == 0) j_half = jc;
      if (m == 1) j_3half = jc;
    }
    if (m > 0) {
      double jm = (2.0 * (m + f) / x) * jc - jp;
      jp = jc;
      jc = jm;
      if (std::fabs(jc) > 1e280) {
        jc *= 1e-280;
        jp *= 1e-280;
        saved *= 1e-280;
        even_sum *= 1e-280;
        j_half *= 1e-280;
        j_3half *= 1e-280;
      }
    }
  }
  double scale;
  if (f == 0.0) {
    scale = 1.0 / even_sum;
  } else {
    const double pref = std::sqrt(2.0 / (std::numbers::pi_v<double> * x));
    const double t_half = pref * std::sin(x);
    const double t_3half = pref * (std::sin(x) / x - std::cos(x));
    scale = (std::fabs(t_half) >= std::fabs(t_3half)) ? t_half / j_half
                                                      : t_3half / j_3half;
  }
  return saved * scale;
}

// Scaled variant (2/x)^alpha J_nu(x), alpha >= 0.  In the series range
// the prefactor folds into the leading exponent; in the Miller range
// x > 2, so the explicit prefactor cannot overflow.
inline double bessel_j_scaled(double nu, double x, double alpha) {
  if (x < 1e-280) {
    if (nu == alpha) return std::exp(-std::lgamma(nu + 1.0));
    return (nu > alpha) ? 0.0 : std::numeric_limits<double>::infinity();
  }
  if (x <= 2.0 * std::sqrt(nu + 1.0)) {
    const double q = 0.25 * x * x;
    double term = std::exp((nu - alpha) * std::log(0.5 * x) - std::lgamma(nu + 1.0));
    double sum = term;
    for (int m = 1; m <= 2000; ++m) {
      term *= -q / (m * (m + nu));
      sum += term;
      if (std::fabs(term) <= std::fabs(sum) * 1e-17 + 1e-300) return sum;
    }
    throw numeric_error("bessel_j_scaled: series did not converge");
  }
  return bessel_j_miller(nu, x) * std::pow(2.0 / x, alpha);
}

}  // namespace detail

// J_nu(x) (modified == false) or I_nu(x) (modified == true) for
// half-integer order nu >= 0 and x >= 0.
inline double bessel_first_kind(double nu, double x, bool modified) {
  if (x < 0.0) throw std::domain_error("bessel_first_kind: x must be >= 0");
  if (nu < 0.0) throw std::domain_error("bessel_first_kind: order must be >= 0");
  const double two_nu = 2.0 * nu;
  if (std::fabs(two_nu - std::round(two_nu)) > 1e-9) {
    throw std::domain_error("bessel_first_kind: order must be a half-integer");
  }
  if (modified) return detail::bessel_i_series(nu, x);
  if (x <= 2.0 * std::sqrt(nu + 1.0)) return detail::bessel_j_series(nu, x);
  return detail::bessel_j_miller(nu, x);
}

// --- Gaussian quadrature ------------------------------------------------

enum class QuadRule { gauss_legendre, gauss_chebyshev };

struct QuadNode {
  double node = 0.0;
  double weight = 0.0;
};

namespace detail {

inline std::vector<QuadNode> gauss_legendre_nodes(int n) {
  constexpr double pi = std::numbers::pi_v<double>;
  std::vector<QuadNode> out(n);
  for (int i = 1; i <= n; ++i) {
    double x = std::cos(pi * (i - 0.25) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      double pn = (n == 1) ? x : p1;
      double pm = (n == 1) ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      double dx = pn / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    out[i - 1].node = x;
    out[i - 1].weight = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return out;
}

inline std::vector<QuadNode> gauss_chebyshev_nodes(int n) {
  constexpr double pi = std::numbers::pi_v<double>;
  std::vector<QuadNode> out(n);
  for (int i = 1; i <= n; ++i) {
    out[i - 1].node = std::cos((2.0 * i - 1.0) * pi / (2.0 * n));
    out[i - 1].weight = pi / n;
  }
  return out;
}

}  // namespace detail

// Nodes and weights on (-1, 1).  Gauss-Legendre integrates dx (weights
// sum to 2); Gauss-Chebyshev integrates (1-x^2)^{-1/2} dx (weights sum
// to pi).  Tables are cached; the cache is guarded by a mutex and
// entries are immutable once created.
inline std::vector<QuadNode> quadrature_nodes(QuadRule rule, int n) {
  if (n < 1) throw std::domain_error("quadrature_nodes: n must be >= 1");
  static std::mutex cache_mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const std::vector<QuadNode>>> cache;
  const std::pair<int, int> key{static_cast<int>(rule), n};
  std::shared_ptr<const std::vector<QuadNode>> entry;
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) entry = it->second;
  }
  if (!entry) {
    auto fresh = std::make_shared<std::vector<QuadNode>>(
        rule == QuadRule::gauss_legendre ? detail::gauss_legendre_nodes(n)
                                         : detail::gauss_chebyshev_nodes(n));
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto [it, inserted] = cache.emplace(key, std::move(fresh));
    entry = it->second;
  }
  return *entry;
}

}  // namespace sphcard
