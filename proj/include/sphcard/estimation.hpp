#pragma once

// Point estimation for the spherical cardioid family: moment estimators
// at orders 1 and 2, the polynomial-moment estimator of rho at known mu,
// maximum likelihood over the ball xi = rho mu, Fisher information with
// closed forms where available, and asymptotic relative efficiencies.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sphcard/cardioid.hpp"
#include "sphcard/common.hpp"
#include "sphcard/geometry.hpp"
#include "sphcard/rng.hpp"
#include "sphcard/sampling.hpp"
#include "sphcard/specfun.hpp"

namespace sphcard {

enum class Estimator { mm1, mm2, gm, ml };
enum class SignChoice { plus, minus };
enum class SignHint { plus, minus, automatic };

struct FitResult {
  Estimator estimator;
  CardioidParams params;
  double sigma2_mu = std::numeric_limits<double>::quiet_NaN();
  double sigma2_rho = std::numeric_limits<double>::quiet_NaN();
  bool truncated = false;
  int iterations = 0;  // ML only
  double loglik = std::numeric_limits<double>::quiet_NaN();  // ML only
  std::string diagnostics;
};

// --- Asymptotic variance scalars ----------------------------------------

inline double sigma2_mm1_mu(int d, double rho) { return (d + 1.0) / (rho * rho); }

inline double sigma2_mm1_rho(int d, double rho) { return d + 1.0 - rho * rho; }

inline double sigma2_mm2_mu(int d, double rho) {
  return d * (d + 3.0) * (d * (d + 5.0) + 2.0 * (d - 1.0) * rho) /
         (4.0 * rho * rho * (d + 1.0) * (d + 5.0));
}

inline double sigma2_mm2_rho(int d, double rho) {
  return d * (d + 3.0) / 2.0 + 2.0 * (d - 1.0) * (d + 3.0) * rho / (d + 5.0) -
         rho * rho;
}

// Correction eta_{k,d} in the variance of the polynomial-moment
// estimator; zero for odd k and on the circle.
inline double gm_eta(int k, int d) {
  if (k % 2 == 1 || d == 1) return 0.0;
  if (k == 2) return 2.0 * (d - 1.0) * (d + 3.0) / (d + 5.0);
  const double t1 = (2.0 * k + d - 1.0) * (2.0 * k + d - 1.0) /
                    ((3.0 * k + d - 1.0) * (d - 1.0));
  const double t2 = std::exp(std::lgamma(k + 1.0) - 3.0 * std::lgamma(k / 2.0 + 1.0));
  const double t3 = std::exp(3.0 * std::lgamma((d + k - 1.0) / 2.0) +
                             std::lgamma(d + 1.5 * k - 1.0) - std::lgamma(d + k - 1.0) -
                             2.0 * std::lgamma((d - 1.0) / 2.0) -
                             std::lgamma((d + 3.0 * k - 1.0) / 2.0));
  return t1 * t2 * t3;
}

inline double sigma2_gm_rho(int k, int d, double rho) {
  const double even_term = (k % 2 == 0) ? rho * gm_eta(k, d) : 0.0;
  return basis_constants(k, d).dim_harm + even_term - rho * rho;
}

// --- Moment estimators --------------------------------------------------

inline FitResult fit_mm1(const SphereSample& s) {
  if (s.n() < 2) throw std::domain_error("fit_mm1: need n >= 2");
  check_sample(s);
  const int d = s.d;
  const Eigen::VectorXd xbar = s.points.colwise().mean().transpose();
  const double nrm = xbar.norm();
  if (nrm < 1e-12) {
    throw degenerate_error("fit_mm1: sample mean is numerically zero, mu unidentifiable");
  }
  const double raw = (d + 1.0) * nrm;
  const double rho = std::min(raw, 1.0);
  FitResult out{Estimator::mm1, CardioidParams(d, 1, UnitVector(xbar / nrm), rho)};
  out.truncated = raw > 1.0;
  out.sigma2_mu = sigma2_mm1_mu(d, rho);
  out.sigma2_rho = sigma2_mm1_rho(d, rho);
  return out;
}

inline FitResult fit_mm2(const SphereSample& s, SignChoice sign) {
  if (s.n() < s.d + 1) throw std::domain_error("fit_mm2: need n >= d + 1");
  check_sample(s);
  const int d = s.d;
  const Eigen::MatrixXd scatter =
      s.points.transpose() * s.points / static_cast<double>(s.n());
  EigenPairs ep = sym_eigen(scatter);  // descending eigenvalues
  const int idx = (sign == SignChoice::plus) ? 0 : d;
  const int neighbor = (sign == SignChoice::plus) ? 1 : d - 1;
  if (std::fabs(ep.values(idx) - ep.values(neighbor)) <= 1e-10) {
    throw degenerate_error("fit_mm2: requested eigenvalue is not simple");
  }
  const double lambda = ep.values(idx);
  const double raw = 0.5 * (d + 3.0) * ((d + 1.0) * lambda - 1.0);
  const double lo = (sign == SignChoice::plus) ? 0.0 : -1.0;
  const double hi = (sign == SignChoice::plus) ? 1.0 : 0.0;
  const double rho = std::clamp(raw, lo, hi);
  FitResult out{Estimator::mm2,
                canonicalize(CardioidParams(d, 2, UnitVector(ep.vectors.col(idx)), rho))};
  out.truncated = raw < lo || raw > hi;
  out.sigma2_mu = sigma2_mm2_mu(d, rho);
  out.sigma2_rho = sigma2_mm2_rho(d, rho);
  return out;
}

// Polynomial-moment estimator of rho at a known location: the average
// of tau * C_k(mu'X_i) is unbiased for rho.
inline FitResult fit_gm(const SphereSample& s, const UnitVector& mu_known, int k) {
  if (s.n() < 1) throw std::domain_error("fit_gm: need n >= 1");
  check_sample(s);
  const int d = s.d;
  if (mu_known.sphere_dim() != d) {
    throw std::domain_error("fit_gm: mu dimension does not match sample");
  }
  const PolyBasis basis{d, k};
  const double tau = basis_constants(k, d).tau;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    const double t = std::clamp(s.points.row(i).dot(mu_known.coords().transpose()), -1.0, 1.0);
    acc += gegenbauer(basis, t);
  }
  const double raw = tau * acc / static_cast<double>(s.n());
  const double rho = std::clamp(raw, -1.0, 1.0);
  FitResult out{Estimator::gm, canonicalize(CardioidParams(d, k, mu_known, rho))};
  out.truncated = raw < -1.0 || raw > 1.0;
  out.sigma2_rho = sigma2_gm_rho(k, d, rho);
  return out;
}

// --- Fisher information -------------------------------------------------

struct FisherInfo {
  double a_k = 0.0;  // rho block
  double b_k = 0.0;  // mu block, before the rho^2 factor
  double rho = 0.0;
  int d = 0;
  int k = 0;

  double sigma2_rho() const { return 1.0 / a_k; }
  double sigma2_mu() const { return 1.0 / (b_k * rho * rho); }
};

namespace detail {

// (A_k, B_k) on |rho| < 1 through the defining integrals; the closed
// circle form holds for every order, and d = 2, k = 1 reduces to
// inverse hyperbolic expressions.  Quadrature folds the surface weight
// into the integrand (Gauss-Legendre) except on the circle, where
// Chebyshev nodes absorb the (1 - t^2)^{-1/2} factor exactly.
inline std::pair<double, double> fisher_ab_quadrature(int d, int k, double rho,
                                                      int nodes) {
  const PolyBasis basis{d, k};
  const double c1 = basis_constants(k, d).c_at_one;
  const double ratio = surface_area(d - 1) / surface_area(d);
  double a = 0.0, b = 0.0;
  if (d == 1) {
    for (const QuadNode& q : quadrature_nodes(QuadRule::gauss_chebyshev, nodes)) {
      const double ck = gegenbauer(basis, q.node);
      const double cd = gegenbauer_deriv(basis, q.node);
      const double den = c1 + rho * ck;
      a += q.weight * ck * ck / den;
      b += q.weight * cd * cd * (1.0 - q.node * q.node) / den;
    }
  } else {
    // substitute t = cos(theta): the half-integer weight of odd d would
    // degrade Gauss-Legendre to algebraic convergence on [-1, 1], while
    // the theta-form integrand is smooth for every d >= 2
    constexpr double half_pi = std::numbers::pi_v<double> / 2.0;
    for (const QuadNode& q : quadrature_nodes(QuadRule::gauss_legendre, nodes)) {
      const double theta = (q.node + 1.0) * half_pi;
      const double st = std::sin(theta);
      const double t = std::cos(theta);
      const double w = q.weight * half_pi * std::pow(st, d - 1.0);
      const double ck = gegenbauer(basis, t);
      const double cd = gegenbauer_deriv(basis, t);
      const double den = c1 + rho * ck;
      a += w * ck * ck / den;
      b += w * cd * cd * st * st / den;
    }
  }
  return {ratio / c1 * a, ratio / (c1 * d) * b};
}

inline std::pair<double, double> fisher_ab(int d, int k, double rho, int nodes = 256,
                                           bool force_quadrature = false) {
  if (!force_quadrature && d == 1) {
    const double sq = std::sqrt((1.0 - rho) * (1.0 + rho));
    // 1 - sqrt(1 - rho^2) = rho^2 / (1 + sqrt(1 - rho^2)), cancellation-free
    return {1.0 / ((1.0 + sq) * sq), static_cast<double>(k) * k / (1.0 + sq)};
  }
  if (!force_quadrature && d == 2 && k == 1) {
    const double r2 = rho * rho;
    if (std::fabs(rho) < 0.1) {
      double a = 0.0, b = 0.0, pw = 1.0;
      for (int m = 0; m < 12; ++m) {
        a += pw / (2.0 * m + 3.0);
        b += pw / ((2.0 * m + 1.0) * (2.0 * m + 3.0));
        pw *= r2;
      }
      return {a, b};
    }
    const double at = std::atanh(rho);
    return {(at - rho) / (rho * r2), (rho - (1.0 - r2) * at) / (2.0 * rho * r2)};
  }
  return fisher_ab_quadrature(d, k, rho, nodes);
}

}  // namespace detail

inline FisherInfo fisher_info(int d, int k, double rho, int nodes = 256) {
  detail::validate_basis(PolyBasis{d, k});
  if (k < 1) throw std::domain_error("fisher_info: order k must be >= 1");
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::domain_error("fisher_info: rho must lie in (0, 1)");
  }
  auto [a, b] = detail::fisher_ab(d, k, rho, nodes);
  return FisherInfo{a, b, rho, d, k};
}

// --- Maximum likelihood -------------------------------------------------

struct MlOptions {
  int max_iter = 500;
  double grad_tol = -1.0;          // absolute; < 0 means grad_tol_scale * n
  double grad_tol_scale = 1e-8;
  int restarts = 20;               // random restarts for k >= 3
  std::uint64_t restart_seed = 0xA11CEull;
  int fisher_nodes = 256;
};

class ml_error : public numeric_error {
 public:
  ml_error(const std::string& what, FitResult best_iterate)
      : numeric_error(what), best(std::move(best_iterate)) {}
  FitResult best;
};

namespace detail {

// Log-likelihood of xi = rho mu on the branch sgn in {+1, -1}, i.e. of
// the density (1/omega_d)(1 + sgn ||xi|| Ctilde_k(x' xi/||xi||)).
inline double ml_loglik(const Eigen::MatrixXd& x, const PolyBasis& basis, double sgn,
                        const Eigen::VectorXd& xi) {
  const double c1 = basis_constants(basis.k, basis.d).c_at_one;
  const double base = -std::log(surface_area(basis.d)) - std::log(c1);
  const double rho = xi.norm();
  const Eigen::Index n = x.rows();
  if (rho < 1e-14) return n * (base + std::log(c1));
  const Eigen::VectorXd mu = xi / rho;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = std::clamp(x.row(i).dot(mu.transpose()), -1.0, 1.0);
    const double val = c1 + sgn * rho * gegenbauer(basis, t);
    if (val <= 0.0) return -std::numeric_limits<double>::infinity();
    acc += std::log(val);
  }
  return acc + n * base;
}

inline Eigen::VectorXd ml_score(const Eigen::MatrixXd& x, const PolyBasis& basis,
                                double sgn, const Eigen::VectorXd& xi) {
  const double c1 = basis_constants(basis.k, basis.d).c_at_one;
  const double rho = xi.norm();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(xi.size());
  if (rho < 1e-14) return g;
  const Eigen::VectorXd mu = xi / rho;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double t = std::clamp(x.row(i).dot(mu.transpose()), -1.0, 1.0);
    const double ck = gegenbauer(basis, t);
    const double cd = gegenbauer_deriv(basis, t);
    const double den = c1 + sgn * rho * ck;
    g += (sgn / den) * ((ck - t * cd) * mu + cd * x.row(i).transpose());
  }
  return g;
}

struct MlBranchResult {
  Eigen::VectorXd xi;
  double loglik;
  int iterations;
  bool converged;
  double grad_norm;
};

// Projected BFGS ascent of the branch log-likelihood over the closed
// ball ||xi|| <= 1 - 1e-6.  The projected gradient (tangential part on
// an active boundary) drives the stopping rule.
inline MlBranchResult ml_optimize(const Eigen::MatrixXd& x, const PolyBasis& basis,
                                  double sgn, Eigen::VectorXd xi, double grad_tol,
                                  int max_iter) {
  const double ball = 1.0 - 1e-6;
  const Eigen::Index dim = xi.size();
  auto project = [&](Eigen::VectorXd v) {
    const double nrm = v.norm();
    if (nrm > ball) v *= ball / nrm;
    return v;
  };
  auto projected_grad = [&](const Eigen::VectorXd& point, const Eigen::VectorXd& g) {
    const double nrm = point.norm();
    if (nrm >= ball - 1e-12) {
      const Eigen::VectorXd unit = point / nrm;
      const double radial = g.dot(unit);
      if (radial > 0.0) return Eigen::VectorXd(g - radial * unit);
    }
    return g;
  };
  xi = project(std::move(xi));
  const double hscale = 1.0 / std::max<double>(static_cast<double>(x.rows()), 1.0);
  double f = ml_loglik(x, basis, sgn, xi);
  Eigen::VectorXd g = ml_score(x, basis, sgn, xi);
  Eigen::MatrixXd h = hscale * Eigen::MatrixXd::Identity(dim, dim);
  MlBranchResult res{xi, f, 0, false, projected_grad(xi, g).norm()};
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd pg = projected_grad(xi, g);
    res.grad_norm = pg.norm();
    if (res.grad_norm <= grad_tol) {
      res.converged = true;
      break;
    }
    bool moved = false;
    Eigen::VectorXd xi_new;
    double f_new = f;
    Eigen::VectorXd dir;
    // Boundary projections pollute the curvature estimate, so a failed
    // quasi-Newton line search falls back to one steepest-ascent retry
    // from a reset metric before the iteration is declared stuck.
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      if (attempt == 1) h = hscale * Eigen::MatrixXd::Identity(dim, dim);
      dir = h * g;
      if (dir.dot(g) <= 0.0) {
        h = hscale * Eigen::MatrixXd::Identity(dim, dim);
        dir = h * g;
      }
      double step = 1.0;
      for (int ls = 0; ls < 60; ++ls) {
        xi_new = project(xi + step * dir);
        f_new = ml_loglik(x, basis, sgn, xi_new);
        const double gain = g.dot(xi_new - xi);
        if (std::isfinite(f_new) && f_new > f &&
            f_new >= f + 1e-4 * std::max(gain, 0.0)) {
          moved = true;
          break;
        }
        step *= 0.5;
      }
    }
    if (!moved) {
      // Improvements smaller than the log-likelihood's floating-point
      // resolution stall the Armijo test near the optimum; a tiny full
      // step is then taken on the strength of the exact score alone.
      xi_new = project(xi + dir);
      f_new = ml_loglik(x, basis, sgn, xi_new);
      const double span = (xi_new - xi).norm();
      if (span > 0.0 && span <= 1e-5 && std::isfinite(f_new) &&
          f_new >= f - std::fabs(f) * 1e-12) {
        moved = true;
      }
    }
    ++res.iterations;
    if (!moved) break;
    Eigen::VectorXd g_new = ml_score(x, basis, sgn, xi_new);
    const Eigen::VectorXd sv = xi_new - xi;
    const Eigen::VectorXd yv = g_new - g;  // expect s'y < 0 on a concave ascent
    const double sy = sv.dot(yv);
    if (sy < -1e-14) {
      // inverse BFGS update for the ascent problem (curvature -s'y > 0)
      const Eigen::VectorXd hy = h * (-yv);
      const double denom = -sy;
      h += (denom + (-yv).dot(hy)) * (sv * sv.transpose()) / (denom * denom) -
           (hy * sv.transpose() + sv * hy.transpose()) / denom;
    }
    xi = xi_new;
    f = f_new;
    g = std::move(g_new);
    res.xi = xi;
    res.loglik = f;
  }
  if (!res.converged) {
    res.grad_norm = projected_grad(res.xi, ml_score(x, basis, sgn, res.xi)).norm();
    res.converged = res.grad_norm <= grad_tol;
  }
  return res;
}

}  // namespace detail

// Maximum likelihood over xi = rho mu in the unit ball.  Odd orders use
// the positive branch only; even orders run the requested branch(es)
// and keep the higher log-likelihood.
inline FitResult fit_ml(const SphereSample& s, int k,
                        std::optional<CardioidParams> init = std::nullopt,
                        SignHint sign_hint = SignHint::automatic,
                        const MlOptions& options = MlOptions{}) {
  if (k < 1) throw std::domain_error("fit_ml: order k must be >= 1");
  if (s.n() < s.d + 2) throw std::domain_error("fit_ml: need n >= d + 2");
  check_sample(s);
  const int d = s.d;
  detail::validate_basis(PolyBasis{d, k});
  const PolyBasis basis{d, k};
  const double grad_tol = options.grad_tol > 0.0
                              ? options.grad_tol
                              : options.grad_tol_scale * static_cast<double>(s.n());

  // branch starting points in the xi parametrization
  auto starts_for_branch = [&](double sgn) {
    std::vector<Eigen::VectorXd> starts;
    if (init) {
      if (init->d != d || init->k != k) {
        throw std::domain_error("fit_ml: init parameters do not match sample and order");
      }
      const double r = std::fabs(init->rho);
      const double branch_rho = (sgn > 0.0) == (init->rho >= 0.0) ? r : 0.05;
      starts.push_back(branch_rho * init->mu.coords());
    }
    if (k == 1) {
      try {
        FitResult mm = fit_mm1(s);
        starts.push_back(std::max(mm.params.rho, 1e-3) * mm.params.mu.coords());
      } catch (const degenerate_error&) {
        starts.push_back(1e-3 * Eigen::VectorXd::Unit(d + 1, d));
      }
    } else if (k == 2) {
      try {
        FitResult mm = fit_mm2(s, sgn > 0.0 ? SignChoice::plus : SignChoice::minus);
        starts.push_back(std::max(std::fabs(mm.params.rho), 1e-3) * mm.params.mu.coords());
      } catch (const degenerate_error&) {
        starts.push_back(1e-3 * Eigen::VectorXd::Unit(d + 1, d));
      }
    } else {
      // Scan data points as location candidates, scoring each by the
      // polynomial-moment estimate of rho it would imply; the best few
      // seed the optimizer, plus random-ball restarts.
      const double tau = basis_constants(k, d).tau;
      const double c1 = basis_constants(k, d).c_at_one;
      const Eigen::Index n = s.n();
      const Eigen::Index stride = std::max<Eigen::Index>(1, n / 64);
      double best_score = -std::numeric_limits<double>::infinity();
      Eigen::VectorXd best_mu = Eigen::VectorXd::Unit(d + 1, d);
      double best_raw = 0.0;
      for (Eigen::Index i = 0; i < n; i += stride) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double t = std::clamp(s.points.row(j).dot(s.points.row(i)), -1.0, 1.0);
          acc += gegenbauer(basis, t) / c1;
        }
        const double rho_cand = tau * acc / static_cast<double>(n);
        // odd orders can realize either sign of rho by flipping mu;
        // even orders must match the branch sign as-is
        const double aligned = (k % 2 == 1) ? std::fabs(rho_cand) : sgn * rho_cand;
        if (aligned > best_score) {
          best_score = aligned;
          best_mu = s.points.row(i).transpose();
          best_raw = rho_cand;
        }
      }
      if (k % 2 == 1 && sgn * best_raw < 0.0) best_mu = -best_mu;
      starts.push_back(std::clamp(best_score, 0.05, 0.95) * best_mu);
      RngStream rs(options.restart_seed);
      for (int r = 0; r < options.restarts; ++r) {
        Eigen::VectorXd v(d + 1);
        for (int c = 0; c <= d; ++c) v(c) = rs.normal();
        v *= (0.05 + 0.9 * rs.uniform()) / v.norm();
        starts.push_back(v);
      }
    }
    return starts;
  };

  std::vector<double> branches;
  if (k % 2 == 1) {
    branches = {1.0};
  } else if (sign_hint == SignHint::plus) {
    branches = {1.0};
  } else if (sign_hint == SignHint::minus) {
    branches = {-1.0};
  } else {
    branches = {1.0, -1.0};
  }

  bool have = false;
  detail::MlBranchResult best{};
  double best_sign = 1.0;
  double init_loglik = -std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (double sgn : branches) {
    for (Eigen::VectorXd x0 : starts_for_branch(sgn)) {
      if (x0.norm() > 1.0 - 1e-6) x0 *= (1.0 - 1e-6) / x0.norm();
      init_loglik = std::max(init_loglik, detail::ml_loglik(s.points, basis, sgn, x0));
      detail::MlBranchResult r = detail::ml_optimize(s.points, basis, sgn, x0, grad_tol,
                                                     options.max_iter);
      total_iterations += r.iterations;
      if (!have || r.loglik > best.loglik) {
        have = true;
        best = r;
        best_sign = sgn;
      }
    }
  }

  const double rho_mag = best.xi.norm();
  const double rho_hat = best_sign * rho_mag;
  UnitVector mu_hat = (rho_mag > 1e-14)
                          ? UnitVector(best.xi / rho_mag)
                          : UnitVector(Eigen::VectorXd::Unit(d + 1, d));
  FitResult out{Estimator::ml, canonicalize(CardioidParams(d, k, mu_hat, rho_hat))};
  out.iterations = total_iterations;
  out.loglik = best.loglik;
  out.truncated = rho_mag >= (1.0 - 1e-6) - 1e-9;
  if (rho_mag > 0.99) out.diagnostics += "rho_near_one;";
  if (rho_mag < 1e-8) out.diagnostics += "mu_unidentifiable;";
  auto [a, b] = detail::fisher_ab(d, k, out.params.rho, options.fisher_nodes);
  out.sigma2_rho = 1.0 / a;
  out.sigma2_mu = (rho_mag > 1e-14)
                      ? 1.0 / (b * rho_mag * rho_mag)
                      : std::numeric_limits<double>::infinity();
  if (!best.converged) {
    throw ml_error("fit_ml: optimizer did not reach the gradient tolerance", out);
  }
  if (best.loglik < init_loglik - 1e-9) {
    throw ml_error("fit_ml: final log-likelihood below its starting value", out);
  }
  return out;
}

// --- Asymptotic relative efficiency -------------------------------------

enum class AreKind { mm_mu, mm_rho, gm_rho };

// sigma^2_ML / sigma^2_estimator in (0, 1].
inline double are(int d, int k, double rho, AreKind which) {
  detail::validate_basis(PolyBasis{d, k});
  if (k < 1) throw std::domain_error("are: order k must be >= 1");
  if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("are: rho must lie in (0, 1)");
  if ((which == AreKind::mm_mu || which == AreKind::mm_rho) && k != 1 && k != 2) {
    throw std::domain_error("are: moment estimators exist only for k = 1, 2");
  }
  const FisherInfo fi = fisher_info(d, k, rho);
  switch (which) {
    case AreKind::mm_mu:
      return fi.sigma2_mu() /
             (k == 1 ? sigma2_mm1_mu(d, rho) : sigma2_mm2_mu(d, rho));
    case AreKind::mm_rho:
      return fi.sigma2_rho() /
             (k == 1 ? sigma2_mm1_rho(d, rho) : sigma2_mm2_rho(d, rho));
    case AreKind::gm_rho:
      return fi.sigma2_rho() / sigma2_gm_rho(k, d, rho);
  }
  throw std::domain_error("are: unknown efficiency kind");
}

}  // namespace sphcard
