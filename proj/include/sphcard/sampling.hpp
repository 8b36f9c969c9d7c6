#pragma once

// Exact simulation from the spherical cardioid family: accept-reject
// from the uniform envelope, a rejection-free route for odd orders, an
// inverse-transform route for (d = 2, k = 2, rho > 0), and a dispatcher
// that picks the cheapest applicable sampler.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>

#include "sphcard/cardioid.hpp"
#include "sphcard/common.hpp"
#include "sphcard/geometry.hpp"
#include "sphcard/rng.hpp"

namespace sphcard {

enum class SamplerKind { rejection, rejection_free_odd, inverse_d2k2, automatic };

// n observations on S^d, one per row of an n x (d+1) matrix, plus the
// tolerance rows were validated against and, for generated samples, the
// sampler that produced them.
struct SphereSample {
  Eigen::MatrixXd points;
  int d = 0;
  double normalize_tol = 1e-6;
  bool generated = false;
  SamplerKind sampler = SamplerKind::automatic;
  std::int64_t proposals = 0;  // accept-reject proposals; 0 for other origins

  Eigen::Index n() const { return points.rows(); }
  UnitVector point(Eigen::Index i) const {
    return UnitVector(points.row(i).transpose());
  }
};

// Shape and row-norm validation for externally built samples.
inline void check_sample(const SphereSample& s) {
  if (s.d < 1 || s.points.cols() != s.d + 1) {
    throw std::domain_error("check_sample: column count does not match d + 1");
  }
  for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
    if (std::fabs(s.points.row(i).norm() - 1.0) > s.normalize_tol) {
      throw std::domain_error("check_sample: row norm outside tolerance");
    }
  }
}

// Accept-reject from the uniform envelope with bound M = 1 + |rho|;
// acceptance probability 1/M lies in [1/2, 1].
inline SphereSample sample_rejection(const CardioidParams& p, Eigen::Index n,
                                     RngStream& rng) {
  if (n < 0) throw std::domain_error("sample_rejection: n must be >= 0");
  SphereSample out;
  out.points.resize(n, p.d + 1);
  out.d = p.d;
  out.generated = true;
  out.sampler = SamplerKind::rejection;
  const double bound = 1.0 + std::fabs(p.rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (;;) {
      UnitVector u = uniform_sphere(p.d, rng);
      ++out.proposals;
      const double target = 1.0 + p.rho * gegenbauer_tilde(p.basis(), u.dot(p.mu));
      if (rng.uniform() * bound <= target) {
        out.points.row(i) = u.coords().transpose();
        break;
      }
    }
  }
  return out;
}

namespace detail {

// Composes x = t mu + sqrt(1 - t^2) B xi for a tangent coordinate
// vector xi of length d (unit norm).
inline Eigen::VectorXd compose_from_projection(const Eigen::VectorXd& mu,
                                               const Eigen::MatrixXd& tangent,
                                               double t, const Eigen::VectorXd& xi) {
  const double r = std::sqrt(std::max(0.0, 1.0 - t * t));
  return t * mu + r * (tangent * xi);
}

// Uniform direction on S^{d-1} as a coordinate vector of length d;
// S^0 = {-1, +1} is drawn by a fair sign.
inline Eigen::VectorXd uniform_tangent_direction(int d, RngStream& rng) {
  if (d == 1) {
    Eigen::VectorXd xi(1);
    xi(0) = (rng.uniform() < 0.5) ? -1.0 : 1.0;
    return xi;
  }
  return uniform_sphere(d - 1, rng).coords();
}

}  // namespace detail

// Rejection-free sampler for odd orders: a uniform draw supplies
// R = |U_1|, a sign S with P(S = +1 | R) = (1 + rho Ctilde_k(R))/2
// gives T = S R, and T is composed with an independent uniform
// direction in the tangent space at mu.
inline SphereSample sample_rejection_free(const CardioidParams& p, Eigen::Index n,
                                          RngStream& rng) {
  if (p.k % 2 == 0) {
    throw std::domain_error("sample_rejection_free: order k must be odd");
  }
  if (n < 0) throw std::domain_error("sample_rejection_free: n must be >= 0");
  SphereSample out;
  out.points.resize(n, p.d + 1);
  out.d = p.d;
  out.generated = true;
  out.sampler = SamplerKind::rejection_free_odd;
  const Eigen::MatrixXd tangent = tangent_basis(p.mu).matrix;
  const Eigen::VectorXd mu = p.mu.coords();
  for (Eigen::Index i = 0; i < n; ++i) {
    UnitVector u = uniform_sphere(p.d, rng);
    const double r = std::fabs(u.coords()(0));
    const double p_plus = 0.5 * (1.0 + p.rho * gegenbauer_tilde(p.basis(), r));
    const double s = (rng.uniform() < p_plus) ? 1.0 : -1.0;
    const Eigen::VectorXd xi = detail::uniform_tangent_direction(p.d, rng);
    out.points.row(i) =
        detail::compose_from_projection(mu, tangent, s * r, xi).transpose();
  }
  return out;
}

namespace detail {

// Solves F_mu(t) = (rho t^3 + (2 - rho) t + 2)/4 = u on [-1, 1] for
// d = 2, k = 2, rho > 0 through the depressed cubic's real root:
// t^3 + pc t + q = 0 with pc = (2 - rho)/rho > 0, q = 2(1 - 2u)/rho.
inline double inverse_cdf_t(double rho, double u) {
  const double q = 2.0 * (1.0 - 2.0 * u) / rho;
  const double pc = (2.0 - rho) / rho;
  const double delta = 0.25 * q * q + pc * pc * pc / 27.0;
  double t;
  if (delta >= 0.0) {
    const double root = std::sqrt(delta);
    t = std::cbrt(-0.5 * q + root) + std::cbrt(-0.5 * q - root);
  } else {
    // Defensive: pc > 0 forces delta > 0, but rounding near u = 1/2 at
    // tiny rho could land here; resolve the three real roots and keep
    // the one in [-1, 1], refined against a bisection solve.
    const double m = 2.0 * std::sqrt(-pc / 3.0);
    const double theta =
        std::acos(std::clamp(3.0 * q / (pc * m), -1.0, 1.0)) / 3.0;
    const double third = 2.0 * std::numbers::pi_v<double> / 3.0;
    double best = 0.0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 3; ++j) {
      const double cand = m * std::cos(theta - j * third);
      if (cand < -1.0 - 1e-9 || cand > 1.0 + 1e-9) continue;
      const double err =
          std::fabs((rho * cand * cand * cand + (2.0 - rho) * cand + 2.0) / 4.0 - u);
      if (err < best_err) {
        best_err = err;
        best = cand;
      }
    }
    t = best;
  }
  return std::clamp(t, -1.0, 1.0);
}

}  // namespace detail

// Inverse-transform sampler on S^2 at order 2 with rho > 0: the
// projected cdf along mu is a cubic with an explicit real root.
inline SphereSample sample_inverse_d2k2(const CardioidParams& p, Eigen::Index n,
                                        RngStream& rng) {
  if (p.d != 2 || p.k != 2) {
    throw std::domain_error("sample_inverse_d2k2: requires d = 2, k = 2");
  }
  if (p.rho <= 0.0) {
    throw capability_error("sample_inverse_d2k2: rho <= 0 is not supported");
  }
  if (n < 0) throw std::domain_error("sample_inverse_d2k2: n must be >= 0");
  SphereSample out;
  out.points.resize(n, 3);
  out.d = 2;
  out.generated = true;
  out.sampler = SamplerKind::inverse_d2k2;
  const Eigen::MatrixXd tangent = tangent_basis(p.mu).matrix;
  const Eigen::VectorXd mu = p.mu.coords();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = detail::inverse_cdf_t(p.rho, rng.uniform());
    const Eigen::VectorXd xi = detail::uniform_tangent_direction(2, rng);
    out.points.row(i) = detail::compose_from_projection(mu, tangent, t, xi).transpose();
  }
  return out;
}

// Dispatcher.  `automatic` picks the inverse transform for
// (d = 2, k = 2, rho > 0), the rejection-free route for odd k, and
// accept-reject otherwise; an explicit kind must be compatible.
inline SphereSample sample(const CardioidParams& p, Eigen::Index n, SamplerKind kind,
                           RngStream& rng) {
  if (kind == SamplerKind::automatic) {
    if (p.d == 2 && p.k == 2 && p.rho > 0.0) {
      kind = SamplerKind::inverse_d2k2;
    } else if (p.k % 2 == 1) {
      kind = SamplerKind::rejection_free_odd;
    } else {
      kind = SamplerKind::rejection;
    }
  }
  switch (kind) {
    case SamplerKind::rejection:
      return sample_rejection(p, n, rng);
    case SamplerKind::rejection_free_odd:
      return sample_rejection_free(p, n, rng);
    case SamplerKind::inverse_d2k2:
      return sample_inverse_d2k2(p, n, rng);
    default:
      throw std::domain_error("sample: unknown sampler kind");
  }
}

inline SphereSample sample(const CardioidParams& p, Eigen::Index n, RngStream& rng) {
  return sample(p, n, SamplerKind::automatic, rng);
}

}  // namespace sphcard
