#pragma once

// Goodness-of-fit tests for the spherical cardioid family, built on the
// projected empirical cdf: project the sample onto directions gamma, compare
// the empirical distribution of F_gamma(gamma' X_i) with the uniform law it
// has under the null, and aggregate over a direction measure lambda.  The
// null distribution of the statistic is approximated by a parametric
// bootstrap with estimated parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include <sphcard/cardioid.hpp>
#include <sphcard/common.hpp>
#include <sphcard/estimation.hpp>
#include <sphcard/geometry.hpp>
#include <sphcard/rng.hpp>
#include <sphcard/sampling.hpp>
#include <sphcard/specfun.hpp>

namespace sphcard {

enum class GofWeight { cvm, ad };

// Direction measure for the projection average: uniform on the sphere, the
// empirical measure of the sample itself, or the fitted null density.
enum class GofLambda { unif, empirical_pn, cardioid_null };

struct GofConfig {
  GofWeight weight = GofWeight::cvm;
  GofLambda lambda = GofLambda::unif;
  int mc_directions = 200;   // K, ignored when a closed or exact route applies
  int bootstrap_reps = 199;  // B
  std::uint64_t seed = 0;
  Estimator estimator = Estimator::ml;
  // When set, tests the simple null with these fixed parameters; no
  // estimation happens in either the original sample or the replicates.
  std::optional<CardioidParams> simple_null;
  // Reuse one set of lambda-directions across the original statistic and all
  // bootstrap replicates (variance reduction for the bootstrap comparison).
  // Off by default: each evaluation draws fresh directions.
  bool shared_directions = false;
  // Level for the bootstrap confidence interval / cap reported alongside a
  // composite test; skipped when the replicate count cannot support it.
  double ci_alpha = 0.05;
};

struct GofResult {
  double statistic = std::numeric_limits<double>::quiet_NaN();
  // MC standard error of `statistic` when it was computed by direction
  // sampling; exactly 0 for closed-form and empirical_pn routes.
  double statistic_se = 0.0;
  double pvalue = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> boot_stats;  // successful replicates only
  // Parameters the test ran against: the fit, or an echo of simple_null.
  // Always engaged on a successful return.
  std::optional<FitResult> fitted;
  int b_requested = 0;
  int b_effective = 0;
  int failed_replicates = 0;
  std::optional<std::pair<double, double>> ci_rho;
  // Bootstrap cap for the location: the set {mu : mu' mu_hat >= cap_mu}
  // (|mu' mu_hat| >= cap_mu for even order) has nominal coverage 1 - alpha.
  std::optional<double> cap_mu;
  std::string diagnostics;
};

// Statistic value with its Monte Carlo standard error over directions.
struct McStat {
  double value = 0.0;
  double se = 0.0;
};

namespace detail {

inline constexpr double kAdClampLo = 1e-300;
inline constexpr double kAdClampHi = 1.0 - 1e-16;

// One-direction statistic from raw probability transforms.  The vector is
// reordered in place (stable sort, so tied values keep sample order).  For
// the Anderson-Darling weight the log arguments are clamped away from the
// endpoints; `omit_top` drops the addend of the largest order statistic,
// which the data-direction average uses for the self-projection U = 1.
inline double sorted_stat(std::vector<double>& us, GofWeight weight,
                          bool omit_top = false) {
  const std::size_t n = us.size();
  if (n == 0) throw std::domain_error("sorted_stat: empty sample");
  std::stable_sort(us.begin(), us.end());
  if (weight == GofWeight::cvm) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double q = (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(n));
      double r = us[i] - q;
      acc += r * r;
    }
    return acc + 1.0 / (12.0 * static_cast<double>(n));
  }
  const std::size_t top = omit_top ? n - 1 : n;
  double acc = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    double u = std::clamp(us[i], kAdClampLo, kAdClampHi);
    double iw = 2.0 * static_cast<double>(i) + 1.0;
    double jw = 2.0 * (static_cast<double>(n) - static_cast<double>(i) - 1.0) + 1.0;
    acc += iw * std::log(u) + jw * std::log1p(-u);
  }
  return -static_cast<double>(n) - acc / static_cast<double>(n);
}

inline std::vector<double> probability_transforms(const SphereSample& s,
                                                  const ProjectedCdf& proj) {
  const Eigen::VectorXd coords = proj.gamma.coords();
  std::vector<double> us(static_cast<std::size_t>(s.n()));
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    us[static_cast<std::size_t>(i)] = proj.cdf(s.points.row(i).dot(coords));
  }
  return us;
}

// Draws K directions from lambda.  The fitted null at rho = 0 is uniform;
// routing it through the same generator as GofLambda::unif makes the two
// measures agree exactly for equal seeds, not just in distribution.
inline std::vector<UnitVector> draw_directions(const CardioidParams& p,
                                               GofLambda lambda, int count,
                                               RngStream& rng) {
  std::vector<UnitVector> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  if (lambda == GofLambda::unif || p.rho == 0.0) {
    for (int j = 0; j < count; ++j) dirs.push_back(uniform_sphere(p.d, rng));
  } else {
    SphereSample draws = sample(p, count, rng);
    for (Eigen::Index j = 0; j < draws.n(); ++j) {
      dirs.emplace_back(Eigen::VectorXd(draws.points.row(j).transpose()));
    }
  }
  return dirs;
}

inline McStat average_over_directions(const SphereSample& s,
                                      const CardioidParams& fitted,
                                      GofWeight weight,
                                      const std::vector<UnitVector>& dirs) {
  const std::size_t K = dirs.size();
  double sum = 0.0, sumsq = 0.0;
  for (const UnitVector& gamma : dirs) {
    std::vector<double> us =
        probability_transforms(s, ProjectedCdf{fitted, gamma});
    double v = sorted_stat(us, weight);
    sum += v;
    sumsq += v * v;
  }
  McStat out;
  out.value = sum / static_cast<double>(K);
  if (K > 1) {
    double var = (sumsq - static_cast<double>(K) * out.value * out.value) /
                 (static_cast<double>(K) - 1.0);
    out.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(K));
  }
  return out;
}

}  // namespace detail

// Statistic for a single, fixed projection direction.  Under the AD weight an
// exact 0 or 1 probability transform makes the statistic infinite; that is
// reported as an error here so the caller can decide how to handle the
// offending projection (the data-direction average omits it).
inline double stat_one_direction(const SphereSample& s, const ProjectedCdf& proj,
                                 GofWeight weight) {
  check_sample(s);
  if (s.d != proj.params.d) {
    throw std::domain_error("stat_one_direction: dimension mismatch");
  }
  std::vector<double> us = detail::probability_transforms(s, proj);
  if (weight == GofWeight::ad) {
    for (double u : us) {
      if (u <= 0.0 || u >= 1.0) {
        throw numeric_error(
            "stat_one_direction: probability transform hit an endpoint under "
            "the Anderson-Darling weight");
      }
    }
  }
  return detail::sorted_stat(us, weight);
}

// Monte Carlo direction average: K directions from lambda (uniform or the
// fitted null), statistic averaged across them, with the standard error of
// that average.  Deterministic given the stream state.
inline McStat stat_mc(const SphereSample& s, const CardioidParams& fitted,
                      GofWeight weight, GofLambda lambda, int mc_directions,
                      RngStream& rng) {
  check_sample(s);
  if (s.n() == 0) throw std::domain_error("stat_mc: empty sample");
  if (s.d != fitted.d) throw std::domain_error("stat_mc: dimension mismatch");
  if (mc_directions < 1) throw std::domain_error("stat_mc: need K >= 1");
  if (lambda == GofLambda::empirical_pn) {
    throw std::domain_error("stat_mc: use stat_pn_exact for the empirical measure");
  }
  std::vector<UnitVector> dirs =
      detail::draw_directions(fitted, lambda, mc_directions, rng);
  return detail::average_over_directions(s, fitted, weight, dirs);
}

// Exact average over the empirical direction measure: gamma runs over the
// data points themselves.  O(n^2 log n).  For the AD weight the self
// projection contributes U = 1 in every direction; its addend is omitted and
// n >= 2 is required so something remains.
inline double stat_pn_exact(const SphereSample& s, const CardioidParams& fitted,
                            GofWeight weight) {
  check_sample(s);
  if (s.n() == 0) throw std::domain_error("stat_pn_exact: empty sample");
  if (s.d != fitted.d) throw std::domain_error("stat_pn_exact: dimension mismatch");
  if (weight == GofWeight::ad && s.n() < 2) {
    throw std::domain_error("stat_pn_exact: AD weight needs n >= 2");
  }
  const Eigen::Index n = s.n();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    UnitVector gamma{Eigen::VectorXd(s.points.row(i).transpose())};
    std::vector<double> us =
        detail::probability_transforms(s, ProjectedCdf{fitted, gamma});
    acc += detail::sorted_stat(us, weight, /*omit_top=*/weight == GofWeight::ad);
  }
  return acc / static_cast<double>(n);
}

namespace detail {

inline bool cvm_closed_supported(int d, int k) {
  return (d == 1 && k >= 1) || (d == 2 && (k == 1 || k == 2));
}

// Uniformity part of the pair kernel: circle (chord angle theta) and sphere.
inline double psi_unif_circle(double theta) {
  double r = theta / (2.0 * std::numbers::pi_v<double>);
  return 0.5 + r * (r - 1.0);
}
inline double psi_unif_sphere(double theta) {
  return 0.5 - 0.25 * std::sin(0.5 * theta);
}

}  // namespace detail

// Closed form of the uniform-direction CvM statistic, available on the
// circle for any order and on S^2 for orders 1 and 2; other (d, k) raise a
// capability error and callers fall back to stat_mc.  Structure:
//   (3 - 2n)/6 - sum_i phi(X_i) + (2/n) sum_{i<j} psi(X_i, X_j),
// with phi, psi depending on the data only through m_i = mu_hat' X_i and
// t_ij = X_i' X_j.  Numerically degenerate pair configurations (antipodal on
// the circle, coincident on S^2 at order 2) drop the rho-dependent term,
// whose limit there is zero.
inline double stat_cvm_unif_closed(const SphereSample& s,
                                   const CardioidParams& fitted) {
  check_sample(s);
  if (s.n() == 0) throw std::domain_error("stat_cvm_unif_closed: empty sample");
  if (s.d != fitted.d) {
    throw std::domain_error("stat_cvm_unif_closed: dimension mismatch");
  }
  const int d = fitted.d;
  const int k = fitted.k;
  if (!detail::cvm_closed_supported(d, k)) {
    throw capability_error(
        "stat_cvm_unif_closed: closed form available only for d = 1 or "
        "(d, k) in {(2,1), (2,2)}");
  }
  const double rho = fitted.rho;
  const double pi = std::numbers::pi_v<double>;
  const Eigen::Index n = s.n();
  const Eigen::VectorXd mu = fitted.mu.coords();
  Eigen::VectorXd m = s.points * mu;  // m_i = mu_hat' X_i

  double phi_sum = 0.0;
  if (d == 1) {
    const double kk = static_cast<double>(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      double a = std::clamp(m[i], -1.0, 1.0);
      double tk = std::cos(kk * std::acos(a));
      double t2k = std::cos(2.0 * kk * std::acos(a));
      phi_sum += rho / (2.0 * pi * pi * kk * kk) *
                 (tk - 0.25 * rho * (2.0 - t2k));
    }
  } else if (k == 1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double a = m[i];
      phi_sum += rho / 30.0 * a -
                 0.25 * rho * rho * (2.0 / 35.0 - 4.0 * a * a / 105.0);
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      double a = m[i];
      double a2 = a * a;
      phi_sum += rho / 420.0 * (3.0 * a2 - 1.0) -
                 0.25 * rho * rho *
                     (1.0 / 330.0 + 3.0 * a2 / 385.0 - a2 * a2 / 110.0);
    }
  }

  double psi_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double t = std::clamp(s.points.row(i).dot(s.points.row(j)), -1.0, 1.0);
      double theta = std::acos(t);
      if (d == 1) {
        const double kk = static_cast<double>(k);
        double psi = detail::psi_unif_circle(theta);
        if (t > -1.0 + 1e-12) {
          double mid = (m[i] + m[j]) / std::sqrt(2.0 * (1.0 + t));
          mid = std::clamp(mid, -1.0, 1.0);
          psi -= rho * (pi - theta) / (2.0 * pi * pi * kk) *
                 std::cos(kk * std::acos(mid)) * std::sin(0.5 * kk * theta);
        }
        psi_sum += psi;
      } else if (k == 1) {
        double psi = detail::psi_unif_sphere(theta) -
                     rho / 32.0 * std::sqrt(0.5 * (1.0 - t)) * (m[i] + m[j]);
        psi_sum += psi;
      } else {
        double psi = detail::psi_unif_sphere(theta);
        if (t < 1.0 - 1e-12) {
          // The sign of the order-2 pair term is pinned by the identity
          //   E_g[|U_i - U_j|] = 1 - 2 psi(X_i, X_j),
          // checked against direct quadrature of the direction average.
          double brace = 0.5 * (1.0 + t) +
                         3.0 * (3.0 * t - 1.0) / (4.0 * (1.0 - t)) *
                             (m[i] * m[i] + m[j] * m[j]) +
                         3.0 * (t - 3.0) / (2.0 * (1.0 - t)) * m[i] * m[j];
          psi += rho / 128.0 * std::sqrt(0.5 * (1.0 - t)) * brace;
        }
        psi_sum += psi;
      }
    }
  }

  double nn = static_cast<double>(n);
  return (3.0 - 2.0 * nn) / 6.0 - phi_sum + 2.0 / nn * psi_sum;
}

// V-statistic form of the direction-averaged statistic, with the direction
// expectation replaced by a Monte Carlo average over `mc_expectation` draws.
// Same estimand as stat_mc, reached through the unsorted double-sum identity
// rather than order statistics; kept as an independent route for testing.
inline McStat stat_vform_oracle(const SphereSample& s,
                                const CardioidParams& fitted, GofWeight weight,
                                GofLambda lambda, int mc_expectation,
                                RngStream& rng) {
  check_sample(s);
  if (s.n() == 0) throw std::domain_error("stat_vform_oracle: empty sample");
  if (s.d != fitted.d) {
    throw std::domain_error("stat_vform_oracle: dimension mismatch");
  }
  if (mc_expectation < 1) throw std::domain_error("stat_vform_oracle: need K >= 1");
  if (lambda == GofLambda::empirical_pn) {
    throw std::domain_error("stat_vform_oracle: lambda must be a sampling measure");
  }
  std::vector<UnitVector> dirs =
      detail::draw_directions(fitted, lambda, mc_expectation, rng);
  const Eigen::Index n = s.n();
  const double nn = static_cast<double>(n);
  double sum = 0.0, sumsq = 0.0;
  for (const UnitVector& gamma : dirs) {
    std::vector<double> us =
        detail::probability_transforms(s, ProjectedCdf{fitted, gamma});
    double v;
    if (weight == GofWeight::cvm) {
      double single = 0.0, pair = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double ui = us[static_cast<std::size_t>(i)];
        single += ui * ui;
        for (Eigen::Index j = 0; j < n; ++j) {
          pair += std::max(ui, us[static_cast<std::size_t>(j)]);
        }
      }
      v = nn / 3.0 + single - pair / nn;
    } else {
      double single = 0.0, pair = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double ui = std::clamp(us[static_cast<std::size_t>(i)],
                               detail::kAdClampLo, detail::kAdClampHi);
        single += std::log1p(-ui);
        for (Eigen::Index j = 0; j < n; ++j) {
          double um = std::clamp(
              std::max(ui, us[static_cast<std::size_t>(j)]),
              detail::kAdClampLo, detail::kAdClampHi);
          pair += std::log(um) - std::log1p(-um);
        }
      }
      v = -nn - 2.0 * single - pair / nn;
    }
    sum += v;
    sumsq += v * v;
  }
  McStat out;
  const double K = static_cast<double>(mc_expectation);
  out.value = sum / K;
  if (mc_expectation > 1) {
    double var = (sumsq - K * out.value * out.value) / (K - 1.0);
    out.se = std::sqrt(std::max(var, 0.0) / K);
  }
  return out;
}

// --- Bootstrap calibration ----------------------------------------------

struct BootstrapCi {
  std::pair<double, double> rho;
  double cap_mu;
};

// Percentile interval for rho and a spherical cap threshold for mu from B
// bootstrap refits.  The cap is one-sided: it keeps directions whose overlap
// t = mu_b' mu_hat with the reference location (absolute overlap for even
// order, which only identifies mu up to sign) exceeds the alpha-quantile of
// the bootstrap overlaps.
inline BootstrapCi bootstrap_ci(const std::vector<FitResult>& boot_fits,
                                const UnitVector& mu_hat, double alpha, int k) {
  if (k < 1) throw std::domain_error("bootstrap_ci: order must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("bootstrap_ci: alpha must lie in (0, 1)");
  }
  const std::size_t B = boot_fits.size();
  if (static_cast<double>(B) < std::ceil(1.0 / alpha)) {
    throw std::domain_error(
        "bootstrap_ci: too few replicates to resolve the requested level");
  }
  std::vector<double> rhos(B), overlaps(B);
  const Eigen::VectorXd ref = mu_hat.coords();
  for (std::size_t b = 0; b < B; ++b) {
    rhos[b] = boot_fits[b].params.rho;
    double t = boot_fits[b].params.mu.coords().dot(ref);
    overlaps[b] = (k % 2 == 0) ? std::fabs(t) : t;
  }
  std::sort(rhos.begin(), rhos.end());
  std::sort(overlaps.begin(), overlaps.end());
  const double Bp1 = static_cast<double>(B) + 1.0;
  auto order_stat = [&](const std::vector<double>& v, double rank_1based) {
    auto r = static_cast<std::size_t>(
        std::clamp(rank_1based, 1.0, static_cast<double>(B)));
    return v[r - 1];
  };
  BootstrapCi out;
  out.rho = {order_stat(rhos, std::ceil(Bp1 * alpha / 2.0)),
             order_stat(rhos, std::floor(Bp1 * (1.0 - alpha / 2.0)))};
  out.cap_mu = order_stat(overlaps, std::ceil(alpha * Bp1));
  return out;
}

namespace detail {

inline FitResult gof_fit(const SphereSample& s, int k, Estimator est) {
  switch (est) {
    case Estimator::mm1:
      if (k != 1) {
        throw std::domain_error("bootstrap_test: mm1 fits order 1 only");
      }
      return fit_mm1(s);
    case Estimator::mm2:
      if (k != 2) {
        throw std::domain_error("bootstrap_test: mm2 fits order 2 only");
      }
      return fit_mm2(s, SignChoice::plus);
    case Estimator::ml:
      return fit_ml(s, k);
    case Estimator::gm:
      throw std::domain_error(
          "bootstrap_test: the known-location estimator needs a fixed mu and "
          "cannot drive a composite test");
  }
  throw std::domain_error("bootstrap_test: unknown estimator");
}

// Statistic dispatcher for the bootstrap: closed form when it applies
// (uniform lambda, CvM weight), exact data-direction average for the
// empirical measure, Monte Carlo otherwise.
struct GofStatEngine {
  GofWeight weight;
  GofLambda lambda;
  int mc_directions;
  const std::vector<UnitVector>* shared_dirs = nullptr;  // optional

  McStat eval(const SphereSample& s, const CardioidParams& fitted,
              RngStream& rng) const {
    if (lambda == GofLambda::empirical_pn) {
      return McStat{stat_pn_exact(s, fitted, weight), 0.0};
    }
    if (weight == GofWeight::cvm && lambda == GofLambda::unif &&
        cvm_closed_supported(fitted.d, fitted.k)) {
      return McStat{stat_cvm_unif_closed(s, fitted), 0.0};
    }
    if (shared_dirs != nullptr) {
      return average_over_directions(s, fitted, weight, *shared_dirs);
    }
    return stat_mc(s, fitted, weight, lambda, mc_directions, rng);
  }
};

inline constexpr std::uint64_t kGofDirectionsTag = 0x6D1Aull;
inline constexpr std::uint64_t kGofOriginalTag = 0x0A10ull;
inline constexpr std::uint64_t kGofReplicateTag = 0xB007ull;

}  // namespace detail

// Parametric bootstrap test of the order-k cardioid null.  Fits the sample
// (unless a simple null fixes the parameters), computes the projected-ecdf
// statistic, then rebuilds its null distribution from B simulated samples of
// the fitted law, refitting each with the same estimator.  The p-value is
// (1 + #{T*_b > T}) / (B_eff + 1).  A replicate whose refit fails is retried
// once on a fresh stream and then dropped; more than 5% dropped replicates
// abort the test.  Everything is deterministic in cfg.seed: replicate b owns
// the substream (seed, b), so the result does not depend on evaluation order.
inline GofResult bootstrap_test(const SphereSample& s, int k,
                                const GofConfig& cfg) {
  check_sample(s);
  if (k < 1) throw std::domain_error("bootstrap_test: order must be >= 1");
  detail::validate_basis(PolyBasis{s.d, k});
  if (cfg.bootstrap_reps < 19) {
    throw std::domain_error("bootstrap_test: need B >= 19");
  }
  if (cfg.mc_directions < 1) {
    throw std::domain_error("bootstrap_test: need K >= 1");
  }

  GofResult out;
  out.b_requested = cfg.bootstrap_reps;

  // Step 1: null parameters.
  if (cfg.simple_null) {
    const CardioidParams& p0 = *cfg.simple_null;
    if (p0.d != s.d || p0.k != k) {
      throw std::domain_error(
          "bootstrap_test: simple null dimensions do not match the request");
    }
    out.fitted = FitResult{cfg.estimator, p0};
    out.fitted->diagnostics = "simple_null;";
  } else {
    out.fitted = detail::gof_fit(s, k, cfg.estimator);
  }
  const CardioidParams& null_params = out.fitted->params;

  RngStream root(cfg.seed);

  // Optional shared direction set for the whole test.
  std::vector<UnitVector> shared;
  detail::GofStatEngine engine{cfg.weight, cfg.lambda, cfg.mc_directions};
  if (cfg.shared_directions && cfg.lambda != GofLambda::empirical_pn) {
    RngStream dir_rng = root.substream(detail::kGofDirectionsTag);
    shared = detail::draw_directions(null_params, cfg.lambda,
                                     cfg.mc_directions, dir_rng);
    engine.shared_dirs = &shared;
  }

  // Step 2: observed statistic.
  {
    RngStream stat_rng = root.substream(detail::kGofOriginalTag);
    McStat t = engine.eval(s, null_params, stat_rng);
    out.statistic = t.value;
    out.statistic_se = t.se;
  }

  // Step 3: replicates.  Refits use the original fitted order and estimator;
  // the replicate statistic is evaluated at the replicate's own refit.
  const Eigen::Index n = s.n();
  std::vector<FitResult> boot_fits;
  boot_fits.reserve(static_cast<std::size_t>(cfg.bootstrap_reps));
  out.boot_stats.reserve(static_cast<std::size_t>(cfg.bootstrap_reps));
  for (int b = 1; b <= cfg.bootstrap_reps; ++b) {
    bool done = false;
    for (int attempt = 0; attempt < 2 && !done; ++attempt) {
      RngStream rep = root.substream(
          {detail::kGofReplicateTag, static_cast<std::uint64_t>(b),
           static_cast<std::uint64_t>(attempt)});
      try {
        SphereSample rep_sample = sample(null_params, n, rep);
        FitResult rep_fit = cfg.simple_null
                                ? *out.fitted
                                : detail::gof_fit(rep_sample, k, cfg.estimator);
        McStat t = engine.eval(rep_sample, rep_fit.params, rep);
        out.boot_stats.push_back(t.value);
        boot_fits.push_back(std::move(rep_fit));
        done = true;
      } catch (const degenerate_error&) {
      } catch (const ml_error&) {
      } catch (const numeric_error&) {
      }
    }
    if (!done) ++out.failed_replicates;
  }
  out.b_effective = static_cast<int>(out.boot_stats.size());
  if (out.failed_replicates > 0) {
    out.diagnostics += "dropped_replicates=" +
                       std::to_string(out.failed_replicates) + ";";
  }
  if (static_cast<double>(out.failed_replicates) >
      0.05 * static_cast<double>(cfg.bootstrap_reps)) {
    throw numeric_error(
        "bootstrap_test: more than 5% of replicates failed to refit");
  }

  // Step 4: exact p-value.
  int exceed = 0;
  for (double t : out.boot_stats) {
    if (t > out.statistic) ++exceed;
  }
  out.pvalue = (1.0 + static_cast<double>(exceed)) /
               (static_cast<double>(out.b_effective) + 1.0);

  // Bootstrap interval and cap for a composite test, when B supports alpha.
  if (!cfg.simple_null &&
      static_cast<double>(out.b_effective) >= std::ceil(1.0 / cfg.ci_alpha)) {
    BootstrapCi ci =
        bootstrap_ci(boot_fits, null_params.mu, cfg.ci_alpha, k);
    out.ci_rho = ci.rho;
    out.cap_mu = ci.cap_mu;
  }
  return out;
}

}  // namespace sphcard
