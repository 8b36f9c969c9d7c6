#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "sphcard/rng.hpp"
#include "sphcard/specfun.hpp"

using namespace sphcard;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi_v<double>;

std::vector<double> random_unit(int dim, RngStream& rng) {
  std::vector<double> v(dim);
  double nrm = 0.0;
  do {
    nrm = 0.0;
    for (auto& c : v) {
      c = rng.normal();
      nrm += c * c;
    }
  } while (nrm < 1e-12);
  nrm = std::sqrt(nrm);
  for (auto& c : v) c /= nrm;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace

TEST_CASE("surface_area matches closed values and general formula") {
  CHECK(surface_area(0) == Approx(2.0).epsilon(1e-15));
  CHECK(surface_area(1) == Approx(2.0 * kPi).epsilon(1e-15));
  CHECK(surface_area(2) == Approx(4.0 * kPi).epsilon(1e-15));
  CHECK(surface_area(3) == Approx(2.0 * kPi * kPi).epsilon(1e-15));
  CHECK(surface_area(4) == Approx(8.0 * kPi * kPi / 3.0).epsilon(1e-14));
  CHECK(surface_area(5) == Approx(kPi * kPi * kPi).epsilon(1e-14));
  CHECK_THROWS_AS(surface_area(-1), std::domain_error);
}

TEST_CASE("basis_constants reproduces known low-order values") {
  SECTION("k=1, d=2") {
    auto c = basis_constants(1, 2);
    CHECK(c.tau == Approx(3.0).epsilon(1e-15));
    CHECK(c.dim_harm == Approx(3.0).epsilon(1e-15));
    CHECK(c.c_at_one == Approx(1.0).epsilon(1e-15));
  }
  SECTION("k=2, d=2") {
    auto c = basis_constants(2, 2);
    CHECK(c.tau == Approx(5.0).epsilon(1e-15));
    CHECK(c.dim_harm == Approx(5.0).epsilon(1e-15));
  }
  SECTION("circle cases") {
    auto c0 = basis_constants(0, 1);
    // tau = dim_harm = 1 at degree zero keeps c_at_one = dim_harm/tau = T_0(1)
    CHECK(c0.tau == Approx(1.0).epsilon(1e-15));
    CHECK(c0.dim_harm == Approx(1.0).epsilon(1e-15));
    CHECK(c0.c_norm == Approx(kPi).epsilon(1e-15));
    auto c3 = basis_constants(3, 1);
    CHECK(c3.tau == Approx(2.0).epsilon(1e-15));
    CHECK(c3.dim_harm == Approx(2.0).epsilon(1e-15));
    CHECK(c3.c_norm == Approx(kPi / 2.0).epsilon(1e-15));
    CHECK(c3.c_at_one == Approx(1.0).epsilon(1e-15));
  }
  SECTION("harmonic dimensions at degrees one and two") {
    for (int d = 2; d <= 8; ++d) {
      CHECK(basis_constants(1, d).dim_harm == Approx(d + 1.0).epsilon(1e-15));
      CHECK(basis_constants(2, d).dim_harm == Approx(d * (d + 3.0) / 2.0).epsilon(1e-15));
    }
  }
  SECTION("internal consistency over a sweep") {
    for (int d = 1; d <= 6; ++d) {
      for (int k = 0; k <= 10; ++k) {
        auto c = basis_constants(k, d);
        CHECK(c.tau > 0.0);
        CHECK(c.dim_harm >= 1.0);
        CHECK(c.dim_harm == Approx(std::round(c.dim_harm)).margin(1e-9));
        CHECK(c.c_at_one == Approx(c.dim_harm / c.tau).epsilon(1e-13));
        double expected = surface_area(d) / surface_area(d - 1) * c.dim_harm / (c.tau * c.tau);
        CHECK(c.c_norm == Approx(expected).epsilon(1e-13));
        // value at one from the recurrence agrees with the combinatorial form
        CHECK(gegenbauer(PolyBasis{d, k}, 1.0) == Approx(c.c_at_one).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gegenbauer evaluates correctly") {
  SECTION("pinned values") {
    CHECK(gegenbauer(PolyBasis{3, 2}, 0.5) == Approx(0.0).margin(1e-14));
    CHECK(gegenbauer(PolyBasis{1, 5}, 1.0) == Approx(1.0).epsilon(1e-14));
    CHECK(gegenbauer(PolyBasis{4, 7}, -0.3) ==
          Approx(oracles::gegenbauer_series(4, 7, -0.3)).epsilon(1e-12));
  }
  SECTION("recurrence agrees with explicit series") {
    RngStream rng(20240817);
    for (int trial = 0; trial < 200; ++trial) {
      double x = 2.0 * rng.uniform() - 1.0;
      for (int d = 1; d <= 6; ++d) {
        for (int k = 0; k <= 10; ++k) {
          double got = gegenbauer(PolyBasis{d, k}, x);
          double want = oracles::gegenbauer_series(d, k, x);
          double scale = std::max(1.0, std::fabs(want));
          CHECK(std::fabs(got - want) <= 1e-10 * scale);
        }
      }
    }
  }
  SECTION("input validation") {
    CHECK_NOTHROW(gegenbauer(PolyBasis{2, 3}, 1.0 + 1e-13));
    CHECK_THROWS_AS(gegenbauer(PolyBasis{2, 3}, 1.0 + 1e-11), std::domain_error);
    CHECK_THROWS_AS(gegenbauer(PolyBasis{0, 3}, 0.5), std::domain_error);
    CHECK_THROWS_AS(gegenbauer(PolyBasis{2, -1}, 0.5), std::domain_error);
    CHECK_THROWS_AS(gegenbauer(PolyBasis{2, 65}, 0.5), capability_error);
  }
}

TEST_CASE("gegenbauer_tilde is the unit-normalized polynomial") {
  for (int d : {1, 2, 5}) {
    CHECK(gegenbauer_tilde(PolyBasis{d, 1}, 0.7) == Approx(0.7).epsilon(1e-14));
  }
  CHECK(gegenbauer_tilde(PolyBasis{2, 2}, 0.0) == Approx(-0.5).epsilon(1e-14));
  CHECK(gegenbauer_tilde(PolyBasis{5, 3}, 1.0) == Approx(1.0).epsilon(1e-13));

  SECTION("parity and boundedness") {
    RngStream rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      double x = 2.0 * rng.uniform() - 1.0;
      for (int d = 1; d <= 5; ++d) {
        for (int k = 0; k <= 8; ++k) {
          double p = gegenbauer_tilde(PolyBasis{d, k}, x);
          double q = gegenbauer_tilde(PolyBasis{d, k}, -x);
          double signd = (k % 2 == 0) ? q : -q;
          CHECK(std::fabs(p - signd) <= 1e-14 * std::max(1.0, std::fabs(p)));
          CHECK(std::fabs(p) <= 1.0 + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("gegenbauer_deriv matches finite differences and endpoint limits") {
  SECTION("degree one is constant") {
    CHECK(gegenbauer_deriv(PolyBasis{2, 1}, 0.3) == Approx(1.0).epsilon(1e-14));
    CHECK(gegenbauer_deriv(PolyBasis{4, 1}, -0.9) == Approx(3.0).epsilon(1e-14));
  }
  SECTION("finite-difference agreement") {
    double fd = oracles::central_diff(
        [](double t) { return gegenbauer(PolyBasis{2, 2}, t); }, 0.25, 1e-5);
    CHECK(gegenbauer_deriv(PolyBasis{2, 2}, 0.25) == Approx(fd).margin(1e-6));
    RngStream rng(99);
    for (int trial = 0; trial < 50; ++trial) {
      double x = 1.8 * rng.uniform() - 0.9;
      for (int d = 1; d <= 4; ++d) {
        for (int k = 0; k <= 6; ++k) {
          double fd2 = oracles::central_diff(
              [&](double t) { return gegenbauer(PolyBasis{d, k}, t); }, x, 1e-5);
          double got = gegenbauer_deriv(PolyBasis{d, k}, x);
          CHECK(std::fabs(got - fd2) <= 1e-5 * std::max(1.0, std::fabs(got)));
        }
      }
    }
  }
  SECTION("circle at interior and endpoint values") {
    CHECK(gegenbauer_deriv(PolyBasis{1, 3}, 0.0) == Approx(-3.0).epsilon(1e-13));
    CHECK(gegenbauer_deriv(PolyBasis{1, 3}, 1.0) == Approx(9.0).epsilon(1e-13));
    CHECK(gegenbauer_deriv(PolyBasis{1, 3}, -1.0) == Approx(9.0).epsilon(1e-13));
    CHECK(gegenbauer_deriv(PolyBasis{1, 2}, -1.0) == Approx(-4.0).epsilon(1e-13));
    // trig path just inside the endpoint guard agrees with U_{k-1}
    double x = 1.0 - 1e-9;
    CHECK(gegenbauer_deriv(PolyBasis{1, 4}, x) ==
          Approx(4.0 * oracles::chebyshev_u(3, x)).epsilon(1e-9));
  }
}

TEST_CASE("reg_inc_beta matches quadrature oracle") {
  CHECK(reg_inc_beta(0.0, 2.0, 3.0) == 0.0);
  CHECK(reg_inc_beta(1.0, 2.0, 3.0) == 1.0);
  CHECK(reg_inc_beta(0.25, 0.5, 1.0) == Approx(0.5).epsilon(1e-13));
  CHECK(reg_inc_beta(0.5, 2.0, 2.0) == Approx(0.5).epsilon(1e-13));

  SECTION("grid agreement") {
    for (double a : {0.5, 1.0, 2.5, 7.0}) {
      for (double b : {0.5, 1.0, 2.5, 7.0}) {
        for (double x : {0.1, 0.37, 0.5, 0.82, 0.95}) {
          double want = oracles::inc_beta_quadrature(x, a, b);
          CHECK(std::fabs(reg_inc_beta(x, a, b) - want) <= 1e-12);
        }
      }
    }
  }
  SECTION("monotone in x") {
    RngStream rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      double a = 0.2 + 5.0 * rng.uniform();
      double b = 0.2 + 5.0 * rng.uniform();
      double prev = 0.0;
      for (int i = 1; i <= 50; ++i) {
        double cur = reg_inc_beta(i / 50.0, a, b);
        CHECK(cur >= prev - 1e-15);
        prev = cur;
      }
    }
  }
  SECTION("input validation") {
    CHECK_THROWS_AS(reg_inc_beta(-0.1, 1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(reg_inc_beta(1.1, 1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(reg_inc_beta(0.5, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(reg_inc_beta(0.5, 1.0, -2.0), std::domain_error);
  }
}

TEST_CASE("bessel_first_kind handles modified and oscillatory branches") {
  SECTION("pinned values") {
    double want = std::sqrt(2.0 / (kPi * 1.0)) * std::sinh(1.0);
    CHECK(bessel_first_kind(0.5, 1.0, true) == Approx(want).epsilon(1e-12));
    CHECK(std::fabs(bessel_first_kind(0.5, kPi, false)) < 1e-14);
    CHECK(bessel_first_kind(0.0, 0.0, true) == 1.0);
    CHECK(bessel_first_kind(1.5, 0.0, true) == 0.0);
    CHECK(bessel_first_kind(0.0, 0.0, false) == 1.0);
    CHECK(bessel_first_kind(2.0, 0.0, false) == 0.0);
  }
  SECTION("modified agrees with closed half-integer forms") {
    auto i_half = [](double x) { return std::sqrt(2.0 / (kPi * x)) * std::sinh(x); };
    auto i_3half = [](double x) {
      return std::sqrt(2.0 / (kPi * x)) * (std::cosh(x) - std::sinh(x) / x);
    };
    auto i_5half = [](double x) {
      return std::sqrt(2.0 / (kPi * x)) *
             ((3.0 / (x * x) + 1.0) * std::sinh(x) - 3.0 * std::cosh(x) / x);
    };
    for (double x : {0.3, 1.0, 5.0, 20.0, 50.0}) {
      CHECK(bessel_first_kind(0.5, x, true) == Approx(i_half(x)).epsilon(1e-11));
      CHECK(bessel_first_kind(1.5, x, true) == Approx(i_3half(x)).epsilon(1e-11));
      CHECK(bessel_first_kind(2.5, x, true) == Approx(i_5half(x)).epsilon(1e-10));
    }
    // upward ladder oracle is stable for order below the argument
    for (double x : {6.0, 12.0, 35.0}) {
      for (double nu : {3.5, 4.5, 5.5}) {
        CHECK(bessel_first_kind(nu, x, true) ==
              Approx(oracles::bessel_i_half_ladder(nu, x)).epsilon(1e-10));
      }
    }
  }
  SECTION("oscillatory agrees with integral oracle at integer order") {
    for (int nu : {0, 1, 2, 5, 10}) {
      for (double x : {0.5, 2.0, 10.0, 30.0, 50.0}) {
        double want = oracles::bessel_j_integral(nu, x);
        CHECK(std::fabs(bessel_first_kind(nu, x, false) - want) <= 1e-10);
      }
    }
  }
  SECTION("oscillatory agrees with half-integer ladder oracle") {
    struct Case {
      double nu, x;
    };
    for (auto c : {Case{0.5, 2.0}, Case{1.5, 5.0}, Case{2.5, 10.0}, Case{4.5, 20.0}}) {
      double want = oracles::bessel_j_half_ladder(c.nu, c.x);
      CHECK(std::fabs(bessel_first_kind(c.nu, c.x, false) - want) <=
            1e-10 * std::max(1.0, std::fabs(want)));
    }
  }
  SECTION("series and recurrence branches meet smoothly") {
    for (int nu : {0, 1, 3, 5}) {
      double edge = 2.0 * std::sqrt(nu + 1.0);
      for (double x : {edge - 1e-3, edge + 1e-3}) {
        double want = oracles::bessel_j_integral(nu, x);
        CHECK(std::fabs(bessel_first_kind(nu, x, false) - want) <= 1e-10);
      }
    }
  }
  SECTION("scaled modified series") {
    double nu = 2.5, alpha = 1.5, x = 2.0;
    double scaled = detail::bessel_i_scaled(nu, x, alpha);
    CHECK(scaled * std::pow(0.5 * x, alpha) ==
          Approx(bessel_first_kind(nu, x, true)).epsilon(1e-12));
    CHECK(detail::bessel_i_scaled(1.5, 0.0, 1.5) ==
          Approx(std::exp(-std::lgamma(2.5))).epsilon(1e-14));
    CHECK(detail::bessel_i_scaled(3.5, 0.0, 1.5) == 0.0);
  }
  SECTION("input validation") {
    CHECK_THROWS_AS(bessel_first_kind(0.5, -1.0, true), std::domain_error);
    CHECK_THROWS_AS(bessel_first_kind(-0.5, 1.0, true), std::domain_error);
    CHECK_THROWS_AS(bessel_first_kind(0.3, 1.0, false), std::domain_error);
  }
}

TEST_CASE("quadrature_nodes produce classical rules") {
  SECTION("Gauss-Legendre low orders") {
    auto q1 = quadrature_nodes(QuadRule::gauss_legendre, 1);
    REQUIRE(q1.size() == 1);
    CHECK(q1[0].node == Approx(0.0).margin(1e-15));
    CHECK(q1[0].weight == Approx(2.0).epsilon(1e-15));
    auto q2 = quadrature_nodes(QuadRule::gauss_legendre, 2);
    REQUIRE(q2.size() == 2);
    CHECK(std::fabs(q2[0].node) == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(q2[0].weight == Approx(1.0).epsilon(1e-14));
    CHECK(q2[1].weight == Approx(1.0).epsilon(1e-14));
  }
  SECTION("weights sum and polynomial exactness") {
    auto gl = quadrature_nodes(QuadRule::gauss_legendre, 20);
    double wsum = 0.0, p38 = 0.0, p8 = 0.0;
    for (auto [x, w] : gl) {
      CHECK(std::fabs(x) < 1.0);
      wsum += w;
      p38 += w * std::pow(x, 38);
      p8 += w * std::pow(x, 8);
    }
    CHECK(wsum == Approx(2.0).epsilon(1e-14));
    CHECK(p38 == Approx(2.0 / 39.0).epsilon(1e-12));
    CHECK(p8 == Approx(2.0 / 9.0).epsilon(1e-13));
  }
  SECTION("Gauss-Chebyshev orthogonality constants") {
    auto gc = quadrature_nodes(QuadRule::gauss_chebyshev, 64);
    double wsum = 0.0, t44 = 0.0, t35 = 0.0;
    for (auto [x, w] : gc) {
      CHECK(std::fabs(x) < 1.0);
      double t3 = gegenbauer(PolyBasis{1, 3}, x);
      double t4 = gegenbauer(PolyBasis{1, 4}, x);
      double t5 = gegenbauer(PolyBasis{1, 5}, x);
      wsum += w;
      t44 += w * t4 * t4;
      t35 += w * t3 * t5;
    }
    CHECK(wsum == Approx(kPi).epsilon(1e-14));
    CHECK(t44 == Approx(kPi / 2.0).margin(1e-12));
    CHECK(t35 == Approx(0.0).margin(1e-12));
  }
  SECTION("input validation") {
    CHECK_THROWS_AS(quadrature_nodes(QuadRule::gauss_legendre, 0), std::domain_error);
  }
}

TEST_CASE("uniform average of products reduces to a single polynomial") {
  // The mean of C_k(g'u) C_m(g'v) over uniform g on the sphere equals
  // delta_{k,m} C_k(u'v)/tau; checked by Monte Carlo with 3-sigma bars.
  struct Case {
    int d, k, m;
  };
  RngStream rng(424242);
  for (auto c : {Case{2, 1, 1}, Case{2, 2, 2}, Case{2, 1, 2}, Case{3, 2, 2}}) {
    auto u = random_unit(c.d + 1, rng);
    auto v = random_unit(c.d + 1, rng);
    const int n = 200000;
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) {
      auto g = random_unit(c.d + 1, rng);
      vals[i] = gegenbauer(PolyBasis{c.d, c.k}, dot(g, u)) *
                gegenbauer(PolyBasis{c.d, c.m}, dot(g, v));
    }
    double m = oracles::mean(vals);
    double se = oracles::sample_sd(vals) / std::sqrt(static_cast<double>(n));
    double want = 0.0;
    if (c.k == c.m) {
      want = gegenbauer(PolyBasis{c.d, c.k}, dot(u, v)) / basis_constants(c.k, c.d).tau;
    }
    INFO("d=" << c.d << " k=" << c.k << " m=" << c.m);
    CHECK(std::fabs(m - want) <= 3.0 * se + 1e-12);
  }
}
