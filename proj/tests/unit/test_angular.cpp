#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "../support/dm_oracles.hpp"
#include "dmpot/angular.hpp"
#include "dmpot/error.hpp"

using namespace dmpot;

namespace {

DMParams uniform2() { return DMParams::barycentric(2, 2.0); }

DMParams point_mass(std::size_t d) { return DMParams::barycentric(d, 1e16); }

double gk(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

}  // namespace

TEST_SUITE("angular") {
  TEST_CASE("Dirichlet density values") {
    const DirichletComponent uni{{0.5, 0.5}, 2.0};
    for (double w : {0.1, 0.37, 0.5, 0.93}) {
      const std::vector<double> x{w, 1 - w};
      CHECK(dirichlet_density(x, uni) == doctest::Approx(1.0).epsilon(1e-13));
    }
    const DirichletComponent four{{0.5, 0.5}, 4.0};
    const std::vector<double> mid{0.5, 0.5};
    CHECK(dirichlet_density(mid, four) == doctest::Approx(1.5).epsilon(1e-13));
  }

  TEST_CASE("Dirichlet density integrates to one on the segment") {
    for (const DirichletComponent& c : {DirichletComponent{{0.3, 0.7}, 5.0}, DirichletComponent{{0.5, 0.5}, 40.0},
                                        DirichletComponent{{0.8, 0.2}, 3.0}}) {
      boost::math::quadrature::tanh_sinh<double> ts;
      const double total = ts.integrate(
          [&](double w) {
            const std::vector<double> x{w, 1 - w};
            return dirichlet_density(x, c);
          },
          0.0, 1.0);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("mixture density is the weighted sum") {
    DMParams psi{{0.5, 0.5}, {{{0.3, 0.7}, 5.0}, {{0.7, 0.3}, 9.0}}};
    const std::vector<double> w{0.42, 0.58};
    const double hand = 0.5 * dirichlet_density(w, psi.components[0]) + 0.5 * dirichlet_density(w, psi.components[1]);
    CHECK(dm_density(w, psi) == doctest::Approx(hand).epsilon(1e-13));
    DMParams one{{1.0}, {{{0.5, 0.5}, 7.0}}};
    CHECK(dm_density(w, one) == doctest::Approx(dirichlet_density(w, one.components[0])).epsilon(1e-13));
    MixtureDensity md(psi);
    const std::vector<double> lw{std::log(0.42), std::log(0.58)};
    CHECK(md.log_density_from_logs(lw) == doctest::Approx(std::log(hand)).epsilon(1e-13));
  }

  TEST_CASE("mixture mean is the barycenter") {
    DMParams psi{{0.5, 0.5}, {{{0.3, 0.7}, 5.0}, {{0.7, 0.3}, 9.0}}};
    const double m = gk(
        [&](double w) {
          const std::vector<double> x{w, 1 - w};
          return w * dm_density(x, psi);
        },
        0.0, 1.0);
    CHECK(m == doctest::Approx(0.5).epsilon(1e-8));
  }

  TEST_CASE("last center solves the moment constraint") {
    const std::vector<double> p{0.5, 0.5};
    const std::vector<std::vector<double>> free{{0.3, 0.7}};
    auto c = solve_last_center(p, free, 2);
    REQUIRE(c.has_value());
    CHECK((*c)[0] == doctest::Approx(0.7).epsilon(1e-14));
    CHECK((*c)[1] == doctest::Approx(0.3).epsilon(1e-14));

    const std::vector<double> q{0.9, 0.1};
    CHECK_FALSE(solve_last_center(q, free, 2).has_value());

    const std::vector<double> one{1.0};
    auto b = solve_last_center(one, std::span<const std::vector<double>>{}, 3);
    REQUIRE(b.has_value());
    for (double x : *b) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  TEST_CASE("validation catches broken parameters") {
    DMParams psi{{0.5, 0.5}, {{{0.3, 0.7}, 5.0}, {{0.6, 0.4}, 9.0}}};
    CHECK(psi.moment_defect() == doctest::Approx(0.05));
    CHECK_THROWS_AS(psi.validate(), NumericalError);
    CHECK(resolve_last_center(psi));
    CHECK(psi.moment_defect() < 1e-15);
    CHECK_NOTHROW(psi.validate());
    psi.weights = {0.6, 0.6};
    CHECK_THROWS_AS(psi.validate(), NumericalError);
  }

  TEST_CASE("sampler mean sits at the barycenter") {
    std::mt19937_64 rng(4);
    const auto psi = dm_oracles::random_params(rng, 3, 3, 1.0, 30.0);
    const std::size_t n = 1000000;
    const auto pts = sample_dm(psi, n, 77);
    REQUIRE(pts.size() == n);
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0, s2 = 0;
      for (const auto& pt : pts) {
        s += pt.w[j];
        s2 += pt.w[j] * pt.w[j];
      }
      const double m = s / n, se = std::sqrt((s2 / n - m * m) / n);
      CHECK(std::abs(m - 1.0 / 3.0) < 3 * se);
    }
  }

  TEST_CASE("large shape concentrates draws at the center") {
    DMParams psi{{1.0}, {{{0.2, 0.3, 0.5}, 1e6}}};
    const auto pts = sample_dm(psi, 2000, 5);
    for (const auto& pt : pts) CHECK(std::abs(pt.w[0] - 0.2) < 0.01);
  }

  TEST_CASE("component frequencies follow the weights") {
    // components far apart on the segment make membership readable from w
    DMParams psi{{0.25, 0.75}, {{{0.9, 0.1}, 2000.0}, {{0.5 / 0.75 - 0.25 * 0.9 / 0.75, 0.0}, 2000.0}}};
    psi.components[1].center[1] = 1.0 - psi.components[1].center[0];
    psi.validate();
    const std::size_t n = 200000;
    const auto pts = sample_dm(psi, n, 8);
    std::size_t first = 0;
    for (const auto& pt : pts) first += pt.w[0] > 0.7;
    const double se = std::sqrt(0.25 * 0.75 / n);
    CHECK(std::abs(double(first) / n - 0.25) < 3 * se);
  }

  TEST_CASE("exponent density homogeneity and value") {
    const std::vector<double> one{1.0, 1.0};
    CHECK(exponent_density(one, uniform2()) == doctest::Approx(0.25).epsilon(1e-13));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int t = 0; t < 100; ++t) {
      const auto psi = dm_oracles::random_params(rng, 3, 2);
      const std::vector<double> x{u(rng), u(rng), u(rng)};
      const double c = u(rng);
      const std::vector<double> cx{c * x[0], c * x[1], c * x[2]};
      CHECK(log_exponent_density(cx, psi) == doctest::Approx(log_exponent_density(x, psi) - 4 * std::log(c)).epsilon(1e-12));
    }
  }

  TEST_CASE("exponent density integrates to the angular mass over a radial region") {
    DMParams psi{{0.5, 0.5}, {{{0.3, 0.7}, 5.0}, {{0.7, 0.3}, 9.0}}};
    const double r0 = 2.5, b = 0.3;
    // polar coordinates x = r (w, 1 - w); dx = r dr dw
    const double lhs = gk(
        [&](double t) {
          const double r = r0 / t;  // r in (r0, inf), dr = r0 / t^2 dt
          const double inner = gk(
              [&](double w) {
                const std::vector<double> x{r * w, r * (1 - w)};
                return exponent_density(x, psi) * r;
              },
              0.0, b);
          return inner * r0 / (t * t);
        },
        0.0, 1.0);
    const double hb = gk(
        [&](double w) {
          const std::vector<double> x{w, 1 - w};
          return dm_density(x, psi);
        },
        0.0, b);
    CHECK(lhs == doctest::Approx(2.0 * hb / r0).epsilon(1e-6));
  }

  TEST_CASE("exponent measure analytic fixtures") {
    for (double u : {1.0, 475.7, 1e4}) {
      const std::vector<double> uu{u, u};
      CHECK(exponent_measure_region(uu, uniform2()).value == doctest::Approx(1.5 / u).epsilon(1e-8));
      CHECK(exponent_measure_region(uu, point_mass(2)).value == doctest::Approx(1.0 / u).epsilon(1e-6));
    }
    const std::vector<double> none{kInf, kInf, kInf};
    CHECK(exponent_measure_region(none, DMParams::barycentric(3, 4.0)).value == 0.0);
  }

  TEST_CASE("exponent measure is homogeneous of degree -1") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(1.0, 1000.0);
    for (int t = 0; t < 20; ++t) {
      const auto psi = dm_oracles::random_params(rng, 3, 2);
      const std::vector<double> a{u(rng), u(rng), u(rng)};
      const std::vector<double> b{3 * a[0], 3 * a[1], 3 * a[2]};
      CHECK(exponent_measure_region(b, psi).value ==
            doctest::Approx(exponent_measure_region(a, psi).value / 3.0).epsilon(1e-8));
    }
  }

  TEST_CASE("quadrature and closed form agree on two coordinates") {
    std::mt19937_64 rng(13);
    RegionOptions quad{RegionMethod::Quadrature};
    RegionOptions closed{RegionMethod::ClosedForm};
    for (int t = 0; t < 20; ++t) {
      const auto psi = dm_oracles::random_params(rng, 3, 2);
      const std::vector<double> u{100.0, 250.0, kInf};
      CHECK(exponent_measure_region(u, psi, quad).value ==
            doctest::Approx(exponent_measure_region(u, psi, closed).value).epsilon(1e-8));
    }
    const std::vector<double> three{1.0, 1.0, 1.0};
    CHECK_THROWS((void)exponent_measure_region(three, DMParams::barycentric(3, 2.0), closed));
  }

  TEST_CASE("QMC estimate agrees with quadrature") {
    std::mt19937_64 rng(14);
    const auto psi = dm_oracles::random_params(rng, 4, 2, 1.0, 20.0);
    const std::vector<double> u{300.0, 500.0, 400.0, 700.0};
    const auto q = exponent_measure_region(u, psi, {RegionMethod::Quadrature});
    const auto m = exponent_measure_region(u, psi, {RegionMethod::QuasiMonteCarlo});
    CHECK(std::abs(m.value - q.value) < std::max(1e-3 * q.value, 4 * m.error));
  }

  TEST_CASE("exponent measure matches a small Monte Carlo oracle") {
    std::mt19937_64 rng(15);
    for (std::size_t d : {2u, 3u, 4u}) {
      const auto psi = dm_oracles::random_params(rng, d, 2);
      std::vector<double> u(d);
      for (auto& x : u) x = std::uniform_real_distribution<double>(50.0, 800.0)(rng);
      const auto mc = dm_oracles::lambda_mc(psi, u, 400000, 21);
      const double q = exponent_measure_region(u, psi).value;
      CHECK(std::abs(q - mc.mean) < std::max(1e-3 * q, 4 * mc.se));
    }
  }

  TEST_CASE("chi fixtures") {
    CHECK(chi_coefficient(0, 1, uniform2()) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(chi_coefficient(0, 1, point_mass(2)) == doctest::Approx(1.0).epsilon(1e-6));
    DMParams ends{{0.5, 0.5}, {{{0.999, 0.001}, 1e5}, {{0.001, 0.999}, 1e5}}};
    CHECK(chi_coefficient(0, 1, ends) < 0.01);
  }

  TEST_CASE("chi is symmetric and bounded") {
    std::mt19937_64 rng(16);
    for (int t = 0; t < 1000; ++t) {
      const std::size_t d = 2 + t % 3;
      const auto psi = dm_oracles::random_params(rng, d, 1 + t % 3);
      const double a = chi_coefficient(0, d - 1, psi), b = chi_coefficient(d - 1, 0, psi);
      CHECK(a == b);
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }

  TEST_CASE("chi closed form agrees with quadrature and Monte Carlo") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 10; ++t) {
      const auto psi = dm_oracles::random_params(rng, 3, 2);
      const double c = chi_coefficient(0, 2, psi);
      CHECK(chi_coefficient(0, 2, psi, ChiMethod::Quadrature) == doctest::Approx(c).epsilon(1e-8));
      const auto mc = dm_oracles::chi_mc(psi, 0, 2, 200000, 3 + t);
      CHECK(std::abs(c - mc.mean) < std::max(0.01, 3 * mc.se));
    }
  }

  TEST_CASE("pair margin aggregates the other coordinates") {
    DMParams psi{{0.5, 0.5}, {{{0.2, 0.3, 0.5}, 6.0}, {{0.4632, 0.3667, 1.0 - 0.4632 - 0.3667}, 4.0}}};
    resolve_last_center(psi);
    const auto pm = pair_margin(psi, 0, 2);
    REQUIRE(pm.dim() == 2);
    CHECK(pm.components[0].center[0] == doctest::Approx(0.2 / 0.7).epsilon(1e-14));
    CHECK(pm.components[0].shape == doctest::Approx(6.0 * 0.7).epsilon(1e-14));
    CHECK(chi_coefficient(0, 1, pm) == doctest::Approx(chi_coefficient(0, 2, psi)).epsilon(1e-10));
  }

  TEST_CASE("joint return periods") {
    CHECK(joint_return_period(10.0, 0.645) == doctest::Approx(15.5).epsilon(0.05 / 15.5));
    CHECK(independent_joint_return_period(10.0, 1.248) == doctest::Approx(100.0 * 365.0 / 1.248).epsilon(1e-14));
    CHECK(independent_joint_return_period(10.0, 1.248, 365.25) == doctest::Approx(100.0 * 365.25 / 1.248).epsilon(1e-14));
    CHECK(joint_return_period(10.0, 1.0) == 10.0);
    CHECK(std::isinf(joint_return_period(10.0, 0.0)));
  }

  TEST_CASE("conditional tail at equalized levels equals chi") {
    std::mt19937_64 rng(18);
    const auto psi = dm_oracles::random_params(rng, 3, 2);
    for (double x : {10.0, 475.7, 5000.0})
      CHECK(conditional_tail_frechet(0, 1, x, x, psi) == doctest::Approx(chi_coefficient(0, 1, psi)).epsilon(1e-8));
    CHECK(conditional_tail_frechet(0, 1, 500.0, 500.0, point_mass(3)) == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("conditional tail matches simulation from the generative model") {
    // points of the exceedance process above u_j: radius r ~ Pareto over (u_j/(d w_j)) scaled, angle ~ H
    std::mt19937_64 rng(19);
    const auto psi = dm_oracles::random_params(rng, 2, 2);
    const double uj = 400.0, xi = 900.0;
    dm_oracles::DirichletMixtureSampler s(psi);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    // Exceedance points: radial part with intensity d r^-2 dr, angle from H. Count points with
    // x_j > uj and, among them, those with x_i > xi; radii below uj never reach either set.
    const std::size_t n = 2000000;
    double hit_j = 0, hit_both = 0;
    std::vector<double> w;
    for (std::size_t t = 0; t < n; ++t) {
      s.draw(rng, w);
      const double r = uj / unif(rng);  // radius beyond uj with density proportional to r^-2
      if (r * w[1] > uj) {
        hit_j += 1;
        if (r * w[0] > xi) hit_both += 1;
      }
    }
    const double p = hit_both / hit_j, se = std::sqrt(p * (1 - p) / hit_j);
    CHECK(std::abs(conditional_tail_frechet(0, 1, xi, uj, psi) - p) < 3 * se + 1e-12);
  }
}
