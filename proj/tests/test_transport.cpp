#include <doctest.h>

#include <cmath>
#include <complex>
#include <stdexcept>

#include "polyspec/errors.hpp"
#include "polyspec/model.hpp"
#include "polyspec/transport.hpp"

using namespace polyspec;

namespace {

LatticeSequences free_chain(std::size_t sites) {
  return {std::vector<double>(sites, 0.0), std::vector<double>(sites, 1.0)};
}

// J_n(z) from its power series.
double bessel_j(int n, double z) {
  n = std::abs(n);
  double term = std::pow(z / 2, n) / std::tgamma(n + 1.0), sum = 0.0;
  for (int k = 0; k < 200; ++k) {
    sum += term;
    term *= -(z / 2) * (z / 2) / ((k + 1.0) * (k + 1.0 + n));
  }
  return sum;
}

double norm_sq(const std::vector<std::complex<double>>& psi) {
  double s = 0.0;
  for (const auto& a : psi) s += std::norm(a);
  return s;
}

}  // namespace

TEST_CASE("initial state and unitarity") {
  const auto s = make_evolution(free_chain(101));
  CHECK(s.initial_site == 50);
  const auto psi0 = evolve_amplitudes(s, 0.0);
  for (std::size_t x = 0; x < 101; ++x) CHECK(std::abs(psi0[x] - (x == 50 ? 1.0 : 0.0)) < 1e-12);

  const auto d = make_evolution(sample_box(dimer_preset(0.5, 0.5), SiteCount{201}, 3, 0));
  for (double t : {0.0, 1.0, 7.5, 40.0, 300.0}) CHECK(std::abs(norm_sq(evolve_amplitudes(d, t)) - 1.0) < 1e-8);
  const auto p = make_evolution(sample_box(dimer_preset(0.5, 0.5), SiteCount{201}, 3, 0), Interval{-0.6, 0.6});
  for (double t : {0.0, 3.0, 50.0}) CHECK(std::abs(norm_sq(evolve_amplitudes(p, t)) - p.initial_norm_sq) < 1e-8);
  CHECK(p.initial_norm_sq < 1.0);
  CHECK_THROWS_AS(make_evolution(free_chain(5), std::nullopt, 9), std::invalid_argument);
}

TEST_CASE("free propagator is a Bessel function") {
  const auto s = make_evolution(free_chain(201));
  const auto psi = evolve_amplitudes(s, 5.0);
  double worst = 0.0;
  for (int x = -100; x <= 100; ++x) {
    const double J = bessel_j(x, 10.0);
    worst = std::max(worst, std::abs(std::norm(psi[static_cast<std::size_t>(x + 100)]) - J * J));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("moments") {
  const auto s = make_evolution(free_chain(601));
  CHECK(moment(s, 2.0, 1e-3, Averaging::cesaro) < 1e-5);
  CHECK(moment(s, 2.0, 1e-3, Averaging::abel) < 1e-5);
  // Free chain: M_2(t) = 2 t^2 exactly, so the Cesaro mean is 2 T^2 / 3.
  CHECK(moment(s, 2.0, 40.0, Averaging::cesaro) == doctest::Approx(2.0 * 1600 / 3).epsilon(1e-4));
  const std::vector<double> Ts{20, 30, 45, 67, 100};
  const auto fit = transport_exponent(free_chain(601), 2.0, Ts, std::nullopt);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(0.05));
  const std::vector<double> times{0.0, 10.0, 100.0};
  const auto inst = instantaneous_moments(s, 2.0, times);
  CHECK(inst[1] == doctest::Approx(200.0).epsilon(1e-8));
  CHECK_THROWS_AS(moment(s, 0.0, 1.0, Averaging::cesaro), std::invalid_argument);
  CHECK_THROWS_AS(moment(s, 2.0, -1.0, Averaging::cesaro), std::invalid_argument);
}

TEST_CASE("wavefront reaching the box edge is reported") {
  const auto s = make_evolution(free_chain(101));
  CHECK_THROWS_AS(moment(s, 2.0, 100.0, Averaging::cesaro), BoundaryContamination);
  CHECK_NOTHROW(moment(s, 2.0, 10.0, Averaging::cesaro));
}

TEST_CASE("projection consistency") {
  const auto seq = sample_box(dimer_preset(0.5, 0.5), SiteCount{1001}, 8, 0);
  const auto full = make_evolution(seq);
  const auto all = make_evolution(seq, Interval{-10.0, 10.0});
  for (double T : {5.0, 30.0}) {
    const double a = moment(full, 2.0, T, Averaging::cesaro), b = moment(all, 2.0, T, Averaging::cesaro);
    CHECK(std::abs(a - b) <= 1e-8 * std::max(1.0, a));
  }
  // |X|^{q/2} (P + Q) delta with Q = 1 - P: M(delta) <= 2 (M(P delta) + M(Q delta)) <= 3 (...).
  const auto lower = make_evolution(seq, Interval{-10.0, 0.3});
  const auto upper = make_evolution(seq, Interval{0.3, 10.0});
  for (double T : {2.0, 10.0, 40.0})
    CHECK(moment(full, 2.0, T, Averaging::cesaro) <=
          3.0 * (moment(lower, 2.0, T, Averaging::cesaro) + moment(upper, 2.0, T, Averaging::cesaro)));
}

TEST_CASE("Abel and Cesaro curves") {
  const auto s = make_evolution(sample_box(dimer_preset(0.5, 0.5), SiteCount{801}, 2, 0));
  const std::vector<double> Ts{2.0, 5.0, 10.0};
  const auto c = moment_curve(s, 2.0, Ts, true, true);
  REQUIRE(c.cesaro_moments.size() == 3);
  REQUIRE(c.abel_moments.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(c.cesaro_moments[i] > 0.0);
    CHECK(c.abel_moments[i] > 0.0);
    CHECK(c.cesaro_moments[i] == doctest::Approx(moment(s, 2.0, Ts[i], Averaging::cesaro, 2000)).epsilon(1e-2));
    CHECK(c.cesaro_moments[i] <= 400.0 * 400.0);
  }
}

TEST_CASE("localized windows stay bounded in small boxes") {
  // Deep in the localized regime (xi ~ 7 sites) M_2 saturates quickly.
  const std::vector<double> Ts{50, 100, 200, 400};
  const auto fit =
      transport_exponent(dimer_preset(0.5, 0.5), 2.0, Ts, 500, Interval{1.4, 1.6}, 2, 9, 2, kDefaultQuadrature);
  CHECK(fit.mean_moments.back() / fit.mean_moments.front() <= 2.0);
  CHECK(fit.per_realization.size() == 2);
  CHECK(fit.ci_half_width >= 0.0);
}
