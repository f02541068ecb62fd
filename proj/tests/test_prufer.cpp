#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "jacobi_oracle.hpp"
#include "polyspec/model.hpp"
#include "polyspec/prufer.hpp"
#include "polyspec/rng.hpp"
#include "polyspec/statistics.hpp"
#include "polyspec/transfer.hpp"

using namespace polyspec;
using std::numbers::pi;

namespace {

double wrap_two_pi(double x) { return x - 2 * pi * std::floor(x / (2 * pi)); }

double circular_distance(double a, double b) {
  const double d = wrap_two_pi(a - b);
  return std::min(d, 2 * pi - d);
}

Mat2 random_positive_det(Substream& rng) {
  for (;;) {
    const Mat2 m{4 * rng.uniform() - 2, 4 * rng.uniform() - 2, 4 * rng.uniform() - 2, 4 * rng.uniform() - 2};
    if (m.det() > 0.05) return m;
  }
}

CriticalEnergyReport critical_at(const PolymerModel& m, double E) {
  for (const auto& r : find_critical_energies(m, {-3, 3}))
    if (std::abs(r.energy - E) < 1e-6) return r;
  throw std::runtime_error("critical energy not found");
}

LatticeSequences free_sequences(std::size_t L) { return {std::vector<double>(L, 0.0), std::vector<double>(L, 1.0)}; }

}  // namespace

TEST_CASE("angle map m") {
  for (double th : {-3.0, -0.5, 0.0, 0.7, 2.0, 9.0}) CHECK(angle_map_m(Mat2::identity(), th) == doctest::Approx(th));
  CHECK(angle_map_m(Mat2{2, 0, 0, 1}, pi / 4) == doctest::Approx(std::atan(0.5)));
  CHECK_THROWS_AS(angle_map_m(Mat2{0, 1, 1, 0}, 0.3), std::invalid_argument);

  Substream rng(21, 0);
  for (int i = 0; i < 100; ++i) {
    const Mat2 M = random_positive_det(rng);
    const double th = 20 * rng.uniform() - 10;
    CHECK(angle_map_m(M, th + pi) - angle_map_m(M, th) == doctest::Approx(pi));
    // m(theta) is a lift of arg(M e_theta).
    double x = std::cos(th), y = std::sin(th);
    apply(M, x, y);
    CHECK(circular_distance(angle_map_m(M, th), std::atan2(y, x)) < 1e-12);
  }
  for (int i = 0; i < 5; ++i) {
    const Mat2 M = random_positive_det(rng);
    double prev = angle_map_m(M, -pi);
    for (int k = 1; k <= 10000; ++k) {
      const double th = -pi + 2 * pi * k / 10000.0;
      const double m = angle_map_m(M, th);
      CHECK(m > prev);
      prev = m;
    }
  }
}

TEST_CASE("winding angles") {
  const auto w = WindingAngle::from_value(7.5 * pi);
  CHECK(w.value() == doctest::Approx(7.5 * pi));
  CHECK((w.angle >= 0.0 && w.angle < 2 * pi));
  WindingAngle big{1000000, 0.25};
  WindingAngle small{999999, 6.0};
  CHECK(big - small == doctest::Approx(2 * pi + 0.25 - 6.0).epsilon(1e-14));
}

TEST_CASE("free chain phase at E = 0 advances by pi/2 per site") {
  const auto tr = prufer_trace(free_sequences(40), Mat2::identity(), 0.0, 0.3);
  REQUIRE(tr.free_angles.size() == 41);
  for (std::size_t n = 0; n <= 40; ++n) CHECK(tr.free_angles[n] == doctest::Approx(0.3 + n * pi / 2));
  const auto empty = prufer_trace({}, Mat2::identity(), 0.0, 0.4);
  REQUIRE(empty.free_angles.size() == 1);
  CHECK(empty.free_angles[0] == doctest::Approx(0.4));
}

TEST_CASE("trace invariants on a random polymer box") {
  const auto model = dimer_preset(0.6, 0.5);
  const auto seq = sample_box(model, SiteCount{300}, 4, 0);
  Substream rng(22, 0);
  const Mat2 M = random_positive_det(rng);
  const double E = 0.37;
  const auto tr = prufer_trace(seq, M, E, 0.0);
  // Independent recursion of (t(n) u(n), u(n-1)).
  double x = 1.0, y = 0.0, log_scale = 0.0;
  for (std::size_t n = 0; n <= seq.num_sites(); ++n) {
    if (n > 0) {
      const double dth = tr.free_angles[n] - tr.free_angles[n - 1];
      CHECK(dth > -pi / 2);
      CHECK(dth < 1.5 * pi);
    }
    double mx = x, my = y;
    apply(M, mx, my);
    const double r = std::hypot(mx, my);
    CHECK(std::abs(std::log(r) + log_scale - tr.log_amplitudes[n]) < 1e-8);
    CHECK(circular_distance(tr.modified_angles[n], std::atan2(my, mx)) < 1e-8);
    CHECK(circular_distance(tr.free_angles[n], std::atan2(y, x)) < 1e-8);
    if (n == seq.num_sites()) break;
    const double t = seq.hoppings[n];
    const double nx = ((seq.potentials[n] - E) * x - t * t * y) / t;
    y = x / t;
    x = nx;
    const double s = std::hypot(x, y);
    log_scale += std::log(s);
    x /= s;
    y /= s;
  }
}

TEST_CASE("block increments at E_c are the rotation angles") {
  const auto model = dimer_preset(0.6, 0.5);
  const auto r = critical_at(model, 0.6);
  const auto cfg = sample_configuration(model, BlockCount{200}, 9, 0);
  const auto seq = build_sequences(model, cfg);
  const auto tr = prufer_trace(seq, r.diagonalizer, r.energy, 0.0);
  for (std::size_t l = 0; l < cfg.num_blocks(); ++l) {
    const double inc = tr.modified_angles[cfg.nodes[l + 1]] - tr.modified_angles[cfg.nodes[l]];
    CHECK(circular_distance(inc, r.eta(cfg.signs[l])) < 1e-9);
  }
}

TEST_CASE("phase parts") {
  const auto a = phase_parts(3.5 * pi);
  CHECK(a.integer_part == 3);
  CHECK(a.fractional_part == doctest::Approx(0.5 * pi));
  const auto b = phase_parts(-0.25 * pi);
  CHECK(b.integer_part == -1);
  CHECK(b.fractional_part == doctest::Approx(0.75 * pi));
  const auto c = phase_parts(0.0);
  CHECK(c.integer_part == 0);
  CHECK(c.fractional_part == 0.0);
  const auto w = phase_parts(WindingAngle{5, 1.5 * pi});
  CHECK(w.integer_part == 11);
  CHECK(w.fractional_part == doctest::Approx(0.5 * pi));
}

TEST_CASE("relative Pruefer phase") {
  const auto model = dimer_preset(0.6, 0.5);
  const auto r = critical_at(model, 0.6);
  const double n = dos_at_critical(expansion_coeffs(model, r), model);
  const auto seq = sample_box(model, SiteCount{10000}, 3, 0);
  std::vector<double> xs;
  for (int i = 0; i <= 50; ++i) xs.push_back(-5.0 + 0.2 * i);
  const auto psi = relative_prufer(seq, r.diagonalizer, r.energy, n, xs);
  CHECK(psi[25] == 0.0);
  double worst = 0.0;
  for (std::size_t i = 1; i < psi.size(); ++i) CHECK(psi[i] >= psi[i - 1]);
  for (std::size_t i = 0; i < psi.size(); ++i) worst = std::max(worst, std::abs(psi[i] - xs[i]));
  CHECK(worst < 0.5);
  CHECK_THROWS_AS(relative_prufer(seq, r.diagonalizer, r.energy, 0.0, xs), std::invalid_argument);
}

TEST_CASE("Pruefer winding counts Dirichlet eigenvalues") {
  // Free chain closed form: eigenvalues -2 cos(j pi / (L + 1)).
  for (std::size_t L : {1u, 2u, 5u, 17u}) {
    for (double E = -2.5; E <= 2.5; E += 0.0731) {
      std::size_t expected = 0;
      for (std::size_t j = 1; j <= L; ++j) expected += -2 * std::cos(j * pi / (L + 1)) < E;
      CHECK(prufer_eigenvalue_count(free_sequences(L), E) == expected);
    }
  }
  for (std::uint64_t i = 0; i < 200; ++i) {
    Substream rng(31, i);
    const std::size_t L = 1 + static_cast<std::size_t>(rng.uniform() * 60);
    LatticeSequences seq;
    for (std::size_t k = 0; k < L; ++k) {
      seq.potentials.push_back(4 * rng.uniform() - 2);
      seq.hoppings.push_back(0.3 + 1.5 * rng.uniform());
    }
    const auto ev = testing::jacobi_eigenvalues(build_hamiltonian(seq));
    for (int k = 0; k < 10; ++k) {
      const double E = -5.0 + 10.0 * rng.uniform();
      const auto expected = static_cast<std::size_t>(std::lower_bound(ev.begin(), ev.end(), E) - ev.begin());
      CHECK(prufer_eigenvalue_count(seq, E) == expected);
    }
  }
}

TEST_CASE("phase shift") {
  const auto model = dimer_preset(0.6, 0.5);
  const auto r = critical_at(model, 0.6);
  const auto coeffs = expansion_coeffs(model, r);
  for (Sign s : {Sign::plus, Sign::minus}) {
    for (double th : {-2.0, 0.0, 0.4, 3.0}) {
      const auto p0 = phase_shift(model, r, s, 0.0, th);
      CHECK(p0.S - th == doctest::Approx(r.eta(s)).epsilon(1e-10));
      CHECK(p0.rho == doctest::Approx(1.0).epsilon(1e-10));
      const auto ab = transmission_reflection(model, r, s, 0.01);
      const auto p1 = phase_shift(model, r, s, 0.01, th);
      CHECK(p1.rho <= std::abs(ab.a) + std::abs(ab.b) + 1e-12);
      CHECK(p1.rho >= std::abs(ab.a) - std::abs(ab.b) - 1e-12);
      // First order: S - theta - eta = eps d - eps Im[c e^{2 i theta}] + O(eps^2).
      double prev = 0.0;
      for (double eps : {1e-2, 1e-3}) {
        const double lin = eps * coeffs.d(s) - eps * std::imag(coeffs.c(s) * std::polar(1.0, 2 * th));
        const double res = std::abs(phase_shift(model, r, s, eps, th).S - th - r.eta(s) - lin);
        if (prev > 0) CHECK(res < prev / 50);
        prev = res;
      }
    }
  }
}

TEST_CASE("oscillatory sum") {
  const auto model = dimer_preset(0.6, 0.5);
  const auto r = critical_at(model, 0.6);
  const auto coeffs = expansion_coeffs(model, r);
  const auto cfg = sample_configuration(model, BlockCount{100000}, 41, 0);
  const auto one = oscillatory_sum(model, r, coeffs, cfg, 1e-3, 0.7, 1);
  CHECK(std::abs(one - coeffs.c(cfg.signs[0]) * std::polar(1.0, 1.4)) < 1e-14);
  CHECK_THROWS_AS(oscillatory_sum(model, r, coeffs, cfg, 1e-3, 0.7, 0), std::invalid_argument);

  ExpansionCoeffs zero = coeffs;
  zero.c_plus = zero.c_minus = 0.0;
  CHECK(oscillatory_sum(model, r, zero, cfg, 1e-3, 0.7, 1000) == std::complex<double>(0.0));

  // Growth exponent of |sum| over N in {1e3, 1e4, 1e5}, median over 50 realizations.
  std::vector<double> exps;
  const std::vector<double> logN{std::log(1e3), std::log(1e4), std::log(1e5)};
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto c = sample_configuration(model, BlockCount{100000}, 43, k);
    std::vector<double> logS;
    for (std::size_t N : {1000u, 10000u, 100000u})
      logS.push_back(std::log(std::abs(oscillatory_sum(model, r, coeffs, c, 1e-5, 0.0, N))));
    exps.push_back(ls_slope(logN, logS));
  }
  std::sort(exps.begin(), exps.end());
  CHECK(0.5 * (exps[24] + exps[25]) <= 0.6);
}
