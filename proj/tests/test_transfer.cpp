#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "polyspec/model.hpp"
#include "polyspec/rng.hpp"
#include "polyspec/transfer.hpp"

using namespace polyspec;
using std::numbers::pi;

namespace {

double max_abs_diff(const Mat2& a, const Mat2& b) {
  return std::max({std::abs(a.a11 - b.a11), std::abs(a.a12 - b.a12), std::abs(a.a21 - b.a21), std::abs(a.a22 - b.a22)});
}

const Interval kSearch{-3.0, 3.0};

const CriticalEnergyReport& at_energy(const std::vector<CriticalEnergyReport>& rs, double E) {
  for (const auto& r : rs)
    if (std::abs(r.energy - E) < 1e-6) return r;
  throw std::runtime_error("no critical energy near requested value");
}

}  // namespace

TEST_CASE("site matrices") {
  const Mat2 a = site_matrix(0.0, 1.0, 0.0);
  CHECK(max_abs_diff(a, {0.0, -1.0, 1.0, 0.0}) == 0.0);
  CHECK(max_abs_diff(site_matrix(1.0, 1.0, 0.0), {1.0, -1.0, 1.0, 0.0}) == 0.0);
  const Mat2 c = site_matrix(0.0, 2.0, 0.0);
  CHECK(max_abs_diff(c, {0.0, -2.0, 0.5, 0.0}) < 1e-15);
  CHECK(c.det() == doctest::Approx(1.0));
  CHECK_THROWS_AS(site_matrix(0.0, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(site_matrix(0.0, -1.0, 0.0), std::invalid_argument);

  Substream rng(5, 0);
  for (int i = 0; i < 10000; ++i) {
    const Mat2 m = site_matrix(6 * rng.uniform() - 3, 0.1 + 3 * rng.uniform(), 6 * rng.uniform() - 3);
    CHECK(std::abs(m.det() - 1.0) < 1e-9);
  }
}

TEST_CASE("dimer polymer matrices") {
  const double V = 0.5;
  const auto d = dimer_preset(V, 0.5);
  const Mat2 plus = polymer_matrix(d.plus(), V);
  CHECK(max_abs_diff(plus, {-1.0, 0.0, 0.0, -1.0}) < 1e-15);
  const Mat2 minus = polymer_matrix(d.minus(), V);
  CHECK(minus.trace() == doctest::Approx(4 * V * V - 2));
  const PolymerSpec single({0.3}, {1.2});
  CHECK(max_abs_diff(polymer_matrix(single, 0.1), site_matrix(0.3, 1.2, 0.1)) == 0.0);
  // Site 0 is applied first.
  const PolymerSpec two({0.3, -0.2}, {1.0, 1.5});
  CHECK(max_abs_diff(polymer_matrix(two, 0.4), site_matrix(-0.2, 1.5, 0.4) * site_matrix(0.3, 1.0, 0.4)) < 1e-15);
}

TEST_CASE("block products") {
  const auto d = dimer_preset(0.5, 0.5);
  const auto cfg = sample_configuration(d, BlockCount{200}, 3, 0);
  const auto id = block_product(d, cfg, 0.3, 7, 7);
  CHECK(max_abs_diff(id.unscaled(), Mat2::identity()) < 1e-15);
  CHECK(id.log_scale == 0.0);
  const auto one = block_product(d, cfg, 0.3, 4, 5);
  CHECK(max_abs_diff(one.unscaled(), polymer_matrix(d.polymer(cfg.signs[4]), 0.3)) < 1e-12);

  Mat2 direct = Mat2::identity();
  for (std::size_t l = 2; l < 12; ++l) direct = polymer_matrix(d.polymer(cfg.signs[l]), 0.9) * direct;
  CHECK(max_abs_diff(block_product(d, cfg, 0.9, 2, 12).unscaled(), direct) < 1e-9 * direct.frobenius());

  Substream rng(6, 0);
  for (int i = 0; i < 10000; ++i) {
    const double E = 6 * rng.uniform() - 3;
    const auto from = static_cast<std::size_t>(rng.uniform() * 190);
    const auto p = block_product(d, cfg, E, from, from + 1 + static_cast<std::size_t>(rng.uniform() * 5));
    // Cancellation in a11 a22 - a12 a21 limits the absolute accuracy to eps ||U||^2.
    const Mat2 U = p.unscaled();
    CHECK(std::abs(U.det() - 1.0) < 1e-9 * std::max(1.0, 0.5 * U.frobenius() * U.frobenius()));
    CHECK(p.matrix.frobenius() == doctest::Approx(std::sqrt(2.0)));
  }
  CHECK_THROWS_AS(block_product(d, cfg, 0.0, 5, 4), std::invalid_argument);

  // At E_c the product is conjugate to a rotation: bounded log scale.
  const auto big = sample_configuration(d, BlockCount{100000}, 3, 1);
  const auto crit = block_product(d, big, 0.5, 0, 100000);
  CHECK(std::abs(crit.log_scale) / 1e5 < 1e-4);
}

TEST_CASE("critical energies of the dimer are +-V") {
  const auto rs = find_critical_energies(dimer_preset(0.5, 0.5), kSearch);
  REQUIRE(rs.size() == 2);
  CHECK(std::abs(rs[0].energy + 0.5) < 1e-8);
  CHECK(std::abs(rs[1].energy - 0.5) < 1e-8);
  for (const auto& r : rs) {
    CHECK(r.residual <= 1e-8);
    CHECK(r.diagonalizer.det() == doctest::Approx(1.0));
  }

  Substream rng(8, 0);
  for (int i = 0; i < 20; ++i) {
    const double V = 0.1 + 0.89 * rng.uniform();
    const auto r = find_critical_energies(dimer_preset(V, 0.5), kSearch);
    REQUIRE(r.size() == 2);
    CHECK(std::abs(r[0].energy + V) < 1e-8);
    CHECK(std::abs(r[1].energy - V) < 1e-8);
  }
}

TEST_CASE("Anderson-Bernoulli has no critical energies") {
  for (double V : {0.3, 0.7, 1.0, 1.9}) CHECK(find_critical_energies(anderson_preset(V, 0.5), {-4, 4}).empty());
}

TEST_CASE("dimer V = 1/sqrt 2 at +V") {
  const double V = std::numbers::sqrt2 / 2;
  const auto rs = find_critical_energies(dimer_preset(V, 0.5), kSearch);
  REQUIRE(rs.size() == 2);
  const auto& r = at_energy(rs, V);
  CHECK(r.kind_plus == PolymerKind::minus_identity);
  CHECK(r.kind_minus == PolymerKind::elliptic);
  CHECK(r.eta_plus == doctest::Approx(pi));
  CHECK(r.eta_minus == doctest::Approx(1.5 * pi));
  CHECK(r.residual <= 1e-8);
  REQUIRE(!r.irrationality_violations.empty());
  CHECK(r.irrationality_violations.front().k == 4);
}

TEST_CASE("diagonalizer") {
  const Mat2 minus_id{-1, 0, 0, -1};
  const auto d = diagonalizer(minus_id, minus_id, 1e-10);
  CHECK(d.eta_plus == doctest::Approx(pi));
  CHECK(d.M.det() == doctest::Approx(1.0));

  const Mat2 A{0.3, -1.7, 0.9, -0.4};  // elliptic after det normalisation
  const Mat2 T = A.scaled(1.0 / std::sqrt(A.det()));
  const auto e = diagonalizer(T, minus_id, 1e-10);
  const Mat2 conj = e.M * T * e.M.inverse();
  CHECK(max_abs_diff(conj, Mat2::rotation(e.eta_plus)) < 1e-10);
  CHECK(e.eta_minus == doctest::Approx(pi));
  CHECK(e.M.det() > 0.0);

  const Mat2 hyperbolic{2.0, 0.0, 0.0, 0.5};
  CHECK_THROWS_AS(diagonalizer(hyperbolic, minus_id, 1e-10), std::invalid_argument);
  const Mat2 other{0.2, -1.0, 1.0, 0.0};
  const Mat2 T2 = other.scaled(1.0 / std::sqrt(other.det()));
  CHECK_THROWS_AS(diagonalizer(T, T2, 1e-10), std::invalid_argument);
}

TEST_CASE("irrationality check") {
  const auto v = irrationality_check(pi, 1.5 * pi, 0.5, 8, 1e-9);
  REQUIRE(v.size() == 2);
  CHECK(v[0].k == 4);
  CHECK(v[1].k == 8);
  CHECK(v[0].modulus == doctest::Approx(1.0));

  const auto rs = find_critical_energies(dimer_preset(0.6, 0.5), kSearch);
  const auto& r = at_energy(rs, 0.6);
  CHECK(irrationality_check(r.eta_plus, r.eta_minus, 0.5, 10000, 1e-9).empty());

  Substream rng(12, 0);
  for (int i = 0; i < 20; ++i) {
    const double a = 2 * pi * rng.uniform(), b = 2 * pi * rng.uniform(), p = 0.05 + 0.9 * rng.uniform();
    const auto all = irrationality_check(a, b, p, 100, 2.0);  // tol 2 reports every k with its modulus
    REQUIRE(all.size() == 100);
    for (const auto& x : all) {
      const double brute = std::abs(p * std::polar(1.0, x.k * a) + (1 - p) * std::polar(1.0, x.k * b));
      CHECK(std::abs(x.modulus - brute) < 1e-12);
    }
  }
}

TEST_CASE("expansion coefficients") {
  const auto d = dimer_preset(0.6, 0.5);
  const auto rs = find_critical_energies(d, kSearch);
  const auto& r = at_energy(rs, 0.6);
  for (Sign s : {Sign::plus, Sign::minus}) {
    const auto ab = transmission_reflection(d, r, s, 0.0);
    CHECK(std::abs(ab.a - std::polar(1.0, r.eta(s))) < 1e-10);
    CHECK(std::abs(ab.b) < 1e-10);
    const auto ab1 = transmission_reflection(d, r, s, 0.01);
    CHECK(std::norm(ab1.a) - std::norm(ab1.b) == doctest::Approx(1.0).epsilon(1e-10));
  }
  const auto c = expansion_coeffs(d, r);
  // Oracle for the elliptic polymer: the band-branch rotation angle arccos(Tr/2),
  // Tr = (v - E)^2 - 2, increases with E.
  auto eta_minus = [](double E) { return 2 * pi - std::acos(((-0.6 - E) * (-0.6 - E) - 2) / 2); };
  const double h = 1e-6;
  CHECK(c.d_minus == doctest::Approx((eta_minus(0.6 + h) - eta_minus(0.6 - h)) / (2 * h)).epsilon(1e-6));
  CHECK(c.d_minus == doctest::Approx(1.25).epsilon(1e-8));
  // For the polymer equal to -I at E_c, d = (beta - gamma) / 2 for B = M K M^-1 with
  // K the energy derivative of the polymer matrix.
  const Mat2 K = (polymer_matrix(d.plus(), 0.6 + h) - polymer_matrix(d.plus(), 0.6 - h)).scaled(0.5 / h);
  const Mat2 B = r.diagonalizer * K * r.diagonalizer.inverse();
  // -I R(eta + eps d) = -I (I + eps d J) => derivative -d J; J = [[0,-1],[1,0]].
  CHECK(c.d_plus == doctest::Approx((B.a12 - B.a21) / 2).epsilon(1e-6));
  CHECK(c.d_plus == doctest::Approx(1.25).epsilon(1e-6));
  CHECK_THROWS_AS(expansion_coeffs(d, r, 0.0), std::invalid_argument);
}

TEST_CASE("Lyapunov exponent") {
  const auto d = dimer_preset(0.5, 0.5);
  const auto crit = lyapunov(d, 0.5, 100000, 16, 1);
  CHECK(std::abs(crit.gamma) < 3 * crit.std_error + 1e-12);
  const auto loc = lyapunov(d, 0.8, 100000, 16, 1);
  CHECK(loc.gamma > 5 * loc.std_error);

  const auto free_chain = anderson_preset(0.0, 0.5);
  CHECK(std::abs(lyapunov(free_chain, 0.7, 10000, 4, 2).gamma) < 1e-3);

  // Spread of the critical estimate shrinks with the number of steps.
  const auto s4 = lyapunov(d, 0.5, 10000, 16, 3), s5 = lyapunov(d, 0.5, 100000, 16, 3);
  CHECK(s5.std_error < s4.std_error);
  CHECK(std::abs(s5.gamma) < 3 * s5.std_error + 1e-12);
}
