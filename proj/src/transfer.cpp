#include "polyspec/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "polyspec/errors.hpp"
#include "polyspec/parallel.hpp"
#include "polyspec/prufer.hpp"
#include "polyspec/rng.hpp"

namespace polyspec {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_pi(double x) {  // into (-pi, pi]
  x = std::remainder(x, kTwoPi);
  return x == -kPi ? kPi : x;
}

double wrap_two_pi(double x) {  // into [0, 2 pi)
  x = std::fmod(x, kTwoPi);
  if (x < 0) x += kTwoPi;
  return x >= kTwoPi ? 0.0 : x;
}
}  // namespace

Mat2 Mat2::rotation(double eta) {
  const double c = std::cos(eta), s = std::sin(eta);
  return {c, -s, s, c};
}

double Mat2::frobenius() const { return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22); }

Mat2 Mat2::inverse() const {
  const double d = det();
  if (d == 0.0) throw std::invalid_argument("singular 2x2 matrix");
  return {a22 / d, -a12 / d, -a21 / d, a11 / d};
}

Mat2 operator*(const Mat2& a, const Mat2& b) {
  return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22, a.a21 * b.a11 + a.a22 * b.a21,
          a.a21 * b.a12 + a.a22 * b.a22};
}

Mat2 operator-(const Mat2& a, const Mat2& b) {
  return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}

Mat2 commutator(const Mat2& a, const Mat2& b) { return a * b - b * a; }

Mat2 site_matrix(double v, double t, double E) {
  if (!(t > 0.0)) throw std::invalid_argument("hopping must be positive");
  return {(v - E) / t, -t, 1.0 / t, 0.0};
}

Mat2 polymer_matrix(const PolymerSpec& spec, double E) {
  Mat2 m = Mat2::identity();
  for (std::size_t i = 0; i < spec.length(); ++i) m = site_matrix(spec.potentials()[i], spec.hoppings()[i], E) * m;
  return m;
}

Mat2 ScaledMat2::unscaled() const { return matrix.scaled(std::exp(log_scale)); }

ScaledMat2 block_product(const PolymerModel& model, const Configuration& config, double E, std::size_t from_block,
                         std::size_t to_block) {
  if (to_block < from_block) throw std::invalid_argument("block_product needs to_block >= from_block");
  if (to_block > config.num_blocks()) throw std::invalid_argument("block range exceeds configuration");
  const Mat2 tp = polymer_matrix(model.plus(), E);
  const Mat2 tm = polymer_matrix(model.minus(), E);
  ScaledMat2 out;
  for (std::size_t l = from_block; l < to_block; ++l) {
    out.matrix = (config.signs[l] == Sign::plus ? tp : tm) * out.matrix;
    // Normalized to Frobenius norm sqrt(2), so rotations keep scale 1.
    const double s = out.matrix.frobenius() / std::numbers::sqrt2;
    out.matrix = out.matrix.scaled(1.0 / s);
    out.log_scale += std::log(s);
  }
  return out;
}

const char* to_string(PolymerKind k) {
  switch (k) {
    case PolymerKind::elliptic: return "elliptic";
    case PolymerKind::plus_identity: return "plus_identity";
    case PolymerKind::minus_identity: return "minus_identity";
  }
  return "?";
}

namespace {

bool near_identity(const Mat2& T, double sign, double tol) {
  return (T - Mat2::identity().scaled(sign)).frobenius() <= tol;
}

double rotation_angle(const Mat2& R) { return wrap_two_pi(std::atan2(R.a21, R.a11)); }

}  // namespace

Diagonalization diagonalizer(const Mat2& T_plus, const Mat2& T_minus, double tol) {
  auto is_pm_identity = [tol](const Mat2& T) { return near_identity(T, 1.0, tol) || near_identity(T, -1.0, tol); };
  auto ellipticity = [](const Mat2& T) { return 4.0 - T.trace() * T.trace(); };

  const Mat2* pick = nullptr;
  for (const Mat2* T : {&T_plus, &T_minus}) {
    if (is_pm_identity(*T)) continue;
    if (!(ellipticity(*T) > 0.0)) throw std::invalid_argument("transfer matrix is neither elliptic nor +-I");
    if (!pick || ellipticity(*T) > ellipticity(*pick)) pick = T;
  }

  Diagonalization out;
  if (pick) {
    const Mat2& T = *pick;
    const std::complex<double> lambda(0.5 * T.trace(), std::sqrt(ellipticity(T)) / 2.0);
    std::complex<double> w0, w1;
    if (std::abs(T.a12) >= std::abs(T.a21)) {
      w0 = T.a12;
      w1 = lambda - T.a11;
    } else {
      w0 = lambda - T.a22;
      w1 = T.a21;
    }
    const Mat2 P{w0.real(), w0.imag(), w1.real(), w1.imag()};
    Mat2 M = P.inverse();
    if (M.det() < 0.0) M = Mat2{M.a21, M.a22, M.a11, M.a12};  // J M
    out.M = M.scaled(1.0 / std::sqrt(M.det()));
  }

  const Mat2 Minv = out.M.inverse();
  const Mat2 Rp = out.M * T_plus * Minv;
  const Mat2 Rm = out.M * T_minus * Minv;
  out.eta_plus = rotation_angle(Rp);
  out.eta_minus = rotation_angle(Rm);
  out.residual = std::max((Rp - Mat2::rotation(out.eta_plus)).frobenius(),
                          (Rm - Mat2::rotation(out.eta_minus)).frobenius());
  if (!(out.residual <= tol))
    throw std::invalid_argument("matrices are not simultaneously conjugate to rotations (residual " +
                                std::to_string(out.residual) + ")");
  return out;
}

double canonical_eta(const PolymerSpec& spec, double E, const Mat2& M, double raw_eta) {
  // Start on the free angle that M maps to modified angle 0.
  const Mat2 Minv = M.inverse();
  double x = Minv.a11, y = Minv.a21;
  WindingAngle free = WindingAngle::from_value(std::atan2(y, x));
  const WindingAngle start = angle_map_m(M, free);
  for (std::size_t i = 0; i < spec.length(); ++i) {
    const Mat2 T = site_matrix(spec.potentials()[i], spec.hoppings()[i], E);
    x = std::cos(free.angle);
    y = std::sin(free.angle);
    apply(T, x, y);
    advance_free_angle(free, x, y);
  }
  const double lifted = angle_map_m(M, free) - start;
  const double eta = raw_eta + kTwoPi * std::round((lifted - raw_eta) / kTwoPi);
  if (std::abs(lifted - eta) > 1e-6)
    throw NumericalFailure("polymer phase increment " + std::to_string(lifted) +
                           " is not a lift of the rotation angle " + std::to_string(raw_eta));
  return eta;
}

std::vector<IrrationalityViolation> irrationality_check(double eta_plus, double eta_minus, double p, int k_max,
                                                        double tol) {
  if (k_max < 1) throw std::invalid_argument("k_max must be at least 1");
  std::vector<IrrationalityViolation> out;
  const double delta = eta_plus - eta_minus;
  for (int k = 1; k <= k_max; ++k) {
    const double sq = 1.0 + 2.0 * p * (1.0 - p) * (std::cos(k * delta) - 1.0);
    const double modulus = std::sqrt(std::max(sq, 0.0));
    if (modulus >= 1.0 - tol) out.push_back({k, modulus});
  }
  return out;
}

std::vector<CriticalEnergyReport> find_critical_energies(const PolymerModel& model, Interval search,
                                                         std::size_t grid, double tol) {
  if (grid < 2) throw std::invalid_argument("critical-energy grid needs at least 2 points");
  if (!(search.hi > search.lo)) throw std::invalid_argument("search interval is empty");
  auto f = [&](double E) {
    return commutator(polymer_matrix(model.plus(), E), polymer_matrix(model.minus(), E)).frobenius();
  };
  const double h = search.width() / static_cast<double>(grid - 1);
  std::vector<double> values(grid);
  for (std::size_t i = 0; i < grid; ++i) values[i] = f(search.lo + h * static_cast<double>(i));

  std::vector<CriticalEnergyReport> out;
  for (std::size_t i = 1; i + 1 < grid; ++i) {
    if (!(values[i] < values[i - 1] && values[i] <= values[i + 1])) continue;
    // Golden-section refinement on the bracketing grid cells.
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = search.lo + h * static_cast<double>(i - 1);
    double b = search.lo + h * static_cast<double>(i + 1);
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && (b - a) > 4e-16 * std::max(1.0, std::abs(a)); ++it) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + invphi * (b - a);
        fd = f(d);
      }
    }
    const double E = fc <= fd ? c : d;
    const double norm = std::min(fc, fd);
    if (!(norm <= tol)) continue;

    const Mat2 tp = polymer_matrix(model.plus(), E);
    const Mat2 tm = polymer_matrix(model.minus(), E);
    auto classify = [tol](const Mat2& T, PolymerKind& kind) {
      if (near_identity(T, 1.0, tol)) kind = PolymerKind::plus_identity;
      else if (near_identity(T, -1.0, tol)) kind = PolymerKind::minus_identity;
      else if (std::abs(T.trace()) < 2.0) kind = PolymerKind::elliptic;
      else return false;
      return true;
    };
    CriticalEnergyReport r;
    r.energy = E;
    r.commutator_norm = norm;
    if (!classify(tp, r.kind_plus) || !classify(tm, r.kind_minus)) continue;
    if (!out.empty() && std::abs(out.back().energy - E) < 1e-9) continue;

    const Diagonalization dg = diagonalizer(tp, tm, std::max(tol, 1e-8));
    r.diagonalizer = dg.M;
    r.residual = dg.residual;
    r.eta_plus = canonical_eta(model.plus(), E, dg.M, dg.eta_plus);
    r.eta_minus = canonical_eta(model.minus(), E, dg.M, dg.eta_minus);
    r.irrationality_violations = irrationality_check(r.eta_plus, r.eta_minus, model.p_plus(), 100, 1e-9);
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.energy < y.energy; });
  return out;
}

TransmissionReflection transmission_reflection(const PolymerModel& model, const CriticalEnergyReport& report,
                                               Sign sign, double eps) {
  const Mat2& M = report.diagonalizer;
  const Mat2 A = M * polymer_matrix(model.polymer(sign), report.energy + eps) * M.inverse();
  using C = std::complex<double>;
  return {C(A.a11 + A.a22, A.a21 - A.a12) / 2.0, C(A.a11 - A.a22, -(A.a12 + A.a21)) / 2.0};
}

ExpansionCoeffs expansion_coeffs(const PolymerModel& model, const CriticalEnergyReport& report, double eps_probe) {
  if (!(eps_probe > 0.0)) throw std::invalid_argument("eps_probe must be positive");
  ExpansionCoeffs out;
  out.eps_probe = eps_probe;
  for (Sign s : {Sign::plus, Sign::minus}) {
    const double eta = report.eta(s);
    auto phase = [&](double eps) { return wrap_pi(std::arg(transmission_reflection(model, report, s, eps).a) - eta); };
    auto refl = [&](double eps) { return transmission_reflection(model, report, s, eps).b; };
    auto d_at = [&](double h) { return (phase(h) - phase(-h)) / (2.0 * h); };
    auto b_at = [&](double h) { return (refl(h) - refl(-h)) / (2.0 * h); };
    const double d = (4.0 * d_at(eps_probe / 2.0) - d_at(eps_probe)) / 3.0;
    const std::complex<double> db = (4.0 * b_at(eps_probe / 2.0) - b_at(eps_probe)) / 3.0;
    const std::complex<double> c = db * std::polar(1.0, eta);
    if (s == Sign::plus) {
      out.d_plus = d;
      out.c_plus = c;
      out.at_probe_plus = transmission_reflection(model, report, s, eps_probe);
    } else {
      out.d_minus = d;
      out.c_minus = c;
      out.at_probe_minus = transmission_reflection(model, report, s, eps_probe);
    }
  }
  return out;
}

LyapunovEstimate lyapunov(const PolymerModel& model, double E, std::size_t steps, std::size_t realizations,
                          std::uint64_t seed, unsigned workers, std::size_t burn_in) {
  if (steps == 0 || realizations == 0) throw std::invalid_argument("lyapunov needs steps and realizations");
  if (burn_in == 0) burn_in = steps / 10;
  const Mat2 tp = polymer_matrix(model.plus(), E);
  const Mat2 tm = polymer_matrix(model.minus(), E);
  const double norm = static_cast<double>(steps) * model.mean_length();

  LyapunovEstimate out;
  out.per_realization = parallel_map(realizations, workers, [&](std::size_t r) {
    Substream rng(seed, r);
    double x = 1.0, y = 0.0, acc = 0.0;
    for (std::size_t l = 0; l < burn_in + steps; ++l) {
      apply(rng.bernoulli(model.p_plus()) ? tp : tm, x, y);
      const double n = std::hypot(x, y);
      if (l >= burn_in) acc += std::log(n);
      x /= n;
      y /= n;
    }
    return acc / norm;
  });
  double mean = 0.0;
  for (double g : out.per_realization) mean += g;
  mean /= static_cast<double>(realizations);
  double var = 0.0;
  for (double g : out.per_realization) var += (g - mean) * (g - mean);
  out.gamma = mean;
  out.std_error = realizations > 1
                      ? std::sqrt(var / static_cast<double>(realizations - 1) / static_cast<double>(realizations))
                      : 0.0;
  return out;
}

}  // namespace polyspec
