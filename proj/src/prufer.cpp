#include "polyspec/prufer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polyspec {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_pi(double x) {
  x = std::remainder(x, kTwoPi);
  return x == -kPi ? kPi : x;
}

// Moves whole turns out of `angle` so that it lies in [0, 2 pi).
WindingAngle normalized(std::int64_t turns, double angle) {
  const double k = std::floor(angle / kTwoPi);
  angle -= k * kTwoPi;
  turns += static_cast<std::int64_t>(k);
  if (angle >= kTwoPi) {
    angle -= kTwoPi;
    ++turns;
  }
  if (angle < 0.0) angle = 0.0;
  return {turns, angle};
}
}  // namespace

WindingAngle WindingAngle::from_value(double theta) { return normalized(0, theta); }

double WindingAngle::value() const { return kTwoPi * static_cast<double>(turns) + angle; }

double operator-(const WindingAngle& a, const WindingAngle& b) {
  return kTwoPi * static_cast<double>(a.turns - b.turns) + (a.angle - b.angle);
}

double angle_map_m(const Mat2& M, double theta) {
  if (!(M.det() > 0.0)) throw std::invalid_argument("angle map needs det M > 0");
  // theta = k pi + r with r in [-pi/2, pi/2); m(r) - m(0) lies in (-pi, pi)
  // and has the sign of r because m is increasing.
  const double k = std::floor((theta + kPi / 2) / kPi);
  const double r = theta - k * kPi;
  const double m0 = std::atan2(M.a21, M.a11);
  const double c = std::cos(r), s = std::sin(r);
  double delta = wrap_pi(std::atan2(M.a21 * c + M.a22 * s, M.a11 * c + M.a12 * s) - m0);
  if (r < 0.0 && delta > 0.0) delta -= kTwoPi;
  if (r > 0.0 && delta < 0.0) delta += kTwoPi;
  return m0 + delta + k * kPi;
}

WindingAngle angle_map_m(const Mat2& M, const WindingAngle& theta) {
  return normalized(theta.turns, angle_map_m(M, theta.angle));
}

void advance_free_angle(WindingAngle& theta, double x, double y) {
  double d = std::atan2(y, x) - theta.angle;
  d -= kTwoPi * std::floor((d + kPi / 2) / kTwoPi);  // into [-pi/2, 3pi/2)
  theta = normalized(theta.turns, theta.angle + d);
}

namespace {

void check_sequences(const LatticeSequences& seq) {
  if (seq.hoppings.size() != seq.potentials.size())
    throw std::invalid_argument("potential and hopping sequences differ in length");
}

// Runs the free recursion; visit(n, free angle, log |vector|) is called for n = 0 .. L.
template <class Visit>
WindingAngle run_free(const LatticeSequences& seq, double E, double theta0, Visit&& visit) {
  check_sequences(seq);
  WindingAngle theta = WindingAngle::from_value(theta0);
  double x = std::cos(theta0), y = std::sin(theta0), log_norm = 0.0;
  visit(std::size_t{0}, theta, log_norm);
  for (std::size_t n = 0; n < seq.num_sites(); ++n) {
    const double t = seq.hoppings[n];
    if (!(t > 0.0)) throw std::invalid_argument("hopping must be positive");
    const double nx = ((seq.potentials[n] - E) * x - t * t * y) / t;
    y = x / t;
    x = nx;
    advance_free_angle(theta, x, y);
    const double r = std::hypot(x, y);
    if (!(r > 0.0) || !std::isfinite(r)) throw std::runtime_error("Pruefer recursion degenerated");
    log_norm += std::log(r);
    x /= r;
    y /= r;
    visit(n + 1, theta, log_norm);
  }
  return theta;
}

}  // namespace

PruferTrace prufer_trace(const LatticeSequences& seq, const Mat2& M, double E, double theta0) {
  if (!(M.det() > 0.0)) throw std::invalid_argument("angle map needs det M > 0");
  PruferTrace tr;
  tr.energy = E;
  tr.initial_angle = theta0;
  const std::size_t n_points = seq.num_sites() + 1;
  tr.free_angles.reserve(n_points);
  tr.modified_angles.reserve(n_points);
  tr.log_amplitudes.reserve(n_points);
  run_free(seq, E, theta0, [&](std::size_t, const WindingAngle& th, double log_norm) {
    tr.free_angles.push_back(th.value());
    tr.modified_angles.push_back(angle_map_m(M, th).value());
    double x = std::cos(th.angle), y = std::sin(th.angle);
    apply(M, x, y);
    tr.log_amplitudes.push_back(log_norm + std::log(std::hypot(x, y)));
  });
  return tr;
}

WindingAngle free_prufer_phase(const LatticeSequences& seq, double E, double theta0) {
  return run_free(seq, E, theta0, [](std::size_t, const WindingAngle&, double) {});
}

WindingAngle prufer_phase(const LatticeSequences& seq, const Mat2& M, double E, double theta0) {
  return angle_map_m(M, free_prufer_phase(seq, E, theta0));
}

PhaseParts phase_parts(double theta) {
  const double k = std::floor(theta / kPi);
  double frac = theta - k * kPi;
  if (frac >= kPi) frac -= kPi;  // rounding guard
  if (frac < 0.0) frac = 0.0;
  return {static_cast<std::int64_t>(k), frac};
}

PhaseParts phase_parts(const WindingAngle& theta) {
  PhaseParts p = phase_parts(theta.angle);
  p.integer_part += 2 * theta.turns;
  return p;
}

std::vector<double> relative_prufer(const LatticeSequences& seq, const Mat2& M, double E_c, double n_Ec,
                                    std::span<const double> xs) {
  if (!(n_Ec > 0.0)) throw std::invalid_argument("density of states at E_c must be positive");
  if (seq.num_sites() == 0) throw std::invalid_argument("relative Pruefer phase needs a non-empty box");
  const WindingAngle base = prufer_phase(seq, M, E_c);
  const double scale = n_Ec * static_cast<double>(seq.num_sites());
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(x == 0.0 ? 0.0 : (prufer_phase(seq, M, E_c + x / scale) - base) / kPi);
  return out;
}

std::size_t prufer_eigenvalue_count(const LatticeSequences& seq, double E) {
  const WindingAngle th = free_prufer_phase(seq, E);
  // floor((2 pi turns + angle + offset) / pi)
  const auto k = 2 * th.turns + static_cast<std::int64_t>(std::floor((th.angle + kDirichletWindingOffset) / kPi));
  return k < 0 ? 0 : static_cast<std::size_t>(k);
}

namespace {
Mat2 conjugated_polymer(const PolymerModel& model, const CriticalEnergyReport& report, Sign sign, double eps) {
  const Mat2& M = report.diagonalizer;
  return M * polymer_matrix(model.polymer(sign), report.energy + eps) * M.inverse();
}

PhaseShift shift_with(const Mat2& A, double eta, double theta) {
  double x = std::cos(theta), y = std::sin(theta);
  apply(A, x, y);
  return {theta + eta + wrap_pi(std::atan2(y, x) - theta - eta), std::hypot(x, y)};
}
}  // namespace

PhaseShift phase_shift(const PolymerModel& model, const CriticalEnergyReport& report, Sign sign, double eps,
                       double theta) {
  return shift_with(conjugated_polymer(model, report, sign, eps), report.eta(sign), theta);
}

std::complex<double> oscillatory_sum(const PolymerModel& model, const CriticalEnergyReport& report,
                                     const ExpansionCoeffs& coeffs, const Configuration& config, double eps,
                                     double theta0, std::size_t N) {
  if (N < 1) throw std::invalid_argument("oscillatory sum needs N >= 1");
  if (config.num_blocks() < N) throw std::invalid_argument("configuration shorter than N blocks");
  const Mat2 Ap = conjugated_polymer(model, report, Sign::plus, eps);
  const Mat2 Am = conjugated_polymer(model, report, Sign::minus, eps);
  std::complex<double> sum = 0.0;
  double S = theta0;
  for (std::size_t l = 0; l < N; ++l) {
    const Sign s = config.signs[l];
    sum += coeffs.c(s) * std::polar(1.0, 2.0 * S);
    S = std::remainder(shift_with(s == Sign::plus ? Ap : Am, report.eta(s), S).S, kTwoPi);
  }
  return sum;
}

}  // namespace polyspec
