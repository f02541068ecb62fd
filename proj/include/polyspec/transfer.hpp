#pragma once

// 2x2 transfer-matrix calculus for random polymer models.
//
// A solution of H u = E u is propagated as
//   (t(n+1) u(n+1), u(n)) = T_{v(n)-E, t(n)} (t(n) u(n), u(n-1)),
//   T_{v,t} = (1/t) [[v, -t^2], [1, 0]].

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "polyspec/interval.hpp"
#include "polyspec/model.hpp"

namespace polyspec {

struct Mat2 {
  double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;

  static Mat2 identity() { return {}; }
  // R(eta) = [[cos, -sin], [sin, cos]]
  static Mat2 rotation(double eta);

  double det() const { return a11 * a22 - a12 * a21; }
  double trace() const { return a11 + a22; }
  double frobenius() const;
  Mat2 inverse() const;
  Mat2 scaled(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }
};

Mat2 operator*(const Mat2& a, const Mat2& b);
Mat2 operator-(const Mat2& a, const Mat2& b);
// Image of the column vector (x, y).
inline void apply(const Mat2& m, double& x, double& y) {
  const double nx = m.a11 * x + m.a12 * y;
  y = m.a21 * x + m.a22 * y;
  x = nx;
}
Mat2 commutator(const Mat2& a, const Mat2& b);

// T_{v-E, t}. Throws std::invalid_argument for t <= 0.
Mat2 site_matrix(double v, double t, double E);
// T^E = T_{L-1} ... T_0 (site 0 applied first).
Mat2 polymer_matrix(const PolymerSpec& spec, double E);

// product = exp(log_scale) * matrix, with matrix of Frobenius norm sqrt(2).
struct ScaledMat2 {
  Mat2 matrix;
  double log_scale = 0.0;
  Mat2 unscaled() const;
};

// T_omega^E(to, from) = T_{omega_{to-1}} ... T_{omega_from}; identity when to == from.
ScaledMat2 block_product(const PolymerModel& model, const Configuration& config, double E, std::size_t from_block,
                         std::size_t to_block);

enum class PolymerKind { elliptic, plus_identity, minus_identity };
const char* to_string(PolymerKind k);

struct IrrationalityViolation {
  int k = 0;
  double modulus = 0.0;  // |<exp(i k eta)>|
};

struct CriticalEnergyReport {
  double energy = 0.0;
  PolymerKind kind_plus = PolymerKind::elliptic;
  PolymerKind kind_minus = PolymerKind::elliptic;
  double eta_plus = 0.0;  // canonical (band) branch
  double eta_minus = 0.0;
  Mat2 diagonalizer;      // det = 1
  double commutator_norm = 0.0;
  double residual = 0.0;  // max_pm ||M T M^-1 - R(eta)||_F
  std::vector<IrrationalityViolation> irrationality_violations;

  double eta(Sign s) const { return s == Sign::plus ? eta_plus : eta_minus; }
};

struct Diagonalization {
  Mat2 M;  // det = 1
  double eta_plus = 0.0;   // rotation angle of M T_+ M^-1 in [0, 2 pi)
  double eta_minus = 0.0;
  double residual = 0.0;
};

// Simultaneous conjugation of two commuting elliptic (or +-I) matrices to
// rotations. Throws std::invalid_argument if the inputs do not qualify.
Diagonalization diagonalizer(const Mat2& T_plus, const Mat2& T_minus, double tol);

// Lifts a raw rotation angle to the band branch: the modified Pruefer phase
// gained across one polymer at E, which grows with E.
double canonical_eta(const PolymerSpec& spec, double E, const Mat2& M, double raw_eta);

inline constexpr std::size_t kCriticalGrid = 20001;
inline constexpr double kCommutatorTol = 1e-9;

std::vector<CriticalEnergyReport> find_critical_energies(const PolymerModel& model, Interval search,
                                                         std::size_t grid = kCriticalGrid,
                                                         double tol = kCommutatorTol);

// |<e^{ik eta}>|^2 = 1 + 2p(1-p)(cos(k (eta_+ - eta_-)) - 1); reports k in
// [1, k_max] with modulus >= 1 - tol.
std::vector<IrrationalityViolation> irrationality_check(double eta_plus, double eta_minus, double p, int k_max,
                                                        double tol);

struct TransmissionReflection {
  std::complex<double> a;  // transmission
  std::complex<double> b;  // reflection
};

// M T^{E_c+eps} M^-1 v = a v + b conj(v), v = (1, -i)/sqrt(2).
TransmissionReflection transmission_reflection(const PolymerModel& model, const CriticalEnergyReport& report,
                                               Sign sign, double eps);

struct ExpansionCoeffs {
  double d_plus = 0.0, d_minus = 0.0;  // d = d/d eps of arg a^eps at 0
  std::complex<double> c_plus, c_minus;  // c = d/d eps of b^eps at 0, times e^{i eta}
  TransmissionReflection at_probe_plus, at_probe_minus;  // at eps = +eps_probe
  double eps_probe = 0.0;

  double d(Sign s) const { return s == Sign::plus ? d_plus : d_minus; }
  std::complex<double> c(Sign s) const { return s == Sign::plus ? c_plus : c_minus; }
};

inline constexpr double kDefaultEpsProbe = 1e-5;

// Central differences at +-h and +-h/2, Richardson-combined.
ExpansionCoeffs expansion_coeffs(const PolymerModel& model, const CriticalEnergyReport& report,
                                 double eps_probe = kDefaultEpsProbe);

struct LyapunovEstimate {
  double gamma = 0.0;
  double std_error = 0.0;
  std::vector<double> per_realization;
};

// Benettin estimate: log-growth of a renormalized vector over `steps` polymer
// blocks following `burn_in` discarded blocks, per unit length <L>.
// burn_in = 0 selects steps / 10.
LyapunovEstimate lyapunov(const PolymerModel& model, double E, std::size_t steps, std::size_t realizations,
                          std::uint64_t seed, unsigned workers = 1, std::size_t burn_in = 0);

}  // namespace polyspec
