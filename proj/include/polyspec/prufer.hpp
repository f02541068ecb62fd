#pragma once

// Free and modified Pruefer phases.
//
// Free variables:     R0_n e_{theta0_n} = (t(n) u(n), u(n-1)),
// modified variables: R_n  e_{theta_n}  = M (t(n) u(n), u(n-1)),
// with e_theta = (cos theta, sin theta) and theta_n = m(theta0_n), where
// M e_theta = r(theta) e_{m(theta)}.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "polyspec/model.hpp"
#include "polyspec/transfer.hpp"

namespace polyspec {

// Lifted angle 2 pi turns + angle. Keeping the winding number as an integer
// keeps phase differences exact to rounding of `angle` even after 1e6 turns.
struct WindingAngle {
  std::int64_t turns = 0;
  double angle = 0.0;

  static WindingAngle from_value(double theta);
  double value() const;
};

// Exact-as-possible theta_a - theta_b.
double operator-(const WindingAngle& a, const WindingAngle& b);

// Continuous lift of arg(M e_theta) with m(0) in (-pi, pi]. Requires det M > 0.
double angle_map_m(const Mat2& M, double theta);
WindingAngle angle_map_m(const Mat2& M, const WindingAngle& theta);

// Moves a lifted free angle to the direction of (x, y), choosing the
// increment in (-pi/2, 3pi/2).
void advance_free_angle(WindingAngle& theta, double x, double y);

struct PruferTrace {
  std::vector<double> free_angles;      // theta0_n, n = 0 .. L
  std::vector<double> modified_angles;  // theta_n = m(theta0_n)
  std::vector<double> log_amplitudes;   // log R_n
  double energy = 0.0;
  double initial_angle = 0.0;
};

PruferTrace prufer_trace(const LatticeSequences& seq, const Mat2& M, double E, double theta0 = 0.0);

// theta_L(E) and theta0_L(E) without storing the trace.
WindingAngle prufer_phase(const LatticeSequences& seq, const Mat2& M, double E, double theta0 = 0.0);
WindingAngle free_prufer_phase(const LatticeSequences& seq, double E, double theta0 = 0.0);

struct PhaseParts {
  std::int64_t integer_part = 0;  // floor(theta / pi)
  double fractional_part = 0.0;   // in [0, pi)
};

PhaseParts phase_parts(double theta);
PhaseParts phase_parts(const WindingAngle& theta);

// Psi_L(x) = (theta_L(E_c + x / (n_Ec L)) - theta_L(E_c)) / pi, Dirichlet start.
std::vector<double> relative_prufer(const LatticeSequences& seq, const Mat2& M, double E_c, double n_Ec,
                                    std::span<const double> xs);

// Dirichlet eigenvalues of the box below E from the free phase winding:
// floor((theta0_L(E) + offset) / pi).
inline constexpr double kDirichletWindingOffset = 1.5707963267948966;  // pi / 2
std::size_t prufer_eigenvalue_count(const LatticeSequences& seq, double E);

struct PhaseShift {
  double S = 0.0;    // lifted so that S - theta is continuous and equals eta at eps = 0
  double rho = 1.0;
};

// rho e_S = M T^{E_c+eps} M^-1 e_theta
PhaseShift phase_shift(const PolymerModel& model, const CriticalEnergyReport& report, Sign sign, double eps,
                       double theta);

// sum_{l < N} c_{omega_l} exp(2 i S^l), S^{l+1} = S_{eps, omega_l}(S^l), S^0 = theta0.
std::complex<double> oscillatory_sum(const PolymerModel& model, const CriticalEnergyReport& report,
                                     const ExpansionCoeffs& coeffs, const Configuration& config, double eps,
                                     double theta0, std::size_t N);

}  // namespace polyspec
