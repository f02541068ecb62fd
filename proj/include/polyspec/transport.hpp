#pragma once

// Unitary evolution e^{-iHt} psi_0 on finite boxes through a full
// eigendecomposition, and time-averaged position moments
//   M_q(T) = sum_x |x - centre|^q |psi_t(x)|^2  averaged over t.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "polyspec/eigensolve.hpp"
#include "polyspec/interval.hpp"
#include "polyspec/model.hpp"

namespace polyspec {

struct EvolutionSetup {
  TridiagonalOperator hamiltonian;
  Eigensystem eigen;
  std::size_t initial_site = 0;
  std::optional<Interval> projection_window;
  // Eigenpairs carrying the initial state: E_j in the window and |w_j|^2 >= 1e-28.
  std::vector<std::size_t> active;
  std::vector<double> weights;  // w_j = phi_j(initial_site), parallel to `active`
  double initial_norm_sq = 0.0;  // ||psi_0||^2 = sum w_j^2
  // Guard-zone weight of psi_0 itself; non-zero for projected states.
  double initial_edge_weight = 0.0;

  std::size_t num_sites() const { return hamiltonian.num_sites(); }
  double radius() const { return static_cast<double>(num_sites() - 1) / 2.0; }
};

// Eigendecomposition of the box (QL for <= kDenseOracleCap sites, MRRR above).
// The initial site defaults to the box centre; with a window the initial
// state is the unnormalized P(window) delta_j.
EvolutionSetup make_evolution(const LatticeSequences& seq, std::optional<Interval> window = std::nullopt,
                              std::optional<std::size_t> initial_site = std::nullopt);

std::vector<std::complex<double>> evolve_amplitudes(const EvolutionSetup& setup, double t);

enum class Averaging { abel, cesaro };
const char* to_string(Averaging a);

inline constexpr std::size_t kDefaultQuadrature = 2000;
inline constexpr double kAbelCutoff = 10.0;       // Abel integral truncated at 10 T
inline constexpr double kEdgeFraction = 0.9;      // guard zone |x - centre| > 0.9 radius
inline constexpr double kEdgeTolerance = 1e-6;    // allowed weight in the guard zone

// Instantaneous moments at the given times. Throws BoundaryContamination when
// the guard-zone weight exceeds its t = 0 value by more than kEdgeTolerance.
std::vector<double> instantaneous_moments(const EvolutionSetup& setup, double q, std::span<const double> times);

double moment(const EvolutionSetup& setup, double q, double T, Averaging averaging,
              std::size_t quadrature_points = kDefaultQuadrature);

struct MomentCurve {
  std::vector<double> times;
  std::vector<double> abel_moments;    // empty unless requested
  std::vector<double> cesaro_moments;  // empty unless requested
  double q = 2.0;
};

// Cesaro values share one uniform grid of `quadrature_points` steps on
// [0, max T]; Abel values use their own grid on [0, 10 T] each.
MomentCurve moment_curve(const EvolutionSetup& setup, double q, std::span<const double> Ts, bool cesaro = true,
                         bool abel = false, std::size_t quadrature_points = kDefaultQuadrature);

struct TransportFit {
  double slope = 0.0;                  // fit of log <M_q> against log T
  double mean_slope = 0.0;             // mean of per-realization slopes
  double ci_half_width = 0.0;          // 95% half width of mean_slope (0 for one realization)
  std::vector<double> per_realization;
  std::vector<double> times;
  std::vector<double> mean_moments;    // Cesaro M_q averaged over realizations
};

// Boxes of 2 box_radius + 1 sites started at the centre, Cesaro averaging.
TransportFit transport_exponent(const PolymerModel& model, double q, std::span<const double> T_grid,
                                std::size_t box_radius, std::optional<Interval> window, std::size_t realizations,
                                std::uint64_t seed, unsigned workers = 1,
                                std::size_t quadrature_points = kDefaultQuadrature);
// Same for a fixed lattice (e.g. the free chain).
TransportFit transport_exponent(const LatticeSequences& seq, double q, std::span<const double> T_grid,
                                std::optional<Interval> window, std::size_t quadrature_points = kDefaultQuadrature);

}  // namespace polyspec
