#pragma once

// Density of states, unfolding and local eigenvalue statistics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "polyspec/eigensolve.hpp"
#include "polyspec/interval.hpp"
#include "polyspec/model.hpp"
#include "polyspec/transfer.hpp"

namespace polyspec {

// Integrated density of states estimated from pooled eigenvalues, linearly
// interpolated between order statistics. Tied values are merged into one
// node at their average rank so the interpolant stays strictly increasing.
//
// A windowed estimate only knows the eigenvalues inside `window` plus how
// many fell below it; evaluating or inverting outside the window throws
// std::out_of_range.
class EmpiricalIDS {
 public:
  // Full pooled spectra; `total_count` = number of pooled eigenvalues.
  explicit EmpiricalIDS(std::vector<double> pooled);
  EmpiricalIDS(std::vector<double> pooled_in_window, std::size_t count_below, std::size_t total_count,
               Interval window);

  double evaluate(double E) const;
  double invert(double u) const;

  const std::vector<double>& pooled() const { return pooled_; }
  std::size_t total_count() const { return total_; }
  const std::optional<Interval>& window() const { return window_; }
  // Range of u over which invert is defined.
  Interval value_range() const;

 private:
  void build_nodes();

  std::vector<double> pooled_;
  std::size_t count_below_ = 0;
  std::size_t total_ = 0;
  std::optional<Interval> window_;
  std::vector<double> node_e_, node_u_;
};

// Boxes of `L_ids` sites, one per realization index, full spectra.
EmpiricalIDS empirical_ids(const PolymerModel& model, std::size_t L_ids, std::size_t realizations,
                           std::uint64_t seed, unsigned workers = 1);
// Same ensemble restricted to an energy window (Sturm counts + bisection).
EmpiricalIDS empirical_ids(const PolymerModel& model, std::size_t L_ids, std::size_t realizations,
                           Interval window, std::uint64_t seed, unsigned workers = 1);

// N(E_c) = <eta / pi> / <L>
double ids_at_critical(const CriticalEnergyReport& report, const PolymerModel& model);
// n(E_c) = <d> / (pi <L>)
double dos_at_critical(const ExpansionCoeffs& coeffs, const PolymerModel& model);

enum class ProcessKind { unfolded, dos_rescaled };

struct PointProcessSample {
  std::vector<double> atoms;  // sorted
  double center_energy = 0.0;
  std::size_t box_sites = 0;
  ProcessKind kind = ProcessKind::unfolded;
  // Atoms outside the core are kept only as right neighbours for gaps.
  Interval core{-1e300, 1e300};
  std::uint64_t realization_index = 0;
};

// atoms = L (N(E_j) - N(E0))
PointProcessSample unfold(const Spectrum& spectrum, const EmpiricalIDS& ids, double E0, std::size_t L_sites);

// Extra atoms extracted to the right of the core so every core atom has a successor.
inline constexpr double kGapMargin = 8.0;

// Unfolded LES of one box around E0, core [-window_atoms, window_atoms).
PointProcessSample les_sample(const PolymerModel& model, const EmpiricalIDS& ids, double E0, std::size_t L_sites,
                              double window_atoms, std::uint64_t seed, std::uint64_t realization_index);
// Process n L (E_j - E0), core [-window_atoms, window_atoms).
PointProcessSample les_sample_rescaled(const PolymerModel& model, double E0, double n_density, std::size_t L_sites,
                                       double window_atoms, std::uint64_t seed, std::uint64_t realization_index);

// Sup distance between the empirical CDF of `sample` and `cdf`.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);
double ks_exp1(std::span<const double> sample);
double ks_uniform01(std::span<const double> sample);

struct GapStatistics {
  std::vector<double> gaps;
  double mean = 0.0;
  double variance = 0.0;
  double ks_vs_exp1 = 0.0;
  // sup distance to the point mass at 1
  double ks_vs_degenerate1 = 0.0;
  // fraction of gaps in [1 - delta, 1 + delta]
  double fraction_near_one = 0.0;
  double delta = 0.1;
};

// Forward gaps a_{j+1} - a_j for core atoms a_j, never across samples.
// Throws InsufficientData below `min_gaps` gaps.
GapStatistics gap_statistics(std::span<const PointProcessSample> samples, double delta = 0.1,
                             std::size_t min_gaps = 100);

struct IntervalCounts {
  Interval interval;
  std::vector<std::size_t> counts;  // per sample
  std::vector<std::size_t> histogram;  // histogram[k] = #samples with k atoms
  double mean = 0.0;
  double variance = 0.0;
  double chi_square = 0.0;  // vs Poisson(|I|), bins 0..3 and >= 4
  int dof = 0;
  double p_value = 0.0;
};

struct CountingStatistics {
  std::vector<IntervalCounts> intervals;
  std::vector<std::vector<double>> covariance;
  // Product-Poisson test on the first two intervals, bins {0,1,2,>=3}^2.
  double joint_chi_square = 0.0;
  int joint_dof = 0;
  double joint_p_value = 0.0;
};

// Poisson(mu) pmf.
double poisson_pmf(std::size_t k, double mu);
// P(chi^2_dof > x)
double chi_square_survival(double x, int dof);

CountingStatistics counting_statistics(std::span<const PointProcessSample> samples, std::span<const Interval> intervals,
                                       std::size_t min_samples = 500);

struct ClockSpacingSample {
  std::vector<double> rescaled_gaps;      // n L (E'_{j+1} - E'_j), j = -j_max .. j_max-1
  std::vector<std::uint64_t> realization;  // realization index of each gap
  std::vector<int> j;                      // re-indexed position of each gap
  double mean = 0.0;
  double variance = 0.0;
};

// E'_0 is the first eigenvalue >= E_c, E'_{-1} the last one below it.
ClockSpacingSample clock_spacing_statistic(const PolymerModel& model, double E_c, double n_Ec, std::size_t L_sites,
                                           std::size_t realizations, int j_max, std::uint64_t seed,
                                           unsigned workers = 1);

struct UniformityResult {
  std::vector<double> fractions;  // phi(E_c, L) / pi per realization
  double ks = 0.0;
};

UniformityResult uniformity_test(const PolymerModel& model, const CriticalEnergyReport& report, std::size_t L_sites,
                                 std::size_t realizations, std::uint64_t seed, unsigned workers = 1);

struct HolderEstimate {
  double rho1 = 0.0;  // Hoelder exponent of N at E0, worse side, capped at 1
  double rho2 = 0.0;  // same for N^{-1} at N(E0)
  double product() const { return rho1 * rho2; }
  bool exceeds_two_thirds() const { return product() > 2.0 / 3.0; }
  std::size_t scales_used = 0;
};

// Log-log slopes of |N(E0 +- h) - N(E0)| against h and of
// |N^{-1}(N(E0) +- h) - E0| against h over the given scales.
HolderEstimate holder_probe(const std::function<double(double)>& N, const std::function<double(double)>& N_inverse,
                            double E0, std::span<const double> scales);
HolderEstimate holder_probe(const EmpiricalIDS& ids, double E0, std::span<const double> scales);

struct MinamiEstimate {
  std::size_t box_sites = 0;
  Interval interval;
  double p_at_least_one = 0.0;
  double p_at_least_two = 0.0;
  // P(>= 2) / P(>= 1)^2, NaN when P(>= 1) = 0
  double ratio = 0.0;
};

// Boxes of round(L^beta) sites; interval of width c2 / L^gamma centered at E0.
MinamiEstimate minami_probe(const PolymerModel& model, std::size_t L_sites, double beta, double gamma, double c2,
                            std::size_t realizations, double E0, std::uint64_t seed, unsigned workers = 1);

// Least-squares slope of y against x.
double ls_slope(std::span<const double> x, std::span<const double> y);

}  // namespace polyspec
