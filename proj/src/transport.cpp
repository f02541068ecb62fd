#include "polyspec/transport.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polyspec/errors.hpp"
#include "polyspec/parallel.hpp"
#include "polyspec/statistics.hpp"

namespace polyspec {

namespace {
constexpr double kWeightCutoff = 1e-28;
constexpr std::size_t kTimeBatch = 128;
}  // namespace

EvolutionSetup make_evolution(const LatticeSequences& seq, std::optional<Interval> window,
                              std::optional<std::size_t> initial_site) {
  if (seq.num_sites() == 0) throw std::invalid_argument("evolution needs a non-empty box");
  EvolutionSetup s{build_hamiltonian(seq), {}, 0, window, {}, {}, 0.0, 0.0};
  s.initial_site = initial_site.value_or((seq.num_sites() - 1) / 2);
  if (s.initial_site >= seq.num_sites()) throw std::invalid_argument("initial site outside the box");
  s.eigen = s.num_sites() <= kDenseOracleCap ? dense_oracle(s.hamiltonian) : mrrr_eigensystem(s.hamiltonian);
  for (std::size_t j = 0; j < s.eigen.n; ++j) {
    if (window && !window->contains(s.eigen.spectrum.eigenvalues[j])) continue;
    const double w = s.eigen(s.initial_site, j);
    if (w * w < kWeightCutoff) continue;
    s.active.push_back(j);
    s.weights.push_back(w);
    s.initial_norm_sq += w * w;
  }
  s.initial_edge_weight = 0.0;
  const auto psi0 = evolve_amplitudes(s, 0.0);
  const double centre = static_cast<double>(s.initial_site), edge = kEdgeFraction * s.radius();
  for (std::size_t x = 0; x < psi0.size(); ++x)
    if (std::abs(static_cast<double>(x) - centre) > edge) s.initial_edge_weight += std::norm(psi0[x]);
  return s;
}

std::vector<std::complex<double>> evolve_amplitudes(const EvolutionSetup& setup, double t) {
  const std::size_t n = setup.num_sites();
  std::vector<std::complex<double>> psi(n);
  for (std::size_t k = 0; k < setup.active.size(); ++k) {
    const std::size_t j = setup.active[k];
    const std::complex<double> c = setup.weights[k] * std::polar(1.0, -setup.eigen.spectrum.eigenvalues[j] * t);
    const double* phi = setup.eigen.column(j);
    for (std::size_t x = 0; x < n; ++x) psi[x] += c * phi[x];
  }
  return psi;
}

const char* to_string(Averaging a) { return a == Averaging::abel ? "abel" : "cesaro"; }

std::vector<double> instantaneous_moments(const EvolutionSetup& setup, double q, std::span<const double> times) {
  if (!(q > 0.0)) throw std::invalid_argument("moment order q must be positive");
  const std::size_t n = setup.num_sites();
  const std::size_t m = setup.active.size();
  std::vector<double> out(times.size(), 0.0);
  if (m == 0) return out;

  // Eigenvectors of the active set, column-major n x m.
  std::vector<double> packed;
  const double* phi = setup.eigen.vectors.data();
  if (m != setup.eigen.n) {
    packed.resize(n * m);
    for (std::size_t k = 0; k < m; ++k)
      std::copy_n(setup.eigen.column(setup.active[k]), n, packed.data() + k * n);
    phi = packed.data();
  }

  const double centre = static_cast<double>(setup.initial_site);
  const double edge = kEdgeFraction * setup.radius();
  std::vector<double> dist_q(n);
  std::vector<char> in_edge(n);
  for (std::size_t x = 0; x < n; ++x) {
    const double d = std::abs(static_cast<double>(x) - centre);
    dist_q[x] = std::pow(d, q);
    in_edge[x] = d > edge;
  }

  std::vector<double> coef, amp;
  for (std::size_t start = 0; start < times.size(); start += kTimeBatch) {
    const std::size_t b = std::min(kTimeBatch, times.size() - start);
    // Columns 0..b-1: real parts, b..2b-1: imaginary parts of the coefficients.
    coef.assign(m * 2 * b, 0.0);
    for (std::size_t k = 0; k < b; ++k) {
      const double t = times[start + k];
      for (std::size_t i = 0; i < m; ++i) {
        const double phase = setup.eigen.spectrum.eigenvalues[setup.active[i]] * t;
        coef[k * m + i] = setup.weights[i] * std::cos(phase);
        coef[(b + k) * m + i] = -setup.weights[i] * std::sin(phase);
      }
    }
    amp.assign(n * 2 * b, 0.0);
    cblas_dgemm(CblasColMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(n), static_cast<int>(2 * b),
                static_cast<int>(m), 1.0, phi, static_cast<int>(n), coef.data(), static_cast<int>(m), 0.0,
                amp.data(), static_cast<int>(n));
    for (std::size_t k = 0; k < b; ++k) {
      const double* re = amp.data() + k * n;
      const double* im = amp.data() + (b + k) * n;
      double mom = 0.0, edge_weight = 0.0;
      for (std::size_t x = 0; x < n; ++x) {
        const double p = re[x] * re[x] + im[x] * im[x];
        mom += dist_q[x] * p;
        if (in_edge[x]) edge_weight += p;
      }
      if (edge_weight > setup.initial_edge_weight + kEdgeTolerance)
        throw BoundaryContamination("weight " + std::to_string(edge_weight) + " near the box edge at t = " +
                                    std::to_string(times[start + k]));
      out[start + k] = mom;
    }
  }
  return out;
}

namespace {
std::vector<double> uniform_grid(double t_max, std::size_t steps) {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = t_max * static_cast<double>(k) / static_cast<double>(steps);
  return t;
}

double abel_average(const EvolutionSetup& setup, double q, double T, std::size_t steps) {
  const auto t = uniform_grid(kAbelCutoff * T, steps);
  const auto m = instantaneous_moments(setup, q, t);
  const double dt = t[1] - t[0];
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double w = (k == 0 || k + 1 == t.size()) ? 0.5 : 1.0;
    s += w * std::exp(-t[k] / T) * m[k];
  }
  return s * dt / T;
}

void check_times(std::span<const double> Ts, std::size_t steps) {
  if (steps < 2) throw std::invalid_argument("quadrature needs at least 2 steps");
  for (double T : Ts)
    if (!(T > 0.0)) throw std::invalid_argument("averaging time must be positive");
}
}  // namespace

double moment(const EvolutionSetup& setup, double q, double T, Averaging averaging, std::size_t quadrature_points) {
  const double Ts[] = {T};
  const MomentCurve c = moment_curve(setup, q, Ts, averaging == Averaging::cesaro, averaging == Averaging::abel,
                                     quadrature_points);
  return averaging == Averaging::cesaro ? c.cesaro_moments[0] : c.abel_moments[0];
}

MomentCurve moment_curve(const EvolutionSetup& setup, double q, std::span<const double> Ts, bool cesaro, bool abel,
                         std::size_t quadrature_points) {
  check_times(Ts, quadrature_points);
  MomentCurve c;
  c.q = q;
  c.times.assign(Ts.begin(), Ts.end());
  if (cesaro && !Ts.empty()) {
    const double t_max = *std::max_element(Ts.begin(), Ts.end());
    const auto t = uniform_grid(t_max, quadrature_points);
    const auto m = instantaneous_moments(setup, q, t);
    const double dt = t[1] - t[0];
    std::vector<double> cumulative(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) cumulative[k] = cumulative[k - 1] + 0.5 * dt * (m[k - 1] + m[k]);
    for (double T : Ts) {
      const double pos = T / dt;
      const auto k = std::min(static_cast<std::size_t>(pos), t.size() - 2);
      const double frac = pos - static_cast<double>(k);
      // Trapezoid on the partial cell, with m interpolated linearly.
      const double m_T = m[k] + frac * (m[k + 1] - m[k]);
      const double integral = cumulative[k] + 0.5 * frac * dt * (m[k] + m_T);
      c.cesaro_moments.push_back(integral / T);
    }
  }
  if (abel)
    for (double T : Ts) c.abel_moments.push_back(abel_average(setup, q, T, quadrature_points));
  return c;
}

namespace {
double log_slope(std::span<const double> Ts, std::span<const double> M) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    if (!(M[i] > 0.0)) throw NumericalFailure("non-positive moment in slope fit");
    lx.push_back(std::log(Ts[i]));
    ly.push_back(std::log(M[i]));
  }
  return ls_slope(lx, ly);
}
}  // namespace

TransportFit transport_exponent(const PolymerModel& model, double q, std::span<const double> T_grid,
                                std::size_t box_radius, std::optional<Interval> window, std::size_t realizations,
                                std::uint64_t seed, unsigned workers, std::size_t quadrature_points) {
  if (realizations == 0) throw std::invalid_argument("transport needs at least one realization");
  if (T_grid.size() < 2) throw std::invalid_argument("transport fit needs at least two times");
  const std::size_t sites = 2 * box_radius + 1;
  auto curves = parallel_map(realizations, workers, [&](std::size_t r) {
    const EvolutionSetup setup = make_evolution(sample_box(model, SiteCount{sites}, seed, r), window);
    return moment_curve(setup, q, T_grid, true, false, quadrature_points).cesaro_moments;
  });
  TransportFit fit;
  fit.times.assign(T_grid.begin(), T_grid.end());
  fit.mean_moments.assign(T_grid.size(), 0.0);
  for (const auto& c : curves) {
    fit.per_realization.push_back(log_slope(T_grid, c));
    for (std::size_t i = 0; i < c.size(); ++i) fit.mean_moments[i] += c[i] / static_cast<double>(realizations);
  }
  fit.slope = log_slope(T_grid, fit.mean_moments);
  double mean = 0.0;
  for (double s : fit.per_realization) mean += s / static_cast<double>(realizations);
  fit.mean_slope = mean;
  if (realizations > 1) {
    double var = 0.0;
    for (double s : fit.per_realization) var += (s - mean) * (s - mean);
    var /= static_cast<double>(realizations - 1);
    fit.ci_half_width = 1.96 * std::sqrt(var / static_cast<double>(realizations));
  }
  return fit;
}

TransportFit transport_exponent(const LatticeSequences& seq, double q, std::span<const double> T_grid,
                                std::optional<Interval> window, std::size_t quadrature_points) {
  if (T_grid.size() < 2) throw std::invalid_argument("transport fit needs at least two times");
  const EvolutionSetup setup = make_evolution(seq, window);
  TransportFit fit;
  fit.times.assign(T_grid.begin(), T_grid.end());
  fit.mean_moments = moment_curve(setup, q, T_grid, true, false, quadrature_points).cesaro_moments;
  fit.slope = fit.mean_slope = log_slope(T_grid, fit.mean_moments);
  fit.per_realization = {fit.slope};
  return fit;
}

}  // namespace polyspec
