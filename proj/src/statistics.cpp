#include "polyspec/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "polyspec/errors.hpp"
#include "polyspec/parallel.hpp"
#include "polyspec/prufer.hpp"

namespace polyspec {

namespace {
constexpr double kBisectionTol = 1e-12;

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Linear interpolation on increasing nodes; x must lie within [xs.front(), xs.back()].
double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (xs.size() == 1) return ys.front();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.end()) return ys.back();
  if (it == xs.begin()) return ys.front();
  const std::size_t k = static_cast<std::size_t>(it - xs.begin());
  const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + w * (ys[k] - ys[k - 1]);
}
}  // namespace

EmpiricalIDS::EmpiricalIDS(std::vector<double> pooled) : pooled_(std::move(pooled)) {
  if (pooled_.empty()) throw InsufficientData("empirical IDS needs at least one eigenvalue");
  total_ = pooled_.size();
  build_nodes();
}

EmpiricalIDS::EmpiricalIDS(std::vector<double> pooled_in_window, std::size_t count_below, std::size_t total_count,
                           Interval window)
    : pooled_(std::move(pooled_in_window)), count_below_(count_below), total_(total_count), window_(window) {
  if (!(window.hi > window.lo)) throw std::invalid_argument("IDS window is empty");
  if (total_ == 0 || count_below_ + pooled_.size() > total_)
    throw std::invalid_argument("inconsistent windowed IDS counts");
  for (double e : pooled_)
    if (!window.contains(e)) throw std::invalid_argument("pooled eigenvalue outside the IDS window");
  build_nodes();
}

void EmpiricalIDS::build_nodes() {
  std::sort(pooled_.begin(), pooled_.end());
  const double total = static_cast<double>(total_);
  node_e_.clear();
  node_u_.clear();
  if (window_) {
    node_e_.push_back(window_->lo);
    node_u_.push_back(static_cast<double>(count_below_) / total);
  }
  for (std::size_t i = 0; i < pooled_.size();) {
    std::size_t j = i;
    while (j < pooled_.size() && pooled_[j] == pooled_[i]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j - 1);
    const double u = (static_cast<double>(count_below_) + rank + 0.5) / total;
    if (!node_e_.empty() && node_e_.back() == pooled_[i]) {
      node_u_.back() = u;
    } else {
      node_e_.push_back(pooled_[i]);
      node_u_.push_back(u);
    }
    i = j;
  }
  if (window_) {
    node_e_.push_back(window_->hi);
    node_u_.push_back(static_cast<double>(count_below_ + pooled_.size()) / total);
  }
}

Interval EmpiricalIDS::value_range() const { return {node_u_.front(), node_u_.back()}; }

double EmpiricalIDS::evaluate(double E) const {
  if (window_) {
    if (E < window_->lo || E > window_->hi) throw std::out_of_range("IDS evaluated outside its energy window");
  } else {
    if (E < node_e_.front()) return 0.0;
    if (E >= node_e_.back()) return 1.0;
  }
  return interpolate(node_e_, node_u_, E);
}

double EmpiricalIDS::invert(double u) const {
  if (window_) {
    if (u < node_u_.front() || u > node_u_.back()) throw std::out_of_range("IDS inverted outside its window");
  } else {
    if (u <= node_u_.front()) return node_e_.front();
    if (u >= node_u_.back()) return node_e_.back();
  }
  return interpolate(node_u_, node_e_, u);
}

EmpiricalIDS empirical_ids(const PolymerModel& model, std::size_t L_ids, std::size_t realizations,
                           std::uint64_t seed, unsigned workers) {
  if (L_ids == 0 || realizations == 0) throw std::invalid_argument("empirical IDS needs boxes");
  auto spectra = parallel_map(realizations, workers, [&](std::size_t r) {
    return ql_eigenvalues(build_hamiltonian(sample_box(model, SiteCount{L_ids}, seed, r)));
  });
  std::vector<double> pooled;
  pooled.reserve(L_ids * realizations);
  for (auto& s : spectra) pooled.insert(pooled.end(), s.begin(), s.end());
  return EmpiricalIDS(std::move(pooled));
}

EmpiricalIDS empirical_ids(const PolymerModel& model, std::size_t L_ids, std::size_t realizations, Interval window,
                           std::uint64_t seed, unsigned workers) {
  if (L_ids == 0 || realizations == 0) throw std::invalid_argument("empirical IDS needs boxes");
  struct Part {
    std::size_t below = 0;
    std::vector<double> inside;
  };
  auto parts = parallel_map(realizations, workers, [&](std::size_t r) {
    const TridiagonalOperator H = build_hamiltonian(sample_box(model, SiteCount{L_ids}, seed, r));
    return Part{sturm_count(H, window.lo), eigenvalues_in_window(H, window, kBisectionTol).eigenvalues};
  });
  std::size_t below = 0;
  std::vector<double> pooled;
  for (auto& p : parts) {
    below += p.below;
    pooled.insert(pooled.end(), p.inside.begin(), p.inside.end());
  }
  return EmpiricalIDS(std::move(pooled), below, L_ids * realizations, window);
}

double ids_at_critical(const CriticalEnergyReport& report, const PolymerModel& model) {
  return model.average(report.eta_plus, report.eta_minus) / std::numbers::pi / model.mean_length();
}

double dos_at_critical(const ExpansionCoeffs& coeffs, const PolymerModel& model) {
  return model.average(coeffs.d_plus, coeffs.d_minus) / std::numbers::pi / model.mean_length();
}

PointProcessSample unfold(const Spectrum& spectrum, const EmpiricalIDS& ids, double E0, std::size_t L_sites) {
  PointProcessSample s;
  s.center_energy = E0;
  s.box_sites = L_sites;
  s.kind = ProcessKind::unfolded;
  const double u0 = ids.evaluate(E0);
  const double L = static_cast<double>(L_sites);
  s.atoms.reserve(spectrum.eigenvalues.size());
  for (double e : spectrum.eigenvalues) s.atoms.push_back(L * (ids.evaluate(e) - u0));
  std::sort(s.atoms.begin(), s.atoms.end());
  return s;
}

PointProcessSample les_sample(const PolymerModel& model, const EmpiricalIDS& ids, double E0, std::size_t L_sites,
                              double window_atoms, std::uint64_t seed, std::uint64_t realization_index) {
  if (!(window_atoms > 0.0)) throw std::invalid_argument("window_atoms must be positive");
  const double L = static_cast<double>(L_sites);
  const double u0 = ids.evaluate(E0);
  const double u_lo = std::max(0.0, u0 - window_atoms / L), u_hi = std::min(1.0, u0 + (window_atoms + kGapMargin) / L);
  const Interval range = ids.value_range();
  if (ids.window() && (u_lo < range.lo || u_hi > range.hi))
    throw InsufficientData("IDS window too narrow for the LES window at L = " + std::to_string(L_sites) +
                           " (widen the IDS energy window)");
  const Interval window{ids.invert(u_lo), ids.invert(u_hi)};
  const TridiagonalOperator H = build_hamiltonian(sample_box(model, SiteCount{L_sites}, seed, realization_index));
  PointProcessSample s = window.hi > window.lo ? unfold(eigenvalues_in_window(H, window, kBisectionTol), ids, E0, L_sites)
                                               : PointProcessSample{};
  s.center_energy = E0;
  s.box_sites = L_sites;
  s.kind = ProcessKind::unfolded;
  s.core = {-window_atoms, window_atoms};
  s.realization_index = realization_index;
  return s;
}

PointProcessSample les_sample_rescaled(const PolymerModel& model, double E0, double n_density, std::size_t L_sites,
                                       double window_atoms, std::uint64_t seed, std::uint64_t realization_index) {
  if (!(window_atoms > 0.0)) throw std::invalid_argument("window_atoms must be positive");
  if (!(n_density > 0.0)) throw std::invalid_argument("density of states must be positive");
  const double scale = n_density * static_cast<double>(L_sites);
  const Interval window{E0 - window_atoms / scale, E0 + (window_atoms + kGapMargin) / scale};
  const TridiagonalOperator H = build_hamiltonian(sample_box(model, SiteCount{L_sites}, seed, realization_index));
  PointProcessSample s;
  for (double e : eigenvalues_in_window(H, window, kBisectionTol).eigenvalues) s.atoms.push_back(scale * (e - E0));
  s.center_energy = E0;
  s.box_sites = L_sites;
  s.kind = ProcessKind::dos_rescaled;
  s.core = {-window_atoms, window_atoms};
  s.realization_index = realization_index;
  return s;
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InsufficientData("KS distance of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

double ks_exp1(std::span<const double> sample) {
  return ks_distance({sample.begin(), sample.end()}, [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); });
}

double ks_uniform01(std::span<const double> sample) {
  return ks_distance({sample.begin(), sample.end()}, [](double x) { return std::clamp(x, 0.0, 1.0); });
}

GapStatistics gap_statistics(std::span<const PointProcessSample> samples, double delta, std::size_t min_gaps) {
  GapStatistics g;
  g.delta = delta;
  for (const auto& s : samples)
    for (std::size_t j = 0; j + 1 < s.atoms.size(); ++j)
      if (s.core.contains(s.atoms[j])) g.gaps.push_back(s.atoms[j + 1] - s.atoms[j]);
  if (g.gaps.size() < min_gaps)
    throw InsufficientData("only " + std::to_string(g.gaps.size()) + " gaps, need " + std::to_string(min_gaps));
  g.mean = mean_of(g.gaps);
  g.variance = variance_of(g.gaps);
  g.ks_vs_exp1 = ks_exp1(g.gaps);
  std::size_t below = 0, at_most = 0, near = 0;
  for (double x : g.gaps) {
    below += x < 1.0;
    at_most += x <= 1.0;
    near += std::abs(x - 1.0) <= delta;
  }
  const double n = static_cast<double>(g.gaps.size());
  g.ks_vs_degenerate1 = std::max(static_cast<double>(below) / n, 1.0 - static_cast<double>(at_most) / n);
  g.fraction_near_one = static_cast<double>(near) / n;
  return g;
}

double poisson_pmf(std::size_t k, double mu) {
  return std::exp(static_cast<double>(k) * std::log(mu) - mu - std::lgamma(static_cast<double>(k) + 1.0));
}

double chi_square_survival(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi-square needs dof >= 1");
  return x <= 0.0 ? 1.0 : boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

CountingStatistics counting_statistics(std::span<const PointProcessSample> samples,
                                       std::span<const Interval> intervals, std::size_t min_samples) {
  if (samples.size() < min_samples)
    throw InsufficientData("only " + std::to_string(samples.size()) + " samples, need " + std::to_string(min_samples));
  if (intervals.empty()) throw std::invalid_argument("counting statistics need at least one interval");
  const double n = static_cast<double>(samples.size());
  CountingStatistics out;
  for (const Interval& I : intervals) {
    IntervalCounts ic;
    ic.interval = I;
    std::vector<double> as_double;
    for (const auto& s : samples) {
      if (I.lo < s.core.lo || I.hi > s.core.hi) throw std::invalid_argument("counting interval leaves the sample core");
      const auto lo = std::lower_bound(s.atoms.begin(), s.atoms.end(), I.lo);
      const auto hi = std::lower_bound(s.atoms.begin(), s.atoms.end(), I.hi);
      const auto k = static_cast<std::size_t>(hi - lo);
      ic.counts.push_back(k);
      as_double.push_back(static_cast<double>(k));
      if (ic.histogram.size() <= k) ic.histogram.resize(k + 1, 0);
      ++ic.histogram[k];
    }
    ic.mean = mean_of(as_double);
    ic.variance = variance_of(as_double);
    const double mu = I.width();
    double tail_p = 1.0, tail_o = n;
    for (std::size_t k = 0; k < 4; ++k) {
      const double e = n * poisson_pmf(k, mu);
      const double o = k < ic.histogram.size() ? static_cast<double>(ic.histogram[k]) : 0.0;
      ic.chi_square += (o - e) * (o - e) / e;
      tail_p -= poisson_pmf(k, mu);
      tail_o -= o;
    }
    const double e_tail = n * std::max(tail_p, 0.0);
    if (e_tail > 0.0) ic.chi_square += (tail_o - e_tail) * (tail_o - e_tail) / e_tail;
    ic.dof = 4;
    ic.p_value = chi_square_survival(ic.chi_square, ic.dof);
    out.intervals.push_back(std::move(ic));
  }

  const std::size_t m = out.intervals.size();
  out.covariance.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i)
        s += (static_cast<double>(out.intervals[a].counts[i]) - out.intervals[a].mean) *
             (static_cast<double>(out.intervals[b].counts[i]) - out.intervals[b].mean);
      out.covariance[a][b] = s / (n - 1.0);
    }

  if (m >= 2) {
    auto bin_p = [](std::size_t k, double mu) {
      if (k < 3) return poisson_pmf(k, mu);
      return 1.0 - poisson_pmf(0, mu) - poisson_pmf(1, mu) - poisson_pmf(2, mu);
    };
    double joint[4][4] = {};
    for (std::size_t i = 0; i < samples.size(); ++i)
      joint[std::min<std::size_t>(out.intervals[0].counts[i], 3)][std::min<std::size_t>(out.intervals[1].counts[i], 3)] +=
          1.0;
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        const double e = n * bin_p(a, intervals[0].width()) * bin_p(b, intervals[1].width());
        out.joint_chi_square += (joint[a][b] - e) * (joint[a][b] - e) / e;
      }
    out.joint_dof = 15;
    out.joint_p_value = chi_square_survival(out.joint_chi_square, out.joint_dof);
  }
  return out;
}

ClockSpacingSample clock_spacing_statistic(const PolymerModel& model, double E_c, double n_Ec, std::size_t L_sites,
                                           std::size_t realizations, int j_max, std::uint64_t seed,
                                           unsigned workers) {
  if (j_max < 1) throw std::invalid_argument("j_max must be at least 1");
  if (!(n_Ec > 0.0)) throw std::invalid_argument("density of states must be positive");
  const double scale = n_Ec * static_cast<double>(L_sites);
  const auto jm = static_cast<std::size_t>(j_max);
  auto per = parallel_map(realizations, workers, [&](std::size_t r) {
    const TridiagonalOperator H = build_hamiltonian(sample_box(model, SiteCount{L_sites}, seed, r));
    double half = (j_max + 4.0) / scale;
    for (int attempt = 0; attempt < 6; ++attempt, half *= 2.0) {
      const auto ev = eigenvalues_in_window(H, {E_c - half, E_c + half}, kBisectionTol).eigenvalues;
      const auto i0 = static_cast<std::size_t>(std::lower_bound(ev.begin(), ev.end(), E_c) - ev.begin());
      if (i0 < jm || i0 + jm >= ev.size()) continue;
      std::vector<double> gaps;
      for (std::size_t i = i0 - jm; i < i0 + jm; ++i) gaps.push_back(scale * (ev[i + 1] - ev[i]));
      return gaps;
    }
    throw InsufficientData("too few eigenvalues around the critical energy");
  });
  ClockSpacingSample out;
  for (std::size_t r = 0; r < realizations; ++r)
    for (std::size_t k = 0; k < per[r].size(); ++k) {
      out.rescaled_gaps.push_back(per[r][k]);
      out.realization.push_back(r);
      out.j.push_back(static_cast<int>(k) - j_max);
    }
  out.mean = mean_of(out.rescaled_gaps);
  out.variance = variance_of(out.rescaled_gaps);
  return out;
}

UniformityResult uniformity_test(const PolymerModel& model, const CriticalEnergyReport& report, std::size_t L_sites,
                                 std::size_t realizations, std::uint64_t seed, unsigned workers) {
  UniformityResult out;
  out.fractions = parallel_map(realizations, workers, [&](std::size_t r) {
    const LatticeSequences seq = sample_box(model, SiteCount{L_sites}, seed, r);
    return phase_parts(prufer_phase(seq, report.diagonalizer, report.energy)).fractional_part / std::numbers::pi;
  });
  out.ks = ks_uniform01(out.fractions);
  return out;
}

namespace {
// Worse one-sided log-log slope of |f(x0 + s h) - f(x0)|, capped at 1.
std::pair<double, std::size_t> holder_slope(const std::function<double(double)>& f, double x0,
                                            std::span<const double> scales) {
  double f0;
  try {
    f0 = f(x0);
  } catch (const std::out_of_range&) {
    throw InsufficientData("Hoelder probe centre outside the estimator's range");
  }
  double worst = std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  for (double side : {-1.0, 1.0}) {
    std::vector<double> lx, ly;
    for (double h : scales) {
      double inc;
      try {
        inc = std::abs(f(x0 + side * h) - f0);
      } catch (const std::out_of_range&) {
        continue;
      }
      if (!(inc > 0.0) || !std::isfinite(inc)) continue;
      lx.push_back(std::log(h));
      ly.push_back(std::log(inc));
    }
    if (lx.size() < 2) continue;
    used += lx.size();
    worst = std::min(worst, ls_slope(lx, ly));
  }
  if (!std::isfinite(worst)) throw InsufficientData("no side of the Hoelder probe has two usable scales");
  return {std::min(worst, 1.0), used};
}
}  // namespace

HolderEstimate holder_probe(const std::function<double(double)>& N, const std::function<double(double)>& N_inverse,
                            double E0, std::span<const double> scales) {
  HolderEstimate h;
  const auto [r1, n1] = holder_slope(N, E0, scales);
  const auto [r2, n2] = holder_slope(N_inverse, N(E0), scales);
  h.rho1 = r1;
  h.rho2 = r2;
  h.scales_used = n1 + n2;
  return h;
}

HolderEstimate holder_probe(const EmpiricalIDS& ids, double E0, std::span<const double> scales) {
  return holder_probe([&](double E) { return ids.evaluate(E); },
                      [&](double u) {
                        if (u < 0.0 || u > 1.0) throw std::out_of_range("u outside [0, 1]");
                        return ids.invert(u);
                      },
                      E0, scales);
}

MinamiEstimate minami_probe(const PolymerModel& model, std::size_t L_sites, double beta, double gamma, double c2,
                            std::size_t realizations, double E0, std::uint64_t seed, unsigned workers) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (!(c2 > 0.0) || realizations == 0) throw std::invalid_argument("minami probe needs c2 > 0 and realizations");
  const double L = static_cast<double>(L_sites);
  MinamiEstimate out;
  out.box_sites = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::pow(L, beta))));
  const double w = c2 / std::pow(L, gamma);
  out.interval = {E0 - w / 2, E0 + w / 2};
  const std::vector<double> ends{out.interval.lo, out.interval.hi};
  const auto counts = parallel_map(realizations, workers, [&](std::size_t r) {
    const auto c = sturm_counts(build_hamiltonian(sample_box(model, SiteCount{out.box_sites}, seed, r)), ends);
    return c[1] - c[0];
  });
  std::size_t one = 0, two = 0;
  for (std::size_t c : counts) {
    one += c >= 1;
    two += c >= 2;
  }
  out.p_at_least_one = static_cast<double>(one) / static_cast<double>(realizations);
  out.p_at_least_two = static_cast<double>(two) / static_cast<double>(realizations);
  out.ratio = one == 0 ? std::numeric_limits<double>::quiet_NaN()
                       : out.p_at_least_two / (out.p_at_least_one * out.p_at_least_one);
  return out;
}

double ls_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs two matching points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope fit needs distinct abscissae");
  return sxy / sxx;
}

}  // namespace polyspec
