#include "polyspec/eigensolve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <lapacke.h>

#include "polyspec/errors.hpp"

namespace polyspec {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

TridiagonalOperator::TridiagonalOperator(std::vector<double> diagonal, std::vector<double> offdiagonal)
    : diagonal_(std::move(diagonal)), offdiagonal_(std::move(offdiagonal)) {
  if (diagonal_.empty()) throw std::invalid_argument("operator needs at least one site");
  if (offdiagonal_.size() + 1 != diagonal_.size())
    throw std::invalid_argument("offdiagonal must have num_sites - 1 entries");
  offdiagonal_sq_.reserve(offdiagonal_.size());
  for (double t : offdiagonal_) {
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("hoppings must be positive");
    offdiagonal_sq_.push_back(t * t);
  }
  pivmin_ = std::max(kEps * norm_bound(), std::numeric_limits<double>::min());
}

Interval TridiagonalOperator::gershgorin() const {
  const auto [vmin, vmax] = std::minmax_element(diagonal_.begin(), diagonal_.end());
  const double tmax = offdiagonal_.empty() ? 0.0 : *std::max_element(offdiagonal_.begin(), offdiagonal_.end());
  return {*vmin - 2.0 * tmax, *vmax + 2.0 * tmax};
}

double TridiagonalOperator::norm_bound() const {
  double best = 0.0;
  const std::size_t n = diagonal_.size();
  for (std::size_t i = 0; i < n; ++i) {
    double row = std::abs(diagonal_[i]);
    if (i > 0) row += offdiagonal_[i - 1];
    if (i + 1 < n) row += offdiagonal_[i];
    best = std::max(best, row);
  }
  return best;
}

double TridiagonalOperator::entry(std::size_t i, std::size_t j) const {
  if (i == j) return diagonal_[i];
  if (i + 1 == j) return -offdiagonal_[i];
  if (j + 1 == i) return -offdiagonal_[j];
  return 0.0;
}

TridiagonalOperator build_hamiltonian(const LatticeSequences& seq) {
  if (seq.num_sites() == 0) throw std::invalid_argument("operator needs at least one site");
  if (seq.hoppings.size() != seq.potentials.size())
    throw std::invalid_argument("potential and hopping sequences differ in length");
  std::vector<double> off(seq.hoppings.begin() + 1, seq.hoppings.end());
  return TridiagonalOperator(seq.potentials, std::move(off));
}

std::size_t sturm_count(const TridiagonalOperator& H, double E) {
  const auto& v = H.diagonal_;
  const auto& t2 = H.offdiagonal_sq_;
  const double pivmin = H.pivmin_;
  double d = v[0] - E;
  if (std::abs(d) < pivmin) d = -pivmin;
  std::size_t count = d < 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    d = (v[i] - E) - t2[i - 1] / d;
    if (std::abs(d) < pivmin) d = -pivmin;
    count += d < 0.0;
  }
  return count;
}

std::vector<std::size_t> sturm_counts(const TridiagonalOperator& H, std::span<const double> energies) {
  // Independent pivot chains are interleaved so the divisions pipeline.
  constexpr std::size_t kLanes = 8;
  const auto& v = H.diagonal_;
  const auto& t2 = H.offdiagonal_sq_;
  const double pivmin = H.pivmin_;
  std::vector<std::size_t> out(energies.size());
  for (std::size_t base = 0; base < energies.size(); base += kLanes) {
    const std::size_t lanes = std::min(kLanes, energies.size() - base);
    std::array<double, kLanes> e{}, d;
    std::array<std::size_t, kLanes> c{};
    d.fill(1.0);
    for (std::size_t k = 0; k < lanes; ++k) {
      e[k] = energies[base + k];
      d[k] = v[0] - e[k];
      if (std::abs(d[k]) < pivmin) d[k] = -pivmin;
      c[k] = d[k] < 0.0;
    }
    for (std::size_t i = 1; i < v.size(); ++i) {
      const double vi = v[i];
      const double ti = t2[i - 1];
      for (std::size_t k = 0; k < kLanes; ++k) {
        double dk = (vi - e[k]) - ti / d[k];
        if (std::abs(dk) < pivmin) dk = -pivmin;
        d[k] = dk;
        c[k] += dk < 0.0;
      }
    }
    for (std::size_t k = 0; k < lanes; ++k) out[base + k] = c[k];
  }
  return out;
}

Spectrum eigenvalues_in_window(const TridiagonalOperator& H, Interval window, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("bisection tolerance must be positive");
  if (!(window.hi >= window.lo)) throw std::invalid_argument("window must satisfy lo <= hi");
  Spectrum out;
  out.window = window;
  if (window.hi == window.lo) return out;

  struct Bracket {
    double lo, hi;
    std::size_t count_lo, count_hi;
  };
  const std::array<double, 2> ends{window.lo, window.hi};
  const auto end_counts = sturm_counts(H, ends);
  std::vector<Bracket> active;
  if (end_counts[1] > end_counts[0]) active.push_back({window.lo, window.hi, end_counts[0], end_counts[1]});
  out.eigenvalues.reserve(end_counts[1] - end_counts[0]);

  std::vector<double> mids;
  std::vector<Bracket> next;
  while (!active.empty()) {
    mids.clear();
    for (const auto& b : active) mids.push_back(0.5 * (b.lo + b.hi));
    const auto counts = sturm_counts(H, mids);
    next.clear();
    for (std::size_t i = 0; i < active.size(); ++i) {
      const Bracket& b = active[i];
      const double m = mids[i];
      const std::size_t cm = std::clamp(counts[i], b.count_lo, b.count_hi);
      for (const Bracket& half : {Bracket{b.lo, m, b.count_lo, cm}, Bracket{m, b.hi, cm, b.count_hi}}) {
        const std::size_t k = half.count_hi - half.count_lo;
        if (k == 0) continue;
        const double mid = 0.5 * (half.lo + half.hi);
        const bool unsplittable = !(mid > half.lo && mid < half.hi);
        if ((k == 1 && half.hi - half.lo <= tol) || unsplittable) {
          out.eigenvalues.insert(out.eigenvalues.end(), k, mid);
        } else {
          next.push_back(half);
        }
      }
    }
    active.swap(next);
  }
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  return out;
}

Spectrum full_spectrum(const TridiagonalOperator& H, double tol) {
  Interval g = H.gershgorin();
  // Widen so the top eigenvalue lies strictly inside the half-open window.
  const double pad = std::max(1.0, std::abs(g.hi)) * 4.0 * kEps + tol;
  g.lo -= pad;
  g.hi += pad;
  return eigenvalues_in_window(H, g, tol);
}

namespace {

// LU factorization with partial pivoting of the tridiagonal H - E, solved in place.
class ShiftedTridiagonalLU {
 public:
  ShiftedTridiagonalLU(const TridiagonalOperator& H, double E) : n_(H.num_sites()) {
    const auto& v = H.diagonal();
    const auto& t = H.offdiagonal();
    const double tiny = kEps * std::max(H.norm_bound(), 1.0);
    d_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) d_[i] = v[i] - E;
    if (n_ > 1) {
      dl_.resize(n_ - 1);
      du_.resize(n_ - 1);
      for (std::size_t i = 0; i + 1 < n_; ++i) dl_[i] = du_[i] = -t[i];
    }
    du2_.assign(n_ > 2 ? n_ - 2 : 0, 0.0);
    swap_.assign(n_ > 1 ? n_ - 1 : 0, false);
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      if (std::abs(d_[i]) >= std::abs(dl_[i])) {
        if (d_[i] == 0.0) d_[i] = tiny;
        const double fact = dl_[i] / d_[i];
        dl_[i] = fact;
        d_[i + 1] -= fact * du_[i];
      } else {
        const double fact = d_[i] / dl_[i];
        d_[i] = dl_[i];
        dl_[i] = fact;
        const double temp = du_[i];
        du_[i] = d_[i + 1];
        d_[i + 1] = temp - fact * d_[i + 1];
        if (i + 2 < n_) {
          du2_[i] = du_[i + 1];
          du_[i + 1] = -fact * du_[i + 1];
        }
        swap_[i] = true;
      }
    }
    if (d_[n_ - 1] == 0.0) d_[n_ - 1] = tiny;
  }

  void solve(std::vector<double>& b) const {
    for (std::size_t i = 0; i + 1 < n_; ++i) {
      if (!swap_[i]) {
        b[i + 1] -= dl_[i] * b[i];
      } else {
        const double temp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = temp - dl_[i] * b[i];
      }
    }
    b[n_ - 1] /= d_[n_ - 1];
    if (n_ > 1) b[n_ - 2] = (b[n_ - 2] - du_[n_ - 2] * b[n_ - 1]) / d_[n_ - 2];
    for (std::size_t i = n_ - 2; i-- > 0;) b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
  }

 private:
  std::size_t n_;
  std::vector<double> d_, dl_, du_, du2_;
  std::vector<bool> swap_;
};

double normalize(std::vector<double>& x) {
  double norm = 0.0;
  for (double y : x) norm += y * y;
  norm = std::sqrt(norm);
  for (double& y : x) y /= norm;
  return norm;
}

void fix_sign(double* x, std::size_t n) {
  std::size_t imax = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(x[i]) > std::abs(x[imax])) imax = i;
  if (x[imax] < 0.0)
    for (std::size_t i = 0; i < n; ++i) x[i] = -x[i];
}

}  // namespace

std::vector<double> eigenvector(const TridiagonalOperator& H, double E) {
  const std::size_t n = H.num_sites();
  if (n == 1) return {1.0};
  const ShiftedTridiagonalLU lu(H, E);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(1.0 + 0.7 * static_cast<double>(i));
  normalize(x);

  const double target = 1e-8 * std::max(H.norm_bound(), 1.0);
  const auto& v = H.diagonal();
  const auto& t = H.offdiagonal();
  std::vector<double> r(n);
  for (int iter = 0; iter < 8; ++iter) {
    lu.solve(x);
    if (!std::all_of(x.begin(), x.end(), [](double y) { return std::isfinite(y); }))
      throw NumericalFailure("inverse iteration overflowed");
    normalize(x);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double hx = (v[i] - E) * x[i];
      if (i > 0) hx -= t[i - 1] * x[i - 1];
      if (i + 1 < n) hx -= t[i] * x[i + 1];
      res += hx * hx;
    }
    if (std::sqrt(res) <= target) {
      fix_sign(x.data(), n);
      return x;
    }
  }
  throw NumericalFailure("inverse iteration did not converge at E = " + std::to_string(E));
}

namespace {

// Implicit QL with Wilkinson-type shifts (EISPACK tql2 layout). `z` is
// column-major n x n and is rotated along with the tridiagonal, or skipped
// when null.
void tql(std::vector<double>& d, std::vector<double>& e, double* z) {
  const std::size_t n = d.size();
  e.push_back(0.0);  // e[i] couples i and i+1; e[n-1] = 0 sentinel
  double f = 0.0;
  double tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1 && std::abs(e[m]) > kEps * tst1) ++m;
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 60) throw NumericalFailure("QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = m; i-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          if (z) {
            double* zi = z + i * n;
            double* zi1 = z + (i + 1) * n;
            for (std::size_t k = 0; k < n; ++k) {
              h = zi1[k];
              zi1[k] = s * zi[k] + c * h;
              zi[k] = c * zi[k] - s * h;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

std::vector<double> negated_offdiagonal(const TridiagonalOperator& H) {
  std::vector<double> e(H.offdiagonal());
  for (double& x : e) x = -x;
  return e;
}

}  // namespace

Eigensystem dense_oracle(const TridiagonalOperator& H, std::size_t cap) {
  const std::size_t n = H.num_sites();
  if (n > cap) throw std::invalid_argument("dense oracle capped at " + std::to_string(cap) + " sites");
  std::vector<double> d = H.diagonal();
  std::vector<double> e = negated_offdiagonal(H);
  std::vector<double> z(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
  tql(d, e, z.data());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  Eigensystem out;
  out.n = n;
  out.spectrum.eigenvalues.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    out.spectrum.eigenvalues[j] = d[order[j]];
    std::copy_n(z.data() + order[j] * n, n, out.vectors.data() + j * n);
    fix_sign(out.vectors.data() + j * n, n);
  }
  return out;
}

std::vector<double> ql_eigenvalues(const TridiagonalOperator& H) {
  std::vector<double> d = H.diagonal();
  std::vector<double> e = negated_offdiagonal(H);
  tql(d, e, nullptr);
  std::sort(d.begin(), d.end());
  return d;
}

Eigensystem mrrr_eigensystem(const TridiagonalOperator& H) {
  const auto n = static_cast<lapack_int>(H.num_sites());
  std::vector<double> d = H.diagonal();
  std::vector<double> e = negated_offdiagonal(H);
  e.resize(static_cast<std::size_t>(n), 0.0);
  Eigensystem out;
  out.n = H.num_sites();
  out.spectrum.eigenvalues.resize(out.n);
  out.vectors.resize(out.n * out.n);
  std::vector<lapack_int> support(2 * out.n);
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'A', n, d.data(), e.data(), 0.0, 0.0, 0, 0, 0.0, &found,
                     out.spectrum.eigenvalues.data(), out.vectors.data(), n, support.data());
  if (info != 0 || found != n) throw NumericalFailure("dstevr failed with info " + std::to_string(info));
  for (std::size_t j = 0; j < out.n; ++j) fix_sign(out.vectors.data() + j * out.n, out.n);
  return out;
}

}  // namespace polyspec
