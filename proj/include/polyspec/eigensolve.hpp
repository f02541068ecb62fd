#pragma once

// Spectra of finite Dirichlet Hamiltonians
//   (H u)(n) = -t(n+1) u(n+1) - t(n) u(n-1) + v(n) u(n),  n = 0 .. L-1,
// by Sturm-sequence bisection, plus dense eigendecompositions.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "polyspec/interval.hpp"
#include "polyspec/model.hpp"

namespace polyspec {

class TridiagonalOperator {
 public:
  // offdiagonal[n-1] = t(n) couples sites n-1 and n; the matrix entry is -t(n).
  TridiagonalOperator(std::vector<double> diagonal, std::vector<double> offdiagonal);

  std::size_t num_sites() const { return diagonal_.size(); }
  const std::vector<double>& diagonal() const { return diagonal_; }
  const std::vector<double>& offdiagonal() const { return offdiagonal_; }

  // [min(v) - 2 max(t), max(v) + 2 max(t)]
  Interval gershgorin() const;
  // Upper bound on the operator norm (infinity norm).
  double norm_bound() const;

  double entry(std::size_t i, std::size_t j) const;

 private:
  std::vector<double> diagonal_;
  std::vector<double> offdiagonal_;
  std::vector<double> offdiagonal_sq_;
  double pivmin_ = 0.0;

  friend std::size_t sturm_count(const TridiagonalOperator&, double);
  friend std::vector<std::size_t> sturm_counts(const TridiagonalOperator&, std::span<const double>);
};

struct Spectrum {
  std::vector<double> eigenvalues;  // increasing
  std::optional<Interval> window;
};

// Dirichlet truncation: t(0) (coupling to site -1) is dropped.
TridiagonalOperator build_hamiltonian(const LatticeSequences& seq);

// Number of eigenvalues strictly below E (zero pivots count as negative).
std::size_t sturm_count(const TridiagonalOperator& H, double E);
// Same count for several energies in one sweep over the chain.
std::vector<std::size_t> sturm_counts(const TridiagonalOperator& H, std::span<const double> energies);

// Eigenvalues in [window.lo, window.hi), each bracketed to width <= tol.
Spectrum eigenvalues_in_window(const TridiagonalOperator& H, Interval window, double tol);
Spectrum full_spectrum(const TridiagonalOperator& H, double tol);

// Inverse iteration at an approximate eigenvalue E. Unit norm, largest-|.|
// entry positive. Throws NumericalFailure when the residual does not reach
// 1e-8 * ||H||.
std::vector<double> eigenvector(const TridiagonalOperator& H, double E);

// Column-major eigenvector matrix; column j belongs to eigenvalues[j].
struct Eigensystem {
  Spectrum spectrum;
  std::vector<double> vectors;
  std::size_t n = 0;

  double operator()(std::size_t row, std::size_t col) const { return vectors[col * n + row]; }
  const double* column(std::size_t col) const { return vectors.data() + col * n; }
};

inline constexpr std::size_t kDenseOracleCap = 2000;

// Implicit QL with eigenvector accumulation. Test oracle; O(L^3).
Eigensystem dense_oracle(const TridiagonalOperator& H, std::size_t cap = kDenseOracleCap);
// Implicit QL, eigenvalues only; O(L^2) and uncapped.
std::vector<double> ql_eigenvalues(const TridiagonalOperator& H);
// LAPACK MRRR (dstevr); used for boxes too large for the dense oracle.
Eigensystem mrrr_eigensystem(const TridiagonalOperator& H);

}  // namespace polyspec
