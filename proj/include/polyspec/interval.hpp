#pragma once

namespace polyspec {

// Closed-open real interval [lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return x >= lo && x < hi; }
  bool empty() const { return !(hi > lo); }
};

}  // namespace polyspec
