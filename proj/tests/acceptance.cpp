// Acceptance criteria 1-12. Prints one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N] [--workers K]
//
// Exit status 0 when every selected criterion passes, 1 otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "polyspec/eigensolve.hpp"
#include "polyspec/experiment.hpp"
#include "polyspec/model.hpp"
#include "polyspec/prufer.hpp"
#include "polyspec/rng.hpp"
#include "polyspec/statistics.hpp"
#include "polyspec/transfer.hpp"

using namespace polyspec;
using nlohmann::json;

namespace {

unsigned g_workers = 1;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Runs one experiment kind with its defaults (plus overrides) and reports its checks.
RunReport run_kind(const std::string& kind, const json& overrides = json()) {
  ExperimentConfig c = make_config(kind, overrides);
  c.workers = g_workers;
  const RunReport r = run(c, false);
  for (const auto& w : r.warnings) std::printf("    warning: %s\n", w.c_str());
  for (const auto& ch : r.checks)
    std::printf("    %s %s = %s (%s)\n", ch.passed ? "ok  " : (ch.asserted ? "FAIL" : "note"), ch.name.c_str(),
                num(ch.value).c_str(), ch.requirement.c_str());
  return r;
}

Outcome kind_outcome(const std::string& kind, const json& overrides = json()) {
  const RunReport r = run_kind(kind, overrides);
  std::size_t failed = 0;
  for (const auto& ch : r.checks) failed += ch.asserted && !ch.passed;
  return {r.passed(), std::to_string(r.checks.size() - failed) + "/" + std::to_string(r.checks.size()) +
                          " checks passed"};
}

Outcome critical_energies() {
  bool ok = true;
  for (double V : {0.3, 0.5, 0.8}) {
    const json cfg = {{"model", {{"preset", "dimer"}, {"V", V}, {"p", 0.5}}}, {"params", {{"expected", {-V, V}}}}};
    ok = run_kind("critical", cfg).passed() && ok;
  }
  const json anderson = {{"model", {{"preset", "anderson"}, {"V", 1.0}, {"p", 0.5}}}};
  const RunReport a = run_kind("critical", anderson);
  const std::size_t found = a.statistics.at("critical_energies").size();
  std::printf("    %s anderson_preset critical energies = %zu (none)\n", found == 0 ? "ok  " : "FAIL", found);
  ok = ok && found == 0;
  return {ok, "dimer V in {0.3, 0.5, 0.8} -> {-V, +V}; anderson -> none"};
}

// Sturm bisection vs dense QL, and Pruefer winding vs oracle counts, on random instances.
Outcome oracle_equivalence() {
  const std::size_t instances = 500;
  double worst = 0.0;
  std::size_t count_mismatches = 0, counts_checked = 0, size_mismatches = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    Substream rng(20240101, i);
    const std::size_t L = 1 + static_cast<std::size_t>(rng.uniform() * 60);
    PolymerModel model = i % 3 == 0 ? anderson_preset(0.2 + 2 * rng.uniform(), 0.2 + 0.6 * rng.uniform())
                                    : dimer_preset(0.05 + 0.95 * rng.uniform(), 0.2 + 0.6 * rng.uniform());
    LatticeSequences seq = sample_box(model, SiteCount{L}, 99, i);
    if (i % 5 == 4)
      for (auto& t : seq.hoppings) t = 0.3 + 1.4 * rng.uniform();
    const TridiagonalOperator H = build_hamiltonian(seq);
    const auto bis = full_spectrum(H, 1e-12).eigenvalues;
    const auto ora = dense_oracle(H).spectrum.eigenvalues;
    if (bis.size() != ora.size()) {
      ++size_mismatches;
      continue;
    }
    for (std::size_t k = 0; k < bis.size(); ++k) worst = std::max(worst, std::abs(bis[k] - ora[k]));
    // Probe energies: midpoints between eigenvalues, outside the spectrum, and random points.
    std::vector<double> probes{ora.front() - 1.0, ora.back() + 1.0};
    for (std::size_t k = 0; k + 1 < ora.size(); ++k) probes.push_back(0.5 * (ora[k] + ora[k + 1]));
    for (int k = 0; k < 10; ++k) probes.push_back(ora.front() - 0.5 + (ora.back() - ora.front() + 1.0) * rng.uniform());
    for (double E : probes) {
      const auto expected = static_cast<std::size_t>(std::lower_bound(ora.begin(), ora.end(), E) - ora.begin());
      count_mismatches += prufer_eigenvalue_count(seq, E) != expected;
      ++counts_checked;
    }
  }
  const bool ok = worst <= 1e-9 && count_mismatches == 0 && size_mismatches == 0;
  return {ok, "max |bisection - oracle| = " + num(worst) + " (<= 1e-9); winding mismatches " +
                  std::to_string(count_mismatches) + "/" + std::to_string(counts_checked)};
}

// Residual of the first-order phase-shift expansion, max over a theta grid.
Outcome phase_shift_order() {
  const auto model = dimer_preset(0.6, 0.5);
  const auto reports = find_critical_energies(model, {-3.0, 3.0});
  bool ok = !reports.empty();
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> log_eps;
  for (double e : eps) log_eps.push_back(std::log(e));
  double lo = 1e300, hi = -1e300;
  for (const auto& r : reports) {
    const auto coeffs = expansion_coeffs(model, r);
    for (Sign s : {Sign::plus, Sign::minus}) {
      std::vector<double> log_res;
      for (double e : eps) {
        double res = 0.0;
        for (int k = 0; k < 64; ++k) {
          const double th = 2 * std::numbers::pi * k / 64.0;
          const double S = phase_shift(model, r, s, e, th).S;
          const double first = e * coeffs.d(s) - e * std::imag(coeffs.c(s) * std::polar(1.0, 2 * th));
          res = std::max(res, std::abs(S - th - r.eta(s) - first));
        }
        log_res.push_back(std::log(res));
      }
      const double slope = ls_slope(log_eps, log_res);
      std::printf("    %s E_c = %s, %s polymer: log-log slope %s\n", std::abs(slope - 2) <= 0.1 ? "ok  " : "FAIL",
                  num(r.energy).c_str(), to_string(s), num(slope).c_str());
      lo = std::min(lo, slope);
      hi = std::max(hi, slope);
      ok = ok && std::abs(slope - 2.0) <= 0.1;
    }
  }
  return {ok, "residual slopes in [" + num(lo) + ", " + num(hi) + "] (2 +- 0.1)"};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 = none stated
  std::function<Outcome()> body;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {1, "critical energies", 5.0, critical_energies},
      {2, "Lyapunov dichotomy", 30.0, [] { return kind_outcome("lyapunov"); }},
      {3, "IDS branch consistency", 0.0, [] { return kind_outcome("ids"); }},
      {4, "strong clock spacing", 300.0, [] { return kind_outcome("clock-spacing"); }},
      {5, "Poisson at non-critical energy", 0.0, [] { return kind_outcome("les-poisson"); }},
      {6, "clock/Poisson dichotomy ordering", 0.0, [] { return kind_outcome("les-clock"); }},
      {7, "Pruefer phase uniformity", 0.0, [] { return kind_outcome("uniformity"); }},
      {8, "Psi_L convergence", 0.0, [] { return kind_outcome("psi-convergence"); }},
      {9, "sharpness", 0.0, [] { return kind_outcome("sharpness"); }},
      {10, "oracle equivalence", 30.0, oracle_equivalence},
      {11, "transport dichotomy", 600.0, [] { return kind_outcome("transport"); }},
      {12, "first-order phase shift", 0.0, phase_shift_order},
  };
  return list;
}

bool run_criterion(const Criterion& c) {
  std::printf("criterion %d: %s\n", c.id, c.name);
  std::fflush(stdout);
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = c.body();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = c.time_limit <= 0.0 || secs < c.time_limit;
  std::string timing = num(secs) + " s";
  if (c.time_limit > 0.0) timing += in_time ? " < " + num(c.time_limit) + " s" : " EXCEEDS " + num(c.time_limit) + " s";
  const bool ok = o.passed && in_time;
  std::printf("%s criterion %d (%s): %s; %s\n", ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str());
  std::fflush(stdout);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  g_workers = std::max(1u, std::thread::hardware_concurrency());
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--criterion") && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (!std::strcmp(argv[i], "--workers") && i + 1 < argc) {
      g_workers = static_cast<unsigned>(std::max(1, std::atoi(argv[++i])));
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N] [--workers K]\n");
      return 1;
    }
  }
  bool all = true, any = false;
  for (const auto& c : criteria())
    if (only == 0 || c.id == only) {
      any = true;
      all = run_criterion(c) && all;
    }
  if (!any) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 1;
  }
  return all ? 0 : 1;
}
