#include "polyspec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "polyspec/errors.hpp"
#include "polyspec/model.hpp"
#include "polyspec/parallel.hpp"
#include "polyspec/prufer.hpp"
#include "polyspec/rng.hpp"
#include "polyspec/statistics.hpp"
#include "polyspec/transfer.hpp"
#include "polyspec/transport.hpp"

namespace polyspec {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Csv {
 public:
  Csv(const std::string& hash, std::initializer_list<const char*> header) {
    out_ << "# config_hash: " << hash << '\n';
    bool first = true;
    for (const char* h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }

  template <class... T>
  void row(const T&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string cell(double x) { return fmt(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I i) { return std::to_string(i); }

  std::ostringstream out_;
};

// ---------------------------------------------------------------- defaults

const json kDimer06 = {{"preset", "dimer"}, {"V", 0.6}, {"p", 0.5}};
const json kDimer05 = {{"preset", "dimer"}, {"V", 0.5}, {"p", 0.5}};

json geometric_grid(double lo, double hi, int n) {
  json g = json::array();
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return g;
}

// Parameters of the IDS ensemble used to unfold a non-critical control.
json with_control_ids(json p) {
  p["ids_L"] = 1000;
  p["ids_realizations"] = 100000;
  p["ids_half_width"] = 0.006;
  return p;
}

const std::vector<std::pair<std::string, std::pair<json, json>>>& table() {
  static const std::vector<std::pair<std::string, std::pair<json, json>>> t = {
      {"critical", {kDimer05, {{"grid", kCriticalGrid}, {"tol", kCommutatorTol}, {"k_max", 100},
                               {"residual_max", 1e-8}, {"expected", nullptr}, {"match_tol", 1e-8}}}},
      {"lyapunov", {kDimer05, {{"energies", {0.5, 0.8}}, {"steps", 1000000}, {"realizations", 32}, {"burn_in", 0},
                               {"critical_sigma", 3.0}, {"noncritical_sigma", 5.0}}}},
      {"ids",
       {{{"preset", "dimer"}, {"V", std::numbers::sqrt2 / 2}, {"p", 0.5}},
        {{"L_ids", 1000}, {"realizations", 1000}, {"tolerance", 0.01}, {"check_symmetry", true},
         {"symmetry_energies", {0.1, 0.3, 0.5, 0.7071067811865476, 0.9, 1.2, 1.6, 2.0}}, {"grid_points", 401}}}},
      {"les-poisson",
       {kDimer06, with_control_ids({{"E0", 1.2}, {"L", 20000}, {"realizations", 4000}, {"window_atoms", 10.0},
                                    {"intervals", {{0.0, 1.0}, {1.0, 2.0}}}, {"ks_max", 0.05}, {"chi2_p_min", 0.01},
                                    {"cov_max", 0.05}, {"min_gaps", 5000}, {"intensity_lengths", {0.5, 1.0, 2.0}}})}},
      {"les-clock",
       {kDimer06, with_control_ids({{"critical_energy", nullptr}, {"control_E0", 1.2}, {"L", 20000},
                                    {"realizations", 200}, {"window_atoms", 10.0}, {"delta", 0.1}, {"factor", 3.0}})}},
      {"clock-spacing", {kDimer06, {{"critical_energy", nullptr}, {"L_values", {5000, 10000, 20000}},
                                    {"realizations", 200}, {"j_max", 10}, {"mean_window", {0.95, 1.05}}}}},
      {"uniformity",
       {kDimer06, {{"critical_energy", nullptr}, {"L", 10000}, {"realizations", 2000}, {"ks_max", 0.05}}}},
      {"psi-convergence", {kDimer06, {{"critical_energy", nullptr}, {"L_values", {1000, 10000, 100000}},
                                      {"realizations", 20}, {"x_min", -5.0}, {"x_max", 5.0}, {"points", 51}}}},
      {"sharpness",
       {kDimer06, with_control_ids({{"critical_energy", nullptr}, {"delta", 0.6}, {"C", 1.0}, {"L", 20000},
                                    {"realizations", 200}, {"window_atoms", 10.0}, {"gap_window", {0.9, 1.1}},
                                    {"control_E0", 1.2}, {"ks_max", 0.05}})}},
      {"minami-probe", {kDimer06, {{"E0", 1.2}, {"L", 10000}, {"beta", 0.5}, {"gammas", {0.25, 0.5, 0.75}},
                                   {"c2", 1.0}, {"realizations", 4000}}}},
      {"holder-probe", {kDimer06, {{"E0", 1.2}, {"L_ids", 1000}, {"realizations", 200},
                                   {"scales", geometric_grid(0.125, 0.125 / 64, 7)}}}},
      {"transport",
       {kDimer05, {{"box_radius", 2000}, {"q", 2.0}, {"T_grid", geometric_grid(50, 400, 8)},
                   {"quadrature_points", kDefaultQuadrature}, {"realizations", 1},
                   {"delocalized_window", {-0.6, 0.6}}, {"localized_window", {1.0, 1.6}}, {"min_delocalized_slope", 1.0},
                   {"max_localized_slope", 0.2}, {"free_control", true}, {"free_slope_window", {1.9, 2.1}}}}},
  };
  return t;
}

const std::pair<json, json>& entry(const std::string& kind) {
  for (const auto& [k, v] : table())
    if (k == kind) return v;
  std::string names;
  for (const auto& [k, v] : table()) names += (names.empty() ? "" : ", ") + k;
  throw ConfigError("/kind", "unknown experiment kind '" + kind + "' (available: " + names + ")");
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = [] {
    std::vector<std::string> k;
    for (const auto& [name, v] : table()) k.push_back(name);
    return k;
  }();
  return kinds;
}

json default_model(const std::string& kind) { return entry(kind).first; }
json default_parameters(const std::string& kind) { return entry(kind).second; }

ExperimentConfig make_config(const std::string& kind, const json& file) {
  ExperimentConfig c;
  c.kind = kind;
  c.model = default_model(kind);
  c.params = default_parameters(kind);
  if (file.is_null()) return c;
  if (!file.is_object()) throw ConfigError("/", "config must be a JSON object");
  for (const auto& [key, value] : file.items())
    if (key != "model" && key != "params" && key != "seed" && key != "kind")
      throw ConfigError("/" + key, "unknown top-level key (expected model, params, seed)");
  if (file.contains("kind") && file.at("kind") != kind)
    throw ConfigError("/kind", "config is for kind '" + file.at("kind").dump() + "', not '" + kind + "'");
  if (file.contains("model")) c.model = file.at("model");
  if (file.contains("seed")) {
    if (!file.at("seed").is_number_unsigned()) throw ConfigError("/seed", "must be a non-negative integer");
    c.seed = file.at("seed").get<std::uint64_t>();
  }
  if (file.contains("params")) {
    if (!file.at("params").is_object()) throw ConfigError("/params", "must be an object");
    for (const auto& [key, value] : file.at("params").items()) c.params[key] = value;
  }
  return c;
}

namespace {

// ------------------------------------------------------------- validation

struct Diagnostics {
  std::vector<std::string> list;
  const json& p;

  void add(const std::string& field, const std::string& msg) { list.push_back("/params/" + field + ": " + msg); }

  bool number(const char* key) {
    if (!p.contains(key) || !p.at(key).is_number()) {
      add(key, "must be a number");
      return false;
    }
    return true;
  }
  void positive(const char* key) {
    if (number(key) && !(p.at(key).get<double>() > 0.0)) add(key, "must be positive");
  }
  void count(const char* key, long long min = 1) {
    if (!p.contains(key) || !p.at(key).is_number_integer() || p.at(key).get<long long>() < min)
      add(key, "must be an integer >= " + std::to_string(min));
  }
  void numbers(const char* key, std::size_t min_len) {
    if (!p.contains(key) || !p.at(key).is_array() || p.at(key).size() < min_len) {
      add(key, "must be an array of at least " + std::to_string(min_len) + " numbers");
      return;
    }
    for (const auto& x : p.at(key))
      if (!x.is_number()) return add(key, "must contain only numbers");
  }
  void interval(const char* key) {
    numbers(key, 2);
    if (p.contains(key) && p.at(key).is_array() && p.at(key).size() == 2 && p.at(key)[0].is_number() &&
        p.at(key)[1].is_number() && !(p.at(key)[1].get<double>() > p.at(key)[0].get<double>()))
      add(key, "must be [lo, hi] with lo < hi");
    if (p.contains(key) && p.at(key).is_array() && p.at(key).size() != 2) add(key, "must have exactly two entries");
  }
  void optional_number(const char* key) {
    if (p.contains(key) && !p.at(key).is_null() && !p.at(key).is_number()) add(key, "must be a number or null");
  }
  void boolean(const char* key) {
    if (!p.contains(key) || !p.at(key).is_boolean()) add(key, "must be true or false");
  }
};

void validate_control_ids(Diagnostics& d) {
  d.count("ids_L");
  d.count("ids_realizations");
  d.positive("ids_half_width");
}

}  // namespace

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> out;
  json defaults;
  try {
    defaults = default_parameters(c.kind);
  } catch (const ConfigError& e) {
    return {e.what()};
  }
  try {
    (void)model_from_json(c.model);
  } catch (const ConfigError& e) {
    out.push_back(e.what());
  }
  if (c.workers < 1) out.push_back("/workers: must be at least 1");
  if (!c.params.is_object()) {
    out.push_back("/params: must be an object");
    return out;
  }
  for (const auto& [key, value] : c.params.items())
    if (!defaults.contains(key)) out.push_back("/params/" + key + ": unknown parameter for kind " + c.kind);

  Diagnostics d{{}, c.params};
  const std::string& k = c.kind;
  if (k == "critical") {
    d.count("grid", 2);
    d.positive("tol");
    d.count("k_max");
    d.positive("residual_max");
    d.positive("match_tol");
    if (!c.params.at("expected").is_null()) d.numbers("expected", 0);
  } else if (k == "lyapunov") {
    d.numbers("energies", 1);
    d.count("steps");
    d.count("realizations", 2);
    d.count("burn_in", 0);
    d.positive("critical_sigma");
    d.positive("noncritical_sigma");
  } else if (k == "ids") {
    d.count("L_ids");
    d.count("realizations");
    d.positive("tolerance");
    d.boolean("check_symmetry");
    d.numbers("symmetry_energies", 0);
    d.count("grid_points", 2);
  } else if (k == "les-poisson") {
    d.number("E0");
    d.count("L");
    d.count("realizations");
    d.positive("window_atoms");
    d.positive("ks_max");
    d.positive("chi2_p_min");
    d.positive("cov_max");
    d.count("min_gaps");
    d.numbers("intensity_lengths", 0);
    validate_control_ids(d);
    if (!c.params.at("intervals").is_array() || c.params.at("intervals").empty()) {
      d.add("intervals", "must be a non-empty array of [lo, hi] pairs");
    } else {
      for (const auto& I : c.params.at("intervals"))
        if (!I.is_array() || I.size() != 2 || !I[0].is_number() || !I[1].is_number() ||
            !(I[1].get<double>() > I[0].get<double>()))
          d.add("intervals", "every interval must be [lo, hi] with lo < hi");
    }
  } else if (k == "les-clock") {
    d.optional_number("critical_energy");
    d.number("control_E0");
    d.count("L");
    d.count("realizations");
    d.positive("window_atoms");
    d.positive("delta");
    d.positive("factor");
    validate_control_ids(d);
  } else if (k == "clock-spacing") {
    d.optional_number("critical_energy");
    d.numbers("L_values", 1);
    d.count("realizations");
    d.count("j_max");
    d.interval("mean_window");
  } else if (k == "uniformity") {
    d.optional_number("critical_energy");
    d.count("L");
    d.count("realizations");
    d.positive("ks_max");
  } else if (k == "psi-convergence") {
    d.optional_number("critical_energy");
    d.numbers("L_values", 2);
    d.count("realizations");
    d.number("x_min");
    d.number("x_max");
    d.count("points", 2);
  } else if (k == "sharpness") {
    d.optional_number("critical_energy");
    if (d.number("delta") && !(c.params.at("delta").get<double>() > 0.5))
      d.add("delta", "\xCE\xB4 must exceed 1/2");
    d.positive("C");
    d.count("L");
    d.count("realizations");
    d.positive("window_atoms");
    d.interval("gap_window");
    d.number("control_E0");
    d.positive("ks_max");
    validate_control_ids(d);
  } else if (k == "minami-probe") {
    d.number("E0");
    d.count("L", 2);
    if (d.number("beta") && !(c.params.at("beta").get<double>() > 0 && c.params.at("beta").get<double>() < 1))
      d.add("beta", "must lie in (0, 1)");
    d.numbers("gammas", 1);
    if (c.params.at("gammas").is_array())
      for (const auto& g : c.params.at("gammas"))
        if (g.is_number() && !(g.get<double>() > 0 && g.get<double>() <= 1)) d.add("gammas", "each must lie in (0, 1]");
    d.positive("c2");
    d.count("realizations");
  } else if (k == "holder-probe") {
    d.number("E0");
    d.count("L_ids");
    d.count("realizations");
    d.numbers("scales", 2);
  } else if (k == "transport") {
    d.count("box_radius");
    d.positive("q");
    d.numbers("T_grid", 2);
    d.count("quadrature_points", 2);
    d.count("realizations");
    d.interval("delocalized_window");
    d.interval("localized_window");
    d.number("min_delocalized_slope");
    d.number("max_localized_slope");
    d.boolean("free_control");
    d.interval("free_slope_window");
  }
  out.insert(out.end(), d.list.begin(), d.list.end());
  return out;
}

std::string config_hash(const ExperimentConfig& c) {
  const json canonical = {{"kind", c.kind}, {"model", c.model}, {"params", c.params}, {"seed", c.seed}};
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : canonical.dump()) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool RunReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed || !c.asserted; });
}

json RunReport::to_json() const {
  json cs = json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name}, {"value", c.value}, {"requirement", c.requirement}, {"passed", c.passed},
                  {"asserted", c.asserted}});
  return {{"kind", kind},         {"config_hash", config_hash}, {"config", config},
          {"statistics", statistics}, {"checks", cs},           {"warnings", warnings},
          {"passed", passed()},   {"files", files},             {"wall_seconds", wall_seconds}};
}

namespace {

// ------------------------------------------------------------ experiments

struct Context {
  const ExperimentConfig& config;
  const json& p;
  PolymerModel model;
  RunReport& report;
  std::string hash;
  std::string csv;

  double num(const char* key) const { return p.at(key).get<double>(); }
  std::size_t size(const char* key) const { return p.at(key).get<std::size_t>(); }
  std::vector<double> list(const char* key) const { return p.at(key).get<std::vector<double>>(); }
  Interval interval(const char* key) const { return {p.at(key)[0].get<double>(), p.at(key)[1].get<double>()}; }
  std::uint64_t seed(const char* tag) const { return derive_seed(config.seed, tag); }
  unsigned workers() const { return config.workers; }

  void check(std::string name, double value, std::string requirement, bool passed, bool asserted = true) {
    report.checks.push_back({std::move(name), value, std::move(requirement), passed, asserted});
  }
};

Interval search_interval(const PolymerModel& m) {
  double b = 0.0;
  for (const PolymerSpec* s : {&m.plus(), &m.minus()})
    for (std::size_t i = 0; i < s->length(); ++i)
      b = std::max(b, std::abs(s->potentials()[i]) + 2.0 * s->hoppings()[i]);
  return {-b - 0.1, b + 0.1};
}

std::vector<CriticalEnergyReport> criticals(const PolymerModel& m, std::size_t grid = kCriticalGrid,
                                            double tol = kCommutatorTol) {
  return find_critical_energies(m, search_interval(m), grid, tol);
}

json irrationality_json(const CriticalEnergyReport& r) {
  json v = json::array();
  for (const auto& x : r.irrationality_violations) v.push_back({{"k", x.k}, {"modulus", x.modulus}});
  return v;
}

struct Critical {
  CriticalEnergyReport report;
  ExpansionCoeffs coeffs;
  double n = 0.0;
};

// The critical energy nearest to params.critical_energy (default: the largest).
Critical pick_critical(Context& ctx) {
  const auto all = criticals(ctx.model);
  if (all.empty()) throw NumericalFailure("model has no critical energy");
  const CriticalEnergyReport* best = &all.back();
  if (ctx.p.contains("critical_energy") && !ctx.p.at("critical_energy").is_null()) {
    const double target = ctx.num("critical_energy");
    for (const auto& r : all)
      if (std::abs(r.energy - target) < std::abs(best->energy - target)) best = &r;
  }
  Critical c{*best, expansion_coeffs(ctx.model, *best), 0.0};
  c.n = dos_at_critical(c.coeffs, ctx.model);
  if (!c.report.irrationality_violations.empty())
    ctx.report.warnings.push_back("critical energy " + fmt(c.report.energy) +
                                  " violates the irrationality condition at k = " +
                                  std::to_string(c.report.irrationality_violations.front().k));
  ctx.report.statistics["critical"] = {{"energy", c.report.energy},
                                       {"eta_plus", c.report.eta_plus},
                                       {"eta_minus", c.report.eta_minus},
                                       {"d_plus", c.coeffs.d_plus},
                                       {"d_minus", c.coeffs.d_minus},
                                       {"dos", c.n},
                                       {"ids", ids_at_critical(c.report, ctx.model)},
                                       {"irrationality_violations", irrationality_json(c.report)}};
  return c;
}

json gap_json(const GapStatistics& g) {
  return {{"count", g.gaps.size()},
          {"mean", g.mean},
          {"variance", g.variance},
          {"median", [&] {
             auto v = g.gaps;
             std::sort(v.begin(), v.end());
             const std::size_t n = v.size();
             return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
           }()},
          {"ks_vs_exp1", g.ks_vs_exp1},
          {"ks_vs_degenerate1", g.ks_vs_degenerate1},
          {"fraction_near_one", g.fraction_near_one},
          {"delta", g.delta}};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) throw InsufficientData("median of nothing");
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Unfolded samples at a non-critical E0, with an IDS ensemble independent of the boxes.
std::vector<PointProcessSample> unfolded_samples(Context& ctx, double E0, std::size_t L, std::size_t R, double W,
                                                 std::uint64_t seed) {
  const double hw = ctx.num("ids_half_width");
  const EmpiricalIDS ids = empirical_ids(ctx.model, ctx.size("ids_L"), ctx.size("ids_realizations"),
                                         {E0 - hw, E0 + hw}, ctx.seed("control-ids"), ctx.workers());
  ctx.report.statistics["control_ids"] = {{"E0", E0},
                                          {"N_E0", ids.evaluate(E0)},
                                          {"pooled_in_window", ids.pooled().size()},
                                          {"window", {E0 - hw, E0 + hw}}};
  return parallel_map(R, ctx.workers(), [&](std::size_t r) { return les_sample(ctx.model, ids, E0, L, W, seed, r); });
}

std::vector<PointProcessSample> rescaled_samples(Context& ctx, double E0, double n, std::size_t L, std::size_t R,
                                                 double W, std::uint64_t seed) {
  return parallel_map(R, ctx.workers(),
                      [&](std::size_t r) { return les_sample_rescaled(ctx.model, E0, n, L, W, seed, r); });
}

void write_gaps(Csv& csv, const char* series, const std::vector<PointProcessSample>& samples) {
  for (const auto& s : samples)
    for (std::size_t j = 0; j + 1 < s.atoms.size(); ++j)
      if (s.core.contains(s.atoms[j])) csv.row(std::string(series), s.realization_index, s.atoms[j + 1] - s.atoms[j]);
}

void run_critical(Context& ctx) {
  const auto all = criticals(ctx.model, ctx.size("grid"), ctx.num("tol"));
  Csv csv(ctx.hash, {"energy", "kind_plus", "kind_minus", "eta_plus", "eta_minus", "commutator_norm", "residual",
                     "ids", "dos", "irrationality_violations"});
  json list = json::array();
  const double residual_max = ctx.num("residual_max");
  for (const auto& r : all) {
    const auto coeffs = expansion_coeffs(ctx.model, r);
    const double n = dos_at_critical(coeffs, ctx.model);
    const double N = ids_at_critical(r, ctx.model);
    csv.row(r.energy, std::string(to_string(r.kind_plus)), std::string(to_string(r.kind_minus)), r.eta_plus,
            r.eta_minus, r.commutator_norm, r.residual, N, n, r.irrationality_violations.size());
    list.push_back({{"energy", r.energy},
                    {"kind_plus", to_string(r.kind_plus)},
                    {"kind_minus", to_string(r.kind_minus)},
                    {"eta_plus", r.eta_plus},
                    {"eta_minus", r.eta_minus},
                    {"commutator_norm", r.commutator_norm},
                    {"residual", r.residual},
                    {"diagonalizer", {r.diagonalizer.a11, r.diagonalizer.a12, r.diagonalizer.a21, r.diagonalizer.a22}},
                    {"d_plus", coeffs.d_plus},
                    {"d_minus", coeffs.d_minus},
                    {"c_plus", {coeffs.c_plus.real(), coeffs.c_plus.imag()}},
                    {"c_minus", {coeffs.c_minus.real(), coeffs.c_minus.imag()}},
                    {"ids", N},
                    {"dos", n},
                    {"irrationality_violations", irrationality_json(r)}});
    ctx.check("residual at E=" + fmt(r.energy), r.residual, "<= " + fmt(residual_max), r.residual <= residual_max);
    if (!r.irrationality_violations.empty())
      ctx.report.warnings.push_back("E_c = " + fmt(r.energy) + " violates the irrationality condition at k = " +
                                    std::to_string(r.irrationality_violations.front().k));
  }
  ctx.report.statistics["critical_energies"] = list;
  ctx.report.statistics["search_interval"] = {search_interval(ctx.model).lo, search_interval(ctx.model).hi};
  if (!ctx.p.at("expected").is_null()) {
    auto expected = ctx.list("expected");
    std::sort(expected.begin(), expected.end());
    const double tol = ctx.num("match_tol");
    bool ok = expected.size() == all.size();
    double worst = expected.size() == all.size() ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; ok && i < all.size(); ++i) worst = std::max(worst, std::abs(all[i].energy - expected[i]));
    ok = ok && worst <= tol;
    ctx.check("critical energies match expected set", worst, "count equal, max deviation <= " + fmt(tol), ok);
  }
  ctx.csv = csv.str();
}

void run_lyapunov(Context& ctx) {
  const auto crit = criticals(ctx.model);
  Csv csv(ctx.hash, {"energy", "realization", "gamma"});
  json rows = json::array();
  for (double E : ctx.list("energies")) {
    const auto est = lyapunov(ctx.model, E, ctx.size("steps"), ctx.size("realizations"), ctx.seed("lyapunov"),
                              ctx.workers(), ctx.size("burn_in"));
    const bool critical =
        std::any_of(crit.begin(), crit.end(), [&](const auto& r) { return std::abs(r.energy - E) < 1e-8; });
    for (std::size_t i = 0; i < est.per_realization.size(); ++i) csv.row(E, i, est.per_realization[i]);
    rows.push_back({{"energy", E}, {"gamma", est.gamma}, {"std_error", est.std_error}, {"critical", critical}});
    if (critical) {
      const double s = ctx.num("critical_sigma");
      ctx.check("|gamma(" + fmt(E) + ")| / stderr", std::abs(est.gamma) / est.std_error, "< " + fmt(s),
                std::abs(est.gamma) < s * est.std_error);
    } else {
      const double s = ctx.num("noncritical_sigma");
      ctx.check("gamma(" + fmt(E) + ") / stderr", est.gamma / est.std_error, ">= " + fmt(s),
                est.gamma >= s * est.std_error);
    }
  }
  ctx.report.statistics["estimates"] = rows;
  ctx.csv = csv.str();
}

void run_ids(Context& ctx) {
  const EmpiricalIDS ids =
      empirical_ids(ctx.model, ctx.size("L_ids"), ctx.size("realizations"), ctx.seed("ids"), ctx.workers());
  const double tol = ctx.num("tolerance");
  json crit = json::array();
  for (const auto& r : criticals(ctx.model)) {
    const double predicted = ids_at_critical(r, ctx.model);
    const double empirical = ids.evaluate(r.energy);
    crit.push_back({{"energy", r.energy}, {"predicted", predicted}, {"empirical", empirical}});
    ctx.check("|N(" + fmt(r.energy) + ") - <eta/pi>/<L>|", std::abs(empirical - predicted), "<= " + fmt(tol),
              std::abs(empirical - predicted) <= tol);
  }
  ctx.report.statistics["critical"] = crit;
  ctx.report.statistics["pooled"] = ids.total_count();
  if (ctx.p.at("check_symmetry").get<bool>()) {
    json sym = json::array();
    double worst = 0.0;
    for (double E : ctx.list("symmetry_energies")) {
      const double s = ids.evaluate(E) + ids.evaluate(-E);
      sym.push_back({{"energy", E}, {"sum", s}});
      worst = std::max(worst, std::abs(s - 1.0));
    }
    ctx.report.statistics["symmetry"] = sym;
    ctx.check("max |N(E) + N(-E) - 1|", worst, "<= " + fmt(tol), worst <= tol);
  }
  Csv csv(ctx.hash, {"energy", "N"});
  const Interval g = search_interval(ctx.model);
  const std::size_t n = ctx.size("grid_points");
  for (std::size_t i = 0; i < n; ++i) {
    const double E = g.lo + g.width() * static_cast<double>(i) / static_cast<double>(n - 1);
    csv.row(E, ids.evaluate(E));
  }
  ctx.csv = csv.str();
}

void run_les_poisson(Context& ctx) {
  const double E0 = ctx.num("E0");
  const double W = ctx.num("window_atoms");
  const auto samples = unfolded_samples(ctx, E0, ctx.size("L"), ctx.size("realizations"), W, ctx.seed("les"));
  const auto gaps = gap_statistics(samples, 0.1, ctx.size("min_gaps"));
  ctx.report.statistics["gaps"] = gap_json(gaps);
  const double ks_max = ctx.num("ks_max");
  ctx.check("KS(gaps, Exp(1))", gaps.ks_vs_exp1, "< " + fmt(ks_max), gaps.ks_vs_exp1 < ks_max);

  std::vector<Interval> intervals;
  for (const auto& I : ctx.p.at("intervals")) intervals.push_back({I[0].get<double>(), I[1].get<double>()});
  const auto counts = counting_statistics(samples, intervals);
  json per = json::array();
  const double pmin = ctx.num("chi2_p_min");
  for (const auto& ic : counts.intervals) {
    json pmf = json::array();
    for (std::size_t k = 0; k < 4; ++k)
      pmf.push_back({{"k", k},
                     {"empirical", (k < ic.histogram.size() ? static_cast<double>(ic.histogram[k]) : 0.0) /
                                       static_cast<double>(samples.size())},
                     {"poisson", poisson_pmf(k, ic.interval.width())}});
    per.push_back({{"interval", {ic.interval.lo, ic.interval.hi}},
                   {"mean", ic.mean},
                   {"variance", ic.variance},
                   {"chi_square", ic.chi_square},
                   {"dof", ic.dof},
                   {"p_value", ic.p_value},
                   {"pmf", pmf}});
    ctx.check("chi2 p-value on [" + fmt(ic.interval.lo) + "," + fmt(ic.interval.hi) + ")", ic.p_value,
              "> " + fmt(pmin), ic.p_value > pmin);
  }
  ctx.report.statistics["counting"] = per;
  ctx.report.statistics["covariance"] = counts.covariance;
  ctx.report.statistics["joint_chi_square"] = {
      {"statistic", counts.joint_chi_square}, {"dof", counts.joint_dof}, {"p_value", counts.joint_p_value}};
  if (intervals.size() >= 2) {
    const double cov = counts.covariance[0][1];
    const double cmax = ctx.num("cov_max");
    ctx.check("count covariance of the first two intervals", cov, "|.| <= " + fmt(cmax), std::abs(cov) <= cmax);
  }
  json intensity = json::array();
  for (double s : ctx.list("intensity_lengths")) {
    double c = 0.0;
    for (const auto& smp : samples)
      for (double a : smp.atoms) c += (a >= 0.0 && a < s);
    intensity.push_back({{"length", s}, {"mean_count_per_length", c / static_cast<double>(samples.size()) / s}});
  }
  ctx.report.statistics["intensity"] = intensity;

  Csv csv(ctx.hash, {"realization", "atom"});
  for (const auto& s : samples)
    for (double a : s.atoms) csv.row(s.realization_index, a);
  ctx.csv = csv.str();
}

void run_les_clock(Context& ctx) {
  const Critical c = pick_critical(ctx);
  const std::size_t L = ctx.size("L"), R = ctx.size("realizations");
  const double W = ctx.num("window_atoms"), delta = ctx.num("delta"), factor = ctx.num("factor");
  // Same boxes (seed set) at both energies.
  const std::uint64_t seed = ctx.seed("les");
  const auto at_critical = rescaled_samples(ctx, c.report.energy, c.n, L, R, W, seed);
  const auto control = unfolded_samples(ctx, ctx.num("control_E0"), L, R, W, seed);
  const auto gc = gap_statistics(at_critical, delta);
  const auto gp = gap_statistics(control, delta);
  ctx.report.statistics["critical_gaps"] = gap_json(gc);
  ctx.report.statistics["control_gaps"] = gap_json(gp);
  ctx.check("KS(E_c) / KS(control)", gc.ks_vs_exp1 / gp.ks_vs_exp1, ">= " + fmt(factor),
            gc.ks_vs_exp1 >= factor * gp.ks_vs_exp1 && gc.ks_vs_exp1 > gp.ks_vs_exp1);
  ctx.check("fraction near 1 (E_c) / (control)", gc.fraction_near_one / gp.fraction_near_one, ">= " + fmt(factor),
            gc.fraction_near_one >= factor * gp.fraction_near_one && gc.fraction_near_one > gp.fraction_near_one);
  Csv csv(ctx.hash, {"series", "realization", "gap"});
  write_gaps(csv, "critical", at_critical);
  write_gaps(csv, "control", control);
  ctx.csv = csv.str();
}

void run_clock_spacing(Context& ctx) {
  const Critical c = pick_critical(ctx);
  const auto Ls = ctx.p.at("L_values").get<std::vector<std::size_t>>();
  const int j_max = ctx.p.at("j_max").get<int>();
  Csv csv(ctx.hash, {"L", "realization", "j", "gap"});
  json rows = json::array();
  std::vector<double> variances;
  double last_mean = 0.0;
  for (std::size_t L : Ls) {
    const auto s = clock_spacing_statistic(ctx.model, c.report.energy, c.n, L, ctx.size("realizations"), j_max,
                                           ctx.seed("clock-spacing"), ctx.workers());
    for (std::size_t i = 0; i < s.rescaled_gaps.size(); ++i) csv.row(L, s.realization[i], s.j[i], s.rescaled_gaps[i]);
    std::size_t near = 0;
    for (double g : s.rescaled_gaps) near += std::abs(g - 1.0) <= 0.1;
    rows.push_back({{"L", L},
                    {"mean", s.mean},
                    {"variance", s.variance},
                    {"fraction_near_one", static_cast<double>(near) / static_cast<double>(s.rescaled_gaps.size())},
                    {"gaps", s.rescaled_gaps.size()}});
    variances.push_back(s.variance);
    last_mean = s.mean;
  }
  ctx.report.statistics["by_L"] = rows;
  const Interval w = ctx.interval("mean_window");
  ctx.check("mean rescaled gap at L=" + std::to_string(Ls.back()), last_mean,
            "in [" + fmt(w.lo) + ", " + fmt(w.hi) + "]", last_mean >= w.lo && last_mean <= w.hi);
  if (Ls.size() > 1) {
    bool decreasing = true;
    for (std::size_t i = 1; i < variances.size(); ++i) decreasing = decreasing && variances[i] < variances[i - 1];
    ctx.check("gap variance strictly decreasing in L", variances.back(), "strictly decreasing", decreasing);
  }
  ctx.csv = csv.str();
}

void run_uniformity(Context& ctx) {
  const Critical c = pick_critical(ctx);
  const auto u = uniformity_test(ctx.model, c.report, ctx.size("L"), ctx.size("realizations"),
                                 ctx.seed("uniformity"), ctx.workers());
  ctx.report.statistics["ks"] = u.ks;
  const double ks_max = ctx.num("ks_max");
  // A model violating the irrationality condition is allowed to fail.
  ctx.check("KS(phi/pi, U[0,1))", u.ks, "< " + fmt(ks_max), u.ks < ks_max,
            c.report.irrationality_violations.empty());
  Csv csv(ctx.hash, {"realization", "fraction"});
  for (std::size_t i = 0; i < u.fractions.size(); ++i) csv.row(i, u.fractions[i]);
  ctx.csv = csv.str();
}

void run_psi_convergence(Context& ctx) {
  const Critical c = pick_critical(ctx);
  const auto Ls = ctx.p.at("L_values").get<std::vector<std::size_t>>();
  const std::size_t R = ctx.size("realizations"), points = ctx.size("points");
  std::vector<double> xs(points);
  for (std::size_t i = 0; i < points; ++i)
    xs[i] = ctx.num("x_min") + (ctx.num("x_max") - ctx.num("x_min")) * static_cast<double>(i) /
                                   static_cast<double>(points - 1);
  Csv csv(ctx.hash, {"L", "realization", "x", "psi"});
  json rows = json::array();
  std::vector<double> medians;
  for (std::size_t L : Ls) {
    const auto psis = parallel_map(R, ctx.workers(), [&](std::size_t r) {
      return relative_prufer(sample_box(ctx.model, SiteCount{L}, ctx.seed("psi"), r), c.report.diagonalizer,
                             c.report.energy, c.n, xs);
    });
    std::vector<double> sups;
    for (std::size_t r = 0; r < R; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < points; ++i) {
        csv.row(L, r, xs[i], psis[r][i]);
        s = std::max(s, std::abs(psis[r][i] - xs[i]));
      }
      sups.push_back(s);
    }
    medians.push_back(median(sups));
    rows.push_back({{"L", L}, {"median_sup", medians.back()}, {"sups", sups}});
  }
  ctx.report.statistics["by_L"] = rows;
  bool decreasing = true;
  for (std::size_t i = 1; i < medians.size(); ++i) decreasing = decreasing && medians[i] < medians[i - 1];
  ctx.check("median sup|Psi_L(x) - x| strictly decreasing in L", medians.back(), "strictly decreasing", decreasing);
  ctx.csv = csv.str();
}

void run_sharpness(Context& ctx) {
  const Critical c = pick_critical(ctx);
  const std::size_t L = ctx.size("L"), R = ctx.size("realizations");
  const double W = ctx.num("window_atoms");
  const double E0 = c.report.energy + ctx.num("C") * std::pow(static_cast<double>(L), -ctx.num("delta"));
  const Interval w = ctx.interval("gap_window");
  const double delta_w = 0.5 * w.width();
  const std::uint64_t seed = ctx.seed("les");
  const auto sharp = rescaled_samples(ctx, E0, c.n, L, R, W, seed);
  const auto control = unfolded_samples(ctx, ctx.num("control_E0"), L, R, W, seed);
  const auto gs = gap_statistics(sharp, delta_w);
  const auto gc = gap_statistics(control, delta_w);
  ctx.report.statistics["E0"] = E0;
  ctx.report.statistics["sharp_gaps"] = gap_json(gs);
  ctx.report.statistics["control_gaps"] = gap_json(gc);
  const double ms = median(gs.gaps), mc = median(gc.gaps);
  auto inside = [&](double x) { return x >= w.lo && x <= w.hi; };
  const std::string win = "in [" + fmt(w.lo) + ", " + fmt(w.hi) + "]";
  // A gap law lies "within the window" when both its mean and its median do.
  ctx.check("mean rescaled gap at E0(L)", gs.mean, win, inside(gs.mean));
  ctx.check("median rescaled gap at E0(L)", ms, win, inside(ms));
  ctx.check("control gap law outside window (median)", mc, "not " + win, !(inside(gc.mean) && inside(mc)));
  const double ks_max = ctx.num("ks_max");
  ctx.check("control KS(gaps, Exp(1))", gc.ks_vs_exp1, "< " + fmt(ks_max), gc.ks_vs_exp1 < ks_max);
  Csv csv(ctx.hash, {"series", "realization", "gap"});
  write_gaps(csv, "sharp", sharp);
  write_gaps(csv, "control", control);
  ctx.csv = csv.str();
}

void run_minami(Context& ctx) {
  Csv csv(ctx.hash, {"gamma", "box_sites", "interval_lo", "interval_hi", "p_at_least_one", "p_at_least_two", "ratio"});
  json rows = json::array();
  std::vector<double> p2;
  for (double g : ctx.list("gammas")) {
    const auto m = minami_probe(ctx.model, ctx.size("L"), ctx.num("beta"), g, ctx.num("c2"), ctx.size("realizations"),
                                ctx.num("E0"), ctx.seed("minami"), ctx.workers());
    csv.row(g, m.box_sites, m.interval.lo, m.interval.hi, m.p_at_least_one, m.p_at_least_two, m.ratio);
    rows.push_back({{"gamma", g},
                    {"box_sites", m.box_sites},
                    {"p_at_least_one", m.p_at_least_one},
                    {"p_at_least_two", m.p_at_least_two},
                    {"ratio", std::isfinite(m.ratio) ? json(m.ratio) : json(nullptr)}});
    p2.push_back(m.p_at_least_two);
  }
  ctx.report.statistics["by_gamma"] = rows;
  bool monotone = true;
  const auto gammas = ctx.list("gammas");
  for (std::size_t i = 1; i < p2.size(); ++i)
    if (gammas[i] > gammas[i - 1]) monotone = monotone && (p2[i] < p2[i - 1] || (p2[i] == 0.0 && p2[i - 1] == 0.0));
  ctx.check("P(>=2) decreasing in gamma", p2.back(), "decreasing", monotone);
  ctx.csv = csv.str();
}

void run_holder(Context& ctx) {
  const EmpiricalIDS ids =
      empirical_ids(ctx.model, ctx.size("L_ids"), ctx.size("realizations"), ctx.seed("holder"), ctx.workers());
  const auto scales = ctx.list("scales");
  const double E0 = ctx.num("E0");
  const auto h = holder_probe(ids, E0, scales);
  ctx.report.statistics["rho1"] = h.rho1;
  ctx.report.statistics["rho2"] = h.rho2;
  ctx.report.statistics["product"] = h.product();
  ctx.check("rho1 * rho2 (diagnostic)", h.product(), "> 2/3", h.exceeds_two_thirds(), false);
  Csv csv(ctx.hash, {"scale", "dN_plus", "dN_minus", "dE_plus", "dE_minus"});
  const double u0 = ids.evaluate(E0);
  auto inv = [&](double u) { return ids.invert(std::clamp(u, 0.0, 1.0)); };
  for (double s : scales)
    csv.row(s, ids.evaluate(E0 + s) - u0, u0 - ids.evaluate(E0 - s), inv(u0 + s) - inv(u0), inv(u0) - inv(u0 - s));
  ctx.csv = csv.str();
}

void run_transport(Context& ctx) {
  const auto Ts = ctx.list("T_grid");
  const std::size_t radius = ctx.size("box_radius"), Q = ctx.size("quadrature_points"), R = ctx.size("realizations");
  const double q = ctx.num("q");
  Csv csv(ctx.hash, {"series", "T", "M"});
  json fits = json::object();
  auto record = [&](const char* series, const TransportFit& f) {
    for (std::size_t i = 0; i < f.times.size(); ++i) csv.row(std::string(series), f.times[i], f.mean_moments[i]);
    fits[series] = {{"slope", f.slope},
                    {"mean_slope", f.mean_slope},
                    {"ci_half_width", f.ci_half_width},
                    {"per_realization", f.per_realization},
                    {"moments", f.mean_moments}};
  };
  const auto crit = criticals(ctx.model);
  const Interval deloc = ctx.interval("delocalized_window");
  const Interval loc = ctx.interval("localized_window");
  auto contains_critical = [&](Interval I) {
    return std::any_of(crit.begin(), crit.end(), [&](const auto& r) { return I.contains(r.energy); });
  };
  if (!contains_critical(deloc)) ctx.report.warnings.push_back("delocalized window contains no critical energy");
  if (contains_critical(loc)) ctx.report.warnings.push_back("localized window contains a critical energy");

  const auto fd = transport_exponent(ctx.model, q, Ts, radius, deloc, R, ctx.seed("transport"), ctx.workers(), Q);
  record("delocalized", fd);
  const double smin = ctx.num("min_delocalized_slope");
  ctx.check("slope with window containing E_c", fd.slope, ">= " + fmt(smin), fd.slope >= smin);

  const auto fl = transport_exponent(ctx.model, q, Ts, radius, loc, R, ctx.seed("transport"), ctx.workers(), Q);
  record("localized", fl);
  const double smax = ctx.num("max_localized_slope");
  ctx.check("slope with localized window", fl.slope, "<= " + fmt(smax), fl.slope <= smax);

  if (ctx.p.at("free_control").get<bool>()) {
    LatticeSequences free_chain;
    free_chain.potentials.assign(2 * radius + 1, 0.0);
    free_chain.hoppings.assign(2 * radius + 1, 1.0);
    const auto ff = transport_exponent(free_chain, q, Ts, std::nullopt, Q);
    record("free", ff);
    const Interval w = ctx.interval("free_slope_window");
    ctx.check("free chain slope", ff.slope, "in [" + fmt(w.lo) + ", " + fmt(w.hi) + "]",
              ff.slope >= w.lo && ff.slope <= w.hi);
  }
  ctx.report.statistics["fits"] = fits;
  ctx.report.statistics["times"] = Ts;
  ctx.csv = csv.str();
}

}  // namespace

RunReport run(const ExperimentConfig& config, bool write_files) {
  const auto diagnostics = validate(config);
  if (!diagnostics.empty()) {
    const auto& first = diagnostics.front();
    const auto colon = first.find(": ");
    std::string rest;
    for (std::size_t i = 1; i < diagnostics.size(); ++i) rest += "; " + diagnostics[i];
    throw ConfigError(first.substr(0, colon), first.substr(colon + 2) + rest);
  }
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.kind = config.kind;
  report.config_hash = config_hash(config);
  report.config = {{"kind", config.kind}, {"model", config.model}, {"params", config.params},
                   {"seed", config.seed}, {"workers", config.workers}};
  Context ctx{config, config.params, model_from_json(config.model), report, report.config_hash, {}};

  static const std::vector<std::pair<std::string, void (*)(Context&)>> dispatch = {
      {"critical", run_critical},
      {"lyapunov", run_lyapunov},
      {"ids", run_ids},
      {"les-poisson", run_les_poisson},
      {"les-clock", run_les_clock},
      {"clock-spacing", run_clock_spacing},
      {"uniformity", run_uniformity},
      {"psi-convergence", run_psi_convergence},
      {"sharpness", run_sharpness},
      {"minami-probe", run_minami},
      {"holder-probe", run_holder},
      {"transport", run_transport},
  };
  const auto it = std::find_if(dispatch.begin(), dispatch.end(), [&](const auto& d) { return d.first == config.kind; });
  try {
    it->second(ctx);
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(config.kind + ": " + e.what());
  } catch (const InsufficientData& e) {
    throw InsufficientData(config.kind + ": " + e.what());
  } catch (const BoundaryContamination& e) {
    throw BoundaryContamination(config.kind + ": " + e.what());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (write_files) {
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / (config.kind + ".csv");
    const auto json_path = dir / (config.kind + ".json");
    report.files = {csv_path.string(), json_path.string()};
    std::ofstream(csv_path, std::ios::binary) << ctx.csv;
    std::ofstream(json_path, std::ios::binary) << report.to_json().dump(2) << '\n';
  }
  return report;
}

}  // namespace polyspec
