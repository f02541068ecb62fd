#include "polyspec/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "polyspec/errors.hpp"
#include "polyspec/rng.hpp"

namespace polyspec {

PolymerSpec::PolymerSpec(std::vector<double> potentials, std::vector<double> hoppings)
    : potentials_(std::move(potentials)), hoppings_(std::move(hoppings)) {
  if (potentials_.empty()) throw std::invalid_argument("polymer length must be positive");
  if (potentials_.size() != hoppings_.size())
    throw std::invalid_argument("polymer potentials and hoppings differ in length");
  for (double t : hoppings_)
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("polymer hoppings must be positive");
  for (double v : potentials_)
    if (!std::isfinite(v)) throw std::invalid_argument("polymer potentials must be finite");
}

PolymerModel::PolymerModel(PolymerSpec plus, PolymerSpec minus, double p_plus)
    : plus_(std::move(plus)), minus_(std::move(minus)), p_plus_(p_plus) {
  if (!(p_plus > 0.0 && p_plus < 1.0)) throw std::invalid_argument("p_plus must lie in (0, 1)");
}

double PolymerModel::mean_length() const {
  return average(static_cast<double>(plus_.length()), static_cast<double>(minus_.length()));
}

namespace {

void fill_nodes(const PolymerModel& model, Configuration& c) {
  c.nodes.assign(1, 0);
  c.nodes.reserve(c.signs.size() + 1);
  for (Sign s : c.signs) c.nodes.push_back(c.nodes.back() + model.polymer(s).length());
}

}  // namespace

Configuration sample_configuration(const PolymerModel& model, BlockCount blocks, std::uint64_t seed,
                                   std::uint64_t realization_index) {
  if (blocks.value == 0) throw std::invalid_argument("num_blocks must be at least 1");
  Configuration c;
  c.seed = seed;
  c.realization_index = realization_index;
  Substream rng(seed, realization_index);
  c.signs.reserve(blocks.value);
  for (std::size_t l = 0; l < blocks.value; ++l)
    c.signs.push_back(rng.bernoulli(model.p_plus()) ? Sign::plus : Sign::minus);
  fill_nodes(model, c);
  return c;
}

Configuration sample_configuration(const PolymerModel& model, SiteCount sites, std::uint64_t seed,
                                   std::uint64_t realization_index) {
  if (sites.value == 0) throw std::invalid_argument("num_sites must be at least 1");
  Configuration c;
  c.seed = seed;
  c.realization_index = realization_index;
  Substream rng(seed, realization_index);
  c.nodes.assign(1, 0);
  while (c.nodes.back() < sites.value) {
    Sign s = rng.bernoulli(model.p_plus()) ? Sign::plus : Sign::minus;
    c.signs.push_back(s);
    c.nodes.push_back(c.nodes.back() + model.polymer(s).length());
  }
  return c;
}

Configuration configuration_from_signs(const PolymerModel& model, std::vector<Sign> signs) {
  if (signs.empty()) throw std::invalid_argument("num_blocks must be at least 1");
  Configuration c;
  c.signs = std::move(signs);
  fill_nodes(model, c);
  return c;
}

LatticeSequences build_sequences(const PolymerModel& model, const Configuration& config) {
  if (config.nodes.size() != config.signs.size() + 1 || config.nodes.front() != 0)
    throw std::invalid_argument("configuration nodes inconsistent with signs");
  LatticeSequences seq;
  seq.potentials.reserve(config.num_sites());
  seq.hoppings.reserve(config.num_sites());
  for (std::size_t l = 0; l < config.signs.size(); ++l) {
    const PolymerSpec& p = model.polymer(config.signs[l]);
    if (config.nodes[l + 1] - config.nodes[l] != p.length())
      throw std::invalid_argument("configuration block " + std::to_string(l) +
                                  " does not match the model's polymer length");
    seq.potentials.insert(seq.potentials.end(), p.potentials().begin(), p.potentials().end());
    seq.hoppings.insert(seq.hoppings.end(), p.hoppings().begin(), p.hoppings().end());
  }
  return seq;
}

LatticeSequences build_sequences(const PolymerModel& model, const Configuration& config, SiteCount sites) {
  if (config.num_sites() < sites.value)
    throw std::invalid_argument("configuration covers fewer sites than requested");
  LatticeSequences seq = build_sequences(model, config);
  seq.potentials.resize(sites.value);
  seq.hoppings.resize(sites.value);
  return seq;
}

LatticeSequences sample_box(const PolymerModel& model, SiteCount sites, std::uint64_t seed,
                            std::uint64_t realization_index) {
  return build_sequences(model, sample_configuration(model, sites, seed, realization_index), sites);
}

LatticeSequences sample_box(const PolymerModel& model, BlockCount blocks, std::uint64_t seed,
                            std::uint64_t realization_index) {
  return build_sequences(model, sample_configuration(model, blocks, seed, realization_index));
}

PolymerModel dimer_preset(double V, double p) {
  if (!(V > 0.0 && V <= 1.0)) throw std::invalid_argument("dimer V must lie in (0, 1]");
  return PolymerModel(PolymerSpec({V, V}, {1.0, 1.0}), PolymerSpec({-V, -V}, {1.0, 1.0}), p);
}

PolymerModel anderson_preset(double V, double p) {
  if (!std::isfinite(V)) throw std::invalid_argument("anderson V must be finite");
  return PolymerModel(PolymerSpec({V}, {1.0}), PolymerSpec({-V}, {1.0}), p);
}

namespace {

double require_number(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "/" + key, "missing required number");
  if (!j.at(key).is_number()) throw ConfigError(path + "/" + key, "must be a number");
  return j.at(key).get<double>();
}

PolymerSpec polymer_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "polymer must be an object");
  if (!j.contains("potentials") || !j.at("potentials").is_array())
    throw ConfigError(path + "/potentials", "must be an array of numbers");
  std::vector<double> v;
  for (const auto& x : j.at("potentials")) {
    if (!x.is_number()) throw ConfigError(path + "/potentials", "must be an array of numbers");
    v.push_back(x.get<double>());
  }
  std::vector<double> t(v.size(), 1.0);
  if (j.contains("hoppings")) {
    if (!j.at("hoppings").is_array()) throw ConfigError(path + "/hoppings", "must be an array of numbers");
    t.clear();
    for (const auto& x : j.at("hoppings")) {
      if (!x.is_number()) throw ConfigError(path + "/hoppings", "must be an array of numbers");
      t.push_back(x.get<double>());
    }
  }
  if (j.contains("length")) {
    if (!j.at("length").is_number_unsigned() || j.at("length").get<std::size_t>() != v.size())
      throw ConfigError(path + "/length", "must equal the number of potentials");
  }
  try {
    return PolymerSpec(std::move(v), std::move(t));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

PolymerModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("/model", "must be an object");
  try {
    if (j.contains("preset")) {
      if (!j.at("preset").is_string()) throw ConfigError("/model/preset", "must be a string");
      const auto name = j.at("preset").get<std::string>();
      const double p = j.contains("p") ? require_number(j, "p", "/model") : 0.5;
      if (!(p > 0.0 && p < 1.0)) throw ConfigError("/model/p", "probability must lie in (0, 1)");
      const double V = require_number(j, "V", "/model");
      if (name == "dimer") {
        if (!(V > 0.0 && V <= 1.0)) throw ConfigError("/model/V", "dimer V must lie in (0, 1]");
        return dimer_preset(V, p);
      }
      if (name == "anderson") return anderson_preset(V, p);
      throw ConfigError("/model/preset", "unknown preset '" + name + "' (available: dimer, anderson)");
    }
    if (!j.contains("plus") || !j.contains("minus"))
      throw ConfigError("/model", "needs either 'preset' or both 'plus' and 'minus'");
    auto plus = polymer_from_json(j.at("plus"), "/model/plus");
    auto minus = polymer_from_json(j.at("minus"), "/model/minus");
    const double p = require_number(j, "p_plus", "/model");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("/model/p_plus", "probability must lie in (0, 1)");
    return PolymerModel(std::move(plus), std::move(minus), p);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("/model", e.what());
  }
}

nlohmann::json to_json(const PolymerModel& model) {
  auto poly = [](const PolymerSpec& s) {
    return nlohmann::json{{"length", s.length()}, {"potentials", s.potentials()}, {"hoppings", s.hoppings()}};
  };
  return {{"plus", poly(model.plus())}, {"minus", poly(model.minus())}, {"p_plus", model.p_plus()}};
}

}  // namespace polyspec
