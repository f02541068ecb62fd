#pragma once

// Random polymer models: two polymer species laid head-to-tail along the
// lattice in an iid Bernoulli order.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

namespace polyspec {

enum class Sign : std::uint8_t { plus, minus };

inline constexpr Sign other(Sign s) { return s == Sign::plus ? Sign::minus : Sign::plus; }
inline constexpr const char* to_string(Sign s) { return s == Sign::plus ? "plus" : "minus"; }

// One polymer species: per-site potentials and (strictly positive) hoppings.
class PolymerSpec {
 public:
  PolymerSpec(std::vector<double> potentials, std::vector<double> hoppings);

  std::size_t length() const { return potentials_.size(); }
  const std::vector<double>& potentials() const { return potentials_; }
  const std::vector<double>& hoppings() const { return hoppings_; }

 private:
  std::vector<double> potentials_;
  std::vector<double> hoppings_;
};

class PolymerModel {
 public:
  PolymerModel(PolymerSpec plus, PolymerSpec minus, double p_plus);

  const PolymerSpec& plus() const { return plus_; }
  const PolymerSpec& minus() const { return minus_; }
  const PolymerSpec& polymer(Sign s) const { return s == Sign::plus ? plus_ : minus_; }
  double p_plus() const { return p_plus_; }
  double p_minus() const { return 1.0 - p_plus_; }
  double probability(Sign s) const { return s == Sign::plus ? p_plus() : p_minus(); }

  // <c> := p_plus c_plus + p_minus c_minus
  double average(double c_plus, double c_minus) const { return p_plus_ * c_plus + p_minus() * c_minus; }
  double mean_length() const;

 private:
  PolymerSpec plus_;
  PolymerSpec minus_;
  double p_plus_;
};

struct SiteCount {
  std::size_t value;
};
struct BlockCount {
  std::size_t value;
};

struct Configuration {
  std::vector<Sign> signs;          // omega_l, l = 0 .. num_blocks-1
  std::vector<std::size_t> nodes;   // nodes[0] = 0, nodes[l+1] - nodes[l] = length of block l
  std::uint64_t seed = 0;
  std::uint64_t realization_index = 0;

  std::size_t num_blocks() const { return signs.size(); }
  std::size_t num_sites() const { return nodes.empty() ? 0 : nodes.back(); }
};

struct LatticeSequences {
  std::vector<double> potentials;  // v(0 .. |Lambda|-1)
  std::vector<double> hoppings;    // t(0 .. |Lambda|-1); t(n) couples n-1 and n
  std::size_t num_sites() const { return potentials.size(); }
};

// Signs are drawn from Substream(seed, realization_index), one uniform per block.
Configuration sample_configuration(const PolymerModel& model, BlockCount blocks, std::uint64_t seed,
                                   std::uint64_t realization_index);
// Smallest block prefix covering at least `sites` sites; the sign sequence is a
// prefix of the BlockCount stream for the same (seed, index).
Configuration sample_configuration(const PolymerModel& model, SiteCount sites, std::uint64_t seed,
                                   std::uint64_t realization_index);
Configuration configuration_from_signs(const PolymerModel& model, std::vector<Sign> signs);

LatticeSequences build_sequences(const PolymerModel& model, const Configuration& config);
// Restriction to sites {0, ..., sites-1}; the configuration must cover them.
LatticeSequences build_sequences(const PolymerModel& model, const Configuration& config, SiteCount sites);

LatticeSequences sample_box(const PolymerModel& model, SiteCount sites, std::uint64_t seed,
                            std::uint64_t realization_index);
LatticeSequences sample_box(const PolymerModel& model, BlockCount blocks, std::uint64_t seed,
                            std::uint64_t realization_index);

// Random dimer: L = 2, potentials (+-V, +-V), unit hopping; V in (0, 1].
PolymerModel dimer_preset(double V, double p);
// Anderson-Bernoulli: single-site polymers with potentials +-V.
PolymerModel anderson_preset(double V, double p);

// JSON model description, either {"preset": "dimer"|"anderson", "V": .., "p": ..}
// or {"plus": {...}, "minus": {...}, "p_plus": ..} with each polymer given as
// {"length": n (optional), "potentials": [...], "hoppings": [...] (optional, default 1)}.
PolymerModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PolymerModel& model);

}  // namespace polyspec
