#pragma once
// Closed-form empirical interatomic potentials (EIPs) and the synthetic
// high-fidelity oracle that plays the role of DFT.
//
// Units: eV, Angstrom, eV/Angstrom.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "wsnip/atoms.hpp"

namespace wsnip {

enum class EipKind { lennard_jones, morse, stillinger_weber };

std::string to_string(EipKind kind);
EipKind parse_eip_kind(const std::string& s);

struct EipModel {
  std::string name;
  EipKind kind = EipKind::lennard_jones;
  std::map<std::string, double> params;
  double cutoff = 0.0;
  // Pair kinds multiply by 1/2 (cos(pi r / rc) + 1). Without it pairs are hard-truncated.
  bool taper = true;

  void validate() const;
  // Stillinger-Weber ignores `cutoff` beyond a * sigma.
  double effective_cutoff() const;
  double param(const std::string& key) const;
};

struct EnergyForces {
  double energy = 0.0;
  std::vector<Vec3> forces;
};

// The cosine taper and its derivative.
double cosine_taper(double r, double cutoff);
double cosine_taper_derivative(double r, double cutoff);

double eip_energy(const EipModel& model, const Configuration& config);
std::vector<Vec3> eip_forces(const EipModel& model, const Configuration& config);
EnergyForces eip_energy_forces(const EipModel& model, const Configuration& config);

// Stillinger-Weber with published parameters plus a weak, weighted Morse tail.
struct Oracle {
  EipModel base;
  EipModel tail;
  double tail_weight = 0.15;
  int version = 1;
};

double oracle_energy(const Oracle& oracle, const Configuration& config);
EnergyForces oracle_energy_forces(const Oracle& oracle, const Configuration& config);

struct EipSet {
  std::vector<EipModel> models;  // canonical class order
  Oracle oracle;

  std::size_t size() const noexcept { return models.size(); }
  std::vector<std::string> names() const;
  // Throws ArgumentError for an unknown name.
  std::size_t index_of(const std::string& name) const;
  void validate() const;
  // Subset in the given order; the oracle is kept.
  EipSet subset(const std::vector<std::string>& names) const;
};

// Published Si Stillinger-Weber constants.
EipModel stillinger_weber_si(const std::string& name = "sw");

EipSet default_eip_set();
Oracle default_oracle();

// JSON list of {name, kind, params, cutoff[, taper]}; the oracle uses the
// reserved name "__oracle__" with an extra "tail" object and "weight".
EipSet parse_eip_set(const std::string& json_text);
std::string eip_set_to_json(const EipSet& set);
EipSet load_eip_set(const std::string& path);
void save_eip_set(const std::string& path, const EipSet& set);

// n x |P| energies in canonical EIP order.
struct EnergyTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;

  std::size_t size() const noexcept { return rows.size(); }
  double at(std::size_t config, std::size_t eip) const { return rows.at(config).at(eip); }
};

EnergyTable label_with_eips(const EipSet& eips, std::span<const Configuration> configs);

}  // namespace wsnip
