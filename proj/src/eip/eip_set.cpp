#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wsnip/eip.hpp"
#include "wsnip/errors.hpp"
#include "wsnip/parallel.hpp"

namespace wsnip {

using nlohmann::json;

namespace {

constexpr const char* kOracleName = "__oracle__";

EipModel make_model(std::string name, EipKind kind, std::map<std::string, double> params, double cutoff,
                    bool taper = true) {
  EipModel m;
  m.name = std::move(name);
  m.kind = kind;
  m.params = std::move(params);
  m.cutoff = cutoff;
  m.taper = taper;
  return m;
}

json model_to_json(const EipModel& m) {
  json j;
  j["name"] = m.name;
  j["kind"] = to_string(m.kind);
  j["params"] = m.params;
  j["cutoff"] = m.cutoff;
  if (m.kind != EipKind::stillinger_weber) j["taper"] = m.taper;
  return j;
}

EipModel model_from_json(const json& j) {
  if (!j.is_object()) throw ParseError(0, "EIP entry must be an object");
  EipModel m;
  try {
    m.name = j.at("name").get<std::string>();
    m.kind = parse_eip_kind(j.at("kind").get<std::string>());
    m.params = j.at("params").get<std::map<std::string, double>>();
    m.cutoff = j.at("cutoff").get<double>();
    m.taper = j.value("taper", true);
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed EIP entry: ") + e.what());
  }
  return m;
}

}  // namespace

EipModel stillinger_weber_si(const std::string& name) {
  return make_model(name, EipKind::stillinger_weber,
                    {{"epsilon", 2.1683},
                     {"sigma", 2.0951},
                     {"a", 1.80},
                     {"lambda", 21.0},
                     {"gamma", 1.20},
                     {"A", 7.049556277},
                     {"B", 0.6022245584},
                     {"p", 4.0},
                     {"q", 0.0},
                     {"costheta0", -1.0 / 3.0}},
                    1.80 * 2.0951);
}

Oracle default_oracle() {
  Oracle o;
  o.base = stillinger_weber_si(kOracleName);
  o.tail = make_model("__oracle_tail__", EipKind::morse, {{"D", 0.6}, {"alpha", 0.9}, {"r0", 3.2}}, 6.0);
  o.tail_weight = 0.15;
  o.version = 1;
  return o;
}

EipSet default_eip_set() {
  EipSet set;
  set.models.push_back(make_model("lj", EipKind::lennard_jones, {{"epsilon", 5.0}, {"sigma", 2.1}}, 4.5));
  const std::map<std::string, double> morse{{"D", 3.5}, {"alpha", 1.6}, {"r0", 2.35}};
  set.models.push_back(make_model("morse_short", EipKind::morse, morse, 4.0));
  set.models.push_back(make_model("morse_long", EipKind::morse, morse, 5.0));
  EipModel sw = stillinger_weber_si("sw_perturbed");
  sw.params["epsilon"] *= 1.04;
  sw.params["sigma"] *= 0.97;
  sw.params["lambda"] *= 0.95;
  sw.params["gamma"] *= 1.05;
  sw.cutoff = sw.params["a"] * sw.params["sigma"];
  set.models.push_back(sw);
  set.oracle = default_oracle();
  return set;
}

std::vector<std::string> EipSet::names() const {
  std::vector<std::string> out;
  for (const auto& m : models) out.push_back(m.name);
  return out;
}

std::size_t EipSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < models.size(); ++i)
    if (models[i].name == name) return i;
  throw ArgumentError("unknown EIP '" + name + "'");
}

void EipSet::validate() const {
  std::set<std::string> seen;
  for (const auto& m : models) {
    m.validate();
    if (m.name == kOracleName) throw ArgumentError("'__oracle__' is reserved");
    if (!seen.insert(m.name).second) throw ArgumentError("duplicate EIP name '" + m.name + "'");
  }
  oracle.base.validate();
  oracle.tail.validate();
  if (!std::isfinite(oracle.tail_weight)) throw ArgumentError("oracle weight is not finite");
}

EipSet EipSet::subset(const std::vector<std::string>& wanted) const {
  EipSet out;
  out.oracle = oracle;
  for (const auto& n : wanted) out.models.push_back(models[index_of(n)]);
  return out;
}

EipSet parse_eip_set(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("EIP set JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError(0, "EIP set must be a JSON list");
  EipSet set;
  bool have_oracle = false;
  for (const json& entry : doc) {
    EipModel m = model_from_json(entry);
    if (m.name == kOracleName) {
      if (!entry.contains("tail")) throw ParseError(0, "__oracle__ entry needs a 'tail'");
      Oracle o;
      o.base = m;
      json tail = entry.at("tail");
      tail["name"] = "__oracle_tail__";
      o.tail = model_from_json(tail);
      try {
        o.tail_weight = entry.at("tail").at("weight").get<double>();
        o.version = entry.value("version", 1);
      } catch (const json::exception& e) {
        throw ParseError(0, std::string("malformed __oracle__ entry: ") + e.what());
      }
      set.oracle = o;
      have_oracle = true;
    } else {
      set.models.push_back(std::move(m));
    }
  }
  if (!have_oracle) set.oracle = default_oracle();
  set.validate();
  return set;
}

std::string eip_set_to_json(const EipSet& set) {
  json doc = json::array();
  for (const auto& m : set.models) doc.push_back(model_to_json(m));
  json oracle = model_to_json(set.oracle.base);
  json tail = model_to_json(set.oracle.tail);
  tail.erase("name");
  tail["weight"] = set.oracle.tail_weight;
  oracle["tail"] = tail;
  oracle["version"] = set.oracle.version;
  doc.push_back(oracle);
  return doc.dump(2) + "\n";
}

EipSet load_eip_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open EIP set '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_eip_set(ss.str());
}

void save_eip_set(const std::string& path, const EipSet& set) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << eip_set_to_json(set);
}

EnergyTable label_with_eips(const EipSet& eips, std::span<const Configuration> configs) {
  EnergyTable table;
  table.names = eips.names();
  table.rows.assign(configs.size(), std::vector<double>(eips.size(), 0.0));
  parallel_for(configs.size(), [&](std::size_t i) {
    for (std::size_t p = 0; p < eips.size(); ++p) {
      try {
        table.rows[i][p] = eip_energy(eips.models[p], configs[i]);
      } catch (const Error& e) {
        throw DataIntegrityError("config " + std::to_string(i) + ", EIP '" + eips.models[p].name + "': " + e.what());
      }
    }
  });
  return table;
}

}  // namespace wsnip
