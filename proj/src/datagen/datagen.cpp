#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "wsnip/datagen.hpp"
#include "wsnip/errors.hpp"
#include "wsnip/hash.hpp"
#include "wsnip/parallel.hpp"
#include "wsnip/weaklabel.hpp"

namespace wsnip {

using nlohmann::json;

void SamplerSpec::validate() const {
  for (double s : displacement_tiers)
    if (!(s >= 0.0)) throw ArgumentError("displacement widths must be >= 0");
  if (lattice_count > 0 && displacement_tiers.empty()) throw ArgumentError("no displacement tiers");
  if (!(lattice_constant > 0.0)) throw ArgumentError("lattice constant must be positive");
  for (int r : repeats)
    if (r < 1) throw ArgumentError("supercell repeats must be >= 1");
  if (cluster_min_size < 2 || cluster_max_size > 10 || cluster_min_size > cluster_max_size)
    throw ArgumentError("cluster sizes must lie within [2, 10]");
  if (!(cluster_bond_min > 0.0) || cluster_bond_max < cluster_bond_min) throw ArgumentError("bad cluster bond range");
  if (!(dimer_min > 0.0) || dimer_max < dimer_min) throw ArgumentError("bad dimer range");
}

Configuration ideal_lattice(LatticeKind lattice, double a, std::array<int, 3> repeats, int species) {
  std::vector<Vec3> basis = {{0.0, 0.0, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}};
  if (lattice == LatticeKind::diamond) {
    const std::size_t n = basis.size();
    for (std::size_t i = 0; i < n; ++i) basis.push_back(basis[i] + Vec3{0.25, 0.25, 0.25});
  }
  Configuration c;
  for (int x = 0; x < repeats[0]; ++x)
    for (int y = 0; y < repeats[1]; ++y)
      for (int z = 0; z < repeats[2]; ++z)
        for (const Vec3& b : basis) {
          c.species.push_back(species);
          c.positions.push_back({a * (b[0] + x), a * (b[1] + y), a * (b[2] + z)});
        }
  c.cell = Mat3{Vec3{a * repeats[0], 0.0, 0.0}, Vec3{0.0, a * repeats[1], 0.0}, Vec3{0.0, 0.0, a * repeats[2]}};
  c.pbc = {true, true, true};
  return c;
}

namespace {

double min_distance(const Configuration& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) best = std::min(best, norm(c.positions[j] - c.positions[i]));
  return best;
}

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Vec3 v{g(rng), g(rng), g(rng)};
    const double n = norm(v);
    if (n > 1e-8) return (1.0 / n) * v;
  }
}

Configuration sample_cluster(const SamplerSpec& spec, int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> bond(spec.cluster_bond_min, spec.cluster_bond_max);
  const double reject_below = 0.5 * spec.dimer_equilibrium;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Configuration c;
    c.species.push_back(spec.species);
    c.positions.push_back({0.0, 0.0, 0.0});
    bool ok = true;
    while (static_cast<int>(c.size()) < size && ok) {
      bool placed = false;
      for (int t = 0; t < 100 && !placed; ++t) {
        std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
        const Vec3 cand = c.positions[pick(rng)] + bond(rng) * random_direction(rng);
        bool clear = true;
        for (const Vec3& r : c.positions)
          if (norm(cand - r) < spec.cluster_bond_min) {
            clear = false;
            break;
          }
        if (clear) {
          c.species.push_back(spec.species);
          c.positions.push_back(cand);
          placed = true;
        }
      }
      ok = placed;
    }
    if (ok && min_distance(c) >= reject_below) {
      c.properties["kind"] = "random_cluster";
      return c;
    }
  }
  throw SamplerError("could not place a cluster of " + std::to_string(size) + " atoms after 1000 retries");
}

}  // namespace

std::vector<Configuration> sample_configs(const SamplerSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<Configuration> out;
  out.reserve(spec.lattice_count + spec.cluster_count + spec.dimer_count);

  const Configuration ideal = ideal_lattice(spec.lattice, spec.lattice_constant, spec.repeats, spec.species);
  for (std::size_t i = 0; i < spec.lattice_count; ++i) {
    const double width = spec.displacement_tiers[i % spec.displacement_tiers.size()];
    Configuration c = ideal;
    if (width > 0.0) {
      std::normal_distribution<double> g(0.0, width);
      for (Vec3& r : c.positions)
        for (double& x : r) x += g(rng);
    }
    c.properties["kind"] = "perturbed_lattice";
    c.set_property("sigma_disp", width);
    out.push_back(std::move(c));
  }

  std::uniform_int_distribution<int> size_dist(spec.cluster_min_size, spec.cluster_max_size);
  for (std::size_t i = 0; i < spec.cluster_count; ++i) out.push_back(sample_cluster(spec, size_dist(rng), rng));

  std::uniform_real_distribution<double> sep(spec.dimer_min, spec.dimer_max);
  for (std::size_t i = 0; i < spec.dimer_count; ++i) {
    Configuration c;
    c.species = {spec.species, spec.species};
    c.positions = {{0.0, 0.0, 0.0}, sep(rng) * random_direction(rng)};
    c.properties["kind"] = "dimer_scan";
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Split> make_splits(std::size_t m, const SplitSpec& spec) {
  if (m < 5) throw ArgumentError("need at least 5 DFT-labeled configurations to split");
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) ||
      !(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0))
    throw ArgumentError("split fractions must lie in (0, 1)");
  if (spec.num_splits < 1) throw ArgumentError("need at least one split");
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(m)));
  const auto n_val = static_cast<std::size_t>(
      std::llround(spec.validation_fraction * (1.0 - spec.test_fraction) * static_cast<double>(m)));
  if (n_test + n_val >= m) throw ArgumentError("split leaves no training data");
  std::vector<Split> splits;
  for (int s = 0; s < spec.num_splits; ++s) {
    Split sp;
    sp.seed = spec.seed + static_cast<std::uint64_t>(s);
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    std::mt19937_64 rng(sp.seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    sp.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    sp.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test),
                         perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    sp.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), perm.end());
    std::sort(sp.test.begin(), sp.test.end());
    std::sort(sp.validation.begin(), sp.validation.end());
    std::sort(sp.train.begin(), sp.train.end());
    splits.push_back(std::move(sp));
  }
  return splits;
}

double SealedOracle::energy_of(std::size_t config) const {
  auto it = std::lower_bound(indices.begin(), indices.end(), config);
  if (it == indices.end() || *it != config)
    throw DataIntegrityError("no sealed oracle energy for config " + std::to_string(config));
  return energies[static_cast<std::size_t>(it - indices.begin())];
}

BuiltDataset build_dataset(const std::vector<Configuration>& configs, const EipSet& eips, std::size_t m,
                           std::uint64_t seed) {
  if (m == 0) throw ArgumentError("m must be positive: the method needs some ground truth");
  if (m > configs.size())
    throw ArgumentError("m = " + std::to_string(m) + " exceeds the " + std::to_string(configs.size()) +
                        " available configurations");
  BuiltDataset out;
  Dataset& ds = out.dataset;
  ds.configs = configs;
  ds.eip = label_with_eips(eips, configs);

  std::vector<double> oracle(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) { oracle[i] = oracle_energy(eips.oracle, configs[i]); });

  std::vector<std::size_t> perm(configs.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  ds.dft.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(ds.dft.begin(), ds.dft.end());
  std::vector<bool> labeled(configs.size(), false);
  for (std::size_t i : ds.dft) {
    labeled[i] = true;
    ds.dft_energy.push_back(oracle[i]);
  }
  for (std::size_t i = 0; i < configs.size(); ++i)
    if (!labeled[i]) {
      ds.eip_only.push_back(i);
      out.sealed.indices.push_back(i);
      out.sealed.energies.push_back(oracle[i]);
    }
  return out;
}

std::vector<double> best_eip_distribution(const std::vector<Configuration>& configs, const EnergyTable& table,
                                          const std::vector<double>& oracle, double threshold) {
  const std::size_t p = table.names.size();
  std::vector<double> counts(p + 1, 0.0);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const BestEipLabel label = best_eip_label(table.rows[i], oracle[i], configs[i].size(), threshold);
    counts[label.cls] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(std::max<std::size_t>(1, configs.size()));
  return counts;
}

GeneratedDataset generate_dataset(const GenerateOptions& options, const EipSet& eips) {
  eips.validate();
  GeneratedDataset out;
  SamplerSpec sampler = options.sampler;
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    const std::vector<Configuration> configs = sample_configs(sampler);
    BuiltDataset built = build_dataset(configs, eips, options.m, sampler.seed);

    std::vector<double> oracle(configs.size());
    for (std::size_t k = 0; k < built.dataset.dft.size(); ++k) oracle[built.dataset.dft[k]] = built.dataset.dft_energy[k];
    for (std::size_t k = 0; k < built.sealed.indices.size(); ++k) oracle[built.sealed.indices[k]] = built.sealed.energies[k];
    for (std::size_t i = 0; i < configs.size(); ++i) {
      if (!std::isfinite(oracle[i])) throw DataIntegrityError("non-finite oracle energy for config " + std::to_string(i));
      for (double e : built.dataset.eip.rows[i])
        if (!std::isfinite(e)) throw DataIntegrityError("non-finite EIP energy for config " + std::to_string(i));
    }
    const std::vector<double> dist = best_eip_distribution(configs, built.dataset.eip, oracle, options.label_threshold);
    int frequent = 0;
    for (std::size_t c = 0; c + 1 < dist.size(); ++c)
      if (dist[c] >= options.min_class_fraction) ++frequent;
    if (frequent >= 2 || eips.size() < 2) {
      out.built = std::move(built);
      out.sampler_seed = sampler.seed;
      SplitSpec ss = options.splits;
      out.splits = make_splits(options.m, ss);
      return out;
    }
    ++sampler.seed;
  }
  throw SamplerError("best-EIP labels stayed degenerate after " + std::to_string(options.max_attempts) + " attempts");
}

namespace {

std::atomic<std::size_t> g_sealed_reads{0};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

json splits_to_json(const std::vector<Split>& splits) {
  json arr = json::array();
  for (const Split& s : splits)
    arr.push_back({{"seed", s.seed}, {"train", s.train}, {"validation", s.validation}, {"test", s.test}});
  return arr;
}

}  // namespace

std::string save_dataset(const std::string& dir, const GeneratedDataset& data, const EipSet& eips,
                         const GenerateOptions& options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + dir + "': " + ec.message());

  const Dataset& ds = data.built.dataset;
  std::vector<Configuration> frames = ds.configs;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    frames[i].properties["index"] = std::to_string(i);
    for (std::size_t p = 0; p < ds.eip.names.size(); ++p)
      frames[i].set_property("eip_energy_" + ds.eip.names[p], ds.eip.rows[i][p]);
  }
  for (std::size_t k = 0; k < ds.dft.size(); ++k) frames[ds.dft[k]].set_property("energy", ds.dft_energy[k]);
  const std::string xyz = write_xyz(frames);
  const std::string eip_json = eip_set_to_json(eips);

  std::size_t lattice = 0, cluster = 0, dimer = 0;
  for (const auto& c : ds.configs) {
    const auto it = c.properties.find("kind");
    const std::string kind = it == c.properties.end() ? "" : it->second;
    lattice += kind == "perturbed_lattice";
    cluster += kind == "random_cluster";
    dimer += kind == "dimer_scan";
  }
  json manifest;
  manifest["format"] = "wsnip-dataset/1";
  manifest["counts"] = {{"total", ds.configs.size()}, {"m", ds.m()}, {"n", ds.n()},
                        {"perturbed_lattice", lattice}, {"random_cluster", cluster}, {"dimer_scan", dimer}};
  manifest["seeds"] = {{"sampler", data.sampler_seed}, {"splits", options.splits.seed}};
  manifest["label_threshold"] = options.label_threshold;
  manifest["eipset_hash"] = git_blob_hash(eip_json);
  manifest["dataset_hash"] = git_blob_hash(xyz);
  manifest["eip_names"] = ds.eip.names;
  manifest["dft_indices"] = ds.dft;
  manifest["splits"] = splits_to_json(data.splits);
  const std::string manifest_text = manifest.dump(2) + "\n";

  json sealed;
  sealed["indices"] = data.built.sealed.indices;
  sealed["energies"] = data.built.sealed.energies;

  const fs::path root(dir);
  write_text((root / kDatasetXyz).string(), xyz);
  write_text((root / kEipSetFile).string(), eip_json);
  write_text((root / kManifest).string(), manifest_text);
  write_text((root / kSealedOracle).string(), sealed.dump() + "\n");
  return git_blob_hash(manifest_text);
}

LoadedDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  LoadedDataset out;
  const std::string manifest_text = read_text((root / kManifest).string());
  const std::string eip_text = read_text((root / kEipSetFile).string());
  out.manifest_hash = git_blob_hash(manifest_text);
  out.eipset_hash = git_blob_hash(eip_text);
  out.eips = parse_eip_set(eip_text);

  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("manifest: ") + e.what());
  }
  if (manifest.value("eipset_hash", "") != out.eipset_hash)
    throw DataIntegrityError("eipset.json does not match the manifest hash");

  Dataset& ds = out.dataset;
  ds.configs = read_xyz_file((root / kDatasetXyz).string());
  ds.eip.names = out.eips.names();
  ds.eip.rows.assign(ds.configs.size(), std::vector<double>(ds.eip.names.size(), 0.0));
  for (std::size_t i = 0; i < ds.configs.size(); ++i) {
    Configuration& c = ds.configs[i];
    for (std::size_t p = 0; p < ds.eip.names.size(); ++p) {
      const std::string key = "eip_energy_" + ds.eip.names[p];
      const auto v = c.property_as_double(key);
      if (!v) throw DataIntegrityError("config " + std::to_string(i) + " lacks '" + key + "'");
      ds.eip.rows[i][p] = *v;
      c.properties.erase(key);
    }
    c.properties.erase("index");
  }
  try {
    ds.dft = manifest.at("dft_indices").get<std::vector<std::size_t>>();
    std::vector<bool> labeled(ds.configs.size(), false);
    for (std::size_t i : ds.dft) {
      if (i >= ds.configs.size()) throw DataIntegrityError("DFT index out of range");
      const auto e = ds.configs[i].property_as_double("energy");
      if (!e) throw DataIntegrityError("DFT config " + std::to_string(i) + " lacks an energy");
      ds.dft_energy.push_back(*e);
      ds.configs[i].properties.erase("energy");
      labeled[i] = true;
    }
    for (std::size_t i = 0; i < ds.configs.size(); ++i)
      if (!labeled[i]) ds.eip_only.push_back(i);
    for (const json& s : manifest.at("splits")) {
      Split sp;
      sp.seed = s.at("seed").get<std::uint64_t>();
      sp.train = s.at("train").get<std::vector<std::size_t>>();
      sp.validation = s.at("validation").get<std::vector<std::size_t>>();
      sp.test = s.at("test").get<std::vector<std::size_t>>();
      out.splits.push_back(std::move(sp));
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("manifest: ") + e.what());
  }
  return out;
}

SealedOracle load_sealed_oracle(const std::string& dir) {
  ++g_sealed_reads;
  const std::string path = (std::filesystem::path(dir) / kSealedOracle).string();
  if (!std::filesystem::exists(path)) throw Error("sealed oracle file '" + path + "' is missing");
  SealedOracle out;
  try {
    const json doc = json::parse(read_text(path));
    out.indices = doc.at("indices").get<std::vector<std::size_t>>();
    out.energies = doc.at("energies").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("sealed oracle: ") + e.what());
  }
  if (out.indices.size() != out.energies.size()) throw DataIntegrityError("sealed oracle arrays differ in length");
  return out;
}

std::size_t sealed_oracle_reads() { return g_sealed_reads.load(); }

}  // namespace wsnip
