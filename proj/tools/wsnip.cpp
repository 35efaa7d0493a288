// wsnip gen-data|train|ablate|report --config <path> [--seed N] [--out DIR]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wsnip/datagen.hpp"
#include "wsnip/eip.hpp"
#include "wsnip/errors.hpp"
#include "wsnip/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wsnip;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

// Gen-data config keys: out, seed, m, eipset, lattice_count, cluster_count,
// dimer_count, displacement_tiers, label_threshold, split_seed.
int gen_data(const Common& c) {
  const json j = c.config.empty() ? json::object() : read_json(c.config);
  static const std::set<std::string> keys{"out",           "seed",          "m",           "eipset",
                                          "lattice_count", "cluster_count", "dimer_count", "displacement_tiers",
                                          "label_threshold", "split_seed"};
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw ConfigError("unknown gen-data key '" + k + "'");
  GenerateOptions o;
  try {
    o.sampler.seed = c.seed ? *c.seed : j.value("seed", std::uint64_t{0});
    o.m = j.value("m", o.m);
    o.sampler.lattice_count = j.value("lattice_count", o.sampler.lattice_count);
    o.sampler.cluster_count = j.value("cluster_count", o.sampler.cluster_count);
    o.sampler.dimer_count = j.value("dimer_count", o.sampler.dimer_count);
    o.sampler.displacement_tiers = j.value("displacement_tiers", o.sampler.displacement_tiers);
    o.label_threshold = j.value("label_threshold", o.label_threshold);
    o.splits.seed = j.value("split_seed", o.sampler.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("gen-data config: ") + e.what());
  }
  const std::string out = !c.out.empty() ? c.out : j.value("out", std::string("data/default"));
  const EipSet eips = j.contains("eipset") ? load_eip_set(j.at("eipset").get<std::string>()) : default_eip_set();
  const GeneratedDataset data = generate_dataset(o, eips);
  const std::string hash = save_dataset(out, data, eips, o);
  std::cout << "dataset " << out << ": " << data.built.dataset.configs.size() << " configurations, m = "
            << data.built.dataset.m() << ", manifest " << hash << "\n";
  return 0;
}

RunConfig run_config(const Common& c) {
  RunConfig rc = RunConfig::from_json(read_file(c.config));
  if (c.seed) rc.seed = *c.seed;
  if (!c.out.empty()) rc.out = c.out;
  rc.validate();
  return rc;
}

void write_report(const fs::path& dir, const MetricsReport& r) {
  write_file(dir / "report.json", report_json(r));
  write_file(dir / "report.csv", report_csv(r));
  bool series = false;
  for (const auto& s : r.splits) series = series || !s.epochs.empty();
  if (series) write_file(dir / "rejection.csv", rejection_csv(r));
}

int train(const Common& c) {
  const RunConfig rc = run_config(c);
  const ExperimentData ex = load_experiment(rc.dataset, rc.backend, false);
  const fs::path out(rc.out);
  write_file(out / "config.json", rc.to_json());
  std::optional<Checkpoint> rep;
  if (rc.strategy == Strategy::mp || rc.strategy == Strategy::mp_la) rep = pretrain_representation(ex, rc);
  ArmOptions arm;
  if (rep) arm.pretrained = &*rep;
  const MetricsReport r = run_strategy(ex, rc, arm);
  write_report(out, r);
  if (rep) {
    write_file(out / "pca_pretrained.csv", representation_csv(export_dataset_representations(ex, rc, &*rep)));
    write_file(out / "pca_random.csv", representation_csv(export_dataset_representations(ex, rc, nullptr)));
  }
  std::cout << r.arm << ": test config MAE " << r.mean_config_mae() << " eV (baseline "
            << r.mean_baseline_config_mae() << ", improvement " << r.improvement_percent() << "%)\n";
  return 0;
}

int ablate(const Common& c, const std::string& which) {
  const RunConfig rc = run_config(c);
  const Ablation a = parse_ablation(which);
  if (!fs::exists(fs::path(rc.dataset) / kSealedOracle))
    throw ConfigError("ablation '" + which + "' needs the sealed oracle file in " + rc.dataset);
  const ExperimentData ex = load_experiment(rc.dataset, rc.backend, true);
  const auto reports = run_ablation(ex, rc, a);
  const fs::path out = fs::path(rc.out) / to_string(a);
  for (const auto& r : reports) write_report(out / r.arm, r);
  write_file(out / "comparison.csv", comparison_csv(reports));
  std::cout << comparison_csv(reports);
  return 0;
}

// Report config: {"runs": [dirs...], "out": dir}; positional run dirs are added.
int report(const Common& c, std::vector<std::string> runs) {
  std::string out = c.out;
  if (!c.config.empty()) {
    const json j = read_json(c.config);
    for (const auto& d : j.value("runs", std::vector<std::string>{})) runs.push_back(d);
    if (out.empty()) out = j.value("out", std::string());
  }
  if (runs.empty()) throw ConfigError("report needs at least one run directory");
  if (out.empty()) out = "report";
  std::vector<MetricsReport> reports;
  std::vector<std::string> sources;
  for (const auto& d : runs) {
    std::vector<fs::path> files;
    if (fs::exists(fs::path(d) / "report.json")) files.push_back(fs::path(d) / "report.json");
    else if (fs::is_directory(d))
      for (const auto& e : fs::recursive_directory_iterator(d))
        if (e.path().filename() == "report.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no report.json under " + d);
    for (const auto& f : files) {
      reports.push_back(parse_report(read_file(f.string())));
      sources.push_back(f.parent_path().string());
    }
  }
  const fs::path o(out);
  write_file(o / "merged.csv", merge_reports_csv(reports));
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const std::string tag = reports[i].arm + "_" + std::to_string(i);
    bool series = false;
    for (const auto& s : reports[i].splits) series = series || !s.epochs.empty();
    if (series) write_file(o / ("rejection_" + tag + ".csv"), rejection_csv(reports[i]));
    for (const char* pca : {"pca_pretrained.csv", "pca_random.csv"}) {
      const fs::path src = fs::path(sources[i]) / pca;
      if (fs::exists(src)) fs::copy_file(src, o / (tag + "_" + pca), fs::copy_options::overwrite_existing);
    }
  }
  std::cout << read_file((o / "merged.csv").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised interatomic potentials"};
  app.require_subcommand(1);
  Common common;
  std::string which;
  std::vector<std::string> runs;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", common.config, "JSON configuration");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "override the seed");
    sub->add_option("--out", common.out, "output directory");
  };
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_common(gen, false);
  auto* tr = app.add_subcommand("train", "run a strategy over the splits");
  add_common(tr, true);
  auto* ab = app.add_subcommand("ablate", "run an ablation");
  add_common(ab, true);
  ab->add_option("--which", which, "label_source | confidence | eip_subset | tukey")->required();
  auto* rp = app.add_subcommand("report", "merge run reports");
  add_common(rp, false);
  rp->add_option("runs", runs, "run directories");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_data(common);
    if (*tr) return train(common);
    if (*ab) return ablate(common, which);
    if (*rp) return report(common, runs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
