#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "wsnip/errors.hpp"
#include "wsnip/experiment.hpp"

namespace wsnip {

using nlohmann::json;

namespace {

constexpr const char* kReportFormat = "wsnip-report/1";

double mean_of(const std::vector<SplitMetrics>& s, double SplitMetrics::*field) {
  if (s.empty()) return 0.0;
  double t = 0.0;
  for (const auto& m : s) t += m.*field;
  return t / static_cast<double>(s.size());
}

json epoch_json(const EpochRecord& e) {
  return json{{"epoch", e.epoch},
              {"lr", e.lr},
              {"train_loss", e.train_loss},
              {"validation", e.validation},
              {"eip_seen", e.eip_seen},
              {"eip_rejected", e.eip_rejected},
              {"rejection_fraction", e.rejection_fraction()},
              {"sigma_hat", e.sigma_hat},
              {"k", e.k},
              {"category_total", e.category_total},
              {"category_used", e.category_used}};
}

EpochRecord epoch_from(const json& j) {
  EpochRecord e;
  e.epoch = j.at("epoch").get<std::size_t>();
  e.lr = j.at("lr").get<double>();
  e.train_loss = j.at("train_loss").get<double>();
  e.validation = j.at("validation").get<double>();
  e.eip_seen = j.at("eip_seen").get<std::size_t>();
  e.eip_rejected = j.at("eip_rejected").get<std::size_t>();
  e.sigma_hat = j.at("sigma_hat").get<double>();
  e.k = j.at("k").get<double>();
  e.category_total = j.at("category_total").get<std::array<std::size_t, 3>>();
  e.category_used = j.at("category_used").get<std::array<std::size_t, 3>>();
  return e;
}

json split_json(const SplitMetrics& s) {
  json j{{"split", s.split},
         {"config_mae", s.config_mae},
         {"atom_mae", s.atom_mae},
         {"baseline_config_mae", s.baseline_config_mae},
         {"baseline_atom_mae", s.baseline_atom_mae},
         {"validation_mae", s.validation_mae},
         {"best_epoch", s.best_epoch},
         {"best_eip", s.best_eip},
         {"best_eip_config_mae", s.best_eip_config_mae},
         {"best_eip_atom_mae", s.best_eip_atom_mae},
         {"classifier_accuracy", s.classifier_accuracy},
         {"majority_rate", s.majority_rate},
         {"selected", s.selected},
         {"dropped", s.dropped},
         {"pretrain_head_mae", s.pretrain_head_mae}};
  if (s.pool_accuracy) j["pool_accuracy"] = *s.pool_accuracy;
  if (s.pool_majority_rate) j["pool_majority_rate"] = *s.pool_majority_rate;
  if (!s.epochs.empty()) {
    json ep = json::array();
    for (const auto& e : s.epochs) ep.push_back(epoch_json(e));
    j["rejection_series"] = ep;
  }
  return j;
}

SplitMetrics split_from(const json& j) {
  SplitMetrics s;
  s.split = j.at("split").get<std::size_t>();
  s.config_mae = j.at("config_mae").get<double>();
  s.atom_mae = j.at("atom_mae").get<double>();
  s.baseline_config_mae = j.at("baseline_config_mae").get<double>();
  s.baseline_atom_mae = j.at("baseline_atom_mae").get<double>();
  s.validation_mae = j.at("validation_mae").get<double>();
  s.best_epoch = j.at("best_epoch").get<std::size_t>();
  s.best_eip = j.at("best_eip").get<std::string>();
  s.best_eip_config_mae = j.at("best_eip_config_mae").get<double>();
  s.best_eip_atom_mae = j.at("best_eip_atom_mae").get<double>();
  s.classifier_accuracy = j.at("classifier_accuracy").get<double>();
  s.majority_rate = j.at("majority_rate").get<double>();
  s.selected = j.at("selected").get<std::size_t>();
  s.dropped = j.at("dropped").get<std::size_t>();
  s.pretrain_head_mae = j.at("pretrain_head_mae").get<std::vector<double>>();
  if (j.contains("pool_accuracy")) s.pool_accuracy = j.at("pool_accuracy").get<double>();
  if (j.contains("pool_majority_rate")) s.pool_majority_rate = j.at("pool_majority_rate").get<double>();
  if (j.contains("rejection_series"))
    for (const auto& e : j.at("rejection_series")) s.epochs.push_back(epoch_from(e));
  return s;
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

}  // namespace

double MetricsReport::mean_config_mae() const { return mean_of(splits, &SplitMetrics::config_mae); }
double MetricsReport::mean_atom_mae() const { return mean_of(splits, &SplitMetrics::atom_mae); }
double MetricsReport::mean_baseline_config_mae() const { return mean_of(splits, &SplitMetrics::baseline_config_mae); }

double MetricsReport::improvement_percent() const {
  const double b = mean_baseline_config_mae();
  if (b == 0.0) return 0.0;
  return (b - mean_config_mae()) / b * 100.0;
}

std::string report_json(const MetricsReport& r) {
  json splits = json::array();
  for (const auto& s : r.splits) splits.push_back(split_json(s));
  json j{{"format", kReportFormat},
         {"arm", r.arm},
         {"config", json::parse(r.config.to_json())},
         {"manifest_hash", r.manifest_hash},
         {"eipset_hash", r.eipset_hash},
         {"splits", splits},
         {"summary",
          {{"mean_config_mae", r.mean_config_mae()},
           {"mean_atom_mae", r.mean_atom_mae()},
           {"mean_baseline_config_mae", r.mean_baseline_config_mae()},
           {"mean_baseline_atom_mae", mean_of(r.splits, &SplitMetrics::baseline_atom_mae)},
           {"improvement_percent", r.improvement_percent()}}}};
  return j.dump(2) + "\n";
}

MetricsReport parse_report(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != kReportFormat) throw ParseError(0, "not a metrics report");
    MetricsReport r;
    r.arm = j.at("arm").get<std::string>();
    r.config = RunConfig::from_json(j.at("config").dump());
    r.manifest_hash = j.at("manifest_hash").get<std::string>();
    r.eipset_hash = j.at("eipset_hash").get<std::string>();
    for (const auto& s : j.at("splits")) r.splits.push_back(split_from(s));
    return r;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("metrics report: ") + e.what());
  }
}

std::string report_csv(const MetricsReport& r) {
  std::ostringstream o;
  o << "arm,split,config_mae,atom_mae,baseline_config_mae,baseline_atom_mae,improvement_percent,best_eip,"
       "best_eip_config_mae,classifier_accuracy,majority_rate,selected\n";
  for (const auto& s : r.splits) {
    const double imp = s.baseline_config_mae == 0.0 ? 0.0 : (s.baseline_config_mae - s.config_mae) / s.baseline_config_mae * 100.0;
    o << r.arm << ',' << s.split << ',' << fmt(s.config_mae) << ',' << fmt(s.atom_mae) << ','
      << fmt(s.baseline_config_mae) << ',' << fmt(s.baseline_atom_mae) << ',' << fmt(imp) << ',' << s.best_eip << ','
      << fmt(s.best_eip_config_mae) << ',' << fmt(s.classifier_accuracy) << ',' << fmt(s.majority_rate) << ','
      << s.selected << '\n';
  }
  o << r.arm << ",mean," << fmt(r.mean_config_mae()) << ',' << fmt(r.mean_atom_mae()) << ','
    << fmt(r.mean_baseline_config_mae()) << ',' << fmt(mean_of(r.splits, &SplitMetrics::baseline_atom_mae)) << ','
    << fmt(r.improvement_percent()) << ",," << fmt(mean_of(r.splits, &SplitMetrics::best_eip_config_mae)) << ','
    << fmt(mean_of(r.splits, &SplitMetrics::classifier_accuracy)) << ','
    << fmt(mean_of(r.splits, &SplitMetrics::majority_rate)) << ",\n";
  return o.str();
}

std::string rejection_csv(const MetricsReport& r) {
  std::ostringstream o;
  o << "epoch,rejection_fraction,sigma_hat,k,mild_total,mild_used,normal_total,normal_used,severe_total,severe_used\n";
  std::size_t epochs = 0;
  for (const auto& s : r.splits)
    epochs = std::max(epochs, s.epochs.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    double rej = 0.0, sig = 0.0, k = 0.0;
    std::array<double, 3> tot{}, used{};
    std::size_t n = 0;
    for (const auto& s : r.splits) {
      if (e >= s.epochs.size()) continue;
      const auto& rec = s.epochs[e];
      rej += rec.rejection_fraction();
      sig += rec.sigma_hat;
      k += rec.k;
      for (int c = 0; c < 3; ++c) {
        tot[c] += static_cast<double>(rec.category_total[c]);
        used[c] += static_cast<double>(rec.category_used[c]);
      }
      ++n;
    }
    const double d = static_cast<double>(n);
    o << e + 1 << ',' << fmt(rej / d) << ',' << fmt(sig / d) << ',' << fmt(k / d);
    for (int c = 0; c < 3; ++c) o << ',' << fmt(tot[c] / d) << ',' << fmt(used[c] / d);
    o << '\n';
  }
  return o.str();
}

std::string comparison_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream o;
  o << "arm,mean_config_mae,mean_atom_mae,mean_baseline_config_mae,improvement_percent\n";
  for (const auto& r : reports)
    o << r.arm << ',' << fmt(r.mean_config_mae()) << ',' << fmt(r.mean_atom_mae()) << ','
      << fmt(r.mean_baseline_config_mae()) << ',' << fmt(r.improvement_percent()) << '\n';
  return o.str();
}

std::string merge_reports_csv(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ArgumentError("nothing to merge");
  for (const auto& r : reports)
    if (r.manifest_hash != reports.front().manifest_hash || r.eipset_hash != reports.front().eipset_hash)
      throw DataIntegrityError("reports come from different datasets or EIP sets; refusing to merge");
  std::map<std::string, std::vector<const MetricsReport*>> by_arm;
  std::vector<std::string> order;
  for (const auto& r : reports) {
    if (!by_arm.count(r.arm)) order.push_back(r.arm);
    by_arm[r.arm].push_back(&r);
  }
  std::ostringstream o;
  o << "arm,runs,config_mae_mean,config_mae_std,atom_mae_mean,atom_mae_std,baseline_config_mae_mean,"
       "improvement_percent_mean,improvement_percent_std\n";
  auto stats = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
  };
  for (const auto& arm : order) {
    std::vector<double> c, a, b, imp;
    for (const auto* r : by_arm[arm]) {
      c.push_back(r->mean_config_mae());
      a.push_back(r->mean_atom_mae());
      b.push_back(r->mean_baseline_config_mae());
      imp.push_back(r->improvement_percent());
    }
    const auto [cm, cs] = stats(c);
    const auto [am, as] = stats(a);
    const auto [bm, bs] = stats(b);
    const auto [im, is] = stats(imp);
    (void)bs;
    o << arm << ',' << c.size() << ',' << fmt(cm) << ',' << fmt(cs) << ',' << fmt(am) << ',' << fmt(as) << ','
      << fmt(bm) << ',' << fmt(im) << ',' << fmt(is) << '\n';
  }
  return o.str();
}

}  // namespace wsnip
