#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wsnip/errors.hpp"
#include "wsnip/net.hpp"

namespace wsnip {

using nlohmann::json;

Checkpoint make_checkpoint(const ParameterSet& params, const TrainState& state, const std::string& meta) {
  Checkpoint ckpt;
  ckpt.state = state;
  ckpt.meta = meta;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    CheckpointArray a;
    a.shape = p.shape;
    a.values = p.value;
    a.trainable = p.trainable;
    if (p.trainable) {
      a.adam_m = p.adam_m;
      a.adam_v = p.adam_v;
    }
    ckpt.arrays.emplace(p.name, std::move(a));
  }
  return ckpt;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json arrays = json::object();
  for (const auto& [name, a] : ckpt.arrays) {
    json entry{{"shape", a.shape}, {"values", a.values}, {"trainable", a.trainable}};
    if (!a.adam_m.empty()) {
      entry["adam_m"] = a.adam_m;
      entry["adam_v"] = a.adam_v;
    }
    arrays[name] = std::move(entry);
  }
  const TrainState& s = ckpt.state;
  json state{{"step", s.step},         {"scheduler", to_string(s.scheduler)},
             {"base_lr", s.base_lr},   {"final_lr", s.final_lr},
             {"total_steps", s.total_steps}, {"batch_size", s.batch_size},
             {"beta1", s.beta1},       {"beta2", s.beta2},
             {"eps", s.eps}};
  json meta;
  try {
    meta = json::parse(ckpt.meta);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  json doc{{"format", kCheckpointFormat}, {"arrays", std::move(arrays)}, {"state", std::move(state)},
           {"meta", std::move(meta)}};
  return doc.dump();
}

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

}  // namespace

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint ckpt;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object() || doc.value("format", std::string()) != kCheckpointFormat)
      throw ParseError(0, "not a checkpoint (format tag missing or unsupported)");
    for (const auto& [name, entry] : doc.at("arrays").items()) {
      CheckpointArray a;
      a.shape = entry.at("shape").get<std::vector<std::size_t>>();
      a.values = entry.at("values").get<std::vector<double>>();
      a.trainable = entry.value("trainable", true);
      if (entry.contains("adam_m")) {
        a.adam_m = entry.at("adam_m").get<std::vector<double>>();
        a.adam_v = entry.at("adam_v").get<std::vector<double>>();
      }
      const std::size_t n = shape_size(a.shape);
      if (a.values.size() != n) throw ParseError(0, "array '" + name + "' has " + std::to_string(a.values.size()) +
                                                        " values for shape of size " + std::to_string(n));
      if (!a.adam_m.empty() && (a.adam_m.size() != n || a.adam_v.size() != n))
        throw ParseError(0, "array '" + name + "' has moments of the wrong size");
      ckpt.arrays.emplace(name, std::move(a));
    }
    const json& s = doc.at("state");
    ckpt.state.step = s.at("step").get<std::uint64_t>();
    ckpt.state.scheduler = parse_scheduler_kind(s.at("scheduler").get<std::string>());
    ckpt.state.base_lr = s.at("base_lr").get<double>();
    ckpt.state.final_lr = s.at("final_lr").get<double>();
    ckpt.state.total_steps = s.at("total_steps").get<std::uint64_t>();
    ckpt.state.batch_size = s.at("batch_size").get<std::size_t>();
    ckpt.state.beta1 = s.at("beta1").get<double>();
    ckpt.state.beta2 = s.at("beta2").get<double>();
    ckpt.state.eps = s.at("eps").get<double>();
    ckpt.meta = doc.contains("meta") ? doc.at("meta").dump() : "{}";
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed checkpoint: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ParseError(0, std::string("malformed checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(ckpt);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

std::size_t apply_checkpoint(ParameterSet& params, const Checkpoint& ckpt, const std::string& prefix,
                             bool with_moments) {
  std::vector<std::pair<Parameter*, const CheckpointArray*>> plan;
  for (const auto& [name, a] : ckpt.arrays) {
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    Parameter* p = params.find(name);
    if (!p) throw IncompatibleCheckpointError(name, "no such array in the model");
    if (p->shape != a.shape) {
      std::ostringstream msg;
      msg << "shape [";
      for (std::size_t i = 0; i < a.shape.size(); ++i) msg << (i ? "," : "") << a.shape[i];
      msg << "] does not match model shape [";
      for (std::size_t i = 0; i < p->shape.size(); ++i) msg << (i ? "," : "") << p->shape[i];
      msg << "]";
      throw IncompatibleCheckpointError(name, msg.str());
    }
    plan.emplace_back(p, &a);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    if (p.name.compare(0, prefix.size(), prefix) == 0 && !ckpt.arrays.count(p.name))
      throw IncompatibleCheckpointError(p.name, "missing from checkpoint");
  }
  for (auto [p, a] : plan) {
    p->value = a->values;
    if (with_moments && !a->adam_m.empty()) {
      p->adam_m = a->adam_m;
      p->adam_v = a->adam_v;
    }
  }
  return plan.size();
}

}  // namespace wsnip
