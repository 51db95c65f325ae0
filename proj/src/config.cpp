#include "muse/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "muse/errors.hpp"

namespace muse {
namespace {

using json = nlohmann::json;

class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError("field '" + display() + "' must be an object");
  }

  void number(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw type_error(key, "a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw range_error(key, "finite");
    }
  }

  void count(const char* key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) throw type_error(key, "a non-negative integer");
      out = v->get<std::size_t>();
    }
  }

  void seed(const char* key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
        throw type_error(key, "a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void flag(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw type_error(key, "a boolean");
      out = v->get<bool>();
    }
  }

  void text(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw type_error(key, "a string");
      out = v->get<std::string>();
    }
  }

  void optional_number(const char* key, std::optional<double>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!v->is_number()) throw type_error(key, "a number or null");
      out = v->get<double>();
    }
  }

  // Nested object; `fill` reads its fields.
  void section(const char* key, const std::function<void(Section&)>& fill) {
    if (const json* v = take(key)) {
      Section child(*v, field(key));
      fill(child);
      child.finish();
    }
  }

  const json* raw(const char* key) { return take(key); }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  ConfigError range_error(const char* key, const std::string& what) const {
    return ConfigError("field '" + field(key) + "' must be " + what);
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown field '" + field(key.c_str()) + "'");
    }
  }

 private:
  const json* take(const char* key) {
    seen_.emplace(key, true);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  ConfigError type_error(const char* key, const char* what) const {
    return ConfigError("field '" + field(key) + "' must be " + what);
  }

  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& node_;
  std::string path_;
  std::map<std::string, bool> seen_;
};

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

// Exceptions from the validators carry no field path; prefix the section.
template <typename F>
void checked(const char* section, F&& fn) {
  try {
    fn();
  } catch (const ContractError& e) {
    throw ConfigError(std::string(section) + ": " + e.what());
  }
}

}  // namespace

void validate_eval_options(const EvalOptions& opts) {
  if (opts.task != "classify" && opts.task != "cluster") {
    throw ConfigError("field 'eval.task' must be \"classify\" or \"cluster\", got \"" + opts.task + "\"");
  }
  if (opts.n_splits < 1) throw ConfigError("field 'eval.n_splits' must be at least 1");
  const auto& r = opts.ratio;
  if (!(r.train > 0.0 && r.val >= 0.0 && r.test > 0.0) || std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw ConfigError("field 'eval.ratio' must hold three non-negative parts summing to 1");
  }
  if (opts.probe.epochs < 1 || !(opts.probe.lr > 0.0) || opts.probe.weight_decay < 0.0) {
    throw ConfigError("field 'eval.probe' needs epochs >= 1, lr > 0, weight_decay >= 0");
  }
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("syntax error at line " + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) + ": " +
                      e.what());
  }

  RunConfig cfg;
  Section root(doc, "");
  std::string dataset, output;
  root.text("dataset_dir", dataset);
  root.text("output_dir", output);
  if (dataset.empty()) throw ConfigError("field 'dataset_dir' is required");
  cfg.dataset_dir = resolve(dataset, base_dir);
  if (!output.empty()) cfg.output_dir = resolve(output, base_dir);

  TrainConfig& t = cfg.train;
  root.section("train", [&](Section& s) {
    s.number("lr", t.lr);
    s.number("lr_controller", t.lr_controller);
    s.count("epochs", t.epochs);
    s.count("patience", t.patience);
    s.number("dropout", t.dropout);
    s.seed("seed", t.seed);
    s.section("contrast", [&](Section& c) {
      c.number("tau", t.contrast.tau);
      c.number("beta1", t.contrast.beta1);
      c.number("beta2", t.contrast.beta2);
      std::string precision = "f64";
      c.text("precision", precision);
      if (precision == "f64") {
        t.contrast.precision = Precision::f64;
      } else if (precision == "f32") {
        t.contrast.precision = Precision::f32;
      } else {
        throw ConfigError("field 'train.contrast.precision' must be \"f64\" or \"f32\", got \"" + precision + "\"");
      }
    });
    s.section("controller", [&](Section& c) {
      c.number("alpha1", t.controller.alpha1);
      c.number("alpha2", t.controller.alpha2);
      c.number("epsilon", t.controller.epsilon);
    });
    s.section("augment", [&](Section& c) {
      c.number("p_s", t.augment.p_s);
      c.number("p_c", t.augment.p_c);
      c.seed("seed", t.augment.seed);
    });
    s.section("dims", [&](Section& c) {
      c.count("embed", t.dims.embed);
      c.count("project", t.dims.project);
      c.count("filter", t.dims.filter);
      if (t.dims.embed < 1 || t.dims.project < 1 || t.dims.filter < 1) {
        throw ConfigError("field 'train.dims' entries must be at least 1");
      }
    });
  });

  EvalOptions& ev = cfg.eval;
  root.section("eval", [&](Section& s) {
    s.text("task", ev.task);
    s.count("n_splits", ev.n_splits);
    s.seed("seed", ev.seed);
    if (const json* r = s.raw("ratio")) {
      if (!r->is_array() || r->size() != 3 || !std::all_of(r->begin(), r->end(), [](const json& x) { return x.is_number(); })) {
        throw ConfigError("field 'eval.ratio' must be an array of three numbers");
      }
      ev.ratio = {(*r)[0].get<double>(), (*r)[1].get<double>(), (*r)[2].get<double>()};
    }
    s.section("probe", [&](Section& p) {
      p.count("epochs", ev.probe.epochs);
      p.number("lr", ev.probe.lr);
      p.number("weight_decay", ev.probe.weight_decay);
    });
  });

  root.section("ablation", [&](Section& s) {
    bool no_semantic = false, no_context = false, no_fusion = false;
    s.flag("disable_semantic_contrast", no_semantic);
    s.flag("disable_context_contrast", no_context);
    s.flag("disable_fusion_contrast", no_fusion);
    s.optional_number("fixed_lambda", t.fixed_lambda);
    t.contrast.semantic = !no_semantic;
    t.contrast.contextual = !no_context;
    t.contrast.fusion = !no_fusion;
    if (no_semantic && no_context && no_fusion) {
      throw ConfigError("field 'ablation': disabling all three contrasts leaves nothing to optimise");
    }
  });
  root.finish();

  checked("train", [&] { t.validate(); });
  validate_eval_options(ev);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  nlohmann::ordered_json j;
  // Absolute, so the snapshot resolves the same from its own directory.
  j["dataset_dir"] = std::filesystem::absolute(cfg.dataset_dir).lexically_normal().string();
  if (!cfg.output_dir.empty()) {
    j["output_dir"] = std::filesystem::absolute(cfg.output_dir).lexically_normal().string();
  }
  j["train"] = {
      {"lr", t.lr},
      {"lr_controller", t.lr_controller},
      {"epochs", t.epochs},
      {"patience", t.patience},
      {"dropout", t.dropout},
      {"seed", t.seed},
      {"contrast", {{"tau", t.contrast.tau}, {"beta1", t.contrast.beta1}, {"beta2", t.contrast.beta2},
                    {"precision", t.contrast.precision == Precision::f32 ? "f32" : "f64"}}},
      {"controller",
       {{"alpha1", t.controller.alpha1}, {"alpha2", t.controller.alpha2}, {"epsilon", t.controller.epsilon}}},
      {"augment", {{"p_s", t.augment.p_s}, {"p_c", t.augment.p_c}, {"seed", t.augment.seed}}},
      {"dims", {{"embed", t.dims.embed}, {"project", t.dims.project}, {"filter", t.dims.filter}}},
  };
  j["eval"] = {
      {"task", cfg.eval.task},
      {"n_splits", cfg.eval.n_splits},
      {"ratio", {cfg.eval.ratio.train, cfg.eval.ratio.val, cfg.eval.ratio.test}},
      {"seed", cfg.eval.seed},
      {"probe", {{"epochs", cfg.eval.probe.epochs}, {"lr", cfg.eval.probe.lr}, {"weight_decay", cfg.eval.probe.weight_decay}}},
  };
  j["ablation"] = {
      {"disable_semantic_contrast", !t.contrast.semantic},
      {"disable_context_contrast", !t.contrast.contextual},
      {"disable_fusion_contrast", !t.contrast.fusion},
      {"fixed_lambda", t.fixed_lambda ? nlohmann::ordered_json(*t.fixed_lambda) : nlohmann::ordered_json(nullptr)},
  };
  return j;
}

}  // namespace muse
