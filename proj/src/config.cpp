#include "pgar/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <functional>
#include <sstream>

namespace pgar {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

int parse_int(const std::string& v) {
  int out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw std::invalid_argument("expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true/false, got '" + v + "'");
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

struct Key {
  std::string name;  // section.key
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    auto int_key = [&](std::string name, auto member) {
      k.push_back({std::move(name), [member](RunConfig& c, const std::string& v) { member(c) = parse_int(v); },
                   [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }});
    };
    auto dbl_key = [&](std::string name, auto member) {
      k.push_back({std::move(name), [member](RunConfig& c, const std::string& v) { member(c) = parse_double(v); },
                   [member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); }});
    };
    auto bool_key = [&](std::string name, auto member) {
      k.push_back({std::move(name), [member](RunConfig& c, const std::string& v) { member(c) = parse_bool(v); },
                   [member](const RunConfig& c) {
                     return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false");
                   }});
    };

    int_key("model.input_size", [](RunConfig& c) -> int& { return c.model.input_size; });
    int_key("model.n1", [](RunConfig& c) -> int& { return c.model.n1; });
    int_key("model.n2", [](RunConfig& c) -> int& { return c.model.n2; });
    int_key("model.guidance_style", [](RunConfig& c) -> int& { return c.model.guidance_style; });
    int_key("model.msr_inner_width", [](RunConfig& c) -> int& { return c.model.msr_inner_width; });
    int_key("model.depth_taps", [](RunConfig& c) -> int& { return c.model.depth_taps; });
    bool_key("model.rgb_only", [](RunConfig& c) -> bool& { return c.model.rgb_only; });
    bool_key("model.concat_fusion", [](RunConfig& c) -> bool& { return c.model.concat_fusion; });
    k.push_back({"model.backbone",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "full") {
                     c.model.backbone.variant = BackboneVariant::full;
                     c.model.backbone.channel_scale = 1.0;
                   } else if (v == "tiny") {
                     c.model.backbone.variant = BackboneVariant::tiny;
                     c.model.backbone.channel_scale = 0.125;
                   } else {
                     throw std::invalid_argument("expected full or tiny, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.model.backbone.variant == BackboneVariant::full ? "full" : "tiny");
                 }});
    k.push_back({"model.msr_mode",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "recurrent") {
                     c.model.msr_mode = MsrMode::recurrent;
                   } else if (v == "stacked") {
                     c.model.msr_mode = MsrMode::stacked;
                   } else {
                     throw std::invalid_argument("expected recurrent or stacked, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.model.msr_mode == MsrMode::recurrent ? "recurrent" : "stacked");
                 }});
    k.push_back({"model.depth_backbone",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "light") {
                     c.model.depth_backbone = DepthBackbone::light;
                   } else if (v == "full") {
                     c.model.depth_backbone = DepthBackbone::vgg;
                   } else {
                     throw std::invalid_argument("expected light or full, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.model.depth_backbone == DepthBackbone::light ? "light" : "full");
                 }});
    k.push_back({"model.backbone_weights",
                 [](RunConfig& c, const std::string& v) {
                   c.backbone_weights = v.empty() ? std::nullopt : std::optional<std::string>(v);
                 },
                 [](const RunConfig& c) { return c.backbone_weights.value_or(""); }});

    int_key("train.batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; });
    int_key("train.epochs", [](RunConfig& c) -> int& { return c.train.epochs; });
    dbl_key("train.lr", [](RunConfig& c) -> double& { return c.train.lr; });
    int_key("train.lr_drop_epoch", [](RunConfig& c) -> int& { return c.train.lr_drop_epoch; });
    dbl_key("train.lr_drop_factor", [](RunConfig& c) -> double& { return c.train.lr_drop_factor; });
    dbl_key("train.beta1", [](RunConfig& c) -> double& { return c.train.beta1; });
    dbl_key("train.beta2", [](RunConfig& c) -> double& { return c.train.beta2; });
    dbl_key("train.eps", [](RunConfig& c) -> double& { return c.train.eps; });
    dbl_key("train.weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; });
    k.push_back({"train.seed", [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    bool_key("train.freeze_backbone", [](RunConfig& c) -> bool& { return c.train.freeze_backbone; });
    bool_key("train.augment", [](RunConfig& c) -> bool& { return c.train.augment; });
    k.push_back({"train.loss_weights",
                 [](RunConfig& c, const std::string& v) {
                   c.train.loss_weights.clear();
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) c.train.loss_weights.push_back(parse_double(trim(item)));
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (double w : c.train.loss_weights) out += (out.empty() ? "" : ",") + fmt(w);
                   return out;
                 }});

    k.push_back({"data.root", [](RunConfig& c, const std::string& v) { c.data.root = v; },
                 [](const RunConfig& c) { return c.data.root; }});
    k.push_back({"data.depth_norm",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "bitdepth") {
                     c.data.depth_norm = DepthNorm::bitdepth;
                   } else if (v == "minmax") {
                     c.data.depth_norm = DepthNorm::minmax;
                   } else {
                     throw std::invalid_argument("expected bitdepth or minmax, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.data.depth_norm == DepthNorm::bitdepth ? "bitdepth" : "minmax");
                 }});

    k.push_back({"eval.e_measure",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "adaptive") {
                     c.eval.e_measure = EMeasureVariant::adaptive;
                   } else if (v == "max") {
                     c.eval.e_measure = EMeasureVariant::max;
                   } else {
                     throw std::invalid_argument("expected adaptive or max, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.eval.e_measure == EMeasureVariant::adaptive ? "adaptive" : "max");
                 }});
    dbl_key("eval.beta2", [](RunConfig& c) -> double& { return c.eval.beta2; });
    return k;
  }();
  return table;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

void set_key(RunConfig& cfg, const std::string& name, const std::string& value, std::vector<std::string>& errors) {
  const Key* k = find_key(name);
  if (!k) {
    errors.push_back(name + ": unknown key");
    return;
  }
  try {
    k->set(cfg, trim(value));
  } catch (const std::exception& e) {
    errors.push_back(name + ": " + e.what());
  }
}

[[noreturn]] void fail(const std::string& what, const std::vector<std::string>& errors) {
  std::string msg = what;
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

}  // namespace

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> out;
  if (batch_size < 1) out.push_back("train.batch_size must be >= 1");
  if (epochs < 1) out.push_back("train.epochs must be >= 1");
  if (!(lr >= 0)) out.push_back("train.lr must be >= 0");
  if (lr_drop_epoch < 0 || lr_drop_epoch >= epochs) {
    out.push_back("train.lr_drop_epoch must satisfy 0 <= lr_drop_epoch < epochs (got " +
                  std::to_string(lr_drop_epoch) + " with epochs " + std::to_string(epochs) + ")");
  }
  if (!(lr_drop_factor > 0)) out.push_back("train.lr_drop_factor must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) out.push_back("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) out.push_back("train.beta2 must be in [0, 1)");
  if (!(eps > 0)) out.push_back("train.eps must be > 0");
  if (!(weight_decay >= 0)) out.push_back("train.weight_decay must be >= 0");
  for (double w : loss_weights) {
    if (!(w >= 0)) out.push_back("train.loss_weights entries must be >= 0");
  }
  return out;
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> out;
  for (const auto& p : model.problems()) out.push_back("model: " + p);
  for (const auto& p : train.problems()) out.push_back(p);
  if (!train.loss_weights.empty()) {
    const std::size_t outputs = build_topology(model).size() + 1;
    if (train.loss_weights.size() != outputs) {
      out.push_back("train.loss_weights needs " + std::to_string(outputs) + " entries (one per supervised output), got " +
                    std::to_string(train.loss_weights.size()));
    }
  }
  if (!(eval.beta2 > 0)) out.push_back("eval.beta2 must be > 0");
  return out;
}

void RunConfig::validate() const {
  const auto p = problems();
  if (!p.empty()) fail("invalid configuration:", p);
}

RunConfig load_run_config(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot read config " + path + ": " + e.what());
  }
  RunConfig cfg;
  std::vector<std::string> errors;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      errors.push_back(section + ": keys must live inside a [section]");
      continue;
    }
    for (const auto& [key, value] : body) set_key(cfg, section + "." + key, value.data(), errors);
  }
  if (!errors.empty()) fail("invalid configuration in " + path + ":", errors);
  cfg.validate();
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  std::vector<std::string> errors;
  set_key(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1), errors);
  if (!errors.empty()) fail("invalid override:", errors);
}

std::string render_run_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    const auto dot = k.name.find('.');
    const std::string s = k.name.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + s + "]\n";
      section = s;
    }
    out += k.name.substr(dot + 1) + " = " + k.get(cfg) + "\n";
  }
  return out;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : keys()) j[k.name] = k.get(cfg);
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  std::vector<std::string> errors;
  for (const auto& [name, value] : j.items()) set_key(cfg, name, value.get<std::string>(), errors);
  if (!errors.empty()) fail("invalid config snapshot:", errors);
  return cfg;
}

nlohmann::json to_json(const ModelConfig& cfg) {
  RunConfig r;
  r.model = cfg;
  nlohmann::json out = nlohmann::json::object();
  const nlohmann::json all = to_json(r);
  for (const auto& [name, value] : all.items()) {
    if (name.rfind("model.", 0) == 0 && name != "model.backbone_weights") out[name] = value;
  }
  return out;
}

ModelConfig model_config_from_json(const nlohmann::json& j) { return run_config_from_json(j).model; }

std::vector<std::string> diverging_keys(const ModelConfig& a, const ModelConfig& b) {
  const auto ja = to_json(a);
  const auto jb = to_json(b);
  std::vector<std::string> out;
  for (const auto& [name, value] : ja.items()) {
    if (jb.value(name, nlohmann::json()) != value) {
      out.push_back(name + " (" + value.get<std::string>() + " vs " + jb.value(name, std::string("?")) + ")");
    }
  }
  return out;
}

}  // namespace pgar
