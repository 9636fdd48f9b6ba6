// Command-line driver: train, eval, infer, ablate, inspect, synth.
//
// Exit codes: 0 success, 1 runtime failure, 2 missing or unreadable input,
// 3 invalid configuration, 4 checkpoint or weights problem.

#include "pgar/config.hpp"
#include "pgar/data.hpp"
#include "pgar/eval.hpp"
#include "pgar/model_io.hpp"
#include "pgar/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace pgar;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;
constexpr int kExitLoad = 4;

constexpr const char* kDataRootEnv = "PGAR_DATA_ROOT";

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.path, "Run configuration file ([model], [train], [data], [eval] sections)");
  cmd->add_option("--set", args.overrides, "Override one key, e.g. --set model.guidance_style=3")->take_all();
}

RunConfig resolve_config(const ConfigArgs& args) {
  RunConfig cfg;
  if (!args.path.empty()) {
    if (!fs::is_regular_file(args.path)) throw InputError("config file not found: " + args.path);
    cfg = load_run_config(args.path);
  }
  for (const auto& o : args.overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

// --data beats the config's data.root, which beats the environment.
std::string resolve_data_root(const std::string& flag, const RunConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.data.root.empty()) return cfg.data.root;
  if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
  throw InputError(std::string("no data root: pass --data, set data.root, or export ") + kDataRootEnv);
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw InputError("cannot write " + path.string());
    os << text;
  }
  fs::rename(tmp, path);
}

std::string format_mb(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

Checkpoint load_checked(const std::string& path, const std::optional<ModelConfig>& expected) {
  if (!fs::is_regular_file(path)) throw InputError("checkpoint not found: " + path);
  Checkpoint ck = load_checkpoint(path);
  if (expected) {
    const auto diff = diverging_keys(*expected, ck.config.model);
    if (!diff.empty()) {
      std::string msg = "checkpoint " + path + " does not match the configuration; diverging keys:";
      for (const auto& k : diff) msg += " " + k;
      throw ConfigError(msg);
    }
  }
  return ck;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  ConfigArgs config;
  std::string data;
  std::string out;
  std::string resume;
};

int run_train(const TrainArgs& a) {
  RunConfig cfg = resolve_config(a.config);
  const std::string root = resolve_data_root(a.data, cfg);
  const DatasetManifest manifest = load_dataset(root, "train", !cfg.model.rgb_only);

  fs::create_directories(a.out);
  const fs::path out(a.out);
  write_manifest((out / "manifest.tsv").string(), manifest);
  write_text(out / "config.ini", render_run_config(cfg));

  Model<float> model;
  AdamState state;
  int start_epoch = 0;
  if (!a.resume.empty()) {
    Checkpoint ck = load_checked(a.resume, cfg.model);
    model = std::move(ck.model);
    state = std::move(ck.optimizer);
    start_epoch = ck.epoch + 1;
    std::cerr << "resuming after epoch " << ck.epoch << " at step " << state.step << "\n";
  } else {
    model = init_model<float>(cfg.model, cfg.train.seed, cfg.backbone_weights);
  }

  const int size = int(cfg.model.input_size);
  const auto source = [&](std::size_t i) { return prepare_sample(manifest.entries[i], size, cfg.data.depth_norm); };

  std::ofstream log(out / "train_log.jsonl", start_epoch > 0 ? std::ios::app : std::ios::trunc);
  TrainCallbacks cb;
  cb.on_step = [&](const LossReport& r) {
    log << r.to_json().dump() << "\n";
    log.flush();
    std::cerr << "epoch " << r.epoch << " step " << r.step << " loss " << r.total << "\n";
  };
  cb.on_epoch_end = [&](int epoch, const Model<float>& m, const AdamState& s) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_epoch%03d.pgar", epoch);
    save_checkpoint((out / name).string(), cfg, m, s, epoch);
    save_checkpoint((out / "checkpoint_last.pgar").string(), cfg, m, s, epoch);
  };
  train_loop(model, manifest.entries.size(), source, cfg.train, state, cb, start_epoch);
  std::cout << "trained " << manifest.entries.size() << " samples for " << cfg.train.epochs - start_epoch
            << " epoch(s); checkpoints in " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  ConfigArgs config;
  std::string checkpoint;
  std::vector<std::string> data;
  std::string out;
  bool save_maps = false;
};

int run_eval(const EvalArgs& a) {
  std::optional<ModelConfig> expected;
  RunConfig cfg;
  if (!a.config.path.empty() || !a.config.overrides.empty()) {
    cfg = resolve_config(a.config);
    expected = cfg.model;
  }
  const Checkpoint ck = load_checked(a.checkpoint, expected);
  if (!expected) cfg = ck.config;

  std::vector<std::string> roots = a.data;
  if (roots.empty()) roots.push_back(resolve_data_root("", cfg));

  fs::create_directories(a.out);
  const fs::path out(a.out);
  std::vector<DatasetReport> reports;
  for (const auto& root : roots) {
    const std::string name = fs::path(root).filename().string();
    EvalOptions opt;
    opt.metrics = cfg.eval;
    opt.depth_norm = cfg.data.depth_norm;
    if (a.save_maps) opt.maps_dir = (out / "maps" / name).string();
    const DatasetManifest manifest = load_dataset(root, "test", !ck.config.model.rgb_only);
    reports.push_back(evaluate_dataset(ck.model, manifest, opt, name));
  }
  nlohmann::json meta;
  meta["checkpoint_epoch"] = ck.epoch;
  meta["model"] = to_json(ck.config.model);
  meta["e_measure"] = cfg.eval.e_measure == EMeasureVariant::adaptive ? "adaptive" : "max";
  meta["beta2"] = cfg.eval.beta2;
  write_text(out / "report.json", report_json(reports, meta).dump(2) + "\n");
  const std::string table = report_table(reports);
  write_text(out / "report.txt", table);
  std::cout << table;
  return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string checkpoint;
  std::string rgb;
  std::string depth;
  std::string out;
};

int run_infer(const InferArgs& a) {
  const Checkpoint ck = load_checked(a.checkpoint, std::nullopt);
  if (!fs::is_regular_file(a.rgb)) throw InputError("RGB image not found: " + a.rgb);
  if (!a.depth.empty() && !fs::is_regular_file(a.depth)) throw InputError("depth image not found: " + a.depth);
  infer_to_file(ck.model, a.rgb, a.depth, a.out, ck.config.data.depth_norm);
  std::cout << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  ConfigArgs config;
  std::string axis;
  std::string values;
  std::string data;
  std::string out;
};

std::vector<std::string> expand_values(const std::string& axis, const std::string& spec) {
  if (spec.empty()) {
    if (axis == "guidance_style") return {"1", "2", "3", "4", "5", "6", "7", "8"};
    if (axis == "n1") return {"1", "2", "3", "4", "5", "6", "7"};
    if (axis == "msr_mode") return {"recurrent", "stacked"};
    if (axis == "rgb_only" || axis == "concat_fusion") return {"false", "true"};
    if (axis == "depth_taps") return {"1", "2", "3", "4"};
    if (axis == "depth_backbone") return {"light", "full"};
    throw ConfigError("unknown ablation axis " + axis);
  }
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    int lo = 0, hi = 0;
    try {
      lo = std::stoi(spec.substr(0, dots));
      hi = std::stoi(spec.substr(dots + 2));
    } catch (const std::exception&) {
      throw ConfigError("value range '" + spec + "' is not of the form a..b");
    }
    if (hi < lo) throw ConfigError("empty value range " + spec);
    std::vector<std::string> out;
    for (int v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
    return out;
  }
  std::vector<std::string> out;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int run_ablate(const AblateArgs& a) {
  static const std::vector<std::string> axes{"guidance_style", "n1",         "msr_mode",      "rgb_only",
                                             "concat_fusion",  "depth_taps", "depth_backbone"};
  if (std::find(axes.begin(), axes.end(), a.axis) == axes.end()) {
    std::string legal;
    for (const auto& x : axes) legal += (legal.empty() ? "" : ", ") + x;
    throw ConfigError("unknown ablation axis '" + a.axis + "'; expected one of " + legal);
  }
  const RunConfig base = resolve_config(a.config);

  // Every variant is validated before any work starts.
  std::vector<std::pair<std::string, RunConfig>> variants;
  std::vector<std::string> errors;
  for (const auto& v : expand_values(a.axis, a.values)) {
    RunConfig cfg = base;
    try {
      apply_override(cfg, "model." + a.axis + "=" + v);
      for (const auto& p : cfg.problems()) errors.push_back(a.axis + "=" + v + ": " + p);
    } catch (const ConfigError& e) {
      errors.push_back(a.axis + "=" + v + ": " + e.what());
    }
    variants.emplace_back(v, cfg);
  }
  if (!errors.empty()) {
    std::string msg = "invalid ablation variants:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }

  std::optional<DatasetManifest> manifest;
  if (!a.data.empty() || !base.data.root.empty() || std::getenv(kDataRootEnv)) {
    manifest = load_dataset(resolve_data_root(a.data, base), "train", false);
  }

  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream table;
  table << std::left << std::setw(16) << a.axis << std::right << std::setw(12) << "Params" << std::setw(9) << "MiB"
        << std::setw(9) << "MB";
  if (manifest) table << std::setw(8) << "E_xi" << std::setw(8) << "S_a" << std::setw(8) << "F_b" << std::setw(8) << "M";
  table << "\n";

  for (const auto& [value, cfg] : variants) {
    Model<float> model = init_model<float>(cfg.model, cfg.train.seed, cfg.backbone_weights);
    const ParameterReport pr = count_parameters(model);
    nlohmann::json row{{"axis", a.axis},
                       {"value", value},
                       {"params", pr.total},
                       {"mib", pr.megabytes()},
                       {"mb", pr.megabytes_decimal()}};
    table << std::left << std::setw(16) << value << std::right << std::setw(12) << pr.total << std::setw(9)
          << format_mb(pr.megabytes()) << std::setw(9) << format_mb(pr.megabytes_decimal());
    if (manifest) {
      if (cfg.model.rgb_only == false && manifest->entries.front().depth_path.empty()) {
        throw InputError("variant " + a.axis + "=" + value + " needs depth maps under " + manifest->root);
      }
      const int size = int(cfg.model.input_size);
      const auto source = [&](std::size_t i) {
        return prepare_sample(manifest->entries[i], size, cfg.data.depth_norm);
      };
      AdamState state;
      train_loop(model, manifest->entries.size(), source, cfg.train, state);
      EvalOptions opt;
      opt.metrics = cfg.eval;
      opt.depth_norm = cfg.data.depth_norm;
      const auto r = evaluate_dataset(model, *manifest, opt, a.axis + "=" + value).result;
      row["E_xi"] = r.e_measure;
      row["S_alpha"] = r.s_measure;
      row["F_beta"] = r.max_f;
      row["M"] = r.mae;
      table << std::fixed << std::setprecision(3) << std::setw(8) << r.e_measure << std::setw(8) << r.s_measure
            << std::setw(8) << r.max_f << std::setw(8) << r.mae << std::defaultfloat;
    }
    table << "\n";
    rows.push_back(row);
  }
  std::cout << table.str();
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / ("ablate_" + a.axis + ".json"), rows.dump(2) + "\n");
    write_text(fs::path(a.out) / ("ablate_" + a.axis + ".txt"), table.str());
  }
  return 0;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
  ConfigArgs config;
  std::string checkpoint;
  std::string depth_backbone;
  bool json = false;
};

int run_inspect(InspectArgs a) {
  ModelConfig mc;
  if (!a.checkpoint.empty()) {
    mc = load_checked(a.checkpoint, std::nullopt).config.model;
  } else {
    if (!a.depth_backbone.empty()) a.config.overrides.push_back("model.depth_backbone=" + a.depth_backbone);
    mc = resolve_config(a.config).model;
  }
  const ParameterReport r = count_parameters(make_model<float>(mc));
  if (a.json) {
    nlohmann::json j;
    j["model"] = to_json(mc);
    for (const auto& [n, v] : r.groups) j["groups"][n] = v;
    for (const auto& [n, v] : r.stages) j["stages"][n] = v;
    j["total"] = r.total;
    j["mib"] = r.megabytes();
    j["mb"] = r.megabytes_decimal();
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  auto line = [](const std::string& name, Index n) {
    std::cout << "  " << std::left << std::setw(18) << name << std::right << std::setw(12) << n << std::setw(10)
              << format_mb(double(n) * 4.0 / double(1 << 20)) << " MiB\n";
  };
  std::cout << "groups\n";
  for (const auto& [n, v] : r.groups) line(n, v);
  std::cout << "refinement stages\n";
  for (const auto& [n, v] : r.stages) line(n, v);
  std::cout << "total " << r.total << " parameters, " << format_mb(r.megabytes()) << " MiB fp32 ("
            << format_mb(r.megabytes_decimal()) << " MB decimal)\n";
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  int count = 5;
  int size = 64;
  std::uint64_t seed = 0;
  bool depth16 = false;
};

int run_synth(const SynthArgs& a) {
  write_synthetic_dataset(a.out, a.count, a.size, a.seed, a.depth16);
  std::cout << "wrote " << a.count << " samples to " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-D salient object detection with progressive guided alternate refinement"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write checkpoints, a log and a config snapshot");
  add_config_options(t, train.config);
  t->add_option("--data", train.data, std::string("Dataset root with RGB/, depth/, GT/ (default: $") + kDataRootEnv + ")");
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--resume", train.resume, "Continue from a checkpoint");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on one or more datasets");
  add_config_options(e, eval.config);
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", eval.data, "Dataset root (repeatable)");
  e->add_option("--out", eval.out, "Output directory for report.json, report.txt and maps")->required();
  e->add_flag("--save-maps", eval.save_maps, "Write one 8-bit map per input");

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Predict one saliency map at the input's original resolution");
  i->add_option("--checkpoint", infer.checkpoint, "Checkpoint file")->required();
  i->add_option("--rgb", infer.rgb, "RGB image")->required();
  i->add_option("--depth", infer.depth, "Depth image (required unless the model is RGB-only)");
  i->add_option("--out", infer.out, "Output PNG")->required();

  AblateArgs ablate;
  auto* ab = app.add_subcommand("ablate", "Compare variants along one design axis");
  add_config_options(ab, ablate.config);
  ab->add_option("--axis", ablate.axis,
                 "guidance_style | n1 | msr_mode | rgb_only | concat_fusion | depth_taps | depth_backbone")
      ->required();
  ab->add_option("--values", ablate.values, "Range a..b or comma list (default: every legal value)");
  ab->add_option("--data", ablate.data, "Train and score each variant on this dataset");
  ab->add_option("--out", ablate.out, "Directory for the comparison table");

  InspectArgs inspect;
  auto* in = app.add_subcommand("inspect", "Print the parameter breakdown of a config or checkpoint");
  add_config_options(in, inspect.config);
  in->add_option("--checkpoint", inspect.checkpoint, "Checkpoint file");
  in->add_option("--depth-backbone", inspect.depth_backbone, "light | full")
      ->check(CLI::IsMember({"light", "full"}));
  in->add_flag("--json", inspect.json, "Machine-readable output");

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Write a small synthetic RGB-D dataset");
  sy->add_option("--out", synth.out, "Dataset root")->required();
  sy->add_option("--count", synth.count, "Number of samples")->check(CLI::PositiveNumber);
  sy->add_option("--size", synth.size, "Image side")->check(CLI::PositiveNumber);
  sy->add_option("--seed", synth.seed, "Generator seed");
  sy->add_flag("--depth16", synth.depth16, "Write 16-bit depth");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*t) return run_train(train);
    if (*e) return run_eval(eval);
    if (*i) return run_infer(infer);
    if (*ab) return run_ablate(ablate);
    if (*in) return run_inspect(inspect);
    if (*sy) return run_synth(synth);
  } catch (const ConfigError& err) {
    std::cerr << "configuration error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const InputError& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return kExitInput;
  } catch (const LoadError& err) {
    std::cerr << "load error: " << err.what() << "\n";
    return kExitLoad;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
