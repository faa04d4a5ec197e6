#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "authformer/data_io.hpp"
#include "authformer/error.hpp"
#include "authformer/gradcheck_suite.hpp"
#include "authformer/harness.hpp"
#include "authformer/train.hpp"
#include "json.hpp"

namespace authformer {
namespace {

using nlohmann::json;

constexpr std::uint64_t kDefaultSeed = 42;

// Everything a command may need; each subcommand binds the subset it uses.
struct RunConfig {
  std::size_t classes = 8;
  std::size_t samples_per_class = 40;
  double noise = SynthConfig{}.noise_level;
  double test_fraction = 0.25;
  std::uint64_t seed = kDefaultSeed;
  std::string data;
  std::string out;
  std::string ckpt;
  std::string modalities = "face,finger,voice";
  std::size_t layers = 2;
  std::string layer_range = "1..6";
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  double momentum = 0.9;
  std::size_t jobs = 1;
  std::size_t gradcheck_seeds = 10;
  bool inject_fault = false;
  std::string filter;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("AUTHFORMER_SEED");
  if (!env || !*env) return kDefaultSeed;
  char* end = nullptr;
  const auto v = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-') throw ValidationError(std::string("AUTHFORMER_SEED is not an unsigned integer: ") + env);
  return v;
}

// "1..6" or "1,2,4".
std::vector<std::size_t> parse_layer_list(const std::string& text) {
  std::vector<std::size_t> out;
  auto number = [&](const std::string& s) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size() || v == 0) throw ValidationError("bad layer count '" + s + "' in '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = number(text.substr(0, dots)), hi = number(text.substr(dots + 2));
    if (lo > hi) throw ValidationError("empty layer range '" + text + "'");
    for (auto l = lo; l <= hi; ++l) out.push_back(l);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    out.push_back(number(text.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

TrainConfig train_config(const RunConfig& rc) {
  TrainConfig tc;
  tc.epochs = rc.epochs;
  tc.batch_size = rc.batch_size;
  tc.seed = rc.seed;
  tc.layers = rc.layers;
  tc.modalities = parse_combination(rc.modalities);
  tc.optimizer.learning_rate = rc.learning_rate;
  tc.optimizer.momentum = rc.momentum;
  if (rc.optimizer == "adam") {
    tc.optimizer.kind = OptimizerKind::Adam;
  } else if (rc.optimizer == "sgd") {
    tc.optimizer.kind = OptimizerKind::Sgd;
  } else {
    throw ValidationError("unknown optimizer '" + rc.optimizer + "' (expected adam or sgd)");
  }
  tc.validate();
  return tc;
}

void write_report(const std::string& path, const std::string& csv, std::ostream& out) {
  if (path.empty()) return;
  write_file_atomic(path, csv);
  out << "wrote " << path << "\n";
}

std::string epoch_line(const EpochLog& e) {
  return "epoch " + std::to_string(e.epoch) + "  loss " + fmt("%.6f", e.mean_loss) + "  time " +
         fmt("%.3f", e.seconds) + "s\n";
}

int cmd_synth(const RunConfig& rc, std::ostream& out) {
  SynthConfig sc;
  sc.num_classes = rc.classes;
  sc.samples_per_class = rc.samples_per_class;
  sc.seed = rc.seed;
  sc.noise_level = rc.noise;
  sc.test_fraction = rc.test_fraction;
  const auto ds = generate_synthetic(sc);
  save_dataset(ds, rc.out);
  out << "dataset " << rc.out << ": " << ds.size() << " samples, " << ds.manifest.num_classes << " classes, "
      << ds.ids(SplitSide::Train).size() << " train / " << ds.ids(SplitSide::Test).size() << " test\n";
  for (const auto& d : ds.manifest.modalities) {
    out << "  " << modality_name(d.tag) << " " << shape_str(d.shape) << " noise "
        << fmt("%.4f", sc.noise_level * modality_noise_multiplier(d.tag)) << " -> " << d.blob << "\n";
  }
  return kExitOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const auto tc = train_config(rc);
  const auto ds = load_dataset(rc.data);
  std::vector<EpochLog> log;
  const auto model = train_new_model<float>(ds, tc, &log, [&](const EpochLog& e) { out << epoch_line(e) << std::flush; });
  save_checkpoint(model, rc.out);
  const auto test = ds.ids(SplitSide::Test);
  const auto m = evaluate_classification(model, ds, test, tc.modalities);
  out << "route " << route_name(plan_route(tc.modalities)) << ", " << model.parameter_count() << " parameters\n";
  out << "test accuracy " << fmt("%.4f", m.accuracy) << "\n";
  out << "checkpoint " << rc.out << "\n";
  return kExitOk;
}

struct Loaded {
  AuthFormer<float> model;
  Dataset data;
  Combination modalities;
};

Loaded load_for_eval(const RunConfig& rc, bool modalities_given) {
  auto model = load_checkpoint<float>(rc.ckpt);
  auto data = load_dataset(rc.data);
  Combination combo = modalities_given ? canonical(parse_combination(rc.modalities)) : model.config().modalities;
  plan_route(combo);
  for (auto m : combo) {
    if (!contains(model.config().modalities, m)) {
      throw ValidationError("checkpoint has no '" + std::string(modality_name(m)) + "' branch (trained on " +
                            combination_tags(model.config().modalities) + ")");
    }
    data.descriptor(m);
  }
  if (data.manifest.num_classes != model.config().num_classes) {
    throw ValidationError("checkpoint predicts " + std::to_string(model.config().num_classes) +
                          " classes, dataset has " + std::to_string(data.manifest.num_classes));
  }
  return {std::move(model), std::move(data), std::move(combo)};
}

int cmd_eval(const RunConfig& rc, bool modalities_given, std::ostream& out) {
  const auto l = load_for_eval(rc, modalities_given);
  const auto ids = l.data.ids(SplitSide::Test);
  const auto m = evaluate_classification(l.model, l.data, ids, l.modalities);
  const auto label = combination_label(l.modalities);
  out << label << "\n";
  out << "  accuracy      " << fmt("%.4f", m.accuracy) << "\n";
  out << "  macro recall  " << fmt("%.4f", m.macro_recall) << "\n";
  out << "  macro F1      " << fmt("%.4f", m.macro_f1) << "\n";
  for (auto c : m.absent_classes) out << "  warning: class " << c << " absent from the test split\n";
  write_report(rc.out, classification_csv(label, m), out);
  return kExitOk;
}

int cmd_verify(const RunConfig& rc, bool modalities_given, std::ostream& out) {
  const auto l = load_for_eval(rc, modalities_given);
  const auto ids = l.data.ids(SplitSide::Test);
  const auto scores = verification_scores(l.model, l.data, ids, l.modalities);
  const auto v = compute_eer(scores.genuine, scores.impostor);
  const auto label = combination_label(l.modalities);
  out << label << " (" << scores.genuine.size() << " genuine, " << scores.impostor.size() << " impostor)\n";
  out << "  threshold " << fmt("%.4f", v.threshold) << "\n";
  out << "  TAR " << fmt("%.4f", v.tar) << "  FRR " << fmt("%.4f", v.frr) << "  FAR " << fmt("%.4f", v.far)
      << "  EER " << fmt("%.4f", v.eer) << "\n";
  write_report(rc.out, verification_csv(label, v), out);
  return kExitOk;
}

int cmd_ablate(const RunConfig& rc, std::ostream& out) {
  const auto tc = train_config(rc);
  const auto ds = load_dataset(rc.data);
  const auto rows = ablation_run(ds, tc, rc.jobs);
  out << ablation_table(rows);
  write_report(rc.out, ablation_csv(rows), out);
  return kExitOk;
}

int cmd_depth_sweep(const RunConfig& rc, std::ostream& out) {
  const auto tc = train_config(rc);
  const auto layers = parse_layer_list(rc.layer_range);
  const auto ds = load_dataset(rc.data);
  const auto rows = depth_sweep(ds, layers, tc);
  out << depth_table(rows);
  write_report(rc.out, depth_csv(rows), out);
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  GradcheckOptions opts;
  opts.seeds = rc.gradcheck_seeds;
  opts.base_seed = rc.seed;
  opts.inject_fault = rc.inject_fault;
  opts.filter = rc.filter;
  const auto results = run_gradcheck(opts, [&](const GradcheckResult& r) {
    char line[128];
    std::snprintf(line, sizeof line, "%-24s max rel err %.3e  %6.2fs  %s\n", r.target.c_str(), r.max_relative_error,
                  r.seconds, r.passed ? "ok" : "FAIL");
    out << line << std::flush;
  });
  if (results.empty()) throw ValidationError("no gradcheck target matches '" + rc.filter + "'");
  std::vector<std::string> failed;
  for (const auto& r : results)
    if (!r.passed) failed.push_back(r.target);
  if (failed.empty()) {
    out << "all " << results.size() << " targets within " << fmt("%.0e", opts.tolerance) << "\n";
    return kExitOk;
  }
  err << "gradcheck failed:";
  for (const auto& f : failed) err << " " << f;
  err << "\n";
  return kExitRuntime;
}

// Options of `sub` that were not given on the command line take their value
// from the config file, keyed by the long option name.
std::vector<std::string> config_file_args(CLI::App& sub, const std::vector<std::string>& given,
                                          const json& file) {
  std::vector<std::string> extra;
  for (const auto& [key, value] : file.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    const auto* opt = sub.get_option_no_throw("--" + name);
    if (!opt) throw ValidationError("config file: unknown key '" + key + "' for command '" + sub.get_name() + "'");
    if (std::find(given.begin(), given.end(), "--" + name) != given.end()) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back("--" + name);
      continue;
    }
    extra.push_back("--" + name);
    if (value.is_string()) {
      extra.push_back(value.get<std::string>());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      extra.push_back(joined);
    } else {
      extra.push_back(value.dump());
    }
  }
  return extra;
}

json resolved_config(const CLI::App& sub) {
  json j;
  j["command"] = sub.get_name();
  for (const auto* opt : sub.get_options()) {
    const auto& name = opt->get_lnames();
    if (name.empty() || name.front() == "help") continue;
    std::string key = name.front();
    std::replace(key.begin(), key.end(), '-', '_');
    if (opt->get_expected_max() == 0) {
      j[key] = opt->count() > 0;
      continue;
    }
    const auto text = opt->count() ? opt->as<std::string>() : opt->get_default_str();
    // Numbers print as numbers; everything else stays a string.
    const auto parsed = json::parse(text, nullptr, false);
    j[key] = parsed.is_number() ? parsed : json(text);
  }
  return j;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  try {
    rc.seed = default_seed();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  CLI::App app{"Multimodal biometric transformer: data generation, training, evaluation and checks"};
  app.name("authformer");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string config_path;
  app.add_option("--config", config_path, "JSON file of option defaults; flags take precedence")
      ->check(CLI::ExistingFile);
  app.fallthrough();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic multimodal dataset");
  synth->add_option("--classes", rc.classes, "number of identities");
  synth->add_option("--samples-per-class", rc.samples_per_class, "samples per identity");
  synth->add_option("--seed", rc.seed, "generator seed");
  synth->add_option("--noise", rc.noise, "base noise level");
  synth->add_option("--test-fraction", rc.test_fraction, "per-class test share");
  synth->add_option("--out", rc.out, "output directory")->required();

  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--data", rc.data, "dataset directory")->required();
    sub->add_option("--epochs", rc.epochs, "training epochs");
    sub->add_option("--batch-size", rc.batch_size, "minibatch size");
    sub->add_option("--lr", rc.learning_rate, "learning rate");
    sub->add_option("--optimizer", rc.optimizer, "adam or sgd");
    sub->add_option("--momentum", rc.momentum, "sgd momentum");
    sub->add_option("--seed", rc.seed, "init and shuffle seed");
  };

  auto* train = app.add_subcommand("train", "Train a model on one modality combination");
  add_training(train);
  train->add_option("--modalities", rc.modalities, "comma-separated, e.g. face,finger,voice");
  train->add_option("--layers", rc.layers, "encoder layers");
  train->add_option("--out", rc.out, "checkpoint path")->required();

  auto add_eval = [&](CLI::App* sub) {
    sub->add_option("--ckpt", rc.ckpt, "checkpoint path")->required();
    sub->add_option("--data", rc.data, "dataset directory")->required();
    sub->add_option("--modalities", rc.modalities, "subset of the checkpoint's modalities (default: all of them)");
    sub->add_option("--out", rc.out, "CSV report path");
  };
  auto* eval = app.add_subcommand("eval", "Classification metrics on the test split");
  add_eval(eval);
  auto* verify = app.add_subcommand("verify", "TAR/FRR/FAR/EER on the test split");
  add_eval(verify);

  auto* ablate = app.add_subcommand("ablate", "Train and test every modality combination");
  add_training(ablate);
  ablate->add_option("--layers", rc.layers, "encoder layers");
  ablate->add_option("--jobs", rc.jobs, "concurrent training runs");
  ablate->add_option("--out", rc.out, "CSV report path");

  auto* sweep = app.add_subcommand("depth-sweep", "Accuracy, time and size per encoder depth");
  add_training(sweep);
  sweep->add_option("--modalities", rc.modalities, "comma-separated modality combination");
  sweep->add_option("--layers", rc.layer_range, "range 'a..b' or list 'a,b,c'");
  sweep->add_option("--out", rc.out, "CSV report path");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every backward rule");
  gradcheck->add_option("--seeds", rc.gradcheck_seeds, "seeds per target");
  gradcheck->add_option("--seed", rc.seed, "base seed");
  gradcheck->add_option("--filter", rc.filter, "only targets containing this text");
  gradcheck->add_flag("--inject-fault", rc.inject_fault, "add a target with a deliberately wrong derivative");

  try {
    std::vector<std::string> argv = args;
    // Config-file values are appended as flags so the command line wins.
    {
      CLI::App probe{"probe"};
      probe.allow_extras();
      probe.set_help_flag();
      std::string path;
      probe.add_option("--config", path);
      auto copy = args;
      std::reverse(copy.begin(), copy.end());
      probe.parse(copy);
      if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config file " + path);
        json file;
        try {
          file = json::parse(in);
        } catch (const json::exception& e) {
          throw ValidationError("config file " + path + ": " + e.what());
        }
        if (!file.is_object()) throw ValidationError("config file " + path + " must hold a JSON object");
        for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
          if (std::find(args.begin(), args.end(), sub->get_name()) == args.end()) continue;
          const auto extra = config_file_args(*sub, args, file);
          argv.insert(argv.end(), extra.begin(), extra.end());
          break;
        }
      }
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  CLI::App* sub = app.get_subcommands().front();
  out << "config " << resolved_config(*sub).dump() << "\n";
  const bool modalities_given = [&] {
    const auto* opt = sub->get_option_no_throw("--modalities");
    return opt && opt->count() > 0;
  }();
  try {
    if (sub == synth) return cmd_synth(rc, out);
    if (sub == train) return cmd_train(rc, out);
    if (sub == eval) return cmd_eval(rc, modalities_given, out);
    if (sub == verify) return cmd_verify(rc, modalities_given, out);
    if (sub == ablate) return cmd_ablate(rc, out);
    if (sub == sweep) return cmd_depth_sweep(rc, out);
    return cmd_gradcheck(rc, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace authformer
