#include "spacing/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spacing/data.hpp"
#include "spacing/error.hpp"
#include "spacing/eval.hpp"
#include "spacing/geometry.hpp"
#include "spacing/model.hpp"
#include "spacing/training.hpp"

namespace spacing::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kSeedEnv = "SPACING_NCD_SEED";

json scalar_value(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  std::int64_t integer{};
  if (auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), integer);
      ec == std::errc() && ptr == text.data() + text.size()) {
    return integer;
  }
  double real{};
  if (auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), real);
      ec == std::errc() && ptr == text.data() + text.size()) {
    return real;
  }
  return text;
}

/// Reads a flat JSON object of flag values (keys are long flag names without
/// dashes). Entries are routed to whichever subcommand was selected on the
/// command line; a key naming a subcommand may also hold an object of its own.
class JsonConfig : public CLI::Config {
public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json doc = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      std::vector<std::string> values;
      if (opt->count() > 0) {
        values = opt->results();
      } else if (default_also && !opt->get_default_str().empty()) {
        values = {opt->get_default_str()};
      } else if (opt->get_expected_max() == 0) {
        values = {"false"};
      } else {
        continue;
      }
      if (opt->get_expected_max() == 0) {
        doc[name] = opt->count() > 0;
      } else if (opt->get_expected_max() > 1) {
        json list = json::array();
        for (const auto& v : values) {
          std::string s = v;
          s.erase(std::remove_if(s.begin(), s.end(), [](char ch) { return ch == '[' || ch == ']'; }),
                  s.end());
          std::stringstream parts(s);
          for (std::string part; std::getline(parts, part, ',');) {
            if (!part.empty()) list.push_back(scalar_value(part));
          }
        }
        doc[name] = list;
      } else {
        doc[name] = scalar_value(values.back());
      }
    }
    return doc.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError("config", e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config", "top level must be an object");

    std::vector<std::string> selected;
    for (const CLI::App* sub : root_->get_subcommands()) selected.push_back(sub->get_name());

    std::vector<CLI::ConfigItem> items;
    const auto add = [&](const std::string& parent, const std::string& key, const json& value) {
      CLI::ConfigItem item;
      if (!parent.empty()) item.parents = {parent};
      item.name = key;
      std::replace(item.name.begin(), item.name.end(), '_', '-');
      if (value.is_array()) {
        for (const auto& element : value) item.inputs.push_back(render(element));
      } else {
        item.inputs.push_back(render(value));
      }
      items.push_back(std::move(item));
    };
    for (const auto& [key, value] : doc.items()) {
      const bool names_subcommand =
          value.is_object() && std::find(selected.begin(), selected.end(), key) != selected.end();
      if (names_subcommand) {
        for (const auto& [inner, inner_value] : value.items()) add(key, inner, inner_value);
      } else if (value.is_object()) {
        continue;  // section for a subcommand that was not invoked
      } else {
        for (const auto& parent : selected) add(parent, key, value);
      }
    }
    return items;
  }

private:
  static std::string render(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    return value.dump();
  }

  const CLI::App* root_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "cannot create directory " + dir.string());
  }
}

/// `--data` may name a generated directory or the feature CSV inside one.
fs::path features_path(const fs::path& data) {
  return fs::is_directory(data) ? data / "features.csv" : data;
}

fs::path data_directory(const fs::path& data) {
  return fs::is_directory(data) ? data : data.parent_path();
}

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  json config = json::object();
  json inputs = json::object();
  json outputs = json::object();
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  json extra = json::object();

  json to_json(bool complete, const std::string& error) const {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    json doc;
    doc["command"] = command;
    doc["version"] = std::string(kVersion);
    doc["seed"] = seed;
    doc["config"] = config;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    for (const auto& [key, value] : extra.items()) doc[key] = value;
    doc["duration_seconds"] = elapsed.count();
    doc["complete"] = complete;
    if (!error.empty()) doc["error"] = error;
    return doc;
  }

  void write(const fs::path& dir, bool complete, const std::string& error = {}) const {
    write_text(dir / "manifest.json", to_json(complete, error).dump(2) + "\n");
  }
};

struct GenDataArgs {
  SplitSpec spec;
  std::string out;
};

struct EquidistantArgs {
  std::string prototypes;
  double alpha = 1.5;
  double epsilon = 1e-8;
  int max_iterations = 10'000;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  TrainingConfig config;
  std::string mode = "two-stage";
  std::string transport = "verbatim";
  std::string policy = "novel_only";
  std::string alignment = "rotate";
  std::vector<int> hidden{64, 64};
  int latent_dim = 16;
  std::string data;
  std::string out;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string truth;
  int k = 0;
  int restarts = 10;
  std::uint64_t seed = 0;
  std::string out;
};

CLI::Validator alpha_check() {
  return CLI::Validator(
      [](std::string& text) -> std::string {
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size()) return "alpha must be a number";
        if (!(value > 1.0) || !std::isfinite(value)) return "alpha must exceed 1 (got " + text + ")";
        return {};
      },
      "ALPHA>1");
}

void add_seed(CLI::App* sub, std::uint64_t& seed) {
  sub->add_option("--seed", seed, "Random seed (falls back to $" + std::string(kSeedEnv) + ")")
      ->envname(kSeedEnv)
      ->capture_default_str();
}

json resolved_config(const CLI::Config& formatter, const CLI::App* sub) {
  return json::parse(formatter.to_config(sub, true, false, ""));
}

int cmd_gen_data(const GenDataArgs& args, json config, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "gen-data";
  manifest.seed = args.spec.seed;
  manifest.config = std::move(config);
  const fs::path dir(args.out);
  manifest.outputs = {{"features", (dir / "features.csv").string()},
                      {"truth", (dir / "truth.csv").string()},
                      {"manifest", (dir / "manifest.json").string()}};
  manifest.extra["split"] = {{"total_classes", args.spec.total_classes},
                             {"labeled_classes", args.spec.labeled_classes},
                             {"novel_classes", args.spec.total_classes - args.spec.labeled_classes},
                             {"samples_per_class", args.spec.samples_per_class},
                             {"dim", args.spec.dim},
                             {"cluster_std", args.spec.cluster_std},
                             {"mean_separation", args.spec.mean_separation}};

  const GeneratedData generated = generate_mixture(args.spec);
  ensure_directory(dir);
  manifest.write(dir, false);
  save_csv(generated.dataset, dir / "features.csv");
  save_sidecar(generated.truth, dir / "truth.csv");
  manifest.extra["rows"] = generated.dataset.size();
  manifest.write(dir, true);
  out << "wrote " << generated.dataset.size() << " rows to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_equidistant(const EquidistantArgs& args, json config, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "equidistant";
  manifest.seed = args.seed;
  manifest.config = std::move(config);
  manifest.inputs = {{"prototypes", args.prototypes}};
  const fs::path dir(args.out);
  manifest.outputs = {{"anchors", (dir / "anchors.csv").string()},
                      {"diagnostics", (dir / "diagnostics.json").string()},
                      {"manifest", (dir / "manifest.json").string()}};

  const PointConfiguration prototypes(load_points_csv(args.prototypes));
  SolverSettings settings;
  settings.epsilon = args.epsilon;
  settings.max_iterations = args.max_iterations;
  settings.seed = args.seed;
  const SolverResult result = get_equidistant_points(prototypes, args.alpha, settings);

  ensure_directory(dir);
  manifest.write(dir, false);
  save_points_csv(result.anchors.points(), dir / "anchors.csv");
  json diagnostics;
  diagnostics["iterations"] = result.iterations;
  diagnostics["final_stress"] = result.final_stress;
  diagnostics["converged"] = result.converged;
  diagnostics["final_displacement"] = result.final_displacement;
  diagnostics["target_distance"] = result.delta.target();
  diagnostics["max_relative_deviation"] =
      max_relative_deviation(result.anchors, result.delta.target());
  write_text(dir / "diagnostics.json", diagnostics.dump(2) + "\n");
  manifest.write(dir, true);
  out << "iterations " << result.iterations << ", stress " << result.final_stress
      << (result.converged ? "" : " (not converged)") << "\n";
  return kExitOk;
}

int novel_classes_from_manifest(const fs::path& data_dir) {
  const fs::path path = data_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::InvalidArgument,
                "--novel-classes not given and no data manifest at " + path.string());
  }
  try {
    const json doc = json::parse(in);
    return doc.at("split").at("novel_classes").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

int cmd_train(TrainArgs args, json config, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "train";
  manifest.seed = args.config.seed;
  manifest.config = std::move(config);
  const fs::path dir(args.out);
  const fs::path data_file = features_path(args.data);
  manifest.inputs = {{"features", data_file.string()}};
  manifest.outputs = {{"checkpoint", (dir / "checkpoint.json").string()},
                      {"trace", (dir / "trace.jsonl").string()},
                      {"manifest", (dir / "manifest.json").string()}};

  ensure_directory(dir);
  manifest.write(dir, false);
  try {
    TrainingConfig& cfg = args.config;
    cfg.regime = parse_regime(args.mode);
    cfg.transport.mode = parse_transport_mode(args.transport);
    cfg.prototype_policy = parse_prototype_policy(args.policy);
    cfg.anchor_alignment = parse_anchor_alignment(args.alignment);
    cfg.hidden_widths.assign(args.hidden.begin(), args.hidden.end());
    cfg.latent_dim = args.latent_dim;
    if (cfg.novel_classes <= 0) cfg.novel_classes = novel_classes_from_manifest(data_directory(args.data));
    manifest.config["novel-classes"] = cfg.novel_classes;
    cfg.validate();

    const Dataset dataset = load_csv(data_file);
    const auto [labeled, unlabeled] = split(dataset);

    const fs::path phase_one = dir / "phase1_checkpoint.json";
    if (cfg.regime == Regime::two_stage) manifest.outputs["phase1_checkpoint"] = phase_one.string();
    const TrainingResult result =
        cfg.regime == Regime::two_stage
            ? train_two_stage(labeled, unlabeled, cfg,
                              [&](const ModelBundle& model) { save_checkpoint(model, phase_one); })
            : train_single_stage(labeled, unlabeled, cfg);

    write_text(dir / "trace.jsonl", result.trace.to_jsonl());
    save_checkpoint(result.model, dir / "checkpoint.json");
    manifest.extra["epochs_recorded"] = result.trace.epochs.size();
    manifest.write(dir, true);
    out << "trained " << result.trace.epochs.size() << " epochs; checkpoint in " << dir.string()
        << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    manifest.write(dir, false, e.what());
    throw;
  }
}

int cmd_eval(const EvalArgs& args, json config, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "eval";
  manifest.seed = args.seed;
  manifest.config = std::move(config);
  const fs::path data_file = features_path(args.data);
  const fs::path truth_file =
      args.truth.empty() ? data_directory(args.data) / "truth.csv" : fs::path(args.truth);
  const fs::path dir(args.out);
  manifest.inputs = {{"checkpoint", args.checkpoint},
                     {"features", data_file.string()},
                     {"truth", truth_file.string()}};
  manifest.outputs = {{"metrics", (dir / "metrics.json").string()},
                      {"manifest", (dir / "manifest.json").string()}};

  const ModelBundle model = load_checkpoint(args.checkpoint);
  const Dataset dataset = load_csv(data_file);
  const EvaluationSidecar sidecar = load_sidecar(truth_file);
  const UnlabeledView unlabeled = split(dataset).second;
  if (unlabeled.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no unlabeled rows");

  const auto truth_by_id = sidecar.by_id();
  std::vector<int> truth;
  truth.reserve(static_cast<std::size_t>(unlabeled.size()));
  for (const auto id : unlabeled.ids()) {
    const auto it = truth_by_id.find(id);
    if (it == truth_by_id.end()) {
      throw Error(ErrorCode::MissingSidecar, "no ground truth for id " + std::to_string(id));
    }
    truth.push_back(it->second);
  }

  const int k = args.k > 0 ? args.k : static_cast<int>(sidecar.distinct_classes());
  const Eigen::MatrixXd latents = unlabeled_latents(model, unlabeled);
  std::vector<int> predicted = kmeans_infer(latents, k, args.seed, args.restarts);
  const ClusteringReport report = make_report(std::move(predicted), std::move(truth), k, args.seed);

  ensure_directory(dir);
  manifest.config["k"] = k;
  manifest.write(dir, false);
  write_text(dir / "metrics.json", report.to_json() + "\n");
  manifest.write(dir, true);
  out << "ca " << report.ca << ", nmi " << report.nmi << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Novel class discovery with equidistant anchors and spacing loss", "spacing-ncd"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON file supplying any flag; explicit flags win");
  const auto formatter = std::make_shared<JsonConfig>(&app);
  app.config_formatter(formatter);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a seeded Gaussian-mixture dataset");
  gen_cmd->add_option("--classes", gen.spec.total_classes, "Total classes")->capture_default_str();
  gen_cmd->add_option("--labeled", gen.spec.labeled_classes, "Classes that keep their labels")
      ->capture_default_str();
  gen_cmd->add_option("--per-class", gen.spec.samples_per_class, "Samples per class")
      ->capture_default_str();
  gen_cmd->add_option("--dim", gen.spec.dim, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--std", gen.spec.cluster_std, "Cluster standard deviation")
      ->capture_default_str();
  gen_cmd->add_option("--separation", gen.spec.mean_separation, "Minimum distance between means")
      ->capture_default_str();
  add_seed(gen_cmd, gen.spec.seed);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  EquidistantArgs eq;
  auto* eq_cmd = app.add_subcommand("equidistant", "Solve for equidistant anchors");
  eq_cmd->add_option("--prototypes", eq.prototypes, "Prototype CSV (id,f0,...)")
      ->required()
      ->check(CLI::ExistingFile);
  eq_cmd->add_option("--alpha", eq.alpha, "Spacing factor, > 1")
      ->check(alpha_check())
      ->capture_default_str();
  eq_cmd->add_option("--epsilon", eq.epsilon, "Displacement tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eq_cmd->add_option("--max-iter", eq.max_iterations, "Iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_seed(eq_cmd, eq.seed);
  eq_cmd->add_option("--out", eq.out, "Output directory")->required();

  TrainArgs tr;
  TrainingConfig& cfg = tr.config;
  auto* tr_cmd = app.add_subcommand("train", "Train a discovery model");
  tr_cmd->add_option("--mode", tr.mode, "Training regime")
      ->check(CLI::IsMember({"single", "two-stage"}))
      ->capture_default_str();
  tr_cmd->add_option("--data", tr.data, "Dataset directory or feature CSV")
      ->required()
      ->check(CLI::ExistingPath);
  tr_cmd->add_option("--out", tr.out, "Run directory")->required();
  add_seed(tr_cmd, cfg.seed);
  tr_cmd->add_option("--epochs", cfg.epochs, "Discovery epochs")->capture_default_str();
  tr_cmd->add_option("--labeled-epochs", cfg.labeled_epochs,
                     "Phase-1 epochs in two-stage mode (0: same as --epochs)")
      ->capture_default_str();
  tr_cmd->add_option("--batch-size", cfg.batch_size, "Minibatch size")->capture_default_str();
  tr_cmd->add_option("--lr", cfg.learning_rate, "SGD learning rate")->capture_default_str();
  tr_cmd->add_option("--alpha", cfg.alpha, "Spacing factor, > 1")
      ->check(alpha_check())
      ->capture_default_str();
  tr_cmd->add_option("--epsilon", cfg.epsilon, "Anchor solver tolerance")->capture_default_str();
  tr_cmd->add_option("--max-iter", cfg.solver_max_iterations, "Anchor solver iteration cap")
      ->capture_default_str();
  tr_cmd->add_option("--rho", cfg.rho, "Cosine threshold for pairwise pseudo-labels")
      ->capture_default_str();
  tr_cmd->add_option("--transport", tr.transport, "Prototype transport rule")
      ->check(CLI::IsMember({"verbatim", "convex"}))
      ->capture_default_str();
  tr_cmd->add_option("--lambda", cfg.transport.lambda, "Latent share in convex transport")
      ->capture_default_str();
  tr_cmd->add_option("--anchor-alignment", tr.alignment, "Placement of anchors relative to prototypes")
      ->check(CLI::IsMember({"index", "rotate", "rotate_translate"}))
      ->capture_default_str();
  tr_cmd->add_option("--init-restarts", cfg.prototype_init_restarts,
                     "k-means runs for the initial prototypes")
      ->capture_default_str();
  tr_cmd->add_option("--prototype-policy", tr.policy, "Prototype count in single-stage mode")
      ->check(CLI::IsMember({"novel_only", "all_classes"}))
      ->capture_default_str();
  tr_cmd->add_option("--w-spacing", cfg.weights.spacing, "Spacing loss weight")
      ->capture_default_str();
  tr_cmd->add_option("--w-ce", cfg.weights.cross_entropy, "Cross-entropy weight")
      ->capture_default_str();
  tr_cmd->add_option("--w-pairwise", cfg.weights.pairwise, "Pairwise pseudo-label weight")
      ->capture_default_str();
  tr_cmd->add_option("--w-consistency", cfg.weights.consistency, "Consistency weight")
      ->capture_default_str();
  tr_cmd->add_option("--augment-sigma", cfg.augment_noise_sigma,
                     "Augmentation noise as a fraction of feature std")
      ->capture_default_str();
  tr_cmd->add_flag("--recompute-anchors", cfg.recompute_anchors_each_epoch,
                   "Re-solve anchors at every epoch");
  tr_cmd->add_option("--novel-classes", cfg.novel_classes,
                     "Novel class count (default: read from the data manifest)");
  tr_cmd->add_option("--hidden", tr.hidden, "Hidden layer widths")
      ->delimiter(',')
      ->capture_default_str();
  tr_cmd->add_option("--latent-dim", tr.latent_dim, "Latent dimension z")->capture_default_str();

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Cluster unlabeled latents and score them");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "Model checkpoint JSON")
      ->required()
      ->check(CLI::ExistingFile);
  ev_cmd->add_option("--data", ev.data, "Dataset directory or feature CSV")
      ->required()
      ->check(CLI::ExistingPath);
  ev_cmd->add_option("--truth", ev.truth, "Evaluation sidecar (default: truth.csv beside the data)");
  ev_cmd->add_option("--k", ev.k, "Cluster count (default: distinct sidecar classes)");
  ev_cmd->add_option("--restarts", ev.restarts, "k-means restarts")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_seed(ev_cmd, ev.seed);
  ev_cmd->add_option("--out", ev.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, resolved_config(*formatter, gen_cmd), out);
    if (eq_cmd->parsed()) return cmd_equidistant(eq, resolved_config(*formatter, eq_cmd), out);
    if (tr_cmd->parsed()) return cmd_train(tr, resolved_config(*formatter, tr_cmd), out);
    if (ev_cmd->parsed()) return cmd_eval(ev, resolved_config(*formatter, ev_cmd), out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace spacing::cli
