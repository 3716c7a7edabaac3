#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "berd/checkpoint.hpp"
#include "berd/corpus.hpp"
#include "berd/errors.hpp"
#include "berd/evaluation.hpp"
#include "berd/log.hpp"
#include "berd/selfcheck.hpp"
#include "berd/synthetic.hpp"
#include "berd/training.hpp"
#include "manifest.hpp"

namespace berd::cli {

namespace fs = std::filesystem;

std::size_t default_threads() {
  if (const char* env = std::getenv("BERD_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return 1;
}

namespace {

struct Common {
  bool quiet = false;
  bool verbose = false;
};

struct TrainArgs {
  std::string config, train, dev, out, variant, precomputed;
  std::optional<std::size_t> epochs, batch_size, threads;
  std::optional<double> lr, dropout;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string checkpoint, corpus, out, variant, constraints, precomputed;
  bool buckets = false;
  bool oracle_roles = false;
  bool json = false;
  std::optional<std::size_t> threads;
};

struct PredictArgs {
  std::string checkpoint, corpus, out, variant, precomputed;
  std::optional<std::size_t> threads;
};

struct SynthArgs {
  std::string profile = "default";
  std::uint64_t seed = 0;
  std::string out, constraints_out;
  std::optional<std::size_t> events;
};

struct GradcheckArgs {
  std::size_t instantiations = 100;
  std::uint64_t seed = 0;
  double tolerance = kGradCheckTolerance;
  std::string out;
};

nlohmann::ordered_json parse_ordered(const std::string& text) { return nlohmann::ordered_json::parse(text); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw ValidationError(std::string(what) + " not found: " + path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ValidationError("cannot create directory " + dir);
}

struct LoadedModel {
  Checkpoint checkpoint;
  std::optional<BerdModel<float>> model;
};

LoadedModel load_model(const std::string& checkpoint, const std::string& precomputed) {
  require_file(checkpoint, "checkpoint");
  LoadedModel lm;
  lm.checkpoint = load_checkpoint(checkpoint);
  lm.model.emplace(model_from_checkpoint(lm.checkpoint));
  if (lm.checkpoint.config.model.encoder == EncoderKind::kPrecomputed) {
    if (precomputed.empty()) {
      throw ValidationError("checkpoint uses precomputed hidden states; pass --precomputed");
    }
    require_file(precomputed, "hidden-state file");
    lm.model->set_encoder(load_precomputed<float>(precomputed, lm.checkpoint.config.model.hidden_dim));
  } else if (!precomputed.empty()) {
    throw ValidationError("--precomputed given but the checkpoint uses the reference encoder");
  }
  return lm;
}

// Decoding mode for a requested variant; the decoder layout must match.
ContextMode variant_mode(const BerdModel<float>& model, const std::string& requested) {
  if (requested.empty()) return ContextMode::kPredicted;
  const Variant v = parse_variant(requested);
  if (variant_directions(v) != variant_directions(model.config().variant)) {
    throw ValidationError("variant '" + requested + "' does not match the checkpoint's decoder layout ('" +
                          std::string(variant_name(model.config().variant)) + "')");
  }
  if (variant_is_recurrent(v) && !model.recurrent()) {
    throw ValidationError("checkpoint was trained without recurrence; it cannot run '" + requested + "'");
  }
  return variant_is_recurrent(v) ? ContextMode::kPredicted : ContextMode::kNone;
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  RunConfig base;
  base.training.threads = default_threads();
  RunConfig rc = a.config.empty() ? base : (require_file(a.config, "config"), load_run_config(a.config, base));
  if (!a.variant.empty()) rc.model.variant = parse_variant(a.variant);
  if (a.epochs) rc.training.epochs = *a.epochs;
  if (a.batch_size) rc.training.batch_size = *a.batch_size;
  if (a.threads) rc.training.threads = *a.threads;
  if (a.lr) rc.training.adam.learning_rate = *a.lr;
  if (a.dropout) rc.training.dropout = *a.dropout;
  if (a.seed) rc.training.seed = *a.seed;
  if (!a.precomputed.empty()) rc.model.encoder = EncoderKind::kPrecomputed;
  validate(rc.model);
  validate(rc.training);
  if (rc.model.encoder == EncoderKind::kPrecomputed && a.precomputed.empty()) {
    throw ValidationError("config selects precomputed hidden states; pass --precomputed");
  }

  require_file(a.train, "training corpus");
  const Corpus train_corpus = load_corpus(a.train);
  std::optional<Corpus> dev;
  if (!a.dev.empty()) {
    require_file(a.dev, "dev corpus");
    dev = load_corpus(a.dev);
  }
  ensure_dir(a.out);

  Manifest manifest("train", args);
  manifest.set_config(parse_ordered(run_config_to_json(rc)));
  manifest.set_seed(rc.training.seed);
  manifest.add_input("train", a.train);
  if (dev) manifest.add_input("dev", a.dev);
  if (!a.config.empty()) manifest.add_input("config", a.config);

  BerdModel<float> model(rc.model, ModelVocabulary::from_corpus(train_corpus), rc.training.seed);
  if (!a.precomputed.empty()) {
    require_file(a.precomputed, "hidden-state file");
    model.set_encoder(load_precomputed<float>(a.precomputed, rc.model.hidden_dim));
    manifest.add_input("precomputed", a.precomputed);
  }
  out << "training " << variant_name(rc.model.variant) << ": " << model.parameter_count()
      << " parameters, " << train_corpus.event_count() << " events\n";
  const TrainingResult result =
      train(model, train_corpus, dev ? &*dev : nullptr, rc.training, [&](const EpochRecord& e) {
        out << "epoch " << e.epoch << " loss " << e.train_loss;
        if (e.dev) out << " dev F1 " << 100.0 * e.dev->f1();
        out << '\n' << std::flush;
      });

  const fs::path dir(a.out);
  save_checkpoint(dir / "checkpoint.bin", model, rc);
  write_text(dir / "history.csv", history_csv(result.history));
  write_text(dir / "config.json", run_config_to_json(rc) + "\n");
  manifest.add_artifact("checkpoint", dir / "checkpoint.bin");
  manifest.add_artifact("history", dir / "history.csv");
  manifest.add_artifact("config", dir / "config.json");
  manifest.write(dir / "manifest.json");
  out << "best epoch " << result.best_epoch << "; wrote " << (dir / "checkpoint.bin").string() << '\n';
  return kSuccess;
}

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  LoadedModel lm = load_model(a.checkpoint, a.precomputed);
  const BerdModel<float>& model = *lm.model;
  const ContextMode mode = variant_mode(model, a.variant);
  const std::size_t threads = a.threads.value_or(default_threads());
  require_file(a.corpus, "corpus");
  const Corpus corpus = load_corpus(a.corpus);
  std::vector<UniqueRoleConstraint> constraints;
  if (!a.constraints.empty()) {
    require_file(a.constraints, "constraint file");
    constraints = load_constraints(a.constraints);
  }

  EvaluationReport report;
  report.variant = a.variant.empty() ? std::string(variant_name(model.config().variant)) : a.variant;
  const auto labels = predict_labels(model, corpus, mode, threads);
  report.sliced = sliced_eval(labels, corpus);
  if (!a.constraints.empty()) report.violation_rate = constraint_violation_rate(labels, corpus, constraints);
  if (a.oracle_roles) {
    OracleRoleReport o;
    o.predicted_context = report.sliced.overall;
    o.gold_context = score(predict_labels(model, corpus,
                                          mode == ContextMode::kNone ? ContextMode::kNone : ContextMode::kGold,
                                          threads),
                           corpus);
    report.oracle = o;
  }

  const std::string json = report_to_json(report);
  out << (a.json ? json + "\n" : report_to_table(report, a.buckets));
  if (!a.out.empty()) {
    ensure_dir(a.out);
    const fs::path dir(a.out);
    Manifest manifest("eval", args);
    manifest.set_config(parse_ordered(run_config_to_json(lm.checkpoint.config)));
    manifest.set_seed(lm.checkpoint.seed);
    manifest.add_input("checkpoint", a.checkpoint);
    manifest.add_input("corpus", a.corpus);
    if (!a.constraints.empty()) manifest.add_input("constraints", a.constraints);
    write_text(dir / "report.json", json + "\n");
    write_text(dir / "report.txt", report_to_table(report, true));
    manifest.add_artifact("report", dir / "report.json");
    manifest.add_artifact("table", dir / "report.txt");
    manifest.write(dir / "manifest.json");
  }
  return kSuccess;
}

int cmd_predict(const PredictArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  LoadedModel lm = load_model(a.checkpoint, a.precomputed);
  const BerdModel<float>& model = *lm.model;
  const ContextMode mode = variant_mode(model, a.variant);
  require_file(a.corpus, "corpus");
  const Corpus corpus = load_corpus(a.corpus);
  const auto records = predict_corpus(model, corpus, mode, a.threads.value_or(default_threads()));
  std::vector<Direction> directions;
  for (std::size_t d = 0; d < model.decoder_count(); ++d) directions.push_back(model.direction(d));
  std::string text;
  for (const auto& r : records) text += prediction_to_json(r, model.vocab(), directions) + "\n";
  write_text(a.out, text);

  Manifest manifest("predict", args);
  manifest.set_config(parse_ordered(run_config_to_json(lm.checkpoint.config)));
  manifest.set_seed(lm.checkpoint.seed);
  manifest.add_input("checkpoint", a.checkpoint);
  manifest.add_input("corpus", a.corpus);
  manifest.add_artifact("predictions", a.out);
  manifest.write(a.out + ".manifest.json");
  out << "wrote " << records.size() << " predictions to " << a.out << '\n';
  return kSuccess;
}

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  SyntheticProfile profile = resolve_profile(a.profile);
  if (a.events) profile.event_count = *a.events;
  const Corpus corpus = generate_synthetic(profile, a.seed);
  save_corpus(corpus, a.out);

  Manifest manifest("synth", args);
  manifest.set_config(parse_ordered(profile_to_json(profile)));
  manifest.set_seed(a.seed);
  manifest.add_artifact("corpus", a.out);
  if (!a.constraints_out.empty()) {
    auto list = nlohmann::ordered_json::array();
    if (profile.unique_roles) {
      for (const auto& type : synthetic_event_types(profile.event_type_count)) {
        list.push_back({{"event_type", type}, {"unique_roles", synthetic_unique_roles()}});
      }
    }
    write_text(a.constraints_out, list.dump(2) + "\n");
    manifest.add_artifact("constraints", a.constraints_out);
  }
  manifest.write(a.out + ".manifest.json");
  out << "wrote " << corpus.event_count() << " events to " << a.out << '\n';
  return kSuccess;
}

int cmd_gradcheck(const GradcheckArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  GradCheckSuite suite = kernel_gradchecks(a.instantiations, a.seed);
  suite.entries.push_back(model_gradcheck(a.seed));
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %14s %14s  %s\n", "check", "instantiations", "max_rel_error", "status");
  out << line;
  for (const auto& e : suite.entries) {
    std::snprintf(line, sizeof line, "%-16s %14zu %14.3e  %s\n", e.name.c_str(), e.instantiations,
                  e.worst.max_rel_error, e.worst.passed(a.tolerance) ? "ok" : "FAIL");
    out << line;
  }
  const bool ok = suite.passed(a.tolerance);
  if (!a.out.empty()) {
    ensure_dir(a.out);
    auto list = nlohmann::ordered_json::array();
    for (const auto& e : suite.entries) {
      list.push_back({{"check", e.name},
                      {"instantiations", e.instantiations},
                      {"max_rel_error", e.worst.max_rel_error},
                      {"finite", e.worst.finite},
                      {"passed", e.worst.passed(a.tolerance)}});
    }
    const fs::path dir(a.out);
    write_text(dir / "gradcheck.json", list.dump(2) + "\n");
    Manifest manifest("gradcheck", args);
    manifest.set_config({{"instantiations", a.instantiations}, {"tolerance", a.tolerance}});
    manifest.set_seed(a.seed);
    manifest.add_artifact("results", dir / "gradcheck.json");
    manifest.write(dir / "manifest.json");
  }
  out << (ok ? "all gradient checks passed\n" : "gradient check FAILED\n");
  return ok ? kSuccess : kCheckFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entity-level bidirectional recurrent decoding for event argument extraction", "berd"};
  app.require_subcommand(1);
  Common common;
  app.add_flag("-q,--quiet", common.quiet, "Suppress warnings");
  app.add_flag("-v,--verbose", common.verbose, "Print progress information");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model with teacher forcing");
  train_cmd->add_option("--config", ta.config, "Flat JSON config file");
  train_cmd->add_option("--train", ta.train, "Training corpus (JSONL)")->required();
  train_cmd->add_option("--dev", ta.dev, "Dev corpus for model selection (JSONL)");
  train_cmd->add_option("--out", ta.out, "Output directory")->required();
  train_cmd->add_option("--variant", ta.variant, "berd, forward, backward, forward-x2, backward-x2, no-recurrence");
  train_cmd->add_option("--epochs", ta.epochs);
  train_cmd->add_option("--batch-size", ta.batch_size);
  train_cmd->add_option("--lr", ta.lr, "Learning rate");
  train_cmd->add_option("--dropout", ta.dropout);
  train_cmd->add_option("--seed", ta.seed);
  train_cmd->add_option("--threads", ta.threads, "Worker threads (default: $BERD_THREADS or 1)");
  train_cmd->add_option("--precomputed", ta.precomputed, "Hidden-state file replacing the reference encoder");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a corpus");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--corpus", ea.corpus)->required();
  eval_cmd->add_option("--out", ea.out, "Directory for report.json, report.txt and the manifest");
  eval_cmd->add_option("--variant", ea.variant, "Decode as this variant (layout must match)");
  eval_cmd->add_flag("--buckets", ea.buckets, "Show entity-count bucket rows");
  eval_cmd->add_option("--constraints", ea.constraints, "Unique-role constraint file (JSON)");
  eval_cmd->add_flag("--oracle-roles", ea.oracle_roles, "Also decode with gold contextual roles");
  eval_cmd->add_flag("--json", ea.json, "Print the JSON report instead of the table");
  eval_cmd->add_option("--threads", ea.threads);
  eval_cmd->add_option("--precomputed", ea.precomputed);

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "Write role predictions as JSONL");
  predict_cmd->add_option("--checkpoint", pa.checkpoint)->required();
  predict_cmd->add_option("--corpus", pa.corpus)->required();
  predict_cmd->add_option("--out", pa.out)->required();
  predict_cmd->add_option("--variant", pa.variant);
  predict_cmd->add_option("--threads", pa.threads);
  predict_cmd->add_option("--precomputed", pa.precomputed);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("--profile", sa.profile, "Built-in profile name or JSON file")->capture_default_str();
  synth_cmd->add_option("--seed", sa.seed)->capture_default_str();
  synth_cmd->add_option("--events", sa.events, "Override the profile's event count");
  synth_cmd->add_option("--out", sa.out)->required();
  synth_cmd->add_option("--constraints-out", sa.constraints_out, "Also write the unique-role constraints");

  GradcheckArgs ga;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad_cmd->add_option("--instantiations", ga.instantiations)->capture_default_str();
  grad_cmd->add_option("--seed", ga.seed)->capture_default_str();
  grad_cmd->add_option("--tolerance", ga.tolerance)->capture_default_str();
  grad_cmd->add_option("--out", ga.out, "Directory for results and the manifest");

  std::vector<std::string> argv_store{"berd"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  const log::Level previous = log::level();
  log::set_level(common.quiet ? log::Level::kQuiet : common.verbose ? log::Level::kInfo : log::Level::kWarn);
  int code = kSuccess;
  try {
    if (train_cmd->parsed()) code = cmd_train(ta, args, out);
    if (eval_cmd->parsed()) code = cmd_eval(ea, args, out);
    if (predict_cmd->parsed()) code = cmd_predict(pa, args, out);
    if (synth_cmd->parsed()) code = cmd_synth(sa, args, out);
    if (grad_cmd->parsed()) code = cmd_gradcheck(ga, args, out);
  } catch (const NumericError& e) {
    err << "berd: numeric failure: " << e.what() << '\n';
    code = kNumericError;
  } catch (const std::exception& e) {
    err << "berd: " << e.what() << '\n';
    code = kUsageError;
  }
  log::set_level(previous);
  return code;
}

}  // namespace berd::cli
