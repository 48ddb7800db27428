// Command-line front end: synthetic data, preprocessing, training,
// evaluation, participant aggregation, checkpoint inspection and the fusion
// comparison table.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depest/checkpoint.hpp"
#include "depest/config.hpp"
#include "depest/errors.hpp"
#include "depest/pipeline.hpp"
#include "depest/synth.hpp"

namespace fs = std::filesystem;
using namespace depest;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

struct CommonOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> modality;
  std::optional<std::string> fusion;
  std::optional<double> sam_rho;
  bool no_gb = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "random seed (overrides train.seed)");
  cmd->add_option("--modality", o.modality, "a, v, t, av or avt")
      ->check(CLI::IsMember({"a", "v", "t", "av", "avt"}));
  cmd->add_option("--fusion", o.fusion, "fusion method")
      ->check(CLI::IsMember({"mult", "concat", "median", "max", "sum", "mean", "atten", "subatten"}));
  cmd->add_option("--sam-rho", o.sam_rho, "SAM neighborhood radius");
  cmd->add_flag("--no-gb", o.no_gb, "drop gender-balancing augmented sessions");
}

config::RunConfig resolve_config(const CommonOptions& o) {
  config::KeyValues kv = o.config ? config::KeyValues::load(*o.config) : config::KeyValues{};
  if (o.seed) kv.set("train.seed", std::to_string(*o.seed));
  if (o.modality) kv.set("model.modalities", *o.modality);
  if (o.fusion) kv.set("model.fusion", *o.fusion);
  if (o.sam_rho) {
    std::ostringstream s;
    s << std::setprecision(17) << *o.sam_rho;
    kv.set("train.sam_rho", s.str());
  }
  if (o.no_gb) kv.set("data.gender_balance", "false");
  return config::resolve(kv);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

int run_synth(const fs::path& out_dir, std::uint64_t seed, std::size_t participants, double min_d, double max_d) {
  synth::SynthConfig cfg;
  cfg.seed = seed;
  cfg.participants = participants;
  cfg.min_duration_s = min_d;
  cfg.max_duration_s = max_d;
  const auto manifest = synth::write_synthetic_corpus(cfg, out_dir);
  std::cout << "wrote " << manifest.entries.size() << " participants to " << (out_dir / "manifest.tsv").string()
            << "\n";
  return kOk;
}

int run_preprocess(const CommonOptions& o, const fs::path& manifest, const fs::path& out_dir) {
  const auto cfg = resolve_config(o);
  const std::size_t n = pipeline::preprocess(manifest, cfg, out_dir);
  std::cout << "wrote " << n << " clips to " << out_dir.string() << "\n";
  return kOk;
}

int run_train(const CommonOptions& o, const fs::path& clips_dir, const fs::path& out_dir,
              const std::vector<std::string>& transfers) {
  const auto cfg = resolve_config(o);
  const auto clips = data::read_clips(clips_dir);
  fs::create_directories(out_dir);
  model::Model m(cfg.model, cfg.seed);
  for (const auto& t : transfers) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("--transfer expects PREFIX=CHECKPOINT, got '" + t + "'");
    const auto src = io::load_checkpoint(t.substr(eq + 1));
    nn::ParameterStore store;
    for (const auto& [name, tensor] : src.tensors) store.add(name, tensor);
    const std::size_t n = m.load_prefix(store, t.substr(0, eq));
    std::cout << "transferred " << n << " tensors under '" << t.substr(0, eq) << "'\n";
  }
  const std::string config_text = config::to_text(cfg);
  write_text(out_dir / "config.txt", config_text);

  std::ofstream log(out_dir / "epochs.tsv", std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out_dir / "epochs.tsv").string());
  log << train::epoch_log_header() << '\n';
  std::cout << train::epoch_log_header() << '\n';
  train::Trainer trainer(m, cfg.train, cfg.seed);
  trainer.fit(clips, [&](const train::EpochStats& s) {
    const std::string line = train::format_epoch_line(s);
    log << line << '\n' << std::flush;
    std::cout << line << '\n' << std::flush;
  });
  io::save_checkpoint(out_dir / "model.ckpt",
                      io::make_checkpoint(m, static_cast<std::uint32_t>(trainer.epochs_done()), config_text));
  std::cout << "checkpoint: " << (out_dir / "model.ckpt").string() << "\n";
  return kOk;
}

int run_eval(const CommonOptions& o, const fs::path& clips_dir, const fs::path& checkpoint, const fs::path& out_dir) {
  const auto cfg = resolve_config(o);
  const auto ckpt = io::load_checkpoint(checkpoint);
  model::Model m(cfg.model, cfg.seed);
  io::apply_checkpoint(m, ckpt);
  const auto clips = data::read_clips(clips_dir);
  const auto preds = train::predict_clips(m, clips, cfg.train.batch_size);
  const auto metrics = train::clip_metrics(preds);
  fs::create_directories(out_dir);
  pipeline::write_predictions_tsv(out_dir / "predictions.tsv", preds);
  pipeline::write_metrics_tsv(out_dir / "clip_metrics.tsv", metrics);
  write_text(out_dir / "clip_metrics.json", pipeline::metrics_json(metrics, train::clip_gender_report(preds)));
  std::cout << "clips " << metrics.count << "  accuracy " << metrics.accuracy << "  f1 " << metrics.f1 << "  mae "
            << metrics.mae << "  rmse " << metrics.rmse << "\n";
  return kOk;
}

int run_aggregate(const fs::path& predictions, const fs::path& out_dir) {
  const auto preds = pipeline::read_predictions_tsv(predictions);
  const auto pairs = train::aggregate_participants(preds);
  const auto metrics = train::participant_metrics(pairs);
  const auto split = train::participant_gender_report(pairs);
  fs::create_directories(out_dir);
  pipeline::write_participants_tsv(out_dir / "participants.tsv", pairs);
  pipeline::write_metrics_tsv(out_dir / "participant_metrics.tsv", metrics);
  write_text(out_dir / "gender_split.tsv", pipeline::gender_table(split));
  write_text(out_dir / "participant_metrics.json", pipeline::metrics_json(metrics, split));
  std::cout << pipeline::gender_table(split);
  return kOk;
}

int run_inspect(const fs::path& checkpoint) {
  const auto c = io::load_checkpoint(checkpoint);
  std::cout << "version " << io::kCheckpointVersion << "\nconfig_hash " << std::hex << c.config_hash << std::dec
            << "\nepoch " << c.epoch << "\ntensors " << c.tensors.size() << "\n";
  std::size_t total = 0;
  for (const auto& [name, t] : c.tensors) {
    std::cout << name << '\t' << nn::shape_string(t.shape()) << '\n';
    total += t.size();
  }
  std::cout << "values " << total << "\n";
  return kOk;
}

int run_compare(const CommonOptions& o, const fs::path& clips_dir, const std::optional<fs::path>& test_dir,
                const fs::path& out_dir) {
  const auto cfg = resolve_config(o);
  const auto train_clips = data::read_clips(clips_dir);
  const auto test_clips = test_dir ? data::read_clips(*test_dir) : train_clips;
  std::vector<fusion::FusionMethod> methods = fusion::baseline_methods();
  methods.push_back(fusion::FusionMethod::atten);
  methods.push_back(fusion::FusionMethod::subatten);
  const std::vector<model::ModalitySet> sets{model::ModalitySet::av, model::ModalitySet::avt};
  const auto rows = train::compare_fusions(train_clips, test_clips, cfg.model, cfg.train, cfg.seed, methods, sets,
                                           [](const train::ComparisonRow& r) {
                                             std::cout << model::to_string(r.modalities) << '\t'
                                                       << fusion::to_string(r.method) << "\taccuracy "
                                                       << r.metrics.accuracy << '\n'
                                                       << std::flush;
                                           });
  fs::create_directories(out_dir);
  const std::string table = train::format_comparison_table(rows);
  write_text(out_dir / "fusion_comparison.tsv", table);
  std::cout << table;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal depression estimation toolkit"};
  app.require_subcommand(1);

  CommonOptions common;
  fs::path out_dir = ".";
  fs::path manifest, clips_dir, checkpoint, predictions;
  std::optional<fs::path> test_dir;
  std::vector<std::string> transfers;
  std::uint64_t synth_seed = 1;
  std::size_t participants = 20;
  double min_d = 160.0, max_d = 175.0;

  auto* synth_cmd = app.add_subcommand("synth-data", "generate a synthetic corpus and manifest");
  synth_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "random seed");
  synth_cmd->add_option("--participants", participants, "number of participants")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--min-duration", min_d, "shortest session in seconds");
  synth_cmd->add_option("--max-duration", max_d, "longest session in seconds");

  auto* pre_cmd = app.add_subcommand("preprocess", "cut manifest sessions into clip bundles");
  add_common(pre_cmd, common);
  pre_cmd->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  pre_cmd->add_option("--out-dir", out_dir, "clip bundle directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model on clip bundles");
  add_common(train_cmd, common);
  train_cmd->add_option("--clips", clips_dir, "clip bundle directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out-dir", out_dir, "run directory")->required();
  train_cmd->add_option("--transfer", transfers, "PREFIX=CHECKPOINT: initialize a branch from another run");

  auto* eval_cmd = app.add_subcommand("eval", "clip-level evaluation of a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--clips", clips_dir, "clip bundle directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out-dir", out_dir, "report directory")->required();

  auto* agg_cmd = app.add_subcommand("aggregate", "participant-level and gender-split reports");
  agg_cmd->add_option("--predictions", predictions, "predictions.tsv from eval")->required()->check(CLI::ExistingFile);
  agg_cmd->add_option("--out-dir", out_dir, "report directory")->required();

  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "print checkpoint tensor names and shapes");
  inspect_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);

  auto* cmp_cmd = app.add_subcommand("compare", "train every fusion method on AV and AVT and tabulate");
  add_common(cmp_cmd, common);
  cmp_cmd->add_option("--clips", clips_dir, "training clip bundles")->required()->check(CLI::ExistingDirectory);
  cmp_cmd->add_option("--test-clips", test_dir, "evaluation clip bundles (default: training clips)")
      ->check(CLI::ExistingDirectory);
  cmp_cmd->add_option("--out-dir", out_dir, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) return run_synth(out_dir, synth_seed, participants, min_d, max_d);
    if (*pre_cmd) return run_preprocess(common, manifest, out_dir);
    if (*train_cmd) return run_train(common, clips_dir, out_dir, transfers);
    if (*eval_cmd) return run_eval(common, clips_dir, checkpoint, out_dir);
    if (*agg_cmd) return run_aggregate(predictions, out_dir);
    if (*inspect_cmd) return run_inspect(checkpoint);
    if (*cmp_cmd) return run_compare(common, clips_dir, test_dir, out_dir);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}
