#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "hcvae/checkpoint.hpp"
#include "hcvae/dataset.hpp"
#include "hcvae/errors.hpp"
#include "hcvae/evaluation.hpp"
#include "hcvae/format.hpp"
#include "hcvae/model_gradcheck.hpp"
#include "hcvae/synth.hpp"
#include "hcvae/trainer.hpp"
#include "hcvae/wav.hpp"

namespace hcvae::cli {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kModes = {"none", "ci", "cij", "both"};
const std::vector<std::string> kAggregations = {"mean", "max"};
const std::vector<std::string> kNormalizations = {"global", "per-dim"};

// Given on the command line or in the config file.
bool is_explicit(const CLI::App* sub, const Context& ctx, const std::string& key) {
  return sub->get_option("--" + key)->count() > 0 || ctx.config_keys.count(sub->get_name() + "." + key) > 0;
}

Aggregation parse_aggregation(const std::string& s) { return s == "max" ? Aggregation::kMax : Aggregation::kMean; }

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("short write to " + path.string());
}

void add_spectrogram_flags(CLI::App* sub, SpectrogramConfig& s) {
  sub->add_option("--frame-size", s.frame_size, "STFT frame length in samples")->group("Features");
  sub->add_option("--hop", s.hop, "STFT hop in samples")->group("Features");
  sub->add_option("--mel-bins", s.mel_bins, "Mel filters")->group("Features");
  sub->add_option("--fmin", s.fmin, "Lowest mel edge in Hz")->group("Features");
  sub->add_option("--fmax", s.fmax, "Highest mel edge in Hz, 0 for Nyquist")->group("Features");
  sub->add_option("--log-floor", s.log_floor, "Power floor before the log")->group("Features");
  sub->add_option("--stack", s.stack, "Consecutive frames per feature vector")->group("Features");
}

const std::vector<std::string> kArchitectureKeys = {"frame-size", "hop",        "mel-bins",  "fmin",
                                                    "fmax",       "log-floor",  "stack",     "hidden-dim",
                                                    "enc-layers", "dec-layers", "latent-dim", "normalization",
                                                    "min-scale"};

void add_model_flags(CLI::App* sub, VaeConfig& a) {
  sub->add_option("--hidden-dim", a.hidden_dim, "Units per hidden layer")->group("Model");
  sub->add_option("--enc-layers", a.n_hidden_enc, "Encoder hidden layers")->group("Model");
  sub->add_option("--dec-layers", a.n_hidden_dec, "Decoder hidden layers")->group("Model");
  sub->add_option("--latent-dim", a.latent_dim, "Latent dimension")->group("Model");
}

void add_optimizer_flags(CLI::App* sub, TrainConfig& t, std::string& loss_csv) {
  sub->add_option("--epochs", t.epochs, "Training epochs")->group("Training");
  sub->add_option("--batch", t.batch_size, "Minibatch size")->group("Training");
  sub->add_option("--lr", t.lr, "Adam learning rate")->group("Training");
  sub->add_option("--beta", t.beta, "KL weight")->group("Training");
  sub->add_option("--seed", t.seed, "Seed for initialization, shuffling and noise")->group("Training");
  sub->add_option("--loss-csv", loss_csv, "Per-epoch loss CSV (empty: OUT with extension .loss.csv)")
      ->group("Training");
}

struct Corpus {
  std::vector<ClipEntry> entries;
  std::vector<LabeledClip> clips;
  int sample_rate = 0;
};

// Label and configuration checks run before any audio is decoded in bulk.
Corpus load_corpus(const fs::path& root, const SpectrogramConfig& spec, ConditionMode mode) {
  Corpus c;
  c.entries = scan_dataset(root);
  require_labels(c.entries, mode);
  c.sample_rate = read_wav(c.entries.front().path).sample_rate;
  spec.validate(c.sample_rate);
  c.clips = load_clips(c.entries, spec);
  for (const auto& clip : c.clips)
    if (clip.sample_rate != c.sample_rate)
      throw ConfigError(clip.clip_id + " is sampled at " + std::to_string(clip.sample_rate) + " Hz, expected " +
                        std::to_string(c.sample_rate) + " Hz");
  return c;
}

fs::path loss_csv_path(const fs::path& out, const std::string& flag) {
  if (!flag.empty()) return flag;
  fs::path p = out;
  return p.replace_extension(".loss.csv");
}

void write_training_outputs(const TrainResult& r, const fs::path& out, const fs::path& loss_csv) {
  save_checkpoint(r.checkpoint, out);
  auto f = open_output(loss_csv);
  write_loss_csv(f, r.trace);
  finish_output(f, loss_csv);
  const EpochLoss& first = r.trace.front();
  const EpochLoss& last = r.trace.back();
  std::printf("mode %s, %zu epochs: loss %.4f -> %.4f (recon %.4f, kl %.4f)\n",
              std::string(to_string(r.checkpoint.mode)).c_str(), last.epoch, first.loss, last.loss, last.recon,
              last.kl);
  std::printf("wrote %s and %s\n", out.string().c_str(), loss_csv.string().c_str());
}

TrainResult finetune_from(const Checkpoint& donor, const fs::path& data_root, const TrainConfig& cfg) {
  const Corpus corpus = load_corpus(data_root, donor.spectrogram, cfg.mode);
  if (corpus.sample_rate != donor.sample_rate)
    throw ConfigError("data is sampled at " + std::to_string(corpus.sample_rate) + " Hz, the model at " +
                      std::to_string(donor.sample_rate) + " Hz");
  const TrainingSet set = assemble_training_set(corpus.clips, donor.taxonomy, cfg.mode, donor.standardizer);
  return finetune(donor, set, cfg);
}

Command add_synth(CLI::App& app) {
  struct Opts {
    std::string spec = "default";
    fs::path out;
    SynthCounts counts;
    std::optional<std::uint64_t> seed;
    std::optional<double> clip_seconds;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("synth", "Generate a synthetic machine-sound corpus");
  sub->add_option("spec", o->spec, "Corpus spec JSON file, or 'default' for the built-in benchmark");
  sub->add_option("out", o->out, "Output directory (gets train/, test/ and spec.json)")->required();
  sub->add_option("--n-train", o->counts.n_normal_train, "Normal training clips per id");
  sub->add_option("--n-test-normal", o->counts.n_normal_test, "Normal test clips per id");
  sub->add_option("--n-test-anomaly", o->counts.n_anomaly_test, "Anomalous test clips per id");
  sub->add_option("--seed", o->seed, "Override the spec seed");
  sub->add_option("--clip-seconds", o->clip_seconds, "Override the spec clip length");
  return {sub, [o] {
            SynthSpec spec = o->spec == "default" ? default_benchmark_spec() : load_synth_spec(o->spec);
            if (o->seed) spec.seed = *o->seed;
            if (o->clip_seconds) spec.clip_seconds = *o->clip_seconds;
            spec.validate();
            const GeneratedCorpus g = generate_dataset(spec, o->out, o->counts);
            const fs::path spec_path = o->out / "spec.json";
            auto f = open_output(spec_path);
            f << synth_spec_to_json(spec) << '\n';
            finish_output(f, spec_path);
            std::cout << "wrote " << g.files_written << " clips: train " << g.train_root.string() << ", test "
                      << g.test_root.string() << '\n';
            return 0;
          }};
}

Command add_train(CLI::App& app, const Context& ctx) {
  struct Opts {
    fs::path data;
    fs::path out;
    std::string mode = "none";
    fs::path init;
    std::string normalization = "global";
    double min_scale = Standardizer::kDefaultMinScale;
    std::string loss_csv;
    SpectrogramConfig spec;
    VaeConfig arch;
    TrainConfig train;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("train", "Train a model on the normal clips of a corpus");
  sub->add_option("data", o->data, "Corpus root: <type>/<id>/normal/*.wav")->required();
  sub->add_option("out", o->out, "Checkpoint to write")->required();
  sub->add_option("--mode", o->mode, "Conditioning: none, ci (type), cij (id) or both")
      ->check(CLI::IsMember(kModes));
  sub->add_option("--init", o->init, "Start from this checkpoint (its mode is used unless --mode is given)");
  sub->add_option("--normalization", o->normalization, "Feature standardization fitted on the training normals")
      ->check(CLI::IsMember(kNormalizations))
      ->group("Features");
  sub->add_option("--min-scale", o->min_scale, "Lower bound on the standardization scale")->group("Features");
  add_spectrogram_flags(sub, o->spec);
  add_model_flags(sub, o->arch);
  add_optimizer_flags(sub, o->train, o->loss_csv);
  return {sub, [o, sub, &ctx] {
            TrainConfig cfg = o->train;
            TrainResult r;
            if (!o->init.empty()) {
              for (const auto& key : kArchitectureKeys)
                if (is_explicit(sub, ctx, key))
                  throw ConfigError("--" + key + " cannot be combined with --init; it comes from the checkpoint");
              const Checkpoint start = load_checkpoint(o->init);
              cfg.mode = is_explicit(sub, ctx, "mode") ? parse_condition_mode(o->mode) : start.mode;
              cfg.validate();
              r = finetune_from(start, o->data, cfg);
            } else {
              cfg.mode = parse_condition_mode(o->mode);
              cfg.validate();
              VaeConfig arch = o->arch;
              arch.input_dim = o->spec.feature_dim();
              arch.beta = cfg.beta;
              arch.validate();
              if (!(o->min_scale > 0.0)) throw ConfigError("--min-scale must be > 0");
              const Corpus corpus = load_corpus(o->data, o->spec, cfg.mode);
              std::vector<Taxonomy::Pair> pairs;
              for (const auto& e : corpus.entries) pairs.emplace_back(e.machine_type, e.machine_id);
              const Taxonomy tax = Taxonomy::from_pairs(std::move(pairs));
              const Normalization norm =
                  o->normalization == "per-dim" ? Normalization::kPerDimension : Normalization::kGlobal;
              const Standardizer stdz = Standardizer::fit(corpus.clips, norm, o->min_scale);
              const Checkpoint start =
                  initial_checkpoint(arch, tax, cfg.mode, o->spec, corpus.sample_rate, stdz, cfg.seed);
              r = train(assemble_training_set(corpus.clips, tax, cfg.mode, stdz), cfg, start);
            }
            write_training_outputs(r, o->out, loss_csv_path(o->out, o->loss_csv));
            return 0;
          }};
}

Command add_finetune(CLI::App& app) {
  struct Opts {
    fs::path in;
    fs::path data;
    fs::path out;
    std::string loss_csv;
    TrainConfig train;
  };
  auto o = std::make_shared<Opts>();
  o->train.epochs = 10;
  CLI::App* sub = app.add_subcommand("finetune", "Continue training a checkpoint on another corpus");
  sub->add_option("in", o->in, "Pre-trained checkpoint")->required();
  sub->add_option("data", o->data, "Corpus root of the new domain")->required();
  sub->add_option("out", o->out, "Checkpoint to write")->required();
  add_optimizer_flags(sub, o->train, o->loss_csv);
  return {sub, [o] {
            const Checkpoint donor = load_checkpoint(o->in);
            TrainConfig cfg = o->train;
            cfg.mode = donor.mode;
            cfg.validate();
            write_training_outputs(finetune_from(donor, o->data, cfg), o->out, loss_csv_path(o->out, o->loss_csv));
            return 0;
          }};
}

void require_clip_labels(const Checkpoint& ckpt, const std::string& type, const std::string& id) {
  if (uses_level1(ckpt.mode) && type.empty())
    throw ConfigError("--type is required for a model in mode " + std::string(to_string(ckpt.mode)));
  if (uses_level2(ckpt.mode) && id.empty())
    throw ConfigError("--id is required for a model in mode " + std::string(to_string(ckpt.mode)));
}

Command add_score(CLI::App& app) {
  struct Opts {
    fs::path ckpt;
    fs::path wav;
    std::string type;
    std::string id;
    std::string aggregation = "mean";
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("score", "Anomaly score of one clip");
  sub->add_option("ckpt", o->ckpt, "Trained checkpoint")->required();
  sub->add_option("wav", o->wav, "Clip to score")->required();
  sub->add_option("--type", o->type, "Machine type of the clip");
  sub->add_option("--id", o->id, "Model id of the clip");
  sub->add_option("--aggregation", o->aggregation, "Frame score pooling")->check(CLI::IsMember(kAggregations));
  return {sub, [o] {
            Scorer scorer(load_checkpoint(o->ckpt));
            require_clip_labels(scorer.checkpoint(), o->type, o->id);
            const ScoreRecord r = scorer.score_wav(o->wav, o->type, o->id, parse_aggregation(o->aggregation));
            std::cout << o->wav.string() << ' ' << format_real(r.score) << '\n';
            return 0;
          }};
}

void print_report(const EvaluationReport& report) {
  std::printf("%-12s %-10s %8s %9s %12s %10s\n", "type", "id", "normal", "anomaly", "auc_pairwise", "auc_rank");
  for (const auto& g : report.groups) {
    const std::string id = g.machine_id.empty() ? "-" : g.machine_id;
    if (g.result)
      std::printf("%-12s %-10s %8zu %9zu %12.4f %10.4f\n", g.machine_type.c_str(), id.c_str(), g.n_normal,
                  g.n_anomaly, g.result->auc_pairwise, g.result->auc_rank);
    else
      std::printf("%-12s %-10s %8zu %9zu %12s %10s\n", g.machine_type.c_str(), id.c_str(), g.n_normal, g.n_anomaly,
                  "-", "-");
  }
  if (report.defined_groups > 0)
    std::printf("%-12s %-10s %8s %9s %12.4f %10.4f\n", "macro", "", "", "", report.macro_auc_pairwise,
                report.macro_auc_rank);
  else
    std::printf("no group has both normal and anomalous clips\n");
}

Command add_eval(CLI::App& app) {
  struct Opts {
    fs::path ckpt;
    fs::path test_root;
    fs::path report;
    std::string scores_csv;
    EvalConfig eval;
    std::string aggregation = "mean";
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("eval", "Score a labeled test corpus and report AUC per machine");
  sub->add_option("ckpt", o->ckpt, "Trained checkpoint")->required();
  sub->add_option("test_root", o->test_root, "Test corpus root: <type>/<id>/{normal,abnormal}/*.wav")->required();
  sub->add_option("report", o->report, "AUC CSV to write")->required();
  sub->add_option("--eta", o->eval.eta, "Threshold offset of the pairwise AUC");
  sub->add_option("--aggregation", o->aggregation, "Frame score pooling")->check(CLI::IsMember(kAggregations));
  sub->add_option("--scores-csv", o->scores_csv, "Also write per-clip scores here");
  return {sub, [o] {
            Scorer scorer(load_checkpoint(o->ckpt));
            require_labels(scan_dataset(o->test_root), scorer.checkpoint().mode);
            EvalConfig cfg = o->eval;
            cfg.aggregation = parse_aggregation(o->aggregation);
            const EvaluationReport report = evaluate_dataset(scorer, o->test_root, cfg);
            auto f = open_output(o->report);
            write_auc_csv(f, report);
            finish_output(f, o->report);
            if (!o->scores_csv.empty()) {
              auto s = open_output(o->scores_csv);
              write_scores_csv(s, report.scores);
              finish_output(s, o->scores_csv);
            }
            print_report(report);
            return 0;
          }};
}

Command add_gradcheck(CLI::App& app) {
  struct Opts {
    ElboGradCheckConfig cfg;
    double tol_f64 = 1e-5;
    double tol_f32 = 1e-3;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("gradcheck", "Check ELBO gradients against finite differences");
  sub->add_option("--seed", o->cfg.seed, "Seed for weights, batch and frozen noise");
  sub->add_option("--batch", o->cfg.batch, "Rows in the probe batch");
  sub->add_option("--coordinates", o->cfg.coordinates_per_tensor, "Coordinates per tensor, 0 for all");
  sub->add_option("--step", o->cfg.step, "Finite-difference step");
  sub->add_option("--tol-f64", o->tol_f64, "Tolerance of the 64-bit gradient");
  sub->add_option("--tol-f32", o->tol_f32, "Tolerance of the 32-bit gradient");
  return {sub, [o] {
            const auto t0 = std::chrono::steady_clock::now();
            const ElboGradCheckReport r = check_elbo_gradients(o->cfg);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("f64 max relative error %.3e (%s)\n", r.f64.max_relative_error, r.worst_tensor_f64.c_str());
            std::printf("f32 max relative error %.3e (%s)\n", r.f32.max_relative_error, r.worst_tensor_f32.c_str());
            std::printf("%zu of %zu parameters checked, %zu skipped at ReLU kinks, %.1f s\n",
                        r.f64.coordinates_checked, r.parameter_count, r.kink_skipped, secs);
            if (r.f64.max_relative_error >= o->tol_f64 || r.f32.max_relative_error >= o->tol_f32) {
              std::fprintf(stderr, "hcvae: error[tolerance]: gradient error above tolerance (f64 %g, f32 %g)\n",
                           o->tol_f64, o->tol_f32);
              return 1;
            }
            return 0;
          }};
}

Command add_export_latent(CLI::App& app) {
  struct Opts {
    fs::path ckpt;
    fs::path data;
    fs::path out;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("export-latent", "Write posterior means of every feature vector");
  sub->add_option("ckpt", o->ckpt, "Trained checkpoint")->required();
  sub->add_option("data", o->data, "Corpus root")->required();
  sub->add_option("out", o->out, "CSV to write")->required();
  return {sub, [o] {
            Scorer scorer(load_checkpoint(o->ckpt));
            const Checkpoint& ck = scorer.checkpoint();
            const auto entries = scan_dataset(o->data);
            require_labels(entries, ck.mode);
            auto f = open_output(o->out);
            write_latent_csv_header(f, ck.vae.latent_dim);
            std::size_t rows = 0;
            for (const auto& e : entries) {
              const LabeledClip clip = load_clip(e, ck.spectrogram);
              if (clip.sample_rate != ck.sample_rate)
                throw ConfigError(clip.clip_id + " is sampled at " + std::to_string(clip.sample_rate) +
                                  " Hz, the model at " + std::to_string(ck.sample_rate) + " Hz");
              const Matrix<float> mu = scorer.latent_means(clip.features, clip.machine_type, clip.machine_id);
              write_latent_rows(f, clip.clip_id, mu);
              rows += static_cast<std::size_t>(mu.rows());
            }
            finish_output(f, o->out);
            std::cout << "wrote " << rows << " latent rows from " << entries.size() << " clips to "
                      << o->out.string() << '\n';
            return 0;
          }};
}

}  // namespace

std::vector<Command> add_commands(CLI::App& app, const Context& ctx) {
  return {add_synth(app), add_train(app, ctx), add_finetune(app), add_score(app),
          add_eval(app),  add_gradcheck(app),  add_export_latent(app)};
}

}  // namespace hcvae::cli
