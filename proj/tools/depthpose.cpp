// depthpose: synthetic data generation, training, evaluation and inference
// for the depth-image head pose regressor.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depthpose/depthpose.hpp"

namespace fs = std::filesystem;
using namespace depthpose;

namespace {

std::string g_command_line;

// One --<key> option per configuration key; applied after --config.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool single_thread = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value configuration file")
        ->check(CLI::ExistingFile);
    app->add_flag("--single-thread", single_thread, "same as --threads 1");
    for (auto name : config_key_names()) {
      const std::string key(name);
      app->add_option_function<std::string>(
          "--" + key, [this, key](const std::string& v) { values[key] = v; },
          "override config key '" + key + "'");
    }
  }

  TrainConfig resolve(TrainConfig base = {}) const {
    TrainConfig cfg =
        config_file.empty() ? base : load_config(config_file, base);
    for (const auto& [k, v] : values) set_config_value(cfg, k, v);
    if (single_thread) cfg.threads = 1;
    cfg.validate();
    return cfg;
  }
};

struct DataFlags {
  std::size_t subjects = 12;
  std::size_t frames = 200;
  std::uint64_t seed = 1;

  void attach(CLI::App* app) {
    app->add_option("--subjects", subjects, "number of synthetic subjects")
        ->check(CLI::PositiveNumber);
    app->add_option("--frames", frames, "frames per subject")
        ->check(CLI::PositiveNumber);
    app->add_option("--data-seed", seed, "dataset seed");
  }

  SyntheticDatasetOptions options() const {
    SyntheticDatasetOptions o;
    o.subjects = subjects;
    o.frames_per_subject = frames;
    o.seed = seed;
    return o;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string mae_line(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << "MAE pitch " << r.mae.pitch
     << "  roll " << r.mae.roll << "  yaw " << r.mae.yaw << "  (frames "
     << r.per_frame.size() << ", excluded " << r.excluded << ")";
  return os.str();
}

int run_synth(const fs::path& out, const DataFlags& data) {
  const auto opts = data.options();
  generate_dataset(opts, out);
  write_manifest(out / "manifest.txt", TrainConfig{}, g_command_line,
                 {{"subjects", std::to_string(opts.subjects)},
                  {"frames_per_subject", std::to_string(opts.frames_per_subject)},
                  {"data_seed", std::to_string(opts.seed)}});
  std::cout << "wrote " << opts.subjects * opts.frames_per_subject
            << " frames to " << out.string() << "\n";
  return 0;
}

int run_train(const fs::path& data_dir, const fs::path& out,
              const TrainConfig& cfg, const std::string& init) {
  fs::create_directories(out);
  auto [train_frames, val_frames] =
      split_by_subject(load_dataset(data_dir), cfg.validation_fraction);
  const auto training = prepare_samples(train_frames, cfg, cfg.augmentation);
  const auto validation = prepare_samples(val_frames, cfg, false);
  std::cout << "training frames " << training.samples.size() << " (skipped "
            << training.skipped.size() << "), validation frames "
            << validation.samples.size() << "\n";

  std::optional<NetworkParams<float>> initial;
  if (!init.empty()) initial = load_params(init);

  std::ofstream log(out / "train_log.txt", std::ios::trunc);
  const TrainResult res = train(
      cfg, training.samples, validation.samples,
      [&](const EpochLog& e) {
        const std::string line = format_epoch_log(e);
        std::cout << line << "\n";
        log << line << "\n";
        log.flush();
      },
      std::move(initial));
  if (res.diverged) {
    std::cerr << "training diverged: " << res.divergence_reason
              << " (last good parameters kept)\n";
    log << "diverged: " << res.divergence_reason << "\n";
  }
  save_params(res.params, out / "params.bin");

  std::vector<std::pair<std::string, std::string>> extra = {
      {"data", data_dir.string()},
      {"training_frames", std::to_string(training.samples.size())},
      {"validation_frames", std::to_string(validation.samples.size())},
      {"epochs_completed", std::to_string(res.log.size())},
      {"diverged", res.diverged ? "true" : "false"},
      {"params_fingerprint", std::to_string(fingerprint_of(res.params))}};
  if (!init.empty()) extra.push_back({"init", init});
  write_manifest(out / "manifest.txt", cfg, g_command_line, extra);

  if (!validation.samples.empty()) {
    EvalReport r = evaluate(res.params,
                            std::span<const PatchSample>(validation.samples),
                            cfg.angle_range);
    r.excluded = validation.skipped.size();
    write_summary_json(r, out / "validation_summary.json");
    std::cout << "validation " << mae_line(r) << "\n";
  }
  return res.diverged ? 3 : 0;
}

int run_eval(const fs::path& params_path, const fs::path& data_dir,
             const fs::path& out, const TrainConfig& cfg) {
  fs::create_directories(out);
  const auto params = load_params(params_path);
  const auto frames = load_dataset(data_dir);
  const EvalReport r =
      evaluate_frames(params, std::span<const LabeledFrame>(frames), cfg);
  write_per_frame_csv(r, out / "per_frame.csv");
  write_summary_json(r, out / "summary.json");
  write_manifest(out / "manifest.txt", cfg, g_command_line,
                 {{"params", params_path.string()},
                  {"data", data_dir.string()},
                  {"frames", std::to_string(r.per_frame.size())},
                  {"excluded", std::to_string(r.excluded)}});
  std::cout << mae_line(r) << "\n";
  return 0;
}

struct PredictFlags {
  std::string params;
  std::string pgm;
  std::string data;
  double xc = 0, yc = 0, z = 0;
  std::size_t limit = 0;
};

int run_predict(const PredictFlags& f, const fs::path& out,
                const TrainConfig& cfg) {
  const auto params = load_params(f.params);
  fs::create_directories(out);
  std::vector<std::pair<std::string, std::string>> extra = {
      {"params", f.params}};

  const auto report = [](const std::string& id, const Prediction& p) {
    std::cout << id;
    if (p.angles) {
      std::cout << std::fixed << std::setprecision(2) << "  pitch "
                << p.angles->pitch << "  roll " << p.angles->roll << "  yaw "
                << p.angles->yaw;
    } else {
      std::cout << "  no prediction: " << p.error;
    }
    std::cout << std::setprecision(3) << "  (" << p.latency_ms << " ms)\n";
  };

  int status = 0;
  if (!f.pgm.empty()) {
    const DepthFrame frame = read_pgm16(f.pgm);
    const Prediction p = predict(params, frame, f.xc, f.yc, f.z, cfg);
    report(frame.frame_id, p);
    extra.push_back({"input", f.pgm});
    status = p.angles ? 0 : 4;
  } else {
    const auto frames = load_dataset(f.data);
    const std::size_t n =
        f.limit ? std::min(f.limit, frames.size()) : frames.size();
    double total_ms = 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = frames[i].annotation;
      const Prediction p = predict(params, frames[i].frame, a.xc, a.yc, a.z_mm,
                                   cfg);
      report(a.frame_id, p);
      total_ms += p.latency_ms;
      ok += p.angles.has_value();
    }
    std::cout << std::fixed << std::setprecision(3) << "frames " << n
              << ", predicted " << ok << ", mean latency "
              << (n ? total_ms / n : 0.0) << " ms\n";
    extra.push_back({"input", f.data});
    extra.push_back({"frames", std::to_string(n)});
  }
  write_manifest(out / "manifest.txt", cfg, g_command_line, extra);
  return status;
}

int run_gradcheck(const fs::path& out, std::uint64_t seed,
                  const GradCheckOptions& opts) {
  fs::create_directories(out);
  const GradCheckReport r = pair_grad_check(seed, opts);
  for (const auto& l : r.layers) {
    std::printf("%-6s coords %4zu  kinks skipped %3zu  max rel err %.3e  %s\n",
                l.name.c_str(), l.coordinates, l.kinks_skipped,
                l.max_relative_error,
                l.passed ? "ok" : "FAIL");
  }
  std::printf("%s\n", r.passed() ? "gradient check passed"
                                 : "gradient check FAILED");
  TrainConfig cfg;
  cfg.seed = seed;
  write_manifest(out / "gradcheck_manifest.txt", cfg, g_command_line,
                 {{"step", format_number(opts.step)},
                  {"tolerance", format_number(opts.tolerance)},
                  {"coordinates_per_layer",
                   std::to_string(opts.coordinates_per_layer)},
                  {"passed", r.passed() ? "true" : "false"}});
  return r.passed() ? 0 : 1;
}

int run_compare(const fs::path& out, const DataFlags& data,
                std::size_t train_subjects, const TrainConfig& cfg) {
  fs::create_directories(out);
  ComparisonOptions opts;
  opts.data = data.options();
  opts.train_subjects = train_subjects;
  opts.train = cfg;
  std::ofstream log(out / "train_log.txt", std::ios::trunc);
  const ComparisonResult r = compare_siamese_baseline(
      opts, [&](const std::string& tag, const EpochLog& e) {
        const std::string line = tag + " " + format_epoch_log(e);
        std::cout << line << "\n";
        log << line << "\n";
      });
  write_text(out / "comparison.md", r.table);
  write_summary_json(r.baseline, out / "single_summary.json");
  write_summary_json(r.siamese, out / "siamese_summary.json");
  save_params(r.baseline_params, out / "single_params.bin");
  save_params(r.siamese_params, out / "siamese_params.bin");
  write_manifest(out / "manifest.txt", cfg, g_command_line,
                 {{"subjects", std::to_string(opts.data.subjects)},
                  {"train_subjects", std::to_string(train_subjects)},
                  {"frames_per_subject",
                   std::to_string(opts.data.frames_per_subject)},
                  {"data_seed", std::to_string(opts.data.seed)}});
  std::cout << r.table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) {
    g_command_line += (i ? " " : "") + std::string(argv[i]);
  }

  CLI::App app{"Head pose regression from depth images"};
  app.set_version_flag("--version", std::string(DEPTHPOSE_VERSION));
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string out;

  auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
  DataFlags synth_data;
  synth->add_option("--out", out, "output directory")->required();
  synth_data.attach(synth);

  auto* trn = app.add_subcommand("train", "train on a dataset directory");
  std::string data_dir, init;
  ConfigFlags train_cfg;
  trn->add_option("--data", data_dir, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  trn->add_option("--out", out, "output directory")->required();
  trn->add_option("--init", init, "start from a parameter file")
      ->check(CLI::ExistingFile);
  train_cfg.attach(trn);

  auto* ev = app.add_subcommand("eval", "score a parameter file on a dataset");
  std::string params_path;
  ConfigFlags eval_cfg;
  ev->add_option("--params", params_path, "parameter file")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--data", data_dir, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--out", out, "output directory")->required();
  eval_cfg.attach(ev);

  auto* pred = app.add_subcommand("predict", "predict pose for depth frames");
  PredictFlags pf;
  ConfigFlags pred_cfg;
  std::string pred_out = ".";
  pred->add_option("--params", pf.params, "parameter file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* pgm_opt = pred->add_option("--pgm", pf.pgm, "16-bit depth PGM")
                      ->check(CLI::ExistingFile);
  auto* data_opt = pred->add_option("--data", pf.data, "dataset directory")
                       ->check(CLI::ExistingDirectory);
  pgm_opt->excludes(data_opt);
  auto* xc_opt = pred->add_option("--xc", pf.xc, "head centre column (px)");
  auto* yc_opt = pred->add_option("--yc", pf.yc, "head centre row (px)");
  auto* z_opt = pred->add_option("--z", pf.z, "head distance (mm)");
  xc_opt->needs(pgm_opt);
  yc_opt->needs(pgm_opt);
  z_opt->needs(pgm_opt);
  pred->add_option("--limit", pf.limit, "predict at most N dataset frames");
  pred->add_option("--out", pred_out, "directory for the run manifest");
  pred_cfg.attach(pred);

  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference check of all gradients");
  std::uint64_t gc_seed = 7;
  GradCheckOptions gc_opts;
  std::string gc_out = ".";
  gc->add_option("--seed", gc_seed, "network and input seed");
  gc->add_option("--coords", gc_opts.coordinates_per_layer,
                 "coordinates probed per layer");
  gc->add_option("--step", gc_opts.step, "finite-difference step");
  gc->add_option("--tolerance", gc_opts.tolerance, "max relative error");
  gc->add_option("--out", gc_out, "directory for the run manifest");

  auto* cmp = app.add_subcommand(
      "compare", "train Siamese and single-network models on identical data");
  DataFlags cmp_data;
  ConfigFlags cmp_cfg;
  std::size_t train_subjects = 10;
  cmp->add_option("--out", out, "output directory")->required();
  cmp->add_option("--train-subjects", train_subjects,
                  "subjects used for training; the rest are tested");
  cmp_data.attach(cmp);
  cmp_cfg.attach(cmp);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(out, synth_data);
    if (*trn) return run_train(data_dir, out, train_cfg.resolve(), init);
    if (*ev) return run_eval(params_path, data_dir, out, eval_cfg.resolve());
    if (*pred) {
      if (pf.pgm.empty() == pf.data.empty()) {
        throw CLI::RequiredError("exactly one of --pgm or --data");
      }
      if (!pf.pgm.empty() && (!*xc_opt || !*yc_opt || !*z_opt)) {
        throw CLI::RequiredError("--xc, --yc and --z with --pgm");
      }
      return run_predict(pf, pred_out, pred_cfg.resolve());
    }
    if (*gc) return run_gradcheck(gc_out, gc_seed, gc_opts);
    if (*cmp) {
      return run_compare(out, cmp_data, train_subjects, cmp_cfg.resolve());
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
