#include "gcnseg/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>

#include "gcnseg/config.hpp"
#include "gcnseg/dataset.hpp"
#include "gcnseg/error.hpp"
#include "gcnseg/metrics.hpp"
#include "gcnseg/model.hpp"
#include "gcnseg/synthetic.hpp"
#include "gcnseg/training.hpp"
#include "gcnseg/verify.hpp"

namespace gcnseg {

namespace {

namespace fs = std::filesystem;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kNumericalFailure:
    case ErrorKind::kDegenerateSpectrum:
      return kExitNumerical;
    default:
      return kExitUsage;
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<Sample> slice_all(const std::vector<SourceRaster>& sources, std::size_t size,
                              std::size_t stride) {
  std::vector<Sample> out;
  for (const auto& src : sources) {
    auto patches = slice_patches(src.image, src.mask, size, stride, src.id);
    std::move(patches.begin(), patches.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SliceArgs {
  std::string images;
  std::string masks;
  std::string out;
  std::size_t size = 64;
  std::size_t stride = 19;
};

int cmd_slice(const SliceArgs& a, std::ostream& out, std::ostream& err) {
  const auto sources = load_source_pairs(a.images, a.masks);
  fs::create_directories(fs::path(a.out) / "images");
  fs::create_directories(fs::path(a.out) / "masks");
  std::ofstream index(fs::path(a.out) / "index.tsv", std::ios::trunc);
  index << "id\tsource\trow\tcol\n";
  std::size_t total = 0;
  for (const auto& src : sources) {
    const auto patches = slice_patches(src.image, src.mask, a.size, a.stride, src.id);
    for (const Sample& s : patches) {
      const std::string id = src.id + "_r" + std::to_string(s.origin.row) + "_c" +
                             std::to_string(s.origin.col);
      save_raster(sample_image_raster(s), fs::path(a.out) / "images" / (id + ".ppm"));
      save_mask(sample_mask(s, a.size), fs::path(a.out) / "masks" / (id + ".pgm"));
      index << id << '\t' << src.id << '\t' << s.origin.row << '\t' << s.origin.col << '\n';
    }
    err << src.id << ": " << patches.size() << " patches\n";
    total += patches.size();
  }
  out << total << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;  // (key, value), filled after parse
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.train.checkpoint_path = "model.ckpt";
  if (!a.config.empty()) apply_config_file(cfg, a.config);
  for (const std::string& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kConfig, "--set expects key=value");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : a.flags) apply_setting(cfg, k, v);
  apply_seed_fallback(cfg);
  if (cfg.data_dir.empty()) throw Error(ErrorKind::kConfig, "data_dir is not set");
  cfg.train.validate();
  cfg.arch.validate();

  const std::size_t size = cfg.arch.height;
  const auto sources = load_dataset_dir(cfg.data_dir);
  std::vector<Sample> train_set;
  std::vector<Sample> eval_set;
  if (cfg.split_ratio < 1.0) {
    SpatialSplit split = split_spatial(sources, cfg.split_ratio, size, cfg.stride);
    for (const auto& w : split.warnings) err << "warning: " << w << "\n";
    train_set = std::move(split.train);
    eval_set = std::move(split.test);
  } else {
    train_set = slice_all(sources, size, cfg.stride);
  }
  if (!cfg.eval_dir.empty()) {
    auto extra = slice_all(load_dataset_dir(cfg.eval_dir), size, cfg.stride);
    std::move(extra.begin(), extra.end(), std::back_inserter(eval_set));
  }
  if (train_set.empty()) throw Error(ErrorKind::kInvalidDataset, "no training patches");

  GcnModel model = init_model(cfg.train.seed, cfg.arch);
  out << "training on " << train_set.size() << " patches (" << eval_set.size()
      << " eval), " << parameter_count(model.params()) << " parameters, lr="
      << cfg.train.learning_rate << " epochs=" << cfg.train.epochs
      << " batch=" << cfg.train.batch_size << " seed=" << cfg.train.seed << "\n";

  fs::path history_path = cfg.history_path;
  if (history_path.empty()) {
    history_path = cfg.train.checkpoint_path;
    history_path += ".history.tsv";
  }
  std::ofstream history(history_path, std::ios::trunc);
  if (!history) throw Error(ErrorKind::kConfig, "cannot write " + history_path.string());
  history << "epoch\tmean_loss\tseconds\toa\tf1\tiou\n";

  TrainCallbacks callbacks;
  callbacks.on_step = [&out](std::size_t step, double loss) {
    out << "  step " << step << " loss=" << fixed(loss, 6) << "\n";
  };
  callbacks.on_epoch = [&](const EpochRecord& rec) {
    out << "epoch " << rec.epoch << "/" << cfg.train.epochs << " loss=" << fixed(rec.mean_loss, 6)
        << " time=" << fixed(rec.seconds, 2) << "s";
    history << rec.epoch << '\t' << fixed(rec.mean_loss, 9) << '\t' << fixed(rec.seconds, 3);
    if (rec.eval) {
      out << " " << format_metrics_line(*rec.eval);
      history << '\t' << fixed(rec.eval->oa, 6) << '\t' << fixed(rec.eval->f1, 6) << '\t'
              << fixed(rec.eval->iou, 6);
    } else {
      history << "\t\t\t";
    }
    out << "\n";
    history << "\n";
    history.flush();
  };
  train(cfg.train, std::move(model), train_set, eval_set, callbacks);
  out << "checkpoint: " << cfg.train.checkpoint_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string data;
  std::size_t stride = 19;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  const GcnModel model = load_checkpoint(a.model);
  const auto patches = slice_all(load_dataset_dir(a.data), model.architecture().height, a.stride);
  const ConfusionMatrix cm = evaluate(model, patches);
  out << "patches: " << patches.size() << "\n"
      << "pixels: " << cm.total() << "\n"
      << "confusion (building positive): tp=" << cm.tp << " fp=" << cm.fp << " fn=" << cm.fn
      << " tn=" << cm.tn << "\n"
      << "metrics are micro-aggregated over all pixels; F1 and IoU are 1 when neither\n"
      << "prediction nor ground truth contains building pixels\n"
      << format_metrics_line(compute_metrics(cm)) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string image;
  std::string out;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
  const GcnModel trained = load_checkpoint(a.model);
  const RasterImage raster = load_raster(a.image);
  const Tensor3 input = raster_to_tensor(raster, trained.architecture().in_channels);
  // Other image sizes get the same weights on their own pixel grid.
  Architecture arch = trained.architecture();
  arch.height = raster.height;
  arch.width = raster.width;
  const GcnModel model = arch == trained.architecture() ? trained : GcnModel(arch, trained.params());
  const std::vector<std::uint8_t> labels = predict_mask(model, input);
  BinaryMask mask{raster.width, raster.height, std::vector<std::uint8_t>(labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i) mask.values[i] = labels[i] == 1 ? 1 : 0;
  save_mask(mask, a.out);
  std::size_t building = 0;
  for (auto v : mask.values) building += v;
  out << "wrote " << a.out << " (" << raster.width << "x" << raster.height << ", " << building
      << " building pixels)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string config;
  std::size_t max_n = 32;
  std::size_t max_order = 8;
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  bool corrupt_eigensolver = false;
};

int cmd_verify(VerifyArgs a, const CLI::App& cmd, std::ostream& out, std::ostream& err) {
  if (!a.config.empty()) {
    RunConfig cfg;
    apply_config_file(cfg, a.config);
    if (cmd.count("--max-n") == 0) a.max_n = cfg.verify_max_n;
    if (cmd.count("--max-order") == 0) a.max_order = cfg.cheb_order;
    if (cmd.count("--trials") == 0) a.trials = cfg.verify_trials;
  }
  if (a.trials == 0) {
    err << "verify: --trials 0 verifies nothing\n";
    return kExitUsage;
  }
  VerifyOptions opts;
  opts.max_n = a.max_n;
  opts.max_order = a.max_order;
  opts.trials = a.trials;
  opts.seed = a.seed;
  if (a.corrupt_eigensolver) {
    opts.eigensolver = [](const DenseMatrix& m) {
      SpectralDecomposition d = eig_sym(m);
      for (double& l : d.lambda) l += 1e-6;
      return d;
    };
  }
  bool all = true;
  for (const SuiteResult& r : run_verify(opts)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " (tol "
        << r.tolerance << ", " << fixed(r.seconds, 2) << "s)\n";
    if (!r.passed) {
      all = false;
      err << "verify: suite '" << r.name << "' failed\n";
    }
  }
  out << (all ? "all suites passed" : "verification FAILED") << "\n";
  return all ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t count = 200;
  std::size_t size = 64;
  std::uint64_t seed = 7;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  SyntheticOptions opts;
  opts.count = a.count;
  opts.size = a.size;
  opts.seed = a.seed;
  opts.max_side = std::min(opts.max_side, a.size);
  opts.min_side = std::min(opts.min_side, opts.max_side);
  fs::create_directories(fs::path(a.out) / "images");
  fs::create_directories(fs::path(a.out) / "masks");
  const auto sources = make_synthetic_sources(opts);
  for (const auto& s : sources) {
    save_raster(s.image, fs::path(a.out) / "images" / (s.id + ".ppm"));
    save_mask(s.mask, fs::path(a.out) / "masks" / (s.id + ".pgm"));
  }
  out << sources.size() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph convolutional segmentation toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SliceArgs slice_args;
  auto* slice = app.add_subcommand("slice", "cut rasters into sliding-window patches");
  slice->add_option("--images", slice_args.images, "directory of <id>.ppm images")->required();
  slice->add_option("--masks", slice_args.masks, "directory of <id>.pgm masks")->required();
  slice->add_option("--out", slice_args.out, "output directory")->required();
  slice->add_option("--size", slice_args.size, "window size")->capture_default_str()
      ->check(CLI::PositiveNumber);
  slice->add_option("--stride", slice_args.stride, "window stride")->capture_default_str()
      ->check(CLI::PositiveNumber);

  TrainArgs train_args;
  std::string lr, epochs, batch, seed, data, eval_data, checkpoint, threads, history;
  auto* train_cmd = app.add_subcommand("train", "train a model with SGD");
  train_cmd->add_option("--config", train_args.config, "key=value config file");
  train_cmd->add_option("--set", train_args.sets, "override a config key (key=value)");
  train_cmd->add_option("--data", data, "dataset directory (images/, masks/)");
  train_cmd->add_option("--eval-data", eval_data, "held-out dataset directory");
  train_cmd->add_option("--checkpoint", checkpoint, "checkpoint path");
  train_cmd->add_option("--lr", lr, "learning rate");
  train_cmd->add_option("--epochs", epochs, "epoch count");
  train_cmd->add_option("--batch-size", batch, "mini-batch size");
  train_cmd->add_option("--seed", seed, "seed (falls back to GCN_SEED)");
  train_cmd->add_option("--threads", threads, "per-batch worker threads");
  train_cmd->add_option("--history", history, "per-epoch history TSV path");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "report OA, F1 and IoU on a dataset");
  eval_cmd->add_option("--model", eval_args.model, "checkpoint")->required();
  eval_cmd->add_option("--data", eval_args.data, "dataset directory (images/, masks/)")
      ->required();
  eval_cmd->add_option("--stride", eval_args.stride, "patch stride")->capture_default_str()
      ->check(CLI::PositiveNumber);

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "write the predicted building mask of an image");
  predict->add_option("--model", predict_args.model, "checkpoint")->required();
  predict->add_option("--image", predict_args.image, "input .ppm")->required();
  predict->add_option("--out", predict_args.out, "output .pgm")->required();

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "run the numerical oracle suites");
  verify->add_option("--config", verify_args.config,
                     "key=value config (verify_max_n, cheb_order, verify_trials)");
  verify->add_option("--max-n", verify_args.max_n, "largest random graph")->capture_default_str();
  verify->add_option("--max-order", verify_args.max_order, "largest Chebyshev order")
      ->capture_default_str();
  verify->add_option("--trials", verify_args.trials, "random trials per suite")
      ->capture_default_str();
  verify->add_option("--seed", verify_args.seed, "suite seed")->capture_default_str();
  verify->add_flag("--corrupt-eigensolver", verify_args.corrupt_eigensolver)
      ->group("");  // test hook

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "write a synthetic rectangle dataset");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--count", synth_args.count, "patch count")->capture_default_str();
  synth->add_option("--size", synth_args.size, "patch size")->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_args.seed, "generator seed")->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*slice) return cmd_slice(slice_args, out, err);
    if (*train_cmd) {
      const std::pair<const std::string*, const char*> flags[] = {
          {&data, "data_dir"},          {&eval_data, "eval_dir"}, {&checkpoint, "checkpoint_path"},
          {&lr, "learning_rate"},       {&epochs, "epochs"},      {&batch, "batch_size"},
          {&seed, "seed"},              {&threads, "threads"},    {&history, "history_path"}};
      for (const auto& [value, key] : flags)
        if (!value->empty()) train_args.flags.emplace_back(key, *value);
      return cmd_train(train_args, out, err);
    }
    if (*eval_cmd) return cmd_eval(eval_args, out, err);
    if (*predict) return cmd_predict(predict_args, out, err);
    if (*verify) return cmd_verify(verify_args, *verify, out, err);
    if (*synth) return cmd_synth(synth_args, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace gcnseg
