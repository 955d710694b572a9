// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gcnseg/cli.hpp"
#include "gcnseg/dataset.hpp"
#include "gcnseg/metrics.hpp"
#include "gcnseg/model.hpp"
#include "gcnseg/synthetic.hpp"
#include "gcnseg/training.hpp"
#include "gcnseg/verify.hpp"

namespace fs = std::filesystem;
using namespace gcnseg;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

VerifyOptions verify_options() {
  VerifyOptions o;
  o.max_n = 32;
  o.max_order = 8;
  o.trials = 20;
  o.eig_max_n = 64;
  return o;
}

Outcome suite_within(const std::vector<SuiteResult>& suites, double budget_s) {
  Outcome out{true, ""};
  double total = 0.0;
  for (const SuiteResult& s : suites) {
    out.passed = out.passed && s.passed;
    total += s.seconds;
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += s.detail;
  }
  out.passed = out.passed && total < budget_s;
  out.detail += fmt(" [%.2fs, budget %.0fs]", total, budget_s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gcnseg");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

// Criterion 7's training run; criterion 9 reads its loss curve.
struct SyntheticRun {
  bool ran = false;
  double iou = 0.0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  double seconds = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

SyntheticRun run_synthetic_task() {
  SyntheticRun r;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Sample> corpus = make_synthetic_samples(SyntheticOptions{});
  const std::vector<Sample> train_set(corpus.begin(), corpus.begin() + 160);
  const std::vector<Sample> test_set(corpus.begin() + 160, corpus.end());
  r.train_size = train_set.size();
  r.test_size = test_set.size();

  TrainConfig cfg;  // lr 1e-4, 30 epochs, batch 4, mean NLL, one thread
  TrainCallbacks cb;
  cb.on_epoch = [](const EpochRecord& e) {
    std::fprintf(stderr, "  synthetic epoch %zu/30 loss=%.6f (%.1fs)\n", e.epoch, e.mean_loss,
                 e.seconds);
  };
  const TrainResult result = train(cfg, init_model(cfg.seed), train_set, {}, cb);
  r.iou = iou(evaluate(result.model, test_set));
  r.first_loss = result.history.epochs.front().mean_loss;
  r.last_loss = result.history.epochs.back().mean_loss;
  r.seconds = seconds_since(t0);
  r.ran = true;
  return r;
}

}  // namespace

int main() {
  const VerifyOptions vo = verify_options();
  SyntheticRun synthetic;
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;

  criteria.emplace_back("1 spectral-chebyshev equivalence", [&] {
    return suite_within({verify_chebyshev(vo)}, 10.0);
  });

  criteria.emplace_back("2 eigensolver fidelity", [&] {
    return suite_within({verify_eigensolver(vo), verify_laplacian(vo)}, 10.0);
  });

  criteria.emplace_back("3 renormalized adjacency spectrum", [&] {
    return suite_within({verify_renormalized_spectrum(vo)}, 5.0);
  });

  criteria.emplace_back("4 gradient check", [&] {
    return suite_within({verify_gradients(vo)}, 60.0);
  });

  criteria.emplace_back("5 metric identities", [&] {
    return suite_within({verify_metrics(vo)}, 60.0);
  });

  criteria.emplace_back("6 patch-count formula", [] {
    auto enumerate = [](std::size_t extent) {
      std::size_t n = 0;
      for (std::size_t off = 0; off + 64 <= extent; off += 19) ++n;
      return n;
    };
    std::size_t mismatches = 0, sliced = 0;
    for (std::size_t h = 64; h <= 300; ++h)
      for (std::size_t w = 64; w <= 300; ++w)
        if (patch_count(h, w, 64, 19) != enumerate(h) * enumerate(w)) ++mismatches;
    // slice_patches itself on every height and every width, and on the diagonal.
    for (std::size_t k = 64; k <= 300; ++k) {
      for (auto [h, w] : {std::pair{k, std::size_t{64}}, {std::size_t{64}, k}, {k, k}}) {
        const RasterImage img{w, h, 1, std::vector<std::uint8_t>(w * h, 7)};
        const BinaryMask mask{w, h, std::vector<std::uint8_t>(w * h, 0)};
        if (slice_patches(img, mask, 64, 19).size() != enumerate(h) * enumerate(w)) ++mismatches;
        ++sliced;
      }
    }
    const RasterImage big{256, 256, 3, std::vector<std::uint8_t>(256 * 256 * 3, 0)};
    const std::size_t n256 =
        slice_patches(big, BinaryMask{256, 256, std::vector<std::uint8_t>(256 * 256, 0)}).size();
    Outcome o;
    o.passed = mismatches == 0 && n256 == 121;
    o.detail = std::to_string(mismatches) + " mismatches over 237x237 sizes (" +
               std::to_string(sliced) + " sliced directly); 256x256 -> " + std::to_string(n256);
    return o;
  });

  criteria.emplace_back("7 synthetic end-to-end IoU", [&] {
    synthetic = run_synthetic_task();
    Outcome o;
    o.passed = synthetic.iou >= 0.90 && synthetic.seconds < 900.0;
    o.detail = fmt("held-out IoU %.4f (need >= 0.90), ", synthetic.iou) +
               std::to_string(synthetic.train_size) + " train / " +
               std::to_string(synthetic.test_size) + " held out, " +
               fmt("%.0fs (budget 900s)", synthetic.seconds);
    return o;
  });

  criteria.emplace_back("8 determinism", [] {
    const fs::path dir = fs::temp_directory_path() / ("gcnseg_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    Outcome o;
    bool ok = cli({"synth", "--out", (dir / "data").string(), "--count", "8"}) == 0;
    for (const char* name : {"a.ckpt", "b.ckpt"}) {
      ok = ok && cli({"train", "--data", (dir / "data").string(), "--checkpoint",
                      (dir / name).string(), "--epochs", "2", "--seed", "3"}) == 0;
    }
    const bool ckpt_equal = ok && slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt") &&
                            !slurp(dir / "a.ckpt").empty();
    for (const char* name : {"p1.pgm", "p2.pgm"}) {
      ok = ok && cli({"predict", "--model", (dir / "a.ckpt").string(), "--image",
                      (dir / "data/images/synth_0000.ppm").string(), "--out",
                      (dir / name).string()}) == 0;
    }
    const bool predict_equal = ok && slurp(dir / "p1.pgm") == slurp(dir / "p2.pgm");
    o.passed = ok && ckpt_equal && predict_equal;
    o.detail = std::string("checkpoints ") + (ckpt_equal ? "byte-identical" : "DIFFER") +
               ", predict output " + (predict_equal ? "byte-identical" : "DIFFERS");
    fs::remove_all(dir);
    return o;
  });

  criteria.emplace_back("9 loss sanity", [&] {
    const double l2 = std::log(0.5);
    DenseMatrix uniform(4096, 2, l2);
    std::vector<std::uint8_t> labels(4096);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
    const double nll = nll_loss(uniform, labels);
    const double err = std::abs(nll - std::log(2.0));
    Outcome o;
    const bool curve = synthetic.ran && synthetic.last_loss < synthetic.first_loss;
    o.passed = err <= 1e-12 && curve;
    o.detail = fmt("|NLL(uniform) - ln 2| = %.2g; synthetic epoch loss %.6f -> %.6f", err,
                   synthetic.first_loss, synthetic.last_loss);
    if (!synthetic.ran) o.detail += " (synthetic run missing)";
    return o;
  });

  int failed = 0;
  for (auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failed;
    std::printf("%s criterion %s: %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
