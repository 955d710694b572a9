#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcnseg/dataset.hpp"
#include "gcnseg/matrix.hpp"
#include "gcnseg/metrics.hpp"
#include "gcnseg/model.hpp"

namespace gcnseg {

// −(1/n) Σ_i log_probs[i, labels[i]]. Throws kInvalidLabel for a label
// outside [0, cols) and kInvalidDimension on a length mismatch.
double nll_loss(const DenseMatrix& log_probs, std::span<const std::uint8_t> labels);

// w ← w − lr·g for every tensor; plain SGD. Throws kInvalidDimension when
// the gradient set does not mirror the parameters.
void sgd_step(Parameters& params, const GradientSet& grads, double lr);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  // Empty disables checkpointing. Otherwise the last epoch is written here
  // and the best-by-eval-IoU epoch to "<path>.best".
  std::filesystem::path checkpoint_path;
  // Report the batch loss every N steps through on_step; 0 disables.
  std::size_t log_every = 0;
  LossReduction loss_reduction = LossReduction::kMean;
  // Workers for per-sample forward/backward inside a batch. Results do not
  // depend on this value.
  std::size_t threads = 1;

  // Throws kConfig.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double seconds = 0.0;
  std::optional<Metrics> eval;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainCallbacks {
  std::function<void(std::size_t step, double batch_loss)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  GcnModel model;
  TrainHistory history;
};

// Epoch permutation of [0, n). Fisher–Yates driven by the 64-bit LCG
//   s ← s · 6364136223846793005 + 1442695040888963407  (mod 2^64)
// seeded with s = seed XOR ((epoch + 1) · 0x9E3779B97F4A7C15). For
// i = n−1 down to 1: advance s, j = (s >> 33) mod (i + 1), swap(i, j).
std::vector<std::size_t> shuffle_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

struct BatchGradient {
  double mean_loss = 0.0;
  GradientSet grads;  // averaged over the batch
};

// Forward/backward for each listed sample, reduced in index order.
BatchGradient batch_gradient(const GcnModel& model, std::span<const Sample> data,
                             std::span<const std::size_t> indices,
                             LossReduction reduction = LossReduction::kMean,
                             std::size_t threads = 1);

// Micro-aggregated confusion matrix of argmax predictions over all samples.
ConfusionMatrix evaluate(const GcnModel& model, std::span<const Sample> data);

// Runs epochs × ⌈N / batch_size⌉ SGD steps. Throws kInvalidDataset for an
// empty dataset and kNumericalFailure (naming the step) on a non-finite loss.
TrainResult train(const TrainConfig& cfg, GcnModel model, std::span<const Sample> data,
                  std::span<const Sample> eval_data = {}, const TrainCallbacks& callbacks = {});

// Checkpoint container: "GCNCKPT1", u32 tensor count, then per tensor u32
// name length, UTF-8 name, u32 rank and u32 dims; then every payload as
// float64, row-major, in manifest order. All integers and floats are
// little-endian. The patch grid travels as tensor "meta.grid" =
// [height, width, connectivity].
std::string encode_checkpoint(const GcnModel& model);
GcnModel decode_checkpoint(const std::string& bytes);
void save_checkpoint(const GcnModel& model, const std::filesystem::path& path);
GcnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace gcnseg
