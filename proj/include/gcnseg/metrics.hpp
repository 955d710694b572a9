#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace gcnseg {

// Pixel counts with building as the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    tn += other.tn;
    return *this;
  }
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) noexcept {
    return a += b;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Adds per-pixel counts of one prediction/ground-truth pair. Throws
// kInvalidInput on length mismatch or values outside {0, 1}.
ConfusionMatrix accumulate(ConfusionMatrix cm, std::span<const std::uint8_t> pred,
                           std::span<const std::uint8_t> gt);

// All three throw kInvalidInput when total() == 0. When tp = fp = fn = 0 the
// image has no building and none was predicted; F1 and IoU are 1 then.
double overall_accuracy(const ConfusionMatrix& cm);
double f1(const ConfusionMatrix& cm);
double iou(const ConfusionMatrix& cm);

struct Metrics {
  double oa = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
};
Metrics compute_metrics(const ConfusionMatrix& cm);

// "OA=0.9600 F1=0.7500 IoU=0.6000"
std::string format_metrics_line(const Metrics& m);

}  // namespace gcnseg
