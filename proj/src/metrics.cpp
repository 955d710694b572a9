#include "gcnseg/metrics.hpp"

#include <cstdio>

#include "gcnseg/error.hpp"

namespace gcnseg {

ConfusionMatrix accumulate(ConfusionMatrix cm, std::span<const std::uint8_t> pred,
                           std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::kInvalidInput, "prediction has " + std::to_string(pred.size()) +
                                              " pixels, ground truth " +
                                              std::to_string(gt.size()));
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint8_t p = pred[i];
    const std::uint8_t g = gt[i];
    if (p > 1 || g > 1) {
      throw Error(ErrorKind::kInvalidInput, "non-binary mask value at pixel " + std::to_string(i));
    }
    if (p && g) {
      ++cm.tp;
    } else if (p) {
      ++cm.fp;
    } else if (g) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

namespace {

void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::kInvalidInput, "confusion matrix is empty");
}

}  // namespace

double overall_accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double f1(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  const std::uint64_t denom = 2 * cm.tp + cm.fp + cm.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * cm.tp) / static_cast<double>(denom);
}

double iou(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  const std::uint64_t denom = cm.tp + cm.fp + cm.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(cm.tp) / static_cast<double>(denom);
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  return {overall_accuracy(cm), f1(cm), iou(cm)};
}

std::string format_metrics_line(const Metrics& m) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "OA=%.4f F1=%.4f IoU=%.4f", m.oa, m.f1, m.iou);
  return buf;
}

}  // namespace gcnseg
