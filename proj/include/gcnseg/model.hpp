#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gcnseg/graph.hpp"
#include "gcnseg/matrix.hpp"

namespace gcnseg {

// channels × height × width, row-major within each channel.
struct Tensor3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

// 3×3 same-padding convolution. kernels is out × in × 3 × 3, row-major.
struct ConvLayerParams {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::vector<double> kernels;
  std::vector<double> bias;

  ConvLayerParams() = default;
  ConvLayerParams(std::size_t out_ch, std::size_t in_ch)
      : out_channels(out_ch), in_channels(in_ch), kernels(out_ch * in_ch * 9, 0.0),
        bias(out_ch, 0.0) {}

  double& kernel(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return kernels[((o * in_channels + i) * 3 + ky) * 3 + kx];
  }
  double kernel(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return kernels[((o * in_channels + i) * 3 + ky) * 3 + kx];
  }

  friend bool operator==(const ConvLayerParams&, const ConvLayerParams&) = default;
};

// One propagation layer: σ(Â H W). No bias term.
struct GcnLayerParams {
  DenseMatrix w;
  bool has_relu = true;

  friend bool operator==(const GcnLayerParams&, const GcnLayerParams&) = default;
};

struct Architecture {
  std::size_t in_channels = 3;
  std::vector<std::size_t> conv_channels = {16, 16};
  // Output width of each GCN layer; the last entry is the class count.
  std::vector<std::size_t> gcn_dims = {32, 2};
  std::size_t height = 64;
  std::size_t width = 64;
  Connectivity connectivity = Connectivity::kFour;

  std::size_t num_classes() const { return gcn_dims.empty() ? 0 : gcn_dims.back(); }
  std::size_t num_nodes() const { return height * width; }
  // Throws kInvalidArchitecture.
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Trainable tensors. Gradients use the same type.
struct Parameters {
  std::vector<ConvLayerParams> conv;
  std::vector<GcnLayerParams> gcn;

  friend bool operator==(const Parameters&, const Parameters&) = default;
};
using GradientSet = Parameters;

GradientSet zeros_like(const Parameters& p);

// Visits every trainable tensor in a fixed order with a stable name
// ("conv0.kernel", "conv0.bias", "gcn0.weight", ...) and its dims.
using TensorVisitor =
    std::function<void(const std::string& name, const std::vector<std::uint32_t>& dims,
                       std::span<double> values)>;
using ConstTensorVisitor =
    std::function<void(const std::string& name, const std::vector<std::uint32_t>& dims,
                       std::span<const double> values)>;
void for_each_tensor(Parameters& p, const TensorVisitor& visit);
void for_each_tensor(const Parameters& p, const ConstTensorVisitor& visit);
std::size_t parameter_count(const Parameters& p);

class GcnModel {
 public:
  // Checks that the parameter shapes chain as the architecture says and
  // precomputes Â for the patch grid. Throws kInvalidArchitecture.
  GcnModel(Architecture arch, Parameters params);

  const Architecture& architecture() const noexcept { return arch_; }
  const Parameters& params() const noexcept { return params_; }
  Parameters& params() noexcept { return params_; }
  const SparseOperator& a_hat() const noexcept { return a_hat_; }
  std::size_t num_classes() const { return arch_.num_classes(); }

 private:
  Architecture arch_;
  Parameters params_;
  SparseOperator a_hat_;
};

// Glorot-uniform weights (s = sqrt(6 / (fan_in + fan_out)), conv fans are
// channels × 9) and zero biases. Drawn from mt19937_64 in tensor order, so
// the result is bitwise identical on every platform for a given seed.
GcnModel init_model(std::uint64_t seed, const Architecture& arch = {});

struct ConvCache {
  std::vector<Tensor3> inputs;           // input of each layer
  std::vector<Tensor3> pre_activations;  // conv output before ReLU
};

// Stack of 3×3 zero-padded convolutions, each followed by ReLU.
Tensor3 conv_forward(std::span<const ConvLayerParams> layers, const Tensor3& image,
                     ConvCache* cache = nullptr);

// σ_r(Â H W); σ_r is ReLU when layer.has_relu, identity otherwise.
DenseMatrix gcn_forward(const SparseOperator& a_hat, const DenseMatrix& h,
                        const GcnLayerParams& layer);

DenseMatrix relu(const DenseMatrix& x);

// Row-wise softmax with max subtraction. Throws kNumericalFailure on
// non-finite input and kInvalidDimension for fewer than two columns.
DenseMatrix softmax_rows(const DenseMatrix& logits);
// Row-wise log-softmax via log-sum-exp.
DenseMatrix log_softmax_rows(const DenseMatrix& logits);

// Conv features reshaped to node features: row r*width + c holds the
// channel vector of pixel (r, c).
DenseMatrix to_node_features(const Tensor3& features);

struct ForwardCache {
  ConvCache conv;
  Tensor3 conv_output;
  std::vector<DenseMatrix> gcn_inputs;       // H^{l−1}
  std::vector<DenseMatrix> aggregated;       // Â H^{l−1}
  std::vector<DenseMatrix> pre_activations;  // Â H^{l−1} W
  DenseMatrix log_probs;
  DenseMatrix probs;
};

ForwardCache model_forward(const GcnModel& m, const Tensor3& patch);

enum class LossReduction { kMean, kSum };

struct BackwardResult {
  double loss = 0.0;
  GradientSet grads;
};

// NLL of the cached log-probabilities and its gradient with respect to every
// parameter. With kMean (the default) the loss is averaged over nodes and the
// logit gradient is (p − onehot) / n; kSum drops the 1/n.
// Throws kInvalidLabel for a label outside [0, num_classes).
BackwardResult model_backward(const GcnModel& m, const ForwardCache& cache,
                              std::span<const std::uint8_t> labels,
                              LossReduction reduction = LossReduction::kMean);

// Per-pixel argmax; ties go to the lowest class index.
std::vector<std::uint8_t> argmax_rows(const DenseMatrix& probs);
std::vector<std::uint8_t> predict_mask(const GcnModel& m, const Tensor3& patch);

}  // namespace gcnseg
