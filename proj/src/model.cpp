#include "gcnseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "gcnseg/error.hpp"
#include "gcnseg/training.hpp"

namespace gcnseg {

namespace {

[[noreturn]] void bad_arch(const std::string& msg) {
  throw Error(ErrorKind::kInvalidArchitecture, msg);
}

double uniform_symmetric(std::mt19937_64& rng, double scale) {
  // 53 random mantissa bits; std::uniform_real_distribution is not
  // reproducible across standard libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return scale * (2.0 * u - 1.0);
}

}  // namespace

void Architecture::validate() const {
  if (in_channels == 0) bad_arch("input channel count must be >= 1");
  if (height == 0 || width == 0) bad_arch("patch grid must be at least 1x1");
  for (std::size_t c : conv_channels)
    if (c == 0) bad_arch("conv channel counts must be >= 1");
  if (gcn_dims.empty()) bad_arch("at least one GCN layer is required");
  for (std::size_t d : gcn_dims)
    if (d == 0) bad_arch("GCN widths must be >= 1");
  if (gcn_dims.back() < 2) bad_arch("the last GCN layer must produce >= 2 classes");
}

GradientSet zeros_like(const Parameters& p) {
  GradientSet g;
  for (const auto& c : p.conv) g.conv.emplace_back(c.out_channels, c.in_channels);
  for (const auto& l : p.gcn) g.gcn.push_back({DenseMatrix(l.w.rows(), l.w.cols()), l.has_relu});
  return g;
}

void for_each_tensor(Parameters& p, const TensorVisitor& visit) {
  for (std::size_t i = 0; i < p.conv.size(); ++i) {
    auto& c = p.conv[i];
    const auto out = static_cast<std::uint32_t>(c.out_channels);
    const auto in = static_cast<std::uint32_t>(c.in_channels);
    visit("conv" + std::to_string(i) + ".kernel", {out, in, 3, 3}, c.kernels);
    visit("conv" + std::to_string(i) + ".bias", {out}, c.bias);
  }
  for (std::size_t i = 0; i < p.gcn.size(); ++i) {
    auto& w = p.gcn[i].w;
    visit("gcn" + std::to_string(i) + ".weight",
          {static_cast<std::uint32_t>(w.rows()), static_cast<std::uint32_t>(w.cols())}, w.data());
  }
}

void for_each_tensor(const Parameters& p, const ConstTensorVisitor& visit) {
  for_each_tensor(const_cast<Parameters&>(p),
                  [&visit](const std::string& name, const std::vector<std::uint32_t>& dims,
                           std::span<double> values) {
                    visit(name, dims, std::span<const double>(values));
                  });
}

std::size_t parameter_count(const Parameters& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&n](const std::string&, const std::vector<std::uint32_t>&,
                          std::span<const double> v) { n += v.size(); });
  return n;
}

GcnModel::GcnModel(Architecture arch, Parameters params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  arch_.validate();
  if (params_.conv.size() != arch_.conv_channels.size()) bad_arch("conv layer count mismatch");
  if (params_.gcn.size() != arch_.gcn_dims.size()) bad_arch("GCN layer count mismatch");

  std::size_t channels = arch_.in_channels;
  for (std::size_t i = 0; i < params_.conv.size(); ++i) {
    const auto& c = params_.conv[i];
    if (c.in_channels != channels || c.out_channels != arch_.conv_channels[i] ||
        c.kernels.size() != c.out_channels * c.in_channels * 9 ||
        c.bias.size() != c.out_channels) {
      bad_arch("conv layer " + std::to_string(i) + " has inconsistent shape");
    }
    channels = c.out_channels;
  }
  std::size_t width = channels;
  for (std::size_t i = 0; i < params_.gcn.size(); ++i) {
    const auto& l = params_.gcn[i];
    if (l.w.rows() != width || l.w.cols() != arch_.gcn_dims[i]) {
      bad_arch("GCN layer " + std::to_string(i) + " expects " + std::to_string(width) + "x" +
               std::to_string(arch_.gcn_dims[i]) + " weights");
    }
    const bool last = i + 1 == params_.gcn.size();
    if (last && l.has_relu) bad_arch("the last GCN layer must not apply ReLU");
    width = l.w.cols();
  }
  a_hat_ = renormalized_adjacency_operator(
      build_grid_graph(arch_.height, arch_.width, arch_.connectivity));
}

GcnModel init_model(std::uint64_t seed, const Architecture& arch) {
  arch.validate();
  std::mt19937_64 rng(seed);
  Parameters p;
  std::size_t channels = arch.in_channels;
  for (std::size_t out : arch.conv_channels) {
    ConvLayerParams c(out, channels);
    const double s = std::sqrt(6.0 / static_cast<double>(9 * (channels + out)));
    for (double& k : c.kernels) k = uniform_symmetric(rng, s);
    p.conv.push_back(std::move(c));
    channels = out;
  }
  for (std::size_t i = 0; i < arch.gcn_dims.size(); ++i) {
    const std::size_t out = arch.gcn_dims[i];
    GcnLayerParams l{DenseMatrix(channels, out), i + 1 < arch.gcn_dims.size()};
    const double s = std::sqrt(6.0 / static_cast<double>(channels + out));
    for (double& w : l.w.data()) w = uniform_symmetric(rng, s);
    p.gcn.push_back(std::move(l));
    channels = out;
  }
  return GcnModel(arch, std::move(p));
}

namespace {

// Scatter-style 3×3 same-padding convolution (cross-correlation), without
// bias or activation.
void conv3x3_accumulate(const ConvLayerParams& layer, const Tensor3& in, Tensor3& out) {
  const std::size_t h = in.height;
  const std::size_t w = in.width;
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double k = layer.kernel(o, i, ky, kx);
          if (k == 0.0) continue;
          // out(y, x) += k * in(y + ky − 1, x + kx − 1) where the source is in range.
          const std::size_t y0 = ky == 0 ? 1 : 0;
          const std::size_t y1 = ky == 2 ? h - 1 : h;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          for (std::size_t y = y0; y < y1; ++y) {
            const double* src = &in.data[(i * h + (y + ky - 1)) * w];
            double* dst = &out.data[(o * h + y) * w];
            for (std::size_t x = x0; x < x1; ++x) dst[x] += k * src[x + kx - 1];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor3 conv_forward(std::span<const ConvLayerParams> layers, const Tensor3& image,
                     ConvCache* cache) {
  Tensor3 cur = image;
  for (const auto& layer : layers) {
    if (layer.in_channels != cur.channels) {
      throw Error(ErrorKind::kInvalidDimension,
                  "conv layer expects " + std::to_string(layer.in_channels) + " channels, got " +
                      std::to_string(cur.channels));
    }
    Tensor3 out(layer.out_channels, cur.height, cur.width);
    const std::size_t plane = cur.height * cur.width;
    for (std::size_t o = 0; o < layer.out_channels; ++o)
      std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(o * plane), plane, layer.bias[o]);
    conv3x3_accumulate(layer, cur, out);
    if (cache != nullptr) {
      cache->inputs.push_back(cur);
      cache->pre_activations.push_back(out);
    }
    for (double& v : out.data) v = std::max(v, 0.0);
    cur = std::move(out);
  }
  return cur;
}

DenseMatrix relu(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (double& v : out.data()) v = std::max(v, 0.0);
  return out;
}

DenseMatrix gcn_forward(const SparseOperator& a_hat, const DenseMatrix& h,
                        const GcnLayerParams& layer) {
  if (h.cols() != layer.w.rows()) {
    throw Error(ErrorKind::kInvalidDimension,
                "GCN layer expects " + std::to_string(layer.w.rows()) + " features, got " +
                    std::to_string(h.cols()));
  }
  DenseMatrix z = matmul(a_hat.apply(h), layer.w);
  return layer.has_relu ? relu(z) : z;
}

namespace {

// Rows shifted by their maximum; throws on non-finite input.
DenseMatrix shifted_rows(const DenseMatrix& logits) {
  if (logits.cols() < 2) {
    throw Error(ErrorKind::kInvalidDimension, "softmax needs at least two classes");
  }
  DenseMatrix z(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : in) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kNumericalFailure,
                    "non-finite logit in row " + std::to_string(r));
      }
      mx = std::max(mx, v);
    }
    auto o = z.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = in[c] - mx;
  }
  return z;
}

double exp_sum(std::span<const double> z) {
  double sum = 0.0;
  for (double v : z) sum += std::exp(v);
  return sum;
}

}  // namespace

DenseMatrix log_softmax_rows(const DenseMatrix& logits) {
  DenseMatrix z = shifted_rows(logits);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const double log_sum = std::log(exp_sum(row));
    for (double& v : row) v -= log_sum;
  }
  return z;
}

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  DenseMatrix z = shifted_rows(logits);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const double sum = exp_sum(row);
    for (double& v : row) v = std::exp(v) / sum;
  }
  return z;
}

DenseMatrix to_node_features(const Tensor3& features) {
  const std::size_t n = features.height * features.width;
  DenseMatrix h(n, features.channels);
  for (std::size_t c = 0; c < features.channels; ++c)
    for (std::size_t p = 0; p < n; ++p) h(p, c) = features.data[c * n + p];
  return h;
}

ForwardCache model_forward(const GcnModel& m, const Tensor3& patch) {
  const Architecture& arch = m.architecture();
  if (patch.channels != arch.in_channels || patch.height != arch.height ||
      patch.width != arch.width) {
    throw Error(ErrorKind::kInvalidDimension,
                "patch is " + std::to_string(patch.channels) + "x" +
                    std::to_string(patch.height) + "x" + std::to_string(patch.width) +
                    ", model expects " + std::to_string(arch.in_channels) + "x" +
                    std::to_string(arch.height) + "x" + std::to_string(arch.width));
  }
  ForwardCache cache;
  cache.conv_output = conv_forward(m.params().conv, patch, &cache.conv);
  DenseMatrix h = to_node_features(cache.conv_output);
  for (const auto& layer : m.params().gcn) {
    cache.gcn_inputs.push_back(h);
    cache.aggregated.push_back(m.a_hat().apply(h));
    cache.pre_activations.push_back(matmul(cache.aggregated.back(), layer.w));
    h = layer.has_relu ? relu(cache.pre_activations.back()) : cache.pre_activations.back();
  }
  cache.log_probs = log_softmax_rows(h);
  cache.probs = softmax_rows(h);
  return cache;
}

BackwardResult model_backward(const GcnModel& m, const ForwardCache& cache,
                              std::span<const std::uint8_t> labels, LossReduction reduction) {
  const std::size_t n = cache.probs.rows();
  if (labels.size() != n) {
    throw Error(ErrorKind::kInvalidDimension,
                "expected " + std::to_string(n) + " labels, got " + std::to_string(labels.size()));
  }

  BackwardResult result;
  result.loss = nll_loss(cache.log_probs, labels);
  const double scale = reduction == LossReduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  if (reduction == LossReduction::kSum) result.loss *= static_cast<double>(n);
  result.grads = zeros_like(m.params());

  // d loss / d logits = (p − onehot) · scale
  DenseMatrix grad = cache.probs;
  for (std::size_t r = 0; r < n; ++r) grad(r, labels[r]) -= 1.0;
  for (double& v : grad.data()) v *= scale;

  const auto& gcn = m.params().gcn;
  for (std::size_t l = gcn.size(); l-- > 0;) {
    // grad holds d loss / d (Â H W) for layer l.
    result.grads.gcn[l].w = matmul_tn(cache.aggregated[l], grad);
    // Â is symmetric, so Âᵀ = Â.
    DenseMatrix grad_h = m.a_hat().apply(matmul_nt(grad, gcn[l].w));
    if (l > 0 && gcn[l - 1].has_relu) {
      const DenseMatrix& z = cache.pre_activations[l - 1];
      for (std::size_t i = 0; i < grad_h.size(); ++i)
        if (z.data()[i] <= 0.0) grad_h.data()[i] = 0.0;
    }
    grad = std::move(grad_h);
  }

  const auto& conv = m.params().conv;
  if (conv.empty()) return result;

  // Node-feature gradient back to the conv output layout.
  const Tensor3& out = cache.conv_output;
  const std::size_t plane = out.height * out.width;
  Tensor3 grad_t(out.channels, out.height, out.width);
  for (std::size_t c = 0; c < out.channels; ++c)
    for (std::size_t p = 0; p < plane; ++p) grad_t.data[c * plane + p] = grad(p, c);

  for (std::size_t l = conv.size(); l-- > 0;) {
    const ConvLayerParams& layer = conv[l];
    const Tensor3& pre = cache.conv.pre_activations[l];
    const Tensor3& in = cache.conv.inputs[l];
    for (std::size_t i = 0; i < grad_t.data.size(); ++i)
      if (pre.data[i] <= 0.0) grad_t.data[i] = 0.0;

    ConvLayerParams& g = result.grads.conv[l];
    const std::size_t h = in.height;
    const std::size_t w = in.width;
    Tensor3 grad_in(in.channels, h, w);
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
      const double* go = &grad_t.data[o * plane];
      double b = 0.0;
      for (std::size_t p = 0; p < plane; ++p) b += go[p];
      g.bias[o] = b;
      for (std::size_t i = 0; i < layer.in_channels; ++i) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::size_t y0 = ky == 0 ? 1 : 0;
            const std::size_t y1 = ky == 2 ? h - 1 : h;
            const std::size_t x0 = kx == 0 ? 1 : 0;
            const std::size_t x1 = kx == 2 ? w - 1 : w;
            const double k = layer.kernel(o, i, ky, kx);
            double acc = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
              const std::size_t src_row = (i * h + (y + ky - 1)) * w;
              const double* src = &in.data[src_row];
              double* dsrc = &grad_in.data[src_row];
              const double* gy = go + y * w;
              for (std::size_t x = x0; x < x1; ++x) {
                acc += gy[x] * src[x + kx - 1];
                dsrc[x + kx - 1] += k * gy[x];
              }
            }
            g.kernel(o, i, ky, kx) = acc;
          }
        }
      }
    }
    grad_t = std::move(grad_in);
  }
  return result;
}

std::vector<std::uint8_t> argmax_rows(const DenseMatrix& probs) {
  std::vector<std::uint8_t> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto row = probs.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = static_cast<std::uint8_t>(best);
  }
  return out;
}

std::vector<std::uint8_t> predict_mask(const GcnModel& m, const Tensor3& patch) {
  return argmax_rows(model_forward(m, patch).probs);
}

}  // namespace gcnseg
