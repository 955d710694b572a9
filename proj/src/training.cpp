#include "gcnseg/training.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <thread>

#include "gcnseg/error.hpp"

namespace gcnseg {

double nll_loss(const DenseMatrix& log_probs, std::span<const std::uint8_t> labels) {
  if (labels.size() != log_probs.rows()) {
    throw Error(ErrorKind::kInvalidDimension, "nll_loss: " + std::to_string(labels.size()) +
                                                  " labels for " +
                                                  std::to_string(log_probs.rows()) + " rows");
  }
  if (labels.empty()) throw Error(ErrorKind::kInvalidDimension, "nll_loss: no rows");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= log_probs.cols()) {
      throw Error(ErrorKind::kInvalidLabel, "label " + std::to_string(labels[i]) + " at row " +
                                                std::to_string(i) + " is outside [0, " +
                                                std::to_string(log_probs.cols()) + ")");
    }
    sum -= log_probs(i, labels[i]);
  }
  return sum / static_cast<double>(labels.size());
}

void sgd_step(Parameters& params, const GradientSet& grads, double lr) {
  std::vector<std::span<const double>> g;
  std::vector<std::vector<std::uint32_t>> g_dims;
  for_each_tensor(grads, [&](const std::string&, const std::vector<std::uint32_t>& dims,
                             std::span<const double> v) {
    g.push_back(v);
    g_dims.push_back(dims);
  });
  std::size_t idx = 0;
  for_each_tensor(params, [&](const std::string& name, const std::vector<std::uint32_t>& dims,
                              std::span<double> v) {
    if (idx >= g.size() || g_dims[idx] != dims) {
      throw Error(ErrorKind::kInvalidDimension, "gradient does not match tensor " + name);
    }
    const auto& gv = g[idx++];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * gv[i];
  });
  if (idx != g.size()) throw Error(ErrorKind::kInvalidDimension, "gradient has extra tensors");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::kConfig, "learning_rate must be > 0");
  }
  if (batch_size == 0) throw Error(ErrorKind::kConfig, "batch_size must be >= 1");
  if (epochs == 0) throw Error(ErrorKind::kConfig, "epochs must be >= 1");
  if (threads == 0) throw Error(ErrorKind::kConfig, "threads must be >= 1");
}

std::vector<std::size_t> shuffle_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::uint64_t s = seed ^ ((static_cast<std::uint64_t>(epoch) + 1) * 0x9E3779B97F4A7C15ULL);
  for (std::size_t i = n; i-- > 1;) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    const std::size_t j = static_cast<std::size_t>((s >> 33) % (i + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

namespace {

void add_into(GradientSet& acc, const GradientSet& g) {
  std::vector<std::span<const double>> src;
  for_each_tensor(g, [&src](const std::string&, const std::vector<std::uint32_t>&,
                            std::span<const double> v) { src.push_back(v); });
  std::size_t idx = 0;
  for_each_tensor(acc, [&](const std::string&, const std::vector<std::uint32_t>&,
                           std::span<double> v) {
    const auto& s = src[idx++];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += s[i];
  });
}

void scale_into(GradientSet& g, double s) {
  for_each_tensor(g, [s](const std::string&, const std::vector<std::uint32_t>&,
                         std::span<double> v) {
    for (double& x : v) x *= s;
  });
}

// Runs fn(k) for k in [0, count) on up to `threads` workers. Each k writes
// only its own slot, so scheduling does not affect results.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  const std::size_t workers = std::min(threads, count);
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = next++; k < count; k = next++) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

BatchGradient batch_gradient(const GcnModel& model, std::span<const Sample> data,
                             std::span<const std::size_t> indices, LossReduction reduction,
                             std::size_t threads) {
  if (indices.empty()) throw Error(ErrorKind::kInvalidArgument, "empty batch");
  std::vector<BackwardResult> parts(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t k) {
    const Sample& s = data[indices[k]];
    ForwardCache cache = model_forward(model, s.image);
    parts[k] = model_backward(model, cache, s.mask, reduction);
  });

  BatchGradient out{0.0, zeros_like(model.params())};
  for (const auto& p : parts) {
    out.mean_loss += p.loss;
    add_into(out.grads, p.grads);
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  out.mean_loss *= inv;
  scale_into(out.grads, inv);
  return out;
}

ConfusionMatrix evaluate(const GcnModel& model, std::span<const Sample> data) {
  ConfusionMatrix cm;
  for (const Sample& s : data) cm = accumulate(cm, predict_mask(model, s.image), s.mask);
  return cm;
}

TrainResult train(const TrainConfig& cfg, GcnModel model, std::span<const Sample> data,
                  std::span<const Sample> eval_data, const TrainCallbacks& callbacks) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorKind::kInvalidDataset, "training set is empty");

  TrainHistory history;
  double best_iou = -1.0;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::size_t> order = shuffle_order(data.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + b, e - b);
      BatchGradient g;
      try {
        g = batch_gradient(model, data, batch, cfg.loss_reduction, cfg.threads);
      } catch (const Error& ex) {
        if (ex.kind() != ErrorKind::kNumericalFailure) throw;
        throw Error(ErrorKind::kNumericalFailure,
                    "non-finite values at step " + std::to_string(step));
      }
      if (!std::isfinite(g.mean_loss)) {
        throw Error(ErrorKind::kNumericalFailure,
                    "non-finite loss at step " + std::to_string(step));
      }
      loss_sum += g.mean_loss * static_cast<double>(batch.size());
      sgd_step(model.params(), g.grads, cfg.learning_rate);
      ++step;
      if (cfg.log_every > 0 && step % cfg.log_every == 0 && callbacks.on_step) {
        callbacks.on_step(step, g.mean_loss);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.mean_loss = loss_sum / static_cast<double>(data.size());
    if (!eval_data.empty()) rec.eval = compute_metrics(evaluate(model, eval_data));
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!cfg.checkpoint_path.empty()) {
      save_checkpoint(model, cfg.checkpoint_path);
      if (rec.eval && rec.eval->iou > best_iou) {
        best_iou = rec.eval->iou;
        auto best = cfg.checkpoint_path;
        best += ".best";
        save_checkpoint(model, best);
      }
    }
    history.epochs.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);
  }
  return {std::move(model), std::move(history)};
}

// ---------------------------------------------------------------------------
// Checkpoint container

namespace {

constexpr char kMagic[] = "GCNCKPT1";
constexpr std::size_t kMagicLen = 8;
const std::string kGridTensor = "meta.grid";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::kFormat, std::string("checkpoint truncated reading ") + what +
                                          " at byte " + std::to_string(pos_));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8, "payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n, "tensor name");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct ManifestEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::size_t count() const {
    std::size_t c = 1;
    for (auto d : dims) c *= d;
    return c;
  }
};

[[noreturn]] void bad_checkpoint(const std::string& msg) {
  throw Error(ErrorKind::kFormat, "checkpoint: " + msg);
}

}  // namespace

std::string encode_checkpoint(const GcnModel& model) {
  const Architecture& arch = model.architecture();
  std::vector<ManifestEntry> manifest;
  std::vector<std::span<const double>> payloads;
  const std::vector<double> grid = {static_cast<double>(arch.height),
                                    static_cast<double>(arch.width),
                                    static_cast<double>(static_cast<int>(arch.connectivity))};
  manifest.push_back({kGridTensor, {3}});
  payloads.push_back(grid);
  for_each_tensor(model.params(), [&](const std::string& name,
                                      const std::vector<std::uint32_t>& dims,
                                      std::span<const double> v) {
    manifest.push_back({name, dims});
    payloads.push_back(v);
  });

  std::string out(kMagic, kMagicLen);
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  for (const auto& m : manifest) {
    put_u32(out, static_cast<std::uint32_t>(m.name.size()));
    out += m.name;
    put_u32(out, static_cast<std::uint32_t>(m.dims.size()));
    for (auto d : m.dims) put_u32(out, d);
  }
  for (const auto& p : payloads)
    for (double d : p) put_f64(out, d);
  return out;
}

GcnModel decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagicLen || bytes.compare(0, kMagicLen, kMagic) != 0) {
    bad_checkpoint("missing GCNCKPT1 magic");
  }
  Reader r(bytes);
  r.str(kMagicLen);
  const std::uint32_t count = r.u32("tensor count");
  std::vector<ManifestEntry> manifest;
  for (std::uint32_t t = 0; t < count; ++t) {
    ManifestEntry m;
    m.name = r.str(r.u32("name length"));
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) bad_checkpoint("tensor '" + m.name + "' has rank " + std::to_string(rank));
    for (std::uint32_t k = 0; k < rank; ++k) m.dims.push_back(r.u32("dims"));
    manifest.push_back(std::move(m));
  }
  std::vector<std::vector<double>> payloads;
  for (const auto& m : manifest) {
    if (m.count() > bytes.size() / 8) bad_checkpoint("tensor '" + m.name + "' exceeds file size");
    r.need(m.count() * 8, "payload");
    std::vector<double> v(m.count());
    for (double& d : v) d = r.f64();
    payloads.push_back(std::move(v));
  }
  if (r.offset() != bytes.size()) bad_checkpoint("trailing bytes after payloads");

  if (manifest.empty() || manifest[0].name != kGridTensor ||
      manifest[0].dims != std::vector<std::uint32_t>{3}) {
    bad_checkpoint("first tensor must be meta.grid[3]");
  }
  Architecture arch;
  arch.height = static_cast<std::size_t>(payloads[0][0]);
  arch.width = static_cast<std::size_t>(payloads[0][1]);
  const int conn = static_cast<int>(payloads[0][2]);
  if (conn != 4 && conn != 8) bad_checkpoint("connectivity must be 4 or 8");
  arch.connectivity = static_cast<Connectivity>(conn);
  arch.conv_channels.clear();
  arch.gcn_dims.clear();

  Parameters params;
  std::size_t i = 1;
  auto expect_name = [&](const std::string& want) {
    return i < manifest.size() && manifest[i].name == want;
  };
  for (std::size_t l = 0; expect_name("conv" + std::to_string(l) + ".kernel"); ++l) {
    const auto& dims = manifest[i].dims;
    if (dims.size() != 4 || dims[2] != 3 || dims[3] != 3) bad_checkpoint("bad conv kernel dims");
    ConvLayerParams c(dims[0], dims[1]);
    c.kernels = payloads[i++];
    if (!expect_name("conv" + std::to_string(l) + ".bias")) bad_checkpoint("missing conv bias");
    if (manifest[i].dims != std::vector<std::uint32_t>{dims[0]}) bad_checkpoint("bad bias dims");
    c.bias = payloads[i++];
    if (l == 0) arch.in_channels = c.in_channels;
    arch.conv_channels.push_back(c.out_channels);
    params.conv.push_back(std::move(c));
  }
  for (std::size_t l = 0; expect_name("gcn" + std::to_string(l) + ".weight"); ++l) {
    const auto& dims = manifest[i].dims;
    if (dims.size() != 2) bad_checkpoint("bad GCN weight dims");
    if (params.conv.empty() && l == 0) arch.in_channels = dims[0];
    params.gcn.push_back({DenseMatrix(dims[0], dims[1], payloads[i++]), true});
    arch.gcn_dims.push_back(dims[1]);
  }
  if (i != manifest.size()) bad_checkpoint("unexpected tensor '" + manifest[i].name + "'");
  if (params.gcn.empty()) bad_checkpoint("no GCN layers");
  params.gcn.back().has_relu = false;
  return GcnModel(std::move(arch), std::move(params));
}

void save_checkpoint(const GcnModel& model, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kFormat, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kFormat, "short write to " + path.string());
}

GcnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kFormat, "cannot open checkpoint " + path.string());
  return decode_checkpoint(
      std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

}  // namespace gcnseg
