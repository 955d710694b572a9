#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "gcnseg/synthetic.hpp"
#include "gcnseg/training.hpp"
#include "test_support.hpp"

namespace gcnseg {
namespace {

Architecture tiny_arch() {
  Architecture a;
  a.height = 8;
  a.width = 8;
  a.conv_channels = {4};
  a.gcn_dims = {4, 2};
  return a;
}

std::vector<Sample> tiny_samples(std::size_t count, std::uint64_t seed = 3) {
  SyntheticOptions o;
  o.count = count;
  o.size = 8;
  o.min_side = 2;
  o.max_side = 4;
  o.seed = seed;
  return make_synthetic_samples(o);
}

std::vector<double> flat(const Parameters& p) {
  std::vector<double> out;
  for_each_tensor(p, [&](const std::string&, const std::vector<std::uint32_t>&,
                         std::span<const double> v) { out.insert(out.end(), v.begin(), v.end()); });
  return out;
}

TEST(NllLoss, Examples) {
  DenseMatrix exact(2, 2, {0.0, -INFINITY, -INFINITY, 0.0});
  EXPECT_EQ(nll_loss(exact, std::vector<std::uint8_t>{0, 1}), 0.0);
  const double l2 = std::log(0.5);
  EXPECT_NEAR(nll_loss(DenseMatrix(3, 2, {l2, l2, l2, l2, l2, l2}),
                       std::vector<std::uint8_t>{0, 1, 1}),
              std::log(2.0), 1e-12);
  const DenseMatrix lp(2, 2, {std::log(0.5), std::log(0.5), std::log(0.75), std::log(0.25)});
  EXPECT_NEAR(nll_loss(lp, std::vector<std::uint8_t>{0, 1}), 1.039720770839918, 1e-12);
  EXPECT_NEAR(nll_loss(lp, std::vector<std::uint8_t>{0, 1}),
              (std::log(2.0) + std::log(4.0)) / 2.0, 1e-15);
}

TEST(NllLoss, Errors) {
  const DenseMatrix lp(2, 2, -std::log(2.0));
  EXPECT_ERROR_KIND(nll_loss(lp, std::vector<std::uint8_t>{0, 2}), ErrorKind::kInvalidLabel);
  EXPECT_ERROR_KIND(nll_loss(lp, std::vector<std::uint8_t>{0}), ErrorKind::kInvalidDimension);
}

TEST(SgdStep, Examples) {
  GcnModel m = init_model(1, tiny_arch());
  const Parameters before = m.params();
  GradientSet g = zeros_like(before);
  for_each_tensor(g, [](const std::string&, const std::vector<std::uint32_t>&,
                        std::span<double> v) { std::fill(v.begin(), v.end(), 0.5); });
  sgd_step(m.params(), g, 0.0);
  EXPECT_EQ(m.params(), before);

  m.params().gcn[0].w(0, 0) = 1.0;
  sgd_step(m.params(), g, 0.1);
  EXPECT_DOUBLE_EQ(m.params().gcn[0].w(0, 0), 0.95);

  std::mt19937_64 rng(2);
  for_each_tensor(g, [&](const std::string&, const std::vector<std::uint32_t>&,
                         std::span<double> v) {
    for (double& x : v) x = testing::uniform(rng, -1, 1);
  });
  const std::vector<double> start = flat(m.params());
  sgd_step(m.params(), g, 1e-3);
  sgd_step(m.params(), g, -1e-3);
  const std::vector<double> back = flat(m.params());
  for (std::size_t i = 0; i < start.size(); ++i)
    EXPECT_LE(std::abs(back[i] - start[i]), 1e-12 * std::max(1.0, std::abs(start[i])));
}

TEST(SgdStep, ShapeMismatch) {
  GcnModel m = init_model(1, tiny_arch());
  GradientSet g = zeros_like(m.params());
  g.gcn[0].w = DenseMatrix(3, 3);
  EXPECT_ERROR_KIND(sgd_step(m.params(), g, 0.1), ErrorKind::kInvalidDimension);
  g = zeros_like(m.params());
  g.conv.clear();
  EXPECT_ERROR_KIND(sgd_step(m.params(), g, 0.1), ErrorKind::kInvalidDimension);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0.0;
  EXPECT_ERROR_KIND(c.validate(), ErrorKind::kConfig);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_ERROR_KIND(c.validate(), ErrorKind::kConfig);
  c = TrainConfig{};
  c.epochs = 0;
  EXPECT_ERROR_KIND(c.validate(), ErrorKind::kConfig);
}

TEST(ShuffleOrder, ReferenceGenerator) {
  for (std::size_t n : {0u, 1u, 2u, 7u, 50u}) {
    for (std::uint64_t seed : {0ull, 1ull, 12345ull}) {
      for (std::size_t epoch : {0u, 3u}) {
        std::vector<std::size_t> want(n);
        std::iota(want.begin(), want.end(), std::size_t{0});
        std::uint64_t s = seed ^ ((epoch + 1) * 0x9E3779B97F4A7C15ull);
        for (std::size_t i = n; i-- > 1;) {
          s = s * 6364136223846793005ull + 1442695040888963407ull;
          std::swap(want[i], want[(s >> 33) % (i + 1)]);
        }
        EXPECT_EQ(shuffle_order(n, seed, epoch), want);
      }
    }
  }
  EXPECT_NE(shuffle_order(20, 0, 0), shuffle_order(20, 0, 1));
}

TEST(BatchGradient, EqualsAverageOfSingles) {
  const GcnModel m = init_model(5, tiny_arch());
  const std::vector<Sample> data = tiny_samples(5);
  const std::vector<std::size_t> idx = {3, 0, 4};
  const BatchGradient batch = batch_gradient(m, data, idx);

  std::vector<double> avg;
  double loss = 0.0;
  for (std::size_t i : idx) {
    const BatchGradient one = batch_gradient(m, data, std::vector<std::size_t>{i});
    const std::vector<double> f = flat(one.grads);
    if (avg.empty()) avg.assign(f.size(), 0.0);
    for (std::size_t k = 0; k < f.size(); ++k) avg[k] += f[k] / 3.0;
    loss += one.mean_loss / 3.0;
  }
  const std::vector<double> got = flat(batch.grads);
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], avg[k], 1e-12);
  EXPECT_NEAR(batch.mean_loss, loss, 1e-12);
}

TEST(BatchGradient, ThreadCountDoesNotChangeBits) {
  const GcnModel m = init_model(6, tiny_arch());
  const std::vector<Sample> data = tiny_samples(7);
  std::vector<std::size_t> idx(7);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const BatchGradient one = batch_gradient(m, data, idx, LossReduction::kMean, 1);
  const BatchGradient four = batch_gradient(m, data, idx, LossReduction::kMean, 4);
  EXPECT_EQ(one.grads, four.grads);
  EXPECT_EQ(one.mean_loss, four.mean_loss);
}

TEST(Train, SingleStepDescent) {
  const std::vector<Sample> data = tiny_samples(4);
  std::vector<std::size_t> idx = {0, 1, 2, 3};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GcnModel m = init_model(seed, tiny_arch());
    const BatchGradient g = batch_gradient(m, data, idx);
    sgd_step(m.params(), g.grads, 1e-6);
    EXPECT_LE(batch_gradient(m, data, idx).mean_loss, g.mean_loss + 1e-12);
  }
}

TEST(Train, EmptyDataset) {
  EXPECT_ERROR_KIND(train(TrainConfig{}, init_model(0, tiny_arch()), {}),
                    ErrorKind::kInvalidDataset);
}

TEST(Train, HistoryAndStepCount) {
  const std::vector<Sample> data = tiny_samples(5);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.log_every = 1;
  std::size_t steps = 0;
  TrainCallbacks cb;
  cb.on_step = [&](std::size_t, double loss) {
    ++steps;
    EXPECT_GE(loss, 0.0);
  };
  const TrainResult r = train(cfg, init_model(0, tiny_arch()), data, data, cb);
  EXPECT_EQ(steps, 3u * 3u);
  ASSERT_EQ(r.history.epochs.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(r.history.epochs[e].epoch, e + 1);
    EXPECT_TRUE(r.history.epochs[e].eval.has_value());
    EXPECT_GE(r.history.epochs[e].mean_loss, 0.0);
  }
}

TEST(Train, Deterministic) {
  const std::vector<Sample> data = tiny_samples(6);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 0.05;
  const TrainResult a = train(cfg, init_model(4, tiny_arch()), data);
  const TrainResult b = train(cfg, init_model(4, tiny_arch()), data);
  EXPECT_EQ(encode_checkpoint(a.model), encode_checkpoint(b.model));
  ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e)
    EXPECT_EQ(a.history.epochs[e].mean_loss, b.history.epochs[e].mean_loss);
}

TEST(Train, LossDecreasesOnSeparableToyTask) {
  const std::vector<Sample> data = tiny_samples(16);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.05;
  const TrainResult r = train(cfg, init_model(2, tiny_arch()), data);
  EXPECT_LT(r.history.epochs.back().mean_loss, r.history.epochs.front().mean_loss);
}

TEST(Train, NonFiniteLossReportsStep) {
  const std::vector<Sample> data = tiny_samples(2);
  GcnModel m = init_model(0, tiny_arch());
  m.params().gcn.back().w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train(TrainConfig{}, m, data);
    FAIL() << "expected numerical failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumericalFailure);
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(Train, WritesLastAndBestCheckpoints) {
  testing::TempDir dir("ckpt");
  const std::vector<Sample> data = tiny_samples(4);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.checkpoint_path = dir / "model.ckpt";
  const TrainResult r = train(cfg, init_model(0, tiny_arch()), data, data);
  ASSERT_TRUE(std::filesystem::exists(dir / "model.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "model.ckpt.best"));
  EXPECT_EQ(load_checkpoint(dir / "model.ckpt").params(), r.model.params());
}

TEST(Checkpoint, RoundTripAndLayout) {
  Architecture arch = tiny_arch();
  arch.connectivity = Connectivity::kEight;
  const GcnModel m = init_model(8, arch);
  const std::string bytes = encode_checkpoint(m);
  ASSERT_EQ(bytes.substr(0, 8), "GCNCKPT1");
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 8, 4);
  EXPECT_EQ(count, 1u + 2u + 2u);

  const GcnModel back = decode_checkpoint(bytes);
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(back.architecture(), m.architecture());
  EXPECT_EQ(encode_checkpoint(back), bytes);

  // Payload tail is the last GCN weight as little-endian float64.
  const DenseMatrix& w = m.params().gcn.back().w;
  double last = 0.0;
  std::memcpy(&last, bytes.data() + bytes.size() - 8, 8);
  EXPECT_EQ(last, w.data().back());
}

TEST(Checkpoint, RejectsCorruptInput) {
  const std::string bytes = encode_checkpoint(init_model(1, tiny_arch()));
  EXPECT_ERROR_KIND(decode_checkpoint("NOTACKPT"), ErrorKind::kFormat);
  EXPECT_ERROR_KIND(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ErrorKind::kFormat);
  EXPECT_ERROR_KIND(decode_checkpoint(bytes + "x"), ErrorKind::kFormat);
  std::string huge = bytes;
  huge[8] = '\xff';
  huge[9] = '\xff';
  EXPECT_ERROR_KIND(decode_checkpoint(huge), ErrorKind::kFormat);
  EXPECT_ERROR_KIND(load_checkpoint("/nonexistent/model.ckpt"), ErrorKind::kFormat);
}

TEST(Evaluate, CountsEveryPixel) {
  const std::vector<Sample> data = tiny_samples(3);
  const ConfusionMatrix cm = evaluate(init_model(0, tiny_arch()), data);
  EXPECT_EQ(cm.total(), 3u * 64u);
}

}  // namespace
}  // namespace gcnseg
