#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <utility>
#include <vector>

#include "gcnseg/chebyshev.hpp"
#include "gcnseg/dataset.hpp"
#include "gcnseg/error.hpp"
#include "gcnseg/graph.hpp"
#include "gcnseg/metrics.hpp"
#include "gcnseg/model.hpp"
#include "gcnseg/spectral.hpp"
#include "gcnseg/synthetic.hpp"
#include "gcnseg/training.hpp"
#include "gcnseg/verify.hpp"

namespace py = pybind11;
using namespace gcnseg;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

DenseMatrix to_matrix(const F64& a) {
  if (a.ndim() == 1) {
    return DenseMatrix(a.shape(0), 1, std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) throw Error(ErrorKind::kInvalidDimension, "expected a 1-D or 2-D array");
  return DenseMatrix(a.shape(0), a.shape(1),
                     std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> from_matrix(const DenseMatrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::memcpy(out.mutable_data(), m.data().data(), m.size() * sizeof(double));
  return out;
}

py::array_t<double> from_vector(const std::vector<double>& v) {
  return py::array_t<double>(py::ssize_t(v.size()), v.data());
}

py::array_t<std::uint8_t> from_bytes(const std::vector<std::uint8_t>& v,
                                     std::vector<py::ssize_t> shape) {
  py::array_t<std::uint8_t> out(shape);
  std::memcpy(out.mutable_data(), v.data(), v.size());
  return out;
}

Tensor3 to_tensor(const F64& a) {
  if (a.ndim() != 3) throw Error(ErrorKind::kInvalidDimension, "expected a (C, H, W) array");
  Tensor3 t(a.shape(0), a.shape(1), a.shape(2));
  std::memcpy(t.data.data(), a.data(), t.data.size() * sizeof(double));
  return t;
}

// Images as (H, W) or (H, W, C) uint8.
RasterImage to_raster(const U8& a) {
  RasterImage r;
  if (a.ndim() == 2) {
    r.channels = 1;
  } else if (a.ndim() == 3) {
    r.channels = a.shape(2);
  } else {
    throw Error(ErrorKind::kInvalidDimension, "expected an (H, W) or (H, W, C) array");
  }
  r.height = a.shape(0);
  r.width = a.shape(1);
  r.pixels.assign(a.data(), a.data() + a.size());
  return r;
}

py::array_t<std::uint8_t> from_raster(const RasterImage& r) {
  if (r.channels == 1) {
    return from_bytes(r.pixels, {py::ssize_t(r.height), py::ssize_t(r.width)});
  }
  return from_bytes(r.pixels,
                    {py::ssize_t(r.height), py::ssize_t(r.width), py::ssize_t(r.channels)});
}

BinaryMask to_mask(const U8& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::kInvalidDimension, "expected an (H, W) mask");
  BinaryMask m;
  m.height = a.shape(0);
  m.width = a.shape(1);
  m.values.assign(a.data(), a.data() + a.size());
  return m;
}

Connectivity to_connectivity(int c) {
  if (c == 4) return Connectivity::kFour;
  if (c == 8) return Connectivity::kEight;
  throw Error(ErrorKind::kInvalidArgument, "connectivity must be 4 or 8");
}

// (N, 3, S, S) float images and (N, S, S) masks into samples.
std::vector<Sample> to_samples(const F64& images, const U8& masks) {
  if (images.ndim() != 4 || masks.ndim() != 3 || images.shape(0) != masks.shape(0) ||
      images.shape(2) != masks.shape(1) || images.shape(3) != masks.shape(2)) {
    throw Error(ErrorKind::kInvalidDimension,
                "expected images (N, C, H, W) and masks (N, H, W)");
  }
  const std::size_t n = images.shape(0);
  const std::size_t c = images.shape(1), h = images.shape(2), w = images.shape(3);
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].image = Tensor3(c, h, w);
    std::memcpy(out[i].image.data.data(), images.data() + i * c * h * w,
                c * h * w * sizeof(double));
    out[i].mask.assign(masks.data() + i * h * w, masks.data() + (i + 1) * h * w);
    out[i].origin.source_id = "array";
    out[i].origin.row = i;
  }
  return out;
}

py::tuple from_samples(const std::vector<Sample>& samples, std::size_t size) {
  const std::size_t n = samples.size();
  py::array_t<double> images({n, std::size_t{3}, size, size});
  py::array_t<std::uint8_t> masks({n, size, size});
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(images.mutable_data() + i * 3 * size * size, samples[i].image.data.data(),
                3 * size * size * sizeof(double));
    std::memcpy(masks.mutable_data() + i * size * size, samples[i].mask.data(), size * size);
  }
  return py::make_tuple(images, masks);
}

py::dict metrics_dict(const ConfusionMatrix& cm) {
  const Metrics m = compute_metrics(cm);
  py::dict d;
  d["tp"] = cm.tp;
  d["fp"] = cm.fp;
  d["fn"] = cm.fn;
  d["tn"] = cm.tn;
  d["oa"] = m.oa;
  d["f1"] = m.f1;
  d["iou"] = m.iou;
  return d;
}

}  // namespace

PYBIND11_MODULE(_gcnseg, m) {
  m.doc() = "Graph convolutional segmentation of building footprints";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<Graph>(m, "Graph")
      .def(py::init([](std::size_t n, const std::vector<std::tuple<std::uint32_t, std::uint32_t,
                                                                     double>>& edges) {
             std::vector<Edge> es;
             es.reserve(edges.size());
             for (const auto& [i, j, w] : edges) es.push_back({i, j, w});
             return Graph(n, std::move(es));
           }),
           py::arg("num_nodes"), py::arg("edges"))
      .def_property_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("edges",
                             [](const Graph& g) {
                               std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> out;
                               for (const Edge& e : g.edges()) out.emplace_back(e.i, e.j, e.weight);
                               return out;
                             })
      .def("adjacency", [](const Graph& g) { return from_matrix(g.adjacency()); });

  m.def(
      "grid_graph",
      [](std::size_t h, std::size_t w, int connectivity) {
        return build_grid_graph(h, w, to_connectivity(connectivity));
      },
      py::arg("height"), py::arg("width"), py::arg("connectivity") = 4);
  m.def("degree", [](const Graph& g) { return from_vector(degree_diagonal(g)); });
  m.def("laplacian", [](const Graph& g) { return from_matrix(laplacian(g)); });
  m.def("renormalized_adjacency",
        [](const Graph& g) { return from_matrix(renormalized_adjacency(g)); });

  m.def(
      "eig_sym",
      [](const F64& a) {
        const SpectralDecomposition dec = eig_sym(to_matrix(a));
        return py::make_tuple(from_vector(dec.lambda), from_matrix(dec.phi));
      },
      py::arg("matrix"), "Eigenvalues ascending and orthonormal eigenvectors as columns.");

  m.def(
      "lambda_max",
      [](const Graph& g, double tol, int max_iter, double inflation) {
        PowerIterationOptions o;
        o.tol = tol;
        o.max_iter = max_iter;
        o.inflation = inflation;
        return lambda_max(g, o);
      },
      py::arg("graph"), py::arg("tol") = 1e-7, py::arg("max_iter") = 10000,
      py::arg("inflation") = 1.0);
  m.def(
      "cheb_apply",
      [](const Graph& g, std::vector<double> coeffs, const F64& f, std::optional<double> lam) {
        const double lm = lam ? *lam : lambda_max(g);
        const DenseMatrix x = to_matrix(f);
        const DenseMatrix y = cheb_apply(scaled_laplacian(g, lm), ChebCoeffs(std::move(coeffs)), x);
        if (f.ndim() == 1) return py::array(from_vector(y.data()));
        return py::array(from_matrix(y));
      },
      py::arg("graph"), py::arg("coeffs"), py::arg("signal"), py::arg("lam_max") = py::none());

  py::class_<GcnModel>(m, "Model")
      .def_property_readonly("patch_size",
                             [](const GcnModel& g) { return g.architecture().height; })
      .def_property_readonly("num_classes", &GcnModel::num_classes)
      .def_property_readonly("parameter_count",
                             [](const GcnModel& g) { return parameter_count(g.params()); })
      .def(
          "forward",
          [](const GcnModel& g, const F64& image) {
            return from_matrix(model_forward(g, to_tensor(image)).probs);
          },
          py::arg("image"), "Per-pixel class probabilities, shape (H·W, classes).")
      .def(
          "predict",
          [](const GcnModel& g, const F64& image) {
            const auto& a = g.architecture();
            return from_bytes(predict_mask(g, to_tensor(image)),
                              {py::ssize_t(a.height), py::ssize_t(a.width)});
          },
          py::arg("image"))
      .def(
          "evaluate",
          [](const GcnModel& g, const F64& images, const U8& masks) {
            return metrics_dict(evaluate(g, to_samples(images, masks)));
          },
          py::arg("images"), py::arg("masks"))
      .def("save", [](const GcnModel& g, const std::filesystem::path& p) { save_checkpoint(g, p); })
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("to_bytes", [](const GcnModel& g) { return py::bytes(encode_checkpoint(g)); })
      .def_static("from_bytes",
                  [](const py::bytes& b) { return decode_checkpoint(std::string(b)); });

  m.def(
      "init_model",
      [](std::uint64_t seed, std::vector<std::size_t> conv_channels,
         std::vector<std::size_t> gcn_dims, std::size_t patch_size, int connectivity) {
        Architecture a;
        a.conv_channels = std::move(conv_channels);
        a.gcn_dims = std::move(gcn_dims);
        a.height = a.width = patch_size;
        a.connectivity = to_connectivity(connectivity);
        return init_model(seed, a);
      },
      py::arg("seed") = 0, py::arg("conv_channels") = std::vector<std::size_t>{16, 16},
      py::arg("gcn_dims") = std::vector<std::size_t>{32, 2}, py::arg("patch_size") = 64,
      py::arg("connectivity") = 4);

  m.def(
      "train",
      [](GcnModel model, const F64& images, const U8& masks, double lr, std::size_t epochs,
         std::size_t batch_size, std::uint64_t seed, const std::string& reduction,
         std::size_t threads) {
        TrainConfig cfg;
        cfg.learning_rate = lr;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        cfg.threads = threads;
        if (reduction == "mean") {
          cfg.loss_reduction = LossReduction::kMean;
        } else if (reduction == "sum") {
          cfg.loss_reduction = LossReduction::kSum;
        } else {
          throw Error(ErrorKind::kConfig, "loss_reduction must be mean or sum");
        }
        const std::vector<Sample> data = to_samples(images, masks);
        TrainResult r = [&] {
          py::gil_scoped_release release;
          return train(cfg, std::move(model), data);
        }();
        std::vector<double> losses;
        for (const EpochRecord& e : r.history.epochs) losses.push_back(e.mean_loss);
        return py::make_tuple(std::move(r.model), losses);
      },
      py::arg("model"), py::arg("images"), py::arg("masks"), py::arg("lr") = 1e-4,
      py::arg("epochs") = 30, py::arg("batch_size") = 4, py::arg("seed") = 0,
      py::arg("loss_reduction") = "mean", py::arg("threads") = 1,
      "Returns the trained model and the mean loss of each epoch.");

  m.def(
      "nll_loss",
      [](const F64& log_probs, const U8& labels) {
        return nll_loss(to_matrix(log_probs),
                        std::span<const std::uint8_t>(labels.data(), labels.size()));
      },
      py::arg("log_probs"), py::arg("labels"));

  m.def(
      "metrics",
      [](const U8& pred, const U8& truth) {
        if (pred.size() != truth.size()) {
          throw Error(ErrorKind::kInvalidDimension, "prediction and truth differ in size");
        }
        return metrics_dict(accumulate(ConfusionMatrix{},
                                       std::span<const std::uint8_t>(pred.data(), pred.size()),
                                       std::span<const std::uint8_t>(truth.data(), truth.size())));
      },
      py::arg("pred"), py::arg("truth"));

  m.def("load_raster", [](const std::filesystem::path& p) { return from_raster(load_raster(p)); });
  m.def(
      "save_raster",
      [](const U8& a, const std::filesystem::path& p) { save_raster(to_raster(a), p); },
      py::arg("image"), py::arg("path"));
  m.def("patch_count", &patch_count, py::arg("height"), py::arg("width"), py::arg("size") = 64,
        py::arg("stride") = 19);
  m.def(
      "slice_patches",
      [](const U8& image, const U8& mask, std::size_t size, std::size_t stride) {
        return from_samples(slice_patches(to_raster(image), to_mask(mask), size, stride), size);
      },
      py::arg("image"), py::arg("mask"), py::arg("size") = 64, py::arg("stride") = 19,
      "Returns images (N, 3, size, size) scaled to [0, 1] and masks (N, size, size).");
  m.def(
      "synthetic_samples",
      [](std::size_t count, std::uint64_t seed) {
        SyntheticOptions o;
        o.count = count;
        o.seed = seed;
        return from_samples(make_synthetic_samples(o), o.size);
      },
      py::arg("count") = 200, py::arg("seed") = 7);

  m.def(
      "verify",
      [](std::size_t trials, std::uint64_t seed) {
        VerifyOptions o;
        o.trials = trials;
        o.seed = seed;
        std::vector<std::tuple<std::string, bool, std::string>> out;
        for (const SuiteResult& r : run_verify(o)) out.emplace_back(r.name, r.passed, r.detail);
        return out;
      },
      py::arg("trials") = 20, py::arg("seed") = 1,
      "Runs the numerical self-checks; returns (name, passed, detail) per suite.");
}
