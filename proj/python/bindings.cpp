// Python bindings for the native core: dataset pipeline, training,
// evaluation, scoring, and the graph operators. Heavy entry points release
// the GIL; library errors surface as ValueError / OSError.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "dhcn/commands.hpp"
#include "dhcn/common.hpp"
#include "dhcn/data.hpp"
#include "dhcn/evaluation.hpp"
#include "dhcn/hypergraph.hpp"
#include "dhcn/model.hpp"
#include "dhcn/rng.hpp"
#include "dhcn/selfcheck.hpp"
#include "dhcn/sparse.hpp"
#include "dhcn/tensor.hpp"
#include "dhcn/training.hpp"

namespace py = pybind11;
using namespace dhcn;

namespace {

/// Trained parameters plus the settings they were trained with.
struct Model {
  ModelParams params;
  ModelConfig config;
};

py::array_t<double> to_numpy(const std::vector<double>& values, std::size_t rows,
                             std::size_t cols) {
  py::array_t<double> out({rows, cols});
  std::memcpy(out.mutable_data(), values.data(), values.size() * sizeof(double));
  return out;
}

/// Item representations from the dataset's training hypergraph — the fixed
/// item side used by both evaluation and ad-hoc scoring.
Tensor hypergraph_item_reprs(const Model& model, const ProcessedDataset& ds) {
  Hypergraph hg = build_incidence(ds.train_sessions, ds.vocab.size());
  PropagationOperator op = propagation_operator(hg);
  Tape scratch(false);
  return item_representations(scratch, model.params, model.config, op);
}

py::dict report_to_dict(const MetricsReport& report) {
  py::dict out;
  out["ks"] = report.ks;
  out["precision"] = report.precision;
  out["mrr"] = report.mrr;
  out["sequences"] = report.sequence_count;
  return out;
}

Model train_model(const ProcessedDataset& ds, std::size_t embedding_dim, std::size_t layers,
                  double beta, bool use_position, bool use_attention,
                  const std::string& loss_form, bool ssl_shifted_negative, double lr, double l2,
                  std::size_t batch_size, std::size_t epochs, std::uint64_t seed,
                  std::size_t lr_decay_every, std::size_t early_stop_patience,
                  bool eval_each_epoch, std::vector<EpochRecord>* log_out) {
  ModelConfig mc;
  mc.embedding_dim = embedding_dim;
  mc.layers = layers;
  mc.beta = beta;
  mc.max_len = ds.max_session_len;
  mc.use_position = use_position;
  mc.use_attention = use_attention;
  mc.loss_form = parse_loss_form(loss_form);
  mc.ssl_shifted_negative = ssl_shifted_negative;

  TrainConfig tc;
  tc.lr = lr;
  tc.l2 = l2;
  tc.batch_size = batch_size;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.lr_decay_every = lr_decay_every;
  tc.early_stop_patience = early_stop_patience;
  tc.eval_each_epoch = eval_each_epoch;

  Rng rng(seed);
  ModelParams params = ModelParams::init(ds.vocab.size(), mc, rng);
  TrainResult result = train(params, mc, tc, ds);
  if (log_out) *log_out = std::move(result.log);
  return Model{std::move(params), mc};
}

py::array_t<double> score_prefixes(const Model& model, const ProcessedDataset& ds,
                                   const std::vector<std::vector<std::size_t>>& prefixes) {
  if (prefixes.empty()) throw ContractError("score needs at least one session prefix");
  std::vector<LabeledSequence> seqs;
  for (const auto& prefix : prefixes) {
    if (prefix.empty()) throw ContractError("session prefixes must be non-empty");
    for (std::size_t item : prefix)
      if (item >= ds.vocab.size())
        throw ContractError("item index " + std::to_string(item) +
                            " is outside the vocabulary of " + std::to_string(ds.vocab.size()));
    seqs.push_back({prefix, 0});
  }

  Tensor x_h = hypergraph_item_reprs(model, ds);
  const std::size_t n = ds.vocab.size();
  py::array_t<double> out({seqs.size(), n});
  double* dst = out.mutable_data();

  std::size_t row = 0;
  for (const Batch& batch : make_batches(seqs, 512, /*shuffle=*/false, 0)) {
    Tape tape(false);
    Tensor theta = session_embeddings(tape, model.params, model.config, x_h, batch);
    Scores s = score(tape, theta, x_h);
    std::memcpy(dst + row * n, s.probs.values().data(), batch.size * n * sizeof(double));
    row += batch.size;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_dhcn, m) {
  m.doc() = "Native session-recommender core: dataset pipeline, dual-channel "
            "hypergraph model, training, and ranking evaluation.";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const ParseError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ShapeError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ContractError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DataError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<ProcessedDataset>(m, "Dataset",
                               "Preprocessed session corpus: vocabulary, training sessions, "
                               "and next-item sequences for both splits.")
      .def_static("load", &ProcessedDataset::load, py::arg("path"))
      .def("save", &ProcessedDataset::save, py::arg("path"))
      .def_property_readonly("num_items",
                             [](const ProcessedDataset& d) { return d.vocab.size(); })
      .def_property_readonly("max_session_len",
                             [](const ProcessedDataset& d) { return d.max_session_len; })
      .def_property_readonly(
          "train_sequence_count",
          [](const ProcessedDataset& d) { return d.train_sequences.size(); })
      .def_property_readonly("test_sequence_count",
                             [](const ProcessedDataset& d) { return d.test_sequences.size(); })
      .def_property_readonly("item_tokens", [](const ProcessedDataset& d) {
        std::vector<std::string> tokens;
        for (std::size_t i = 0; i < d.vocab.size(); ++i) tokens.push_back(d.vocab.token(i));
        return tokens;
      });

  m.def(
      "build_dataset",
      [](const std::string& path, double test_fraction, std::size_t min_item_freq,
         std::size_t min_session_len, std::size_t max_session_len) {
        py::gil_scoped_release release;
        return build_dataset(path, test_fraction, min_item_freq, min_session_len,
                             max_session_len);
      },
      py::arg("path"), py::arg("test_fraction") = 0.1, py::arg("min_item_freq") = 5,
      py::arg("min_session_len") = 2, py::arg("max_session_len") = 50,
      "Builds a Dataset from a session log (one session per line: "
      "id<TAB>space-separated item tokens[<TAB>timestamp]).");

  py::class_<Model>(m, "Model", "Trained recommender: parameters plus their settings.")
      .def_static("load",
                  [](const std::string& path) {
                    auto [params, config] = ModelParams::load(path);
                    return Model{std::move(params), config};
                  },
                  py::arg("path"))
      .def("save",
           [](const Model& model, const std::string& path) {
             model.params.save(path, model.config);
           },
           py::arg("path"))
      .def_property_readonly("num_items",
                             [](const Model& model) { return model.params.num_items(); })
      .def_property_readonly(
          "embedding_dim", [](const Model& model) { return model.config.embedding_dim; })
      .def_property_readonly("layers", [](const Model& model) { return model.config.layers; })
      .def_property_readonly("beta", [](const Model& model) { return model.config.beta; })
      .def("item_embeddings",
           [](const Model& model) {
             const Tensor& e = model.params.item_embeddings;
             return to_numpy(e.values(), e.rows(), e.cols());
           },
           "Raw item embedding table as an (num_items, embedding_dim) array.")
      .def("evaluate",
           [](const Model& model, const ProcessedDataset& ds, std::vector<std::size_t> ks) {
             MetricsReport report;
             {
               py::gil_scoped_release release;
               Tensor x_h = hypergraph_item_reprs(model, ds);
               report = evaluate(model.params, model.config, x_h, ds.test_sequences, ks);
             }
             return report_to_dict(report);
           },
           py::arg("dataset"), py::arg("ks") = std::vector<std::size_t>{10, 20},
           "Ranks every test sequence of the dataset; returns precision and "
           "MRR at each cutoff.")
      .def("score", &score_prefixes, py::arg("dataset"), py::arg("prefixes"),
           "Next-item probabilities for ad-hoc session prefixes (item index "
           "lists), as a (len(prefixes), num_items) array.");

  m.def(
      "train",
      [](const ProcessedDataset& ds, std::size_t embedding_dim, std::size_t layers, double beta,
         bool use_position, bool use_attention, const std::string& loss_form,
         bool ssl_shifted_negative, double lr, double l2, std::size_t batch_size,
         std::size_t epochs, std::uint64_t seed, std::size_t lr_decay_every,
         std::size_t early_stop_patience, bool eval_each_epoch) {
        std::vector<EpochRecord> log;
        Model model;
        {
          py::gil_scoped_release release;
          model = train_model(ds, embedding_dim, layers, beta, use_position, use_attention,
                              loss_form, ssl_shifted_negative, lr, l2, batch_size, epochs, seed,
                              lr_decay_every, early_stop_patience, eval_each_epoch, &log);
        }
        py::list history;
        for (const EpochRecord& r : log) {
          py::dict row;
          row["epoch"] = r.epoch;
          row["rec_loss"] = r.mean_rec_loss;
          row["ssl_loss"] = r.mean_ssl_loss;
          row["metrics"] = r.metrics ? py::object(report_to_dict(*r.metrics))
                                     : py::object(py::none());
          history.append(row);
        }
        return py::make_tuple(model, history);
      },
      py::arg("dataset"), py::arg("embedding_dim") = 100, py::arg("layers") = 3,
      py::arg("beta") = 0.01, py::arg("use_position") = true, py::arg("use_attention") = true,
      py::arg("loss_form") = "all_item_bce", py::arg("ssl_shifted_negative") = false,
      py::arg("lr") = 0.001, py::arg("l2") = 1e-5, py::arg("batch_size") = 100,
      py::arg("epochs") = 30, py::arg("seed") = 42, py::arg("lr_decay_every") = 0,
      py::arg("early_stop_patience") = 0, py::arg("eval_each_epoch") = true,
      "Trains a model on the dataset; returns (model, history) where history "
      "holds one dict per epoch.");

  m.def(
      "propagation_matrix",
      [](const ProcessedDataset& ds) {
        Hypergraph hg = build_incidence(ds.train_sessions, ds.vocab.size());
        PropagationOperator op = propagation_operator(hg);
        return to_numpy(op.matrix.densify(), op.matrix.rows, op.matrix.cols);
      },
      py::arg("dataset"),
      "Dense item-to-item propagation operator of the dataset's training "
      "hypergraph (rows of active items sum to 1).");

  m.def(
      "line_graph_adjacency",
      [](const std::vector<std::vector<std::size_t>>& item_sets) {
        LineGraph lg = build_line_graph(item_sets);
        return to_numpy(lg.adjacency.densify(), lg.adjacency.rows, lg.adjacency.cols);
      },
      py::arg("item_sets"),
      "Dense session-to-session adjacency: intersection-over-union weights "
      "with unit self-loops.");

  m.def(
      "selfcheck",
      []() {
        std::vector<CheckResult> results;
        {
          py::gil_scoped_release release;
          results = run_selfchecks();
        }
        return py::make_tuple(all_passed(results), format_check_results(results));
      },
      "Runs the built-in invariant suite; returns (ok, report_text).");
}
