// SPDX-License-Identifier: Apache-2.0
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "kane/cli.hpp"
#include "kane/config.hpp"
#include "kane/error.hpp"
#include "kane/evaluation.hpp"
#include "kane/io.hpp"

namespace py = pybind11;
using namespace kane;

namespace {

TrainConfig config_from(const std::map<std::string, py::object>& settings) {
  TrainConfig cfg;
  for (const auto& [key, value] : settings) {
    std::string text;
    if (py::isinstance<py::bool_>(value)) {
      text = value.cast<bool>() ? "true" : "false";
    } else {
      text = py::str(value).cast<std::string>();
    }
    apply_setting(cfg, key, text);
  }
  cfg.validate();
  return cfg;
}

py::array_t<double> as_matrix(const std::vector<double>& flat, std::size_t dim) {
  const auto rows = dim ? flat.size() / dim : 0;
  py::array_t<double> out({rows, dim});
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

py::dict stats_of(const Bundle& b) {
  py::dict d;
  d["entities"] = b.kg.entity_count();
  d["relations"] = b.kg.entity_relation_count();
  d["attributes"] = b.kg.attribute_relation_count();
  d["relation_triples"] = b.kg.relation_triples().size();
  d["attribute_triples"] = b.kg.attribute_triples().size();
  d["train"] = b.split.train.size();
  d["valid"] = b.split.valid.size();
  d["test"] = b.split.test.size();
  d["classes"] = b.split.class_count();
  d["labeled_test"] = b.split.label_test.size();
  return d;
}

struct Model {
  Checkpoint ckpt;
  std::vector<EpochRecord> history;

  Embeddings embeddings(const Bundle& b) {
    if (b.kg.entity_count() != ckpt.params.entities.rows()) {
      throw ShapeError("dataset and model disagree on the entity count");
    }
    const auto& mc = ckpt.config.model;
    return compute_embeddings(training_neighborhood(b.kg, b.split, mc), b.kg.values(), ckpt.params, mc);
  }
};

py::dict ranking_dict(const RankingReport& r) {
  py::dict d;
  d["queries"] = r.raw_ranks.size();
  d["k"] = r.k;
  d["mean_rank_raw"] = r.mean_rank_raw;
  d["mean_rank_filtered"] = r.mean_rank_filtered;
  d["hits_raw"] = r.hits_raw;
  d["hits_filtered"] = r.hits_filtered;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Knowledge graph embedding with attention-based propagation and attribute encoders";

  auto base = py::register_exception<Error>(m, "KaneError");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::class_<Bundle>(m, "Dataset", "Parsed knowledge graph with its train/valid/test split")
      .def_static(
          "synthetic",
          [](std::uint64_t seed, std::size_t entities, std::size_t relations, std::size_t clusters,
             std::size_t triples_per_entity, double noise) {
            SyntheticSpec spec{seed, entities, relations, clusters, triples_per_entity, noise};
            auto ds = generate_synthetic_kg(spec);
            return Bundle{std::move(ds.kg), std::move(ds.split)};
          },
          py::arg("seed") = 7, py::arg("entities") = 50, py::arg("relations") = 5,
          py::arg("clusters") = 5, py::arg("triples_per_entity") = 8, py::arg("noise") = 0.05)
      .def_static(
          "from_tsv",
          [](const std::string& relations, const std::string& attributes, const std::string& labels,
             std::uint64_t seed, double valid_fraction, double test_fraction) {
            Bundle b;
            b.kg.add_relation_triples(parse_relation_triples(relations, b.kg));
            if (!attributes.empty()) b.kg.add_attribute_triples(parse_attribute_triples(attributes, b.kg));
            Interner classes;
            std::vector<Label> ls;
            if (!labels.empty()) ls = parse_labels(labels, b.kg, classes);
            Rng rng(seed);
            b.split = split_dataset(b.kg, ls, std::move(classes), rng, {valid_fraction, test_fraction});
            check_split(b.kg, b.split);
            return b;
          },
          py::arg("relations"), py::arg("attributes") = "", py::arg("labels") = "", py::arg("seed") = 1,
          py::arg("valid_fraction") = 0.1, py::arg("test_fraction") = 0.1,
          "Build a dataset from TSV text (not file paths).")
      .def_static(
          "load", [](const std::string& path) { return deserialize_bundle(read_file(path), path); },
          py::arg("path"))
      .def("save", [](const Bundle& b, const std::string& path) { write_file_atomic(path, serialize_bundle(b)); },
           py::arg("path"))
      .def_property_readonly("checksum", &bundle_checksum)
      .def_property_readonly("entity_names", [](const Bundle& b) { return b.kg.entities().names(); })
      .def_property_readonly("relation_names", [](const Bundle& b) { return b.kg.relations().names(); })
      .def_property_readonly("class_names", [](const Bundle& b) { return b.split.classes.names(); })
      .def("stats", &stats_of);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("loss", &EpochRecord::loss)
      .def_readonly("seconds", &EpochRecord::seconds)
      .def_readonly("validation", &EpochRecord::validation)
      .def("__repr__", [](const EpochRecord& r) {
        std::ostringstream s;
        s << "EpochRecord(epoch=" << r.epoch << ", loss=" << r.loss << ")";
        return s.str();
      });

  py::class_<Model>(m, "Model", "Trained parameters together with their configuration")
      .def_static(
          "load",
          [](const std::string& path) { return Model{deserialize_checkpoint(read_file(path)), {}}; },
          py::arg("path"))
      .def("save", [](const Model& mdl, const std::string& path) {
             write_file_atomic(path, serialize_checkpoint(mdl.ckpt));
           }, py::arg("path"))
      .def_property_readonly("config", [](const Model& mdl) { return to_key_values(mdl.ckpt.config); })
      .def_property_readonly("dataset_checksum", [](const Model& mdl) { return mdl.ckpt.bundle_checksum; })
      .def_readonly("history", &Model::history)
      .def(
          "embeddings",
          [](Model& mdl, const Bundle& b, bool final_layer) {
            if (final_layer) {
              const auto emb = mdl.embeddings(b);
              return as_matrix(emb.entities, emb.dim);
            }
            return as_matrix(mdl.ckpt.params.entities.value, mdl.ckpt.config.model.dim);
          },
          py::arg("dataset"), py::arg("final") = true,
          "Entity vectors, one row per entity. `final=False` gives the raw embedding table.")
      .def(
          "evaluate_completion",
          [](Model& mdl, const Bundle& b) {
            const auto emb = mdl.embeddings(b);
            const auto known = known_facts(b.kg);
            const auto norm = mdl.ckpt.config.model.norm;
            py::dict d;
            d["entity"] = ranking_dict(evaluate_entities(emb, b.split.test, known, norm));
            const auto cands = relation_candidates(b.kg);
            d["relation"] = ranking_dict(evaluate_relations(emb, b.split.test, cands, known, norm));
            return d;
          },
          py::arg("dataset"))
      .def(
          "evaluate_classification",
          [](Model& mdl, const Bundle& b) {
            if (!mdl.ckpt.params.classifier_weight) throw ContractError("model has no classifier head");
            return classification_accuracy(mdl.embeddings(b), mdl.ckpt.params, b.split.label_test,
                                           b.split.labels);
          },
          py::arg("dataset"));

  m.def(
      "train",
      [](const Bundle& b, const std::map<std::string, py::object>& settings,
         const std::function<void(const EpochRecord&)>& on_epoch) {
        const auto cfg = config_from(settings);
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(b.kg, b.split, cfg, [&](const EpochRecord& r) {
            if (!on_epoch) return;
            py::gil_scoped_acquire acquire;
            on_epoch(r);
          });
        }
        return Model{{cfg, bundle_checksum(b), result.rng_state, std::move(result.params)},
                     std::move(result.report.epochs)};
      },
      py::arg("dataset"), py::arg("settings") = std::map<std::string, py::object>{},
      py::arg("on_epoch") = nullptr,
      "Train on `dataset`. `settings` maps configuration keys to values, e.g. {'epochs': 50}.");

  m.def("default_settings", []() { return to_key_values(TrainConfig{}); });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"kane"};
        full.insert(full.end(), args.begin(), args.end());
        std::ostringstream out, err;
        const int code = cli::run(full, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command-line invocation in-process; returns (exit_code, stdout, stderr).");
}
