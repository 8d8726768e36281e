// SPDX-License-Identifier: Apache-2.0
#include "kane/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "kane/config.hpp"
#include "kane/error.hpp"
#include "kane/evaluation.hpp"
#include "kane/io.hpp"
#include "kane/kg.hpp"
#include "kane/training.hpp"

namespace kane::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

fs::path default_output_dir() {
  const char* env = std::getenv(kOutputDirEnv);
  return env && *env ? fs::path(env) : fs::path(".");
}

// Options shared by every command: --config file and --set overrides.
struct Overrides {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value configuration file");
    app->add_option("--set", sets, "override one setting, key=value (repeatable)");
    app->add_option("--seed", seed, "random seed (overrides config)");
  }

  /// defaults < file < --set < --seed
  KeyValues resolve() const {
    KeyValues kv;
    if (!config_path.empty()) kv = parse_key_values(read_file(config_path), config_path);
    for (const auto& s : sets) {
      auto [k, v] = parse_assignment(s);
      kv[k] = v;
    }
    if (seed) kv["seed"] = std::to_string(*seed);
    return kv;
  }
};

// Removes a path-like key from `kv`; an explicit flag wins over the file.
std::string take_path(KeyValues& kv, const std::string& key, const std::string& flag_value) {
  auto it = kv.find(key);
  std::string from_file;
  if (it != kv.end()) {
    from_file = it->second;
    kv.erase(it);
  }
  return flag_value.empty() ? from_file : flag_value;
}

std::string require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing required ") + what);
  return value;
}

TrainConfig train_config_from(const KeyValues& kv) {
  TrainConfig cfg;
  apply_settings(cfg, kv);
  return cfg;
}

std::string stats_table(const KnowledgeGraph& kg, const DatasetSplit& split) {
  std::ostringstream s;
  s << "#Entities       " << kg.entity_count() << "\n"
    << "#Relations      " << kg.entity_relation_count() << "\n"
    << "#Attributes     " << kg.attribute_relation_count() << "\n"
    << "#Rel. triples   " << kg.relation_triples().size() << "\n"
    << "#Attr. triples  " << kg.attribute_triples().size() << "\n"
    << "#Total triples  " << kg.relation_triples().size() + kg.attribute_triples().size() << "\n"
    << "#Train/Valid/Test  " << split.train.size() << "/" << split.valid.size() << "/"
    << split.test.size() << "\n"
    << "#Classes        " << split.class_count() << " (" << split.label_train.size() << "/"
    << split.label_valid.size() << "/" << split.label_test.size() << " labeled)\n";
  return s.str();
}

std::string mode_label(const ModelConfig& m) {
  if (m.transe_mode()) return "transe-mode";
  return "kane (layers=" + std::to_string(m.layers) + ", heads=" + std::to_string(m.heads) +
         ", encoder=" + to_string(m.encoder) + ", aggregator=" + to_string(m.aggregator) +
         ", attributes=" + (m.use_attributes ? "on" : "off") + ")";
}

struct Loaded {
  Bundle bundle;
  Checkpoint ckpt;
  std::string checksum;
};

Loaded load_pair(const std::string& bundle_path, const std::string& ckpt_path) {
  Loaded l{deserialize_bundle(read_file(bundle_path), bundle_path),
           deserialize_checkpoint(read_file(ckpt_path)), {}};
  l.checksum = bundle_checksum(l.bundle);
  if (l.checksum != l.ckpt.bundle_checksum) {
    throw IoError("checkpoint " + ckpt_path + " was trained on bundle " + l.ckpt.bundle_checksum +
                  " but " + bundle_path + " has checksum " + l.checksum +
                  "; refusing to evaluate a mismatched pair");
  }
  check_params(l.ckpt.params, l.ckpt.config.model,
               model_sizes(l.bundle.kg, l.bundle.split, l.ckpt.config.model));
  return l;
}

Embeddings embeddings_of(Loaded& l) {
  const auto& mc = l.ckpt.config.model;
  return compute_embeddings(training_neighborhood(l.bundle.kg, l.bundle.split, mc),
                            l.bundle.kg.values(), l.ckpt.params, mc);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"KANE knowledge graph embedding toolkit"};
  app.require_subcommand(1);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "write a seeded synthetic dataset as TSV files");
  SyntheticSpec spec;
  std::string gen_out;
  Overrides gen_ov;
  gen->add_option("--out", gen_out, "output directory (default: $KANE_OUTPUT_DIR or .)");
  gen->add_option("--entities", spec.entities, "entity count")->capture_default_str();
  gen->add_option("--relations", spec.relations, "relation count")->capture_default_str();
  gen->add_option("--clusters", spec.clusters, "cluster (class) count")->capture_default_str();
  gen->add_option("--triples-per-entity", spec.triples_per_entity, "outgoing relation triples per entity")
      ->capture_default_str();
  gen->add_option("--noise", spec.noise, "fraction of triples ignoring the cluster pattern")
      ->capture_default_str();
  gen_ov.attach(gen);

  // prepare
  auto* prep = app.add_subcommand("prepare", "parse TSV files into a checksummed dataset bundle");
  std::string prep_rel, prep_attr, prep_labels, prep_out;
  double valid_fraction = 0.1, test_fraction = 0.1;
  Overrides prep_ov;
  prep->add_option("--relations", prep_rel, "relations.tsv (head<TAB>relation<TAB>tail)");
  prep->add_option("--attributes", prep_attr, "attributes.tsv (head<TAB>attribute<TAB>\"literal\")");
  prep->add_option("--labels", prep_labels, "labels.tsv (entity<TAB>class)");
  prep->add_option("--out", prep_out, "bundle file (default: $KANE_OUTPUT_DIR/bundle.kgb)");
  prep->add_option("--valid-fraction", valid_fraction, "held-out validation fraction")
      ->capture_default_str();
  prep->add_option("--test-fraction", test_fraction, "held-out test fraction")->capture_default_str();
  prep_ov.attach(prep);

  // train
  auto* tr = app.add_subcommand("train", "train a model; writes checkpoint.kane and train_log.csv");
  std::string tr_bundle, tr_out;
  bool tr_quiet = false;
  Overrides tr_ov;
  tr->add_option("--bundle", tr_bundle, "dataset bundle from `prepare`");
  tr->add_option("--out", tr_out, "output directory (default: $KANE_OUTPUT_DIR or .)");
  tr->add_flag("--quiet", tr_quiet, "do not print per-epoch progress");
  tr_ov.attach(tr);
  std::string keys;
  for (const auto& k : train_config_keys()) keys += (keys.empty() ? "" : ", ") + k;
  tr->footer("Settings accepted by --config/--set: " + keys);

  // eval-completion / eval-classify
  std::string ev_bundle, ev_ckpt, ev_out;
  Overrides ev_ov;
  auto* evc = app.add_subcommand("eval-completion", "entity and relation prediction on the test split");
  auto* evk = app.add_subcommand("eval-classify", "entity classification accuracy on labeled test entities");
  for (auto* sub : {evc, evk}) {
    sub->add_option("--bundle", ev_bundle, "dataset bundle");
    sub->add_option("--checkpoint", ev_ckpt, "checkpoint from `train`");
    sub->add_option("--out", ev_out, "directory for the report files (default: $KANE_OUTPUT_DIR or .)");
    ev_ov.attach(sub);
  }

  // export
  auto* ex = app.add_subcommand("export", "write entity embeddings as text");
  std::string ex_bundle, ex_ckpt, ex_out;
  bool ex_final = false;
  Overrides ex_ov;
  ex->add_option("--bundle", ex_bundle, "dataset bundle (entity names)");
  ex->add_option("--checkpoint", ex_ckpt, "checkpoint from `train`");
  ex->add_option("--out", ex_out, "output file (default: $KANE_OUTPUT_DIR/embeddings.txt)");
  ex->add_flag("--final", ex_final, "export propagated final-layer vectors instead of raw embeddings");
  ex_ov.attach(ex);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen->parsed()) {
      auto kv = gen_ov.resolve();
      const auto gen_dir = take_path(kv, "out_dir", gen_out);
      const fs::path dir = gen_dir.empty() ? default_output_dir() : fs::path(gen_dir);
      if (auto it = kv.find("seed"); it != kv.end()) {
        spec.seed = train_config_from({{"seed", it->second}}).seed;
        kv.erase(it);
      }
      if (!kv.empty()) throw ConfigError("gen-synth does not accept setting '" + kv.begin()->first + "'");
      const auto data = generate_synthetic_kg(spec);
      write_file_atomic(dir / "relations.tsv", serialize_relation_triples(data.kg));
      write_file_atomic(dir / "attributes.tsv", serialize_attribute_triples(data.kg));
      write_file_atomic(dir / "labels.tsv", serialize_labels(data.kg, data.labels, data.classes));
      out << "wrote relations.tsv, attributes.tsv, labels.tsv to " << dir.string() << "\n"
          << stats_table(data.kg, data.split);
      return 0;
    }

    if (prep->parsed()) {
      auto kv = prep_ov.resolve();
      const auto rel_path = require(take_path(kv, "relations", prep_rel), "--relations");
      const auto attr_path = take_path(kv, "attributes", prep_attr);
      const auto labels_path = take_path(kv, "labels", prep_labels);
      auto out_path = take_path(kv, "bundle", prep_out);
      if (out_path.empty()) out_path = (default_output_dir() / "bundle.kgb").string();
      std::uint64_t seed = 1;
      if (auto it = kv.find("seed"); it != kv.end()) {
        seed = train_config_from({{"seed", it->second}}).seed;
        kv.erase(it);
      }
      if (!kv.empty()) throw ConfigError("prepare does not accept setting '" + kv.begin()->first + "'");

      Bundle b;
      auto rel = parse_relation_triples(read_file(rel_path), b.kg, rel_path);
      std::size_t dups = b.kg.add_relation_triples(rel);
      if (!attr_path.empty()) {
        auto attr = parse_attribute_triples(read_file(attr_path), b.kg, attr_path);
        dups += b.kg.add_attribute_triples(attr);
      }
      Interner classes;
      std::vector<Label> labels;
      if (!labels_path.empty()) labels = parse_labels(read_file(labels_path), b.kg, classes, labels_path);
      Rng rng(seed);
      b.split = split_dataset(b.kg, labels, std::move(classes), rng, {valid_fraction, test_fraction});
      check_split(b.kg, b.split);
      const auto text = serialize_bundle(b);
      write_file_atomic(out_path, text);
      if (dups) out << "dropped " << dups << " duplicate triples\n";
      out << stats_table(b.kg, b.split) << "checksum " << bundle_checksum(b) << "\n"
          << "wrote " << out_path << "\n";
      return 0;
    }

    if (tr->parsed()) {
      auto kv = tr_ov.resolve();
      const auto bundle_path = require(take_path(kv, "bundle", tr_bundle), "--bundle");
      auto out_dir_s = take_path(kv, "out_dir", tr_out);
      const fs::path dir = out_dir_s.empty() ? default_output_dir() : fs::path(out_dir_s);
      const auto cfg = train_config_from(kv);
      auto b = deserialize_bundle(read_file(bundle_path), bundle_path);
      out << "training " << to_string(cfg.task) << " model: " << mode_label(cfg.model) << "\n";
      auto result = train(b.kg, b.split, cfg, [&](const EpochRecord& r) {
        if (tr_quiet) return;
        out << "epoch " << r.epoch << " loss " << fmt_short(r.loss);
        if (r.validation) out << " val " << fmt_short(*r.validation);
        out << "\n";
      });
      Checkpoint ckpt{cfg, bundle_checksum(b), result.rng_state, std::move(result.params)};
      write_file_atomic(dir / "checkpoint.kane", serialize_checkpoint(ckpt));
      std::string log = "epoch,loss,val_metric,seconds\n";
      for (const auto& r : result.report.epochs) {
        log += std::to_string(r.epoch) + "," + fmt(r.loss) + "," +
               (r.validation ? fmt(*r.validation) : "") + "," + fmt(r.seconds) + "\n";
      }
      write_file_atomic(dir / "train_log.csv", log);
      out << "epochs run " << result.report.epochs.size() << ", kept epoch "
          << result.report.best_epoch;
      if (result.report.best_validation) out << " (validation " << fmt_short(*result.report.best_validation) << ")";
      if (result.report.early_stopped) out << ", early stopped";
      out << "\nwrote " << (dir / "checkpoint.kane").string() << " and "
          << (dir / "train_log.csv").string() << "\n";
      return 0;
    }

    if (evc->parsed() || evk->parsed()) {
      auto kv = ev_ov.resolve();
      const auto bundle_path = require(take_path(kv, "bundle", ev_bundle), "--bundle");
      const auto ckpt_path = require(take_path(kv, "checkpoint", ev_ckpt), "--checkpoint");
      auto out_dir_s = take_path(kv, "out_dir", ev_out);
      const fs::path dir = out_dir_s.empty() ? default_output_dir() : fs::path(out_dir_s);
      auto l = load_pair(bundle_path, ckpt_path);
      const auto& mc = l.ckpt.config.model;
      const auto emb = embeddings_of(l);
      std::ostringstream human;
      std::string machine = "task\tsetting\tmetric\tvalue\nrun\t-\tmode\t" +
                            (mc.transe_mode() ? std::string("transe-mode") : std::string("kane")) + "\n";
      human << "mode: " << mode_label(mc) << "\n";
      std::string stem;
      if (evc->parsed()) {
        stem = "completion";
        const auto& split = l.bundle.split;
        if (split.test.empty()) throw ContractError("bundle has no test triples");
        const auto known = known_facts(l.bundle.kg);
        const auto cands = relation_candidates(l.bundle.kg);
        const auto ent = evaluate_entities(emb, split.test, known, mc.norm);
        const auto rel = evaluate_relations(emb, split.test, cands, known, mc.norm);
        for (const auto* rep : {&ent, &rel}) {
          const auto hits = "hits@" + std::to_string(rep->k);
          human << to_string(rep->task) << " (" << rep->raw_ranks.size() << " queries)\n"
                << "  raw     mean_rank " << fmt_short(rep->mean_rank_raw) << "  " << hits << " "
                << fmt_short(rep->hits_raw) << "\n"
                << "  filter  mean_rank " << fmt_short(rep->mean_rank_filtered) << "  " << hits
                << " " << fmt_short(rep->hits_filtered) << "\n";
          const auto task = to_string(rep->task);
          machine += task + "\traw\tmean_rank\t" + fmt(rep->mean_rank_raw) + "\n";
          machine += task + "\traw\t" + hits + "\t" + fmt(rep->hits_raw) + "\n";
          machine += task + "\tfilter\tmean_rank\t" + fmt(rep->mean_rank_filtered) + "\n";
          machine += task + "\tfilter\t" + hits + "\t" + fmt(rep->hits_filtered) + "\n";
        }
      } else {
        stem = "classification";
        const auto& split = l.bundle.split;
        if (!l.ckpt.params.classifier_weight) throw ContractError("checkpoint has no classifier head");
        const double acc =
            classification_accuracy(emb, l.ckpt.params, split.label_test, split.labels);
        human << "classification (" << split.label_test.size() << " entities)\n"
              << "  accuracy " << fmt_short(acc) << "\n";
        machine += "classification\t-\taccuracy\t" + fmt(acc) + "\n";
      }
      out << human.str();
      write_file_atomic(dir / (stem + "_report.txt"), human.str());
      write_file_atomic(dir / (stem + "_metrics.tsv"), machine);
      return 0;
    }

    if (ex->parsed()) {
      auto kv = ex_ov.resolve();
      const auto bundle_path = require(take_path(kv, "bundle", ex_bundle), "--bundle");
      const auto ckpt_path = require(take_path(kv, "checkpoint", ex_ckpt), "--checkpoint");
      auto out_path = take_path(kv, "output", ex_out);
      if (out_path.empty()) out_path = (default_output_dir() / "embeddings.txt").string();
      auto l = load_pair(bundle_path, ckpt_path);
      const auto& names = l.bundle.kg.entities().names();
      std::string text;
      if (ex_final) {
        const auto emb = embeddings_of(l);
        text = format_embeddings(names, emb.entities, emb.dim);
      } else {
        text = format_embeddings(names, l.ckpt.params.entities.value, l.ckpt.config.model.dim);
      }
      write_file_atomic(out_path, text);
      out << "wrote " << names.size() << " vectors to " << out_path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace kane::cli
