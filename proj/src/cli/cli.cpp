// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "avsr/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "avsr/binary_io.hpp"
#include "avsr/corpus.hpp"
#include "avsr/resources.hpp"
#include "avsr/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace avsr {

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::usage: return kExitUsage;
    case ErrorCategory::data: return kExitData;
    case ErrorCategory::numeric: return kExitNumeric;
  }
  return kExitData;
}

// ---------------------------------------------------------------------------
// RunRecord

void RunRecord::assign_id() {
  Fnv1a h;
  h.update(command);
  h.update("\n");
  h.update(config);
  h.update_value(seed);
  for (const auto& [k, v] : inputs) {
    h.update(k);
    h.update("=");
    h.update(v);
    h.update("\n");
  }
  run_id = h.hex();
}

std::string RunRecord::to_json() const {
  json j;
  j["schema_version"] = kRunRecordVersion;
  j["run_id"] = run_id;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["metrics"] = metrics;
  return j.dump(2) + "\n";
}

RunRecord RunRecord::from_json(const std::string& text, const std::string& name) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptFileError(name + ": " + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kRunRecordVersion) {
      throw UnsupportedVersionError(name + ": run record schema " + j.at("schema_version").dump());
    }
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config").get<std::string>();
    r.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    r.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    return r;
  } catch (const json::exception& e) {
    throw CorruptFileError(name + ": " + e.what());
  }
}

RunRecord RunRecord::load(const fs::path& path) { return from_json(read_text_file(path), path.string()); }

void RunRecord::save(const fs::path& path) const { write_text_file(path, to_json()); }

namespace {

// ---------------------------------------------------------------------------
// Shared helpers

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Flag value, else the environment variable, else a usage error.
fs::path resolve_path(const std::string& flag, const char* env, const std::string& what) {
  if (!flag.empty()) return flag;
  if (const char* v = std::getenv(env); v != nullptr && *v != '\0') return v;
  throw ParameterError(what + " not given; pass the flag or set " + env);
}

LabelKind parse_label_kind(const std::string& s) {
  if (s == "phoneme") return LabelKind::phoneme;
  if (s == "viseme") return LabelKind::viseme;
  throw ParameterError("labels must be 'phoneme' or 'viseme', got '" + s + "'");
}

std::string label_kind_name(LabelKind k) { return k == LabelKind::phoneme ? "phoneme" : "viseme"; }

/// Rejects keys outside `top` that do not start with one of `prefixes`.
void check_keys(const KvConfig& kv, const std::set<std::string>& top, const std::vector<std::string>& prefixes) {
  for (const auto& [key, entry] : kv.entries()) {
    if (top.count(key)) continue;
    bool ok = false;
    for (const auto& p : prefixes) ok = ok || key.rfind(p, 0) == 0;
    if (!ok) throw ConfigParseError(entry.file, entry.line, "unknown key '" + key + "'");
  }
}

TrainConfig train_config(const KvConfig& run, std::optional<std::uint64_t> seed) {
  static const std::set<std::string> keys{"lr0", "decay_factor", "patience", "max_epochs", "batch_size", "seed"};
  const KvConfig t = run.subtree("train");
  check_keys(t, keys, {});
  TrainConfig c = TrainConfig::from_kv(t);
  if (seed) c.seed = *seed;
  return c;
}

/// Scans or reopens the corpus and brings its feature cache up to date.
/// Any utterance-level problem is fatal.
CorpusManifest prepare_corpus(const fs::path& root, std::ostream& out) {
  CorpusManifest m = open_corpus(root);
  const CacheReport rep = cache_features(m);
  out << "cache: " << rep.computed << " computed, " << rep.hits << " cached"
      << (rep.norm_updated ? ", normalisation refitted on train" : "") << "\n";
  std::vector<std::string> problems = m.errors;
  problems.insert(problems.end(), rep.errors.begin(), rep.errors.end());
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " corpus problem(s) in " + root.string();
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  if (m.split("train").empty()) throw DataError("corpus " + root.string() + " has no training utterances");
  return m;
}

void set_checked(KvConfig& kv, const std::string& key, std::size_t value, const std::string& what) {
  if (kv.has(key) && kv.get_int(key) != static_cast<long long>(value)) {
    throw ConfigMismatchError("config sets " + key + " = " + kv.get_string(key) + " but the corpus has " +
                              std::to_string(value) + " " + what);
  }
  kv.set(key, std::to_string(value));
}

std::vector<std::pair<std::string, std::string>> with_prefix(const std::string& text, const std::string& prefix) {
  const KvConfig kv = KvConfig::parse(text);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, e] : kv.entries()) out.emplace_back(prefix + k, e.value);
  return out;
}

/// Sizes that come from the data (class count, input width, image size)
/// are filled in; a config value that disagrees is an error.
ModelConfig resolve_single(KvConfig mk, Modality m, const Dataset& ds) {
  if (mk.has("modality") && parse_modality(mk.get_string("modality")) != m) {
    throw ConfigMismatchError("config modality " + mk.get_string("modality") + " but training " +
                              modality_name(m));
  }
  mk.set("modality", modality_name(m));
  set_checked(mk, "classes", ds.classes.size(), "classes");
  const auto& train = ds.split("train");
  if (m == Modality::acoustic) {
    set_checked(mk, "input_dim", train.front().features.dim(1), "feature coefficients");
  } else if (m == Modality::visual) {
    if (train.front().images.rank() != 3) throw MissingPrerequisiteError("corpus has no image sequences");
    set_checked(mk, "image_size", train.front().images.dim(1), "pixel images");
  } else {
    throw ParameterError("expected a single-stream modality, got " + modality_name(m));
  }
  return ModelConfig::from_kv(mk);
}

json parse_metadata(const std::string& text) {
  try {
    json j = json::parse(text);
    return j.is_object() ? j : json::object();
  } catch (const json::exception&) {
    return json::object();
  }
}

/// Checkpoint written by `train` for a sub-network, checked against the
/// current label set.
Checkpoint load_stage_checkpoint(const fs::path& path, const std::string& stage, LabelKind labels,
                                 const Dataset& ds) {
  if (!fs::exists(path)) {
    throw MissingPrerequisiteError(stage + " checkpoint " + path.string() + "; run train --modality " + stage +
                                   " first");
  }
  Checkpoint c = load_checkpoint(path);
  const json meta = parse_metadata(c.metadata);
  if (meta.value("labels", "phoneme") != label_kind_name(labels)) {
    throw ConfigMismatchError(path.string() + " was trained on " + meta.value("labels", "phoneme") + " labels");
  }
  if (c.graph.config.class_count != ds.classes.size()) {
    throw ConfigMismatchError(path.string() + " has " + std::to_string(c.graph.config.class_count) +
                              " classes, corpus has " + std::to_string(ds.classes.size()));
  }
  return c;
}

std::string resolved_text(const KvConfig& extra, const ModelConfig& model, const TrainConfig& tc) {
  std::string text = extra.to_text();
  for (const auto& [k, v] : with_prefix(model.to_text(), "model.")) text += k + " = " + v + "\n";
  text += tc.to_text("train.");
  return KvConfig::parse(text, "<resolved>").to_text();
}

void write_plot_stub(const fs::path& path, const std::string& body) {
  write_text_file(path,
                  "#!/usr/bin/env python3\n"
                  "# Plots the CSV written next to this script. Needs matplotlib.\n"
                  "import csv, sys\n"
                  "import matplotlib.pyplot as plt\n\n" +
                      body);
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const fs::path root = resolve_path(a.out, "AVSR_CORPUS", "output corpus directory (--out)");
  SynthSpec spec = a.spec.empty() ? SynthSpec{} : SynthSpec::load(a.spec);
  if (a.seed) spec.seed = *a.seed;
  const CorpusManifest m = generate_synthetic(spec, root);

  RunRecord rec;
  rec.command = "synth";
  rec.config = KvConfig::parse(spec.to_text()).to_text();
  rec.seed = spec.seed;
  rec.assign_id();
  // Relative paths keep the corpus tree independent of where it was written.
  rec.outputs = {{"manifest", "manifest.json"}, {"spec", "synth.cfg"}};
  for (const auto& s : kSplits) rec.metrics[s + "_utterances"] = static_cast<double>(m.split(s).size());
  rec.metrics["classes"] = static_cast<double>(m.classes.size());
  rec.save(root / "synth.run.json");

  out << "synth: " << m.classes.size() << " classes, " << m.split("train").size() << "/" << m.split("val").size()
      << "/" << m.split("test").size() << " train/val/test utterances in " << root.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// cache

int cmd_cache(const std::string& corpus, std::ostream& out) {
  const fs::path root = resolve_path(corpus, "AVSR_CORPUS", "corpus directory (--corpus)");
  const CorpusManifest m = prepare_corpus(root, out);
  out << "corpus: " << m.size() << " utterances, " << m.classes.size() << " label symbols\n";
  for (const auto& w : m.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string modality;
  std::string corpus;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const Modality modality = parse_modality(a.modality);
  if (modality == Modality::dense) throw ParameterError("dense graphs are for cost checks and are not trained");
  const fs::path corpus = resolve_path(a.corpus, "AVSR_CORPUS", "corpus directory (--corpus)");
  const fs::path out_dir = resolve_path(a.out, "AVSR_OUTPUT_DIR", "output directory (--out)");

  const KvConfig run = a.config.empty() ? KvConfig{} : KvConfig::load(a.config);
  check_keys(run, {"labels", "noise_schedule", "replay"}, {"model.", "train."});
  const LabelKind labels = parse_label_kind(run.get_string("labels", "phoneme"));
  const TrainConfig tc = train_config(run, a.seed);

  std::optional<NoiseSchedule> schedule;
  if (run.has("noise_schedule")) {
    schedule = NoiseSchedule::parse(run.get_string("noise_schedule"));
  } else if (modality == Modality::audiovisual_attention) {
    schedule = NoiseSchedule::parse(kDefaultNoiseSchedule);
  }
  if (schedule) schedule->replay = run.get_bool("replay", true);

  // Fused modalities need their sub-network checkpoints before any data is
  // touched, so a missing stage fails fast.
  const std::string name = modality_name(modality);
  const fs::path ckpt_a = acoustic_checkpoint_path(out_dir), ckpt_v = visual_checkpoint_path(out_dir);
  if (is_fused(modality)) {
    for (const auto& [p, stage] : {std::pair{ckpt_a, "acoustic"}, std::pair{ckpt_v, "visual"}}) {
      if (!fs::exists(p)) {
        throw MissingPrerequisiteError(std::string(stage) + " checkpoint " + p.string() +
                                       "; run train --modality " + stage + " first");
      }
    }
  }

  CorpusManifest m = prepare_corpus(corpus, out);
  const Dataset ds = load_dataset(m, labels);

  Rng init = Rng(tc.seed).split(is_fused(modality) ? 3 : modality == Modality::acoustic ? 1 : 2);
  ModelConfig cfg;
  std::optional<ModelGraph> graph;
  if (is_fused(modality)) {
    const Checkpoint ca = load_stage_checkpoint(ckpt_a, "acoustic", labels, ds);
    const Checkpoint cv = load_stage_checkpoint(ckpt_v, "visual", labels, ds);
    KvConfig mk = run.subtree("model");
    if (mk.has("modality") && parse_modality(mk.get_string("modality")) != modality) {
      throw ConfigMismatchError("config modality " + mk.get_string("modality") + " but training " + name);
    }
    mk.set("modality", name);
    for (const auto& [k, v] : with_prefix(ca.graph.config.to_text(), "acoustic.")) mk.set(k, v);
    for (const auto& [k, v] : with_prefix(cv.graph.config.to_text(), "visual.")) mk.set(k, v);
    cfg = ModelConfig::from_kv(mk);
    graph = build_audiovisual(cfg, ca.graph, cv.graph, init);
  } else {
    cfg = resolve_single(run.subtree("model"), modality, ds);
    graph = build_model(cfg, init);
  }

  KvConfig extra;
  extra.set("labels", label_kind_name(labels));
  if (schedule) {
    extra.set("noise_schedule", schedule->to_text());
    extra.set("replay", schedule->replay ? "true" : "false");
  }
  const std::string config_text = resolved_text(extra, cfg, tc);

  RunRecord rec;
  rec.command = "train " + name;
  rec.config = config_text;
  rec.seed = tc.seed;
  rec.inputs["corpus"] = fs::absolute(corpus).lexically_normal().string();
  if (is_fused(modality)) {
    Fnv1a ha, hv;
    ha.update(read_binary_file(ckpt_a));
    hv.update(read_binary_file(ckpt_v));
    rec.inputs["acoustic_checkpoint"] = ckpt_a.string() + "#" + ha.hex();
    rec.inputs["visual_checkpoint"] = ckpt_v.string() + "#" + hv.hex();
  }
  rec.assign_id();

  fs::create_directories(out_dir);
  const fs::path metrics_path = out_dir / (name + ".metrics.csv");
  MetricsLog log(metrics_path);
  std::vector<TrainReport> reports;
  if (schedule) {
    const NoisyData nd{ds.split("train").size(), ds.split("val").size(), noisy_example_fn(ds, "train"),
                       noisy_example_fn(ds, "val")};
    reports = train_noise_schedule(*graph, nd, *schedule, tc, &log);
  } else {
    reports.push_back(run_epochs(*graph, clean_source(ds, "train"), clean_source(ds, "val"), tc, &log, name));
  }
  log.flush();

  json meta;
  meta["schema_version"] = 1;
  meta["run_id"] = rec.run_id;
  meta["modality"] = name;
  meta["labels"] = label_kind_name(labels);
  meta["classes"] = ds.classes.class_names();
  if (schedule) meta["noise_schedule"] = schedule->to_text();
  meta["lineage"] = json::parse(lineage_json(reports, tc.seed));
  const fs::path ckpt = out_dir / (name + ".ckpt");
  save_checkpoint(ckpt, *graph, meta.dump(2));
  const fs::path config_path = out_dir / (name + ".config");
  write_text_file(config_path, config_text);

  const EvalResult val = evaluate(*graph, clean_source(ds, "val"));
  const EvalResult test = evaluate(*graph, clean_source(ds, "test"));
  std::size_t epochs = 0;
  for (const auto& r : reports) epochs += r.epochs.size();
  const EpochRecord* last = nullptr;
  for (const auto& r : reports)
    if (!r.epochs.empty()) last = &r.epochs.back();
  rec.metrics["epochs"] = static_cast<double>(epochs);
  rec.metrics["final_train_accuracy"] = last ? last->train_accuracy : 0.0;
  rec.metrics["best_val_loss"] = reports.back().best_val_loss;
  rec.metrics["val_accuracy"] = val.accuracy;
  rec.metrics["test_accuracy"] = test.accuracy;
  rec.outputs = {{"checkpoint", ckpt.string()}, {"metrics", metrics_path.string()}, {"config", config_path.string()}};
  const fs::path rec_path = out_dir / (name + ".run.json");
  rec.save(rec_path);

  for (const auto& r : reports)
    for (const auto& w : r.warnings) out << "warning: " << r.stage << ": " << w << "\n";
  out << "train " << name << ": " << epochs << " epochs, final train accuracy "
      << fmt("%.2f", rec.metrics["final_train_accuracy"]) << "%, val " << fmt("%.2f", val.accuracy) << "%, test "
      << fmt("%.2f", test.accuracy) << "%\n";
  out << "wrote " << ckpt.string() << ", " << metrics_path.string() << ", " << rec_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-noise

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::string snr = kDefaultSnrList;
  std::string split = "test";
  std::uint64_t seed = 99;
  std::string out;
};

int cmd_eval_noise(const EvalArgs& a, std::ostream& out) {
  const fs::path corpus = resolve_path(a.corpus, "AVSR_CORPUS", "corpus directory (--corpus)");
  const fs::path ckpt_path = a.checkpoint;
  fs::path csv_path = a.out;
  if (csv_path.empty()) {
    csv_path = resolve_path("", "AVSR_OUTPUT_DIR", "output CSV (--out)") / (ckpt_path.stem().string() + ".noise.csv");
  }
  std::vector<SnrLevel> levels;
  for (const auto& item : split(a.snr, ',')) {
    if (!trim(item).empty()) levels.push_back(parse_snr(trim(item)));
  }
  if (levels.empty()) throw ParameterError("empty SNR list");
  if (std::find(kSplits.begin(), kSplits.end(), a.split) == kSplits.end()) {
    throw ParameterError("split must be train, val or test, got '" + a.split + "'");
  }

  if (!fs::exists(ckpt_path)) throw MissingPrerequisiteError("checkpoint " + ckpt_path.string());
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const json meta = parse_metadata(ck.metadata);
  const LabelKind labels = parse_label_kind(meta.value("labels", "phoneme"));
  CorpusManifest m = prepare_corpus(corpus, out);
  const Dataset ds = load_dataset(m, labels);
  if (ck.graph.config.class_count != ds.classes.size() ||
      (meta.contains("classes") && meta["classes"].get<std::vector<std::string>>() != ds.classes.class_names())) {
    throw ConfigMismatchError(ckpt_path.string() + " was trained on a different class inventory");
  }
  if (ds.split(a.split).empty()) throw DataError("split " + a.split + " has no utterances");

  RunRecord rec;
  rec.command = "eval-noise";
  rec.seed = a.seed;
  rec.config = "labels = " + label_kind_name(labels) + "\nsnr = " + a.snr + "\nsplit = " + a.split + "\n";
  rec.inputs["corpus"] = fs::absolute(corpus).lexically_normal().string();
  Fnv1a h;
  h.update(read_binary_file(ckpt_path));
  rec.inputs["checkpoint"] = ckpt_path.string() + "#" + h.hex();
  rec.assign_id();

  std::string csv = "snr,accuracy,mean_wa,mean_wv,intervals\n";
  for (const auto& snr : levels) {
    const EvalResult r = evaluate(ck.graph, noisy_source(ds, a.split, snr, a.seed));
    const std::string tag = format_snr(snr);
    csv += tag + "," + fmt("%.10g", r.accuracy) + "," + fmt("%.10g", r.mean_wa) + "," + fmt("%.10g", r.mean_wv) +
           "," + std::to_string(r.intervals) + "\n";
    rec.metrics["accuracy_" + tag] = r.accuracy;
    if (is_fused(ck.graph.config.modality)) rec.metrics["mean_wv_" + tag] = r.mean_wv;
    out << "snr " << tag << ": accuracy " << fmt("%.2f", r.accuracy) << "%";
    if (ck.graph.config.modality == Modality::audiovisual_attention) {
      out << ", w_a " << fmt("%.3f", r.mean_wa) << ", w_v " << fmt("%.3f", r.mean_wv);
    }
    out << "\n";
  }
  if (!csv_path.parent_path().empty()) fs::create_directories(csv_path.parent_path());
  write_text_file(csv_path, csv);
  const fs::path plot = csv_path.parent_path() / "plot_noise.py";
  write_plot_stub(plot,
                  "# usage: plot_noise.py <noise.csv>...\n"
                  "for path in sys.argv[1:]:\n"
                  "    rows = list(csv.DictReader(open(path)))\n"
                  "    plt.plot([r['snr'] for r in rows], [float(r['accuracy']) for r in rows], marker='o', "
                  "label=path)\n"
                  "plt.xlabel('SNR (dB)')\nplt.ylabel('accuracy (%)')\nplt.legend()\n"
                  "plt.savefig('noise_sweep.png', dpi=150)\n");
  rec.outputs = {{"csv", csv_path.string()}, {"plot_script", plot.string()}};
  fs::path rec_path = csv_path;
  rec_path.replace_extension(".run.json");
  rec.save(rec_path);
  out << "wrote " << csv_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// resources

struct ResourcesArgs {
  std::string config;
  std::string checkpoint;
  bool json = false;
  std::string out;
  std::string compare;
};

int cmd_resources(const ResourcesArgs& a, std::ostream& out) {
  if (a.config.empty() == a.checkpoint.empty()) throw ParameterError("give exactly one of --config or --checkpoint");
  ModelConfig cfg;
  if (!a.checkpoint.empty()) {
    if (!fs::exists(a.checkpoint)) throw MissingPrerequisiteError("checkpoint " + a.checkpoint);
    cfg = load_checkpoint(a.checkpoint).graph.config;
  } else {
    // Either a bare model config or a train config with model.* keys.
    const KvConfig kv = KvConfig::load(a.config);
    bool prefixed = false;
    for (const auto& [k, e] : kv.entries()) prefixed = prefixed || k.rfind("model.", 0) == 0;
    cfg = ModelConfig::from_kv(prefixed ? kv.subtree("model") : kv);
  }
  const ResourceReport r = count_resources(cfg);
  const std::string js = resource_report_json(r, cfg);
  out << (a.json ? js : resource_report_table(r));
  if (!a.out.empty()) write_text_file(a.out, js);
  if (!a.compare.empty()) {
    const PublishedCost* hit = nullptr;
    std::string names;
    for (const auto& p : published_costs()) {
      if (p.network == a.compare) hit = &p;
      names += (names.empty() ? "" : ", ") + p.network;
    }
    if (hit == nullptr) throw ParameterError("unknown network '" + a.compare + "'; expected one of " + names);
    out << "\n" << discrepancy_report(r, *hit);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string grid;
  std::string corpus;
  std::string out;
  std::optional<std::uint64_t> seed;
};

std::vector<std::size_t> grid_counts(const KvConfig& kv, const std::string& key) {
  if (!kv.has(key)) throw ConfigParseError(kv.entries().empty() ? "<grid>" : kv.entries().begin()->second.file, 0,
                                           "grid needs " + key);
  const auto& entry = kv.entries().at(key);
  std::vector<std::size_t> out;
  for (const auto& item : kv.get_list(key)) {
    char* end = nullptr;
    const long long v = std::strtoll(item.c_str(), &end, 10);
    if (*end != '\0' || v < 1) throw ConfigParseError(entry.file, entry.line, "bad count '" + item + "' in " + key);
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigParseError(entry.file, entry.line, key + " is empty");
  return out;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const fs::path corpus = resolve_path(a.corpus, "AVSR_CORPUS", "corpus directory (--corpus)");
  const fs::path out_dir = resolve_path(a.out, "AVSR_OUTPUT_DIR", "output directory (--out)");
  const KvConfig grid = KvConfig::load(a.grid);
  check_keys(grid, {"labels", "split", "grid.layers", "grid.hidden"}, {"model.", "train."});
  const LabelKind labels = parse_label_kind(grid.get_string("labels", "phoneme"));
  const std::string eval_split = grid.get_string("split", "test");
  if (std::find(kSplits.begin(), kSplits.end(), eval_split) == kSplits.end()) {
    throw ParameterError("split must be train, val or test, got '" + eval_split + "'");
  }
  const auto layers = grid_counts(grid, "grid.layers");
  const auto hidden = grid_counts(grid, "grid.hidden");
  const TrainConfig tc = train_config(grid, a.seed);
  const KvConfig base = grid.subtree("model");
  const Modality modality = parse_modality(base.get_string("modality", "acoustic"));
  if (modality != Modality::acoustic && modality != Modality::visual) {
    throw ParameterError("sweeps cover acoustic or visual networks, got " + modality_name(modality));
  }

  CorpusManifest m = prepare_corpus(corpus, out);
  const Dataset ds = load_dataset(m, labels);
  if (ds.split(eval_split).empty()) throw DataError("split " + eval_split + " has no utterances");
  const std::string corpus_abs = fs::absolute(corpus).lexically_normal().string();

  std::vector<std::pair<std::string, ModelConfig>> points;
  for (std::size_t l : layers) {
    for (std::size_t h : hidden) {
      KvConfig mk = base;
      mk.set("layers", std::to_string(l));
      mk.set("hidden", std::to_string(h));
      points.emplace_back("L" + std::to_string(l) + "_H" + std::to_string(h), resolve_single(mk, modality, ds));
    }
  }

  KvConfig extra;
  extra.set("labels", label_kind_name(labels));
  extra.set("split", eval_split);
  std::size_t trained = 0, resumed = 0;
  const SweepRunner runner = [&](const ModelConfig& cfg, std::size_t i) {
    const fs::path dir = out_dir / "points" / points[i].first;
    RunRecord rec;
    rec.command = "sweep-point";
    rec.config = resolved_text(extra, cfg, tc);
    rec.seed = tc.seed;
    rec.inputs["corpus"] = corpus_abs;
    rec.assign_id();
    const fs::path rec_path = dir / "run.json";
    if (fs::exists(rec_path)) {
      try {
        const RunRecord prev = RunRecord::load(rec_path);
        if (prev.run_id == rec.run_id && prev.metrics.count("accuracy")) {
          ++resumed;
          return prev.metrics.at("accuracy");
        }
      } catch (const DataError&) {
        // An unreadable record is treated as an unfinished point.
      }
    }
    fs::create_directories(dir);
    Rng init = Rng(tc.seed).split(modality == Modality::acoustic ? 1 : 2);
    ModelGraph g = build_model(cfg, init);
    MetricsLog log(dir / "metrics.csv");
    run_epochs(g, clean_source(ds, "train"), clean_source(ds, "val"), tc, &log, points[i].first);
    const double acc = evaluate(g, clean_source(ds, eval_split)).accuracy;
    save_checkpoint(dir / "model.ckpt", g, lineage_json({}, tc.seed));
    rec.metrics["accuracy"] = acc;
    rec.outputs = {{"checkpoint", (dir / "model.ckpt").string()}, {"metrics", (dir / "metrics.csv").string()}};
    rec.save(rec_path);  // last, so a partial point is retrained
    ++trained;
    out << "point " << points[i].first << ": accuracy " << fmt("%.2f", acc) << "%\n";
    return acc;
  };
  const SweepResult res = pareto_sweep(points, runner);

  fs::create_directories(out_dir);
  const std::string table = sweep_csv(res);
  write_text_file(out_dir / "sweep.csv", table);
  const auto lines = split(table, '\n');
  std::string frontier = lines.front() + "\n";
  for (std::size_t i : res.frontier) frontier += lines[i + 1] + "\n";
  write_text_file(out_dir / "frontier.csv", frontier);
  std::string plot = "label,flops_per_second,size_megabytes,accuracy,frontier\n";
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const ParetoPoint& p = res.points[i];
    if (!p.ok) continue;
    const bool front = std::find(res.frontier.begin(), res.frontier.end(), i) != res.frontier.end();
    plot += p.label + "," + fmt("%.10g", p.flops) + "," +
            fmt("%.10g", static_cast<double>(p.size_bytes) / kBytesPerMegabyte) + "," + fmt("%.10g", p.accuracy) +
            "," + (front ? "1" : "0") + "\n";
  }
  write_text_file(out_dir / "sweep_plot.csv", plot);
  write_plot_stub(out_dir / "plot_sweep.py",
                  "rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else 'sweep_plot.csv')))\n"
                  "fig, ax = plt.subplots(1, 2, figsize=(10, 4))\n"
                  "for a, key, name in ((ax[0], 'flops_per_second', 'FLOP/s'), (ax[1], 'size_megabytes', 'MB')):\n"
                  "    for r in rows:\n"
                  "        a.scatter(float(r[key]), float(r['accuracy']), c='C3' if r['frontier'] == '1' else 'C0')\n"
                  "        a.annotate(r['label'], (float(r[key]), float(r['accuracy'])), fontsize=7)\n"
                  "    a.set_xscale('log')\n    a.set_xlabel(name)\n    a.set_ylabel('accuracy (%)')\n"
                  "fig.tight_layout()\nfig.savefig('sweep.png', dpi=150)\n");

  RunRecord rec;
  rec.command = "sweep";
  rec.config = KvConfig::parse(grid.to_text() + tc.to_text("train."), "<resolved>").to_text();
  rec.seed = tc.seed;
  rec.inputs["corpus"] = corpus_abs;
  rec.assign_id();
  rec.outputs = {{"sweep", (out_dir / "sweep.csv").string()},
                 {"frontier", (out_dir / "frontier.csv").string()},
                 {"plot_data", (out_dir / "sweep_plot.csv").string()},
                 {"plot_script", (out_dir / "plot_sweep.py").string()}};
  std::size_t failed = 0;
  for (const auto& p : res.points) failed += p.ok ? 0 : 1;
  rec.metrics = {{"points", static_cast<double>(res.points.size())},
                 {"trained", static_cast<double>(trained)},
                 {"resumed", static_cast<double>(resumed)},
                 {"failed", static_cast<double>(failed)},
                 {"frontier", static_cast<double>(res.frontier.size())}};
  rec.save(out_dir / "run.json");

  out << "sweep: " << res.points.size() << " points (" << trained << " trained, " << resumed << " resumed, "
      << failed << " failed), frontier:";
  for (std::size_t i : res.frontier) out << " " << res.points[i].label;
  out << "\nwrote " << (out_dir / "sweep.csv").string() << "\n";
  for (const auto& p : res.points)
    if (!p.ok) out << "failed " << p.label << ": " << p.error << "\n";
  // A failed point is an error for the exit status; the rest are still written.
  if (failed == 0) return kExitOk;
  for (const auto& p : res.points)
    if (!p.ok && p.error.find("numeric error") != std::string::npos) return kExitNumeric;
  return kExitData;
}

}  // namespace

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio-visual speech recognition toolkit"};
  app.name("avsr");
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric/training error.\n"
             "Environment: AVSR_CORPUS and AVSR_OUTPUT_DIR supply corpus and output paths not given as flags.");

  SynthArgs synth;
  std::uint64_t synth_seed = 0;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic audio-visual corpus");
  c_synth->add_option("--spec", synth.spec, "Corpus spec file (key = value)");
  c_synth->add_option("--out", synth.out, "Output corpus directory [env AVSR_CORPUS]");
  auto* o_synth_seed = c_synth->add_option("--seed", synth_seed, "Override the corpus seed");

  std::string cache_corpus;
  auto* c_cache = app.add_subcommand("cache", "Scan a corpus and compute missing MFCC caches");
  c_cache->add_option("--corpus", cache_corpus, "Corpus directory [env AVSR_CORPUS]");

  TrainArgs train;
  std::uint64_t train_seed = 0;
  auto* c_train = app.add_subcommand("train", "Train one network stage");
  c_train->add_option("--modality", train.modality, "acoustic, visual, audiovisual or audiovisual_attention")
      ->required();
  c_train->add_option("--corpus", train.corpus, "Corpus directory [env AVSR_CORPUS]");
  c_train->add_option("--config", train.config, "Run config with model.*, train.*, labels, noise_schedule");
  c_train->add_option("--out", train.out, "Output directory [env AVSR_OUTPUT_DIR]");
  auto* o_train_seed = c_train->add_option("--seed", train_seed, "Override train.seed");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval-noise", "Accuracy and stream weights across SNR levels");
  c_eval->add_option("--checkpoint", eval.checkpoint, "Trained checkpoint")->required();
  c_eval->add_option("--corpus", eval.corpus, "Corpus directory [env AVSR_CORPUS]");
  c_eval->add_option("--snr", eval.snr, "Comma-separated SNR levels in dB or 'clean'")->capture_default_str();
  c_eval->add_option("--split", eval.split, "Evaluation split")->capture_default_str();
  c_eval->add_option("--seed", eval.seed, "Noise seed")->capture_default_str();
  c_eval->add_option("--out", eval.out, "Output CSV [default $AVSR_OUTPUT_DIR/<checkpoint>.noise.csv]");

  ResourcesArgs res;
  auto* c_res = app.add_subcommand("resources", "Parameter, MAC/FLOP and size census");
  c_res->add_option("--config", res.config, "Model config file");
  c_res->add_option("--checkpoint", res.checkpoint, "Checkpoint file");
  c_res->add_flag("--json", res.json, "Print JSON instead of the table");
  c_res->add_option("--out", res.out, "Also write the JSON report here");
  c_res->add_option("--compare", res.compare, "Compare against a published network cost");

  SweepArgs sweep;
  std::uint64_t sweep_seed = 0;
  auto* c_sweep = app.add_subcommand("sweep", "Accuracy versus cost sweep with Pareto frontier");
  c_sweep->add_option("--grid", sweep.grid, "Grid file with grid.layers, grid.hidden and fixed settings")
      ->required();
  c_sweep->add_option("--corpus", sweep.corpus, "Corpus directory [env AVSR_CORPUS]");
  c_sweep->add_option("--out", sweep.out, "Output directory [env AVSR_OUTPUT_DIR]");
  auto* o_sweep_seed = c_sweep->add_option("--seed", sweep_seed, "Override train.seed");

  std::vector<const char*> argv{"avsr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_synth->parsed()) {
      if (o_synth_seed->count()) synth.seed = synth_seed;
      return cmd_synth(synth, out);
    }
    if (c_cache->parsed()) return cmd_cache(cache_corpus, out);
    if (c_train->parsed()) {
      if (o_train_seed->count()) train.seed = train_seed;
      return cmd_train(train, out);
    }
    if (c_eval->parsed()) return cmd_eval_noise(eval, out);
    if (c_res->parsed()) return cmd_resources(res, out);
    if (c_sweep->parsed()) {
      if (o_sweep_seed->count()) sweep.seed = sweep_seed;
      return cmd_sweep(sweep, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace avsr
