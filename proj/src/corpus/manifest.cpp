// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "avsr/binary_io.hpp"
#include "avsr/corpus.hpp"
#include "avsr/error.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace avsr {

const std::vector<UtteranceRecord>& CorpusManifest::split(const std::string& name) const {
  static const std::vector<UtteranceRecord> kEmpty;
  const auto it = splits.find(name);
  return it == splits.end() ? kEmpty : it->second;
}

std::size_t CorpusManifest::size() const {
  std::size_t n = 0;
  for (const auto& [name, recs] : splits) n += recs.size();
  return n;
}

void CorpusManifest::validate() const {
  std::map<std::string, std::string> seen;
  for (const auto& [name, recs] : splits) {
    for (const auto& r : recs) {
      const auto [it, fresh] = seen.emplace(r.id, name);
      if (!fresh) throw DataError("utterance '" + r.id + "' appears in splits " + it->second + " and " + name);
      for (const fs::path* p : {&r.audio, &r.labels}) {
        if (!fs::exists(root / *p)) throw MissingPrerequisiteError((root / *p).string());
      }
      if (r.video && !fs::exists(root / *r.video)) throw MissingPrerequisiteError((root / *r.video).string());
    }
  }
}

std::string CorpusManifest::to_json() const {
  ordered_json j;
  j["schema_version"] = kManifestVersion;
  j["classes"] = classes;
  j["splits"] = ordered_json::object();
  for (const auto& name : kSplits) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : split(name)) {
      ordered_json e;
      e["id"] = r.id;
      e["audio"] = r.audio.generic_string();
      e["labels"] = r.labels.generic_string();
      e["video"] = r.video ? ordered_json(r.video->generic_string()) : ordered_json(nullptr);
      e["features"] = r.features.generic_string();
      e["feature_hash"] = r.feature_hash;
      arr.push_back(e);
    }
    j["splits"][name] = arr;
  }
  j["feature_cache"] = {{"mfcc", mfcc_fingerprint}};
  j["norm_stats"] = {{"file", norm_stats.generic_string()},
                     {"fitted_on", norm_fitted_on},
                     {"utterances", norm_utterances}};
  j["warnings"] = warnings;
  j["errors"] = errors;
  return j.dump(2) + "\n";
}

CorpusManifest CorpusManifest::from_json(const std::string& text, const fs::path& root) {
  CorpusManifest m;
  m.root = root;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != kManifestVersion) {
      throw UnsupportedVersionError("manifest schema " + std::to_string(j.at("schema_version").get<int>()));
    }
    m.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& [name, arr] : j.at("splits").items()) {
      auto& recs = m.splits[name];
      for (const auto& e : arr) {
        UtteranceRecord r;
        r.id = e.at("id").get<std::string>();
        r.split = name;
        r.audio = e.at("audio").get<std::string>();
        r.labels = e.at("labels").get<std::string>();
        if (!e.at("video").is_null()) r.video = fs::path(e.at("video").get<std::string>());
        r.features = e.at("features").get<std::string>();
        r.feature_hash = e.at("feature_hash").get<std::string>();
        recs.push_back(std::move(r));
      }
    }
    m.mfcc_fingerprint = j.at("feature_cache").at("mfcc").get<std::string>();
    m.norm_stats = j.at("norm_stats").at("file").get<std::string>();
    m.norm_fitted_on = j.at("norm_stats").at("fitted_on").get<std::string>();
    m.norm_utterances = j.at("norm_stats").at("utterances").get<std::size_t>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    m.errors = j.at("errors").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError("manifest: " + std::string(e.what()));
  }
  return m;
}

void CorpusManifest::save() const { write_text_file(root / "manifest.json", to_json()); }

CorpusManifest CorpusManifest::load(const fs::path& root) {
  const fs::path p = root / "manifest.json";
  if (!fs::exists(p)) throw MissingPrerequisiteError(p.string());
  return from_json(read_text_file(p), root);
}

CorpusManifest open_corpus(const fs::path& root) {
  return fs::exists(root / "manifest.json") ? CorpusManifest::load(root) : scan_corpus(root);
}

namespace {

std::string split_of(const fs::path& rel) {
  const std::string first = rel.begin()->string();
  if (std::next(rel.begin()) == rel.end()) return "train";
  return std::find(kSplits.begin(), kSplits.end(), first) != kSplits.end() ? first : "";
}

}  // namespace

CorpusManifest scan_corpus(const fs::path& root) {
  if (!fs::is_directory(root)) throw MissingPrerequisiteError("corpus directory " + root.string());
  CorpusManifest m;
  m.root = root;
  for (const auto& name : kSplits) m.splits[name];

  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (it->is_directory() && it->path().filename() == "cache") {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) files.push_back(fs::relative(it->path(), root));
  }
  std::sort(files.begin(), files.end());
  const std::set<fs::path> present(files.begin(), files.end());

  std::set<std::size_t> used_classes;
  std::map<std::string, std::string> id_split;
  for (const auto& rel : files) {
    const std::string ext = rel.extension().string();
    fs::path counterpart = rel;
    if (ext == ".phn") {
      if (!present.count(counterpart.replace_extension(".wav"))) {
        m.errors.push_back(rel.generic_string() + ": label file without audio");
      }
      continue;
    }
    if (ext != ".wav") continue;
    const std::string split = split_of(rel);
    if (split.empty()) {
      m.warnings.push_back(rel.generic_string() + ": not under train/, val/ or test/; ignored");
      continue;
    }
    UtteranceRecord r;
    r.id = rel.stem().string();
    r.split = split;
    r.audio = rel;
    r.labels = fs::path(rel).replace_extension(".phn");
    if (!present.count(r.labels)) {
      m.errors.push_back(rel.generic_string() + ": missing label file " + r.labels.generic_string());
      continue;
    }
    const fs::path video = fs::path(rel).replace_extension(".avic");
    if (present.count(video)) r.video = video;
    try {
      const AlignedLabels labels = parse_alignment(read_text_file(root / r.labels));
      if (labels.intervals.empty()) throw DataError("no intervals");
      for (const auto& iv : labels.intervals) used_classes.insert(PhonemeSet::standard().index_of(iv.phoneme));
    } catch (const DataError& e) {
      m.errors.push_back(r.labels.generic_string() + ": " + e.what());
      continue;
    }
    const auto [it, fresh] = id_split.emplace(r.id, split);
    if (!fresh) {
      m.errors.push_back(rel.generic_string() + ": id '" + r.id + "' already used in split " + it->second);
      continue;
    }
    m.splits[split].push_back(std::move(r));
  }
  for (std::size_t c : used_classes) m.classes.push_back(PhonemeSet::standard().symbol(c));
  if (m.size() == 0) m.warnings.push_back("no utterances found under " + root.string());
  return m;
}

namespace {

std::string norm_json(const NormStats& s, std::size_t utterances) {
  ordered_json j;
  j["schema_version"] = 1;
  j["fitted_on"] = "train";
  j["utterances"] = utterances;
  j["mean"] = std::vector<double>(s.mean.data().begin(), s.mean.data().end());
  j["std"] = std::vector<double>(s.std.data().begin(), s.std.data().end());
  return j.dump(2) + "\n";
}

}  // namespace

CacheReport cache_features(CorpusManifest& m, const MfccConfig& cfg) {
  CacheReport rep;
  std::vector<FeatureSequence> train;
  for (auto& [name, recs] : m.splits) {
    for (auto& r : recs) {
      try {
        const auto wav = read_binary_file(m.root / r.audio);
        Fnv1a h;
        h.update(std::span<const std::uint8_t>(wav));
        h.update(cfg.fingerprint());
        const std::string key = h.hex();
        const fs::path rel = fs::path("cache") / name / (r.id + ".avfc");
        FeatureSequence seq;
        if (r.feature_hash == key && r.features == rel && fs::exists(m.root / rel)) {
          ++rep.hits;
          if (name == "train") seq = read_feature_cache(m.root / rel);
        } else {
          seq = mfcc_extract(parse_wav(wav, r.audio.string()), cfg);
          fs::create_directories((m.root / rel).parent_path());
          write_feature_cache(m.root / rel, seq);
          seq = read_feature_cache(m.root / rel);
          r.features = rel;
          r.feature_hash = key;
          ++rep.computed;
        }
        if (name == "train") train.push_back(std::move(seq));
      } catch (const Error& e) {
        rep.errors.push_back(r.audio.generic_string() + ": " + e.what());
      }
    }
  }
  m.mfcc_fingerprint = cfg.fingerprint();
  if (!rep.errors.empty()) {
    m.save();
    return rep;
  }
  if (train.empty()) throw DataError("cache_features: the train split is empty; cannot fit normalisation");
  const NormStats stats = fit_norm_stats(std::span<const FeatureSequence>(train));
  const fs::path rel = fs::path("cache") / "norm.json";
  const std::string text = norm_json(stats, train.size());
  if (!fs::exists(m.root / rel) || read_text_file(m.root / rel) != text) {
    write_text_file(m.root / rel, text);
    rep.norm_updated = true;
  }
  m.norm_stats = rel;
  m.norm_fitted_on = "train";
  m.norm_utterances = train.size();
  const std::string manifest_text = m.to_json();
  if (!fs::exists(m.root / "manifest.json") || read_text_file(m.root / "manifest.json") != manifest_text) m.save();
  return rep;
}

NormStats load_norm_stats(const CorpusManifest& m) {
  if (m.norm_stats.empty()) throw MissingPrerequisiteError("normalisation statistics; run cache first");
  try {
    const auto j = nlohmann::json::parse(read_text_file(m.root / m.norm_stats));
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    if (mean.size() != sd.size()) throw CorruptFileError("norm stats: mean/std length mismatch");
    NormStats s;
    s.mean = Tensor({mean.size()}, mean);
    s.std = Tensor({sd.size()}, sd);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError("norm stats: " + std::string(e.what()));
  }
}

}  // namespace avsr
