// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "avsr/binary_io.hpp"
#include "avsr/corpus.hpp"
#include "avsr/error.hpp"

namespace fs = std::filesystem;

namespace avsr {

const std::vector<Utterance>& Dataset::split(const std::string& name) const {
  static const std::vector<Utterance> kEmpty;
  const auto it = splits.find(name);
  return it == splits.end() ? kEmpty : it->second;
}

namespace {

// Label of the interval holding each frame's window centre; frames past the
// last interval take its label.
std::vector<std::size_t> frame_classes(const AlignedLabels& labels, const std::vector<std::size_t>& classes,
                                       const std::vector<double>& times) {
  std::vector<std::size_t> out;
  out.reserve(times.size());
  std::size_t cur = 0;
  for (double t : times) {
    while (cur + 1 < labels.intervals.size() && t >= labels.intervals[cur].end) ++cur;
    out.push_back(classes[cur]);
  }
  return out;
}

Utterance load_utterance(const CorpusManifest& m, const UtteranceRecord& r, const ClassMap& classes,
                         const NormStats& norm, const MfccConfig& cfg) {
  if (r.features.empty() || !fs::exists(m.root / r.features)) {
    throw MissingPrerequisiteError("feature cache for " + r.id + "; run cache first");
  }
  Utterance u;
  u.id = r.id;
  u.clip = read_wav(m.root / r.audio);
  const FeatureSequence seq = read_feature_cache(m.root / r.features);
  u.features = normalize(seq.frames, norm);
  const AlignedLabels labels = parse_alignment(read_text_file(m.root / r.labels));
  std::vector<std::size_t> cls;
  for (const auto& iv : labels.intervals) cls.push_back(classes.class_of(iv.phoneme));
  u.labels = cls;

  const double duration = u.clip.duration();
  const std::size_t frames = u.features.dim(0);
  u.audio_mid = midpoint_indices(labels, 1.0 / cfg.hop_seconds, frames, duration);
  std::vector<double> times(frames);
  const double half = cfg.window_seconds / 2.0;
  for (std::size_t t = 0; t < frames; ++t) times[t] = static_cast<double>(t) * cfg.hop_seconds + half;
  u.frame_labels = frame_classes(labels, cls, times);

  if (r.video) {
    const ImageSequence video = read_avic(m.root / *r.video);
    u.images = video.frames(midpoint_indices(labels, video.fps, video.frame_count(), duration));
  }
  return u;
}

}  // namespace

Dataset load_dataset(const CorpusManifest& m, LabelKind kind, const MfccConfig& cfg) {
  if (m.mfcc_fingerprint != cfg.fingerprint()) {
    throw ConfigMismatchError("feature cache was built with " + m.mfcc_fingerprint + ", requested " +
                              cfg.fingerprint());
  }
  Dataset ds;
  ds.classes = kind == LabelKind::phoneme ? ClassMap::phonemes(m.classes)
                                          : ClassMap::visemes(m.classes, VisemeMap::standard());
  ds.norm = load_norm_stats(m);
  ds.mfcc = cfg;
  for (const auto& [name, recs] : m.splits) {
    auto& out = ds.splits[name];
    for (const auto& r : recs) out.push_back(load_utterance(m, r, ds.classes, ds.norm, cfg));
  }
  return ds;
}

Example make_example(const Dataset& ds, const Utterance& u, const SnrLevel& snr, Rng& rng) {
  Example ex;
  if (snr) {
    FeatureSequence seq = mfcc_extract(add_noise_snr(u.clip, snr, rng), ds.mfcc);
    round_to_float(seq.frames);
    ex.audio = normalize(seq.frames, ds.norm);
  } else {
    ex.audio = u.features;
  }
  ex.images = u.images;
  ex.audio_mid = u.audio_mid;
  ex.frame_labels = u.frame_labels;
  ex.labels = u.labels;
  return ex;
}

ExampleSource clean_source(const Dataset& ds, const std::string& split) {
  const auto* utts = &ds.split(split);
  return ExampleSource{utts->size(), [&ds, utts](std::size_t i, std::size_t) {
                         Rng unused(0);
                         return make_example(ds, (*utts)[i], std::nullopt, unused);
                       }};
}

NoisyExampleFn noisy_example_fn(const Dataset& ds, const std::string& split) {
  const auto* utts = &ds.split(split);
  return [&ds, utts](std::size_t i, const SnrLevel& snr, Rng& rng) { return make_example(ds, (*utts)[i], snr, rng); };
}

ExampleSource noisy_source(const Dataset& ds, const std::string& split, const SnrLevel& snr, std::uint64_t seed) {
  return fixed_noise_source(ds.split(split).size(), noisy_example_fn(ds, split), snr, seed);
}

}  // namespace avsr
