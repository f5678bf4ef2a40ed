// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avsr/kv_config.hpp"
#include "avsr/labels.hpp"
#include "avsr/models.hpp"
#include "avsr/signal.hpp"
#include "avsr/training.hpp"

namespace avsr {

// ---------------------------------------------------------------------------
// Image container: "AVIC" | u32 version | u32 width | u32 height | f64 fps |
// u32 frame count | frames x height x width u8 pixels, row-major,
// little-endian. No trailing bytes.

inline constexpr std::uint32_t kImageContainerVersion = 1;

struct ImageSequence {
  std::size_t width = 0;
  std::size_t height = 0;
  double fps = 30.0;
  std::vector<std::uint8_t> pixels;

  std::size_t frame_count() const { return width * height != 0 ? pixels.size() / (width * height) : 0; }
  /// Selected frames scaled to [0, 1], shape count x height x width.
  Tensor frames(const std::vector<std::size_t>& indices) const;
};

std::vector<std::uint8_t> encode_avic(const ImageSequence& seq);
ImageSequence decode_avic(std::span<const std::uint8_t> bytes, const std::string& name);
void write_avic(const std::filesystem::path& path, const ImageSequence& seq);
ImageSequence read_avic(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Corpus layout: <root>/{train,val,test}/<id>.wav with <id>.phn labels and an
// optional <id>.avic image sequence. Files directly under <root> belong to
// the train split. Feature caches live under <root>/cache.

inline const std::vector<std::string> kSplits = {"train", "val", "test"};

struct UtteranceRecord {
  std::string id;
  std::string split;
  std::filesystem::path audio;   // relative to the corpus root
  std::filesystem::path labels;
  std::optional<std::filesystem::path> video;
  std::filesystem::path features;  // cache file, empty until cached
  std::string feature_hash;        // content hash of the cached inputs
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<std::string> classes;  // label symbols in inventory order
  std::map<std::string, std::vector<UtteranceRecord>> splits;
  std::string mfcc_fingerprint;
  std::filesystem::path norm_stats;  // relative; empty until cached
  std::string norm_fitted_on;
  std::size_t norm_utterances = 0;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;

  const std::vector<UtteranceRecord>& split(const std::string& name) const;
  std::size_t size() const;
  /// Throws DataError when an id appears in two splits or a listed file is missing.
  void validate() const;

  std::string to_json() const;
  static CorpusManifest from_json(const std::string& text, const std::filesystem::path& root);
  void save() const;  // <root>/manifest.json
  static CorpusManifest load(const std::filesystem::path& root);
};

inline constexpr int kManifestVersion = 1;

/// Discovers wav/label/video triples. Problems are collected in `errors`
/// and the affected utterances left out; an empty tree yields a warning.
CorpusManifest scan_corpus(const std::filesystem::path& root);
/// manifest.json when present, otherwise a fresh scan.
CorpusManifest open_corpus(const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Synthetic corpus.

/// Each class has a formant envelope applied to a harmonic source, and a
/// mouth-shape image pattern. With `viseme_sharing`, classes whose symbols map
/// to the same viseme share their image pattern.
struct SynthSpec {
  std::size_t class_count = 10;
  std::uint64_t seed = 1;
  std::size_t train_count = 200;
  std::size_t val_count = 40;
  std::size_t test_count = 60;
  std::size_t min_intervals = 6;
  std::size_t max_intervals = 10;
  double min_interval_seconds = 0.08;
  double max_interval_seconds = 0.16;
  double separability = 2.0;    // template spread relative to per-interval jitter
  double sample_rate = 16000.0;
  double video_fps = 30.0;
  std::size_t image_size = 120;
  double image_noise = 0.15;    // pixel noise std on a [0, 1] scale
  double background_snr = 50.0; // recording noise floor, dB
  // Envelope shape. A high floor and wide formants spread the class cues
  // thinly over the band, so white noise at 0 dB masks most of them.
  double spectral_floor = 0.6;     // envelope level between formants
  double formant_bandwidth = 5.0;  // multiple of 80 Hz + 8% of the formant
  bool viseme_sharing = true;

  void validate() const;
  static SynthSpec from_kv(const KvConfig& kv);
  static SynthSpec load(const std::filesystem::path& path);
  std::string to_text() const;
  /// Label symbols of the classes, in class order.
  std::vector<std::string> class_symbols() const;
};

CorpusManifest generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out);

// ---------------------------------------------------------------------------
// Feature cache.

struct CacheReport {
  std::size_t computed = 0;
  std::size_t hits = 0;
  bool norm_updated = false;
  std::vector<std::string> errors;
};

/// Computes MFCCs for every utterance whose inputs changed or whose cache file
/// is missing, then refits normalisation statistics on the train split.
/// Saves the manifest.
CacheReport cache_features(CorpusManifest& manifest, const MfccConfig& cfg = {});
NormStats load_norm_stats(const CorpusManifest& manifest);

// ---------------------------------------------------------------------------
// In-memory dataset.

enum class LabelKind { phoneme, viseme };

struct Utterance {
  std::string id;
  AudioClip clip;
  Tensor features;  // normalised clean MFCCs, L x 39
  Tensor images;    // M x S x S, the video frame at each interval midpoint
  std::vector<std::size_t> labels;
  std::vector<std::size_t> audio_mid;
  std::vector<std::size_t> frame_labels;
};

struct Dataset {
  ClassMap classes;
  NormStats norm;
  MfccConfig mfcc;
  std::map<std::string, std::vector<Utterance>> splits;

  const std::vector<Utterance>& split(const std::string& name) const;
};

/// Requires cached features (see cache_features).
Dataset load_dataset(const CorpusManifest& manifest, LabelKind kind = LabelKind::phoneme,
                     const MfccConfig& cfg = {});

/// The example for `u` with audio corrupted at `snr` before feature extraction.
Example make_example(const Dataset& ds, const Utterance& u, const SnrLevel& snr, Rng& rng);
ExampleSource clean_source(const Dataset& ds, const std::string& split);
NoisyExampleFn noisy_example_fn(const Dataset& ds, const std::string& split);
/// Fixed noise per utterance, seeded by (seed, index).
ExampleSource noisy_source(const Dataset& ds, const std::string& split, const SnrLevel& snr, std::uint64_t seed);

}  // namespace avsr
