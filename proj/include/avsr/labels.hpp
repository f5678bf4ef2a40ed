// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "avsr/error.hpp"

namespace avsr {

/// Ordered 39-symbol phoneme inventory with stable indices.
class PhonemeSet {
 public:
  static constexpr std::size_t kSize = 39;

  explicit PhonemeSet(std::vector<std::string> symbols);
  /// The bundled inventory (checksum-validated at first use).
  static const PhonemeSet& standard();

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::string& symbol(std::size_t index) const { return symbols_.at(index); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  bool contains(const std::string& s) const { return index_.count(s) != 0; }
  /// Throws DataError for unknown symbols.
  std::size_t index_of(const std::string& s) const;

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, std::size_t> index_;
};

/// Total map from the phoneme inventory to viseme symbols.
class VisemeMap {
 public:
  VisemeMap(const PhonemeSet& phonemes, std::map<std::string, std::string> table);
  static const VisemeMap& standard();

  const std::string& viseme_of(const std::string& phoneme) const;
  /// Distinct visemes in first-appearance order of the phoneme inventory.
  const std::vector<std::string>& visemes() const noexcept { return visemes_; }

 private:
  std::map<std::string, std::string> table_;
  std::vector<std::string> visemes_;
};

/// Parses the phoneme asset format (one symbol per line, '#' comments).
PhonemeSet parse_phoneme_asset(const std::string& text);
/// Parses the viseme asset format ("phoneme viseme" per line) and checks totality.
VisemeMap parse_viseme_asset(const std::string& text, const PhonemeSet& phonemes);

/// Validates the asset checksums listed in a MANIFEST against the given files.
void verify_asset_manifest(const std::string& manifest_text,
                           const std::map<std::string, std::string>& files);
/// Loads phoneme and viseme assets from a directory holding a MANIFEST.
std::pair<PhonemeSet, VisemeMap> load_assets(const std::filesystem::path& dir);

struct LabelInterval {
  double start = 0.0;  // seconds
  double end = 0.0;    // seconds
  std::string phoneme;
};

struct AlignedLabels {
  std::vector<LabelInterval> intervals;

  double end_time() const { return intervals.empty() ? 0.0 : intervals.back().end; }
};

enum class AlignmentErrorKind { malformed, out_of_order, overlap, unknown_phoneme };

class AlignmentError : public DataError {
 public:
  AlignmentError(AlignmentErrorKind kind, int line, const std::string& what);
  AlignmentErrorKind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }

 private:
  AlignmentErrorKind kind_;
  int line_;
};

/// TIMIT-style label text: "start_sample end_sample phoneme" per line.
/// An optional "# sample_rate = N" line overrides `sample_rate`; other '#'
/// lines are comments.
AlignedLabels parse_alignment(const std::string& text, double sample_rate = 16000.0,
                              const PhonemeSet& phonemes = PhonemeSet::standard());
std::string serialize_alignment(const AlignedLabels& labels, double sample_rate = 16000.0);
void validate_alignment(const AlignedLabels& labels, const PhonemeSet& phonemes = PhonemeSet::standard());

struct MidpointFrame {
  std::size_t frame = 0;
  std::size_t phoneme = 0;  // index into the phoneme inventory
};

/// frame = floor(((start + end) / 2) / hop) for every interval. A tolerance of
/// 1e-9 frames absorbs binary representation error of decimal times.
std::vector<MidpointFrame> midpoint_frames(const AlignedLabels& labels, double hop,
                                           const PhonemeSet& phonemes = PhonemeSet::standard());

/// Frame index of each interval midpoint in a stream of `frame_count`
/// frames at `rate` frames per second. Labels ending after `duration`
/// seconds are rejected; indices are clamped to the last frame.
std::vector<std::size_t> midpoint_indices(const AlignedLabels& labels, double rate,
                                          std::size_t frame_count, double duration);

std::vector<std::string> to_visemes(std::span<const std::string> phonemes, const VisemeMap& map);

/// 100 * matches / count.
double frame_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> golds);
double frame_accuracy(std::span<const std::string> preds, std::span<const std::string> golds);

/// Maps label symbols onto contiguous class indices for a model head.
class ClassMap {
 public:
  /// One class per symbol, in the given order.
  static ClassMap phonemes(std::vector<std::string> symbols);
  /// One class per viseme covered by `symbols`; phonemes sharing a viseme share a class.
  static ClassMap visemes(const std::vector<std::string>& symbols, const VisemeMap& map);

  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return classes_; }
  std::size_t class_of(const std::string& phoneme) const;
  bool is_viseme_map() const noexcept { return viseme_; }

 private:
  std::vector<std::string> classes_;
  std::map<std::string, std::size_t> lookup_;
  bool viseme_ = false;
};

}  // namespace avsr
