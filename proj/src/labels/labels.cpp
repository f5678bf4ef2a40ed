// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "avsr/labels.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "assets.hpp"
#include "avsr/binary_io.hpp"
#include "avsr/kv_config.hpp"

namespace avsr {

// ---- assets -----------------------------------------------------------------

namespace {

std::vector<std::string> content_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

}  // namespace

PhonemeSet::PhonemeSet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], i).second) {
      throw DataError("duplicate phoneme symbol '" + symbols_[i] + "'");
    }
  }
}

const PhonemeSet& PhonemeSet::standard() {
  static const PhonemeSet set = [] {
    verify_asset_manifest(assets::kManifest, {{assets::kPhonemeFile, assets::kPhonemeAsset},
                                              {assets::kVisemeFile, assets::kVisemeAsset}});
    return parse_phoneme_asset(assets::kPhonemeAsset);
  }();
  return set;
}

std::size_t PhonemeSet::index_of(const std::string& s) const {
  const auto it = index_.find(s);
  if (it == index_.end()) throw DataError("unknown phoneme '" + s + "'");
  return it->second;
}

PhonemeSet parse_phoneme_asset(const std::string& text) {
  PhonemeSet set(content_lines(text));
  if (set.size() != PhonemeSet::kSize) {
    throw DataError("phoneme asset must list exactly 39 symbols, found " + std::to_string(set.size()));
  }
  return set;
}

VisemeMap::VisemeMap(const PhonemeSet& phonemes, std::map<std::string, std::string> table)
    : table_(std::move(table)) {
  for (const auto& p : phonemes.symbols()) {
    const auto it = table_.find(p);
    if (it == table_.end()) throw DataError("viseme map is not total: no entry for '" + p + "'");
    if (std::find(visemes_.begin(), visemes_.end(), it->second) == visemes_.end()) {
      visemes_.push_back(it->second);
    }
  }
  for (const auto& [p, v] : table_) {
    if (!phonemes.contains(p)) throw DataError("viseme map entry for unknown phoneme '" + p + "'");
  }
  if (visemes_.size() >= phonemes.size()) {
    throw DataError("viseme map must merge phonemes (viseme count < phoneme count)");
  }
}

const VisemeMap& VisemeMap::standard() {
  static const VisemeMap map = parse_viseme_asset(assets::kVisemeAsset, PhonemeSet::standard());
  return map;
}

const std::string& VisemeMap::viseme_of(const std::string& phoneme) const {
  const auto it = table_.find(phoneme);
  if (it == table_.end()) throw DataError("unmapped phoneme '" + phoneme + "'");
  return it->second;
}

VisemeMap parse_viseme_asset(const std::string& text, const PhonemeSet& phonemes) {
  std::map<std::string, std::string> table;
  for (const auto& line : content_lines(text)) {
    std::istringstream in(line);
    std::string p, v, extra;
    if (!(in >> p >> v) || (in >> extra)) throw DataError("bad viseme asset line '" + line + "'");
    if (!table.emplace(p, v).second) throw DataError("duplicate viseme entry for '" + p + "'");
  }
  return VisemeMap(phonemes, std::move(table));
}

void verify_asset_manifest(const std::string& manifest_text,
                           const std::map<std::string, std::string>& files) {
  std::set<std::string> seen;
  for (const auto& line : content_lines(manifest_text)) {
    std::istringstream in(line);
    std::string name, version, checksum;
    if (!(in >> name >> version >> checksum)) throw DataError("bad manifest line '" + line + "'");
    const auto it = files.find(name);
    if (it == files.end()) continue;
    Fnv1a h;
    h.update(it->second);
    if (h.hex() != checksum) {
      throw CorruptFileError("asset " + name + " checksum " + h.hex() + " != manifest " + checksum);
    }
    seen.insert(name);
  }
  for (const auto& [name, _] : files) {
    if (!seen.count(name)) throw DataError("asset " + name + " missing from manifest");
  }
}

std::pair<PhonemeSet, VisemeMap> load_assets(const std::filesystem::path& dir) {
  const std::string manifest = read_text_file(dir / "MANIFEST");
  const std::string phon = read_text_file(dir / assets::kPhonemeFile);
  const std::string vis = read_text_file(dir / assets::kVisemeFile);
  verify_asset_manifest(manifest, {{assets::kPhonemeFile, phon}, {assets::kVisemeFile, vis}});
  PhonemeSet set = parse_phoneme_asset(phon);
  VisemeMap map = parse_viseme_asset(vis, set);
  return {std::move(set), std::move(map)};
}

// ---- alignment --------------------------------------------------------------

namespace {

const char* kind_name(AlignmentErrorKind kind) {
  switch (kind) {
    case AlignmentErrorKind::malformed: return "malformed line";
    case AlignmentErrorKind::out_of_order: return "interval out of order";
    case AlignmentErrorKind::overlap: return "overlapping interval";
    case AlignmentErrorKind::unknown_phoneme: return "unknown phoneme";
  }
  return "alignment error";
}

bool parse_sample(const std::string& tok, long long& out) {
  try {
    std::size_t pos = 0;
    out = std::stoll(tok, &pos);
    return pos == tok.size() && out >= 0;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

AlignmentError::AlignmentError(AlignmentErrorKind kind, int line, const std::string& what)
    : DataError("label line " + std::to_string(line) + ": " + kind_name(kind) + ": " + what),
      kind_(kind),
      line_(line) {}

AlignedLabels parse_alignment(const std::string& text, double sample_rate, const PhonemeSet& phonemes) {
  AlignedLabels labels;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  long long prev_start = -1, prev_end = -1;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      if (body.rfind("sample_rate", 0) == 0) {
        const auto eq = body.find('=');
        try {
          sample_rate = std::stod(trim(body.substr(eq == std::string::npos ? 11 : eq + 1)));
        } catch (const std::exception&) {
          throw AlignmentError(AlignmentErrorKind::malformed, line_no, "bad sample_rate header");
        }
        if (!(sample_rate > 0)) {
          throw AlignmentError(AlignmentErrorKind::malformed, line_no, "sample_rate must be positive");
        }
      }
      continue;
    }
    std::istringstream fields(line);
    std::string a, b, sym, extra;
    long long start = 0, end = 0;
    if (!(fields >> a >> b >> sym) || (fields >> extra) || !parse_sample(a, start) ||
        !parse_sample(b, end)) {
      throw AlignmentError(AlignmentErrorKind::malformed, line_no, "'" + line + "'");
    }
    if (start >= end) {
      throw AlignmentError(AlignmentErrorKind::malformed, line_no, "start must be before end");
    }
    if (start < prev_start) {
      throw AlignmentError(AlignmentErrorKind::out_of_order, line_no,
                           "starts at " + std::to_string(start) + " before the previous interval");
    }
    if (start < prev_end) {
      throw AlignmentError(AlignmentErrorKind::overlap, line_no,
                           "starts at " + std::to_string(start) + " before the previous end " +
                               std::to_string(prev_end));
    }
    if (!phonemes.contains(sym)) {
      throw AlignmentError(AlignmentErrorKind::unknown_phoneme, line_no, "'" + sym + "'");
    }
    labels.intervals.push_back({static_cast<double>(start) / sample_rate,
                                static_cast<double>(end) / sample_rate, sym});
    prev_start = start;
    prev_end = end;
  }
  return labels;
}

std::string serialize_alignment(const AlignedLabels& labels, double sample_rate) {
  std::ostringstream out;
  out << "# sample_rate = " << sample_rate << '\n';
  for (const auto& iv : labels.intervals) {
    out << std::llround(iv.start * sample_rate) << ' ' << std::llround(iv.end * sample_rate) << ' '
        << iv.phoneme << '\n';
  }
  return out.str();
}

void validate_alignment(const AlignedLabels& labels, const PhonemeSet& phonemes) {
  double prev_start = -1.0, prev_end = 0.0;
  int line = 0;
  for (const auto& iv : labels.intervals) {
    ++line;
    if (!(iv.start >= 0.0 && iv.start < iv.end)) {
      throw AlignmentError(AlignmentErrorKind::malformed, line, "invalid interval bounds");
    }
    if (iv.start < prev_start) throw AlignmentError(AlignmentErrorKind::out_of_order, line, iv.phoneme);
    if (iv.start < prev_end) throw AlignmentError(AlignmentErrorKind::overlap, line, iv.phoneme);
    if (!phonemes.contains(iv.phoneme)) {
      throw AlignmentError(AlignmentErrorKind::unknown_phoneme, line, "'" + iv.phoneme + "'");
    }
    prev_start = iv.start;
    prev_end = iv.end;
  }
}

std::vector<MidpointFrame> midpoint_frames(const AlignedLabels& labels, double hop,
                                           const PhonemeSet& phonemes) {
  if (!(hop > 0.0)) throw ParameterError("midpoint_frames: hop must be positive");
  std::vector<MidpointFrame> out;
  out.reserve(labels.intervals.size());
  for (const auto& iv : labels.intervals) {
    const double mid = (iv.start + iv.end) / 2.0;
    const auto frame = static_cast<std::size_t>(std::floor(mid / hop + 1e-9));
    out.push_back({frame, phonemes.index_of(iv.phoneme)});
  }
  return out;
}

std::vector<std::size_t> midpoint_indices(const AlignedLabels& labels, double rate,
                                          std::size_t frame_count, double duration) {
  if (frame_count == 0) throw DataError("midpoint decoding on an empty frame stream");
  if (labels.end_time() > duration + 1e-9) {
    throw DataError("labels end at " + std::to_string(labels.end_time()) + " s beyond the clip (" +
                    std::to_string(duration) + " s)");
  }
  std::vector<std::size_t> out;
  out.reserve(labels.intervals.size());
  for (const auto& iv : labels.intervals) {
    const double mid = (iv.start + iv.end) / 2.0;
    const auto frame = static_cast<std::size_t>(std::floor(mid * rate + 1e-9));
    out.push_back(std::min(frame, frame_count - 1));
  }
  return out;
}

std::vector<std::string> to_visemes(std::span<const std::string> phonemes, const VisemeMap& map) {
  std::vector<std::string> out;
  out.reserve(phonemes.size());
  for (const auto& p : phonemes) out.push_back(map.viseme_of(p));
  return out;
}

namespace {

template <class T>
double accuracy_impl(std::span<const T> preds, std::span<const T> golds) {
  if (preds.size() != golds.size()) {
    throw DimensionError("frame_accuracy: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(golds.size()) + " labels");
  }
  if (preds.empty()) throw ParameterError("frame_accuracy: empty sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace

double frame_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> golds) {
  return accuracy_impl(preds, golds);
}

double frame_accuracy(std::span<const std::string> preds, std::span<const std::string> golds) {
  return accuracy_impl(preds, golds);
}

ClassMap ClassMap::phonemes(std::vector<std::string> symbols) {
  ClassMap m;
  for (auto& s : symbols) {
    if (m.lookup_.emplace(s, m.classes_.size()).second) m.classes_.push_back(s);
  }
  if (m.classes_.size() < 2) throw ParameterError("a class map needs at least two classes");
  return m;
}

ClassMap ClassMap::visemes(const std::vector<std::string>& symbols, const VisemeMap& map) {
  ClassMap m;
  m.viseme_ = true;
  for (const auto& s : symbols) {
    const std::string& v = map.viseme_of(s);
    auto it = std::find(m.classes_.begin(), m.classes_.end(), v);
    std::size_t idx = static_cast<std::size_t>(it - m.classes_.begin());
    if (it == m.classes_.end()) m.classes_.push_back(v);
    m.lookup_[s] = idx;
  }
  if (m.classes_.size() < 2) throw ParameterError("a class map needs at least two classes");
  return m;
}

std::size_t ClassMap::class_of(const std::string& phoneme) const {
  const auto it = lookup_.find(phoneme);
  if (it == lookup_.end()) throw DataError("symbol '" + phoneme + "' has no class in this model");
  return it->second;
}

}  // namespace avsr
