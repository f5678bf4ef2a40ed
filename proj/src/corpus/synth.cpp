// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "avsr/binary_io.hpp"
#include "avsr/corpus.hpp"
#include "avsr/error.hpp"

namespace fs = std::filesystem;

namespace avsr {

namespace {

// Phoneme pairs that share a viseme come first so that small class counts
// still exercise viseme ambiguity.
const std::vector<std::string> kSymbolOrder = {"p",  "b",  "s",  "z",  "f",  "v",  "iy", "ih", "uw", "ow", "t",  "d",
                                               "k",  "g",  "sh", "ch", "aa", "ah", "ae", "eh", "l",  "r",  "th", "dh"};

const std::set<std::string> kSpecKeys = {
    "class_count",   "seed",          "train_count",          "val_count",            "test_count",
    "min_intervals", "max_intervals", "min_interval_seconds", "max_interval_seconds", "separability",
    "sample_rate",   "video_fps",     "image_size",           "image_noise",          "background_snr",
    "spectral_floor", "formant_bandwidth",
    "viseme_sharing"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Evenly spaced slots in [lo, hi), randomly assigned to classes.
std::vector<double> spread(std::size_t k, double lo, double hi, Rng& rng) {
  std::vector<std::size_t> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = i;
  for (std::size_t i = k; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = lo + (static_cast<double>(perm[i]) + 0.5) * (hi - lo) / k;
  return out;
}

struct AudioTemplate {
  double formant[3];
  double amp[3];
  double jitter[3];  // Hz std of per-interval formant jitter
};

struct ImageTemplate {
  double width;
  double height;
};

struct Templates {
  std::vector<AudioTemplate> audio;
  std::vector<std::size_t> pattern_of;  // class -> image pattern
  std::vector<ImageTemplate> images;
};

Templates make_templates(const SynthSpec& s) {
  Rng rng = Rng(s.seed).split(1);
  const std::size_t k = s.class_count;
  static constexpr double kBands[3][2] = {{300.0, 900.0}, {900.0, 2400.0}, {2400.0, 3800.0}};
  Templates t;
  t.audio.resize(k);
  for (int f = 0; f < 3; ++f) {
    const auto slots = spread(k, kBands[f][0], kBands[f][1], rng);
    const double spacing = (kBands[f][1] - kBands[f][0]) / static_cast<double>(k);
    for (std::size_t c = 0; c < k; ++c) {
      t.audio[c].formant[f] = slots[c];
      t.audio[c].amp[f] = rng.uniform(0.5, 1.0);
      t.audio[c].jitter[f] = spacing / s.separability;
    }
  }

  const auto symbols = s.class_symbols();
  std::vector<std::string> groups;
  for (const auto& sym : symbols) {
    const std::string key = s.viseme_sharing ? VisemeMap::standard().viseme_of(sym) : sym;
    auto it = std::find(groups.begin(), groups.end(), key);
    if (it == groups.end()) {
      groups.push_back(key);
      it = groups.end() - 1;
    }
    t.pattern_of.push_back(static_cast<std::size_t>(it - groups.begin()));
  }
  const double size = static_cast<double>(s.image_size);
  const auto widths = spread(groups.size(), 0.2 * size, 0.7 * size, rng);
  const auto heights = spread(groups.size(), 0.06 * size, 0.4 * size, rng);
  for (std::size_t g = 0; g < groups.size(); ++g) t.images.push_back({widths[g], heights[g]});
  return t;
}

struct Interval {
  std::size_t cls;
  std::size_t start;  // samples
  std::size_t end;
};

void render_interval(const SynthSpec& s, const AudioTemplate& tpl, const Interval& iv, Rng& rng,
                     std::vector<double>& out) {
  double formant[3], bw[3];
  for (int f = 0; f < 3; ++f) {
    formant[f] = tpl.formant[f] + tpl.jitter[f] * rng.normal();
    bw[f] = (80.0 + 0.08 * formant[f]) * s.formant_bandwidth;
  }
  const double f0 = rng.uniform(100.0, 150.0);
  const double gain = std::pow(10.0, rng.uniform(-3.0, 3.0) / 20.0);
  const double top = std::min(5000.0, 0.45 * s.sample_rate);
  std::vector<double> amps, phases, omegas;
  for (double h = f0; h < top; h += f0) {
    double a = s.spectral_floor;
    for (int f = 0; f < 3; ++f) a += tpl.amp[f] * std::exp(-0.5 * std::pow((h - formant[f]) / bw[f], 2.0));
    amps.push_back(gain * a);
    phases.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    omegas.push_back(2.0 * std::numbers::pi * h / s.sample_rate);
  }
  const std::size_t n = iv.end - iv.start;
  const std::size_t ramp = std::min<std::size_t>(n / 4, static_cast<std::size_t>(0.005 * s.sample_rate));
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::size_t h = 0; h < amps.size(); ++h) v += amps[h] * std::sin(omegas[h] * static_cast<double>(i) + phases[h]);
    double env = 1.0;
    if (ramp > 0 && i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
    if (ramp > 0 && n - 1 - i < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / ramp));
    out[iv.start + i] = env * v;
  }
}

void render_frame(const SynthSpec& s, const ImageTemplate& tpl, Rng& rng, std::uint8_t* px) {
  const double size = static_cast<double>(s.image_size);
  const double cx = size / 2.0 + rng.uniform(-3.0, 3.0), cy = size / 2.0 + rng.uniform(-3.0, 3.0);
  const double scale = 1.0 + 0.05 * rng.normal() / s.separability;
  const double a = tpl.width / 2.0 * scale, b = tpl.height / 2.0 * scale, lip = 0.05 * size;
  for (std::size_t y = 0; y < s.image_size; ++y)
    for (std::size_t x = 0; x < s.image_size; ++x) {
      const double dx = (static_cast<double>(x) + 0.5 - cx) / a, dy = (static_cast<double>(y) + 0.5 - cy) / b;
      const double r = std::sqrt(dx * dx + dy * dy);
      double v = 0.55;  // skin
      if (r < 1.0) {
        v = 0.1;  // open mouth
      } else if ((r - 1.0) * std::min(a, b) < lip) {
        v = 0.85;  // lips
      }
      v += s.image_noise * rng.normal();
      px[y * s.image_size + x] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
}

}  // namespace

void SynthSpec::validate() const {
  if (class_count < 2) throw ParameterError("synthetic corpus needs K >= 2 classes");
  if (class_count > PhonemeSet::kSize) throw ParameterError("synthetic corpus supports at most 39 classes");
  if (!(separability > 0.0)) throw ParameterError("separability must be positive");
  if (train_count == 0) throw ParameterError("train_count must be positive");
  if (min_intervals < 1 || max_intervals < min_intervals) throw ParameterError("bad interval count range");
  if (!(min_interval_seconds > 0.0) || max_interval_seconds < min_interval_seconds) {
    throw ParameterError("bad interval duration range");
  }
  if (!(sample_rate >= 8000.0)) throw ParameterError("sample_rate must be at least 8000");
  if (!(video_fps > 0.0)) throw ParameterError("video_fps must be positive");
  if (image_size < 8) throw ParameterError("image_size must be at least 8");
  if (!(image_noise >= 0.0)) throw ParameterError("image_noise must be non-negative");
  if (!std::isfinite(background_snr)) throw ParameterError("background_snr must be finite");
  if (!(spectral_floor >= 0.0)) throw ParameterError("spectral_floor must be non-negative");
  if (!(formant_bandwidth > 0.0)) throw ParameterError("formant_bandwidth must be positive");
}

SynthSpec SynthSpec::from_kv(const KvConfig& kv) {
  for (const auto& [key, e] : kv.entries()) {
    if (!kSpecKeys.count(key)) throw ConfigParseError(e.file, e.line, "unknown synthetic-corpus key '" + key + "'");
  }
  SynthSpec s;
  auto count = [&](const char* key, std::size_t d) {
    const long long v = kv.get_int(key, static_cast<long long>(d));
    if (v < 0) {
      const auto& e = kv.entries().at(key);
      throw ConfigParseError(e.file, e.line, std::string(key) + " must be non-negative");
    }
    return static_cast<std::size_t>(v);
  };
  s.class_count = count("class_count", s.class_count);
  s.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(s.seed)));
  s.train_count = count("train_count", s.train_count);
  s.val_count = count("val_count", s.val_count);
  s.test_count = count("test_count", s.test_count);
  s.min_intervals = count("min_intervals", s.min_intervals);
  s.max_intervals = count("max_intervals", s.max_intervals);
  s.min_interval_seconds = kv.get_double("min_interval_seconds", s.min_interval_seconds);
  s.max_interval_seconds = kv.get_double("max_interval_seconds", s.max_interval_seconds);
  s.separability = kv.get_double("separability", s.separability);
  s.sample_rate = kv.get_double("sample_rate", s.sample_rate);
  s.video_fps = kv.get_double("video_fps", s.video_fps);
  s.image_size = count("image_size", s.image_size);
  s.image_noise = kv.get_double("image_noise", s.image_noise);
  s.background_snr = kv.get_double("background_snr", s.background_snr);
  s.spectral_floor = kv.get_double("spectral_floor", s.spectral_floor);
  s.formant_bandwidth = kv.get_double("formant_bandwidth", s.formant_bandwidth);
  s.viseme_sharing = kv.get_bool("viseme_sharing", s.viseme_sharing);
  s.validate();
  return s;
}

SynthSpec SynthSpec::load(const fs::path& path) { return from_kv(KvConfig::load(path)); }

std::string SynthSpec::to_text() const {
  KvConfig kv;
  kv.set("class_count", std::to_string(class_count));
  kv.set("seed", std::to_string(seed));
  kv.set("train_count", std::to_string(train_count));
  kv.set("val_count", std::to_string(val_count));
  kv.set("test_count", std::to_string(test_count));
  kv.set("min_intervals", std::to_string(min_intervals));
  kv.set("max_intervals", std::to_string(max_intervals));
  kv.set("min_interval_seconds", num(min_interval_seconds));
  kv.set("max_interval_seconds", num(max_interval_seconds));
  kv.set("separability", num(separability));
  kv.set("sample_rate", num(sample_rate));
  kv.set("video_fps", num(video_fps));
  kv.set("image_size", std::to_string(image_size));
  kv.set("image_noise", num(image_noise));
  kv.set("background_snr", num(background_snr));
  kv.set("spectral_floor", num(spectral_floor));
  kv.set("formant_bandwidth", num(formant_bandwidth));
  kv.set("viseme_sharing", viseme_sharing ? "true" : "false");
  return kv.to_text();
}

std::vector<std::string> SynthSpec::class_symbols() const {
  std::vector<std::string> order = kSymbolOrder;
  for (const auto& p : PhonemeSet::standard().symbols())
    if (std::find(order.begin(), order.end(), p) == order.end()) order.push_back(p);
  order.resize(class_count);
  return order;
}

CorpusManifest generate_synthetic(const SynthSpec& spec, const fs::path& out) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw DataError("cannot create corpus directory " + out.string());

  const Templates tpl = make_templates(spec);
  const auto symbols = spec.class_symbols();
  const std::size_t counts[3] = {spec.train_count, spec.val_count, spec.test_count};
  const std::size_t frame_px = spec.image_size * spec.image_size;

  for (std::size_t si = 0; si < kSplits.size(); ++si) {
    const std::string& split = kSplits[si];
    fs::create_directories(out / split);
    for (std::size_t u = 0; u < counts[si]; ++u) {
      Rng rng = Rng(spec.seed).split(1000000 * (si + 1) + u);
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04zu", split.c_str(), u);

      const std::size_t n_iv = spec.min_intervals + rng.below(spec.max_intervals - spec.min_intervals + 1);
      std::vector<Interval> ivs;
      std::size_t pos = 0;
      for (std::size_t i = 0; i < n_iv; ++i) {
        const double dur = rng.uniform(spec.min_interval_seconds, spec.max_interval_seconds);
        const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(dur * spec.sample_rate)));
        ivs.push_back({rng.below(spec.class_count), pos, pos + len});
        pos += len;
      }

      AudioClip clip;
      clip.sample_rate = spec.sample_rate;
      clip.samples.assign(pos, 0.0);
      for (const auto& iv : ivs) render_interval(spec, tpl.audio[iv.cls], iv, rng, clip.samples);
      double peak = 0.0;
      for (double v : clip.samples) peak = std::max(peak, std::abs(v));
      if (peak > 0.0)
        for (double& v : clip.samples) v *= 0.5 / peak;
      clip = add_noise_snr(clip, spec.background_snr, rng);
      for (double& v : clip.samples) v = std::clamp(v, -1.0, 1.0);
      write_wav(out / split / (std::string(id) + ".wav"), clip);

      AlignedLabels labels;
      for (const auto& iv : ivs) {
        labels.intervals.push_back({static_cast<double>(iv.start) / spec.sample_rate,
                                    static_cast<double>(iv.end) / spec.sample_rate, symbols[iv.cls]});
      }
      write_text_file(out / split / (std::string(id) + ".phn"), serialize_alignment(labels, spec.sample_rate));

      const double duration = static_cast<double>(pos) / spec.sample_rate;
      ImageSequence video;
      video.width = video.height = spec.image_size;
      video.fps = spec.video_fps;
      const auto frames = static_cast<std::size_t>(std::ceil(duration * spec.video_fps - 1e-9));
      video.pixels.resize(frames * frame_px);
      std::size_t cur = 0;
      for (std::size_t f = 0; f < frames; ++f) {
        const double t = (static_cast<double>(f) + 0.5) / spec.video_fps * spec.sample_rate;
        while (cur + 1 < ivs.size() && t >= static_cast<double>(ivs[cur].end)) ++cur;
        render_frame(spec, tpl.images[tpl.pattern_of[ivs[cur].cls]], rng, video.pixels.data() + f * frame_px);
      }
      write_avic(out / split / (std::string(id) + ".avic"), video);
    }
  }
  write_text_file(out / "synth.cfg", spec.to_text());

  CorpusManifest m = scan_corpus(out);
  std::vector<std::string> classes;
  for (const auto& p : PhonemeSet::standard().symbols())
    if (std::find(symbols.begin(), symbols.end(), p) != symbols.end()) classes.push_back(p);
  m.classes = classes;
  if (!m.errors.empty()) throw DataError("generated corpus failed its own scan: " + m.errors.front());
  m.save();
  return m;
}

}  // namespace avsr
