// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avsr/rng.hpp"
#include "avsr/tensor.hpp"

namespace avsr {

struct AudioClip {
  std::vector<double> samples;  // nominal amplitude range [-1, 1]
  double sample_rate = 16000.0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Front-end parameters. Defaults are HTK-style: 25 ms Hamming window,
/// 10 ms hop, 26 triangular mel filters over [0, sr/2], DCT-II keeping
/// coefficients 1..12, log-energy of the raw (pre-window) frame, deltas over
/// a +/-2 frame regression window with edge replication. No pre-emphasis.
struct MfccConfig {
  double window_seconds = 0.025;
  double hop_seconds = 0.010;
  int mel_filters = 26;
  int cepstra = 12;
  int delta_window = 2;
  double log_floor = 1e-10;

  static constexpr int kFeatureDim = 39;

  std::size_t window_samples(double sample_rate) const;
  std::size_t hop_samples(double sample_rate) const;
  /// floor((N - window) / hop) + 1, or 0 when the clip is shorter than a window.
  std::size_t frame_count(std::size_t n_samples, double sample_rate) const;
  /// Stable text form, part of feature-cache keys.
  std::string fingerprint() const;
};

struct FeatureSequence {
  Tensor frames;                    // L x 39: [logE, c1..c12, deltas, delta-deltas]
  double hop = 0.010;               // seconds
  std::vector<double> frame_times;  // window centre of each frame, seconds

  std::size_t length() const { return frames.rank() == 2 ? frames.dim(0) : 0; }
};

/// Mel scale used for the filterbank: 2595 log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filter weights, shape [filters x (fft_size/2 + 1)].
Tensor mel_filterbank(int filters, std::size_t fft_size, double sample_rate);

/// Log mel-filterbank energies per frame (before the DCT), L x filters.
Tensor log_mel_energies(const AudioClip& clip, const MfccConfig& cfg = {});

FeatureSequence mfcc_extract(const AudioClip& clip, const MfccConfig& cfg = {});

/// Regression deltas along the time axis with edge replication.
Tensor deltas(const Tensor& frames, int window);

struct NormStats {
  Tensor mean;  // [dim]
  Tensor std;   // [dim], floored at kStdFloor

  static constexpr double kStdFloor = 1e-8;
};

NormStats fit_norm_stats(std::span<const FeatureSequence> training);
NormStats fit_norm_stats(std::span<const Tensor> training_frames);
FeatureSequence normalize(const FeatureSequence& seq, const NormStats& stats);
Tensor normalize(const Tensor& frames, const NormStats& stats);
Tensor denormalize(const Tensor& frames, const NormStats& stats);

/// Requested SNR in dB; std::nullopt means "clean" (no noise).
using SnrLevel = std::optional<double>;

SnrLevel parse_snr(const std::string& text);
std::string format_snr(const SnrLevel& snr);

double signal_power(std::span<const double> samples);

struct NoisyClip {
  AudioClip clip;
  std::vector<double> noise;  // exactly clip.samples - input.samples, elementwise
};

/// Adds white Gaussian noise with power P_s / 10^(snr/10), P_s the mean
/// squared sample of the whole clip. Clean leaves the clip unchanged.
NoisyClip add_noise_snr_detailed(const AudioClip& clip, const SnrLevel& snr_db, Rng& rng);
AudioClip add_noise_snr(const AudioClip& clip, const SnrLevel& snr_db, Rng& rng);

// 16-bit PCM mono WAV.
AudioClip read_wav(const std::filesystem::path& path);
AudioClip parse_wav(std::span<const std::uint8_t> bytes, const std::string& name);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

// Feature cache: "AVFC" | u32 version | u32 L | u32 dim | f64 hop | L*dim f32, little-endian.
inline constexpr std::uint32_t kFeatureCacheVersion = 1;
void write_feature_cache(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_feature_cache(const std::filesystem::path& path);

/// Rounds every element to the nearest float32, matching cache precision.
void round_to_float(Tensor& t);

}  // namespace avsr
