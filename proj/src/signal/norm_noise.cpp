// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <sstream>

#include "avsr/error.hpp"
#include "avsr/signal.hpp"

namespace avsr {

NormStats fit_norm_stats(std::span<const Tensor> training_frames) {
  if (training_frames.empty()) throw ParameterError("fit_norm_stats: empty collection");
  const std::size_t dim = training_frames.front().dim(1);
  Tensor mean({dim});
  std::size_t count = 0;
  for (const Tensor& f : training_frames) {
    if (f.rank() != 2 || f.dim(1) != dim) throw DimensionError("fit_norm_stats: inconsistent feature dim");
    for (std::size_t t = 0; t < f.dim(0); ++t)
      for (std::size_t d = 0; d < dim; ++d) mean[d] += f(t, d);
    count += f.dim(0);
  }
  if (count == 0) throw ParameterError("fit_norm_stats: no frames");
  for (double& m : mean.data()) m /= static_cast<double>(count);

  // Second pass on centred values for numerical stability.
  Tensor var({dim});
  for (const Tensor& f : training_frames)
    for (std::size_t t = 0; t < f.dim(0); ++t)
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = f(t, d) - mean[d];
        var[d] += c * c;
      }
  Tensor std({dim});
  for (std::size_t d = 0; d < dim; ++d) {
    std[d] = std::max(std::sqrt(var[d] / static_cast<double>(count)), NormStats::kStdFloor);
  }
  return NormStats{std::move(mean), std::move(std)};
}

NormStats fit_norm_stats(std::span<const FeatureSequence> training) {
  std::vector<Tensor> frames;
  frames.reserve(training.size());
  for (const auto& s : training) frames.push_back(s.frames);
  return fit_norm_stats(std::span<const Tensor>(frames));
}

Tensor normalize(const Tensor& frames, const NormStats& stats) {
  if (frames.rank() != 2 || frames.dim(1) != stats.mean.size()) {
    throw DimensionError("normalize: frames " + shape_string(frames.shape()) + " vs stats dim " +
                         std::to_string(stats.mean.size()));
  }
  Tensor out = frames;
  for (std::size_t t = 0; t < out.dim(0); ++t)
    for (std::size_t d = 0; d < out.dim(1); ++d) out(t, d) = (out(t, d) - stats.mean[d]) / stats.std[d];
  return out;
}

FeatureSequence normalize(const FeatureSequence& seq, const NormStats& stats) {
  FeatureSequence out = seq;
  out.frames = normalize(seq.frames, stats);
  return out;
}

Tensor denormalize(const Tensor& frames, const NormStats& stats) {
  if (frames.rank() != 2 || frames.dim(1) != stats.mean.size()) {
    throw DimensionError("denormalize: dimension mismatch");
  }
  Tensor out = frames;
  for (std::size_t t = 0; t < out.dim(0); ++t)
    for (std::size_t d = 0; d < out.dim(1); ++d) out(t, d) = out(t, d) * stats.std[d] + stats.mean[d];
  return out;
}

SnrLevel parse_snr(const std::string& text) {
  if (text == "clean") return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParameterError("SNR must be a finite number of dB or 'clean', got '" + text + "'");
  }
}

std::string format_snr(const SnrLevel& snr) {
  if (!snr) return "clean";
  std::ostringstream out;
  out << *snr;
  return out.str();
}

double signal_power(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double p = 0.0;
  for (double s : samples) p += s * s;
  return p / static_cast<double>(samples.size());
}

NoisyClip add_noise_snr_detailed(const AudioClip& clip, const SnrLevel& snr_db, Rng& rng) {
  NoisyClip out{clip, std::vector<double>(clip.samples.size(), 0.0)};
  if (!snr_db) return out;
  if (!std::isfinite(*snr_db)) throw ParameterError("SNR must be finite");
  const double ps = signal_power(clip.samples);
  if (!(ps > 0.0)) throw DegenerateInputError("zero-power signal cannot be noised at a finite SNR");
  const double pn = ps / std::pow(10.0, *snr_db / 10.0);
  const double sigma = std::sqrt(pn);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    out.clip.samples[i] = clip.samples[i] + sigma * rng.normal();
    out.noise[i] = out.clip.samples[i] - clip.samples[i];
  }
  return out;
}

AudioClip add_noise_snr(const AudioClip& clip, const SnrLevel& snr_db, Rng& rng) {
  return add_noise_snr_detailed(clip, snr_db, rng).clip;
}

}  // namespace avsr
