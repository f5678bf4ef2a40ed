// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "avsr/error.hpp"
#include "avsr/signal.hpp"

namespace avsr {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// FFTW planning is not thread-safe; execution of an existing plan on
// fftw_malloc'd buffers is. Plans are created once per size and reused.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    auto& cache = plans();
    auto it = cache.find(n);
    if (it == cache.end()) {
      it = cache.emplace(n, fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE)).first;
    }
    plan_ = it->second;
  }
  ~RealFft() {
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  /// Power spectrum |X_k|^2 for k in [0, n/2].
  void power(std::span<double> out) {
    fftw_execute_dft_r2c(plan_, in_, out_);
    for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }
  static std::map<std::size_t, fftw_plan>& plans() {
    static std::map<std::size_t, fftw_plan> p;
    return p;
  }

  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

struct FrameGeometry {
  std::size_t window;
  std::size_t hop;
  std::size_t count;
  std::size_t fft;
};

FrameGeometry geometry(const AudioClip& clip, const MfccConfig& cfg) {
  if (!(clip.sample_rate > 0)) throw ParameterError("sample rate must be positive");
  FrameGeometry g;
  g.window = cfg.window_samples(clip.sample_rate);
  g.hop = cfg.hop_samples(clip.sample_rate);
  if (g.window == 0 || g.hop == 0) throw ParameterError("window and hop must be at least one sample");
  g.count = cfg.frame_count(clip.samples.size(), clip.sample_rate);
  if (g.count == 0) {
    throw InputTooShortError(std::to_string(clip.samples.size()) + " samples, need at least " +
                             std::to_string(g.window));
  }
  g.fft = next_pow2(g.window);
  return g;
}

std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  }
  return w;
}

}  // namespace

std::size_t MfccConfig::window_samples(double sample_rate) const {
  return static_cast<std::size_t>(std::lround(window_seconds * sample_rate));
}

std::size_t MfccConfig::hop_samples(double sample_rate) const {
  return static_cast<std::size_t>(std::lround(hop_seconds * sample_rate));
}

std::size_t MfccConfig::frame_count(std::size_t n_samples, double sample_rate) const {
  const std::size_t w = window_samples(sample_rate);
  const std::size_t h = hop_samples(sample_rate);
  if (n_samples < w || h == 0) return 0;
  return (n_samples - w) / h + 1;
}

std::string MfccConfig::fingerprint() const {
  std::ostringstream out;
  out.precision(17);
  out << "mfcc:w=" << window_seconds << ",h=" << hop_seconds << ",m=" << mel_filters
      << ",c=" << cepstra << ",d=" << delta_window << ",floor=" << log_floor;
  return out.str();
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor mel_filterbank(int filters, std::size_t fft_size, double sample_rate) {
  if (filters < 1) throw ParameterError("need at least one mel filter");
  const std::size_t bins = fft_size / 2 + 1;
  Tensor fb({static_cast<std::size_t>(filters), bins});
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(filters) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(filters + 1));
  }
  for (std::size_t m = 0; m < static_cast<std::size_t>(filters); ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      fb(m, k) = w;
    }
  }
  return fb;
}

namespace {

// Per-frame log mel energies and log raw-frame energies.
void analyse(const AudioClip& clip, const MfccConfig& cfg, const FrameGeometry& g,
             Tensor& log_mel, std::vector<double>& log_energy) {
  const Tensor fb = mel_filterbank(cfg.mel_filters, g.fft, clip.sample_rate);
  const std::vector<double> win = hamming(g.window);
  RealFft fft(g.fft);
  std::vector<double> power(g.fft / 2 + 1);
  const std::size_t m_count = static_cast<std::size_t>(cfg.mel_filters);
  log_mel = Tensor({g.count, m_count});
  log_energy.assign(g.count, 0.0);

  for (std::size_t t = 0; t < g.count; ++t) {
    const double* frame = clip.samples.data() + t * g.hop;
    double energy = 0.0;
    for (std::size_t i = 0; i < g.window; ++i) energy += frame[i] * frame[i];
    log_energy[t] = std::log(std::max(energy, cfg.log_floor));

    double* in = fft.input();
    for (std::size_t i = 0; i < g.window; ++i) in[i] = frame[i] * win[i];
    std::fill(in + g.window, in + g.fft, 0.0);
    fft.power(power);

    for (std::size_t m = 0; m < m_count; ++m) {
      double e = 0.0;
      const auto w = fb.row(m);
      for (std::size_t k = 0; k < power.size(); ++k) e += w[k] * power[k];
      log_mel(t, m) = std::log(std::max(e, cfg.log_floor));
    }
  }
}

}  // namespace

Tensor log_mel_energies(const AudioClip& clip, const MfccConfig& cfg) {
  const FrameGeometry g = geometry(clip, cfg);
  Tensor log_mel;
  std::vector<double> log_energy;
  analyse(clip, cfg, g, log_mel, log_energy);
  return log_mel;
}

Tensor deltas(const Tensor& frames, int window) {
  if (frames.rank() != 2) throw DimensionError("deltas expects L x D frames");
  if (window < 1) throw ParameterError("delta window must be >= 1");
  const std::size_t len = frames.dim(0), dim = frames.dim(1);
  double denom = 0.0;
  for (int k = 1; k <= window; ++k) denom += 2.0 * k * k;
  Tensor out({len, dim});
  const auto clamp_index = [len](long i) {
    return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(len) - 1));
  };
  for (std::size_t t = 0; t < len; ++t) {
    for (int k = 1; k <= window; ++k) {
      const auto ahead = frames.row(clamp_index(static_cast<long>(t) + k));
      const auto behind = frames.row(clamp_index(static_cast<long>(t) - k));
      for (std::size_t d = 0; d < dim; ++d) out(t, d) += k * (ahead[d] - behind[d]);
    }
    for (std::size_t d = 0; d < dim; ++d) out(t, d) /= denom;
  }
  return out;
}

FeatureSequence mfcc_extract(const AudioClip& clip, const MfccConfig& cfg) {
  if (cfg.cepstra + 1 != MfccConfig::kFeatureDim / 3) {
    throw ParameterError("feature layout requires 12 cepstra + energy");
  }
  const FrameGeometry g = geometry(clip, cfg);
  Tensor log_mel;
  std::vector<double> log_energy;
  analyse(clip, cfg, g, log_mel, log_energy);

  const std::size_t m_count = static_cast<std::size_t>(cfg.mel_filters);
  const std::size_t n_static = static_cast<std::size_t>(cfg.cepstra) + 1;
  const double scale = std::sqrt(2.0 / static_cast<double>(m_count));
  Tensor statics({g.count, n_static});
  for (std::size_t t = 0; t < g.count; ++t) {
    statics(t, 0) = log_energy[t];
    for (std::size_t n = 1; n < n_static; ++n) {
      double c = 0.0;
      for (std::size_t m = 0; m < m_count; ++m) {
        c += log_mel(t, m) * std::cos(std::numbers::pi * static_cast<double>(n) *
                                      (static_cast<double>(m) + 0.5) / static_cast<double>(m_count));
      }
      statics(t, n) = scale * c;
    }
  }
  const Tensor d1 = deltas(statics, cfg.delta_window);
  const Tensor d2 = deltas(d1, cfg.delta_window);

  FeatureSequence seq;
  seq.hop = static_cast<double>(g.hop) / clip.sample_rate;
  seq.frames = Tensor({g.count, static_cast<std::size_t>(MfccConfig::kFeatureDim)});
  seq.frame_times.resize(g.count);
  for (std::size_t t = 0; t < g.count; ++t) {
    for (std::size_t n = 0; n < n_static; ++n) {
      seq.frames(t, n) = statics(t, n);
      seq.frames(t, n_static + n) = d1(t, n);
      seq.frames(t, 2 * n_static + n) = d2(t, n);
    }
    seq.frame_times[t] =
        (static_cast<double>(t * g.hop) + static_cast<double>(g.window) / 2.0) / clip.sample_rate;
  }
  seq.frames.require_finite("mfcc features");
  return seq;
}

}  // namespace avsr
