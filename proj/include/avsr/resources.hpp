// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "avsr/models.hpp"

namespace avsr {

// Cost conventions: one MAC per weight application (biases included), two
// FLOP per MAC, nonlinearities, pooling and stream gating free, 4 bytes per
// stored parameter. Audio-path costs are per 10 ms feature frame; visual,
// attention and fusion costs are per image.
inline constexpr double kAudioFramesPerSecond = 100.0;
inline constexpr double kImagesPerSecond = 30.0;
inline constexpr std::uint64_t kBytesPerParam = 4;
inline constexpr double kBytesPerMegabyte = 1e6;

/// One census line; `path` is "audio" or "image".
struct LayerCost {
  std::string name;
  std::string path;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
};

struct ResourceReport {
  std::uint64_t macs_per_audio_frame = 0;
  std::uint64_t macs_per_image = 0;
  std::uint64_t param_count = 0;
  std::vector<LayerCost> layers;

  std::uint64_t flops_per_audio_frame() const { return 2 * macs_per_audio_frame; }
  std::uint64_t flops_per_image() const { return 2 * macs_per_image; }
  std::uint64_t size_bytes() const { return kBytesPerParam * param_count; }
  double size_megabytes() const { return static_cast<double>(size_bytes()) / kBytesPerMegabyte; }
  double flops_per_second() const {
    return 2.0 * (kAudioFramesPerSecond * static_cast<double>(macs_per_audio_frame) +
                  kImagesPerSecond * static_cast<double>(macs_per_image));
  }
};

// Closed-form census: FC out*(in+1); LSTM sublayer 4*H*(in+H+1) per frame,
// doubled for a bidirectional layer; conv outC*outH*outW*(inC*k*k+1) per
// image; pooling 0.
std::uint64_t fc_macs(std::uint64_t in, std::uint64_t out);
std::uint64_t lstm_macs(std::uint64_t in, std::uint64_t hidden);
std::uint64_t conv_macs(std::uint64_t in_channels, std::uint64_t out_channels, std::uint64_t kernel,
                        std::uint64_t out_h, std::uint64_t out_w);

ResourceReport count_resources(const ModelConfig& config);
ResourceReport count_resources(const ModelGraph& graph);

struct InstrumentedOutput {
  GraphOutput output;
  std::uint64_t audio_macs = 0;  // whole utterance
  std::uint64_t image_macs = 0;
  std::size_t audio_frames = 0;
  std::size_t images = 0;
};

/// Plain forward pass with a counter at every multiply-accumulate.
InstrumentedOutput instrumented_forward(const ModelGraph& graph, const Example& ex);

std::string resource_report_json(const ResourceReport& r, const ModelConfig& config);
/// Human-readable table with one row per layer and the totals.
std::string resource_report_table(const ResourceReport& r);

/// A published cost figure: FLOP per input unit and size in MB.
struct PublishedCost {
  std::string network;
  std::string unit;  // "audio frame" or "image"
  double flops_per_unit = 0.0;
  double size_megabytes = 0.0;
};

/// Rows of the reference comparison table for the four recognition networks.
const std::vector<PublishedCost>& published_costs();
/// Assumptions behind every number this module reports.
const std::vector<std::string>& convention_ledger();

/// Side-by-side comparison of our census with a published figure, plus the
/// convention ledger. Agreement is not expected.
std::string discrepancy_report(const ResourceReport& ours, const PublishedCost& published);

// ---------------------------------------------------------------------------
// Accuracy versus cost sweeps.

struct ParetoPoint {
  std::string label;
  ModelConfig config;
  double accuracy = 0.0;  // percent
  double flops = 0.0;     // per second at the nominal rates
  std::uint64_t size_bytes = 0;
  bool ok = true;
  std::string error;
};

/// True when `a` is at least as accurate and at most as costly as `b` and
/// strictly better in one of the two.
bool dominates(const ParetoPoint& a, const ParetoPoint& b);
/// Indices of the non-dominated successful points, in input order.
std::vector<std::size_t> pareto_frontier(const std::vector<ParetoPoint>& points);

struct SweepResult {
  std::vector<ParetoPoint> points;
  std::vector<std::size_t> frontier;
};

/// Returns the accuracy of a trained configuration.
using SweepRunner = std::function<double(const ModelConfig& config, std::size_t index)>;

/// Runs every config, attaches its cost and computes the frontier. A runner
/// failure is recorded on its point and the sweep continues.
SweepResult pareto_sweep(const std::vector<std::pair<std::string, ModelConfig>>& grid, const SweepRunner& runner);

inline constexpr int kSweepCsvVersion = 1;
/// label,layers,hidden,modality,accuracy,flops_per_second,size_bytes,ok,error,frontier
std::string sweep_csv(const SweepResult& r);

}  // namespace avsr
