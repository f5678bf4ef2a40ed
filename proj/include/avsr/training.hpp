// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "avsr/kv_config.hpp"
#include "avsr/models.hpp"
#include "avsr/signal.hpp"

namespace avsr {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

AdamState adam_init(const ParamList& params);
/// One bias-corrected Adam update. Throws NumericError on a non-finite gradient.
void adam_step(const ParamList& params, const ParamList& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

struct TrainConfig {
  double lr0 = 0.01;
  double decay_factor = 0.5;
  std::size_t patience = 5;
  std::size_t max_epochs = 30;
  std::size_t batch_size = 1;  // utterances per update
  std::uint64_t seed = 1;

  void validate() const;
  /// Reads lr0, decay_factor, patience, max_epochs, batch_size, seed.
  static TrainConfig from_kv(const KvConfig& kv, const TrainConfig& defaults);
  static TrainConfig from_kv(const KvConfig& kv);
  std::string to_text(const std::string& prefix = "") const;
};

/// Learning-rate decay and early stopping as a pure state machine: the rate
/// is multiplied by decay_factor after every epoch without a new best
/// validation loss, and training stops after `patience` such epochs in a row.
class EpochSchedule {
 public:
  explicit EpochSchedule(const TrainConfig& cfg);

  /// Rate for the next epoch.
  double lr() const { return lr_; }
  /// Records one epoch's validation loss; returns true for a new best.
  bool record(double val_loss);
  bool should_stop() const { return stale_ >= patience_; }

  std::size_t epochs() const { return epochs_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }
  std::size_t decay_events() const { return decays_; }
  std::size_t stale_epochs() const { return stale_; }

 private:
  double lr_;
  double decay_;
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  std::size_t decays_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

/// Lazily produced examples; `epoch` lets sources vary corruption per epoch.
struct ExampleSource {
  std::size_t count = 0;
  std::function<Example(std::size_t index, std::size_t epoch)> make;
};

struct EvalResult {
  double loss = 0.0;      // mean over utterances
  double accuracy = 0.0;  // percent of interval midpoints
  double mean_wa = 0.0;   // stream weights, zero unless the model has attention
  double mean_wv = 0.0;
  std::size_t intervals = 0;
};

EvalResult evaluate(const ModelGraph& model, const ExampleSource& data, std::size_t epoch = 0,
                    const ForcedWeights& forced = {});

/// CSV metrics: `stage,epoch,split,loss,accuracy,lr`.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(std::filesystem::path path);

  void add(const std::string& stage, std::size_t epoch, const std::string& split, double loss, double accuracy,
           double lr);
  const std::string& text() const { return text_; }
  void flush() const;

  static constexpr const char* kHeader = "stage,epoch,split,loss,accuracy,lr";

 private:
  std::filesystem::path path_;
  std::string text_ = std::string(kHeader) + "\n";
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
  bool diverged = false;
};

struct TrainReport {
  std::string stage;
  double initial_val_loss = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

/// Trains `model` in place and leaves it at the best-validation parameters.
/// A non-finite loss or gradient aborts the epoch and restores the best
/// parameters seen so far.
TrainReport run_epochs(ModelGraph& model, const ExampleSource& train, const ExampleSource& val,
                       const TrainConfig& cfg, MetricsLog* log = nullptr, const std::string& stage = "train");

/// JSON text describing a sequence of stages, stored in checkpoints.
std::string lineage_json(const std::vector<TrainReport>& stages, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Staged audio-visual training: acoustic net, visual net, then the fused net
// built from the two checkpoints written to `work_dir`.

struct StagedConfig {
  ModelConfig fused;  // carries the acoustic and visual sub-configs
  TrainConfig acoustic;
  TrainConfig visual;
  TrainConfig fusion;
  std::filesystem::path work_dir;
};

struct StagedData {
  ExampleSource train;
  ExampleSource val;
};

struct StagedResult {
  ModelGraph model;
  std::vector<TrainReport> stages;
  double random_init_val_loss = 0.0;  // fresh fused model on the same val data
};

std::filesystem::path acoustic_checkpoint_path(const std::filesystem::path& work_dir);
std::filesystem::path visual_checkpoint_path(const std::filesystem::path& work_dir);

TrainReport train_single_stage(ModelGraph& model, const StagedData& data, const TrainConfig& cfg,
                               const std::string& stage, const std::filesystem::path& checkpoint, MetricsLog* log);
/// Stage 3 alone; requires both sub-checkpoints in `work_dir`.
StagedResult train_fusion_stage(const StagedConfig& cfg, const StagedData& data, MetricsLog* log);
StagedResult train_staged_audiovisual(const StagedConfig& cfg, const StagedData& data, MetricsLog* log);

// ---------------------------------------------------------------------------
// Noise-schedule retraining.

struct NoiseLevel {
  SnrLevel snr;
  std::size_t epochs = 5;
};

/// Levels are visited in order. With `replay`, each training utterance at
/// level j draws its SNR uniformly from levels 0..j so that earlier
/// conditions stay represented; validation at level j pools levels 0..j.
struct NoiseSchedule {
  std::vector<NoiseLevel> levels;
  bool replay = true;

  /// "clean:8,20:4,10:4,0:6" (SNR:epochs); epochs default to 5.
  static NoiseSchedule parse(const std::string& text);
  std::string to_text() const;
  void validate() const;
};

/// Builds the example for utterance `index` with audio corrupted at `snr`,
/// drawing noise from `rng`.
using NoisyExampleFn = std::function<Example(std::size_t index, const SnrLevel& snr, Rng& rng)>;

struct NoisyData {
  std::size_t train_count = 0;
  std::size_t val_count = 0;
  NoisyExampleFn train;
  NoisyExampleFn val;
};

/// Fixed-noise source: utterance i at `snr` with noise seeded by (seed, i).
ExampleSource fixed_noise_source(std::size_t count, const NoisyExampleFn& fn, const SnrLevel& snr,
                                 std::uint64_t seed);

std::vector<TrainReport> train_noise_schedule(ModelGraph& model, const NoisyData& data,
                                              const NoiseSchedule& schedule, const TrainConfig& cfg,
                                              MetricsLog* log = nullptr);

}  // namespace avsr
