// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <numeric>

#include "avsr/binary_io.hpp"
#include "avsr/error.hpp"
#include "avsr/training.hpp"
#include "json.hpp"

namespace avsr {

AdamState adam_init(const ParamList& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back(zeros_like(*p.tensor));
    s.v.push_back(zeros_like(*p.tensor));
  }
  return s;
}

void adam_step(const ParamList& params, const ParamList& grads, AdamState& state, double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i].tensor, *grads[i].tensor, "adam_step");
    grads[i].tensor->require_finite("gradient of " + params[i].name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].tensor->data();
    const auto g = grads[i].tensor->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ParameterError("lr0 must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ParameterError("decay_factor must lie in (0, 1]");
  if (patience < 1) throw ParameterError("patience must be >= 1");
  if (max_epochs < 1) throw ParameterError("max_epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv, const TrainConfig& d) {
  TrainConfig c;
  auto count = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ParameterError(std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.lr0 = kv.get_double("lr0", d.lr0);
  c.decay_factor = kv.get_double("decay_factor", d.decay_factor);
  c.patience = count("patience", d.patience);
  c.max_epochs = count("max_epochs", d.max_epochs);
  c.batch_size = count("batch_size", d.batch_size);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(d.seed)));
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) { return from_kv(kv, TrainConfig{}); }

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string TrainConfig::to_text(const std::string& p) const {
  return p + "batch_size = " + std::to_string(batch_size) + "\n" + p + "decay_factor = " + fmt(decay_factor) +
         "\n" + p + "lr0 = " + fmt(lr0) + "\n" + p + "max_epochs = " + std::to_string(max_epochs) + "\n" + p +
         "patience = " + std::to_string(patience) + "\n" + p + "seed = " + std::to_string(seed) + "\n";
}

EpochSchedule::EpochSchedule(const TrainConfig& cfg)
    : lr_(cfg.lr0), decay_(cfg.decay_factor), patience_(cfg.patience) {
  cfg.validate();
}

bool EpochSchedule::record(double val_loss) {
  ++epochs_;
  if (std::isfinite(val_loss) && val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epochs_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  lr_ *= decay_;
  ++decays_;
  return false;
}

EvalResult evaluate(const ModelGraph& model, const ExampleSource& data, std::size_t epoch,
                    const ForcedWeights& forced) {
  if (data.count == 0) throw ParameterError("evaluate: empty split");
  EvalResult r;
  std::size_t correct = 0, rows = 0;
  for (std::size_t i = 0; i < data.count; ++i) {
    const LossResult l = evaluate_loss(model, data.make(i, epoch), forced);
    r.loss += l.loss;
    correct += l.correct;
    r.intervals += l.count;
    if (!l.weights.empty()) {
      for (std::size_t k = 0; k < l.weights.dim(0); ++k) {
        r.mean_wa += l.weights(k, 0);
        r.mean_wv += l.weights(k, 1);
      }
      rows += l.weights.dim(0);
    }
  }
  r.loss /= static_cast<double>(data.count);
  r.accuracy = r.intervals ? 100.0 * static_cast<double>(correct) / static_cast<double>(r.intervals) : 0.0;
  if (rows) {
    r.mean_wa /= static_cast<double>(rows);
    r.mean_wv /= static_cast<double>(rows);
  }
  return r;
}

MetricsLog::MetricsLog(std::filesystem::path path) : path_(std::move(path)) {}

void MetricsLog::add(const std::string& stage, std::size_t epoch, const std::string& split, double loss,
                     double accuracy, double lr) {
  text_ += stage + "," + std::to_string(epoch) + "," + split + "," + fmt(loss) + "," + fmt(accuracy) + "," +
           fmt(lr) + "\n";
  flush();
}

void MetricsLog::flush() const {
  if (!path_.empty()) write_text_file(path_, text_);
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, Rng rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

void scale_grads(ParamList& grads, double s) {
  for (auto& g : grads)
    for (double& v : g.tensor->data()) v *= s;
}

}  // namespace

TrainReport run_epochs(ModelGraph& model, const ExampleSource& train, const ExampleSource& val,
                       const TrainConfig& cfg, MetricsLog* log, const std::string& stage) {
  cfg.validate();
  if (train.count == 0 || val.count == 0) throw ParameterError("run_epochs: empty train or validation split");
  TrainReport rep;
  rep.stage = stage;
  const EvalResult initial = evaluate(model, val);
  rep.initial_val_loss = initial.loss;
  if (log) log->add(stage, 0, "val", initial.loss, initial.accuracy, cfg.lr0);

  ModelGraph best = model;
  EpochSchedule schedule(cfg);
  AdamState adam = adam_init(model.params());
  const Rng shuffle_root(cfg.seed);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = schedule.lr();
    double loss_sum = 0.0;
    std::size_t correct = 0, count = 0, seen = 0;
    ModelGraph grad = zeroed_copy(model);
    ParamList params = model.params(), grads = grad.params();
    std::size_t in_batch = 0;
    const auto order = permutation(train.count, shuffle_root.split(epoch));
    try {
      for (std::size_t k = 0; k < order.size(); ++k) {
        const LossResult r = loss_and_gradients(model, train.make(order[k], epoch), grad);
        if (!std::isfinite(r.loss)) throw NumericError("training loss is not finite");
        loss_sum += r.loss;
        correct += r.correct;
        count += r.count;
        ++seen;
        if (++in_batch == cfg.batch_size || k + 1 == order.size()) {
          if (in_batch > 1) scale_grads(grads, 1.0 / static_cast<double>(in_batch));
          adam_step(params, grads, adam, rec.lr);
          for (auto& g : grads) g.tensor->fill(0.0);
          in_batch = 0;
        }
      }
    } catch (const NumericError& e) {
      rec.diverged = true;
      rep.warnings.push_back("epoch " + std::to_string(epoch) + " aborted: " + e.what());
    }
    EvalResult v;
    if (!rec.diverged) {
      v = evaluate(model, val);
      if (!std::isfinite(v.loss)) {
        rec.diverged = true;
        rep.warnings.push_back("epoch " + std::to_string(epoch) + " produced a non-finite validation loss");
      }
    }
    if (rec.diverged) {
      model = best;
      adam = adam_init(model.params());
      v = evaluate(model, val);
    }
    rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.train_accuracy = count ? 100.0 * static_cast<double>(correct) / static_cast<double>(count) : 0.0;
    rec.val_loss = v.loss;
    rec.val_accuracy = v.accuracy;
    if (schedule.record(rec.diverged ? std::numeric_limits<double>::infinity() : v.loss)) best = model;
    rep.epochs.push_back(rec);
    if (log) {
      log->add(stage, epoch, "train", rec.train_loss, rec.train_accuracy, rec.lr);
      log->add(stage, epoch, "val", rec.val_loss, rec.val_accuracy, rec.lr);
    }
    if (schedule.should_stop()) {
      rep.stopped_early = true;
      break;
    }
  }
  model = best;
  rep.best_epoch = schedule.best_epoch();
  rep.best_val_loss = schedule.best_loss();
  const double constant = std::log(static_cast<double>(model.config.output_size()));
  if (!(rep.best_val_loss < constant)) {
    rep.warnings.push_back(stage + ": best validation loss " + fmt(rep.best_val_loss) +
                           " does not beat a uniform predictor (" + fmt(constant) + ")");
  }
  return rep;
}

std::string lineage_json(const std::vector<TrainReport>& stages, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    nlohmann::ordered_json st;
    st["stage"] = s.stage;
    st["epochs"] = s.epochs.size();
    st["best_epoch"] = s.best_epoch;
    st["best_val_loss"] = s.best_val_loss;
    st["initial_val_loss"] = s.initial_val_loss;
    st["stopped_early"] = s.stopped_early;
    std::vector<double> hist;
    for (const auto& e : s.epochs) hist.push_back(e.val_loss);
    st["val_loss_history"] = hist;
    st["warnings"] = s.warnings;
    j["stages"].push_back(st);
  }
  return j.dump(2);
}

std::filesystem::path acoustic_checkpoint_path(const std::filesystem::path& work_dir) {
  return work_dir / "acoustic.ckpt";
}
std::filesystem::path visual_checkpoint_path(const std::filesystem::path& work_dir) {
  return work_dir / "visual.ckpt";
}

TrainReport train_single_stage(ModelGraph& model, const StagedData& data, const TrainConfig& cfg,
                               const std::string& stage, const std::filesystem::path& checkpoint, MetricsLog* log) {
  TrainReport rep = run_epochs(model, data.train, data.val, cfg, log, stage);
  if (!checkpoint.empty()) {
    std::filesystem::create_directories(checkpoint.parent_path());
    save_checkpoint(checkpoint, model, lineage_json({rep}, cfg.seed));
  }
  return rep;
}

StagedResult train_fusion_stage(const StagedConfig& cfg, const StagedData& data, MetricsLog* log) {
  Rng rng = Rng(cfg.fusion.seed).split(3);
  StagedResult out{build_audiovisual(cfg.fused, acoustic_checkpoint_path(cfg.work_dir),
                                     visual_checkpoint_path(cfg.work_dir), rng),
                   {},
                   0.0};
  Rng fresh_rng = Rng(cfg.fusion.seed).split(4);
  out.random_init_val_loss = evaluate(build_model(cfg.fused, fresh_rng), data.val).loss;
  out.stages.push_back(run_epochs(out.model, data.train, data.val, cfg.fusion, log, "fusion"));
  return out;
}

StagedResult train_staged_audiovisual(const StagedConfig& cfg, const StagedData& data, MetricsLog* log) {
  if (!is_fused(cfg.fused.modality)) throw ParameterError("staged training needs an audio-visual config");
  Rng ra = Rng(cfg.acoustic.seed).split(1);
  ModelGraph acoustic = build_acoustic(*cfg.fused.acoustic, ra);
  const TrainReport a =
      train_single_stage(acoustic, data, cfg.acoustic, "acoustic", acoustic_checkpoint_path(cfg.work_dir), log);
  Rng rv = Rng(cfg.visual.seed).split(2);
  ModelGraph visual = build_visual(*cfg.fused.visual, rv);
  const TrainReport v =
      train_single_stage(visual, data, cfg.visual, "visual", visual_checkpoint_path(cfg.work_dir), log);
  StagedResult out = train_fusion_stage(cfg, data, log);
  out.stages.insert(out.stages.begin(), {a, v});
  return out;
}

NoiseSchedule NoiseSchedule::parse(const std::string& text) {
  NoiseSchedule s;
  for (const auto& raw : split(text, ',')) {
    const std::string item = trim(raw);
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    if (parts.size() > 2) throw ParameterError("bad noise level '" + item + "'");
    NoiseLevel level;
    level.snr = parse_snr(trim(parts[0]));
    if (parts.size() == 2) {
      const long long e = std::stoll(trim(parts[1]));
      if (e < 1) throw ParameterError("noise level epochs must be >= 1 in '" + item + "'");
      level.epochs = static_cast<std::size_t>(e);
    }
    s.levels.push_back(level);
  }
  s.validate();
  return s;
}

std::string NoiseSchedule::to_text() const {
  std::string out;
  for (const auto& l : levels) out += (out.empty() ? "" : ",") + format_snr(l.snr) + ":" + std::to_string(l.epochs);
  return out;
}

void NoiseSchedule::validate() const {
  if (levels.empty()) throw ParameterError("noise schedule is empty");
  for (const auto& l : levels) {
    if (l.snr && !std::isfinite(*l.snr)) throw ParameterError("noise level must be finite or clean");
    if (l.epochs < 1) throw ParameterError("noise level epochs must be >= 1");
  }
}

ExampleSource fixed_noise_source(std::size_t count, const NoisyExampleFn& fn, const SnrLevel& snr,
                                 std::uint64_t seed) {
  return ExampleSource{count, [fn, snr, seed](std::size_t i, std::size_t) {
                         Rng rng = Rng(seed).split(i);
                         return fn(i, snr, rng);
                       }};
}

std::vector<TrainReport> train_noise_schedule(ModelGraph& model, const NoisyData& data,
                                              const NoiseSchedule& schedule, const TrainConfig& cfg,
                                              MetricsLog* log) {
  const auto* net = std::get_if<FusionNet>(&model.net);
  if (!net || !net->attention) throw ParameterError("noise-schedule training needs a model with an attention block");
  schedule.validate();
  std::vector<TrainReport> reports;
  const auto& levels = schedule.levels;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    TrainConfig c = cfg;
    c.max_epochs = levels[j].epochs;
    c.seed = cfg.seed + j;
    const std::size_t pool_from = schedule.replay ? 0 : j;
    const std::size_t pooled = j + 1 - pool_from;
    const std::uint64_t train_seed = c.seed;
    ExampleSource train{data.train_count, [&, pool_from, pooled, train_seed](std::size_t i, std::size_t epoch) {
                          Rng rng = Rng(train_seed).split((epoch << 32) ^ i);
                          const SnrLevel snr = levels[pool_from + rng.below(pooled)].snr;
                          return data.train(i, snr, rng);
                        }};
    ExampleSource val{data.val_count * pooled, [&, pool_from](std::size_t i, std::size_t) {
                        const std::size_t k = pool_from + i / data.val_count;
                        Rng rng = Rng(cfg.seed ^ 0x76616cULL).split(k * 1000003ULL + i % data.val_count);
                        return data.val(i % data.val_count, levels[k].snr, rng);
                      }};
    reports.push_back(run_epochs(model, train, val, c, log, "noise_" + format_snr(levels[j].snr)));
  }
  return reports;
}

}  // namespace avsr
