// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion. The qualitative noise
// criteria train the full staged pipeline on the default synthetic corpus
// through the command-line entry point, so they take several minutes.
//
// usage: acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "avsr/binary_io.hpp"
#include "avsr/cli.hpp"
#include "avsr/corpus.hpp"
#include "avsr/labels.hpp"
#include "avsr/layers.hpp"
#include "avsr/resources.hpp"
#include "avsr/training.hpp"
#include "support.hpp"

using namespace avsr;
using avsr::testing::check_param;
using avsr::testing::project;
using avsr::testing::randn;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets, one block per criterion.
constexpr double kGradMaxRelErr = 1e-4;     // 1
constexpr double kGradBudgetSeconds = 120;  // 1
constexpr int kGradSeeds = 5;               // 1
constexpr double kOracleBudgetSeconds = 60; // 2
constexpr std::size_t kOracleMinConfigs = 12;
constexpr double kNoiseGapPoints = 20.0;      // 4
constexpr double kAcousticBudgetSeconds = 900;
constexpr double kFusionMarginPoints = 5.0;   // 5
constexpr double kVisualSlackPoints = 1.0;    // 5
constexpr double kFusionBudgetSeconds = 1800;
constexpr double kWeightShift = 0.1;          // 6
constexpr int kVisemeTrials = 1000;           // 7
constexpr double kLr0 = 0.01;                 // 8
constexpr std::size_t kPatience = 5;
constexpr double kSnrToleranceDb = 0.2;       // 9
constexpr int kSnrSeeds = 20;

// Desk-scale pipeline settings for criteria 4-6 and 10.
const char* kAcousticCfg =
    "model.layers = 1\n"
    "model.hidden = 16\n"
    "train.max_epochs = 15\n";
// Without the softmax bottleneck and with a gentler rate the small visual
// net escapes the uniform predictor reliably.
const char* kVisualCfg =
    "model.layers = 1\n"
    "model.hidden = 16\n"
    "model.bottleneck = false\n"
    "model.conv_stack = conv:8:5:5:0;pool:2:2\n"
    "train.lr0 = 0.001\n"
    "train.max_epochs = 60\n";
// Fusion heads start from the sub-network logits; 1e-4 keeps the attention
// gate from saturating in the first epoch.
const char* kFusionCfg =
    "train.lr0 = 0.0001\n"
    "train.max_epochs = 10\n";
const char* kAttentionCfg =
    "train.lr0 = 0.0001\n"
    "train.max_epochs = 10\n"
    "noise_schedule = clean:3,20:3,10:3,0:10\n";
const char* kSweepGrid =
    "grid.layers = 1,2\n"
    "grid.hidden = 4,8,16\n"
    "train.max_epochs = 3\n";

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

/// Runs a command in-process; a nonzero exit aborts the criterion.
void cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != kExitOk) {
    std::string line;
    for (const auto& a : args) line += " " + a;
    throw std::runtime_error("avsr" + line + " exited " + std::to_string(code) + ": " + err.str());
  }
}

using Table = std::vector<std::map<std::string, std::string>>;

Table read_csv(const fs::path& path) {
  const auto lines = split(read_text_file(path), '\n');
  const auto header = split(lines.at(0), ',');
  Table rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split(lines[i], ',');
    if (cells.size() != header.size()) throw std::runtime_error(path.string() + ": ragged row");
    std::map<std::string, std::string> row;
    for (std::size_t c = 0; c < header.size(); ++c) row[header[c]] = cells[c];
    rows.push_back(row);
  }
  return rows;
}

/// Column value of the row whose `snr` is `level`.
double noise_value(const Table& t, const std::string& level, const std::string& column) {
  for (const auto& r : t)
    if (r.at("snr") == level) return std::stod(r.at(column));
  throw std::runtime_error("no row for snr " + level);
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

void criterion_gradients() {
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  auto note = [&](const std::string& layer, double err) { worst[layer] = std::max(worst[layer], err); };

  for (int s = 0; s < kGradSeeds; ++s) {
    {
      Rng rng(1000 + s);
      FcLayer layer = FcLayer::create(6, 4, s % 2 ? Activation::relu : Activation::identity, rng);
      layer.bias = randn(rng, {4}, 0.3);
      Tensor x = randn(rng, {3, 6});
      const Tensor r = randn(rng, {3, 4});
      auto loss = [&] { return project(fc_forward(layer, x), r); };
      FcCache cache;
      fc_forward(layer, x, &cache);
      FcLayer grad = zeroed_copy(layer);
      const Tensor dx = fc_backward(layer, cache, r, grad);
      note("FC", check_param(loss, layer.weight, grad.weight));
      note("FC", check_param(loss, layer.bias, grad.bias));
      note("FC", check_param(loss, x, dx));
    }
    {
      Rng rng(2000 + s);
      Tensor logits = randn(rng, {4, 7}, 2.0);
      std::vector<std::size_t> labels(4);
      for (auto& l : labels) l = rng.below(7);
      const XentResult r = softmax_xent(logits, labels);
      note("softmax-xent", check_param([&] { return softmax_xent(logits, labels).loss; }, logits, r.d_logits));
    }
    {
      Rng rng(3000 + s);
      ConvLayer layer = ConvLayer::create(2, 3, 3, 1 + s % 2, 1, Activation::relu, rng);
      layer.bias = randn(rng, {3}, 0.2);
      Tensor img = randn(rng, {2, 8, 8});
      const Tensor r = randn(rng, conv_forward(layer, img).shape());
      auto loss = [&] { return project(conv_forward(layer, img), r); };
      ConvCache cache;
      conv_forward(layer, img, &cache);
      ConvLayer grad = zeroed_copy(layer);
      const Tensor dx = conv_backward(layer, cache, r, grad);
      note("conv", check_param(loss, layer.kernels, grad.kernels));
      note("conv", check_param(loss, layer.bias, grad.bias));
      note("conv", check_param(loss, img, dx));
    }
    {
      Rng rng(4000 + s);
      const PoolLayer pool{2, 2};
      Tensor x = randn(rng, {2, 8, 8});
      const Tensor r = randn(rng, {2, 4, 4});
      PoolCache cache;
      pool_forward(pool, x, &cache);
      const Tensor dx = pool_backward(pool, cache, r);
      note("pool", check_param([&] { return project(pool_forward(pool, x), r); }, x, dx));
    }
    {
      Rng rng(5000 + s);
      LstmLayer layer = LstmLayer::create(3, 4, rng);
      layer.weight = randn(rng, layer.weight.shape(), 0.5);
      layer.bias = randn(rng, layer.bias.shape(), 0.5);
      Tensor xs = randn(rng, {7, 3});
      const Tensor r = randn(rng, {7, 4});
      auto loss = [&] { return project(lstm_forward(layer, xs), r); };
      LstmCache cache;
      lstm_forward(layer, xs, nullptr, nullptr, &cache);
      LstmLayer grad = zeroed_copy(layer);
      const Tensor dx = lstm_backward(layer, cache, r, grad);
      note("LSTM", check_param(loss, layer.weight, grad.weight));
      note("LSTM", check_param(loss, layer.bias, grad.bias));
      note("LSTM", check_param(loss, xs, dx));
    }
    {
      Rng rng(6000 + s);
      BiLstmLayer layer = BiLstmLayer::create(3, 4, rng);
      Tensor xs = randn(rng, {6, 3});
      const Tensor r = randn(rng, {6, 4});
      auto loss = [&] { return project(bilstm_forward(layer, xs), r); };
      BiLstmCache cache;
      bilstm_forward(layer, xs, &cache);
      BiLstmLayer grad = zeroed_copy(layer);
      const Tensor dx = bilstm_backward(layer, cache, r, grad);
      note("BiLSTM", check_param(loss, layer.forward.weight, grad.forward.weight));
      note("BiLSTM", check_param(loss, layer.backward.weight, grad.backward.weight));
      note("BiLSTM", check_param(loss, layer.forward.bias, grad.forward.bias));
      note("BiLSTM", check_param(loss, layer.backward.bias, grad.backward.bias));
      note("BiLSTM", check_param(loss, xs, dx));
    }
    {
      Rng rng(7000 + s);
      AttentionBlock block = AttentionBlock::create(7, {6, 6}, rng);
      Tensor a = randn(rng, {3, 4}), v = randn(rng, {3, 3});
      const Tensor r = randn(rng, {3, 7});
      auto loss = [&] { return project(attention_fuse(block, a, v).fused, r); };
      AttentionCache cache;
      attention_fuse(block, a, v, &cache);
      AttentionBlock grad = zeroed_copy(block);
      const FusionGrad g = attention_backward(block, cache, r, grad);
      note("attention", check_param(loss, a, g.d_a));
      note("attention", check_param(loss, v, g.d_v));
      for (std::size_t i = 0; i < block.hidden.size(); ++i) {
        note("attention", check_param(loss, block.hidden[i].weight, grad.hidden[i].weight));
        note("attention", check_param(loss, block.hidden[i].bias, grad.hidden[i].bias));
      }
      note("attention", check_param(loss, block.output.weight, grad.output.weight));
      note("attention", check_param(loss, block.output.bias, grad.output.bias));
    }
  }
  const double secs = seconds_since(t0);
  double max_err = 0.0;
  std::string detail;
  for (const auto& [layer, e] : worst) {
    max_err = std::max(max_err, e);
    detail += layer + " " + fmt("%.1e", e) + ", ";
  }
  report(1, "gradient correctness", max_err < kGradMaxRelErr && secs < kGradBudgetSeconds && worst.size() == 7,
         detail + "max " + fmt("%.2e", max_err) + " < " + fmt("%.0e", kGradMaxRelErr) + " over " +
             std::to_string(kGradSeeds) + " seeds each, " + fmt("%.1f", secs) + " s");
}

// ---------------------------------------------------------------------------
// 2. Cost-model oracle equivalence

void criterion_oracle() {
  const auto t0 = Clock::now();
  std::vector<ModelConfig> grid;
  for (std::size_t layers : {1, 2, 3})
    for (std::size_t hidden : {8, 32, 256}) {
      ModelConfig c;
      c.modality = Modality::acoustic;
      c.layers = layers;
      c.hidden = hidden;
      grid.push_back(c);
    }
  ModelConfig v;
  v.modality = Modality::visual;
  v.layers = 1;
  v.hidden = 16;
  grid.push_back(v);  // default three-conv front-end at 120 x 120
  ModelConfig small = v;
  small.image_size = 12;
  small.conv_stack = parse_conv_stack("conv:3:3:1:1;pool:2:2;conv:5:3:2:0");
  grid.push_back(small);
  ModelConfig nb = small;
  nb.use_fc_bottleneck = false;
  grid.push_back(nb);
  ModelConfig a = grid[0];
  for (bool att : {false, true}) {
    ModelConfig f = make_fused_config(a, small, att);
    f.head = {16, 12};
    f.attention = {10, 6};
    grid.push_back(f);
  }

  std::size_t matched = 0;
  std::string mismatch;
  std::uint64_t seed = 1;
  for (const auto& c : grid) {
    Rng rng(seed++);
    const ModelGraph g = build_model(c, rng);
    const ResourceReport r = count_resources(c);
    const ModelConfig& ac = is_fused(c.modality) ? *c.acoustic : c;
    const ModelConfig& vc = is_fused(c.modality) ? *c.visual : c;
    Example ex;
    const std::size_t frames = 5, images = 3;
    if (c.modality != Modality::visual) ex.audio = randn(rng, {frames, ac.input_dim});
    if (c.modality != Modality::acoustic) ex.images = rng_uniform(rng, {images, vc.image_size, vc.image_size}, 0, 1);
    for (std::size_t i = 0; i < images; ++i) ex.audio_mid.push_back(i * frames / images);
    const InstrumentedOutput out = instrumented_forward(g, ex);
    const std::uint64_t want_audio = c.modality == Modality::visual ? 0 : frames * r.macs_per_audio_frame;
    const std::uint64_t want_image = c.modality == Modality::acoustic ? 0 : images * r.macs_per_image;
    if (out.audio_macs == want_audio && out.image_macs == want_image && r.param_count == g.param_count()) {
      ++matched;
    } else {
      mismatch += " [" + modality_name(c.modality) + " L" + std::to_string(c.layers) + " H" +
                  std::to_string(c.hidden) + "]";
    }
  }
  const double secs = seconds_since(t0);
  report(2, "cost-model oracle equivalence",
         matched == grid.size() && grid.size() >= kOracleMinConfigs && secs < kOracleBudgetSeconds,
         std::to_string(matched) + "/" + std::to_string(grid.size()) +
             " configs exact (N_L 1-3 x N_h 8/32/256, conv stacks, fused)" + mismatch + ", " + fmt("%.1f", secs) +
             " s");
}

// ---------------------------------------------------------------------------
// 3. Cost-convention spot checks

void criterion_conventions(const fs::path& work) {
  ModelConfig fc;
  fc.modality = Modality::dense;
  fc.input_dim = 39;
  fc.widths = {10};
  const ResourceReport r = count_resources(fc);
  const bool fc_ok = r.macs_per_audio_frame == 400 && r.flops_per_audio_frame() == 800 && r.size_bytes() == 1600;
  const bool lstm_ok = lstm_macs(39, 256) == 303104;

  // Through the command: acoustic N_L=2, N_h=256 against the published row.
  write_text_file(work / "published_acoustic.cfg", "modality = acoustic\nlayers = 2\nhidden = 256\n");
  std::ostringstream out, err;
  const int code = run_cli({"resources", "--config", (work / "published_acoustic.cfg").string(), "--compare",
                            "acoustic"},
                           out, err);
  write_text_file(work / "discrepancy_acoustic.txt", out.str());
  const std::string rep = out.str();
  // Our side by hand: two bidirectional layers, then the 39-way class layer.
  const std::uint64_t ours_macs = 2 * 4 * 256 * (39 + 256 + 1) + 2 * 4 * 256 * (256 + 256 + 1) + 39 * 257;
  bool ledger = true;
  for (const auto& line : convention_ledger()) ledger = ledger && rep.find(line) != std::string::npos;
  const bool rep_ok = code == 0 && rep.find(fmt("%.6g", 2.0 * ours_macs)) != std::string::npos &&
                      rep.find(fmt("%.6g", 4.0 * ours_macs / 1e6)) != std::string::npos &&
                      rep.find("1.49e+07") != std::string::npos && rep.find("44.5") != std::string::npos && ledger;
  report(3, "cost-convention spot checks", fc_ok && lstm_ok && rep_ok,
         "FC 39->10 " + std::to_string(r.macs_per_audio_frame) + " MAC / " +
             std::to_string(r.flops_per_audio_frame()) + " FLOP / " + std::to_string(r.size_bytes()) +
             " B; LSTM(39,256) " + std::to_string(lstm_macs(39, 256)) + " MAC/frame; discrepancy report ours " +
             fmt("%.4g", 2.0 * ours_macs) + " FLOP/frame, " + fmt("%.4g", 4.0 * ours_macs / 1e6) +
             " MB vs published 1.49e7, 44.5 MB, ledger " + (ledger ? "present" : "MISSING"));
}

// ---------------------------------------------------------------------------
// 4-6, 10. Staged pipeline through the CLI

struct Pipeline {
  fs::path corpus, out;
  double acoustic_seconds = 0, fusion_seconds = 0;
  Table acoustic, visual, plain, attention;
};

Table eval_noise(const Pipeline& p, const std::string& name) {
  const fs::path csv = p.out / (name + ".noise.csv");
  cli({"eval-noise", "--checkpoint", (p.out / (name + ".ckpt")).string(), "--corpus", p.corpus.string(), "--snr",
       "clean,20,10,0", "--out", csv.string()});
  return read_csv(csv);
}

void train(const Pipeline& p, const std::string& modality, const fs::path& cfg, const fs::path& out) {
  cli({"train", "--modality", modality, "--corpus", p.corpus.string(), "--config", cfg.string(), "--out",
       out.string()});
}

Pipeline run_pipeline(const fs::path& work) {
  Pipeline p;
  p.corpus = work / "corpus";
  p.out = work / "run";
  fs::remove_all(p.out);
  write_text_file(work / "acoustic.cfg", kAcousticCfg);
  write_text_file(work / "visual.cfg", kVisualCfg);
  write_text_file(work / "fusion.cfg", kFusionCfg);
  write_text_file(work / "attention.cfg", kAttentionCfg);

  auto t0 = Clock::now();
  if (!fs::exists(p.corpus / "manifest.json")) cli({"synth", "--out", p.corpus.string(), "--seed", "1"});
  cli({"cache", "--corpus", p.corpus.string()});
  const double setup = seconds_since(t0);

  t0 = Clock::now();
  train(p, "acoustic", work / "acoustic.cfg", p.out);
  p.acoustic = eval_noise(p, "acoustic");
  p.acoustic_seconds = setup + seconds_since(t0);

  t0 = Clock::now();
  train(p, "visual", work / "visual.cfg", p.out);
  p.visual = eval_noise(p, "visual");
  train(p, "audiovisual", work / "fusion.cfg", p.out);
  p.plain = eval_noise(p, "audiovisual");
  train(p, "audiovisual_attention", work / "attention.cfg", p.out);
  p.attention = eval_noise(p, "audiovisual_attention");
  p.fusion_seconds = p.acoustic_seconds + seconds_since(t0);
  return p;
}

void criterion_acoustic_noise(const Pipeline& p) {
  const double clean = noise_value(p.acoustic, "clean", "accuracy");
  const double zero = noise_value(p.acoustic, "0", "accuracy");
  report(4, "acoustic accuracy drop at 0 dB",
         clean - zero >= kNoiseGapPoints && p.acoustic_seconds < kAcousticBudgetSeconds,
         "clean " + fmt("%.2f", clean) + "% -> 0 dB " + fmt("%.2f", zero) + "%, gap " + fmt("%.2f", clean - zero) +
             " >= " + fmt("%.0f", kNoiseGapPoints) + " points, " + fmt("%.0f", p.acoustic_seconds) + " s");
}

void criterion_fusion(const Pipeline& p) {
  const double att = noise_value(p.attention, "0", "accuracy");
  const double plain = noise_value(p.plain, "0", "accuracy");
  const double vis = noise_value(p.visual, "0", "accuracy");
  report(5, "attention fusion at 0 dB",
         att >= plain + kFusionMarginPoints && att >= vis - kVisualSlackPoints && p.fusion_seconds < kFusionBudgetSeconds,
         "attention " + fmt("%.2f", att) + "% vs no-attention " + fmt("%.2f", plain) + "% (need +" +
             fmt("%.0f", kFusionMarginPoints) + ") vs visual " + fmt("%.2f", vis) + "% (need >= -" +
             fmt("%.0f", kVisualSlackPoints) + "), " + fmt("%.0f", p.fusion_seconds) + " s");
}

void criterion_weights(const Pipeline& p) {
  const double clean = noise_value(p.attention, "clean", "mean_wv");
  const double zero = noise_value(p.attention, "0", "mean_wv");
  report(6, "visual weight rises with noise", zero - clean >= kWeightShift,
         "mean w_v clean " + fmt("%.3f", clean) + ", 20 dB " + fmt("%.3f", noise_value(p.attention, "20", "mean_wv")) +
             ", 10 dB " + fmt("%.3f", noise_value(p.attention, "10", "mean_wv")) + ", 0 dB " + fmt("%.3f", zero) +
             "; shift " + fmt("%.3f", zero - clean) + " >= " + fmt("%.1f", kWeightShift));
}

void criterion_determinism(const Pipeline& p, const fs::path& work) {
  const fs::path again = work / "run_again";
  fs::remove_all(again);
  train(p, "acoustic", work / "acoustic.cfg", again);
  const auto a = read_binary_file(p.out / "acoustic.metrics.csv");
  const auto b = read_binary_file(again / "acoustic.metrics.csv");
  report(10, "training determinism", a == b && !a.empty(),
         "acoustic metrics CSV " + std::to_string(a.size()) + " bytes, rerun " + std::to_string(b.size()) +
             " bytes, " + (a == b ? "byte-identical" : "DIFFERENT"));
}

// ---------------------------------------------------------------------------
// 7. Viseme dominance

void criterion_visemes() {
  const auto& ps = PhonemeSet::standard();
  const auto& vm = VisemeMap::standard();
  Rng rng(7);
  int violations = 0;
  double mean_gap = 0.0;
  for (int trial = 0; trial < kVisemeTrials; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const double hit_rate = rng.uniform();
    std::vector<std::string> pred, gold;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(ps.symbol(rng.below(ps.size())));
      pred.push_back(rng.uniform() < hit_rate ? gold.back() : ps.symbol(rng.below(ps.size())));
    }
    const double phon = frame_accuracy(std::span<const std::string>(pred), std::span<const std::string>(gold));
    const auto vp = to_visemes(pred, vm), vg = to_visemes(gold, vm);
    const double vis = frame_accuracy(std::span<const std::string>(vp), std::span<const std::string>(vg));
    violations += vis < phon ? 1 : 0;
    mean_gap += (vis - phon) / kVisemeTrials;
  }
  report(7, "viseme dominance", violations == 0,
         std::to_string(kVisemeTrials) + " random prediction/gold pairs, " + std::to_string(violations) +
             " with viseme < phoneme accuracy, mean gain " + fmt("%.2f", mean_gap) + " points");
}

// ---------------------------------------------------------------------------
// 8. Early stopping and learning-rate schedule

void criterion_schedule() {
  TrainConfig cfg;  // defaults: lr0 0.01, factor 0.5, patience 5
  bool ok = cfg.lr0 == kLr0 && cfg.patience == kPatience;
  Rng rng(8);
  int sequences = 0;
  for (int trial = 0; trial < 500; ++trial) {
    // Random losses: any mix of new bests and stalls, then a final best
    // followed by nothing but stalls.
    EpochSchedule s(cfg);
    double best = 10.0;
    std::size_t decays = 0, stale = 0;
    const std::size_t warmup = rng.below(12);
    bool stopped_early = false;
    for (std::size_t e = 0; e < warmup && !stopped_early; ++e) {
      // The first epoch always sets a best; warm-up never reaches patience.
      const bool improve = e == 0 || stale + 1 >= kPatience || rng.uniform() < 0.5;
      const double loss = improve ? best - rng.uniform(1e-6, 0.5) : best + rng.uniform(0.0, 0.5);
      const bool new_best = s.record(loss);
      ok = ok && new_best == improve;
      if (improve) {
        best = loss;
        stale = 0;
      } else {
        ++decays;
        ++stale;
      }
      stopped_early = s.should_stop();
      ok = ok && !stopped_early && s.lr() == kLr0 * std::pow(0.5, static_cast<double>(decays));
    }
    s.record(best - 0.25);
    best -= 0.25;
    for (std::size_t k = 1; k <= kPatience; ++k) {
      ok = ok && !s.should_stop();
      s.record(best + rng.uniform(0.0, 1.0) * (k % 2 ? 1.0 : 0.0));  // ties with the best do not count as gains
      ++decays;
      ok = ok && s.lr() == kLr0 * std::pow(0.5, static_cast<double>(decays)) && s.decay_events() == decays;
    }
    ok = ok && s.should_stop() && s.stale_epochs() == kPatience;
    ++sequences;
  }
  // Explicit trace: 1.0 then five stalls; lr after k decays is 0.01 * 0.5^k.
  EpochSchedule s(cfg);
  s.record(1.0);
  std::string trace;
  for (int k = 1; k <= 5; ++k) {
    ok = ok && !s.should_stop();
    s.record(1.0 + k);
    ok = ok && s.lr() == kLr0 * std::pow(0.5, k);
    trace += fmt("%.6g", s.lr()) + (k < 5 ? " " : "");
  }
  ok = ok && s.should_stop() && s.epochs() == 6;
  report(8, "early stopping and LR schedule", ok,
         std::to_string(sequences) + " random loss sequences stop after exactly " + std::to_string(kPatience) +
             " non-improving epochs; lr after k=1..5 decays: " + trace);
}

// ---------------------------------------------------------------------------
// 9. SNR calibration

void criterion_snr() {
  double worst = 0.0;
  std::string detail;
  for (double target : {40.0, 20.0, 10.0, 0.0, -5.0}) {
    double mean = 0.0;
    for (int seed = 0; seed < kSnrSeeds; ++seed) {
      // A 1 s voiced-like clip: three harmonics with random phases and level.
      Rng rng(9000 + seed);
      AudioClip clip;
      clip.samples.resize(16000);
      const double f0 = rng.uniform(90.0, 220.0), level = rng.uniform(0.05, 0.5);
      const double ph[3] = {rng.uniform(0, 6.28), rng.uniform(0, 6.28), rng.uniform(0, 6.28)};
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const double t = static_cast<double>(i) / clip.sample_rate;
        double x = 0.0;
        for (int h = 0; h < 3; ++h) x += std::sin(2 * M_PI * f0 * (h + 1) * t + ph[h]) / (h + 1);
        clip.samples[i] = level * x;
      }
      Rng noise(seed);
      const NoisyClip n = add_noise_snr_detailed(clip, target, noise);
      double ps = 0.0, pn = 0.0;
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        ps += clip.samples[i] * clip.samples[i];
        pn += n.noise[i] * n.noise[i];
      }
      mean += 10.0 * std::log10(ps / pn) / kSnrSeeds;
    }
    worst = std::max(worst, std::abs(mean - target));
    detail += fmt("%g", target) + "->" + fmt("%.3f", mean) + " ";
  }
  report(9, "SNR calibration", worst <= kSnrToleranceDb,
         "mean realized dB over " + std::to_string(kSnrSeeds) + " seeds: " + detail + "(max error " +
             fmt("%.3f", worst) + " <= " + fmt("%.1f", kSnrToleranceDb) + " dB)");
}

// ---------------------------------------------------------------------------
// 11. Pareto sweep audit

void criterion_sweep(const Pipeline& p, const fs::path& work) {
  const fs::path out = work / "sweep";
  fs::remove_all(out);
  write_text_file(work / "grid.cfg", kSweepGrid);
  cli({"sweep", "--grid", (work / "grid.cfg").string(), "--corpus", p.corpus.string(), "--out", out.string()});
  const Table rows = read_csv(out / "sweep.csv");
  const Table front = read_csv(out / "frontier.csv");

  // Independent quadratic scan: a point is on the frontier unless another
  // point is no worse on both accuracy and FLOP/s and better on one.
  std::set<std::string> want, got;
  for (const auto& r : rows) {
    if (r.at("ok") != "1") continue;
    bool dominated = false;
    for (const auto& q : rows) {
      if (q.at("ok") != "1") continue;
      const double ra = std::stod(r.at("accuracy")), qa = std::stod(q.at("accuracy"));
      const double rf = std::stod(r.at("flops_per_second")), qf = std::stod(q.at("flops_per_second"));
      dominated = dominated || (qa >= ra && qf <= rf && (qa > ra || qf < rf));
    }
    if (!dominated) want.insert(r.at("label"));
  }
  std::size_t dominated_in_front = 0;
  for (const auto& f : front) {
    got.insert(f.at("label"));
    dominated_in_front += want.count(f.at("label")) ? 0 : 1;
  }
  std::size_t missing = 0;
  for (const auto& w : want) missing += got.count(w) ? 0 : 1;
  std::string labels;
  for (const auto& g : got) labels += " " + g;
  report(11, "Pareto sweep audit", rows.size() == 6 && dominated_in_front == 0 && missing == 0 && !got.empty(),
         std::to_string(rows.size()) + " points, frontier {" + labels + " }, " + std::to_string(dominated_in_front) +
             " dominated in frontier, " + std::to_string(missing) + " non-dominated missing");
}

void guarded(int id, const std::string& name, const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("error: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "avsr_acceptance";
  fs::create_directories(work);
  std::printf("acceptance work directory: %s\n", work.string().c_str());

  guarded(1, "gradient correctness", criterion_gradients);
  guarded(2, "cost-model oracle equivalence", criterion_oracle);
  guarded(3, "cost-convention spot checks", [&] { criterion_conventions(work); });

  std::optional<Pipeline> pipeline;
  try {
    pipeline = run_pipeline(work);
  } catch (const std::exception& e) {
    std::printf("staged pipeline failed: %s\n", e.what());
  }
  if (pipeline) {
    guarded(4, "acoustic accuracy drop at 0 dB", [&] { criterion_acoustic_noise(*pipeline); });
    guarded(5, "attention fusion at 0 dB", [&] { criterion_fusion(*pipeline); });
    guarded(6, "visual weight rises with noise", [&] { criterion_weights(*pipeline); });
  } else {
    for (int id : {4, 5, 6}) report(id, "staged pipeline", false, "pipeline did not complete");
  }

  guarded(7, "viseme dominance", criterion_visemes);
  guarded(8, "early stopping and LR schedule", criterion_schedule);
  guarded(9, "SNR calibration", criterion_snr);

  if (pipeline) {
    guarded(10, "training determinism", [&] { criterion_determinism(*pipeline, work); });
    guarded(11, "Pareto sweep audit", [&] { criterion_sweep(*pipeline, work); });
  } else {
    report(10, "training determinism", false, "pipeline did not complete");
    report(11, "Pareto sweep audit", false, "pipeline did not complete");
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
