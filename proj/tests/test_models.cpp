// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <numeric>

#include "avsr/binary_io.hpp"
#include "avsr/error.hpp"
#include "avsr/models.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace avsr;
using avsr::testing::check_param;
using avsr::testing::kGradTol;
using avsr::testing::randn;
using avsr::testing::TempDir;

namespace {

ModelConfig acoustic_cfg(std::size_t layers, std::size_t hidden, std::size_t classes = 39) {
  ModelConfig c;
  c.modality = Modality::acoustic;
  c.layers = layers;
  c.hidden = hidden;
  c.class_count = classes;
  return c;
}

ModelConfig small_visual_cfg(std::size_t classes, bool bottleneck = true) {
  ModelConfig c;
  c.modality = Modality::visual;
  c.layers = 1;
  c.hidden = 3;
  c.class_count = classes;
  c.image_size = 10;
  c.conv_stack = parse_conv_stack("conv:2:3:1:1;pool:2:2;conv:2:3:1:0");
  c.use_fc_bottleneck = bottleneck;
  c.bottleneck_width = 4;
  return c;
}

ModelConfig small_acoustic_cfg(std::size_t classes) {
  ModelConfig c = acoustic_cfg(1, 3, classes);
  c.input_dim = 5;
  return c;
}

Example make_example(Rng& rng, std::size_t frames, std::size_t input_dim, std::size_t intervals,
                     std::size_t image_size, std::size_t classes) {
  Example ex;
  ex.audio = randn(rng, {frames, input_dim});
  for (std::size_t f = 0; f < frames; ++f) ex.frame_labels.push_back(rng.below(classes));
  for (std::size_t i = 0; i < intervals; ++i) {
    ex.audio_mid.push_back((2 * i + 1) * frames / (2 * intervals));
    ex.labels.push_back(rng.below(classes));
  }
  ex.images = rng_uniform(rng, {intervals, image_size, image_size}, 0.0, 1.0);
  return ex;
}

// Independent parameter census.
std::size_t lstm_params(std::size_t in, std::size_t h) { return 4 * h * (in + h + 1); }
std::size_t dblstm_params(std::size_t layers, std::size_t h, std::size_t in, std::size_t k) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layers; ++l) n += 2 * lstm_params(l ? h : in, h);
  return n + k * (h + 1);
}

double row_sum_error(const Tensor& p) {
  double worst = 0.0;
  for (std::size_t r = 0; r < p.dim(0); ++r) {
    const auto row = p.row(r);
    worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
  }
  return worst;
}

// Biases start at zero, which puts relu units fed by all-zero patches exactly
// on the kink; jitter them so central differences see a smooth function.
double check_all_params(ModelGraph& g, const Example& ex) {
  Rng jitter(77);
  for (auto& p : g.params())
    if (p.name.size() >= 4 && p.name.compare(p.name.size() - 4, 4, "bias") == 0)
      axpy_inplace(*p.tensor, 1.0, randn(jitter, p.tensor->shape(), 0.1));
  ModelGraph grad = zeroed_copy(g);
  loss_and_gradients(g, ex, grad);
  ParamList ps = g.params(), gs = grad.params();
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double e = check_param([&] { return evaluate_loss(g, ex).loss; }, *ps[i].tensor, *gs[i].tensor);
    CAPTURE(ps[i].name);
    CHECK(e < kGradTol);
    worst = std::max(worst, e);
  }
  return worst;
}

}  // namespace

TEST_CASE("config: text round trip and canonical equality") {
  const ModelConfig a = acoustic_cfg(2, 64);
  const ModelConfig b = ModelConfig::parse(a.to_text());
  CHECK(a == b);
  CHECK(a.to_text() == b.to_text());

  const ModelConfig fused = make_fused_config(a, small_visual_cfg(39), true);
  const ModelConfig f2 = ModelConfig::parse(fused.to_text());
  CHECK(f2 == fused);
  CHECK(f2.head == std::vector<std::size_t>{512, 512, 512});
  CHECK(f2.visual->conv_stack == fused.visual->conv_stack);
}

TEST_CASE("config: unknown keys and bad values carry locations") {
  try {
    ModelConfig::parse("modality = acoustic\nlayers = 2\nkernel = 3\n", "m.cfg");
    FAIL("expected parse error");
  } catch (const ConfigParseError& e) {
    CHECK(e.file() == "m.cfg");
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(ModelConfig::parse("modality = acoustic\nlayers = 0\n"), ParameterError);
  CHECK_THROWS_AS(ModelConfig::parse("modality = acoustic\nclasses = 1\n"), ParameterError);
  CHECK_THROWS_AS(ModelConfig::parse("modality = sonar\n"), ConfigParseError);
  CHECK_THROWS_AS(parse_conv_stack("conv:3:3"), ParameterError);
  CHECK_THROWS_AS(ModelConfig::parse("modality = visual\nimage_size = 4\nconv_stack = conv:2:5:1:0\n"),
                  DimensionError);
}

TEST_CASE("config: conv stack syntax and default front-end") {
  CHECK(format_conv_stack(default_conv_stack()) ==
        "conv:16:3:1:1;pool:2:2;conv:32:3:1:1;pool:2:2;conv:64:3:1:1;pool:2:2");
  ModelConfig v;
  v.modality = Modality::visual;
  CHECK(v.conv_feature_count() == 64u * 15 * 15);
}

TEST_CASE("acoustic: N_L=2, N_h=256, 39 classes parameter census") {
  Rng rng(1);
  const ModelGraph g = build_acoustic(acoustic_cfg(2, 256), rng);
  CHECK(g.param_count() == dblstm_params(2, 256, 39, 39));
  CHECK(g.param_count() == 1666855);
}

TEST_CASE("acoustic: census equals tensor enumeration over a grid") {
  for (std::size_t layers : {1, 2, 3})
    for (std::size_t hidden : {1, 8, 32}) {
      Rng rng(layers * 100 + hidden);
      const ModelGraph g = build_acoustic(acoustic_cfg(layers, hidden), rng);
      CHECK(g.param_count() == dblstm_params(layers, hidden, 39, 39));
    }
}

TEST_CASE("acoustic: smallest network runs and emits distributions") {
  Rng rng(2);
  const ModelGraph g = build_acoustic(acoustic_cfg(1, 1), rng);
  Example ex;
  ex.audio = randn(rng, {3, 39});
  const GraphOutput out = forward(g, ex);
  CHECK(out.logits.shape() == Shape{3, 39});
  CHECK(row_sum_error(probabilities(out)) < 1e-12);
}

TEST_CASE("visual: bottleneck fixes the LSTM input width") {
  Rng rng(3);
  ModelConfig with;
  with.modality = Modality::visual;
  with.layers = 1;
  with.hidden = 16;
  ModelConfig without = with;
  without.use_fc_bottleneck = false;
  const ModelGraph a = build_visual(with, rng);
  const ModelGraph b = build_visual(without, rng);
  const auto& na = std::get<VisualNet>(a.net);
  const auto& nb = std::get<VisualNet>(b.net);
  CHECK(na.lstm[0].input_size() == 39);
  CHECK(nb.lstm[0].input_size() == with.conv_feature_count());
  const std::size_t la = na.lstm[0].forward.weight.size() + na.lstm[0].forward.bias.size();
  const std::size_t lb = nb.lstm[0].forward.weight.size() + nb.lstm[0].forward.bias.size();
  CHECK(lb > la);
}

TEST_CASE("visual: forward on a 4-frame sequence") {
  Rng rng(4);
  ModelConfig c;
  c.modality = Modality::visual;
  c.layers = 1;
  c.hidden = 8;
  c.class_count = 14;
  const ModelGraph g = build_visual(c, rng);
  Example ex;
  ex.images = rng_uniform(rng, {4, 120, 120}, 0.0, 1.0);
  const GraphOutput out = forward(g, ex);
  CHECK(out.logits.shape() == Shape{4, 14});
  CHECK(row_sum_error(probabilities(out)) < 1e-12);
  ex.images = Tensor({4, 100, 100});
  CHECK_THROWS_AS(forward(g, ex), DimensionError);
}

TEST_CASE("audiovisual: construction from sub-networks") {
  Rng rng(5);
  const ModelGraph a = build_acoustic(small_acoustic_cfg(6), rng);
  const ModelGraph v = build_visual(small_visual_cfg(6), rng);
  for (bool attention : {false, true}) {
    const ModelConfig cfg = make_fused_config(a.config, v.config, attention);
    ModelGraph f = build_audiovisual(cfg, a, v, rng);
    std::map<std::string, Tensor> fused;
    for (const auto& p : f.params()) fused[p.name] = *p.tensor;
    for (const auto& p : const_cast<ModelGraph&>(a).params()) CHECK(fused.at("acoustic." + p.name) == *p.tensor);
    for (const auto& p : const_cast<ModelGraph&>(v).params()) CHECK(fused.at("visual." + p.name) == *p.tensor);
    CHECK(f.param_count() > a.param_count() + v.param_count());
  }
  ModelConfig wrong = make_fused_config(a.config, v.config, false);
  CHECK_THROWS_AS(build_audiovisual(wrong, v, v, rng), ConfigMismatchError);
}

TEST_CASE("audiovisual: attention weights are a distribution on every forward pass") {
  Rng rng(6);
  const ModelGraph a = build_acoustic(small_acoustic_cfg(6), rng);
  const ModelGraph v = build_visual(small_visual_cfg(6), rng);
  ModelConfig cfg = make_fused_config(a.config, v.config, true);
  cfg.head = {8};
  cfg.attention = {8, 8, 8};
  const ModelGraph f = build_audiovisual(cfg, a, v, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const Example ex = make_example(rng, 12, 5, 3, 10, 6);
    const GraphOutput out = forward(f, ex);
    CHECK(out.weights.shape() == Shape{3, 2});
    for (std::size_t r = 0; r < 3; ++r) CHECK(std::abs(out.weights(r, 0) + out.weights(r, 1) - 1.0) < 1e-12);
  }
}

TEST_CASE("audiovisual: zero visual block reduces to the acoustic path through the head") {
  Rng rng(7);
  const ModelGraph a = build_acoustic(small_acoustic_cfg(6), rng);
  ModelGraph v = build_visual(small_visual_cfg(6), rng);
  auto& vn = std::get<VisualNet>(v.net);
  vn.out.weight.fill(0.0);
  vn.out.bias.fill(0.0);
  ModelConfig cfg = make_fused_config(a.config, v.config, false);
  cfg.head = {7, 5};
  const ModelGraph f = build_audiovisual(cfg, a, v, rng);
  const Example ex = make_example(rng, 12, 5, 4, 10, 6);
  const Tensor a_logits = forward(a, ex).logits;
  Tensor a_mid({4, 6});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) a_mid(i, j) = a_logits(ex.audio_mid[i], j);
  const Tensor expected = fusion_head_logits(std::get<FusionNet>(f.net), concat_columns(a_mid, Tensor({4, 6})));
  CHECK(forward(f, ex).logits == expected);
}

TEST_CASE("audiovisual: forced equal gates match the plain fusion of halved features") {
  Rng rng(8);
  const ModelGraph a = build_acoustic(small_acoustic_cfg(6), rng);
  const ModelGraph v = build_visual(small_visual_cfg(4), rng);
  ModelConfig cfg = make_fused_config(a.config, v.config, true);
  cfg.head = {9};
  cfg.attention = {5};
  const ModelGraph att = build_audiovisual(cfg, a, v, rng);
  ModelGraph plain = att;
  plain.config.modality = Modality::audiovisual;
  std::get<FusionNet>(plain.net).attention.reset();

  const Example ex = make_example(rng, 15, 5, 3, 10, 6);
  const Tensor forced = forward(att, ex, std::array<double, 2>{0.5, 0.5}).logits;

  Example halved = ex;
  const Tensor a_logits = forward(a, ex).logits;
  Tensor a_mid({3, 6});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 6; ++j) a_mid(i, j) = a_logits(ex.audio_mid[i], j);
  const Tensor feats = scaled(concat_columns(a_mid, forward(v, ex).logits), 0.5);
  const Tensor expected = fusion_head_logits(std::get<FusionNet>(plain.net), feats);
  CHECK(max_abs_diff(forced, expected) < 1e-9);
}

TEST_CASE("gradients: every family matches finite differences") {
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    Rng rng(40 + seed);
    Example ex = make_example(rng, 9, 5, 3, 10, 4);
    SUBCASE("acoustic") {
      ModelConfig c = small_acoustic_cfg(4);
      c.layers = 2;
      c.head = {3};
      ModelGraph g = build_acoustic(c, rng);
      check_all_params(g, ex);
    }
    SUBCASE("visual") {
      ModelGraph g = build_visual(small_visual_cfg(4), rng);
      check_all_params(g, ex);
    }
    SUBCASE("visual without bottleneck") {
      ModelGraph g = build_visual(small_visual_cfg(4, false), rng);
      check_all_params(g, ex);
    }
    SUBCASE("fused with attention") {
      ModelGraph a = build_acoustic(small_acoustic_cfg(4), rng);
      ModelGraph v = build_visual(small_visual_cfg(4), rng);
      ModelConfig cfg = make_fused_config(a.config, v.config, true);
      cfg.head = {4};
      cfg.attention = {3, 3};
      ModelGraph g = build_audiovisual(cfg, a, v, rng);
      check_all_params(g, ex);
    }
    SUBCASE("fused without attention") {
      ModelGraph a = build_acoustic(small_acoustic_cfg(4), rng);
      ModelGraph v = build_visual(small_visual_cfg(4), rng);
      ModelConfig cfg = make_fused_config(a.config, v.config, false);
      cfg.head = {4};
      ModelGraph g = build_audiovisual(cfg, a, v, rng);
      check_all_params(g, ex);
    }
  }
}

TEST_CASE("learnability: gradient steps reduce loss on one example for every family") {
  Rng rng(9);
  const Example ex = make_example(rng, 10, 5, 3, 10, 4);
  ModelGraph a = build_acoustic(small_acoustic_cfg(4), rng);
  ModelGraph v = build_visual(small_visual_cfg(4), rng);
  ModelConfig fc = make_fused_config(a.config, v.config, true);
  fc.head = {6};
  fc.attention = {4};
  ModelGraph f = build_audiovisual(fc, a, v, rng);
  ModelConfig dc;
  dc.modality = Modality::dense;
  dc.input_dim = 5;
  dc.widths = {6, 4};
  ModelGraph d = build_model(dc, rng);
  for (ModelGraph* g : {&a, &v, &f, &d}) {
    CAPTURE(modality_name(g->config.modality));
    const double initial = evaluate_loss(*g, ex).loss;
    bool decreased = false;
    for (int it = 0; it < 50 && !decreased; ++it) {
      ModelGraph grad = zeroed_copy(*g);
      loss_and_gradients(*g, ex, grad);
      ParamList ps = g->params(), gs = grad.params();
      for (std::size_t i = 0; i < ps.size(); ++i) axpy_inplace(*ps[i].tensor, -0.05, *gs[i].tensor);
      decreased = evaluate_loss(*g, ex).loss < initial;
    }
    CHECK(decreased);
  }
}

TEST_CASE("checkpoint: bit-exact round trip") {
  TempDir dir("ckpt");
  Rng rng(10);
  ModelGraph a = build_acoustic(small_acoustic_cfg(4), rng);
  ModelGraph v = build_visual(small_visual_cfg(4), rng);
  const ModelGraph f = build_audiovisual(make_fused_config(a.config, v.config, true), a, v, rng);
  save_checkpoint(dir / "f.ckpt", f, R"({"epoch": 3})");
  Checkpoint ck = load_checkpoint(dir / "f.ckpt");
  CHECK(ck.metadata == R"({"epoch": 3})");
  CHECK(ck.graph.config == f.config);
  ParamList x = const_cast<ModelGraph&>(f).params(), y = ck.graph.params();
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].name == y[i].name);
    CHECK(std::memcmp(x[i].tensor->data().data(), y[i].tensor->data().data(), x[i].tensor->size() * 8) == 0);
  }
}

TEST_CASE("checkpoint: corruption, version and config checks") {
  TempDir dir("ckpt_bad");
  Rng rng(11);
  const ModelGraph a = build_acoustic(small_acoustic_cfg(4), rng);
  save_checkpoint(dir / "a.ckpt", a);
  const auto bytes = read_binary_file(dir / "a.ckpt");

  auto write = [&](const std::string& name, std::vector<std::uint8_t> b) {
    ByteWriter w;
    w.raw(std::span<const std::uint8_t>(b));
    w.write_file(dir / name);
    return dir / name;
  };
  CHECK_THROWS_AS(load_checkpoint(write("t.ckpt", {bytes.begin(), bytes.end() - 20})), CorruptFileError);
  CHECK_THROWS_AS(load_checkpoint(write("h.ckpt", {bytes.begin(), bytes.begin() + 5})), CorruptFileError);
  auto flipped = bytes;
  flipped[flipped.size() - 30] ^= 0x40;
  CHECK_THROWS_AS(load_checkpoint(write("f.ckpt", flipped)), CorruptFileError);
  auto versioned = bytes;
  versioned[8] = 9;
  CHECK_THROWS_AS(load_checkpoint(write("v.ckpt", versioned)), UnsupportedVersionError);

  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt", small_acoustic_cfg(5)), ConfigMismatchError);
  CHECK_NOTHROW(load_checkpoint(dir / "a.ckpt", small_acoustic_cfg(4)));
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), MissingPrerequisiteError);
}

TEST_CASE("audiovisual: building from checkpoints requires both files") {
  TempDir dir("ckpt_av");
  Rng rng(12);
  const ModelGraph a = build_acoustic(small_acoustic_cfg(4), rng);
  const ModelGraph v = build_visual(small_visual_cfg(4), rng);
  save_checkpoint(dir / "a.ckpt", a);
  save_checkpoint(dir / "v.ckpt", v);
  const ModelConfig cfg = make_fused_config(a.config, v.config, true);
  CHECK_NOTHROW(build_audiovisual(cfg, dir / "a.ckpt", dir / "v.ckpt", rng));
  std::filesystem::remove(dir / "v.ckpt");
  CHECK_THROWS_AS(build_audiovisual(cfg, dir / "a.ckpt", dir / "v.ckpt", rng), MissingPrerequisiteError);
}

TEST_CASE("audiovisual: a wide enough head starts as the sum of the stream logits") {
  Rng rng(13);
  const ModelGraph a = build_acoustic(small_acoustic_cfg(4), rng);
  const ModelGraph v = build_visual(small_visual_cfg(4), rng);
  ModelConfig cfg = make_fused_config(a.config, v.config, false);
  for (const auto& head : {std::vector<std::size_t>{}, std::vector<std::size_t>{16, 20}, cfg.head}) {
    cfg.head = head;
    const ModelGraph f = build_audiovisual(cfg, a, v, rng);
    const Example ex = make_example(rng, 12, 5, 3, 10, 4);
    const Tensor al = forward(a, ex).logits, vl = forward(v, ex).logits;
    Tensor expected({3, 4});
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) expected(i, j) = al(ex.audio_mid[i], j) + vl(i, j);
    CHECK(max_abs_diff(forward(f, ex).logits, expected) < 1e-12);
  }
  // Too narrow to carry both streams: plain random initialisation.
  cfg.head = {15};
  const ModelGraph narrow = build_audiovisual(cfg, a, v, rng);
  CHECK(std::get<FusionNet>(narrow.net).out.weight(0, 1) != 0.0);
}
