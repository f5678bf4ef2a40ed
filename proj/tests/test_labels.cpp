// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "avsr/binary_io.hpp"
#include "avsr/labels.hpp"
#include "avsr/rng.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace avsr;
using avsr::testing::TempDir;

namespace {

AlignmentErrorKind kind_of(const std::string& text) {
  try {
    parse_alignment(text);
  } catch (const AlignmentError& e) {
    return e.kind();
  }
  FAIL("no alignment error for: " << text);
  return AlignmentErrorKind::malformed;
}

int line_of(const std::string& text) {
  try {
    parse_alignment(text);
  } catch (const AlignmentError& e) {
    return e.line();
  }
  return -1;
}

AlignedLabels one(double start, double end, const std::string& p = "aa") { return {{{start, end, p}}}; }

}  // namespace

TEST_CASE("assets: bundled inventory and viseme map") {
  const auto& ps = PhonemeSet::standard();
  CHECK(ps.size() == 39);
  CHECK(std::set<std::string>(ps.symbols().begin(), ps.symbols().end()).size() == 39);
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps.index_of(ps.symbol(i)) == i);
  CHECK_THROWS_AS(ps.index_of("zz"), DataError);

  const auto& vm = VisemeMap::standard();
  CHECK(vm.visemes().size() < 39);
  std::set<std::string> covered;
  for (const auto& p : ps.symbols()) {
    const std::string& v = vm.viseme_of(p);
    CHECK(std::find(vm.visemes().begin(), vm.visemes().end(), v) != vm.visemes().end());
    covered.insert(v);
  }
  CHECK(covered.size() == vm.visemes().size());
  CHECK(vm.viseme_of("p") == vm.viseme_of("b"));
  CHECK(vm.viseme_of("p") != vm.viseme_of("s"));
}

TEST_CASE("assets: loader verifies checksums and totality") {
  const std::filesystem::path src = std::filesystem::path(AVSR_SOURCE_DIR) / "data";
  const auto [ps, vm] = load_assets(src);
  CHECK(ps.symbols() == PhonemeSet::standard().symbols());
  CHECK(vm.visemes() == VisemeMap::standard().visemes());

  TempDir dir("assets");
  for (const char* f : {"MANIFEST", "phonemes_39.txt", "visemes_neti.txt"})
    std::filesystem::copy_file(src / f, dir / f);
  std::string vis = read_text_file(dir / "visemes_neti.txt");
  vis.replace(vis.find("aa V1"), 5, "aa V9");
  write_text_file(dir / "visemes_neti.txt", vis);
  CHECK_THROWS_AS(load_assets(dir.path()), CorruptFileError);

  const std::string phon = read_text_file(src / "phonemes_39.txt");
  std::string partial = read_text_file(src / "visemes_neti.txt");
  partial.erase(partial.find("sil S"));
  CHECK_THROWS_AS(parse_viseme_asset(partial, PhonemeSet::standard()), DataError);
  CHECK_THROWS_AS(parse_phoneme_asset("aa\nbb\n"), DataError);
  CHECK(parse_phoneme_asset(phon).size() == 39);
}

TEST_CASE("alignment: sample arithmetic and header") {
  const auto a = parse_alignment("0 1600 sil\n1600 4000 aa\n");
  REQUIRE(a.intervals.size() == 2);
  CHECK(a.intervals[0].start == 0.0);
  CHECK(a.intervals[0].end == doctest::Approx(0.1));
  CHECK(a.intervals[0].phoneme == "sil");
  CHECK(a.end_time() == doctest::Approx(0.25));

  const auto b = parse_alignment("# sample_rate = 8000\n# comment\n\n0 800 b\n");
  CHECK(b.intervals[0].end == doctest::Approx(0.1));
  // Gaps between intervals are allowed.
  CHECK(parse_alignment("0 100 aa\n200 300 b\n").intervals.size() == 2);
}

TEST_CASE("alignment: each failure kind names its line") {
  CHECK(kind_of("0 100 aa\nfoo\n") == AlignmentErrorKind::malformed);
  CHECK(line_of("0 100 aa\nfoo\n") == 2);
  CHECK(kind_of("0 100 aa extra\n") == AlignmentErrorKind::malformed);
  CHECK(kind_of("100 100 aa\n") == AlignmentErrorKind::malformed);
  CHECK(kind_of("-5 100 aa\n") == AlignmentErrorKind::malformed);
  CHECK(kind_of("200 300 aa\n0 100 b\n") == AlignmentErrorKind::out_of_order);
  CHECK(line_of("200 300 aa\n0 100 b\n") == 2);
  CHECK(kind_of("0 300 aa\n200 400 b\n") == AlignmentErrorKind::overlap);
  CHECK(kind_of("0 100 aa\n100 200 zz\n") == AlignmentErrorKind::unknown_phoneme);
  CHECK(line_of("0 100 aa\n100 200 zz\n") == 2);
}

TEST_CASE("alignment: serialize then parse is the identity") {
  Rng rng(4);
  const auto& ps = PhonemeSet::standard();
  for (int trial = 0; trial < 50; ++trial) {
    AlignedLabels l;
    long long t = static_cast<long long>(rng.below(500));
    for (int i = 0, n = 1 + static_cast<int>(rng.below(12)); i < n; ++i) {
      const long long len = 1 + static_cast<long long>(rng.below(3000));
      l.intervals.push_back({t / 16000.0, (t + len) / 16000.0, ps.symbol(rng.below(39))});
      t += len + static_cast<long long>(rng.below(2) * rng.below(400));
    }
    const auto back = parse_alignment(serialize_alignment(l));
    REQUIRE(back.intervals.size() == l.intervals.size());
    for (std::size_t i = 0; i < l.intervals.size(); ++i) {
      CHECK(back.intervals[i].start == l.intervals[i].start);
      CHECK(back.intervals[i].end == l.intervals[i].end);
      CHECK(back.intervals[i].phoneme == l.intervals[i].phoneme);
    }
    CHECK(serialize_alignment(back) == serialize_alignment(l));
  }
}

TEST_CASE("midpoints: floor rule") {
  CHECK(midpoint_frames(one(0.0, 0.1), 0.01)[0].frame == 5);
  CHECK(midpoint_frames(one(0.03, 0.05), 0.01)[0].frame == 4);
  CHECK(midpoint_frames(one(0.010, 0.015), 0.01)[0].frame == 1);
  // A midpoint exactly on a boundary belongs to the frame that starts there.
  CHECK(midpoint_frames(one(0.02, 0.04), 0.01)[0].frame == 3);
  CHECK(midpoint_frames(one(0.0, 0.1, "sil"), 0.01)[0].phoneme == PhonemeSet::standard().index_of("sil"));
  CHECK_THROWS_AS(midpoint_frames(one(0.0, 0.1), 0.0), ParameterError);
}

TEST_CASE("midpoints: indices stay inside the stream or the labels are rejected") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const double duration = 0.2 + rng.uniform(0.0, 2.0);
    AlignedLabels l;
    double t = 0.0;
    while (true) {
      const double len = rng.uniform(0.01, 0.3);
      if (t + len > duration) break;
      l.intervals.push_back({t, t + len, "aa"});
      t += len;
    }
    if (l.intervals.empty()) continue;
    for (double rate : {100.0, 30.0}) {
      const std::size_t frames = static_cast<std::size_t>(duration * rate) + 1;
      for (std::size_t f : midpoint_indices(l, rate, frames, duration)) CHECK(f < frames);
    }
  }
  CHECK_THROWS_AS(midpoint_indices(one(0.0, 1.5), 100.0, 100, 1.0), DataError);
  CHECK_THROWS_AS(midpoint_indices(one(0.0, 0.5), 100.0, 0, 1.0), DataError);
  CHECK(midpoint_indices(one(0.9, 1.0), 100.0, 10, 1.0)[0] == 9);
}

TEST_CASE("accuracy: percentages and argument checks") {
  const std::vector<std::string> g{"a", "b", "c"}, p{"a", "b", "d"};
  CHECK(frame_accuracy(std::span<const std::string>(g), std::span<const std::string>(g)) == 100.0);
  CHECK(frame_accuracy(std::span<const std::string>(p), std::span<const std::string>(g)) ==
        doctest::Approx(66.67).epsilon(1e-4));
  const std::vector<std::size_t> a{1, 2}, b{1};
  CHECK_THROWS_AS(frame_accuracy(std::span<const std::size_t>(a), std::span<const std::size_t>(b)), DimensionError);
  const std::vector<std::size_t> empty;
  CHECK_THROWS_AS(frame_accuracy(std::span<const std::size_t>(empty), std::span<const std::size_t>(empty)),
                  ParameterError);
}

TEST_CASE("visemes: mapped accuracy never falls below phoneme accuracy") {
  const auto& ps = PhonemeSet::standard();
  const auto& vm = VisemeMap::standard();
  const std::vector<std::string> p{"p"}, b{"b"};
  CHECK(frame_accuracy(std::span<const std::string>(p), std::span<const std::string>(b)) == 0.0);
  CHECK(frame_accuracy(std::span<const std::string>(to_visemes(p, vm)),
                       std::span<const std::string>(to_visemes(b, vm))) == 100.0);
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<std::string> pred, gold;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(ps.symbol(rng.below(39)));
      pred.push_back(rng.uniform() < 0.3 ? gold.back() : ps.symbol(rng.below(39)));
    }
    const double phon = frame_accuracy(std::span<const std::string>(pred), std::span<const std::string>(gold));
    const auto vp = to_visemes(pred, vm), vg = to_visemes(gold, vm);
    const double vis = frame_accuracy(std::span<const std::string>(vp), std::span<const std::string>(vg));
    CHECK(vis >= phon);
  }
  const std::vector<std::string> bad{"zz"};
  CHECK_THROWS_AS(to_visemes(bad, vm), DataError);
}

TEST_CASE("class maps: phoneme and viseme views") {
  const ClassMap pm = ClassMap::phonemes({"p", "b", "s"});
  CHECK(pm.size() == 3);
  CHECK(pm.class_of("b") == 1);
  CHECK_FALSE(pm.is_viseme_map());
  CHECK_THROWS_AS(pm.class_of("z"), DataError);
  CHECK_THROWS_AS(ClassMap::phonemes({"p"}), ParameterError);

  const ClassMap vmap = ClassMap::visemes({"p", "b", "s", "z"}, VisemeMap::standard());
  CHECK(vmap.size() == 2);
  CHECK(vmap.is_viseme_map());
  CHECK(vmap.class_of("p") == vmap.class_of("b"));
  CHECK(vmap.class_of("s") == vmap.class_of("z"));
  CHECK(vmap.class_of("p") != vmap.class_of("s"));
}
