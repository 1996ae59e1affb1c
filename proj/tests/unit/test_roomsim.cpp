// test_roomsim.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <set>

#include "doctest.h"
#include "scoh/error.hpp"
#include "scoh/roomsim.hpp"
#include "support.hpp"

using namespace scoh;

namespace {

RoomSpec TwoMicRoom(double t60) {
  RoomSpec r;
  r.dims = Point3(5.0, 4.0, 3.0);
  r.t60 = t60;
  r.array_positions = {Point3(1.0, 2.0, 1.5), Point3(1.0, 2.1, 1.5)};
  r.source_positions = {Point3(4.43, 2.0, 1.5)};
  return r;
}

// Reverberation time from the backward-integrated energy decay, extrapolating
// the -5 to -35 dB range to 60 dB.
double SchroederT60(const Eigen::VectorXd &h, double fs) {
  Eigen::VectorXd edc(h.size());
  double acc = 0.0;
  for (Index t = h.size() - 1; t >= 0; --t) {
    acc += h(t) * h(t);
    edc(t) = acc;
  }
  auto crossing = [&](double db) {
    const double level = edc(0) * std::pow(10.0, db / 10.0);
    for (Index t = 0; t < edc.size(); ++t)
      if (edc(t) <= level) return t / fs;
    return edc.size() / fs;
  };
  return 2.0 * (crossing(-35.0) - crossing(-5.0));
}

ActivityTimeline Timeline(std::vector<std::vector<Span>> spans, double len) {
  ActivityTimeline tl;
  tl.intervals = std::move(spans);
  tl.clip_len_s = len;
  return tl;
}

}  // namespace

TEST_SUITE("roomsim") {
  TEST_CASE("anechoic direct path has the distance delay and 1/r gain") {
    RoomSpec room = TwoMicRoom(0.0);
    room.array_positions[0] = Point3(0.5, 2.0, 1.5);
    room.source_positions[0] = Point3(3.93, 2.0, 1.5);  // 3.43 m away
    RirSet rirs = SimulateRir(room);
    Eigen::RowVectorXd h = rirs.responses[0].row(0);
    Index peak = 0;
    h.cwiseAbs().maxCoeff(&peak);
    CHECK(peak == 160);
    CHECK(h(peak) == doctest::Approx(1.0 / 3.43).epsilon(1e-6));
  }

  TEST_CASE("equidistant microphones receive identical responses") {
    for (double t60 : {0.0, 0.3}) {
      RoomSpec room = TwoMicRoom(t60);
      room.source_positions[0] = Point3(2.5, 2.0, 1.5);
      room.array_positions = {Point3(2.5, 1.0, 1.5), Point3(2.5, 3.0, 1.5)};
      RirSet rirs = SimulateRir(room);
      const auto &h = rirs.responses[0];
      CHECK((h.row(0) - h.row(1)).norm() <= 1e-9 * h.row(0).norm());
    }
  }

  TEST_CASE("energy decay matches the requested reverberation time") {
    for (double t60 : {0.3, 0.5}) {
      for (Point3 dims : {Point3(5.0, 4.0, 3.0), Point3(7.0, 6.0, 3.0)}) {
        RoomSpec room = TwoMicRoom(t60);
        room.dims = dims;
        room.source_positions[0] = Point3(3.6, 2.9, 1.7);
        RirSet rirs = SimulateRir(room);
        double measured = SchroederT60(rirs.responses[0].row(0).transpose(), rirs.sample_rate);
        CAPTURE(t60);
        CAPTURE(dims.transpose());
        CHECK(measured >= 0.8 * t60);
        CHECK(measured <= 1.2 * t60);
      }
    }
  }

  TEST_CASE("positions outside the room are rejected") {
    RoomSpec room = TwoMicRoom(0.3);
    room.source_positions[0] = Point3(6.0, 1.0, 1.0);
    CHECK_THROWS_AS(SimulateRir(room), Error);
    try {
      SimulateRir(room);
    } catch (const Error &e) {
      CHECK(e.kind() == ErrorKind::kGeometry);
    }
  }

  TEST_CASE("FFT convolution matches direct convolution") {
    Eigen::VectorXd x = test::RandomSignal(1, 300, 3).row(0).transpose();
    Eigen::VectorXd h = test::RandomSignal(1, 41, 4).row(0).transpose();
    Eigen::VectorXd fast = FftConvolve(x, h, 340);
    Eigen::VectorXd slow = test::DirectConvolve(x, h, 340);
    CHECK((fast - slow).norm() <= 1e-10 * slow.norm());
  }

  TEST_CASE("overlap ratio follows interval arithmetic") {
    CHECK(OverlapRatio(Timeline({{{0, 2}}, {{3, 5}}}, 6)) == doctest::Approx(0.0));
    CHECK(OverlapRatio(Timeline({{{1, 4}}, {{1, 4}}}, 6)) == doctest::Approx(1.0));
    CHECK(OverlapRatio(Timeline({{{0, 4}}, {{2, 6}}}, 6)) == doctest::Approx(2.0 / 6.0));
    CHECK(OverlapRatio(Timeline({{{0.5, 5}}}, 6)) == doctest::Approx(0.0));
  }

  TEST_CASE("timelines honour the requested overlap and are seed-deterministic") {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      ActivityTimeline tl = BuildTimeline(2, 0.4, 12.0, 0.2, std::nullopt, seed);
      tl.Validate();
      double r = OverlapRatio(tl);
      CHECK(r >= 0.38);
      CHECK(r <= 0.42);
    }
    CHECK(OverlapRatio(BuildTimeline(1, 0.0, 12.0, 0.2, std::nullopt, 4)) == 0.0);
    ActivityTimeline a = BuildTimeline(3, 0.2, 12.0, 0.2, std::nullopt, 9);
    ActivityTimeline b = BuildTimeline(3, 0.2, 12.0, 0.2, std::nullopt, 9);
    for (int j = 0; j < 3; ++j) {
      REQUIRE(a.intervals[j].size() == b.intervals[j].size());
      for (size_t k = 0; k < a.intervals[j].size(); ++k) {
        CHECK(a.intervals[j][k].start == b.intervals[j][k].start);
        CHECK(a.intervals[j][k].end == b.intervals[j][k].end);
      }
    }
  }

  TEST_CASE("low-activity speaker is active for the requested fraction") {
    ActivityTimeline tl = BuildTimeline(4, 0.0, 12.0, 0.2, 0.05, 3);
    CHECK(tl.ActiveTime(0) == doctest::Approx(0.05 * 12.0).epsilon(0.05));
  }

  TEST_CASE("single anechoic source without noise is the convolved source") {
    RoomSpec room = TwoMicRoom(0.0);
    RirSet rirs = SimulateRir(room);
    const double fs = 16000.0;
    const Index n = 8000;
    Eigen::MatrixXd dry = test::RandomSignal(1, n, 8);
    dry.leftCols(200).setZero();  // keep the onset ramp out of play
    dry.rightCols(200).setZero();
    Mixture mix = SynthesizeMixture({MultichannelClip(dry, fs)}, Timeline({{{0.0, 0.5}}}, 0.5), rirs,
                                    std::numeric_limits<double>::infinity(), 1);
    CHECK(mix.noise.cwiseAbs().maxCoeff() == 0.0);
    for (int m = 0; m < 2; ++m) {
      Eigen::VectorXd expect = test::DirectConvolve(dry.row(0).transpose(), rirs.responses[0].row(m).transpose(), n);
      CHECK((mix.clip.samples.row(m).transpose() - expect).norm() <= 1e-9 * expect.norm());
    }
    CHECK((mix.truth.images.row(0) - mix.clip.samples.row(0)).norm() <= 1e-12);
  }

  TEST_CASE("sensor noise is scaled to the requested SNR") {
    RoomSpec room = TwoMicRoom(0.3);
    RirSet rirs = SimulateRir(room);
    MultichannelClip src = SpeechLikeSource(2.0, 16000.0, 5);
    Mixture mix = SynthesizeMixture({src}, Timeline({{{0.0, 2.0}}}, 2.0), rirs, 20.0, 7);
    Eigen::MatrixXd speech = mix.clip.samples - mix.noise;
    double snr = 10.0 * std::log10(speech.squaredNorm() / mix.noise.squaredNorm());
    CHECK(snr == doctest::Approx(20.0).epsilon(0.005));
  }

  TEST_CASE("disjoint speakers keep their own power in their own spans") {
    RoomSpec room = TwoMicRoom(0.0);
    room.source_positions.push_back(Point3(2.0, 3.5, 1.5));
    RirSet rirs = SimulateRir(room);
    std::vector<MultichannelClip> src = {SpeechLikeSource(4.0, 16000.0, 1), SpeechLikeSource(4.0, 16000.0, 2)};
    Mixture mix = SynthesizeMixture(src, Timeline({{{0.0, 1.8}}, {{2.2, 4.0}}}, 4.0), rirs,
                                    std::numeric_limits<double>::infinity(), 3);
    auto power = [](const Eigen::VectorXd &x, Index a, Index b) { return x.segment(a, b - a).squaredNorm(); };
    Eigen::VectorXd ref = mix.clip.samples.row(0).transpose();
    Eigen::VectorXd s1 = mix.truth.images.row(0).transpose(), s2 = mix.truth.images.row(1).transpose();
    CHECK(power(ref, 0, 30000) == doctest::Approx(power(s1, 0, 30000)).epsilon(0.01));
    CHECK(power(ref, 36000, 64000) == doctest::Approx(power(s2, 36000, 64000)).epsilon(0.01));
  }

  TEST_CASE("dominance labels the loudest image per bin and feeds activities") {
    const Index n = 16000;
    Eigen::MatrixXd images = Eigen::MatrixXd::Zero(2, n);
    Eigen::VectorXd noise = Eigen::VectorXd::Zero(n);
    for (Index t = 0; t < n; ++t) {
      images(0, t) = std::sin(2.0 * std::numbers::pi * 500.0 * t / 16000.0);
      images(1, t) = 0.5 * std::sin(2.0 * std::numbers::pi * 3000.0 * t / 16000.0);
    }
    StftConfig cfg = StftConfig::Default();
    Eigen::MatrixXi dom = ComputeDominance(images, noise, 16000.0, cfg);
    const int f1 = static_cast<int>(std::lround(500.0 * cfg.fft_len / 16000.0));
    const int f2 = static_cast<int>(std::lround(3000.0 * cfg.fft_len / 16000.0));
    CHECK(dom(10, f1) == 1);
    CHECK(dom(10, f2) == 2);

    Eigen::MatrixXi hand(2, 4);
    hand << 0, 1, 1, 2, 2, 2, 2, 0;
    Eigen::MatrixXd act = ActivityFromDominance(hand, 2);
    CHECK(act(0, 0) == doctest::Approx(0.5));
    CHECK(act(0, 1) == doctest::Approx(0.25));
    CHECK(act(1, 0) == doctest::Approx(0.0));
    CHECK(act(1, 1) == doctest::Approx(0.75));
  }

  TEST_CASE("array presets are distinct and placed inside sampled rooms") {
    std::vector<std::string> names = ArrayPresetNames();
    CHECK(names.size() >= 2);
    CHECK(GetArrayPreset("ula8-8cm").offsets.size() == 8);
    CHECK_THROWS_AS(GetArrayPreset("no-such-array"), Error);
    ScenarioParams p;
    p.num_speakers = 3;
    p.overlap = 0.2;
    Scenario sc = SampleScenario(p, 11);
    sc.room.Validate();
    CHECK(sc.room.num_sources() == 3);
    for (size_t a = 0; a < sc.azimuths_deg.size(); ++a)
      for (size_t b = a + 1; b < sc.azimuths_deg.size(); ++b) {
        double d = std::abs(sc.azimuths_deg[a] - sc.azimuths_deg[b]);
        d = std::min(d, 360.0 - d);
        CHECK(d >= p.min_separation_deg - 1e-9);
      }
    Scenario moved = RenderOnArray(sc, names.back());
    moved.room.Validate();
    CHECK(moved.room.num_mics() == static_cast<int>(GetArrayPreset(names.back()).offsets.size()));
    for (int j = 0; j < 3; ++j) CHECK((moved.room.source_positions[j] - sc.room.source_positions[j]).norm() < 1e-12);
  }
}
