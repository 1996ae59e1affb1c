// test_spatial_features.cpp

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

#include "doctest.h"
#include "scoh/dataset.hpp"
#include "scoh/error.hpp"
#include "scoh/roomsim.hpp"
#include "scoh/spatial_features.hpp"
#include "support.hpp"

using namespace scoh;

namespace {

Spectrogram FromChannels(std::vector<Eigen::MatrixXcd> channels) {
  Spectrogram s;
  s.channels = std::move(channels);
  s.config = StftConfig::Small();
  return s;
}

Eigen::MatrixXcd RandomBins(Index frames, Index bins, uint64_t seed) {
  Eigen::MatrixXd re = test::RandomSignal(static_cast<int>(frames), bins, seed);
  Eigen::MatrixXd im = test::RandomSignal(static_cast<int>(frames), bins, seed + 1000);
  return re.cast<std::complex<double>>() + std::complex<double>(0, 1) * im.cast<std::complex<double>>();
}

}  // namespace

TEST_SUITE("spatial_features") {
  TEST_CASE("band selection covers 1 to 3 kHz") {
    BandSelection band = BandSelection::FromRange(StftConfig::Default(), 16000.0);
    REQUIRE(band.size() > 0);
    CHECK(band.bins.front() * 16000.0 / 2048 >= 1000.0);
    CHECK(band.bins.back() * 16000.0 / 2048 <= 3000.0);
    CHECK(band.size() == 257);
  }

  TEST_CASE("identical channels give unit ratios") {
    Eigen::MatrixXcd x = RandomBins(6, 9, 1);
    Spectrogram spec = FromChannels({x, x, x});
    const double eps = 1e-9;
    auto ratios = RtfRatios(spec, eps);
    REQUIRE(ratios.size() == 2);
    for (Index l = 0; l < 6; ++l)
      for (Index f = 0; f < 9; ++f) {
        double p = std::norm(x(l, f));
        CHECK(ratios[0](l, f).real() == doctest::Approx(p / (p + eps)).epsilon(1e-12));
        CHECK(std::abs(ratios[0](l, f).imag()) <= 1e-15);
      }
    auto whitened = WhitenedRatios(spec, eps);
    CHECK((whitened[1].array() - std::complex<double>(1, 0)).abs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("a pure phase shift is recovered as the ratio and whitened feature") {
    Eigen::MatrixXcd x = RandomBins(5, 33, 2);
    const double tau = 2.5e-4;
    Eigen::MatrixXcd y(5, 33);
    for (Index f = 0; f < 33; ++f) {
      std::complex<double> shift = std::polar(1.0, -2.0 * std::numbers::pi * (f * 16000.0 / 64) * tau);
      y.col(f) = x.col(f) * shift;
    }
    Spectrogram spec = FromChannels({x, y});
    auto ratios = RtfRatios(spec, 1e-12);
    auto whitened = WhitenedRatios(spec, 1e-12);
    for (Index f = 0; f < 33; ++f) {
      std::complex<double> expect = std::polar(1.0, -2.0 * std::numbers::pi * (f * 16000.0 / 64) * tau);
      CHECK(std::abs(ratios[0](2, f) - expect) <= 1e-9);
      CHECK(std::abs(whitened[0](2, f) - expect) <= 1e-9);
    }
  }

  TEST_CASE("silent reference bins stay finite and whiten to zero") {
    Eigen::MatrixXcd x = RandomBins(3, 5, 3), y = RandomBins(3, 5, 4);
    x(1, 2) = 0.0;
    y(1, 2) = 0.0;
    Spectrogram spec = FromChannels({x, y});
    auto ratios = RtfRatios(spec, 1e-6);
    CHECK(ratios[0].allFinite());
    CHECK(ratios[0](1, 2) == std::complex<double>(0.0, 0.0));
    CHECK(WhitenedRatios(spec, 1e-6)[0](1, 2) == std::complex<double>(0.0, 0.0));
  }

  TEST_CASE("feature vectors stack mics and band bins") {
    Eigen::MatrixXcd x = RandomBins(4, 20, 5), y = RandomBins(4, 20, 6), z = RandomBins(4, 20, 7);
    Spectrogram spec = FromChannels({x, y, z});
    BandSelection band;
    band.bins = {3, 4, 7};
    const double eps = 1e-9;
    Eigen::MatrixXd r = ComputeRtfFeatures(spec, band, eps);
    Eigen::MatrixXcd rw = ComputeWrtfFeatures(spec, band);
    REQUIRE(r.rows() == 2 * 2 * 3);
    REQUIRE(rw.rows() == 2 * 3);
    REQUIRE(r.cols() == 4);
    for (Index l = 0; l < 4; ++l)
      for (int m = 0; m < 2; ++m)
        for (int k = 0; k < 3; ++k) {
          const auto &xm = m == 0 ? y : z;
          int f = band.bins[k];
          std::complex<double> v = xm(l, f) * std::conj(x(l, f)) / (std::norm(x(l, f)) + eps);
          CHECK(r(m * 3 + k, l) == doctest::Approx(v.real()));
          CHECK(r(6 + m * 3 + k, l) == doctest::Approx(v.imag()));
          std::complex<double> vw = xm(l, f) * std::conj(x(l, f)) /
                                    (std::norm(x(l, f)) + DefaultRtfEps(spec, band));
          CHECK(std::abs(rw(m * 3 + k, l) - vw / std::abs(vw)) <= 1e-12);
        }
  }

  TEST_CASE("correlation matrix matches a brute-force double loop") {
    Eigen::MatrixXd feat = test::RandomSignal(12, 30, 8);
    SpatialMatrix w = CorrelationMatrix(feat);
    CHECK(w.kind == SpatialKind::kCorrelation);
    for (Index l = 0; l < 30; ++l)
      for (Index n = 0; n < 30; ++n) {
        double acc = 0.0;
        for (Index d = 0; d < 12; ++d) acc += feat(d, l) * feat(d, n);
        CHECK(std::abs(w.w(l, n) - acc / 12.0) <= 1e-12);
      }
  }

  TEST_CASE("coherence matrix matches a brute-force double loop") {
    Eigen::MatrixXcd feat = RandomBins(7, 25, 9);
    SpatialMatrix w = CoherenceMatrix(feat);
    CHECK(w.kind == SpatialKind::kCoherence);
    for (Index l = 0; l < 25; ++l)
      for (Index n = 0; n < 25; ++n) {
        std::complex<double> acc = 0.0;
        for (Index d = 0; d < 7; ++d) acc += std::conj(feat(d, l)) * feat(d, n);
        double expect = acc.real() / (feat.col(l).norm() * feat.col(n).norm());
        CHECK(std::abs(w.w(l, n) - expect) <= 1e-12);
      }
  }

  TEST_CASE("coherence extremes") {
    Eigen::MatrixXcd feat(2, 4);
    feat << 1.0, 2.0, -1.0, std::complex<double>(0, 1), 1.0, 2.0, -1.0, 1.0;
    SpatialMatrix w = CoherenceMatrix(feat);
    CHECK(w.w(0, 1) == doctest::Approx(1.0));
    CHECK(w.w(0, 2) == doctest::Approx(-1.0));
    Eigen::MatrixXcd ortho(2, 2);
    ortho << 1.0, 0.0, 0.0, 1.0;
    CHECK(CoherenceMatrix(ortho).w(0, 1) == doctest::Approx(0.0));
  }

  TEST_CASE("MAC basics") {
    Eigen::MatrixXd a = test::RandomSignal(4, 4, 10);
    CHECK(Mac(a, a) == doctest::Approx(1.0));
    CHECK(Mac(a, (-a).eval()) == doctest::Approx(1.0));
    Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(2, 2), e2 = Eigen::MatrixXd::Zero(2, 2);
    e1(0, 0) = 1.0;
    e2(1, 1) = 3.0;
    CHECK(Mac(e1, e2) == doctest::Approx(0.0));
    CHECK_THROWS_AS(Mac(e1, Eigen::MatrixXd::Zero(2, 2).eval()), Error);
    CHECK_THROWS_AS(Mac(e1, Eigen::MatrixXd::Zero(3, 3).eval()), Error);
  }

  TEST_CASE("disjoint anechoic speakers give a block-structured coherence matrix") {
    ScenarioParams p;
    p.num_speakers = 2;
    p.overlap = 0.0;
    p.t60 = 0.0;
    p.clip_len_s = 6.0;
    SimulatedClip clip = SimulateClip(p, std::numeric_limits<double>::infinity(), 21);
    Spectrogram spec = Stft(clip.mixture.clip);
    SpatialMatrix w = CoherenceMatrix(ComputeWrtfFeatures(spec, BandSelection::FromRange(spec.config, 16000.0)));
    Eigen::MatrixXd act = clip.mixture.truth.OracleActivity();
    std::vector<Index> frames[2];
    for (Index l = 0; l < act.rows(); ++l)
      for (int j = 0; j < 2; ++j)
        if (act(l, j) > 0.3 && act(l, 1 - j) == 0.0) frames[j].push_back(l);
    REQUIRE(frames[0].size() > 10);
    REQUIRE(frames[1].size() > 10);
    auto mean = [&](int a, int b) {
      double acc = 0.0;
      for (Index l : frames[a])
        for (Index n : frames[b]) acc += a == b ? w.w(l, n) : std::abs(w.w(l, n));
      return acc / (frames[a].size() * frames[b].size());
    };
    CHECK(mean(0, 1) < mean(0, 0));
    CHECK(mean(0, 1) < mean(1, 1));
  }

  TEST_CASE("raw spatial matrix files round trip") {
    SpatialMatrix w = CorrelationMatrix(test::RandomSignal(3, 7, 12));
    const std::string path = "scoh_unit_matrix.bin";
    WriteSpatialMatrixRaw(w, path);
    SpatialMatrix back = ReadSpatialMatrixRaw(path);
    CHECK(back.kind == w.kind);
    CHECK((back.w - w.w).norm() == 0.0);
    std::remove(path.c_str());
  }
}
