// test_gladlite.cpp

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

#include <filesystem>
#include <random>

#include "doctest.h"
#include "scoh/dataset.hpp"
#include "scoh/error.hpp"
#include "scoh/gladlite.hpp"
#include "support.hpp"

using namespace scoh;

namespace {

// 33 bins keeps every test well under a second.
GladLiteConfig TinyConfig() {
  GladLiteConfig cfg;
  cfg.stft = StftConfig{64, 16, 64, WindowKind::kSqrtHann};
  cfg.num_bins = cfg.stft.num_bins();
  cfg.channels1 = 3;
  cfg.channels2 = 4;
  cfg.bottleneck = 8;
  cfg.rnn_hidden = 6;
  return cfg;
}

GladSample RandomSample(const GladLiteConfig &cfg, Index frames, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](Index r, Index c) { return Eigen::MatrixXd(Eigen::MatrixXd::NullaryExpr(r, c, [&] { return u(rng); })); };
  GladSample s;
  s.mixture_mag = draw(frames, cfg.num_bins) * 2.0;
  s.target_mag = s.mixture_mag.cwiseProduct(draw(frames, cfg.num_bins));
  s.coherence = draw(frames, cfg.num_bins) * 2.0 - Eigen::MatrixXd::Ones(frames, cfg.num_bins);
  s.activity = draw(frames, 1).col(0).unaryExpr([](double v) { return v > 0.5 ? 1.0 : 0.0; });
  return s;
}

}  // namespace

TEST_SUITE("gladlite") {
  TEST_CASE("default geometry") {
    GladLiteConfig cfg;
    CHECK(cfg.num_bins == 257);
    CHECK(cfg.freq1() == 128);
    CHECK(cfg.freq2() == 63);
    CHECK_NOTHROW(cfg.Validate());
    CHECK_NOTHROW(TinyConfig().Validate());
  }

  TEST_CASE("invalid configurations are rejected") {
    GladLiteConfig cfg = TinyConfig();
    cfg.stride = 0;
    CHECK_THROWS_AS(cfg.Validate(), Error);
    cfg = TinyConfig();
    cfg.num_bins = 2;
    CHECK_THROWS_AS(cfg.Validate(), Error);
    cfg = TinyConfig();
    cfg.rnn_hidden = 0;
    CHECK_THROWS_AS(cfg.Validate(), Error);
    cfg = TinyConfig();
    cfg.num_bins = cfg.stft.num_bins() + 1;
    CHECK_THROWS_AS(cfg.Validate(), Error);
  }

  TEST_CASE("mask shape and range") {
    const GladLiteConfig cfg = TinyConfig();
    GladLiteModel model(cfg, 3);
    for (Index frames : {1, 7, 20}) {
      GladSample s = RandomSample(cfg, frames, 10 + frames);
      nn::Tensor mask = model.Forward(s.mixture_mag, s.activity, s.coherence);
      REQUIRE(mask.shape() == nn::Shape{cfg.num_bins, frames});
      CHECK(mask.value().minCoeff() > 0.0);
      CHECK(mask.value().maxCoeff() < 1.0);
      Eigen::MatrixXd lf = model.Mask(s.mixture_mag, s.activity, s.coherence);
      REQUIRE(lf.rows() == frames);
      REQUIRE(lf.cols() == cfg.num_bins);
      CHECK((lf - mask.matrix().transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("the mask depends on the activity input") {
    const GladLiteConfig cfg = TinyConfig();
    GladLiteModel model(cfg, 4);
    GladSample s = RandomSample(cfg, 12, 5);
    Eigen::MatrixXd on = model.Mask(s.mixture_mag, Eigen::VectorXd::Ones(12), s.coherence);
    Eigen::MatrixXd off = model.Mask(s.mixture_mag, Eigen::VectorXd::Zero(12), s.coherence);
    CHECK((on - off).cwiseAbs().maxCoeff() > 0.0);
  }

  TEST_CASE("initialization is seeded") {
    const GladLiteConfig cfg = TinyConfig();
    GladSample s = RandomSample(cfg, 9, 6);
    Eigen::MatrixXd a = GladLiteModel(cfg, 11).Mask(s.mixture_mag, s.activity, s.coherence);
    Eigen::MatrixXd b = GladLiteModel(cfg, 11).Mask(s.mixture_mag, s.activity, s.coherence);
    Eigen::MatrixXd c = GladLiteModel(cfg, 12).Mask(s.mixture_mag, s.activity, s.coherence);
    CHECK(a == b);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  }

  TEST_CASE("input validation") {
    const GladLiteConfig cfg = TinyConfig();
    GladLiteModel model(cfg, 1);
    GladSample s = RandomSample(cfg, 8, 2);
    CHECK_THROWS_AS(model.Forward(s.mixture_mag.leftCols(cfg.num_bins - 1), s.activity, s.coherence), Error);
    CHECK_THROWS_AS(model.Forward(s.mixture_mag, s.activity.head(7), s.coherence), Error);
    CHECK_THROWS_AS(model.Forward(s.mixture_mag, s.activity, s.coherence.topRows(7)), Error);
    Eigen::MatrixXd negative = s.mixture_mag;
    negative(0, 0) = -1.0;
    CHECK_THROWS_AS(model.Forward(negative, s.activity, s.coherence), Error);
    GladSample bad = s;
    bad.target_mag = s.target_mag.topRows(7);
    CHECK_THROWS_AS(GladLiteLoss(model, bad), Error);
  }

  TEST_CASE("loss equals the compressed error of the masked mixture") {
    const GladLiteConfig cfg = TinyConfig();
    GladLiteModel model(cfg, 8);
    GladSample s = RandomSample(cfg, 6, 9);
    Eigen::MatrixXd mask = model.Mask(s.mixture_mag, s.activity, s.coherence);
    double expected = 0.0;
    for (Index l = 0; l < mask.rows(); ++l)
      for (Index f = 0; f < mask.cols(); ++f) {
        double est = std::pow(std::max(mask(l, f) * s.mixture_mag(l, f), 1e-8), 0.3);
        double ref = std::pow(std::max(s.target_mag(l, f), 1e-8), 0.3);
        expected += (est - ref) * (est - ref);
      }
    CHECK(GladLiteLoss(model, s).item() == doctest::Approx(expected).epsilon(1e-9));
  }

  TEST_CASE("training lowers the loss and is deterministic") {
    const GladLiteConfig cfg = TinyConfig();
    std::vector<GladSample> samples{RandomSample(cfg, 24, 21), RandomSample(cfg, 30, 22)};
    GladTrainConfig train;
    train.epochs = 15;
    train.segment_frames = 16;
    train.adam.learning_rate = 1e-2;
    std::vector<GladEpochRecord> curve;
    GladLiteModel model = TrainGladLite(samples, cfg, train, 7, &curve);
    REQUIRE(curve.size() == 16u);
    CHECK(curve.front().epoch == 0);
    double final_loss = 0.0;
    for (const auto &s : samples) final_loss += GladLiteLoss(model, s).item();
    final_loss /= samples.size();
    CHECK(final_loss < 0.7 * curve.front().mean_loss);

    GladLiteModel again = TrainGladLite(samples, cfg, train, 7);
    const auto &s = samples[0];
    CHECK(model.Mask(s.mixture_mag, s.activity, s.coherence) == again.Mask(s.mixture_mag, s.activity, s.coherence));
    CHECK_THROWS_AS(TrainGladLite({}, cfg, train, 7), Error);
  }

  TEST_CASE("a zero learning rate leaves the loss flat") {
    const GladLiteConfig cfg = TinyConfig();
    std::vector<GladSample> samples{RandomSample(cfg, 10, 31)};
    GladTrainConfig train;
    train.epochs = 8;
    train.lr_patience = 1;
    train.adam.learning_rate = 0.0;
    std::vector<GladEpochRecord> curve;
    TrainGladLite(samples, cfg, train, 1, &curve);
    for (const auto &r : curve) CHECK(r.learning_rate == 0.0);
    for (size_t e = 1; e < curve.size(); ++e) CHECK(curve[e].mean_loss == doctest::Approx(curve[0].mean_loss));
  }

  TEST_CASE("save and load reproduce the mask") {
    const GladLiteConfig cfg = TinyConfig();
    GladLiteModel model(cfg, 13);
    const std::string path = (std::filesystem::temp_directory_path() / "scoh_glad_test.model").string();
    model.Save(path);
    GladLiteModel loaded = GladLiteModel::Load(path);
    CHECK(loaded.config().num_bins == cfg.num_bins);
    CHECK(loaded.config().stft.frame_len == 64);
    CHECK(loaded.config().rnn_hidden == cfg.rnn_hidden);
    GladSample s = RandomSample(cfg, 10, 14);
    Eigen::MatrixXd a = model.Mask(s.mixture_mag, s.activity, s.coherence);
    Eigen::MatrixXd b = loaded.Mask(s.mixture_mag, s.activity, s.coherence);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-5);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(GladLiteModel::Load(path), Error);
  }

  TEST_CASE("training samples from a simulated clip") {
    GladLiteConfig cfg;
    cfg.channels1 = 2;
    cfg.channels2 = 2;
    cfg.bottleneck = 4;
    cfg.rnn_hidden = 2;
    ScenarioParams params;
    params.num_speakers = 2;
    params.overlap = 0.2;
    params.clip_len_s = 2.0;
    params.array = "ula4-8cm";
    SimulatedClip sim = SimulateClip(params, 20.0, 3);
    const Mixture &mix = sim.mixture;
    auto samples = BuildGladSamples(mix.clip, mix.truth.images, mix.truth.OracleActivity(), cfg);
    REQUIRE(samples.size() == 2u);
    const Index frames = cfg.stft.NumFrames(mix.clip.num_samples());
    for (const auto &s : samples) {
      CHECK(s.mixture_mag.rows() == frames);
      CHECK(s.mixture_mag.cols() == cfg.num_bins);
      CHECK(s.target_mag.rows() == frames);
      CHECK(s.coherence.rows() == frames);
      CHECK(s.activity.size() == frames);
      CHECK(s.coherence.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
      CHECK(s.activity.minCoeff() >= 0.0);
      CHECK(s.activity.maxCoeff() <= 1.0);
      CHECK(s.activity.sum() > 0.0);
    }
    CHECK(samples[0].mixture_mag == samples[1].mixture_mag);
    CHECK_THROWS_AS(BuildGladSamples(mix.clip, mix.truth.images.topRows(1), mix.truth.OracleActivity(), cfg), Error);
  }
}
