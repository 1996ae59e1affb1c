// scoh/gladlite.hpp

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

// Reduced activity-driven mask network. Two strided convolutions encode the
// (compressed magnitude, local coherence) pair, a dense bottleneck receives
// the speaker's global activity per frame, a bidirectional recurrence runs
// over frames, and a mirrored decoder with 1x1 pathway skips produces a
// sigmoid mask over frequency.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "scoh/micrograd.hpp"
#include "scoh/signal_io.hpp"

namespace scoh {

struct GladLiteConfig {
  int num_bins = 257;
  int channels1 = 8;
  int channels2 = 16;
  int kernel_freq = 3;
  int kernel_time = 2;
  int stride = 2;
  int bottleneck = 256;
  int rnn_hidden = 64;
  double input_compression = 0.3;  // magnitude channel is |X|^c
  StftConfig stft = StftConfig::Small();

  int freq1() const { return (num_bins - kernel_freq) / stride + 1; }
  int freq2() const { return (freq1() - kernel_freq) / stride + 1; }
  void Validate() const;
};

/// One training example: every matrix is [L x F].
struct GladSample {
  Eigen::MatrixXd mixture_mag;
  Eigen::VectorXd activity;  // [L]
  Eigen::MatrixXd coherence;
  Eigen::MatrixXd target_mag;
};

/// One sample per speaker from a mixture, its reference-mic speaker images
/// [J x N] and global activities [L x J] at the default framing. Local
/// coherence comes from RTFs estimated with those activities.
std::vector<GladSample> BuildGladSamples(const MultichannelClip &mixture, const Eigen::MatrixXd &images,
                                         const Eigen::MatrixXd &activity, const GladLiteConfig &cfg);

class GladLiteModel {
 public:
  GladLiteModel() = default;
  GladLiteModel(const GladLiteConfig &cfg, uint64_t seed);

  const GladLiteConfig &config() const { return cfg_; }

  /// Mask tensor [F x L] with entries in (0, 1).
  nn::Tensor Forward(const Eigen::MatrixXd &mag, const Eigen::VectorXd &activity,
                     const Eigen::MatrixXd &coherence) const;
  /// Mask as [L x F].
  Eigen::MatrixXd Mask(const Eigen::MatrixXd &mag, const Eigen::VectorXd &activity,
                       const Eigen::MatrixXd &coherence) const;

  std::vector<std::pair<std::string, nn::Tensor>> named_parameters() const;
  std::vector<nn::Tensor> parameters() const;

  void Save(const std::string &path) const;
  static GladLiteModel Load(const std::string &path);

 private:
  GladLiteConfig cfg_;
  nn::Conv2dLayer enc1_, enc2_;
  nn::Dense squeeze_, expand_;
  nn::BiRnn rnn_;
  nn::Conv2dLayer path1_, path2_;
  nn::ConvTranspose2dLayer dec2_, dec1_;
};

/// Compressed MSE between the target and mask * mixture magnitude.
nn::Tensor GladLiteLoss(const GladLiteModel &model, const GladSample &sample, double c = 0.3);

struct GladTrainConfig {
  int epochs = 20;
  int lr_patience = 3;
  int segment_frames = 128;  // frames per update; 0 trains on whole samples
  nn::AdamConfig adam;
};

struct GladEpochRecord {
  int epoch = 0;         // 0 = before any update
  double mean_loss = 0.0;
  double learning_rate = 0.0;
};

/// One update per sample, shuffled each epoch; the learning rate halves when
/// the epoch loss has not improved for lr_patience epochs.
GladLiteModel TrainGladLite(const std::vector<GladSample> &samples, const GladLiteConfig &cfg,
                            const GladTrainConfig &train, uint64_t seed,
                            std::vector<GladEpochRecord> *curve = nullptr);

}  // namespace scoh
