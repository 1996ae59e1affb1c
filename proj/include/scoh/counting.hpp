// scoh/counting.hpp

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

// Speaker counting from the eigen-structure of a spatial matrix. Four feature
// variants: baseline1 (raw eigenvalues of W), baseline2 (normalized
// eigenvalues plus maximum activity similarity, from W), proposal1 and
// proposal2 (the same two layouts computed from the coherence matrix).

#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scoh/micrograd.hpp"
#include "scoh/signal_io.hpp"
#include "scoh/simplex.hpp"
#include "scoh/spatial_features.hpp"

namespace scoh {

/// Largest hypothesised speaker count J'.
constexpr int kMaxHypothesis = 4;

enum class CountVariant { kBaseline1, kBaseline2, kProposal1, kProposal2 };

constexpr std::array<CountVariant, 4> kAllVariants = {
    CountVariant::kBaseline1, CountVariant::kBaseline2, CountVariant::kProposal1,
    CountVariant::kProposal2};

std::string VariantName(CountVariant v);
CountVariant ParseVariant(const std::string &name);
int FeatureLength(CountVariant v);
/// baseline variants use W, proposal variants use the coherence matrix.
bool UsesCoherence(CountVariant v);
bool UsesSimilarity(CountVariant v);

/// baseline1: [l1 .. l4]; others: [l2 .. l4] / l1.
Eigen::VectorXd EigenFeature(const EigenDecomposition &eig, CountVariant v);

/// [g^2, g^3, g^4]: for each hypothesis j the largest off-diagonal cosine
/// between recovered activity columns. A degenerate simplex gives 1.0.
Eigen::VectorXd SimilarityFeatures(const EigenDecomposition &eig, int j_prime = kMaxHypothesis);

/// W or coherence matrix for the variant, over the 1-3 kHz band.
SpatialMatrix VariantMatrix(const Spectrogram &spec, CountVariant v);

/// Feature vector of one clip for one variant.
Eigen::VectorXd AssembleFeature(const Spectrogram &spec, CountVariant v);

/// All four variants from one spectrogram, sharing the two decompositions.
std::array<Eigen::VectorXd, 4> AssembleAllFeatures(const Spectrogram &spec);

// ---------------------------------------------------------------------------
// Classifier

struct ScnetTrainConfig {
  int hidden = 64;
  int max_epochs = 100;
  int batch_size = 32;
  int early_stop_patience = 10;
  int lr_patience = 3;           // halve the learning rate after this many flat epochs
  double validation_fraction = 0.2;
  nn::AdamConfig adam;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double learning_rate = 0.0;
};

/// Dense(F, 64) -> ReLU -> Dense(64, 64) -> ReLU -> Dense(64, 4) -> softmax.
/// Inputs are standardized with statistics stored alongside the weights.
class ScnetModel {
 public:
  ScnetModel() = default;
  ScnetModel(CountVariant variant, int input_width, int hidden, uint64_t seed);

  CountVariant variant() const { return variant_; }
  int input_width() const { return static_cast<int>(l1_.weight.dim(0)); }

  /// Logits for a batch of raw features, one row per sample.
  nn::Tensor Logits(const Eigen::MatrixXd &features) const;
  /// Class probabilities for count 1..4.
  Eigen::Vector4d Probabilities(const Eigen::VectorXd &feature) const;

  void SetStandardization(Eigen::VectorXd mean, Eigen::VectorXd scale);
  std::vector<nn::Tensor> parameters() const;
  nn::Dense &layer(int i) { return i == 0 ? l1_ : (i == 1 ? l2_ : l3_); }

  void Save(const std::string &path) const;
  static ScnetModel Load(const std::string &path);

 private:
  CountVariant variant_ = CountVariant::kProposal2;
  nn::Dense l1_, l2_, l3_;
  Eigen::VectorXd mean_, scale_;
};

/// features [N x F], labels in 1..4. Holds out a validation split, halves the
/// learning rate on plateaus, stops early, and returns the best-validation
/// weights.
ScnetModel TrainScnet(const Eigen::MatrixXd &features, const std::vector<int> &labels,
                      CountVariant variant, const ScnetTrainConfig &cfg, uint64_t seed,
                      std::vector<EpochRecord> *curve = nullptr);

/// argmax + 1, ties resolved toward the larger count.
int PredictCount(const Eigen::Vector4d &probabilities);

int CountSpeakers(const MultichannelClip &clip, const ScnetModel &model);

void WriteCurveCsv(const std::vector<EpochRecord> &curve, std::ostream &out);

}  // namespace scoh
