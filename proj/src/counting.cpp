// counting.cpp

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

#include "scoh/counting.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "scoh/tensor_io.hpp"

namespace scoh {

std::string VariantName(CountVariant v) {
  switch (v) {
    case CountVariant::kBaseline1: return "baseline1";
    case CountVariant::kBaseline2: return "baseline2";
    case CountVariant::kProposal1: return "proposal1";
    case CountVariant::kProposal2: return "proposal2";
  }
  return "unknown";
}

CountVariant ParseVariant(const std::string &name) {
  for (CountVariant v : kAllVariants)
    if (VariantName(v) == name) return v;
  Fail(ErrorKind::kConfiguration, "unknown counting variant '" + name + "'");
}

bool UsesCoherence(CountVariant v) {
  return v == CountVariant::kProposal1 || v == CountVariant::kProposal2;
}

bool UsesSimilarity(CountVariant v) {
  return v == CountVariant::kBaseline2 || v == CountVariant::kProposal2;
}

int FeatureLength(CountVariant v) {
  if (v == CountVariant::kBaseline1) return kMaxHypothesis;
  return UsesSimilarity(v) ? 2 * (kMaxHypothesis - 1) : kMaxHypothesis - 1;
}

Eigen::VectorXd EigenFeature(const EigenDecomposition &eig, CountVariant v) {
  Require(eig.values.size() >= kMaxHypothesis, ErrorKind::kSize,
          "counting needs at least 4 frames");
  if (v == CountVariant::kBaseline1) return eig.values.head(kMaxHypothesis);
  const double top = eig.values(0);
  Require(top > 0.0, ErrorKind::kDegenerate, "leading eigenvalue is not positive");
  return eig.values.segment(1, kMaxHypothesis - 1) / top;
}

Eigen::VectorXd SimilarityFeatures(const EigenDecomposition &eig, int j_prime) {
  Require(j_prime >= 2 && eig.values.size() >= j_prime, ErrorKind::kSize,
          "similarity features need at least j' frames");
  Eigen::VectorXd out(j_prime - 1);
  for (int j = 2; j <= j_prime; ++j) {
    double gamma = 1.0;
    try {
      const Eigen::MatrixXd p = EstimateActivities(eig, j).p;
      const Eigen::VectorXd norms = p.colwise().norm();
      if (norms.minCoeff() <= 0.0) {
        Warn("speaker hypothesis " + std::to_string(j) + " has an empty activity; similarity set to 1");
      } else {
        const Eigen::MatrixXd unit = p * norms.cwiseInverse().asDiagonal();
        Eigen::MatrixXd gram = unit.transpose() * unit;
        gram.diagonal().setConstant(-1.0);
        gamma = std::clamp(gram.maxCoeff(), -1.0, 1.0);
      }
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::kDegenerate) throw;
      Warn("degenerate simplex at hypothesis " + std::to_string(j) + "; similarity set to 1");
    }
    out(j - 2) = gamma;
  }
  return out;
}

SpatialMatrix VariantMatrix(const Spectrogram &spec, CountVariant v) {
  Require(spec.num_channels() >= 2, ErrorKind::kConfiguration, "counting needs at least 2 mics");
  const BandSelection band = BandSelection::FromRange(spec.config, spec.sample_rate);
  if (UsesCoherence(v)) return CoherenceMatrix(ComputeWrtfFeatures(spec, band));
  return CorrelationMatrix(ComputeRtfFeatures(spec, band));
}

namespace {

Eigen::VectorXd FeatureFromEig(const EigenDecomposition &eig, CountVariant v) {
  Eigen::VectorXd ev = EigenFeature(eig, v);
  if (!UsesSimilarity(v)) return ev;
  Eigen::VectorXd out(FeatureLength(v));
  out << ev, SimilarityFeatures(eig);
  return out;
}

}  // namespace

Eigen::VectorXd AssembleFeature(const Spectrogram &spec, CountVariant v) {
  return FeatureFromEig(EigSym(VariantMatrix(spec, v), EigenMethod::kTridiagonalQr), v);
}

std::array<Eigen::VectorXd, 4> AssembleAllFeatures(const Spectrogram &spec) {
  const EigenDecomposition corr =
      EigSym(VariantMatrix(spec, CountVariant::kBaseline1), EigenMethod::kTridiagonalQr);
  const EigenDecomposition coh =
      EigSym(VariantMatrix(spec, CountVariant::kProposal1), EigenMethod::kTridiagonalQr);
  std::array<Eigen::VectorXd, 4> out;
  for (size_t i = 0; i < kAllVariants.size(); ++i) {
    CountVariant v = kAllVariants[i];
    out[i] = FeatureFromEig(UsesCoherence(v) ? coh : corr, v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classifier

ScnetModel::ScnetModel(CountVariant variant, int input_width, int hidden, uint64_t seed)
    : variant_(variant) {
  std::mt19937_64 rng(seed);
  l1_ = nn::Dense(input_width, hidden, rng);
  l2_ = nn::Dense(hidden, hidden, rng);
  l3_ = nn::Dense(hidden, kMaxHypothesis, rng);
  mean_ = Eigen::VectorXd::Zero(input_width);
  scale_ = Eigen::VectorXd::Ones(input_width);
}

void ScnetModel::SetStandardization(Eigen::VectorXd mean, Eigen::VectorXd scale) {
  Require(mean.size() == input_width() && scale.size() == input_width(), ErrorKind::kSize,
          "standardization width mismatch");
  Require((scale.array() > 0.0).all(), ErrorKind::kContract, "standardization scale must be positive");
  mean_ = std::move(mean);
  scale_ = std::move(scale);
}

std::vector<nn::Tensor> ScnetModel::parameters() const {
  return {l1_.weight, l1_.bias, l2_.weight, l2_.bias, l3_.weight, l3_.bias};
}

nn::Tensor ScnetModel::Logits(const Eigen::MatrixXd &features) const {
  Require(features.cols() == input_width(), ErrorKind::kSize,
          "feature width " + std::to_string(features.cols()) + " does not match model input " +
              std::to_string(input_width()));
  Eigen::MatrixXd x = (features.rowwise() - mean_.transpose()).array().rowwise() /
                      scale_.transpose().array();
  nn::Tensor h = nn::Relu(l1_(nn::Tensor::Constant(x)));
  h = nn::Relu(l2_(h));
  return l3_(h);
}

Eigen::Vector4d ScnetModel::Probabilities(const Eigen::VectorXd &feature) const {
  nn::Tensor p = nn::Softmax(Logits(feature.transpose()));
  return p.matrix().row(0).transpose();
}

void ScnetModel::Save(const std::string &path) const {
  TensorFile file;
  file.kind = "scnet";
  file.meta["variant"] = VariantName(variant_);
  file.meta["input_width"] = std::to_string(input_width());
  file.meta["hidden"] = std::to_string(l1_.weight.dim(1));
  file.tensors.push_back({"input.mean", {mean_.size()}, mean_});
  file.tensors.push_back({"input.scale", {scale_.size()}, scale_});
  const char *names[] = {"dense1", "dense2", "dense3"};
  const nn::Dense *layers[] = {&l1_, &l2_, &l3_};
  for (int i = 0; i < 3; ++i) {
    file.tensors.push_back({std::string(names[i]) + ".weight", layers[i]->weight.shape(),
                            layers[i]->weight.value()});
    file.tensors.push_back({std::string(names[i]) + ".bias", layers[i]->bias.shape(),
                            layers[i]->bias.value()});
  }
  WriteTensorFile(file, path);
}

ScnetModel ScnetModel::Load(const std::string &path) {
  TensorFile file = ReadTensorFile(path);
  Require(file.kind == "scnet", ErrorKind::kFormat, "'" + path + "' is not a counting model");
  ScnetModel model(ParseVariant(file.Meta("variant")), std::stoi(file.Meta("input_width")),
                   std::stoi(file.Meta("hidden")), 0);
  const char *names[] = {"dense1", "dense2", "dense3"};
  for (int i = 0; i < 3; ++i) {
    LoadInto(model.layer(i).weight, file.Get(std::string(names[i]) + ".weight"));
    LoadInto(model.layer(i).bias, file.Get(std::string(names[i]) + ".bias"));
  }
  model.SetStandardization(file.Get("input.mean").data, file.Get("input.scale").data);
  return model;
}

namespace {

Eigen::MatrixXd Rows(const Eigen::MatrixXd &m, const std::vector<Index> &idx) {
  Eigen::MatrixXd out(idx.size(), m.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

std::vector<int> ZeroBased(const std::vector<int> &labels, const std::vector<Index> &idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(labels[i] - 1);
  return out;
}

}  // namespace

ScnetModel TrainScnet(const Eigen::MatrixXd &features, const std::vector<int> &labels,
                      CountVariant variant, const ScnetTrainConfig &cfg, uint64_t seed,
                      std::vector<EpochRecord> *curve) {
  const Index n = features.rows();
  Require(n > 0, ErrorKind::kContract, "empty training set");
  Require(static_cast<Index>(labels.size()) == n, ErrorKind::kContract, "one label per feature row");
  Require(features.cols() == FeatureLength(variant), ErrorKind::kSize,
          "feature width does not match variant " + VariantName(variant));
  for (int y : labels)
    Require(y >= 1 && y <= kMaxHypothesis, ErrorKind::kContract, "labels must be in 1..4");
  Require(std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) != labels.end(),
          ErrorKind::kContract, "training needs at least two classes");

  std::mt19937_64 rng(seed);
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Index n_val = static_cast<Index>(std::floor(cfg.validation_fraction * n));
  if (n_val >= n) n_val = n - 1;
  std::vector<Index> train(order.begin(), order.end() - n_val);
  std::vector<Index> val(order.end() - n_val, order.end());
  if (val.empty()) val = train;

  const Eigen::MatrixXd xtrain = Rows(features, train);
  Eigen::VectorXd mean = xtrain.colwise().mean().transpose();
  Eigen::VectorXd scale =
      ((xtrain.rowwise() - mean.transpose()).cwiseAbs2().colwise().mean().transpose()).cwiseSqrt();
  for (Index i = 0; i < scale.size(); ++i)
    if (!(scale(i) > 1e-12)) scale(i) = 1.0;

  ScnetModel model(variant, static_cast<int>(features.cols()), cfg.hidden, rng());
  model.SetStandardization(mean, scale);
  auto params = model.parameters();
  nn::Adam adam(params, cfg.adam);

  const Eigen::MatrixXd xval = Rows(features, val);
  const std::vector<int> yval = ZeroBased(labels, val);
  auto validation_loss = [&] { return nn::SoftmaxCrossEntropy(model.Logits(xval), yval).item(); };

  double best = validation_loss();
  std::vector<Eigen::VectorXd> best_values;
  for (const auto &p : params) best_values.push_back(p.value());
  int since_best = 0, since_lr = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double total = 0.0;
    for (size_t start = 0; start < train.size(); start += cfg.batch_size) {
      size_t stop = std::min(train.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<Index> batch(train.begin() + start, train.begin() + stop);
      adam.ZeroGrad();
      nn::Tensor loss = nn::SoftmaxCrossEntropy(model.Logits(Rows(features, batch)), ZeroBased(labels, batch));
      loss.Backward();
      adam.Step();
      total += loss.item() * static_cast<double>(batch.size());
    }
    const double vloss = validation_loss();
    if (curve) curve->push_back({epoch, total / train.size(), vloss, adam.learning_rate()});

    if (vloss < best - 1e-12) {
      best = vloss;
      for (size_t i = 0; i < params.size(); ++i) best_values[i] = params[i].value();
      since_best = since_lr = 0;
    } else {
      ++since_best;
      if (++since_lr >= cfg.lr_patience) {
        adam.set_learning_rate(adam.learning_rate() * 0.5);
        since_lr = 0;
      }
      if (since_best >= cfg.early_stop_patience) break;
    }
  }
  for (size_t i = 0; i < params.size(); ++i) params[i].value() = best_values[i];
  return model;
}

int PredictCount(const Eigen::Vector4d &probabilities) {
  int best = 0;
  for (int k = 1; k < kMaxHypothesis; ++k)
    if (probabilities(k) >= probabilities(best)) best = k;
  return best + 1;
}

int CountSpeakers(const MultichannelClip &clip, const ScnetModel &model) {
  const Spectrogram spec = Stft(clip);
  return PredictCount(model.Probabilities(AssembleFeature(spec, model.variant())));
}

void WriteCurveCsv(const std::vector<EpochRecord> &curve, std::ostream &out) {
  out << "epoch,train_loss,validation_loss,learning_rate\n" << std::setprecision(9);
  for (const auto &r : curve)
    out << r.epoch << ',' << r.train_loss << ',' << r.validation_loss << ',' << r.learning_rate << '\n';
}

}  // namespace scoh
