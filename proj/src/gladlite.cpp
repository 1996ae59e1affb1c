// gladlite.cpp

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

#include "scoh/gladlite.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "scoh/separation.hpp"
#include "scoh/tensor_io.hpp"

namespace scoh {

using nn::Tensor;

void GladLiteConfig::Validate() const {
  Require(kernel_freq >= 1 && kernel_time >= 1 && stride >= 1, ErrorKind::kConfiguration,
          "mask network kernels and stride must be positive");
  Require(num_bins >= kernel_freq && freq1() >= kernel_freq && freq2() >= 1,
          ErrorKind::kConfiguration, "too few frequency bins for two strided layers");
  Require(channels1 >= 1 && channels2 >= 1 && bottleneck >= 1 && rnn_hidden >= 1,
          ErrorKind::kConfiguration, "mask network widths must be positive");
  Require(num_bins <= stft.num_bins(), ErrorKind::kConfiguration, "mask network bins exceed the STFT");
}

namespace {

// Extra rows a transposed layer needs to restore the encoder's height.
int OutputPad(int target, int input, const GladLiteConfig &cfg) {
  int pad = target - ((input - 1) * cfg.stride + cfg.kernel_freq);
  Require(pad >= 0 && pad < cfg.stride, ErrorKind::kConfiguration, "inconsistent decoder geometry");
  return pad;
}

}  // namespace

GladLiteModel::GladLiteModel(const GladLiteConfig &cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.Validate();
  std::mt19937_64 rng(seed);
  const int kh = cfg.kernel_freq, kw = cfg.kernel_time, s = cfg.stride;
  const Index flat = static_cast<Index>(cfg.channels2) * cfg.freq2();
  enc1_ = nn::Conv2dLayer(2, cfg.channels1, kh, kw, s, rng);
  enc2_ = nn::Conv2dLayer(cfg.channels1, cfg.channels2, kh, kw, s, rng);
  squeeze_ = nn::Dense(flat, cfg.bottleneck, rng);
  rnn_ = nn::BiRnn(cfg.bottleneck + 1, cfg.rnn_hidden, rng);
  expand_ = nn::Dense(2 * cfg.rnn_hidden, flat, rng);
  path2_ = nn::Conv2dLayer(cfg.channels2, cfg.channels2, 1, 1, 1, rng);
  dec2_ = nn::ConvTranspose2dLayer(cfg.channels2, cfg.channels1, kh, kw, s,
                                   OutputPad(cfg.freq1(), cfg.freq2(), cfg), rng);
  path1_ = nn::Conv2dLayer(cfg.channels1, cfg.channels1, 1, 1, 1, rng);
  dec1_ = nn::ConvTranspose2dLayer(cfg.channels1, 1, kh, kw, s,
                                   OutputPad(cfg.num_bins, cfg.freq1(), cfg), rng);
}

Tensor GladLiteModel::Forward(const Eigen::MatrixXd &mag, const Eigen::VectorXd &activity,
                              const Eigen::MatrixXd &coherence) const {
  const Index frames = mag.rows();
  const Index bins = cfg_.num_bins;
  Require(mag.cols() == bins && coherence.rows() == frames && coherence.cols() == bins &&
              activity.size() == frames,
          ErrorKind::kSize, "mask network inputs must be [L x " + std::to_string(bins) + "]");
  Require(frames >= 1, ErrorKind::kSize, "mask network needs at least one frame");
  Require((mag.array() >= 0.0).all(), ErrorKind::kContract, "magnitudes must be nonnegative");

  // {2, F, L}: channel fastest, then frequency, then frame.
  Eigen::VectorXd input(2 * bins * frames);
  for (Index l = 0; l < frames; ++l)
    for (Index f = 0; f < bins; ++f) {
      input(2 * (f + bins * l)) = std::pow(mag(l, f), cfg_.input_compression);
      input(2 * (f + bins * l) + 1) = coherence(l, f);
    }
  Tensor x = Tensor::Constant({2, bins, frames}, std::move(input));
  Tensor act = Tensor::Constant(activity);

  const Index h2 = cfg_.freq2();
  const Index flat = static_cast<Index>(cfg_.channels2) * h2;
  Tensor e1 = nn::Elu(enc1_(x));
  Tensor e2 = nn::Elu(enc2_(e1));
  Tensor z = nn::Elu(squeeze_(nn::Transpose(nn::Reshape(e2, {flat, frames}))));
  Tensor r = rnn_(nn::ConcatCols(z, act));
  Tensor u = nn::Elu(expand_(r));
  Tensor d = nn::Reshape(nn::Transpose(u), {cfg_.channels2, h2, frames});
  d = nn::Elu(dec2_(nn::Add(d, path2_(e2))));
  Tensor out = nn::Sigmoid(dec1_(nn::Add(d, path1_(e1))));
  return nn::Reshape(out, {bins, frames});
}

Eigen::MatrixXd GladLiteModel::Mask(const Eigen::MatrixXd &mag, const Eigen::VectorXd &activity,
                                    const Eigen::MatrixXd &coherence) const {
  return Forward(mag, activity, coherence).matrix().transpose();
}

std::vector<std::pair<std::string, Tensor>> GladLiteModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add = [&out](const std::string &prefix, const std::vector<Tensor> &ps,
                    std::initializer_list<const char *> names) {
    size_t i = 0;
    for (const char *n : names) out.emplace_back(prefix + "." + n, ps.at(i++));
  };
  add("enc1", enc1_.parameters(), {"weight", "bias"});
  add("enc2", enc2_.parameters(), {"weight", "bias"});
  add("squeeze", squeeze_.parameters(), {"weight", "bias"});
  add("rnn", rnn_.parameters(), {"w_in_fwd", "w_rec_fwd", "b_fwd", "w_in_bwd", "w_rec_bwd", "b_bwd"});
  add("expand", expand_.parameters(), {"weight", "bias"});
  add("path2", path2_.parameters(), {"weight", "bias"});
  add("dec2", dec2_.parameters(), {"weight", "bias"});
  add("path1", path1_.parameters(), {"weight", "bias"});
  add("dec1", dec1_.parameters(), {"weight", "bias"});
  return out;
}

std::vector<Tensor> GladLiteModel::parameters() const {
  std::vector<Tensor> out;
  for (auto &[name, t] : named_parameters()) out.push_back(t);
  return out;
}

void GladLiteModel::Save(const std::string &path) const {
  TensorFile file;
  file.kind = "gladlite";
  file.meta["num_bins"] = std::to_string(cfg_.num_bins);
  file.meta["channels1"] = std::to_string(cfg_.channels1);
  file.meta["channels2"] = std::to_string(cfg_.channels2);
  file.meta["kernel_freq"] = std::to_string(cfg_.kernel_freq);
  file.meta["kernel_time"] = std::to_string(cfg_.kernel_time);
  file.meta["stride"] = std::to_string(cfg_.stride);
  file.meta["bottleneck"] = std::to_string(cfg_.bottleneck);
  file.meta["rnn_hidden"] = std::to_string(cfg_.rnn_hidden);
  file.meta["input_compression"] = std::to_string(cfg_.input_compression);
  file.meta["stft"] = std::to_string(cfg_.stft.frame_len) + "/" + std::to_string(cfg_.stft.hop) +
                      "/" + std::to_string(cfg_.stft.fft_len);
  for (const auto &[name, t] : named_parameters()) file.tensors.push_back({name, t.shape(), t.value()});
  WriteTensorFile(file, path);
}

GladLiteModel GladLiteModel::Load(const std::string &path) {
  TensorFile file = ReadTensorFile(path);
  Require(file.kind == "gladlite", ErrorKind::kFormat, "'" + path + "' is not a mask-network model");
  GladLiteConfig cfg;
  cfg.num_bins = std::stoi(file.Meta("num_bins"));
  cfg.channels1 = std::stoi(file.Meta("channels1"));
  cfg.channels2 = std::stoi(file.Meta("channels2"));
  cfg.kernel_freq = std::stoi(file.Meta("kernel_freq"));
  cfg.kernel_time = std::stoi(file.Meta("kernel_time"));
  cfg.stride = std::stoi(file.Meta("stride"));
  cfg.bottleneck = std::stoi(file.Meta("bottleneck"));
  cfg.rnn_hidden = std::stoi(file.Meta("rnn_hidden"));
  cfg.input_compression = std::stod(file.Meta("input_compression"));
  {
    int a = 0, b = 0, c = 0;
    Require(std::sscanf(file.Meta("stft").c_str(), "%d/%d/%d", &a, &b, &c) == 3,
            ErrorKind::kFormat, "bad stft entry in model file");
    cfg.stft = StftConfig{a, b, c, WindowKind::kSqrtHann};
  }
  GladLiteModel model(cfg, 0);
  for (auto &[name, t] : model.named_parameters()) {
    Tensor handle = t;
    LoadInto(handle, file.Get(name));
  }
  return model;
}

std::vector<GladSample> BuildGladSamples(const MultichannelClip &mixture, const Eigen::MatrixXd &images,
                                         const Eigen::MatrixXd &activity, const GladLiteConfig &cfg) {
  Require(images.cols() == mixture.num_samples() && images.rows() == activity.cols(), ErrorKind::kSize,
          "images and activities do not match the mixture");
  Require(cfg.num_bins == cfg.stft.num_bins(), ErrorKind::kConfiguration, "model bins do not match its STFT");
  const Spectrogram spec = Stft(mixture, cfg.stft);
  const Eigen::MatrixXd act =
      ResampleActivity(activity, StftConfig::Default(), cfg.stft, mixture.num_samples());
  const SpeakerRtf rtf = EstimateSpeakerRtf(spec, act, kActivityThreshold, false);
  const auto coherence = LocalCoherence(spec, rtf);
  const Spectrogram targets = Stft(MultichannelClip(images, mixture.sample_rate), cfg.stft);
  std::vector<GladSample> out;
  for (Index j = 0; j < images.rows(); ++j) {
    GladSample s;
    s.mixture_mag = spec.channels[0].cwiseAbs();
    s.activity = act.col(j);
    s.coherence = coherence[j];
    s.target_mag = targets.channels[j].cwiseAbs();
    out.push_back(std::move(s));
  }
  return out;
}

Tensor GladLiteLoss(const GladLiteModel &model, const GladSample &sample, double c) {
  Tensor mask = model.Forward(sample.mixture_mag, sample.activity, sample.coherence);
  Require(sample.target_mag.rows() == sample.mixture_mag.rows() &&
              sample.target_mag.cols() == sample.mixture_mag.cols(),
          ErrorKind::kSize, "target and mixture magnitudes differ in shape");
  Eigen::MatrixXd mix_t = sample.mixture_mag.transpose();
  Eigen::MatrixXd target_t = sample.target_mag.transpose();
  Tensor estimate = nn::Mul(mask, Tensor::Constant(mix_t));
  return nn::CompressedMse(Tensor::Constant(target_t), estimate, c);
}

GladLiteModel TrainGladLite(const std::vector<GladSample> &samples, const GladLiteConfig &cfg,
                            const GladTrainConfig &train, uint64_t seed,
                            std::vector<GladEpochRecord> *curve) {
  Require(!samples.empty(), ErrorKind::kContract, "empty training set");
  std::mt19937_64 rng(seed);
  GladLiteModel model(cfg, rng());
  auto params = model.parameters();
  nn::Adam adam(params, train.adam);

  auto mean_loss = [&] {
    double total = 0.0;
    for (const auto &s : samples) total += GladLiteLoss(model, s).item();
    return total / samples.size();
  };
  double best = mean_loss();
  if (curve) curve->push_back({0, best, adam.learning_rate()});

  // Each update sees one segment of one sample. The loss is a sum over bins,
  // so per-sample segment losses add up to a whole-sample figure.
  // The last segment of a sample is shifted back so it stays full length.
  std::vector<std::pair<size_t, Index>> segments;
  auto length_of = [&](size_t i) {
    const Index frames = samples[i].mixture_mag.rows();
    return train.segment_frames > 0 ? std::min<Index>(train.segment_frames, frames) : frames;
  };
  for (size_t i = 0; i < samples.size(); ++i) {
    const Index frames = samples[i].mixture_mag.rows(), len = length_of(i);
    for (Index start = 0; start < frames; start += len) segments.emplace_back(i, std::min(start, frames - len));
  }
  auto segment = [&](const std::pair<size_t, Index> &seg) {
    const GladSample &s = samples[seg.first];
    const Index len = length_of(seg.first);
    GladSample part;
    part.mixture_mag = s.mixture_mag.middleRows(seg.second, len);
    part.activity = s.activity.segment(seg.second, len);
    part.coherence = s.coherence.middleRows(seg.second, len);
    part.target_mag = s.target_mag.middleRows(seg.second, len);
    return part;
  };

  int flat = 0;
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    std::shuffle(segments.begin(), segments.end(), rng);
    double total = 0.0;
    for (const auto &seg : segments) {
      adam.ZeroGrad();
      Tensor loss = GladLiteLoss(model, segment(seg));
      loss.Backward();
      adam.Step();
      total += loss.item();
    }
    const double epoch_loss = total / samples.size();
    if (curve) curve->push_back({epoch, epoch_loss, adam.learning_rate()});
    if (epoch_loss < best) {
      best = epoch_loss;
      flat = 0;
    } else if (++flat >= train.lr_patience) {
      adam.set_learning_rate(adam.learning_rate() * 0.5);
      flat = 0;
    }
  }
  return model;
}

}  // namespace scoh
