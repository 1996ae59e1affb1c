// separation.cpp

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

#include "scoh/separation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/SVD>

#include "scoh/gladlite.hpp"
#include "scoh/simplex.hpp"

namespace scoh {

using cd = std::complex<double>;

Eigen::MatrixXcd SpeakerRtf::Whitened(int j) const {
  const Eigen::MatrixXcd &a = a_hat.at(j);
  Eigen::MatrixXcd out = a.bottomRows(a.rows() - 1);
  for (Index i = 0; i < out.size(); ++i) {
    double mag = std::abs(out(i));
    out(i) = mag > 0.0 ? out(i) / mag : cd(0.0, 0.0);
  }
  return out;
}

Eigen::MatrixXcd SpeakerRtf::Steering(Index f, const std::vector<int> &speakers) const {
  Eigen::MatrixXcd a(num_mics(), speakers.size());
  for (size_t k = 0; k < speakers.size(); ++k) a.col(k) = a_hat.at(speakers[k]).col(f);
  return a;
}

SpeakerRtf EstimateSpeakerRtf(const Spectrogram &spec, const Eigen::MatrixXd &activity,
                              double threshold, bool strict) {
  Require(spec.num_channels() >= 2, ErrorKind::kConfiguration, "RTF estimation needs at least 2 mics");
  Require(activity.rows() == spec.num_frames(), ErrorKind::kSize,
          "activity frames do not match the spectrogram");
  const int mics = spec.num_channels();
  const Index bins = spec.num_bins();
  const auto &x1 = spec.channels[0];

  SpeakerRtf rtf;
  for (int j = 0; j < activity.cols(); ++j) {
    std::vector<Index> frames;
    for (Index l = 0; l < activity.rows(); ++l)
      if (activity(l, j) > threshold) frames.push_back(l);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Ones(mics, bins);
    if (frames.empty()) {
      Require(!strict, ErrorKind::kLowActivity,
              "speaker " + std::to_string(j + 1) + " has no frame with activity above " +
                  std::to_string(threshold));
      rtf.valid.push_back(false);
    } else {
      Eigen::VectorXd den = Eigen::VectorXd::Zero(bins);
      Eigen::MatrixXcd num = Eigen::MatrixXcd::Zero(mics - 1, bins);
      for (Index l : frames) {
        den += x1.row(l).cwiseAbs2().transpose();
        for (int m = 1; m < mics; ++m)
          num.row(m - 1) += spec.channels[m].row(l).cwiseProduct(x1.row(l).conjugate());
      }
      for (Index f = 0; f < bins; ++f)
        for (int m = 1; m < mics; ++m)
          a(m, f) = den(f) > 0.0 ? num(m - 1, f) / den(f) : cd(0.0, 0.0);
      rtf.valid.push_back(true);
    }
    rtf.a_hat.push_back(std::move(a));
    rtf.frames_used.push_back(std::move(frames));
  }
  return rtf;
}

std::vector<Eigen::MatrixXd> LocalCoherence(const Spectrogram &spec, const SpeakerRtf &rtf) {
  Require(spec.num_channels() == rtf.num_mics() && spec.num_bins() == rtf.num_bins(), ErrorKind::kSize,
          "RTF does not match the spectrogram");
  const BandSelection band = BandSelection::FromRange(spec.config, spec.sample_rate);
  const auto wr = WhitenedRatios(spec, DefaultRtfEps(spec, band));
  const double norm = 1.0 / static_cast<double>(spec.num_channels() - 1);
  std::vector<Eigen::MatrixXd> out;
  for (int j = 0; j < rtf.num_speakers(); ++j) {
    const Eigen::MatrixXcd a = rtf.Whitened(j);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(spec.num_frames(), spec.num_bins());
    for (size_t m = 0; m < wr.size(); ++m)
      p += (wr[m] * a.row(m).conjugate().asDiagonal()).real();
    out.push_back(norm * p);
  }
  return out;
}

Eigen::MatrixXi SpectralMask(const std::vector<Eigen::MatrixXcd> &ratios,
                             const Eigen::MatrixXd &activity) {
  Require(!ratios.empty(), ErrorKind::kConfiguration, "spectral mask needs at least 2 mics");
  const Index frames = ratios[0].rows();
  const Index bins = ratios[0].cols();
  const int speakers = static_cast<int>(activity.cols());
  Require(activity.rows() == frames && speakers >= 1, ErrorKind::kSize,
          "activity does not match the ratios");

  // Class activities including noise, divided by their class normalizers.
  Eigen::MatrixXd p(frames, speakers + 1);
  p.leftCols(speakers) = activity;
  p.col(speakers) = (1.0 - activity.rowwise().sum().array()).cwiseMax(0.0).matrix();
  Eigen::VectorXd pi = p.colwise().sum().transpose();
  std::vector<bool> usable(speakers + 1);
  bool any = false;
  for (int j = 0; j <= speakers; ++j) {
    usable[j] = pi(j) > 0.0;
    if (usable[j]) p.col(j) /= pi(j);
    any = any || usable[j];
  }
  Require(any, ErrorKind::kDegenerate, "every class has zero activity");

  const Index dims = 2 * static_cast<Index>(ratios.size());
  Eigen::MatrixXi mask(frames, bins);
  Eigen::MatrixXd r(frames, dims);
  for (Index f = 0; f < bins; ++f) {
    for (size_t m = 0; m < ratios.size(); ++m) {
      r.col(m) = ratios[m].col(f).real();
      r.col(ratios.size() + m) = ratios[m].col(f).imag();
    }
    const Eigen::VectorXd sq = r.rowwise().squaredNorm();
    Eigen::MatrixXd omega = -2.0 * (r * r.transpose());
    omega.colwise() += sq;
    omega.rowwise() += sq.transpose();
    omega = omega.cwiseMax(0.0).cwiseSqrt();
    omega = (-omega.array()).exp().matrix();
    const Eigen::MatrixXd score = omega * p;
    for (Index l = 0; l < frames; ++l) {
      int best = -1;
      for (int j = 0; j <= speakers; ++j)
        if (usable[j] && (best < 0 || score(l, j) > score(l, best))) best = j;
      mask(l, f) = best + 1;
    }
  }
  return mask;
}

Eigen::MatrixXi SpectralMask(const Spectrogram &spec, const Eigen::MatrixXd &activity) {
  const BandSelection band = BandSelection::FromRange(spec.config, spec.sample_rate);
  return SpectralMask(RtfRatios(spec, DefaultRtfEps(spec, band)), activity);
}

Spectrogram ApplyMask(const Spectrogram &spec, const Eigen::MatrixXi &mask, int j, double beta) {
  Require(spec.num_channels() >= 1 && mask.rows() == spec.num_frames() && mask.cols() == spec.num_bins(),
          ErrorKind::kSize, "mask shape does not match the spectrogram");
  Eigen::MatrixXd gain = (mask.array() == j).select(Eigen::MatrixXd::Ones(mask.rows(), mask.cols()), beta);
  return spec.WithSingleChannel(spec.channels[0].cwiseProduct(gain.cast<cd>()));
}

Eigen::VectorXcd LcmvWeights(const Eigen::MatrixXcd &steering, int j, double max_condition) {
  const Index count = steering.cols();
  Require(j >= 0 && j < count, ErrorKind::kContract, "target speaker out of range");
  Require(steering.rows() >= count, ErrorKind::kConditioning, "more constraints than microphones");
  const Eigen::MatrixXcd gram = steering.adjoint() * steering;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(gram, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto &sv = svd.singularValues();
  Require(sv(count - 1) > 0.0 && sv(0) / sv(count - 1) < max_condition, ErrorKind::kConditioning,
          "steering vectors are nearly dependent");
  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(count);
  g(j) = 1.0;
  return steering * svd.solve(g);
}

LcmvResult LcmvMaskSeparate(const Spectrogram &spec, const SpeakerRtf &rtf,
                            const Eigen::MatrixXi &mask, double beta) {
  Require(spec.num_channels() == rtf.num_mics() && spec.num_bins() == rtf.num_bins(), ErrorKind::kSize,
          "RTF does not match the spectrogram");
  Require(mask.rows() == spec.num_frames() && mask.cols() == spec.num_bins(), ErrorKind::kSize,
          "mask shape does not match the spectrogram");
  const Index frames = spec.num_frames(), bins = spec.num_bins();
  const int mics = spec.num_channels();
  std::vector<int> active;
  for (int j = 0; j < rtf.num_speakers(); ++j)
    if (rtf.valid[j]) active.push_back(j);

  LcmvResult result;
  std::vector<Eigen::MatrixXcd> out(rtf.num_speakers(), Eigen::MatrixXcd(frames, bins));
  for (int j = 0; j < rtf.num_speakers(); ++j)
    if (!rtf.valid[j]) out[j] = spec.channels[0];

  Eigen::MatrixXcd x(mics, frames);
  for (Index f = 0; f < bins; ++f) {
    for (int m = 0; m < mics; ++m) x.row(m) = spec.channels[m].col(f).transpose();
    bool fallback = active.empty();
    std::vector<Eigen::VectorXcd> weights;
    if (!fallback) {
      const Eigen::MatrixXcd a = rtf.Steering(f, active);
      try {
        for (size_t k = 0; k < active.size(); ++k) weights.push_back(LcmvWeights(a, static_cast<int>(k)));
      } catch (const Error &e) {
        if (e.kind() != ErrorKind::kConditioning) throw;
        fallback = true;
      }
    }
    if (fallback) {
      ++result.fallback_bins;
      for (int j : active) out[j].col(f) = spec.channels[0].col(f);
      continue;
    }
    for (size_t k = 0; k < active.size(); ++k)
      out[active[k]].col(f) = (weights[k].adjoint() * x).transpose();
  }
  for (int j = 0; j < rtf.num_speakers(); ++j) {
    Eigen::MatrixXd gain =
        (mask.array() == j + 1).select(Eigen::MatrixXd::Ones(frames, bins), beta);
    result.outputs.push_back(spec.WithSingleChannel(out[j].cwiseProduct(gain.cast<cd>())));
  }
  return result;
}

Eigen::MatrixXd ResampleActivity(const Eigen::MatrixXd &activity, const StftConfig &from,
                                 const StftConfig &to, Index num_samples) {
  const Index src_frames = from.NumFrames(num_samples);
  Require(activity.rows() == src_frames, ErrorKind::kSize, "activity does not match its framing");
  const Index dst_frames = to.NumFrames(num_samples);
  Eigen::MatrixXd out(dst_frames, activity.cols());
  for (Index l = 0; l < dst_frames; ++l) {
    double centre = static_cast<double>(l * to.hop - to.front_pad()) + 0.5 * to.frame_len;
    double src = (centre + from.front_pad() - 0.5 * from.frame_len) / from.hop;
    Index k = std::clamp<Index>(static_cast<Index>(std::llround(src)), 0, src_frames - 1);
    out.row(l) = activity.row(k);
  }
  return out;
}

std::string MethodName(SeparationMethod m) {
  switch (m) {
    case SeparationMethod::kMask: return "mask";
    case SeparationMethod::kLcmvMask: return "lcmv_mask";
    case SeparationMethod::kGladLite: return "gladlite";
  }
  return "unknown";
}

SeparationMethod ParseMethod(const std::string &name) {
  for (auto m : {SeparationMethod::kMask, SeparationMethod::kLcmvMask, SeparationMethod::kGladLite})
    if (MethodName(m) == name) return m;
  Fail(ErrorKind::kConfiguration, "unknown separation method '" + name + "'");
}

Eigen::MatrixXd BlindActivity(const Spectrogram &spec, int num_speakers) {
  const BandSelection band = BandSelection::FromRange(spec.config, spec.sample_rate);
  const SpatialMatrix w = CoherenceMatrix(ComputeWrtfFeatures(spec, band));
  return EstimateActivities(EigSym(w, EigenMethod::kTridiagonalQr), num_speakers).p;
}

SeparationResult Separate(const MultichannelClip &clip, int num_speakers,
                          const SeparationOptions &options) {
  clip.Validate();
  Require(clip.num_channels() >= 2, ErrorKind::kConfiguration, "separation needs at least 2 mics");
  Require(num_speakers >= 1, ErrorKind::kContract, "speaker count must be positive");
  const Spectrogram spec = Stft(clip, StftConfig::Default());

  SeparationResult result;
  if (options.oracle_activity) {
    Require(options.oracle_activity->rows() == spec.num_frames() &&
                options.oracle_activity->cols() == num_speakers,
            ErrorKind::kSize, "oracle activity must be [frames x speakers]");
    result.activity = *options.oracle_activity;
  } else {
    result.activity = BlindActivity(spec, num_speakers);
  }
  for (int j = 0; j < num_speakers; ++j)
    result.flagged.push_back(!(result.activity.col(j).array() > options.activity_threshold).any());

  std::vector<Spectrogram> outputs;
  switch (options.method) {
    case SeparationMethod::kMask: {
      const Eigen::MatrixXi mask = SpectralMask(spec, result.activity);
      for (int j = 0; j < num_speakers; ++j) outputs.push_back(ApplyMask(spec, mask, j + 1, options.mask_beta));
      break;
    }
    case SeparationMethod::kLcmvMask: {
      const Eigen::MatrixXi mask = SpectralMask(spec, result.activity);
      const SpeakerRtf rtf = EstimateSpeakerRtf(spec, result.activity, options.activity_threshold, false);
      LcmvResult lcmv = LcmvMaskSeparate(spec, rtf, mask, options.lcmv_beta);
      result.fallback_bins = lcmv.fallback_bins;
      outputs = std::move(lcmv.outputs);
      break;
    }
    case SeparationMethod::kGladLite: {
      Require(options.gladlite != nullptr, ErrorKind::kConfiguration, "mask-network separation needs a model");
      const GladLiteModel &model = *options.gladlite;
      const StftConfig &small = model.config().stft;
      Require(model.config().num_bins == small.num_bins(), ErrorKind::kConfiguration,
              "model bins do not match its STFT");
      const Spectrogram sspec = Stft(clip, small);
      const Eigen::MatrixXd act = ResampleActivity(result.activity, spec.config, small, clip.num_samples());
      const SpeakerRtf rtf = EstimateSpeakerRtf(sspec, act, options.activity_threshold, false);
      const auto coherence = LocalCoherence(sspec, rtf);
      const Eigen::MatrixXd mag = sspec.channels[0].cwiseAbs();
      for (int j = 0; j < num_speakers; ++j) {
        Eigen::MatrixXd m = model.Mask(mag, act.col(j), coherence[j]);
        outputs.push_back(sspec.WithSingleChannel(sspec.channels[0].cwiseProduct(m.cast<cd>())));
      }
      break;
    }
  }
  for (int j = 0; j < num_speakers; ++j) {
    if (result.flagged[j]) {
      Warn("speaker " + std::to_string(j + 1) + " has too little activity; output is the attenuated reference");
      outputs[j] = spec.WithSingleChannel(spec.channels[0] * options.mask_beta);
    }
    result.outputs.push_back(Istft(outputs[j]));
  }
  return result;
}

}  // namespace scoh
