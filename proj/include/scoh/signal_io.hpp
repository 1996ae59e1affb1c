// scoh/signal_io.hpp

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

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scoh {

using Index = Eigen::Index;

/// Time-domain multichannel audio. samples is [channels x samples].
struct MultichannelClip {
  Eigen::MatrixXd samples;
  double sample_rate = 16000.0;

  MultichannelClip() = default;
  MultichannelClip(Eigen::MatrixXd s, double sr) : samples(std::move(s)), sample_rate(sr) {}

  int num_channels() const { return static_cast<int>(samples.rows()); }
  Index num_samples() const { return samples.cols(); }
  double duration() const { return num_samples() / sample_rate; }

  /// One-channel clip holding row m.
  MultichannelClip Channel(int m) const { return {samples.row(m), sample_rate}; }

  /// Throws unless M >= 1 and all samples are finite.
  void Validate() const;
};

enum class WindowKind { kSqrtHann };

struct StftConfig {
  int frame_len = 2048;
  int hop = 512;
  int fft_len = 2048;
  WindowKind window = WindowKind::kSqrtHann;

  /// 128 ms frames, 32 ms stride, 2048-point FFT at 16 kHz.
  static StftConfig Default() { return {}; }
  /// 512-point variant used by the mask network.
  static StftConfig Small() { return {512, 128, 512, WindowKind::kSqrtHann}; }

  int num_bins() const { return fft_len / 2 + 1; }
  double BinHz(int f, double sample_rate) const { return f * sample_rate / fft_len; }
  /// Zero padding placed before the first sample so that every sample is
  /// covered by frame_len / hop frames.
  int front_pad() const { return frame_len - hop; }
  Index NumFrames(Index num_samples) const;

  void Validate() const;
  bool operator==(const StftConfig &) const = default;
};

/// Complex STFT; channels[m](l, f) is X^m(l, f).
struct Spectrogram {
  std::vector<Eigen::MatrixXcd> channels;
  StftConfig config;
  Index num_samples = 0;  // original clip length, used by Istft
  double sample_rate = 16000.0;

  int num_channels() const { return static_cast<int>(channels.size()); }
  Index num_frames() const { return channels.empty() ? 0 : channels[0].rows(); }
  Index num_bins() const { return channels.empty() ? 0 : channels[0].cols(); }

  /// Same framing, a single channel with the given bins.
  Spectrogram WithSingleChannel(Eigen::MatrixXcd bins) const;
};

Eigen::VectorXd StftWindow(const StftConfig &cfg);

MultichannelClip ReadWav(const std::string &path);
/// Writes PCM16. Samples outside [-1, 1] are clamped with a warning.
void WriteWav(const MultichannelClip &clip, const std::string &path);

Spectrogram Stft(const MultichannelClip &clip, const StftConfig &cfg = StftConfig::Default());
MultichannelClip Istft(const Spectrogram &spec, const StftConfig &cfg);
inline MultichannelClip Istft(const Spectrogram &spec) { return Istft(spec, spec.config); }

}  // namespace scoh
