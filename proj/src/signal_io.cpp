// signal_io.cpp

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

#include "scoh/signal_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "scoh/error.hpp"

namespace scoh {

void MultichannelClip::Validate() const {
  Require(samples.rows() >= 1, ErrorKind::kSize, "clip has no channels");
  Require(samples.allFinite(), ErrorKind::kNumeric, "clip contains non-finite samples");
  Require(sample_rate > 0, ErrorKind::kContract, "sample rate must be positive");
}

Index StftConfig::NumFrames(Index num_samples) const {
  return (num_samples + front_pad() + hop - 1) / hop;
}

void StftConfig::Validate() const {
  Require(hop > 0 && hop <= frame_len && frame_len <= fft_len, ErrorKind::kConfiguration,
          "STFT config needs 0 < hop <= frame_len <= fft_len");
  Require(fft_len % 2 == 0, ErrorKind::kConfiguration, "fft_len must be even");
  // sqrt-Hann pairs reconstruct when the overlap-add of Hann is nonzero
  // everywhere, i.e. at least two frames overlap each sample.
  Require(frame_len % hop == 0 && frame_len / hop >= 2, ErrorKind::kConfiguration,
          "sqrt-Hann window needs frame_len to be a multiple of hop with >= 50% overlap");
}

Spectrogram Spectrogram::WithSingleChannel(Eigen::MatrixXcd bins) const {
  Spectrogram out;
  out.channels.push_back(std::move(bins));
  out.config = config;
  out.num_samples = num_samples;
  out.sample_rate = sample_rate;
  return out;
}

Eigen::VectorXd StftWindow(const StftConfig &cfg) {
  Eigen::VectorXd w(cfg.frame_len);
  for (int n = 0; n < cfg.frame_len; ++n) {
    double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / cfg.frame_len);
    w(n) = std::sqrt(hann);
  }
  return w;
}

// ---------------------------------------------------------------------------
// WAV

namespace {

template <typename T>
T ReadLe(const unsigned char *p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void PutLe(std::string &buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

MultichannelClip ReadWav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kIo, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  Require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          ErrorKind::kFormat, path + ": not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char *data = nullptr;
  size_t data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    uint32_t len = ReadLe<uint32_t>(chunk + 4);
    size_t body = pos + 8;
    size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      Require(len >= 16 && avail >= 16, ErrorKind::kFormat, path + ": short fmt chunk");
      format = ReadLe<uint16_t>(chunk + 8);
      channels = ReadLe<uint16_t>(chunk + 10);
      rate = ReadLe<uint32_t>(chunk + 12);
      bits = ReadLe<uint16_t>(chunk + 22);
      if (format == kFormatExtensible) {
        Require(len >= 40 && avail >= 40, ErrorKind::kFormat, path + ": short extensible fmt");
        format = ReadLe<uint16_t>(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = std::min<size_t>(len, avail);
    }
    pos = body + len + (len & 1u);
  }
  Require(channels > 0 && rate > 0, ErrorKind::kFormat, path + ": missing fmt chunk");
  Require(data != nullptr, ErrorKind::kFormat, path + ": missing data chunk");

  bool pcm16 = format == kFormatPcm && bits == 16;
  bool f32 = format == kFormatFloat && bits == 32;
  Require(pcm16 || f32, ErrorKind::kUnsupported,
          path + ": only PCM16 and float32 WAV are supported (format " +
              std::to_string(format) + ", " + std::to_string(bits) + " bits)");

  size_t frame_bytes = static_cast<size_t>(channels) * (bits / 8);
  Index n = static_cast<Index>(data_len / frame_bytes);
  MultichannelClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(channels, n);
  for (Index t = 0; t < n; ++t) {
    const unsigned char *frame = data + t * frame_bytes;
    for (int m = 0; m < channels; ++m) {
      if (pcm16)
        clip.samples(m, t) = ReadLe<int16_t>(frame + 2 * m) / 32768.0;
      else
        clip.samples(m, t) = ReadLe<float>(frame + 4 * m);
    }
  }
  return clip;
}

void WriteWav(const MultichannelClip &clip, const std::string &path) {
  const int channels = clip.num_channels();
  Require(channels >= 1 && channels < 65536, ErrorKind::kSize, "bad channel count");
  const Index n = clip.num_samples();
  const uint32_t data_len = static_cast<uint32_t>(n * channels * 2);

  std::string buf;
  buf.reserve(44 + data_len);
  buf.append("RIFF");
  PutLe<uint32_t>(buf, 36 + data_len);
  buf.append("WAVEfmt ");
  PutLe<uint32_t>(buf, 16);
  PutLe<uint16_t>(buf, kFormatPcm);
  PutLe<uint16_t>(buf, static_cast<uint16_t>(channels));
  auto rate = static_cast<uint32_t>(std::lround(clip.sample_rate));
  PutLe<uint32_t>(buf, rate);
  PutLe<uint32_t>(buf, rate * channels * 2);
  PutLe<uint16_t>(buf, static_cast<uint16_t>(channels * 2));
  PutLe<uint16_t>(buf, 16);
  buf.append("data");
  PutLe<uint32_t>(buf, data_len);

  Index clamped = 0;
  for (Index t = 0; t < n; ++t) {
    for (int m = 0; m < channels; ++m) {
      double v = clip.samples(m, t);
      if (!(v >= -1.0 && v <= 1.0)) {
        ++clamped;
        v = std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0);
      }
      long q = std::lround(v * 32768.0);
      PutLe<int16_t>(buf, static_cast<int16_t>(std::clamp(q, -32768L, 32767L)));
    }
  }
  if (clamped > 0) Warn(path + ": clamped " + std::to_string(clamped) + " samples to [-1, 1]");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  Require(out.good(), ErrorKind::kIo, "write failed for " + path);
}

// ---------------------------------------------------------------------------
// STFT

Spectrogram Stft(const MultichannelClip &clip, const StftConfig &cfg) {
  cfg.Validate();
  clip.Validate();
  const Index n = clip.num_samples();
  Require(n >= cfg.frame_len, ErrorKind::kSize,
          "clip of " + std::to_string(n) + " samples is shorter than one frame");

  const Index num_frames = cfg.NumFrames(n);
  const int num_bins = cfg.num_bins();
  const Eigen::VectorXd window = StftWindow(cfg);

  Spectrogram spec;
  spec.config = cfg;
  spec.num_samples = n;
  spec.sample_rate = clip.sample_rate;
  spec.channels.assign(clip.num_channels(), Eigen::MatrixXcd(num_frames, num_bins));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(cfg.fft_len);
  std::vector<std::complex<double>> bins;
  for (int m = 0; m < clip.num_channels(); ++m) {
    for (Index l = 0; l < num_frames; ++l) {
      std::fill(frame.begin(), frame.end(), 0.0);
      Index start = l * cfg.hop - cfg.front_pad();
      for (int k = 0; k < cfg.frame_len; ++k) {
        Index t = start + k;
        if (t >= 0 && t < n) frame[k] = clip.samples(m, t) * window(k);
      }
      fft.fwd(bins, frame);
      for (int f = 0; f < num_bins; ++f) spec.channels[m](l, f) = bins[f];
    }
  }
  return spec;
}

MultichannelClip Istft(const Spectrogram &spec, const StftConfig &cfg) {
  cfg.Validate();
  Require(spec.config == cfg, ErrorKind::kSize, "spectrogram was produced with a different config");
  Require(spec.num_channels() >= 1, ErrorKind::kSize, "empty spectrogram");
  const Index num_frames = spec.num_frames();
  Require(spec.num_bins() == cfg.num_bins(), ErrorKind::kSize, "bin count does not match fft_len");
  for (const auto &ch : spec.channels)
    Require(ch.rows() == num_frames && ch.cols() == cfg.num_bins(), ErrorKind::kSize,
            "channels have inconsistent dimensions");

  Index n = spec.num_samples > 0 ? spec.num_samples
                                 : num_frames * cfg.hop - cfg.front_pad();
  Require(cfg.NumFrames(n) == num_frames, ErrorKind::kSize,
          "frame count inconsistent with clip length");

  const Eigen::VectorXd window = StftWindow(cfg);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(n);
  for (Index l = 0; l < num_frames; ++l) {
    Index start = l * cfg.hop - cfg.front_pad();
    for (int k = 0; k < cfg.frame_len; ++k) {
      Index t = start + k;
      if (t >= 0 && t < n) norm(t) += window(k) * window(k);
    }
  }

  MultichannelClip out(Eigen::MatrixXd::Zero(spec.num_channels(), n), spec.sample_rate);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> bins(cfg.num_bins());
  std::vector<double> frame;
  for (int m = 0; m < spec.num_channels(); ++m) {
    for (Index l = 0; l < num_frames; ++l) {
      for (int f = 0; f < cfg.num_bins(); ++f) bins[f] = spec.channels[m](l, f);
      fft.inv(frame, bins, cfg.fft_len);
      Index start = l * cfg.hop - cfg.front_pad();
      for (int k = 0; k < cfg.frame_len; ++k) {
        Index t = start + k;
        if (t >= 0 && t < n) out.samples(m, t) += frame[k] * window(k);
      }
    }
    for (Index t = 0; t < n; ++t)
      out.samples(m, t) = norm(t) > 1e-12 ? out.samples(m, t) / norm(t) : 0.0;
  }
  return out;
}

}  // namespace scoh
