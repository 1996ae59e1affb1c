// roomsim.cpp

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

#include "scoh/roomsim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <unsupported/Eigen/FFT>

#include "scoh/error.hpp"

namespace scoh {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRirHighPassHz = 100.0;
constexpr int kSincHalf = 40;  // 81-tap kernel
constexpr int kFracSteps = 1024;

// Hann-windowed sinc kernels tabulated at kFracSteps fractional offsets.
const std::vector<std::array<double, 2 * kSincHalf + 1>> &SincTable() {
  static const auto table = [] {
    std::vector<std::array<double, 2 * kSincHalf + 1>> t(kFracSteps + 1);
    for (int i = 0; i <= kFracSteps; ++i) {
      double frac = static_cast<double>(i) / kFracSteps;
      for (int k = -kSincHalf; k <= kSincHalf; ++k) {
        double x = k - frac;
        double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(kPi * x) / (kPi * x);
        double w = std::abs(x) < kSincHalf + 1 ? 0.5 * (1.0 + std::cos(kPi * x / (kSincHalf + 1)))
                                              : 0.0;
        t[i][k + kSincHalf] = sinc * w;
      }
    }
    return t;
  }();
  return table;
}

void AddFractionalImpulse(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> h, double delay, double gain) {
  const auto &table = SincTable();
  Index n0 = static_cast<Index>(std::floor(delay));
  int idx = static_cast<int>(std::lround((delay - n0) * kFracSteps));
  if (idx == kFracSteps) {
    ++n0;
    idx = 0;
  }
  const auto &kernel = table[idx];
  for (int k = -kSincHalf; k <= kSincHalf; ++k) {
    Index t = n0 + k;
    if (t >= 0 && t < h.size()) h(t) += gain * kernel[k + kSincHalf];
  }
}

bool Inside(const Point3 &p, const Point3 &dims, double margin = 0.0) {
  for (int d = 0; d < 3; ++d)
    if (!(p(d) > margin && p(d) < dims(d) - margin)) return false;
  return true;
}

Index NextPow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// RIRs

void RoomSpec::Validate() const {
  Require((dims.array() > 0).all(), ErrorKind::kGeometry, "room dimensions must be positive");
  Require(t60 >= 0.0 && t60 <= 1.0, ErrorKind::kContract, "t60 must be in [0, 1] s");
  Require(num_mics() >= 2, ErrorKind::kContract, "need at least two microphones");
  Require(num_sources() >= 1, ErrorKind::kContract, "need at least one source");
  for (const auto &p : array_positions)
    Require(Inside(p, dims), ErrorKind::kGeometry, "microphone outside the room");
  for (const auto &p : source_positions)
    Require(Inside(p, dims), ErrorKind::kGeometry, "source outside the room");
}

namespace {

// Second-order Butterworth high-pass. Image-source responses carry a large
// positive DC bias because all image gains share one sign; removing it is the
// usual companion step to the method and restores the intended decay rate.
void HighPassInPlace(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> h, double cutoff_hz,
                     double fs) {
  const double w0 = 2.0 * kPi * cutoff_hz / fs;
  const double alpha = std::sin(w0) / (2.0 * std::sqrt(0.5));
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  const double b0 = (1.0 + cw) / 2.0 / a0, b1 = -(1.0 + cw) / a0, b2 = b0;
  const double a1 = -2.0 * cw / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (Index t = 0; t < h.size(); ++t) {
    const double x = h(t);
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    h(t) = y;
  }
}

}  // namespace

double WallReflection(const Point3 &dims, double t60, double sound_speed) {
  if (t60 <= 0.0) return 0.0;
  // An image at distance r along unit direction u has undergone about
  // r * sum_d |u_d| / L_d wall reflections. The late energy envelope is the
  // direction average of beta^(2 * reflections), which decays more slowly
  // than the diffuse-field (Sabine) estimate because grazing directions hit
  // few walls. Solve for the beta that puts this envelope at -60 dB at t60.
  constexpr int kGrid = 48;
  std::vector<double> hits, weights;
  for (int i = 0; i < kGrid; ++i) {
    const double theta = (i + 0.5) * (kPi / 2) / kGrid;
    for (int k = 0; k < kGrid; ++k) {
      const double phi = (k + 0.5) * (kPi / 2) / kGrid;
      const Point3 u(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      hits.push_back(sound_speed * t60 * (u.array() / dims.array()).sum());
      weights.push_back(std::sin(theta));
    }
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  auto envelope = [&](double rate) {
    double acc = 0.0;
    for (size_t n = 0; n < hits.size(); ++n) acc += weights[n] * std::exp(-rate * hits[n]);
    return acc / total;
  };
  // rate = -ln(beta^2); the envelope falls monotonically as the rate grows.
  double lo = 0.0, hi = 1.0;
  while (envelope(hi) > 1e-6 && hi < 1e3) hi *= 2.0;
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (envelope(mid) > 1e-6 ? lo : hi) = mid;
  }
  return std::exp(-0.5 * hi);
}

RirSet SimulateRir(const RoomSpec &room) {
  room.Validate();
  const double fs = room.sample_rate;
  const double c = room.sound_speed;
  const bool anechoic = room.t60 <= 0.0;
  const double beta = WallReflection(room.dims, room.t60, c);
  const double reach = anechoic ? 0.0 : c * room.t60;

  double longest = reach;
  for (const auto &s : room.source_positions)
    for (const auto &m : room.array_positions) longest = std::max(longest, (s - m).norm());
  const Index taps = static_cast<Index>(std::ceil(longest / c * fs)) + kSincHalf + 2;

  std::array<int, 3> order{0, 0, 0};
  if (!anechoic)
    for (int d = 0; d < 3; ++d)
      order[d] = static_cast<int>(std::ceil(reach / (2.0 * room.dims(d)))) + 1;

  RirSet set;
  set.sample_rate = fs;
  set.responses.assign(room.num_sources(), Eigen::MatrixXd::Zero(room.num_mics(), taps));

  // Per-dimension image coordinates and reflection counts, reused for all mics.
  struct Axis {
    std::vector<double> coord;
    std::vector<int> reflections;
  };
  for (int j = 0; j < room.num_sources(); ++j) {
    const Point3 &src = room.source_positions[j];
    std::array<Axis, 3> axes;
    for (int d = 0; d < 3; ++d) {
      for (int n = -order[d]; n <= order[d]; ++n) {
        for (int q = 0; q <= 1; ++q) {
          axes[d].coord.push_back((1 - 2 * q) * src(d) + 2.0 * n * room.dims(d));
          axes[d].reflections.push_back(std::abs(n - q) + std::abs(n));
        }
      }
    }
    for (int m = 0; m < room.num_mics(); ++m) {
      const Point3 &mic = room.array_positions[m];
      auto h = set.responses[j].row(m);
      const double direct = (src - mic).norm();
      if (anechoic) {
        AddFractionalImpulse(h, direct / c * fs, 1.0 / direct);
        continue;
      }
      const double reach2 = std::max(reach, direct) * std::max(reach, direct);
      for (size_t ix = 0; ix < axes[0].coord.size(); ++ix) {
        double dx = axes[0].coord[ix] - mic(0);
        double dx2 = dx * dx;
        if (dx2 > reach2) continue;
        for (size_t iy = 0; iy < axes[1].coord.size(); ++iy) {
          double dy = axes[1].coord[iy] - mic(1);
          double dxy2 = dx2 + dy * dy;
          if (dxy2 > reach2) continue;
          for (size_t iz = 0; iz < axes[2].coord.size(); ++iz) {
            double dz = axes[2].coord[iz] - mic(2);
            double dist2 = dxy2 + dz * dz;
            if (dist2 > reach2) continue;
            double dist = std::sqrt(dist2);
            int refl = axes[0].reflections[ix] + axes[1].reflections[iy] + axes[2].reflections[iz];
            double gain = (refl == 0 ? 1.0 : std::pow(beta, refl)) / dist;
            if (gain == 0.0) continue;
            AddFractionalImpulse(h, dist / c * fs, gain);
          }
        }
      }
      HighPassInPlace(h, kRirHighPassHz, fs);
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Timelines

bool ActivityTimeline::IsActive(int speaker, double t) const {
  for (const auto &s : intervals[speaker])
    if (t >= s.start && t < s.end) return true;
  return false;
}

double ActivityTimeline::ActiveTime(int speaker) const {
  double total = 0.0;
  for (const auto &s : intervals[speaker]) total += s.length();
  return total;
}

void ActivityTimeline::Validate() const {
  for (const auto &spans : intervals) {
    for (size_t i = 0; i < spans.size(); ++i) {
      Require(spans[i].start >= 0.0 && spans[i].end <= clip_len_s + 1e-9 &&
                  spans[i].start < spans[i].end,
              ErrorKind::kContract, "span outside the clip");
      if (i > 0)
        Require(spans[i].start >= spans[i - 1].end, ErrorKind::kContract,
                "spans of one speaker overlap");
    }
  }
}

double OverlapRatio(const ActivityTimeline &timeline) {
  std::vector<std::pair<double, int>> events;
  for (const auto &spans : timeline.intervals)
    for (const auto &s : spans) {
      events.emplace_back(s.start, +1);
      events.emplace_back(s.end, -1);
    }
  Require(!events.empty(), ErrorKind::kUndefined, "overlap ratio of an empty timeline");
  std::sort(events.begin(), events.end());
  double speech = 0.0, overlap = 0.0;
  int active = 0;
  double prev = events.front().first;
  for (const auto &[t, delta] : events) {
    double dt = t - prev;
    if (active >= 1) speech += dt;
    if (active >= 2) overlap += dt;
    active += delta;
    prev = t;
  }
  Require(speech > 0.0, ErrorKind::kUndefined, "timeline has no speech");
  return overlap / speech;
}

ActivityTimeline BuildTimeline(int num_speakers, double overlap, double clip_len_s,
                               double min_gap_s, std::optional<double> low_activity_fraction,
                               uint64_t seed) {
  Require(num_speakers >= 1, ErrorKind::kContract, "need at least one speaker");
  Require(overlap >= 0.0 && overlap <= 0.4 + 1e-12, ErrorKind::kContract,
          "overlap target must be in [0, 0.4]");
  Require(num_speakers > 1 || overlap == 0.0, ErrorKind::kContract,
          "a single speaker cannot overlap");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double margin = 0.25;
  const double usable = clip_len_s - 2.0 * margin;

  for (int attempt = 0; attempt < 100; ++attempt) {
    // Turn order: each speaker once, then extra turns by anyone but the previous one.
    std::vector<int> order(num_speakers);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const int target_turns =
        num_speakers == 1 ? 2 + static_cast<int>(rng() % 2)
                          : std::max(num_speakers, 4) + static_cast<int>(rng() % 3);
    while (static_cast<int>(order.size()) < target_turns) {
      std::vector<int> candidates;
      for (int j = 0; j < num_speakers; ++j) {
        if (num_speakers > 1 && j == order.back()) continue;
        if (low_activity_fraction && j == 0) continue;
        candidates.push_back(j);
      }
      if (candidates.empty()) break;
      order.push_back(candidates[rng() % candidates.size()]);
    }
    const int turns = static_cast<int>(order.size());

    std::vector<double> gaps(std::max(turns - 1, 0), 0.0);
    if (overlap == 0.0)
      for (auto &g : gaps) g = min_gap_s + 0.4 * unit(rng);
    const double gap_total = std::accumulate(gaps.begin(), gaps.end(), 0.0);

    // Durations: fixed for the low-activity turn, random weights for the rest.
    const double low_len = low_activity_fraction ? *low_activity_fraction * clip_len_s : 0.0;
    const double duration_total = overlap == 0.0 ? usable - gap_total : (1.0 + overlap) * usable;
    std::vector<double> dur(turns);
    double weight_sum = 0.0;
    for (int k = 0; k < turns; ++k) {
      if (low_activity_fraction && order[k] == 0) continue;
      dur[k] = 0.8 + 0.4 * unit(rng);
      weight_sum += dur[k];
    }
    const double free_total = duration_total - low_len;
    if (free_total <= 0.0) continue;
    for (int k = 0; k < turns; ++k)
      dur[k] = (low_activity_fraction && order[k] == 0) ? low_len : dur[k] / weight_sum * free_total;

    // Overlap between consecutive turns, proportional to the shorter turn so
    // that no three turns meet.
    std::vector<double> shared(std::max(turns - 1, 0), 0.0);
    if (overlap > 0.0) {
      double min_sum = 0.0;
      for (int k = 0; k + 1 < turns; ++k) min_sum += std::min(dur[k], dur[k + 1]);
      double scale = overlap * usable / min_sum;
      if (scale >= 0.49) continue;
      for (int k = 0; k + 1 < turns; ++k) shared[k] = scale * std::min(dur[k], dur[k + 1]);
    }

    ActivityTimeline tl;
    tl.clip_len_s = clip_len_s;
    tl.intervals.assign(num_speakers, {});
    double t = margin;
    for (int k = 0; k < turns; ++k) {
      tl.intervals[order[k]].push_back({t, t + dur[k]});
      if (k + 1 < turns) t += dur[k] - shared[k] + gaps[k];
    }
    for (auto &spans : tl.intervals)
      std::sort(spans.begin(), spans.end(), [](auto &a, auto &b) { return a.start < b.start; });
    tl.Validate();
    return tl;
  }
  Fail(ErrorKind::kSampling, "could not build a timeline for the requested overlap");
}

// ---------------------------------------------------------------------------
// Mixtures

Eigen::VectorXd FftConvolve(const Eigen::VectorXd &x, const Eigen::VectorXd &h, Index out_len) {
  const Index nfft = NextPow2(x.size() + h.size() - 1);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> xa(nfft, 0.0), ha(nfft, 0.0), y;
  std::copy(x.data(), x.data() + x.size(), xa.begin());
  std::copy(h.data(), h.data() + h.size(), ha.begin());
  std::vector<std::complex<double>> xf, hf;
  fft.fwd(xf, xa);
  fft.fwd(hf, ha);
  for (size_t i = 0; i < xf.size(); ++i) xf[i] *= hf[i];
  fft.inv(y, xf, nfft);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(out_len);
  for (Index t = 0; t < std::min<Index>(out_len, nfft); ++t) out(t) = y[t];
  return out;
}

SpeakerImages RenderImages(const std::vector<MultichannelClip> &sources,
                           const ActivityTimeline &timeline, const RirSet &rirs) {
  const int num_speakers = rirs.num_sources();
  Require(static_cast<int>(sources.size()) == num_speakers &&
              timeline.num_speakers() == num_speakers,
          ErrorKind::kContract, "source, timeline and RIR speaker counts differ");
  timeline.Validate();
  const double fs = rirs.sample_rate;
  const Index n = static_cast<Index>(std::llround(timeline.clip_len_s * fs));
  for (const auto &s : sources) {
    Require(s.num_channels() == 1, ErrorKind::kContract, "dry sources must be single-channel");
    Require(s.num_samples() >= n, ErrorKind::kSize, "dry source shorter than the timeline");
  }

  const Index taps = rirs.num_taps();
  const Index nfft = NextPow2(n + taps - 1);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);

  SpeakerImages out;
  out.timeline = timeline;
  out.sample_rate = fs;
  const Index ramp = static_cast<Index>(0.005 * fs);
  for (int j = 0; j < num_speakers; ++j) {
    std::vector<double> gated(nfft, 0.0);
    for (const auto &span : timeline.intervals[j]) {
      Index a = static_cast<Index>(std::llround(span.start * fs));
      Index b = std::min<Index>(static_cast<Index>(std::llround(span.end * fs)), n);
      for (Index t = a; t < b; ++t) {
        double g = 1.0;
        Index from_edge = std::min(t - a, b - 1 - t);
        if (from_edge < ramp) g = 0.5 - 0.5 * std::cos(kPi * (from_edge + 0.5) / ramp);
        gated[t] = sources[j].samples(0, t) * g;
      }
    }
    std::vector<std::complex<double>> sf, hf;
    fft.fwd(sf, gated);
    Eigen::MatrixXd img(rirs.num_mics(), n);
    std::vector<double> ha(nfft, 0.0), y;
    for (int m = 0; m < rirs.num_mics(); ++m) {
      std::fill(ha.begin(), ha.end(), 0.0);
      for (Index k = 0; k < taps; ++k) ha[k] = rirs.responses[j](m, k);
      fft.fwd(hf, ha);
      for (size_t i = 0; i < hf.size(); ++i) hf[i] *= sf[i];
      fft.inv(y, hf, nfft);
      for (Index t = 0; t < n; ++t) img(m, t) = y[t];
    }
    out.per_speaker.push_back(std::move(img));
  }
  return out;
}

Eigen::MatrixXi ComputeDominance(const Eigen::MatrixXd &images, const Eigen::VectorXd &noise,
                                 double sample_rate, const StftConfig &cfg) {
  const int num_speakers = static_cast<int>(images.rows());
  MultichannelClip stacked(Eigen::MatrixXd(num_speakers + 1, images.cols()), sample_rate);
  stacked.samples.topRows(num_speakers) = images;
  stacked.samples.row(num_speakers) = noise.transpose();
  Spectrogram spec = Stft(stacked, cfg);

  double peak = 0.0;
  for (int j = 0; j < num_speakers; ++j) peak = std::max(peak, spec.channels[j].cwiseAbs().maxCoeff());
  const double floor = 1e-8 * peak;

  const Index frames = spec.num_frames(), bins = spec.num_bins();
  Eigen::MatrixXi dom = Eigen::MatrixXi::Zero(frames, bins);
  for (Index l = 0; l < frames; ++l) {
    for (Index f = 0; f < bins; ++f) {
      double best = std::max(std::abs(spec.channels[num_speakers](l, f)), floor);
      for (int j = 0; j < num_speakers; ++j) {
        double mag = std::abs(spec.channels[j](l, f));
        if (mag > best) {
          best = mag;
          dom(l, f) = j + 1;
        }
      }
    }
  }
  return dom;
}

Eigen::MatrixXd ActivityFromDominance(const Eigen::MatrixXi &dominance, int num_speakers) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dominance.rows(), num_speakers);
  for (Index l = 0; l < dominance.rows(); ++l) {
    for (Index f = 0; f < dominance.cols(); ++f) {
      int d = dominance(l, f);
      Require(d >= 0 && d <= num_speakers, ErrorKind::kContract, "dominance class out of range");
      if (d > 0) p(l, d - 1) += 1.0;
    }
  }
  return p / static_cast<double>(std::max<Index>(dominance.cols(), 1));
}

Eigen::MatrixXd GroundTruth::OracleActivity() const {
  return ActivityFromDominance(dominance, num_speakers());
}

Mixture MixImages(const SpeakerImages &images, double sensor_snr_db, uint64_t seed,
                  const StftConfig &cfg) {
  Require(!images.per_speaker.empty(), ErrorKind::kContract, "no speaker images");
  const Index rows = images.per_speaker[0].rows(), n = images.per_speaker[0].cols();
  Eigen::MatrixXd speech = Eigen::MatrixXd::Zero(rows, n);
  for (const auto &img : images.per_speaker) speech += img;

  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(rows, n);
  if (std::isfinite(sensor_snr_db)) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index t = 0; t < n; ++t)
      for (Index m = 0; m < rows; ++m) noise(m, t) = gauss(rng);
    double speech_power = speech.squaredNorm() / speech.size();
    double target = speech_power * std::pow(10.0, -sensor_snr_db / 10.0);
    noise *= std::sqrt(target / (noise.squaredNorm() / noise.size()));
  }

  Mixture mix;
  mix.clip = MultichannelClip(speech + noise, images.sample_rate);
  mix.noise = std::move(noise);
  mix.truth.timeline = images.timeline;
  mix.truth.config = cfg;
  mix.truth.images.resize(static_cast<Index>(images.per_speaker.size()), n);
  for (size_t j = 0; j < images.per_speaker.size(); ++j)
    mix.truth.images.row(static_cast<Index>(j)) = images.per_speaker[j].row(0);
  mix.truth.dominance = ComputeDominance(mix.truth.images, mix.noise.row(0).transpose(),
                                         images.sample_rate, cfg);
  return mix;
}

Mixture SynthesizeMixture(const std::vector<MultichannelClip> &sources,
                          const ActivityTimeline &timeline, const RirSet &rirs,
                          double sensor_snr_db, uint64_t seed, const StftConfig &cfg) {
  return MixImages(RenderImages(sources, timeline, rirs), sensor_snr_db, seed, cfg);
}

// ---------------------------------------------------------------------------
// Dry sources

namespace {

// RBJ band-pass biquad, constant 0 dB peak gain.
Eigen::VectorXd BandPass(const Eigen::VectorXd &x, double center_hz, double q, double fs) {
  double w0 = 2.0 * kPi * center_hz / fs;
  double alpha = std::sin(w0) / (2.0 * q);
  double a0 = 1.0 + alpha;
  double b0 = alpha / a0, b2 = -alpha / a0;
  double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  Eigen::VectorXd y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (Index i = 0; i < x.size(); ++i) {
    double v = b0 * x(i) + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x(i);
    y2 = y1;
    y1 = v;
    y(i) = v;
  }
  return y;
}

}  // namespace

MultichannelClip SpeechLikeSource(double duration_s, double sample_rate, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index n = static_cast<Index>(std::llround(duration_s * sample_rate));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);

  const double base_f0 = 100.0 + 120.0 * unit(rng);
  // Speaker-specific formant ranges.
  const double f1_center = 400.0 + 300.0 * unit(rng);
  const double f2_center = 1200.0 + 900.0 * unit(rng);
  const double f3_center = 2500.0 + 800.0 * unit(rng);

  Index t0 = 0;
  while (t0 < n) {
    // One syllable, about 250 ms (4 Hz rhythm).
    Index len = static_cast<Index>((0.18 + 0.14 * unit(rng)) * sample_rate);
    len = std::min(len, n - t0);
    double amp = 0.4 + 0.6 * unit(rng);
    bool voiced = unit(rng) < 0.75;
    Eigen::VectorXd syl = Eigen::VectorXd::Zero(len);
    if (voiced) {
      double f0 = base_f0 * (0.85 + 0.3 * unit(rng));
      double glide = (unit(rng) - 0.5) * 0.3 * f0;  // Hz over the syllable
      double f1 = f1_center * (0.8 + 0.4 * unit(rng));
      double f2 = f2_center * (0.8 + 0.4 * unit(rng));
      double f3 = f3_center * (0.9 + 0.2 * unit(rng));
      int harmonics = static_cast<int>(4000.0 / (f0 + std::abs(glide)));
      for (int h = 1; h <= harmonics; ++h) {
        double fh = h * f0;
        double env = std::exp(-0.5 * std::pow((fh - f1) / 150.0, 2)) +
                     0.7 * std::exp(-0.5 * std::pow((fh - f2) / 200.0, 2)) +
                     0.4 * std::exp(-0.5 * std::pow((fh - f3) / 250.0, 2)) +
                     0.05 * 1000.0 / (fh + 1000.0);
        double phase = 2.0 * kPi * unit(rng);
        double inst = 0.0;
        for (Index i = 0; i < len; ++i) {
          double frac = static_cast<double>(i) / len;
          inst += 2.0 * kPi * h * (f0 + glide * frac) / sample_rate;
          syl(i) += env * std::sin(inst + phase);
        }
      }
      Eigen::VectorXd breath(len);
      for (Index i = 0; i < len; ++i) breath(i) = gauss(rng);
      syl += 0.02 * BandPass(breath, 1500.0, 0.5, sample_rate);
    } else {
      Eigen::VectorXd noise(len);
      for (Index i = 0; i < len; ++i) noise(i) = gauss(rng);
      double center = 2000.0 + 1500.0 * unit(rng);
      syl = 0.3 * BandPass(noise, center, 1.5, sample_rate);
    }
    double rms = std::sqrt(syl.squaredNorm() / std::max<Index>(len, 1));
    if (rms > 0) syl /= rms;
    for (Index i = 0; i < len; ++i) {
      double env = std::pow(std::sin(kPi * (i + 0.5) / len), 2);
      out(t0 + i) += amp * env * syl(i);
    }
    // Short pause between some syllables.
    t0 += len + static_cast<Index>(unit(rng) < 0.3 ? 0.05 * sample_rate * unit(rng) : 0);
  }
  double rms = std::sqrt(out.squaredNorm() / std::max<Index>(n, 1));
  if (rms > 0) out /= rms;
  return {out.transpose(), sample_rate};
}

// ---------------------------------------------------------------------------
// Presets and scenarios

ArrayPreset GetArrayPreset(const std::string &name) {
  ArrayPreset p;
  p.name = name;
  auto ula = [&](int mics, double spacing) {
    p.wall_mounted = true;
    for (int i = 0; i < mics; ++i) p.offsets.emplace_back((i - (mics - 1) / 2.0) * spacing, 0.0, 0.0);
  };
  if (name == "ula8-8cm") {
    ula(8, 0.08);
  } else if (name == "ula4-8cm") {
    ula(4, 0.08);
  } else if (name == "ula8-4cm") {
    ula(8, 0.04);
  } else if (name == "uca7-4.25cm" || name == "uca5-4.25cm") {
    int ring = name == "uca7-4.25cm" ? 6 : 4;
    p.offsets.emplace_back(0.0, 0.0, 0.0);
    for (int i = 0; i < ring; ++i) {
      double a = 2.0 * kPi * i / ring;
      p.offsets.emplace_back(0.0425 * std::cos(a), 0.0425 * std::sin(a), 0.0);
    }
  } else {
    Fail(ErrorKind::kConfiguration, "unknown array preset '" + name + "'");
  }
  return p;
}

std::vector<std::string> ArrayPresetNames() {
  return {"ula8-8cm", "uca7-4.25cm", "ula4-8cm", "ula8-4cm", "uca5-4.25cm"};
}

namespace {

Point3 ArrayCentre(const ArrayPreset &preset, const Point3 &dims) {
  constexpr double kArrayHeight = 1.5;
  if (preset.wall_mounted) return {dims(0) / 2.0, 0.5, kArrayHeight};
  return {dims(0) / 2.0, dims(1) / 2.0, kArrayHeight};
}

double AngleGap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

}  // namespace

Scenario SampleScenario(const ScenarioParams &params, uint64_t seed) {
  Require(params.num_speakers >= 1 && params.num_speakers <= 4, ErrorKind::kContract,
          "speaker count must be in 1..4");
  Require(params.overlap >= 0.0 && params.overlap <= 0.4 + 1e-12, ErrorKind::kContract,
          "overlap target must be in [0, 0.4]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ArrayPreset preset = GetArrayPreset(params.array);

  Scenario sc;
  sc.seed = seed;
  for (int attempt = 0; attempt < 50; ++attempt) {
    RoomSpec room;
    room.t60 = params.t60;
    room.sample_rate = params.sample_rate;
    for (int d = 0; d < 3; ++d)
      room.dims(d) = params.dims_lo(d) + (params.dims_hi(d) - params.dims_lo(d)) * unit(rng);
    const Point3 centre = ArrayCentre(preset, room.dims);
    for (const auto &o : preset.offsets) room.array_positions.push_back(centre + o);

    std::vector<double> azimuths;
    bool ok = true;
    for (int j = 0; j < params.num_speakers && ok; ++j) {
      bool placed = false;
      for (int tries = 0; tries < 200 && !placed; ++tries) {
        double az = preset.wall_mounted ? -90.0 + 180.0 * unit(rng) : 360.0 * unit(rng);
        double dist = params.min_distance_m + (params.max_distance_m - params.min_distance_m) * unit(rng);
        double height = 1.2 + 0.7 * unit(rng);
        double rad = az * kPi / 180.0;
        // Linear arrays face +y (broadside); azimuth is measured from broadside.
        Point3 pos = preset.wall_mounted
                         ? Point3(centre(0) + dist * std::sin(rad), centre(1) + dist * std::cos(rad), height)
                         : Point3(centre(0) + dist * std::cos(rad), centre(1) + dist * std::sin(rad), height);
        if (!Inside(pos, room.dims, 0.3)) continue;
        bool separated = std::all_of(azimuths.begin(), azimuths.end(), [&](double other) {
          return AngleGap(az, other) >= params.min_separation_deg;
        });
        if (!separated) continue;
        azimuths.push_back(az);
        room.source_positions.push_back(pos);
        placed = true;
      }
      ok = placed;
    }
    if (!ok) continue;
    sc.room = room;
    sc.azimuths_deg = azimuths;
    sc.timeline = BuildTimeline(params.num_speakers, params.overlap, params.clip_len_s,
                                params.min_gap_s, params.low_activity_fraction, rng());
    return sc;
  }
  Fail(ErrorKind::kSampling, "could not place sources with the requested angular separation");
}

Scenario RenderOnArray(const Scenario &scenario, const std::string &preset_name) {
  const ArrayPreset preset = GetArrayPreset(preset_name);
  Point3 centre = Point3::Zero();
  for (const auto &p : scenario.room.array_positions) centre += p;
  centre /= static_cast<double>(scenario.room.array_positions.size());
  Scenario out = scenario;
  out.room.array_positions.clear();
  for (const auto &o : preset.offsets) out.room.array_positions.push_back(centre + o);
  out.room.Validate();
  return out;
}

}  // namespace scoh
