// scoh/roomsim.hpp

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

// Shoebox image-source room simulation and mixture synthesis with ground truth.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scoh/signal_io.hpp"

namespace scoh {

using Point3 = Eigen::Vector3d;

struct RoomSpec {
  Point3 dims{5.0, 4.0, 3.0};
  double t60 = 0.3;  // 0 selects anechoic mode
  std::vector<Point3> array_positions;
  std::vector<Point3> source_positions;
  double sound_speed = 343.0;
  double sample_rate = 16000.0;

  int num_mics() const { return static_cast<int>(array_positions.size()); }
  int num_sources() const { return static_cast<int>(source_positions.size()); }
  void Validate() const;
};

/// responses[j] is [M x taps] for source j.
struct RirSet {
  std::vector<Eigen::MatrixXd> responses;
  double sample_rate = 16000.0;

  int num_sources() const { return static_cast<int>(responses.size()); }
  int num_mics() const { return responses.empty() ? 0 : static_cast<int>(responses[0].rows()); }
  Index num_taps() const { return responses.empty() ? 0 : responses[0].cols(); }
};

/// Uniform wall pressure-reflection coefficient reproducing t60 for the room.
double WallReflection(const Point3 &dims, double t60, double sound_speed);

RirSet SimulateRir(const RoomSpec &room);

struct Span {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
};

struct ActivityTimeline {
  std::vector<std::vector<Span>> intervals;  // per speaker, sorted
  double clip_len_s = 12.0;

  int num_speakers() const { return static_cast<int>(intervals.size()); }
  bool IsActive(int speaker, double t) const;
  double ActiveTime(int speaker) const;
  void Validate() const;
};

/// (time with >= 2 active speakers) / (time with >= 1 active speaker).
double OverlapRatio(const ActivityTimeline &timeline);

struct GroundTruth {
  ActivityTimeline timeline;
  Eigen::MatrixXd images;     // [J x N] reverberant speaker images at the reference mic
  Eigen::MatrixXi dominance;  // [L x F]; 0 = noise, j in 1..J
  StftConfig config;

  int num_speakers() const { return static_cast<int>(images.rows()); }
  /// Fraction of bins dominated by each speaker per frame, [L x J].
  Eigen::MatrixXd OracleActivity() const;
};

/// Fraction of bins dominated by each of J speakers per frame, [L x J].
Eigen::MatrixXd ActivityFromDominance(const Eigen::MatrixXi &dominance, int num_speakers);

struct SpeakerImages {
  std::vector<Eigen::MatrixXd> per_speaker;  // J entries of [M x N]
  ActivityTimeline timeline;
  double sample_rate = 16000.0;
};

struct Mixture {
  MultichannelClip clip;
  GroundTruth truth;
  Eigen::MatrixXd noise;  // [M x N]
};

/// Gates each dry source by its timeline and convolves with its RIRs.
SpeakerImages RenderImages(const std::vector<MultichannelClip> &sources,
                           const ActivityTimeline &timeline, const RirSet &rirs);

/// Sums images and adds white Gaussian sensor noise at sensor_snr_db relative
/// to the speech mixture power. An infinite SNR adds no noise.
Mixture MixImages(const SpeakerImages &images, double sensor_snr_db, uint64_t seed,
                  const StftConfig &cfg = StftConfig::Default());

Mixture SynthesizeMixture(const std::vector<MultichannelClip> &sources,
                          const ActivityTimeline &timeline, const RirSet &rirs,
                          double sensor_snr_db, uint64_t seed,
                          const StftConfig &cfg = StftConfig::Default());

/// Dominance map from per-speaker and noise reference-mic signals.
Eigen::MatrixXi ComputeDominance(const Eigen::MatrixXd &images, const Eigen::VectorXd &noise,
                                 double sample_rate, const StftConfig &cfg);

/// Speech-like dry signal: harmonic and fricative bursts in 100-4000 Hz with
/// a syllabic 4 Hz envelope, unit RMS.
MultichannelClip SpeechLikeSource(double duration_s, double sample_rate, uint64_t seed);

// ---------------------------------------------------------------------------
// Array presets and scenario sampling

struct ArrayPreset {
  std::string name;
  std::vector<Point3> offsets;  // relative to the array centre
  bool wall_mounted = false;    // linear arrays sit 0.5 m from a wall
};

ArrayPreset GetArrayPreset(const std::string &name);
std::vector<std::string> ArrayPresetNames();

struct ScenarioParams {
  int num_speakers = 2;
  double overlap = 0.0;  // target overlap ratio in [0, 0.4]
  double clip_len_s = 12.0;
  double t60 = 0.3;
  std::string array = "ula8-8cm";
  double min_separation_deg = 15.0;
  double min_distance_m = 1.0;
  double max_distance_m = 2.0;
  Point3 dims_lo{3.0, 3.0, 2.5};
  Point3 dims_hi{7.0, 7.0, 3.0};
  double min_gap_s = 0.2;  // silence between turns when overlap == 0
  std::optional<double> low_activity_fraction;  // speaker 0 active this fraction of the clip
  double sample_rate = 16000.0;
};

struct Scenario {
  RoomSpec room;
  ActivityTimeline timeline;
  std::vector<double> azimuths_deg;  // per source, seen from the array centre
  uint64_t seed = 0;
};

Scenario SampleScenario(const ScenarioParams &params, uint64_t seed);

/// Same room, sources and timeline with the array replaced by another preset.
Scenario RenderOnArray(const Scenario &scenario, const std::string &preset);

/// Timeline built from a sequence of turns; exposed for tests.
ActivityTimeline BuildTimeline(int num_speakers, double overlap, double clip_len_s,
                               double min_gap_s, std::optional<double> low_activity_fraction,
                               uint64_t seed);

Eigen::VectorXd FftConvolve(const Eigen::VectorXd &x, const Eigen::VectorXd &h, Index out_len);

}  // namespace scoh
