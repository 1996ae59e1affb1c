// scoh/dataset.hpp

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

// Simulated dataset layout:
//   manifest.csv                 one row per clip
//   clip_XXXX.wav                reverberant mixture, PCM16
//   clip_XXXX/timeline.csv       speaker,start_s,end_s
//   clip_XXXX/dominance.bin      "L F" text line, then int32 classes (0 = noise)
//   clip_XXXX/scenario.txt       key-value scenario
//   clip_XXXX/image_J.wav        speaker J image at the reference mic
// Mixture and images share one gain so the mixture peak stays below 0.9.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scoh/roomsim.hpp"

namespace scoh {

/// SplitMix64 step of seed ^ stream; used for every derived sub-seed.
uint64_t DeriveSeed(uint64_t seed, uint64_t stream);

struct SimulatedClip {
  Scenario scenario;
  Mixture mixture;
};

/// Scenario sampling, dry-source synthesis, RIRs and mixing from one seed.
SimulatedClip SimulateClip(const ScenarioParams &params, double snr_db, uint64_t seed,
                           const StftConfig &truth_cfg = StftConfig::Default());

/// Speaker images of a sampled scenario; mixing at several SNRs reuses them.
SpeakerImages RenderScenario(const Scenario &scenario, uint64_t seed);

struct DatasetSpec {
  int clips = 10;
  std::vector<int> speaker_counts{1, 2, 3, 4};  // cycled over clips
  double overlap_min = 0.0;
  double overlap_max = 0.4;
  double snr_db = 20.0;
  double t60 = 0.3;
  double clip_len_s = 12.0;
  std::string array = "ula8-8cm";
  uint64_t seed = 1;
};

struct ManifestEntry {
  std::string id;
  int num_speakers = 0;
  double overlap = 0.0;   // measured on the timeline
  double snr_db = 0.0;
  double t60 = 0.0;
  std::string array;
  uint64_t seed = 0;
  double gain = 1.0;
};

std::vector<ManifestEntry> SimulateDataset(const DatasetSpec &spec, const std::string &dir);
std::vector<ManifestEntry> ReadManifest(const std::string &dir);

struct ClipData {
  ManifestEntry entry;
  MultichannelClip mixture;
  Scenario scenario;
  Eigen::MatrixXd images;       // [J x N] at the reference mic, mixture scale
  Eigen::MatrixXi dominance;    // [L x F]
};

ClipData LoadClip(const std::string &dir, const ManifestEntry &entry);

void WriteDominance(const Eigen::MatrixXi &dominance, const std::string &path);
Eigen::MatrixXi ReadDominance(const std::string &path);

}  // namespace scoh
