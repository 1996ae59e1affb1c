// dataset.cpp

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

#include "scoh/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "scoh/error.hpp"
#include "scoh/kv_config.hpp"

namespace scoh {

namespace fs = std::filesystem;

uint64_t DeriveSeed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SpeakerImages RenderScenario(const Scenario &scenario, uint64_t seed) {
  const double fs = scenario.room.sample_rate;
  std::vector<MultichannelClip> sources;
  for (int j = 0; j < scenario.room.num_sources(); ++j)
    sources.push_back(SpeechLikeSource(scenario.timeline.clip_len_s, fs, DeriveSeed(seed, 100 + j)));
  return RenderImages(sources, scenario.timeline, SimulateRir(scenario.room));
}

SimulatedClip SimulateClip(const ScenarioParams &params, double snr_db, uint64_t seed,
                           const StftConfig &truth_cfg) {
  SimulatedClip out;
  out.scenario = SampleScenario(params, DeriveSeed(seed, 1));
  out.mixture = MixImages(RenderScenario(out.scenario, seed), snr_db, DeriveSeed(seed, 2), truth_cfg);
  return out;
}

namespace {

std::string ClipId(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%04d", i);
  return buf;
}

const char *kManifestHeader = "clip,num_speakers,overlap,snr_db,t60,array,seed,gain";

}  // namespace

void WriteDominance(const Eigen::MatrixXi &dominance, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out << dominance.rows() << ' ' << dominance.cols() << '\n';
  Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = dominance.cast<int32_t>();
  out.write(reinterpret_cast<const char *>(rm.data()), static_cast<std::streamsize>(rm.size() * 4));
  Require(static_cast<bool>(out), ErrorKind::kIo, "write to '" + path + "' failed");
}

Eigen::MatrixXi ReadDominance(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::istringstream head(line);
  Index rows = -1, cols = -1;
  head >> rows >> cols;
  Require(rows >= 0 && cols >= 0, ErrorKind::kFormat, "bad dominance header in '" + path + "'");
  Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  in.read(reinterpret_cast<char *>(rm.data()), static_cast<std::streamsize>(rm.size() * 4));
  Require(static_cast<bool>(in), ErrorKind::kFormat, "truncated dominance file '" + path + "'");
  return rm.cast<int>();
}

std::vector<ManifestEntry> SimulateDataset(const DatasetSpec &spec, const std::string &dir) {
  Require(spec.clips >= 1, ErrorKind::kContract, "dataset needs at least one clip");
  Require(!spec.speaker_counts.empty(), ErrorKind::kContract, "no speaker counts given");
  std::error_code ec;
  fs::create_directories(dir, ec);
  Require(!ec && fs::is_directory(dir), ErrorKind::kIo, "cannot create '" + dir + "'");

  std::mt19937_64 rng(DeriveSeed(spec.seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < spec.clips; ++i) {
    ManifestEntry e;
    e.id = ClipId(i);
    e.num_speakers = spec.speaker_counts[i % spec.speaker_counts.size()];
    e.seed = DeriveSeed(spec.seed, 1000 + i);
    e.snr_db = spec.snr_db;
    e.t60 = spec.t60;
    e.array = spec.array;
    const double draw = spec.overlap_min + (spec.overlap_max - spec.overlap_min) * unit(rng);

    ScenarioParams params;
    params.num_speakers = e.num_speakers;
    params.overlap = e.num_speakers == 1 ? 0.0 : draw;
    params.t60 = spec.t60;
    params.clip_len_s = spec.clip_len_s;
    params.array = spec.array;
    SimulatedClip sim = SimulateClip(params, spec.snr_db, e.seed);
    e.overlap = OverlapRatio(sim.scenario.timeline);

    const double peak = sim.mixture.clip.samples.cwiseAbs().maxCoeff();
    e.gain = peak > 0.0 ? 0.9 / peak : 1.0;
    MultichannelClip scaled(sim.mixture.clip.samples * e.gain, sim.mixture.clip.sample_rate);
    WriteWav(scaled, (fs::path(dir) / (e.id + ".wav")).string());

    const fs::path side = fs::path(dir) / e.id;
    fs::create_directories(side, ec);
    Require(!ec, ErrorKind::kIo, "cannot create '" + side.string() + "'");
    {
      std::ofstream tl(side / "timeline.csv");
      tl << "speaker,start_s,end_s\n" << std::setprecision(9);
      for (int j = 0; j < sim.scenario.timeline.num_speakers(); ++j)
        for (const auto &s : sim.scenario.timeline.intervals[j]) tl << j + 1 << ',' << s.start << ',' << s.end << '\n';
      Require(static_cast<bool>(tl), ErrorKind::kIo, "cannot write timeline for " + e.id);
    }
    WriteDominance(sim.mixture.truth.dominance, (side / "dominance.bin").string());
    ScenarioToConfig(sim.scenario).Save((side / "scenario.txt").string());
    for (int j = 0; j < sim.mixture.truth.num_speakers(); ++j) {
      MultichannelClip img(sim.mixture.truth.images.row(j) * e.gain, scaled.sample_rate);
      WriteWav(img, (side / ("image_" + std::to_string(j + 1) + ".wav")).string());
    }
    entries.push_back(e);
  }

  std::ofstream man(fs::path(dir) / "manifest.csv");
  Require(static_cast<bool>(man), ErrorKind::kIo, "cannot write manifest in '" + dir + "'");
  man << kManifestHeader << '\n' << std::setprecision(9);
  for (const auto &e : entries)
    man << e.id << ',' << e.num_speakers << ',' << e.overlap << ',' << e.snr_db << ',' << e.t60 << ','
        << e.array << ',' << e.seed << ',' << e.gain << '\n';
  Require(static_cast<bool>(man), ErrorKind::kIo, "manifest write failed");
  return entries;
}

std::vector<ManifestEntry> ReadManifest(const std::string &dir) {
  const fs::path path = fs::path(dir) / "manifest.csv";
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kIo, "no manifest at '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  Require(line == kManifestHeader, ErrorKind::kFormat, "unexpected manifest header in '" + path.string() + "'");
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    Require(f.size() == 8, ErrorKind::kFormat, "bad manifest row: " + line);
    ManifestEntry e;
    try {
      e.id = f[0];
      e.num_speakers = std::stoi(f[1]);
      e.overlap = std::stod(f[2]);
      e.snr_db = std::stod(f[3]);
      e.t60 = std::stod(f[4]);
      e.array = f[5];
      e.seed = std::stoull(f[6]);
      e.gain = std::stod(f[7]);
    } catch (const std::exception &) {
      Fail(ErrorKind::kFormat, "bad manifest row: " + line);
    }
    out.push_back(e);
  }
  return out;
}

ClipData LoadClip(const std::string &dir, const ManifestEntry &entry) {
  ClipData d;
  d.entry = entry;
  const fs::path base(dir);
  d.mixture = ReadWav((base / (entry.id + ".wav")).string());
  const fs::path side = base / entry.id;
  d.scenario = ScenarioFromConfig(KvConfig::Load((side / "scenario.txt").string()));
  d.dominance = ReadDominance((side / "dominance.bin").string());
  d.images.resize(entry.num_speakers, d.mixture.num_samples());
  for (int j = 0; j < entry.num_speakers; ++j) {
    MultichannelClip img = ReadWav((side / ("image_" + std::to_string(j + 1) + ".wav")).string());
    Require(img.num_samples() == d.mixture.num_samples(), ErrorKind::kFormat, "image length mismatch in " + entry.id);
    d.images.row(j) = img.samples.row(0);
  }
  return d;
}

}  // namespace scoh
