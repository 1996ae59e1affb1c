// scoh_cli.cpp

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

// Command-line front end: simulate datasets, train the counting and mask
// networks, count speakers, separate, and compare array robustness.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scoh/counting.hpp"
#include "scoh/dataset.hpp"
#include "scoh/gladlite.hpp"
#include "scoh/kv_config.hpp"
#include "scoh/metrics.hpp"
#include "scoh/separation.hpp"

namespace fs = std::filesystem;
using namespace scoh;

namespace {

struct Options {
  uint64_t seed = 1;
  std::string out;
  std::string dataset;
  std::vector<std::string> models;
  std::string variant = "proposal2";
  std::vector<std::string> methods{"mask"};
  std::vector<std::string> arrays;
  double snr = 20.0;
  double t60 = 0.3;
  double overlap = 0.4;
  double overlap_min = 0.0;
  std::vector<int> speakers{1, 2, 3, 4};
  int clips = 10;
  double clip_len = 12.0;
  int epochs = 20;
  bool oracle_activity = false;
};

void RequireDataset(const std::string &dir) {
  Require(!dir.empty(), ErrorKind::kConfiguration, "--dataset is required");
  Require(fs::is_regular_file(fs::path(dir) / "manifest.csv"), ErrorKind::kIo,
          "no dataset at '" + dir + "' (manifest.csv missing)");
}

void RequireOutputFile(const std::string &path) {
  Require(!path.empty(), ErrorKind::kConfiguration, "--out is required");
  fs::path parent = fs::absolute(path).parent_path();
  std::error_code ec;
  fs::create_directories(parent, ec);
  Require(fs::is_directory(parent), ErrorKind::kIo, "cannot create '" + parent.string() + "'");
}

void RequireOutputDir(const std::string &path) {
  Require(!path.empty(), ErrorKind::kConfiguration, "--out is required");
  std::error_code ec;
  fs::create_directories(path, ec);
  Require(fs::is_directory(path), ErrorKind::kIo, "cannot create '" + path + "'");
}

std::ofstream OpenOut(const std::string &path) {
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write '" + path + "'");
  out << std::setprecision(9);
  return out;
}

// ---------------------------------------------------------------------------

int RunSimulate(const Options &o) {
  RequireOutputDir(o.out);
  DatasetSpec spec;
  spec.clips = o.clips;
  spec.speaker_counts = o.speakers;
  spec.overlap_min = o.overlap_min;
  spec.overlap_max = o.overlap;
  spec.snr_db = o.snr;
  spec.t60 = o.t60;
  spec.clip_len_s = o.clip_len;
  spec.array = o.arrays.empty() ? "ula8-8cm" : o.arrays.front();
  spec.seed = o.seed;
  for (int j : spec.speaker_counts)
    Require(j >= 1 && j <= kMaxSpeakers, ErrorKind::kConfiguration, "speaker counts must be in 1..4");
  auto entries = SimulateDataset(spec, o.out);
  std::cout << "wrote " << entries.size() << " clips to " << o.out << '\n';
  return 0;
}

Eigen::MatrixXd ActivityFor(const ClipData &d, bool oracle, const Spectrogram &spec) {
  if (oracle) return ActivityFromDominance(d.dominance, d.entry.num_speakers);
  return BlindActivity(spec, d.entry.num_speakers);
}

int RunTrainScnet(const Options &o) {
  RequireDataset(o.dataset);
  RequireOutputFile(o.out);
  const CountVariant variant = ParseVariant(o.variant);
  const auto entries = ReadManifest(o.dataset);
  Eigen::MatrixXd features(entries.size(), FeatureLength(variant));
  std::vector<int> labels;
  for (size_t i = 0; i < entries.size(); ++i) {
    const MultichannelClip clip = ReadWav((fs::path(o.dataset) / (entries[i].id + ".wav")).string());
    features.row(i) = AssembleFeature(Stft(clip), variant).transpose();
    labels.push_back(entries[i].num_speakers);
  }
  std::vector<EpochRecord> curve;
  ScnetModel model = TrainScnet(features, labels, variant, ScnetTrainConfig{}, o.seed, &curve);
  model.Save(o.out);
  auto csv = OpenOut(o.out + ".curve.csv");
  WriteCurveCsv(curve, csv);
  std::cout << "trained " << VariantName(variant) << " on " << entries.size() << " clips, "
            << curve.size() << " epochs; model " << o.out << '\n';
  return 0;
}

int RunTrainGladLite(const Options &o) {
  RequireDataset(o.dataset);
  RequireOutputFile(o.out);
  const auto entries = ReadManifest(o.dataset);
  GladLiteConfig cfg;
  std::vector<GladSample> samples;
  for (const auto &e : entries) {
    ClipData d = LoadClip(o.dataset, e);
    const Spectrogram spec = Stft(d.mixture);
    auto s = BuildGladSamples(d.mixture, d.images, ActivityFor(d, o.oracle_activity, spec), cfg);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  GladTrainConfig train;
  train.epochs = o.epochs;
  std::vector<GladEpochRecord> curve;
  GladLiteModel model = TrainGladLite(samples, cfg, train, o.seed, &curve);
  model.Save(o.out);
  auto csv = OpenOut(o.out + ".curve.csv");
  csv << "epoch,mean_loss,learning_rate\n";
  for (const auto &r : curve) csv << r.epoch << ',' << r.mean_loss << ',' << r.learning_rate << '\n';
  std::cout << "trained mask network on " << samples.size() << " speaker samples; loss "
            << curve.front().mean_loss << " -> " << curve.back().mean_loss << "; model " << o.out << '\n';
  return 0;
}

int RunCount(const Options &o) {
  RequireDataset(o.dataset);
  RequireOutputFile(o.out);
  Require(!o.models.empty(), ErrorKind::kConfiguration, "--model is required");
  std::vector<ScnetModel> models;
  for (const auto &path : o.models) models.push_back(ScnetModel::Load(path));
  for (const auto &m : models)
    Require(m.input_width() == FeatureLength(m.variant()), ErrorKind::kConfiguration,
            "model input width does not match variant " + VariantName(m.variant()));

  const auto entries = ReadManifest(o.dataset);
  std::vector<int> truths;
  std::vector<std::vector<int>> preds(models.size());
  auto csv = OpenOut(o.out);
  csv << "clip,variant,truth,prediction,p1,p2,p3,p4\n";
  for (const auto &e : entries) {
    const MultichannelClip clip = ReadWav((fs::path(o.dataset) / (e.id + ".wav")).string());
    const auto feats = AssembleAllFeatures(Stft(clip));
    truths.push_back(e.num_speakers);
    for (size_t k = 0; k < models.size(); ++k) {
      size_t vi = std::find(kAllVariants.begin(), kAllVariants.end(), models[k].variant()) - kAllVariants.begin();
      Eigen::Vector4d p = models[k].Probabilities(feats[vi]);
      int pred = PredictCount(p);
      preds[k].push_back(pred);
      csv << e.id << ',' << VariantName(models[k].variant()) << ',' << e.num_speakers << ',' << pred;
      for (int c = 0; c < 4; ++c) csv << ',' << p(c);
      csv << '\n';
    }
  }
  std::cout << std::left << std::setw(12) << "variant" << std::setw(10) << "macro-F1"
            << "underestimation\n";
  for (size_t k = 0; k < models.size(); ++k) {
    ConfusionMatrix cm = Confusion(truths, preds[k]);
    std::cout << std::setw(12) << VariantName(models[k].variant()) << std::setw(10) << std::fixed
              << std::setprecision(4) << MacroF1(truths, preds[k]) << cm.UnderestimationRate() << '\n';
  }
  for (size_t k = 0; k < models.size(); ++k) {
    std::cout << '\n' << VariantName(models[k].variant()) << " confusion\n";
    Confusion(truths, preds[k]).Print(std::cout);
  }
  return 0;
}

int RunSeparate(const Options &o) {
  RequireDataset(o.dataset);
  RequireOutputDir(o.out);
  std::vector<SeparationMethod> methods;
  for (const auto &m : o.methods) methods.push_back(ParseMethod(m));
  std::optional<GladLiteModel> glad;
  for (auto m : methods)
    if (m == SeparationMethod::kGladLite) {
      Require(!o.models.empty(), ErrorKind::kConfiguration, "gladlite needs --model");
      glad = GladLiteModel::Load(o.models.front());
    }

  const auto entries = ReadManifest(o.dataset);
  auto report = OpenOut((fs::path(o.out) / "report.csv").string());
  report << "clip,method,speaker,si_sdr,mixture_si_sdr,improvement,flagged\n";
  std::map<SeparationMethod, std::vector<double>> improvements;
  for (const auto &e : entries) {
    ClipData d = LoadClip(o.dataset, e);
    const Eigen::MatrixXd oracle = ActivityFromDominance(d.dominance, e.num_speakers);
    const Eigen::VectorXd span = ActivityMask(d.scenario.timeline, {}, d.mixture.sample_rate, d.mixture.num_samples());
    const Eigen::VectorXd mix = d.mixture.samples.row(0).transpose();
    const fs::path dir = fs::path(o.out) / e.id;
    fs::create_directories(dir);
    for (auto method : methods) {
      SeparationOptions opt;
      opt.method = method;
      opt.gladlite = glad ? &*glad : nullptr;
      if (o.oracle_activity) opt.oracle_activity = &oracle;
      SeparationResult res = Separate(d.mixture, e.num_speakers, opt);
      Eigen::MatrixXd est(e.num_speakers, d.mixture.num_samples());
      for (int j = 0; j < e.num_speakers; ++j) {
        WriteWav(res.outputs[j], (dir / (MethodName(method) + "_spk" + std::to_string(j + 1) + ".wav")).string());
        est.row(j) = res.outputs[j].samples.row(0);
      }
      AlignedScores al = AlignBySiSdr(d.images, est, &span);
      for (int j = 0; j < e.num_speakers; ++j) {
        double base = SiSdr(d.images.row(j).transpose(), mix, span);
        improvements[method].push_back(al.si_sdr[j] - base);
        report << e.id << ',' << MethodName(method) << ',' << j + 1 << ',' << al.si_sdr[j] << ',' << base
               << ',' << al.si_sdr[j] - base << ',' << (res.flagged[al.assignment[j]] ? 1 : 0) << '\n';
      }
    }
  }
  std::cout << std::left << std::setw(12) << "method" << "mean SI-SDR improvement (dB)\n";
  for (const auto &[m, v] : improvements) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / std::max<size_t>(v.size(), 1);
    std::cout << std::setw(12) << MethodName(m) << std::fixed << std::setprecision(2) << mean << '\n';
  }
  return 0;
}

int RunMac(const Options &o) {
  RequireOutputFile(o.out);
  std::vector<std::string> arrays = o.arrays;
  if (arrays.empty()) arrays = ArrayPresetNames();
  Require(arrays.size() >= 2, ErrorKind::kConfiguration, "MAC needs at least two array presets");
  const size_t n = arrays.size();
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(n, n), coh = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < o.clips; ++s) {
    ScenarioParams p;
    p.num_speakers = o.speakers.at(s % o.speakers.size());
    p.overlap = p.num_speakers == 1 ? 0.0 : o.overlap;
    p.t60 = o.t60;
    p.clip_len_s = o.clip_len;
    p.array = arrays.front();
    const uint64_t seed = DeriveSeed(o.seed, s);
    const Scenario base = SampleScenario(p, DeriveSeed(seed, 1));
    std::vector<SpatialMatrix> wc, wh;
    for (const auto &a : arrays) {
      const Scenario sc = RenderOnArray(base, a);
      const Mixture mix = MixImages(RenderScenario(sc, seed), o.snr, DeriveSeed(seed, 2));
      const Spectrogram spec = Stft(mix.clip);
      wc.push_back(VariantMatrix(spec, CountVariant::kBaseline1));
      wh.push_back(VariantMatrix(spec, CountVariant::kProposal1));
    }
    for (size_t a = 0; a < n; ++a)
      for (size_t b = 0; b < n; ++b) {
        corr(a, b) += Mac(wc[a], wc[b]) / o.clips;
        coh(a, b) += Mac(wh[a], wh[b]) / o.clips;
      }
  }
  auto csv = OpenOut(o.out);
  csv << "matrix,array_a,array_b,mean_mac\n";
  for (const auto &[name, m] : {std::pair{"correlation", &corr}, std::pair{"coherence", &coh}})
    for (size_t a = 0; a < n; ++a)
      for (size_t b = 0; b < n; ++b) csv << name << ',' << arrays[a] << ',' << arrays[b] << ',' << (*m)(a, b) << '\n';
  for (const auto &[name, m] : {std::pair{"correlation", &corr}, std::pair{"coherence", &coh}}) {
    std::cout << name << " MAC over " << o.clips << " scenes\n" << std::setw(14) << "";
    for (const auto &a : arrays) std::cout << std::setw(14) << a;
    std::cout << '\n';
    for (size_t a = 0; a < n; ++a) {
      std::cout << std::setw(14) << arrays[a];
      for (size_t b = 0; b < n; ++b) std::cout << std::setw(14) << std::fixed << std::setprecision(4) << (*m)(a, b);
      std::cout << '\n';
    }
  }
  return 0;
}

// Expands "--config file" into "--key=value" arguments placed before the
// explicit ones, skipping keys already given on the command line.
std::vector<std::string> ExpandConfig(int argc, char **argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> out;
  std::string config;
  std::set<std::string> given;
  for (size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
      continue;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      continue;
    }
    if (args[i].rfind("--", 0) == 0) given.insert(args[i].substr(2, args[i].find('=') - 2));
    out.push_back(args[i]);
  }
  if (config.empty()) return out;
  KvConfig kv = KvConfig::Load(config);
  std::vector<std::string> injected;
  for (const auto &[key, value] : kv.values()) {
    if (given.count(key)) continue;
    std::istringstream parts(value);
    std::string item;
    bool any = false;
    while (parts >> item) {
      injected.push_back("--" + key + "=" + item);
      any = true;
    }
    if (!any) injected.push_back("--" + key + "=");
  }
  // The subcommand name must stay first.
  if (!out.empty()) out.insert(out.begin() + 1, injected.begin(), injected.end());
  return out;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multichannel speaker counting and separation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  Options o;

  auto common = [&o](CLI::App *c) {
    c->add_option("--seed", o.seed, "64-bit seed");
    c->add_option("--config", "key = value file mirroring these flags");
  };
  auto dataset_opt = [&o](CLI::App *c) { c->add_option("--dataset", o.dataset, "dataset directory")->required(); };

  auto *sim = app.add_subcommand("simulate", "simulate a dataset of reverberant mixtures");
  common(sim);
  sim->add_option("--out", o.out, "output directory")->required();
  sim->add_option("--clips", o.clips, "number of clips")->check(CLI::PositiveNumber);
  sim->add_option("--speakers", o.speakers, "speaker counts, cycled over clips")->delimiter(',');
  sim->add_option("--overlap", o.overlap, "largest overlap ratio")->check(CLI::Range(0.0, 0.4));
  sim->add_option("--overlap-min", o.overlap_min, "smallest overlap ratio")->check(CLI::Range(0.0, 0.4));
  sim->add_option("--snr", o.snr, "sensor SNR in dB");
  sim->add_option("--t60", o.t60, "reverberation time in s (0 = anechoic)")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--array", o.arrays, "array preset")->expected(1);
  sim->add_option("--clip-len", o.clip_len, "clip length in s")->check(CLI::PositiveNumber);

  auto *ts = app.add_subcommand("train-scnet", "train the speaker counting network");
  common(ts);
  dataset_opt(ts);
  ts->add_option("--out", o.out, "model file")->required();
  ts->add_option("--variant", o.variant, "baseline1|baseline2|proposal1|proposal2");

  auto *tg = app.add_subcommand("train-gladlite", "train the activity-driven mask network");
  common(tg);
  dataset_opt(tg);
  tg->add_option("--out", o.out, "model file")->required();
  tg->add_option("--epochs", o.epochs, "training epochs")->check(CLI::PositiveNumber);
  tg->add_flag("--oracle-activity", o.oracle_activity, "use ground-truth activities");

  auto *cnt = app.add_subcommand("count", "count speakers with trained models");
  common(cnt);
  dataset_opt(cnt);
  cnt->add_option("--model", o.models, "counting model file (repeat to compare variants)")->required();
  cnt->add_option("--out", o.out, "predictions CSV")->required();

  auto *sep = app.add_subcommand("separate", "separate speakers and score against ground truth");
  common(sep);
  dataset_opt(sep);
  sep->add_option("--out", o.out, "output directory")->required();
  sep->add_option("--method", o.methods, "mask|lcmv_mask|gladlite (repeatable)");
  sep->add_option("--model", o.models, "mask network model for gladlite")->expected(1);
  sep->add_flag("--oracle-activity", o.oracle_activity, "bypass the simplex with ground-truth activities");

  auto *mac = app.add_subcommand("mac", "MAC of spatial matrices across array presets");
  common(mac);
  mac->add_option("--out", o.out, "MAC table CSV")->required();
  mac->add_option("--array", o.arrays, "array presets (at least two)");
  mac->add_option("--clips", o.clips, "number of scenes")->check(CLI::PositiveNumber);
  mac->add_option("--speakers", o.speakers, "speaker counts, cycled over scenes")->delimiter(',');
  mac->add_option("--overlap", o.overlap, "overlap ratio")->check(CLI::Range(0.0, 0.4));
  mac->add_option("--snr", o.snr, "sensor SNR in dB");
  mac->add_option("--t60", o.t60, "reverberation time in s")->check(CLI::Range(0.0, 1.0));
  mac->add_option("--clip-len", o.clip_len, "clip length in s")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> args = ExpandConfig(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  } catch (const Error &e) {
    std::cerr << "scoh: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*sim) return RunSimulate(o);
    if (*ts) return RunTrainScnet(o);
    if (*tg) return RunTrainGladLite(o);
    if (*cnt) return RunCount(o);
    if (*sep) return RunSeparate(o);
    if (*mac) return RunMac(o);
  } catch (const Error &e) {
    std::cerr << "scoh: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "scoh: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
