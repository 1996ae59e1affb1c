// scoh/separation.hpp

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

// Per-speaker RTF estimation from global activities, local coherence maps,
// the weighted nearest-neighbour spectral mask, LCMV beamforming, and the
// end-to-end separation chain.

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scoh/signal_io.hpp"
#include "scoh/spatial_features.hpp"

namespace scoh {

class GladLiteModel;

constexpr double kActivityThreshold = 0.2;
constexpr double kMaskBeta = 0.1;
constexpr double kLcmvBeta = 0.2;
constexpr double kLcmvMaxCondition = 1e8;

struct SpeakerRtf {
  std::vector<Eigen::MatrixXcd> a_hat;           // per speaker [M x F], row 0 is 1
  std::vector<std::vector<Index>> frames_used;   // frames with activity above threshold
  std::vector<bool> valid;                       // false when no frame qualified

  int num_speakers() const { return static_cast<int>(a_hat.size()); }
  int num_mics() const { return a_hat.empty() ? 0 : static_cast<int>(a_hat[0].rows()); }
  Index num_bins() const { return a_hat.empty() ? 0 : a_hat[0].cols(); }
  /// Unit-magnitude non-reference entries, [(M-1) x F]; zero where |A| is 0.
  Eigen::MatrixXcd Whitened(int j) const;
  /// [M x J] steering matrix at bin f for the given speakers.
  Eigen::MatrixXcd Steering(Index f, const std::vector<int> &speakers) const;
};

/// A^m_j(f) = sum_{l in L_j} X^m X^1* / sum_{l in L_j} |X^1|^2 over every bin,
/// L_j = {l : p_j(l) > threshold}. activity is [L x J]. In strict mode an
/// empty L_j raises a low-activity error; otherwise the speaker is marked
/// invalid and its RTF left at 1.
SpeakerRtf EstimateSpeakerRtf(const Spectrogram &spec, const Eigen::MatrixXd &activity,
                              double threshold = kActivityThreshold, bool strict = true);

/// p^L_j(l, f) = Re{a~_j(f)^H r~(l, f)} / (M - 1), one [L x F] map per speaker.
std::vector<Eigen::MatrixXd> LocalCoherence(const Spectrogram &spec, const SpeakerRtf &rtf);

/// [L x F] class per bin in 1..J+1 (J+1 = noise). ratios are the per-bin RTF
/// ratios of mics 2..M, activity [L x J].
Eigen::MatrixXi SpectralMask(const std::vector<Eigen::MatrixXcd> &ratios,
                             const Eigen::MatrixXd &activity);
Eigen::MatrixXi SpectralMask(const Spectrogram &spec, const Eigen::MatrixXd &activity);

/// Reference channel where mask == j, beta times the reference elsewhere.
Spectrogram ApplyMask(const Spectrogram &spec, const Eigen::MatrixXi &mask, int j,
                      double beta = kMaskBeta);

/// w = A (A^H A)^{-1} e_j for steering matrix A [M x J]. Throws a
/// conditioning error when cond(A^H A) exceeds the limit.
Eigen::VectorXcd LcmvWeights(const Eigen::MatrixXcd &steering, int j,
                             double max_condition = kLcmvMaxCondition);

struct LcmvResult {
  std::vector<Spectrogram> outputs;  // one per speaker
  Index fallback_bins = 0;           // bins that used the masked reference
};

/// S_j = w_j^H x, scaled by beta where mask != j. Ill-conditioned bins and
/// invalid speakers fall back to the masked reference channel.
LcmvResult LcmvMaskSeparate(const Spectrogram &spec, const SpeakerRtf &rtf,
                            const Eigen::MatrixXi &mask, double beta = kLcmvBeta);

/// Maps a per-frame activity computed with one framing onto another by
/// nearest frame centre.
Eigen::MatrixXd ResampleActivity(const Eigen::MatrixXd &activity, const StftConfig &from,
                                 const StftConfig &to, Index num_samples);

enum class SeparationMethod { kMask, kLcmvMask, kGladLite };

std::string MethodName(SeparationMethod m);
SeparationMethod ParseMethod(const std::string &name);

struct SeparationOptions {
  SeparationMethod method = SeparationMethod::kMask;
  /// Activities [L x J] at the default framing; bypasses the simplex when set.
  const Eigen::MatrixXd *oracle_activity = nullptr;
  const GladLiteModel *gladlite = nullptr;
  double mask_beta = kMaskBeta;
  double lcmv_beta = kLcmvBeta;
  double activity_threshold = kActivityThreshold;
};

struct SeparationResult {
  std::vector<MultichannelClip> outputs;  // one-channel clips, simplex vertex order
  std::vector<bool> flagged;              // low-activity speakers
  Eigen::MatrixXd activity;               // [L x J] at the default framing
  Index fallback_bins = 0;
};

/// STFT -> coherence matrix -> simplex activities -> method-specific
/// separation -> iSTFT.
SeparationResult Separate(const MultichannelClip &clip, int num_speakers,
                          const SeparationOptions &options = {});

/// Global activities from the coherence matrix of a spectrogram.
Eigen::MatrixXd BlindActivity(const Spectrogram &spec, int num_speakers);

}  // namespace scoh
