// scoh/metrics.hpp

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

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "scoh/roomsim.hpp"

namespace scoh {

constexpr int kMaxSpeakers = 4;

/// counts(true - 1, predicted - 1).
struct ConfusionMatrix {
  Eigen::Matrix<long, kMaxSpeakers, kMaxSpeakers> counts =
      Eigen::Matrix<long, kMaxSpeakers, kMaxSpeakers>::Zero();

  long total() const { return counts.sum(); }
  /// Mass below the diagonal (predicted fewer speakers than present) / total.
  double UnderestimationRate() const;
  void Print(std::ostream &out) const;
};

double MacroF1(const std::vector<int> &truths, const std::vector<int> &preds);
ConfusionMatrix Confusion(const std::vector<int> &truths, const std::vector<int> &preds);

constexpr double kSiSdrCap = 100.0;

/// Scale-invariant SDR in dB, capped at +100 dB.
double SiSdr(const Eigen::VectorXd &reference, const Eigen::VectorXd &estimate);

/// SI-SDR restricted to samples where mask is nonzero.
double SiSdr(const Eigen::VectorXd &reference, const Eigen::VectorXd &estimate,
             const Eigen::VectorXd &mask);

/// 0/1 per sample: 1 where any listed speaker is active. Empty list = any speaker.
Eigen::VectorXd ActivityMask(const ActivityTimeline &timeline, const std::vector<int> &speakers,
                             double sample_rate, Index num_samples);

struct AlignedScores {
  std::vector<int> assignment;   // assignment[j] = estimate index for reference j
  std::vector<double> si_sdr;    // per reference
  double mean() const;
};

/// Best reference-to-estimate assignment by total SI-SDR (brute force over
/// permutations). references [J x N], estimates [K x N] with K >= J. When a
/// mask is given, SI-SDR is evaluated where it is nonzero.
AlignedScores AlignBySiSdr(const Eigen::MatrixXd &references, const Eigen::MatrixXd &estimates,
                           const Eigen::VectorXd *mask = nullptr);

}  // namespace scoh
