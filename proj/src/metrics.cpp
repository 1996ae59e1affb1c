// metrics.cpp

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

#include "scoh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "scoh/error.hpp"

namespace scoh {

namespace {

void CheckLabels(const std::vector<int> &truths, const std::vector<int> &preds) {
  Require(!truths.empty(), ErrorKind::kContract, "empty label list");
  Require(truths.size() == preds.size(), ErrorKind::kContract, "label lists differ in length");
  for (size_t i = 0; i < truths.size(); ++i)
    Require(truths[i] >= 1 && truths[i] <= kMaxSpeakers && preds[i] >= 1 && preds[i] <= kMaxSpeakers,
            ErrorKind::kContract, "labels must be in 1..4");
}

}  // namespace

ConfusionMatrix Confusion(const std::vector<int> &truths, const std::vector<int> &preds) {
  CheckLabels(truths, preds);
  ConfusionMatrix cm;
  for (size_t i = 0; i < truths.size(); ++i) ++cm.counts(truths[i] - 1, preds[i] - 1);
  return cm;
}

double ConfusionMatrix::UnderestimationRate() const {
  long lower = 0;
  for (int t = 0; t < kMaxSpeakers; ++t)
    for (int p = 0; p < t; ++p) lower += counts(t, p);
  return total() > 0 ? static_cast<double>(lower) / total() : 0.0;
}

void ConfusionMatrix::Print(std::ostream &out) const {
  out << std::right << "true\\pred";
  for (int p = 1; p <= kMaxSpeakers; ++p) out << std::setw(7) << p;
  out << '\n';
  for (int t = 0; t < kMaxSpeakers; ++t) {
    out << std::setw(9) << (t + 1);
    for (int p = 0; p < kMaxSpeakers; ++p) out << std::setw(7) << counts(t, p);
    out << '\n';
  }
}

double MacroF1(const std::vector<int> &truths, const std::vector<int> &preds) {
  ConfusionMatrix cm = Confusion(truths, preds);
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < kMaxSpeakers; ++c) {
    long support = cm.counts.row(c).sum();
    if (support == 0) continue;
    long tp = cm.counts(c, c);
    long predicted = cm.counts.col(c).sum();
    double f1 = tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(support + predicted);
    sum += f1;
    ++classes;
  }
  return sum / classes;
}

double SiSdr(const Eigen::VectorXd &reference, const Eigen::VectorXd &estimate) {
  Require(reference.size() == estimate.size(), ErrorKind::kContract, "SI-SDR length mismatch");
  const double ref_energy = reference.squaredNorm();
  Require(ref_energy > 0.0, ErrorKind::kContract, "SI-SDR reference is zero");
  const double alpha = estimate.dot(reference) / ref_energy;
  Eigen::VectorXd target = alpha * reference;
  const double num = target.squaredNorm();
  const double den = (target - estimate).squaredNorm();
  if (den <= 0.0) return kSiSdrCap;
  if (num <= 0.0) return -kSiSdrCap;
  return std::clamp(10.0 * std::log10(num / den), -kSiSdrCap, kSiSdrCap);
}

double SiSdr(const Eigen::VectorXd &reference, const Eigen::VectorXd &estimate,
             const Eigen::VectorXd &mask) {
  Require(mask.size() == reference.size(), ErrorKind::kContract, "SI-SDR mask length mismatch");
  Eigen::VectorXd keep = (mask.array() != 0.0).cast<double>();
  return SiSdr(reference.cwiseProduct(keep), estimate.cwiseProduct(keep));
}

Eigen::VectorXd ActivityMask(const ActivityTimeline &timeline, const std::vector<int> &speakers,
                             double sample_rate, Index num_samples) {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(num_samples);
  std::vector<int> list = speakers;
  if (list.empty()) {
    list.resize(timeline.num_speakers());
    std::iota(list.begin(), list.end(), 0);
  }
  for (int j : list)
    for (const auto &span : timeline.intervals.at(j)) {
      Index a = std::max<Index>(0, static_cast<Index>(std::llround(span.start * sample_rate)));
      Index b = std::min<Index>(num_samples, static_cast<Index>(std::llround(span.end * sample_rate)));
      if (b > a) mask.segment(a, b - a).setOnes();
    }
  return mask;
}

double AlignedScores::mean() const {
  return si_sdr.empty() ? 0.0 : std::accumulate(si_sdr.begin(), si_sdr.end(), 0.0) / si_sdr.size();
}

AlignedScores AlignBySiSdr(const Eigen::MatrixXd &references, const Eigen::MatrixXd &estimates,
                           const Eigen::VectorXd *mask) {
  const int refs = static_cast<int>(references.rows());
  const int ests = static_cast<int>(estimates.rows());
  Require(refs >= 1 && ests >= refs, ErrorKind::kContract, "need at least as many estimates as references");
  Require(ests <= 8, ErrorKind::kContract, "too many estimates for brute-force alignment");

  Eigen::MatrixXd score(refs, ests);
  for (int j = 0; j < refs; ++j)
    for (int k = 0; k < ests; ++k) {
      Eigen::VectorXd r = references.row(j).transpose(), e = estimates.row(k).transpose();
      score(j, k) = mask ? SiSdr(r, e, *mask) : SiSdr(r, e);
    }

  std::vector<int> perm(ests);
  std::iota(perm.begin(), perm.end(), 0);
  AlignedScores best;
  double best_total = -1e300;
  do {
    double total = 0.0;
    for (int j = 0; j < refs; ++j) total += score(j, perm[j]);
    if (total > best_total) {
      best_total = total;
      best.assignment.assign(perm.begin(), perm.begin() + refs);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.si_sdr.resize(refs);
  for (int j = 0; j < refs; ++j) best.si_sdr[j] = score(j, best.assignment[j]);
  return best;
}

}  // namespace scoh
