// scoh/spatial_features.hpp

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

// Relative transfer function features and frame-by-frame spatial matrices.
//
// Feature matrices hold one frame per column. For the RTF feature the column
// is [Re r^c(l); Im r^c(l)] with r^c(l) = [R^2(l, f_1..f_K), ..., R^M(l, f_1..f_K)],
// D = 2 (M - 1) K rows. The whitened feature keeps the complex ratios divided
// by their magnitude, (M - 1) K rows.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scoh/error.hpp"
#include "scoh/signal_io.hpp"

namespace scoh {

struct BandSelection {
  double f_lo = 1000.0;
  double f_hi = 3000.0;
  std::vector<int> bins;

  /// All bins whose centre frequency lies in [f_lo, f_hi].
  static BandSelection FromRange(const StftConfig &cfg, double sample_rate, double f_lo = 1000.0,
                                 double f_hi = 3000.0);
  /// Every bin of the spectrum.
  static BandSelection All(const StftConfig &cfg, double sample_rate);
  int size() const { return static_cast<int>(bins.size()); }
};

enum class SpatialKind { kCorrelation, kCoherence };

std::string_view SpatialKindName(SpatialKind kind);

struct SpatialMatrix {
  Eigen::MatrixXd w;
  SpatialKind kind = SpatialKind::kCoherence;

  Index size() const { return w.rows(); }
};

constexpr double kWhiteningFloor = 1e-12;

/// eps = 1e-9 x mean reference-channel power over the band. Bins outside the
/// spectrum are ignored; with none left the whole spectrum is used.
double DefaultRtfEps(const Spectrogram &spec, const BandSelection &band);

/// Regularized ratios R^m = X^m conj(X^1) / (|X^1|^2 + eps) for m = 2..M over
/// all bins; element m-2 is [L x F].
std::vector<Eigen::MatrixXcd> RtfRatios(const Spectrogram &spec, double eps);

/// [D x L] real RTF features over the band.
Eigen::MatrixXd ComputeRtfFeatures(const Spectrogram &spec, const BandSelection &band, double eps);
inline Eigen::MatrixXd ComputeRtfFeatures(const Spectrogram &spec, const BandSelection &band) {
  return ComputeRtfFeatures(spec, band, DefaultRtfEps(spec, band));
}

/// [(M-1)K x L] whitened features; entries with |R| < floor are 0.
Eigen::MatrixXcd ComputeWrtfFeatures(const Spectrogram &spec, const BandSelection &band,
                                     double floor = kWhiteningFloor);

/// Per-bin whitened ratios, element m-2 is [L x F].
std::vector<Eigen::MatrixXcd> WhitenedRatios(const Spectrogram &spec, double eps,
                                             double floor = kWhiteningFloor);

/// W = R^T R / D.
SpatialMatrix CorrelationMatrix(const Eigen::MatrixXd &features);

/// W~_ln = Re{r~(l)^H r~(n)} / (|r~(l)| |r~(n)|); zero-norm frames give a zero
/// row and column with unit diagonal.
SpatialMatrix CoherenceMatrix(const Eigen::MatrixXcd &features);

/// Modal assurance criterion between two matrices, vectorized row-major.
template <typename DerivedA, typename DerivedB>
double Mac(const Eigen::MatrixBase<DerivedA> &a, const Eigen::MatrixBase<DerivedB> &b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::kSize,
          "MAC needs matrices of equal size");
  // The inner products do not depend on the vectorization order.
  const double ab = a.cwiseProduct(b).sum();
  const double aa = a.squaredNorm();
  const double bb = b.squaredNorm();
  Require(aa > 0.0 && bb > 0.0, ErrorKind::kUndefined, "MAC of a zero matrix");
  return ab * ab / (aa * bb);
}

inline double Mac(const SpatialMatrix &a, const SpatialMatrix &b) { return Mac(a.w, b.w); }

void WriteSpatialMatrixCsv(const SpatialMatrix &m, std::ostream &out);
/// One text line "L kind" then L*L little-endian float64 values, row-major.
void WriteSpatialMatrixRaw(const SpatialMatrix &m, const std::string &path);
SpatialMatrix ReadSpatialMatrixRaw(const std::string &path);

}  // namespace scoh
