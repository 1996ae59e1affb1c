// spatial_features.cpp

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

#include "scoh/spatial_features.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace scoh {

BandSelection BandSelection::FromRange(const StftConfig &cfg, double sample_rate, double f_lo,
                                       double f_hi) {
  BandSelection band;
  band.f_lo = f_lo;
  band.f_hi = f_hi;
  for (int f = 0; f < cfg.num_bins(); ++f) {
    double hz = cfg.BinHz(f, sample_rate);
    if (hz >= f_lo && hz <= f_hi) band.bins.push_back(f);
  }
  return band;
}

BandSelection BandSelection::All(const StftConfig &cfg, double sample_rate) {
  return FromRange(cfg, sample_rate, 0.0, sample_rate / 2.0);
}

std::string_view SpatialKindName(SpatialKind kind) {
  return kind == SpatialKind::kCorrelation ? "correlation" : "coherence";
}

namespace {

void CheckMultichannel(const Spectrogram &spec) {
  Require(spec.num_channels() >= 2, ErrorKind::kConfiguration,
          "spatial features need at least two microphones");
}

void CheckBand(const Spectrogram &spec, const BandSelection &band) {
  Require(!band.bins.empty(), ErrorKind::kConfiguration, "empty frequency band");
  for (size_t k = 0; k < band.bins.size(); ++k) {
    Require(band.bins[k] >= 0 && band.bins[k] < spec.num_bins(), ErrorKind::kSize,
            "band bin outside the spectrum");
    if (k > 0)
      Require(band.bins[k] > band.bins[k - 1], ErrorKind::kConfiguration,
              "band bins must be strictly increasing");
  }
}

inline std::complex<double> Ratio(std::complex<double> xm, std::complex<double> x1, double eps) {
  return xm * std::conj(x1) / (std::norm(x1) + eps);
}

}  // namespace

double DefaultRtfEps(const Spectrogram &spec, const BandSelection &band) {
  Require(spec.num_channels() >= 1, ErrorKind::kSize, "empty spectrogram");
  const auto &x1 = spec.channels[0];
  double total = 0.0;
  Index used = 0;
  for (int f : band.bins)
    if (f >= 0 && f < spec.num_bins()) {
      total += x1.col(f).squaredNorm();
      ++used;
    }
  // A band outside this spectrum falls back to every bin.
  if (used == 0) {
    total = x1.squaredNorm();
    used = spec.num_bins();
  }
  double mean = total / std::max<double>(1.0, static_cast<double>(used) * spec.num_frames());
  return mean > 0.0 ? 1e-9 * mean : 1e-30;
}

std::vector<Eigen::MatrixXcd> RtfRatios(const Spectrogram &spec, double eps) {
  CheckMultichannel(spec);
  const auto &x1 = spec.channels[0];
  std::vector<Eigen::MatrixXcd> out;
  for (int m = 1; m < spec.num_channels(); ++m) {
    const auto &xm = spec.channels[m];
    out.push_back(xm.binaryExpr(x1, [eps](std::complex<double> a, std::complex<double> b) {
      return Ratio(a, b, eps);
    }));
  }
  return out;
}

Eigen::MatrixXd ComputeRtfFeatures(const Spectrogram &spec, const BandSelection &band, double eps) {
  CheckMultichannel(spec);
  CheckBand(spec, band);
  const int mics = spec.num_channels() - 1;
  const int k_count = band.size();
  const Index half = static_cast<Index>(mics) * k_count;
  const Index frames = spec.num_frames();
  Eigen::MatrixXd r(2 * half, frames);
  const auto &x1 = spec.channels[0];
  for (Index l = 0; l < frames; ++l) {
    for (int m = 0; m < mics; ++m) {
      const auto &xm = spec.channels[m + 1];
      for (int k = 0; k < k_count; ++k) {
        int f = band.bins[k];
        std::complex<double> v = Ratio(xm(l, f), x1(l, f), eps);
        r(m * k_count + k, l) = v.real();
        r(half + m * k_count + k, l) = v.imag();
      }
    }
  }
  return r;
}

std::vector<Eigen::MatrixXcd> WhitenedRatios(const Spectrogram &spec, double eps, double floor) {
  auto ratios = RtfRatios(spec, eps);
  for (auto &r : ratios)
    r = r.unaryExpr([floor](std::complex<double> v) {
      double mag = std::abs(v);
      return mag < floor ? std::complex<double>(0.0, 0.0) : v / mag;
    });
  return ratios;
}

Eigen::MatrixXcd ComputeWrtfFeatures(const Spectrogram &spec, const BandSelection &band,
                                     double floor) {
  CheckMultichannel(spec);
  CheckBand(spec, band);
  const double eps = DefaultRtfEps(spec, band);
  const int mics = spec.num_channels() - 1;
  const int k_count = band.size();
  const Index frames = spec.num_frames();
  Eigen::MatrixXcd r(static_cast<Index>(mics) * k_count, frames);
  const auto &x1 = spec.channels[0];
  for (Index l = 0; l < frames; ++l) {
    for (int m = 0; m < mics; ++m) {
      const auto &xm = spec.channels[m + 1];
      for (int k = 0; k < k_count; ++k) {
        int f = band.bins[k];
        std::complex<double> v = Ratio(xm(l, f), x1(l, f), eps);
        double mag = std::abs(v);
        r(m * k_count + k, l) = mag < floor ? std::complex<double>(0.0, 0.0) : v / mag;
      }
    }
  }
  return r;
}

SpatialMatrix CorrelationMatrix(const Eigen::MatrixXd &features) {
  Require(features.cols() >= 1 && features.rows() >= 1, ErrorKind::kSize, "no features");
  SpatialMatrix out;
  out.kind = SpatialKind::kCorrelation;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(features.cols(), features.cols());
  w.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose(), 1.0 / features.rows());
  out.w = w.selfadjointView<Eigen::Lower>();
  return out;
}

SpatialMatrix CoherenceMatrix(const Eigen::MatrixXcd &features) {
  Require(features.cols() >= 1 && features.rows() >= 1, ErrorKind::kSize, "no features");
  const Index frames = features.cols();
  Eigen::VectorXd norms = features.colwise().norm().transpose();
  Eigen::MatrixXd stacked(2 * features.rows(), frames);
  for (Index l = 0; l < frames; ++l) {
    double inv = norms(l) > 0.0 ? 1.0 / norms(l) : 0.0;
    stacked.col(l).head(features.rows()) = features.col(l).real() * inv;
    stacked.col(l).tail(features.rows()) = features.col(l).imag() * inv;
  }
  // Re{a^H b} = Re(a)^T Re(b) + Im(a)^T Im(b)
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(frames, frames);
  w.selfadjointView<Eigen::Lower>().rankUpdate(stacked.transpose());
  SpatialMatrix out;
  out.kind = SpatialKind::kCoherence;
  out.w = w.selfadjointView<Eigen::Lower>();
  out.w = out.w.cwiseMax(-1.0).cwiseMin(1.0);
  for (Index l = 0; l < frames; ++l) out.w(l, l) = 1.0;
  return out;
}

void WriteSpatialMatrixCsv(const SpatialMatrix &m, std::ostream &out) {
  out << std::setprecision(17);
  for (Index i = 0; i < m.size(); ++i) {
    for (Index j = 0; j < m.size(); ++j) {
      if (j) out << ',';
      out << m.w(i, j);
    }
    out << '\n';
  }
}

void WriteSpatialMatrixRaw(const SpatialMatrix &m, const std::string &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot write " + path);
  out << m.size() << ' ' << SpatialKindName(m.kind) << '\n';
  for (Index i = 0; i < m.size(); ++i)
    for (Index j = 0; j < m.size(); ++j) {
      double v = m.w(i, j);
      char bytes[8];
      std::memcpy(bytes, &v, 8);
      out.write(bytes, 8);
    }
  Require(out.good(), ErrorKind::kIo, "write failed for " + path);
}

SpatialMatrix ReadSpatialMatrixRaw(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kIo, "cannot open " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  Index size = 0;
  std::string kind;
  hs >> size >> kind;
  Require(size > 0 && (kind == "correlation" || kind == "coherence"), ErrorKind::kFormat,
          path + ": bad spatial matrix header");
  SpatialMatrix m;
  m.kind = kind == "correlation" ? SpatialKind::kCorrelation : SpatialKind::kCoherence;
  m.w.resize(size, size);
  for (Index i = 0; i < size; ++i)
    for (Index j = 0; j < size; ++j) {
      char bytes[8];
      in.read(bytes, 8);
      Require(in.good(), ErrorKind::kFormat, path + ": truncated payload");
      std::memcpy(&m.w(i, j), bytes, 8);
    }
  return m;
}

}  // namespace scoh
