// support.hpp

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

// Shared fixtures and brute-force oracles for the unit tests. Oracles here
// are written from the textbook definitions and deliberately avoid calling
// the library routine they check.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "scoh/signal_io.hpp"

namespace scoh::test {

inline Eigen::MatrixXd RandomSignal(int channels, Index n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  Eigen::MatrixXd x(channels, n);
  for (Index t = 0; t < n; ++t)
    for (int m = 0; m < channels; ++m) x(m, t) = g(rng);
  return x;
}

inline Eigen::MatrixXd RandomSymmetric(int n, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  return (a + a.transpose()) / 2.0;
}

// Direct O(N^2) DFT of one windowed frame, bins 0..N/2.
inline Eigen::VectorXcd DirectDft(const Eigen::VectorXd &frame, int fft_len) {
  Eigen::VectorXcd out(fft_len / 2 + 1);
  for (int f = 0; f <= fft_len / 2; ++f) {
    std::complex<double> acc = 0.0;
    for (Index k = 0; k < frame.size(); ++k)
      acc += frame(k) * std::polar(1.0, -2.0 * std::numbers::pi * f * k / fft_len);
    out(f) = acc;
  }
  return out;
}

inline Eigen::VectorXd DirectConvolve(const Eigen::VectorXd &x, const Eigen::VectorXd &h, Index out_len) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(out_len);
  for (Index t = 0; t < out_len; ++t)
    for (Index k = 0; k < h.size() && k <= t; ++k)
      if (t - k < x.size()) y(t) += h(k) * x(t - k);
  return y;
}

}  // namespace scoh::test
