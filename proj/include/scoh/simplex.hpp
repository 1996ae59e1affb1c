// scoh/simplex.hpp

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

// Eigen-structure of spatial matrices: the frames of each speaker span one
// vertex of a simplex in the leading-eigenvector coordinates. Vertices are
// found by successive projection and activities recovered by inverting the
// vertex matrix.

#pragma once

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Jacobi>

#include "scoh/error.hpp"
#include "scoh/spatial_features.hpp"

namespace scoh {

/// Eigenvalues sorted descending, eigenvectors as matching orthonormal columns.
template <typename Scalar>
struct EigenDecompositionT {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;
};
using EigenDecomposition = EigenDecompositionT<double>;

namespace internal {

template <typename Scalar>
void SortDescending(EigenDecompositionT<Scalar> &eig) {
  const Index n = eig.values.size();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return eig.values(a) > eig.values(b); });
  EigenDecompositionT<Scalar> sorted;
  sorted.values.resize(n);
  sorted.vectors.resize(eig.vectors.rows(), n);
  for (Index i = 0; i < n; ++i) {
    sorted.values(i) = eig.values(order[i]);
    sorted.vectors.col(i) = eig.vectors.col(order[i]);
  }
  eig = std::move(sorted);
}

}  // namespace internal

/// Cyclic Jacobi eigensolver for a symmetric matrix. Sweeps until the
/// off-diagonal Frobenius norm is below rel_tol * |A|_F.
template <typename Derived>
EigenDecompositionT<typename Derived::Scalar> JacobiEigen(
    const Eigen::MatrixBase<Derived> &input,
    typename Derived::Scalar rel_tol = typename Derived::Scalar(1e-12), int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Require(input.rows() == input.cols(), ErrorKind::kContract, "eigensolver needs a square matrix");
  Matrix a = input;
  const Index n = a.rows();
  const Scalar scale = std::max<Scalar>(Scalar(1), a.cwiseAbs().maxCoeff());
  Require((a - a.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-9) * scale, ErrorKind::kContract,
          "eigensolver input is not symmetric");
  a = (a + a.transpose()) / Scalar(2);

  Matrix v = Matrix::Identity(n, n);
  const Scalar target = rel_tol * a.norm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    // Summed directly; |A|^2 - |diag|^2 cancels to zero long before convergence.
    const Scalar off = std::sqrt(Scalar(2)) * Matrix(a.template triangularView<Eigen::StrictlyUpper>()).norm();
    if (off <= target) break;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
        v.applyOnTheRight(p, q, rot);
      }
    }
  }
  EigenDecompositionT<Scalar> eig{a.diagonal(), v};
  internal::SortDescending(eig);
  return eig;
}

enum class EigenMethod {
  kJacobi,         // in-repo cyclic Jacobi
  kTridiagonalQr,  // Eigen's SelfAdjointEigenSolver, used on full-length clips
};

EigenDecomposition EigSym(const Eigen::MatrixXd &w, EigenMethod method = EigenMethod::kJacobi);
inline EigenDecomposition EigSym(const SpatialMatrix &w, EigenMethod method = EigenMethod::kJacobi) {
  return EigSym(w.w, method);
}

/// [L x j] matrix whose row l is the global mapping vector of frame l, built
/// from the top-j eigenvectors each oriented so its largest-magnitude entry is
/// positive.
Eigen::MatrixXd GlobalMapping(const EigenDecomposition &eig, int j_hyp);

/// Successive projection: j distinct row indices (ties go to the lowest index).
std::vector<Index> SpaVertices(const Eigen::MatrixXd &mapping);

struct SimplexModel {
  std::vector<Index> vertex_frames;
  Eigen::MatrixXd transform;  // [J x J], column j = mapping row of vertex j
};

/// p^G(l) per frame, [L x J], entries in [0, 1] and row sums <= 1.
struct GlobalActivity {
  Eigen::MatrixXd p;
  SimplexModel model;

  Index num_frames() const { return p.rows(); }
  int num_speakers() const { return static_cast<int>(p.cols()); }
};

GlobalActivity GlobalActivities(const Eigen::MatrixXd &mapping, const std::vector<Index> &vertices);

/// Full chain: eigendecomposition (or the one supplied) -> mapping -> SPA -> activities.
GlobalActivity EstimateActivities(const EigenDecomposition &eig, int num_speakers);

void WriteActivityCsv(const Eigen::MatrixXd &activity, std::ostream &out);

}  // namespace scoh
