// simplex.cpp

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

#include "scoh/simplex.hpp"

#include <iomanip>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace scoh {

EigenDecomposition EigSym(const Eigen::MatrixXd &w, EigenMethod method) {
  if (method == EigenMethod::kJacobi) return JacobiEigen(w);

  Require(w.rows() == w.cols(), ErrorKind::kContract, "eigensolver needs a square matrix");
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  Require((w - w.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale, ErrorKind::kContract,
          "eigensolver input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w);
  Require(solver.info() == Eigen::Success, ErrorKind::kNumeric, "eigensolver did not converge");
  EigenDecomposition eig{solver.eigenvalues(), solver.eigenvectors()};
  internal::SortDescending(eig);
  return eig;
}

Eigen::MatrixXd GlobalMapping(const EigenDecomposition &eig, int j_hyp) {
  Require(j_hyp >= 1 && j_hyp <= eig.vectors.cols(), ErrorKind::kContract,
          "speaker hypothesis out of range");
  Eigen::MatrixXd mapping = eig.vectors.leftCols(j_hyp);
  for (int j = 0; j < j_hyp; ++j) {
    Index arg = 0;
    mapping.col(j).cwiseAbs().maxCoeff(&arg);
    if (mapping(arg, j) < 0.0) mapping.col(j) = -mapping.col(j);
  }
  return mapping;
}

std::vector<Index> SpaVertices(const Eigen::MatrixXd &mapping) {
  const Index frames = mapping.rows();
  const Index count = mapping.cols();
  Require(count >= 1 && count <= frames, ErrorKind::kContract, "SPA needs 1 <= J <= L");
  Eigen::MatrixXd residual = mapping;
  std::vector<Index> picked;
  double first_norm = 0.0;
  for (Index j = 0; j < count; ++j) {
    Eigen::VectorXd norms = residual.rowwise().norm();
    Index best = 0;
    for (Index l = 1; l < frames; ++l)
      if (norms(l) > norms(best)) best = l;
    if (j == 0) first_norm = norms(best);
    Require(norms(best) > 1e-12 * std::max(first_norm, 1e-300), ErrorKind::kDegenerate,
            "successive projection ran out of independent rows");
    picked.push_back(best);
    Eigen::RowVectorXd u = residual.row(best) / norms(best);
    residual -= (residual * u.transpose()) * u;
    residual.row(best).setZero();
  }
  return picked;
}

GlobalActivity GlobalActivities(const Eigen::MatrixXd &mapping, const std::vector<Index> &vertices) {
  const Index count = mapping.cols();
  Require(static_cast<Index>(vertices.size()) == count, ErrorKind::kContract,
          "need one vertex per speaker");
  Eigen::MatrixXd g(count, count);
  for (Index j = 0; j < count; ++j) g.col(j) = mapping.row(vertices[j]).transpose();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
  const auto &sv = svd.singularValues();
  const double smax = sv(0), smin = sv(count - 1);
  Require(smin > 0.0 && smax / smin < 1e8, ErrorKind::kDegenerate,
          "simplex vertex matrix is singular (speakers too coherent)");

  GlobalActivity act;
  act.model.vertex_frames = vertices;
  act.model.transform = g;
  // p(l) = G^-1 v(l) for every row: P = V G^-T
  act.p = g.partialPivLu().solve(mapping.transpose()).transpose();
  act.p = act.p.cwiseMax(0.0).cwiseMin(1.0);
  for (Index l = 0; l < act.p.rows(); ++l) {
    double sum = act.p.row(l).sum();
    if (sum > 1.0) act.p.row(l) /= sum;
  }
  return act;
}

GlobalActivity EstimateActivities(const EigenDecomposition &eig, int num_speakers) {
  Eigen::MatrixXd mapping = GlobalMapping(eig, num_speakers);
  return GlobalActivities(mapping, SpaVertices(mapping));
}

void WriteActivityCsv(const Eigen::MatrixXd &activity, std::ostream &out) {
  out << "frame";
  for (Index j = 0; j < activity.cols(); ++j) out << ",speaker" << (j + 1);
  out << '\n' << std::setprecision(9);
  for (Index l = 0; l < activity.rows(); ++l) {
    out << l;
    for (Index j = 0; j < activity.cols(); ++j) out << ',' << activity(l, j);
    out << '\n';
  }
}

}  // namespace scoh
