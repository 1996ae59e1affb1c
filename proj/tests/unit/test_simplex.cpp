// test_simplex.cpp

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

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <set>

#include "doctest.h"
#include "scoh/error.hpp"
#include "scoh/simplex.hpp"
#include "support.hpp"

using namespace scoh;

namespace {

// Roots of the characteristic polynomial: Faddeev-LeVerrier coefficients, then
// the eigenvalues of the companion matrix via a general (nonsymmetric) solver.
Eigen::VectorXd CharacteristicRoots(const Eigen::MatrixXd &a) {
  const Index n = a.rows();
  Eigen::VectorXd c(n + 1);  // p(x) = sum c_k x^(n-k), c_0 = 1
  c(0) = 1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Index k = 1; k <= n; ++k) {
    m = a * m + c(k - 1) * Eigen::MatrixXd::Identity(n, n);
    c(k) = -(a * m).trace() / static_cast<double>(k);
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Index k = 0; k < n; ++k) companion(0, k) = -c(k + 1);
  for (Index k = 1; k < n; ++k) companion(k, k - 1) = 1.0;
  Eigen::VectorXd roots = Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues().real();
  std::sort(roots.data(), roots.data() + n, std::greater<>());
  return roots;
}

// Disjoint activities: each frame has at most one active speaker, and every
// speaker owns at least one pure frame.
Eigen::MatrixXd DisjointActivity(Index frames, int speakers, std::mt19937_64 &rng) {
  std::uniform_int_distribution<int> who(0, speakers);
  std::uniform_real_distribution<double> level(0.3, 1.0);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(frames, speakers);
  for (Index l = 0; l < frames; ++l) {
    int j = l < speakers ? static_cast<int>(l) : who(rng) - 1;
    if (j >= 0) p(l, j) = l < speakers ? 1.0 : level(rng);
  }
  return p;
}

double PermutedError(const Eigen::MatrixXd &truth, const Eigen::MatrixXd &est) {
  std::vector<int> perm(truth.cols());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (Index j = 0; j < truth.cols(); ++j)
      worst = std::max(worst, (truth.col(j) - est.col(perm[j])).cwiseAbs().maxCoeff());
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_SUITE("simplex") {
  TEST_CASE("trivial spectra") {
    EigenDecomposition eye = EigSym(Eigen::MatrixXd::Identity(4, 4));
    CHECK((eye.values.array() - 1.0).abs().maxCoeff() <= 1e-14);
    Eigen::MatrixXd d = Eigen::Vector3d(3.0, 1.0, 2.0).asDiagonal();
    for (auto method : {EigenMethod::kJacobi, EigenMethod::kTridiagonalQr}) {
      EigenDecomposition eig = EigSym(d, method);
      CHECK(eig.values(0) == doctest::Approx(3.0));
      CHECK(eig.values(1) == doctest::Approx(2.0));
      CHECK(eig.values(2) == doctest::Approx(1.0));
    }
  }

  TEST_CASE("Jacobi matches characteristic polynomial roots") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::MatrixXd a = test::RandomSymmetric(5, rng);
      EigenDecomposition eig = JacobiEigen(a);
      Eigen::VectorXd roots = CharacteristicRoots(a);
      CHECK((eig.values - roots).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }

  TEST_CASE("Jacobi reconstructs, is orthonormal and agrees with the QR solver") {
    std::mt19937_64 rng(5);
    for (int n : {2, 7, 40}) {
      Eigen::MatrixXd a = test::RandomSymmetric(n, rng);
      EigenDecomposition eig = JacobiEigen(a);
      Eigen::MatrixXd rebuilt = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
      CHECK((rebuilt - a).norm() <= 1e-10 * a.norm());
      CHECK((eig.vectors.transpose() * eig.vectors - Eigen::MatrixXd::Identity(n, n)).norm() <= 1e-10);
      for (Index i = 1; i < n; ++i) CHECK(eig.values(i) <= eig.values(i - 1));
      EigenDecomposition qr = EigSym(a, EigenMethod::kTridiagonalQr);
      CHECK((qr.values - eig.values).cwiseAbs().maxCoeff() <= 1e-10);
    }
    Eigen::Matrix3f small = Eigen::Matrix3f::Identity();
    small(0, 1) = small(1, 0) = 0.5f;
    auto f = JacobiEigen(small, 1e-6f);
    CHECK(f.values(0) == doctest::Approx(1.5f));
  }

  TEST_CASE("non-symmetric input is rejected") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    a(0, 2) = 1.0;
    CHECK_THROWS_AS(JacobiEigen(a), Error);
    CHECK_THROWS_AS(JacobiEigen(Eigen::MatrixXd::Ones(2, 3)), Error);
  }

  TEST_CASE("global mapping of a rank-one matrix is the normalised activity") {
    Eigen::VectorXd p(5);
    p << 0.2, 0.0, 0.9, 0.4, 0.1;
    EigenDecomposition eig = EigSym(p * p.transpose());
    Eigen::MatrixXd v = GlobalMapping(eig, 1);
    CHECK((v.col(0) - p / p.norm()).norm() <= 1e-10);

    EigenDecomposition flipped = eig;
    flipped.vectors.col(0) *= -1.0;
    CHECK((GlobalMapping(flipped, 1) - v).norm() == 0.0);
    CHECK_THROWS_AS(GlobalMapping(eig, 0), Error);
    CHECK_THROWS_AS(GlobalMapping(eig, 6), Error);

    std::mt19937_64 rng(6);
    Eigen::MatrixXd full = GlobalMapping(EigSym(test::RandomSymmetric(6, rng)), 6);
    CHECK((full * full.transpose() - Eigen::MatrixXd::Identity(6, 6)).norm() <= 1e-10);
  }

  TEST_CASE("SPA finds the pure rows of an exact simplex") {
    Eigen::MatrixXd rows(5, 2);
    rows << 0.5, 0.5, 1.0, 0.0, 0.3, 0.7, 0.0, 1.0, 0.9, 0.1;
    std::vector<Index> picked = SpaVertices(rows);
    std::set<Index> got(picked.begin(), picked.end());
    CHECK(got == std::set<Index>{1, 3});
  }

  TEST_CASE("SPA tolerates small perturbations and breaks ties by lowest index") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 1e-9);
    Eigen::MatrixXd p = DisjointActivity(60, 3, rng);
    for (Index l = 3; l < 60; ++l)
      if (p.row(l).sum() > 0) p.row(l) *= 0.9;
    for (Index i = 0; i < p.size(); ++i) p.data()[i] += noise(rng);
    std::vector<Index> picked = SpaVertices(p);
    std::set<Index> got(picked.begin(), picked.end());
    CHECK(got == std::set<Index>{0, 1, 2});

    Eigen::MatrixXd dup(4, 2);
    dup << 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0;
    std::vector<Index> tie = SpaVertices(dup);
    CHECK(tie[0] == 0);
    CHECK(tie[1] == 1);
  }

  TEST_CASE("vertex frames recover one-hot activities") {
    std::mt19937_64 rng(8);
    Eigen::MatrixXd p = DisjointActivity(40, 3, rng);
    Eigen::MatrixXd mapping = GlobalMapping(EigSym(Eigen::MatrixXd(p * p.transpose())), 3);
    std::vector<Index> vertices = SpaVertices(mapping);
    GlobalActivity act = GlobalActivities(mapping, vertices);
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) CHECK(act.p(vertices[j], k) == doctest::Approx(j == k ? 1.0 : 0.0));
  }

  TEST_CASE("exact W = P P^T recovers P up to permutation") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      int speakers = 2 + static_cast<int>(seed % 3);
      Eigen::MatrixXd p = DisjointActivity(50, speakers, rng);
      GlobalActivity act = EstimateActivities(EigSym(Eigen::MatrixXd(p * p.transpose())), speakers);
      CHECK(PermutedError(p, act.p) <= 1e-6);
    }
  }

  TEST_CASE("activities are clamped into the unit simplex") {
    Eigen::MatrixXd mapping(4, 2);
    mapping << 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 2.0;
    GlobalActivity act = GlobalActivities(mapping, {0, 1});
    CHECK(act.p.row(2).norm() == 0.0);
    CHECK(act.p.row(3).sum() == doctest::Approx(1.0));
    CHECK(act.p.minCoeff() >= 0.0);
    Eigen::MatrixXd degenerate(3, 2);
    degenerate << 1.0, 1.0, 1.0, 1.0, 0.5, 0.5;
    CHECK_THROWS_AS(GlobalActivities(degenerate, {0, 2}), Error);
  }
}
