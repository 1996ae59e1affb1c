// test_metrics.cpp

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

#include <sstream>

#include "doctest.h"
#include "scoh/error.hpp"
#include "scoh/metrics.hpp"
#include "support.hpp"

using namespace scoh;

TEST_SUITE("metrics") {
  TEST_CASE("macro F1 on hand-computed cases") {
    CHECK(MacroF1({1, 2, 3, 4}, {1, 2, 3, 4}) == doctest::Approx(1.0));
    CHECK(MacroF1({1, 1, 2, 2}, {2, 2, 1, 1}) == doctest::Approx(0.0));
    // class 1: P=1, R=1/2 -> 2/3; class 2: P=2/3, R=1 -> 4/5
    CHECK(MacroF1({1, 1, 2, 2}, {1, 2, 2, 2}) == doctest::Approx(11.0 / 15.0));
    // relabelling both sides consistently leaves the score unchanged
    CHECK(MacroF1({3, 3, 4, 4}, {3, 4, 4, 4}) == doctest::Approx(11.0 / 15.0));
    CHECK_THROWS_AS(MacroF1({1, 2}, {1}), Error);
    CHECK_THROWS_AS(MacroF1({1, 5}, {1, 2}), Error);
  }

  TEST_CASE("confusion matrix and underestimation rate") {
    ConfusionMatrix perfect = Confusion({1, 2, 3, 4}, {1, 2, 3, 4});
    CHECK(perfect.counts.trace() == 4);
    CHECK(perfect.total() == 4);
    ConfusionMatrix one = Confusion({2}, {3});
    CHECK(one.counts(1, 2) == 1);
    CHECK(one.total() == 1);
    ConfusionMatrix mixed = Confusion({4, 4, 3, 1}, {1, 4, 2, 2});
    CHECK(mixed.UnderestimationRate() == doctest::Approx(0.5));
    std::ostringstream out;
    mixed.Print(out);
    CHECK(out.str().find("true\\pred") == 0);
  }

  TEST_CASE("SI-SDR reference values") {
    Eigen::VectorXd s = test::RandomSignal(1, 4000, 1).row(0).transpose();
    CHECK(SiSdr(s, s) == doctest::Approx(kSiSdrCap));
    CHECK(SiSdr(s, (2.0 * s).eval()) == doctest::Approx(kSiSdrCap));

    Eigen::VectorXd n = test::RandomSignal(1, 4000, 2).row(0).transpose();
    n -= (n.dot(s) / s.squaredNorm()) * s;
    n *= s.norm() / n.norm();
    CHECK(SiSdr(s, (s + n).eval()) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(SiSdr(s, (0.5 * (s + n)).eval()) == doctest::Approx(0.0).epsilon(1e-9));
    n *= 0.1;
    CHECK(SiSdr(s, (s + n).eval()) == doctest::Approx(20.0));
  }

  TEST_CASE("masked SI-SDR only scores the active samples") {
    Eigen::VectorXd s = test::RandomSignal(1, 1000, 3).row(0).transpose();
    Eigen::VectorXd e = s;
    e.tail(500) = test::RandomSignal(1, 500, 4).row(0).transpose();
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(1000);
    mask.head(500).setOnes();
    CHECK(SiSdr(s, e, mask) == doctest::Approx(kSiSdrCap));
    CHECK(SiSdr(s, e) < 10.0);
  }

  TEST_CASE("activity mask marks the union of requested speakers") {
    ActivityTimeline tl;
    tl.intervals = {{{0.0, 0.25}}, {{0.5, 0.75}}};
    tl.clip_len_s = 1.0;
    Eigen::VectorXd only0 = ActivityMask(tl, {0}, 100.0, 100);
    Eigen::VectorXd both = ActivityMask(tl, {}, 100.0, 100);
    CHECK(only0.sum() == doctest::Approx(25.0));
    CHECK(both.sum() == doctest::Approx(50.0));
    CHECK(both(60) == 1.0);
    CHECK(only0(60) == 0.0);
  }

  TEST_CASE("alignment picks the best permutation") {
    Eigen::MatrixXd refs = test::RandomSignal(3, 2000, 5);
    Eigen::MatrixXd est(3, 2000);
    est.row(0) = refs.row(2);
    est.row(1) = refs.row(0) + 0.1 * refs.row(1);
    est.row(2) = refs.row(1);
    AlignedScores al = AlignBySiSdr(refs, est);
    CHECK(al.assignment == std::vector<int>{1, 2, 0});
    CHECK(al.si_sdr[1] == doctest::Approx(kSiSdrCap));
    // Direct projection of row 1 onto reference 0.
    const Eigen::VectorXd r = refs.row(0).transpose(), e = est.row(1).transpose();
    const Eigen::VectorXd target = (e.dot(r) / r.squaredNorm()) * r;
    const double expected = 10.0 * std::log10(target.squaredNorm() / (e - target).squaredNorm());
    CHECK(expected == doctest::Approx(20.0).epsilon(0.05));
    CHECK(al.si_sdr[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(al.mean() == doctest::Approx((al.si_sdr[0] + al.si_sdr[1] + al.si_sdr[2]) / 3.0));
  }
}
