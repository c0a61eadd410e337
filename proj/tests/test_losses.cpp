#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "hfusion/hierarchy.hpp"
#include "hfusion/losses.hpp"
#include "hfusion/rng.hpp"
#include "oracles.hpp"

using namespace hfusion;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (double& v : m.data) v = rng.normal() * scale;
  return m;
}

Mat from_1d(const std::vector<double>& xs) {
  Mat m(static_cast<int>(xs.size()), 1);
  for (size_t i = 0; i < xs.size(); ++i) m(static_cast<int>(i), 0) = xs[i];
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// mining
// ---------------------------------------------------------------------------

TEST_CASE("mining with uniform labels yields nothing") {
  Rng rng(0);
  const Mat f = random_mat(6, 3, rng);
  CHECK(mine_hard_triplets(f, {1, 1, 1, 1, 1, 1}).empty());
}

TEST_CASE("mining picks the farthest positive and nearest negative") {
  const Mat f = from_1d({0.0, 1.0, 10.0, 11.0});
  const auto triplets = mine_hard_triplets(f, {0, 0, 1, 1});
  REQUIRE(triplets.size() == 4);
  CHECK(triplets[0] == Triplet{0, 1, 2});
  CHECK(triplets[1] == Triplet{1, 0, 2});
  CHECK(triplets[2] == Triplet{2, 3, 1});
  CHECK(triplets[3] == Triplet{3, 2, 1});
}

TEST_CASE("a fine-level triplet can dissolve at a coarser level") {
  // fines 0 and 1 share middle 0; fine 2 sits alone under middle 1; one
  // coarse class over everything
  const HierarchyTree t = build_hierarchy({{0, 0, 0}, {1, 0, 0}, {2, 1, 0}});
  const Mat f = from_1d({0.0, 0.4, 0.5, 3.0});
  const std::vector<int> fine{0, 0, 1, 2};

  // fine level: anchor 0 pairs its classmate with nearest negative 2
  const auto at_fine = mine_hard_triplets(f, labels_at_level(t, fine, 3));
  REQUIRE(!at_fine.empty());
  CHECK(at_fine[0] == Triplet{0, 1, 2});

  // middle level: samples 0..2 share the middle label, so that triplet is
  // gone; the only negative left is sample 3
  const auto at_middle = mine_hard_triplets(f, labels_at_level(t, fine, 2));
  REQUIRE(!at_middle.empty());
  for (const auto& tr : at_middle) {
    CHECK(tr.negative == 3);
    CHECK(!(tr == Triplet{0, 1, 2}));
  }

  // coarse level: a single class, no negatives at all
  CHECK(mine_hard_triplets(f, labels_at_level(t, fine, 1)).empty());
}

TEST_CASE("mining equals the exhaustive oracle on random batches") {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    const int n_labels = 1 + static_cast<int>(rng.below(4));
    const Mat f = random_mat(n, 3, rng);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(n_labels));
    const auto got = mine_hard_triplets(f, labels);
    const auto want = oracles::exhaustive_hard_triplets(f, labels);
    CHECK(got == want);
  }
}

// ---------------------------------------------------------------------------
// triplet loss
// ---------------------------------------------------------------------------

TEST_CASE("satisfied margin contributes zero") {
  const Mat f = from_1d({0.0, 0.0, 5.0});
  const auto lg = triplet_loss(f, {{0, 1, 2}}, 0.3);
  CHECK(lg.value == 0.0);
  for (double v : lg.dfeatures.data) CHECK(v == 0.0);
}

TEST_CASE("fully collapsed triplet costs exactly the margin") {
  Mat f(3, 2);  // all rows identical zeros
  const auto lg = triplet_loss(f, {{0, 1, 2}}, 0.25);
  CHECK(lg.value == 0.25);
}

TEST_CASE("hand-computed one-dimensional triplet with gradient check") {
  const Mat f = from_1d({0.0, 1.0, 1.5});
  const std::vector<Triplet> trip{{0, 1, 2}};
  const auto lg = triplet_loss(f, trip, 1.0);
  CHECK(lg.value == Catch::Approx(0.5).epsilon(1e-15));

  auto loss = [&](const Mat& m) { return triplet_loss(m, trip, 1.0).value; };
  CHECK(oracles::fd_check_features(loss, f, lg.dfeatures) < 1e-7);
}

TEST_CASE("empty triplet list yields zero loss and gradients") {
  Mat f(4, 2);
  const auto lg = triplet_loss(f, {}, 0.3);
  CHECK(lg.value == 0.0);
  CHECK(lg.dfeatures.rows == 4);
  for (double v : lg.dfeatures.data) CHECK(v == 0.0);
}

TEST_CASE("triplet index bounds are enforced") {
  Mat f(3, 2);
  try {
    triplet_loss(f, {{0, 1, 7}}, 0.3);
    FAIL("expected IndexOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::index_out_of_range);
  }
}

TEST_CASE("triplet loss is nonnegative and zero iff margins hold") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(6));
    const Mat f = random_mat(n, 4, rng);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(3));
    const auto triplets = mine_hard_triplets(f, labels);
    const double alpha = 0.3;
    const auto lg = triplet_loss(f, triplets, alpha);
    CHECK(lg.value >= 0.0);
    bool all_satisfied = true;
    for (const auto& t : triplets) {
      const double dap = dist_rows(f, t.anchor, f, t.positive);
      const double dan = dist_rows(f, t.anchor, f, t.negative);
      if (dan < dap + alpha) all_satisfied = false;
    }
    CHECK((lg.value == 0.0) == all_satisfied);
  }
}

TEST_CASE("triplet gradient matches finite differences off the hinge") {
  Rng rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6;
    const Mat f = random_mat(n, 3, rng);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(2));
    const auto triplets = mine_hard_triplets(f, labels);
    if (triplets.empty()) continue;
    // skip configurations sitting numerically on the hinge boundary
    bool near_boundary = false;
    for (const auto& t : triplets) {
      const double term = dist_rows(f, t.anchor, f, t.positive) -
                          dist_rows(f, t.anchor, f, t.negative) + 0.3;
      if (std::fabs(term) < 1e-3) near_boundary = true;
    }
    if (near_boundary) continue;
    const auto lg = triplet_loss(f, triplets, 0.3);
    auto loss = [&](const Mat& m) {
      return triplet_loss(m, triplets, 0.3).value;
    };
    CHECK(oracles::fd_check_features(loss, f, lg.dfeatures) < 1e-4);
  }
}

TEST_CASE("loss value is invariant to batch permutation after re-mining") {
  Rng rng(33);
  const int n = 8;
  const Mat f = random_mat(n, 4, rng);
  std::vector<int> labels{0, 0, 1, 1, 2, 2, 0, 1};
  const double base =
      triplet_loss(f, mine_hard_triplets(f, labels), 0.3).value;

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  Mat g(n, 4);
  std::vector<int> plabels(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 4; ++k) g(i, k) = f(perm[i], k);
    plabels[i] = labels[perm[i]];
  }
  const double permuted =
      triplet_loss(g, mine_hard_triplets(g, plabels), 0.3).value;
  CHECK(permuted == Catch::Approx(base).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// kernel bank
// ---------------------------------------------------------------------------

TEST_CASE("median bandwidth of a single pair at distance sqrt(2)") {
  Mat f(2, 2);
  f(1, 0) = 1.0;
  f(1, 1) = 1.0;
  const KernelBank bank = median_bandwidth(f);
  CHECK_FALSE(bank.degenerate);
  REQUIRE(bank.bandwidths.size() == 5);
  CHECK(bank.bandwidths[2] == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(bank.bandwidths[0] == Catch::Approx(0.25).epsilon(1e-15));
  CHECK(bank.bandwidths[4] == Catch::Approx(4.0).epsilon(1e-15));
  double wsum = 0.0;
  for (double w : bank.weights) wsum += w;
  CHECK(wsum == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("identical points fall back to unit bandwidth") {
  Mat f(4, 3);
  const KernelBank bank = median_bandwidth(f);
  CHECK(bank.degenerate);
  CHECK(bank.bandwidths[2] == 1.0);
}

TEST_CASE("median matches brute force over all pairs") {
  Rng rng(41);
  const Mat f = random_mat(5, 3, rng);
  std::vector<double> sq;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) sq.push_back(sq_dist_rows(f, i, f, j));
  std::sort(sq.begin(), sq.end());
  const double median = 0.5 * (sq[4] + sq[5]);  // 10 pairs, even count
  const KernelBank bank = median_bandwidth(f);
  CHECK(bank.bandwidths[2] ==
        Catch::Approx(std::sqrt(median / 2.0)).epsilon(1e-14));
}

// ---------------------------------------------------------------------------
// mmd
// ---------------------------------------------------------------------------

TEST_CASE("mmd of a batch against itself is exactly zero") {
  Rng rng(51);
  const Mat f = random_mat(6, 4, rng);
  const KernelBank bank = median_bandwidth(f);
  const auto mg = mmd_loss(f, f, bank);
  CHECK(mg.value == 0.0);
}

TEST_CASE("mmd rejects single-sample batches") {
  Mat a(1, 2), b(3, 2);
  KernelBank bank;
  bank.bandwidths = {1.0};
  bank.weights = {1.0};
  try {
    mmd_loss(a, b, bank);
    FAIL("expected BatchTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::batch_too_small);
  }
}

TEST_CASE("two-vs-two single-kernel value matches hand expansion") {
  const Mat s = from_1d({0.0, 1.0});
  const Mat t = from_1d({0.5, 2.0});
  KernelBank bank;
  bank.bandwidths = {1.0};
  bank.weights = {1.0};

  auto k = [](double u, double v) { return std::exp(-(u - v) * (u - v) / 2.0); };
  const double ss = k(0, 0) + k(0, 1) + k(1, 0) + k(1, 1);
  const double tt = k(0.5, 0.5) + k(0.5, 2) + k(2, 0.5) + k(2, 2);
  const double st = k(0, 0.5) + k(0, 2) + k(1, 0.5) + k(1, 2);
  const double expect = ss / 4.0 + tt / 4.0 - 2.0 * st / 4.0;

  const auto mg = mmd_loss(s, t, bank);
  CHECK(mg.value == Catch::Approx(expect).epsilon(1e-14));

  // finite differences over both inputs
  auto loss_s = [&](const Mat& m) { return mmd_loss(m, t, bank).value; };
  auto loss_t = [&](const Mat& m) { return mmd_loss(s, m, bank).value; };
  CHECK(oracles::fd_check_features(loss_s, s, mg.dsource) < 1e-7);
  CHECK(oracles::fd_check_features(loss_t, t, mg.dtarget) < 1e-7);
}

TEST_CASE("mmd is nonnegative and symmetric") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat s = random_mat(5, 3, rng);
    const Mat t = random_mat(7, 3, rng, 1.5);
    const KernelBank bank = median_bandwidth(vstack(s, t));
    const double ab = mmd_loss(s, t, bank).value;
    const double ba = mmd_loss(t, s, bank).value;
    CHECK(ab >= 0.0);
    CHECK(ab == Catch::Approx(ba).margin(1e-12));
  }
}

TEST_CASE("translating one batch never decreases single-kernel mmd") {
  Rng rng(53);
  const Mat s = random_mat(8, 4, rng);
  KernelBank bank;
  bank.bandwidths = {1.3};
  bank.weights = {1.0};
  double prev = -1.0;
  for (double shift : {0.0, 0.7, 1.4, 2.8}) {
    Mat t = s;
    for (int i = 0; i < t.rows; ++i) t(i, 0) += shift;
    const double v = mmd_loss(s, t, bank).value;
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("mmd gradients pass finite differences with a multi-kernel bank") {
  Rng rng(54);
  const Mat s = random_mat(4, 3, rng);
  const Mat t = random_mat(5, 3, rng, 1.2);
  const KernelBank bank = median_bandwidth(vstack(s, t));
  const auto mg = mmd_loss(s, t, bank);
  auto loss_s = [&](const Mat& m) { return mmd_loss(m, t, bank).value; };
  auto loss_t = [&](const Mat& m) { return mmd_loss(s, m, bank).value; };
  CHECK(oracles::fd_check_features(loss_s, s, mg.dsource) < 1e-4);
  CHECK(oracles::fd_check_features(loss_t, t, mg.dtarget) < 1e-4);
}

// ---------------------------------------------------------------------------
// cross entropy
// ---------------------------------------------------------------------------

TEST_CASE("uniform logits over 15 classes cost ln 15") {
  Mat logits(4, 15);
  const auto ce = cross_entropy(logits, {0, 7, 14, 3});
  CHECK(std::fabs(ce.value - std::log(15.0)) < 1e-12);
}

TEST_CASE("saturated correct logit costs nearly nothing") {
  Mat logits(1, 15);
  logits(0, 4) = 1e4;
  const auto ce = cross_entropy(logits, {4});
  CHECK(ce.value >= 0.0);
  CHECK(ce.value < 1e-6);
}

TEST_CASE("random logits match brute force and finite differences") {
  Rng rng(61);
  const Mat logits = random_mat(3, 4, rng);
  const std::vector<int> labels{2, 0, 3};
  const auto ce = cross_entropy(logits, labels);
  CHECK(ce.value ==
        Catch::Approx(oracles::brute_force_ce(logits, labels)).epsilon(1e-12));
  auto loss = [&](const Mat& m) { return cross_entropy(m, labels).value; };
  CHECK(oracles::fd_check_features(loss, logits, ce.dlogits) < 1e-6);
}

TEST_CASE("labels out of range are rejected") {
  Mat logits(2, 3);
  try {
    cross_entropy(logits, {0, 3});
    FAIL("expected LabelOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::label_out_of_range);
  }
}

TEST_CASE("cross entropy is permutation invariant") {
  Rng rng(62);
  const Mat logits = random_mat(5, 4, rng);
  const std::vector<int> labels{0, 1, 2, 3, 1};
  const double base = cross_entropy(logits, labels).value;
  Mat perm_logits(5, 4);
  std::vector<int> perm_labels(5);
  const std::vector<int> perm{4, 2, 0, 1, 3};
  for (int i = 0; i < 5; ++i) {
    for (int k = 0; k < 4; ++k) perm_logits(i, k) = logits(perm[i], k);
    perm_labels[i] = labels[perm[i]];
  }
  CHECK(cross_entropy(perm_logits, perm_labels).value ==
        Catch::Approx(base).epsilon(1e-13));
}
