#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "hfusion/hierarchy.hpp"
#include "hfusion/rng.hpp"

using namespace hfusion;

TEST_CASE("single-node chain builds a (1,1,1) tree") {
  const HierarchyTree t = build_hierarchy({{0, 0, 0}});
  CHECK(t.level_sizes == std::array<int, 3>{1, 1, 1});
  CHECK(t.ancestor(0, 1) == 0);
  CHECK(t.ancestor(0, 2) == 0);
  CHECK(t.ancestor(0, 3) == 0);
}

TEST_CASE("conflicting parents are rejected") {
  // middle 0 would claim coarse 0 and coarse 1
  try {
    build_hierarchy({{0, 0, 0}, {1, 0, 1}});
    FAIL("expected ConflictingParent");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::conflicting_parent);
  }

  try {
    build_hierarchy({{0, 0, 0}, {0, 1, 0}});
    FAIL("expected ConflictingParent");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::conflicting_parent);
  }
}

TEST_CASE("empty input and non-dense labels are rejected") {
  try {
    build_hierarchy({});
    FAIL("expected EmptyLevel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_level);
  }

  try {
    build_hierarchy({{0, 0, 0}, {2, 1, 0}});  // fine label 1 missing
    FAIL("expected NonDenseLabels");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_dense_labels);
  }

  try {
    build_hierarchy({{0, 1, 0}});  // middle 0 missing
    FAIL("expected NonDenseLabels");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_dense_labels);
  }
}

TEST_CASE("ancestor levels and bounds") {
  const HierarchyTree t = lego15_default();
  for (int f = 0; f < t.n_fine(); ++f) {
    CHECK(t.ancestor(f, 3) == f);
    const int c = t.ancestor(f, 1);
    CHECK(c >= 0);
    CHECK(c < 3);
  }
  try {
    t.ancestor(0, 4);
    FAIL("expected BadLevel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_level);
  }
  try {
    t.ancestor(99, 2);
    FAIL("expected UnknownLabel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_label);
  }
}

TEST_CASE("default Lego taxonomy shape and named relations") {
  const HierarchyTree t = lego15_default();
  CHECK(t.level_sizes == std::array<int, 3>{3, 10, 15});
  CHECK_NOTHROW(validate(t));

  // 85080 and 3062b share a middle class; that group and bricks_special
  // share a coarse class.
  const int a = t.fine_index("85080");
  const int b = t.fine_index("3062b");
  const int c = t.fine_index("87087");
  CHECK(t.ancestor(a, 2) == t.ancestor(b, 2));
  CHECK(t.ancestor(a, 1) == t.ancestor(c, 1));
  CHECK(t.ancestor(a, 2) != t.ancestor(c, 2));
}

TEST_CASE("label consistency: shared middle implies shared coarse") {
  const HierarchyTree t = lego15_default();
  for (int a = 0; a < t.n_fine(); ++a)
    for (int b = 0; b < t.n_fine(); ++b) {
      if (t.ancestor(a, 2) == t.ancestor(b, 2))
        CHECK(t.ancestor(a, 1) == t.ancestor(b, 1));
      // differing at coarse implies differing below
      if (t.ancestor(a, 1) != t.ancestor(b, 1)) {
        CHECK(t.ancestor(a, 2) != t.ancestor(b, 2));
        CHECK(a != b);
      }
    }
}

TEST_CASE("random trees keep ancestry consistent") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int n_coarse = 1 + static_cast<int>(rng.below(3));
    const int n_middle = n_coarse + static_cast<int>(rng.below(4));
    const int n_fine = n_middle + static_cast<int>(rng.below(6));
    std::vector<std::array<int, 3>> triples;
    std::vector<int> mid_to_coarse(n_middle);
    // force density: first assignments cover each label once
    for (int m = 0; m < n_middle; ++m)
      mid_to_coarse[m] =
          m < n_coarse ? m : static_cast<int>(rng.below(n_coarse));
    for (int f = 0; f < n_fine; ++f) {
      const int m = f < n_middle ? f : static_cast<int>(rng.below(n_middle));
      triples.push_back({f, m, mid_to_coarse[m]});
    }
    const HierarchyTree t = build_hierarchy(triples);
    for (int f = 0; f < n_fine; ++f) {
      CHECK(t.ancestor(f, 1) == t.middle_to_coarse[t.ancestor(f, 2)]);
    }
    CHECK(t.n_coarse() <= t.n_middle());
    CHECK(t.n_middle() <= t.n_fine());
  }
}

TEST_CASE("hierarchy file round trip with first-appearance indexing") {
  const std::string text =
      "85080,bricks_round,bricks\n"
      "3062b,bricks_round,bricks\n"
      "6141,plates_round,plates\n";
  std::istringstream in(text);
  const HierarchyTree t = load_hierarchy(in);
  CHECK(t.level_sizes == std::array<int, 3>{2, 2, 3});
  CHECK(t.fine_names == std::vector<std::string>{"85080", "3062b", "6141"});
  CHECK(t.fine_index("6141") == 2);
  CHECK(t.ancestor(t.fine_index("6141"), 1) == 1);

  std::ostringstream out;
  save_hierarchy(t, out);
  CHECK(out.str() == text);

  std::istringstream bad("only_two,fields\n");
  try {
    load_hierarchy(bad);
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::schema_mismatch);
  }
}

TEST_CASE("labels_at_level maps whole batches") {
  const HierarchyTree t = lego15_default();
  std::vector<int> y3{0, 5, 14};
  const auto y2 = labels_at_level(t, y3, 2);
  const auto y1 = labels_at_level(t, y3, 1);
  for (size_t i = 0; i < y3.size(); ++i) {
    CHECK(y2[i] == t.ancestor(y3[i], 2));
    CHECK(y1[i] == t.ancestor(y3[i], 1));
  }
  CHECK(labels_at_level(t, y3, 3) == y3);
}
