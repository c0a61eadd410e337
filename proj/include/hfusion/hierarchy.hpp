#pragma once

#include <array>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hfusion/errors.hpp"
#include "hfusion/util.hpp"

namespace hfusion {

// Three-level class taxonomy: every fine class has exactly one middle
// ancestor and every middle class exactly one coarse ancestor. Levels are
// numbered 1 = coarse, 2 = middle, 3 = fine. Labels are dense integers per
// level; optional name tables alias them to human-readable class ids.
// Immutable after construction, safe to share across threads.
struct HierarchyTree {
  std::vector<int> fine_to_middle;    // indexed by fine label
  std::vector<int> middle_to_coarse;  // indexed by middle label
  std::array<int, 3> level_sizes{0, 0, 0};  // {n_coarse, n_middle, n_fine}

  std::vector<std::string> fine_names;
  std::vector<std::string> middle_names;
  std::vector<std::string> coarse_names;

  int n_coarse() const { return level_sizes[0]; }
  int n_middle() const { return level_sizes[1]; }
  int n_fine() const { return level_sizes[2]; }

  // Label of `fine` at the requested level (1 coarse, 2 middle, 3 fine).
  int ancestor(int fine, int level) const {
    if (fine < 0 || fine >= n_fine())
      fail(Errc::unknown_label, "fine label " + std::to_string(fine));
    switch (level) {
      case 3: return fine;
      case 2: return fine_to_middle[fine];
      case 1: return middle_to_coarse[fine_to_middle[fine]];
      default: fail(Errc::bad_level, "level " + std::to_string(level));
    }
  }

  int fine_index(std::string_view name) const {
    for (size_t i = 0; i < fine_names.size(); ++i)
      if (fine_names[i] == name) return static_cast<int>(i);
    fail(Errc::unknown_label, "fine class '" + std::string(name) + "'");
  }
};

inline bool operator==(const HierarchyTree& a, const HierarchyTree& b) {
  return a.fine_to_middle == b.fine_to_middle &&
         a.middle_to_coarse == b.middle_to_coarse &&
         a.level_sizes == b.level_sizes && a.fine_names == b.fine_names &&
         a.middle_names == b.middle_names && a.coarse_names == b.coarse_names;
}

namespace detail {

inline void check_dense(const std::vector<int>& present, const char* what) {
  // present[i] counts how often label i appeared; density means every slot
  // in 0..n-1 is hit at least once.
  for (size_t i = 0; i < present.size(); ++i)
    if (present[i] == 0)
      fail(Errc::non_dense_labels,
           std::string(what) + " labels skip index " + std::to_string(i));
}

}  // namespace detail

inline void validate(const HierarchyTree& t) {
  if (t.n_fine() == 0 || t.n_middle() == 0 || t.n_coarse() == 0)
    fail(Errc::empty_level, "hierarchy has an empty level");
  if (static_cast<int>(t.fine_to_middle.size()) != t.n_fine() ||
      static_cast<int>(t.middle_to_coarse.size()) != t.n_middle())
    fail(Errc::non_dense_labels, "level_sizes disagree with parent maps");
  if (!(t.n_coarse() <= t.n_middle() && t.n_middle() <= t.n_fine()))
    fail(Errc::non_dense_labels, "level sizes must be non-increasing upward");

  std::vector<int> mid_seen(t.n_middle(), 0), coarse_seen(t.n_coarse(), 0);
  for (int f = 0; f < t.n_fine(); ++f) {
    const int m = t.fine_to_middle[f];
    if (m < 0 || m >= t.n_middle())
      fail(Errc::unknown_label, "middle label out of range");
    ++mid_seen[m];
  }
  for (int m = 0; m < t.n_middle(); ++m) {
    const int c = t.middle_to_coarse[m];
    if (c < 0 || c >= t.n_coarse())
      fail(Errc::unknown_label, "coarse label out of range");
    ++coarse_seen[c];
  }
  detail::check_dense(mid_seen, "middle");
  detail::check_dense(coarse_seen, "coarse");
}

// Builds a tree from one (fine, middle, coarse) triple per fine class.
// Rejects conflicting parents, empty levels, and non-dense label sets.
inline HierarchyTree build_hierarchy(
    const std::vector<std::array<int, 3>>& fine_middle_coarse) {
  if (fine_middle_coarse.empty())
    fail(Errc::empty_level, "no fine classes given");

  int max_fine = -1, max_middle = -1, max_coarse = -1;
  for (const auto& [f, m, c] : fine_middle_coarse) {
    if (f < 0 || m < 0 || c < 0)
      fail(Errc::non_dense_labels, "labels must be non-negative");
    max_fine = std::max(max_fine, f);
    max_middle = std::max(max_middle, m);
    max_coarse = std::max(max_coarse, c);
  }

  HierarchyTree t;
  t.level_sizes = {max_coarse + 1, max_middle + 1, max_fine + 1};
  t.fine_to_middle.assign(t.n_fine(), -1);
  t.middle_to_coarse.assign(t.n_middle(), -1);

  std::vector<int> fine_seen(t.n_fine(), 0);
  for (const auto& [f, m, c] : fine_middle_coarse) {
    if (t.fine_to_middle[f] != -1 && t.fine_to_middle[f] != m)
      fail(Errc::conflicting_parent,
           "fine " + std::to_string(f) + " mapped to middles " +
               std::to_string(t.fine_to_middle[f]) + " and " +
               std::to_string(m));
    if (t.middle_to_coarse[m] != -1 && t.middle_to_coarse[m] != c)
      fail(Errc::conflicting_parent,
           "middle " + std::to_string(m) + " mapped to coarses " +
               std::to_string(t.middle_to_coarse[m]) + " and " +
               std::to_string(c));
    t.fine_to_middle[f] = m;
    t.middle_to_coarse[m] = c;
    ++fine_seen[f];
  }
  detail::check_dense(fine_seen, "fine");
  for (int f = 0; f < t.n_fine(); ++f)
    if (t.fine_to_middle[f] == -1)
      fail(Errc::non_dense_labels, "fine " + std::to_string(f) + " unmapped");
  for (int m = 0; m < t.n_middle(); ++m)
    if (t.middle_to_coarse[m] == -1)
      fail(Errc::non_dense_labels, "middle " + std::to_string(m) + " unmapped");

  validate(t);
  return t;
}

// Line format: fine_name,middle_name,coarse_name. Dense indices are assigned
// in first-appearance order per level. Blank lines and '#' comments allowed.
inline HierarchyTree load_hierarchy(std::istream& in) {
  std::vector<std::string> fine_names, middle_names, coarse_names;
  std::vector<std::array<int, 3>> triples;

  auto intern = [](std::vector<std::string>& names, const std::string& n) {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return static_cast<int>(i);
    names.push_back(n);
    return static_cast<int>(names.size() - 1);
  };

  std::string line;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto parts = split(s, ',');
    if (parts.size() != 3)
      fail(Errc::schema_mismatch, "expected fine,middle,coarse: '" + s + "'");
    const int f = intern(fine_names, trim(parts[0]));
    const int m = intern(middle_names, trim(parts[1]));
    const int c = intern(coarse_names, trim(parts[2]));
    triples.push_back({f, m, c});
  }
  if (triples.empty()) fail(Errc::empty_level, "hierarchy file has no records");

  HierarchyTree t = build_hierarchy(triples);
  t.fine_names = std::move(fine_names);
  t.middle_names = std::move(middle_names);
  t.coarse_names = std::move(coarse_names);
  return t;
}

inline void save_hierarchy(const HierarchyTree& t, std::ostream& out) {
  for (int f = 0; f < t.n_fine(); ++f) {
    const int m = t.fine_to_middle[f];
    const int c = t.middle_to_coarse[m];
    const std::string fn = t.fine_names.empty() ? std::to_string(f) : t.fine_names[f];
    const std::string mn = t.middle_names.empty() ? std::to_string(m) : t.middle_names[m];
    const std::string cn = t.coarse_names.empty() ? std::to_string(c) : t.coarse_names[c];
    out << fn << ',' << mn << ',' << cn << '\n';
  }
}

// Default 15-class Lego brick taxonomy: 15 fine part ids under 10 middle
// groups under 3 coarse groups. 85080 and 3062b share the bricks_round
// group, which together with bricks_special sits under bricks; the rest of
// the wiring is a fixed editorial choice.
inline HierarchyTree lego15_default() {
  static const char* records =
      "85080,bricks_round,bricks\n"
      "3062b,bricks_round,bricks\n"
      "87087,bricks_special,bricks\n"
      "2357,bricks_special,bricks\n"
      "3001,bricks_basic,bricks\n"
      "3003,bricks_basic,bricks\n"
      "3020,plates_basic,plates\n"
      "3023,plates_basic,plates\n"
      "6141,plates_round,plates\n"
      "3660,plates_special,plates\n"
      "44728,plates_bracket,plates\n"
      "3068b,tiles_flat,plates\n"
      "3039,slopes_basic,slopes\n"
      "3298,slopes_basic,slopes\n"
      "6564,slopes_curved,slopes\n";
  std::istringstream in(records);
  return load_hierarchy(in);
}

// Maps each fine label in `y3` to its ancestor at `level`.
inline std::vector<int> labels_at_level(const HierarchyTree& t,
                                        const std::vector<int>& y3,
                                        int level) {
  std::vector<int> out(y3.size());
  for (size_t i = 0; i < y3.size(); ++i) out[i] = t.ancestor(y3[i], level);
  return out;
}

}  // namespace hfusion
