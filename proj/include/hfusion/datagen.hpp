#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "hfusion/errors.hpp"
#include "hfusion/hierarchy.hpp"
#include "hfusion/matrix.hpp"
#include "hfusion/rng.hpp"
#include "hfusion/util.hpp"

namespace hfusion {

enum class Domain { source, target };

inline const char* domain_name(Domain d) {
  return d == Domain::source ? "source" : "target";
}

struct Sample {
  Vec x;
  Domain domain = Domain::source;
  int y1 = 0;  // coarse
  int y2 = 0;  // middle
  int y3 = 0;  // fine
};

inline bool operator==(const Sample& a, const Sample& b) {
  return a.x == b.x && a.domain == b.domain && a.y1 == b.y1 && a.y2 == b.y2 &&
         a.y3 == b.y3;
}

struct ConfusablePair {
  int fine_a = 0;
  int fine_b = 0;
  double proximity = 1.0;  // in (0,1]; smaller pulls the centers closer
};

inline bool operator==(const ConfusablePair& a, const ConfusablePair& b) {
  return a.fine_a == b.fine_a && a.fine_b == b.fine_b &&
         a.proximity == b.proximity;
}

// Parameters of the synthetic two-domain generator. Class structure is a
// hierarchical Gaussian mixture; the target domain sees the same mixture
// through a fixed rotation plus translation (covariate shift with shared
// labels).
struct GenConfig {
  HierarchyTree tree;
  int d_in = 32;
  int per_class_source = 80;
  int per_class_target = 40;
  // Optional per-fine-class target counts; overrides per_class_target when
  // non-empty (real-world target sets are rarely balanced).
  std::vector<int> target_class_counts;
  double coarse_spread = 6.0;
  double middle_spread = 3.0;
  double fine_spread = 1.5;
  double noise_sigma = 0.8;
  double shift_rotation_angle = 0.35;
  double shift_translation_norm = 2.0;
  std::vector<ConfusablePair> confusable_pairs;
  std::uint64_t seed = 1;
};

inline bool operator==(const GenConfig& a, const GenConfig& b) {
  return a.tree == b.tree && a.d_in == b.d_in &&
         a.per_class_source == b.per_class_source &&
         a.per_class_target == b.per_class_target &&
         a.target_class_counts == b.target_class_counts &&
         a.coarse_spread == b.coarse_spread &&
         a.middle_spread == b.middle_spread &&
         a.fine_spread == b.fine_spread && a.noise_sigma == b.noise_sigma &&
         a.shift_rotation_angle == b.shift_rotation_angle &&
         a.shift_translation_norm == b.shift_translation_norm &&
         a.confusable_pairs == b.confusable_pairs && a.seed == b.seed;
}

inline void validate(const GenConfig& cfg) {
  validate(cfg.tree);
  if (cfg.d_in < 1) fail(Errc::bad_config, "d_in must be >= 1");
  if (cfg.per_class_source < 1 || cfg.per_class_target < 1)
    fail(Errc::bad_config, "per-class counts must be >= 1");
  if (!cfg.target_class_counts.empty()) {
    if (static_cast<int>(cfg.target_class_counts.size()) != cfg.tree.n_fine())
      fail(Errc::bad_config, "target_class_counts must list every fine class");
    for (int c : cfg.target_class_counts)
      if (c < 1) fail(Errc::bad_config, "target class counts must be >= 1");
  }
  if (!(cfg.coarse_spread > 0) || !(cfg.middle_spread > 0) ||
      !(cfg.fine_spread > 0))
    fail(Errc::bad_config, "spreads must be positive");
  if (cfg.noise_sigma < 0) fail(Errc::bad_config, "noise_sigma must be >= 0");
  for (const auto& p : cfg.confusable_pairs) {
    if (p.fine_a < 0 || p.fine_a >= cfg.tree.n_fine() || p.fine_b < 0 ||
        p.fine_b >= cfg.tree.n_fine() || p.fine_a == p.fine_b)
      fail(Errc::bad_config, "confusable pair labels invalid");
    if (!(p.proximity > 0) || p.proximity > 1)
      fail(Errc::bad_config, "proximity must be in (0,1]");
  }
}

namespace detail {

// Rotation by `angle` applied block-wise in coordinate planes (0,1), (2,3),
// ...; an odd final coordinate is left unrotated.
inline void rotate_blockwise(Vec& x, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  for (size_t p = 0; p + 1 < x.size(); p += 2) {
    const double a = x[p], b = x[p + 1];
    x[p] = c * a - s * b;
    x[p + 1] = s * a + c * b;
  }
}

inline int target_count_for(const GenConfig& cfg, int fine) {
  return cfg.target_class_counts.empty() ? cfg.per_class_target
                                         : cfg.target_class_counts[fine];
}

}  // namespace detail

// Draws the full two-domain dataset. One seeded RNG stream, fixed draw
// order: class centers coarse->middle->fine, confusable pulls, shift
// parameters, then all source samples, then all target samples (class-major).
inline std::vector<Sample> generate(const GenConfig& cfg) {
  validate(cfg);
  const HierarchyTree& tree = cfg.tree;
  Rng rng(cfg.seed);

  auto draw_vec = [&](double scale) {
    Vec v(cfg.d_in);
    for (double& e : v) e = rng.normal() * scale;
    return v;
  };

  std::vector<Vec> coarse_centers, middle_centers, fine_centers;
  for (int c = 0; c < tree.n_coarse(); ++c)
    coarse_centers.push_back(draw_vec(cfg.coarse_spread));
  for (int m = 0; m < tree.n_middle(); ++m) {
    Vec v = draw_vec(cfg.middle_spread);
    const Vec& parent = coarse_centers[tree.middle_to_coarse[m]];
    for (int k = 0; k < cfg.d_in; ++k) v[k] += parent[k];
    middle_centers.push_back(std::move(v));
  }
  for (int f = 0; f < tree.n_fine(); ++f) {
    Vec v = draw_vec(cfg.fine_spread);
    const Vec& parent = middle_centers[tree.fine_to_middle[f]];
    for (int k = 0; k < cfg.d_in; ++k) v[k] += parent[k];
    fine_centers.push_back(std::move(v));
  }

  // Pull confusable centers toward their midpoint; distance scales by the
  // proximity factor. Pairs are applied in listed order, so shared classes
  // chain.
  for (const auto& p : cfg.confusable_pairs) {
    Vec& a = fine_centers[p.fine_a];
    Vec& b = fine_centers[p.fine_b];
    for (int k = 0; k < cfg.d_in; ++k) {
      const double mid = 0.5 * (a[k] + b[k]);
      a[k] = mid + p.proximity * (a[k] - mid);
      b[k] = mid + p.proximity * (b[k] - mid);
    }
  }

  // Shift parameters are drawn even when unused so RNG streams stay aligned
  // across configs that differ only in shift magnitudes.
  Vec shift_dir = draw_vec(1.0);
  {
    double norm = 0.0;
    for (double v : shift_dir) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      shift_dir.assign(cfg.d_in, 0.0);
      shift_dir[0] = 1.0;
      norm = 1.0;
    }
    for (double& v : shift_dir) v = v / norm * cfg.shift_translation_norm;
  }

  std::vector<Sample> out;
  for (int f = 0; f < tree.n_fine(); ++f) {
    for (int i = 0; i < cfg.per_class_source; ++i) {
      Sample s;
      s.x = draw_vec(cfg.noise_sigma);
      for (int k = 0; k < cfg.d_in; ++k) s.x[k] += fine_centers[f][k];
      s.domain = Domain::source;
      s.y3 = f;
      s.y2 = tree.ancestor(f, 2);
      s.y1 = tree.ancestor(f, 1);
      out.push_back(std::move(s));
    }
  }
  for (int f = 0; f < tree.n_fine(); ++f) {
    const int count = detail::target_count_for(cfg, f);
    for (int i = 0; i < count; ++i) {
      Sample s;
      s.x = draw_vec(cfg.noise_sigma);
      for (int k = 0; k < cfg.d_in; ++k) s.x[k] += fine_centers[f][k];
      detail::rotate_blockwise(s.x, cfg.shift_rotation_angle);
      for (int k = 0; k < cfg.d_in; ++k) s.x[k] += shift_dir[k];
      s.domain = Domain::target;
      s.y3 = f;
      s.y2 = tree.ancestor(f, 2);
      s.y1 = tree.ancestor(f, 1);
      out.push_back(std::move(s));
    }
  }
  return out;
}

// The four dataset partitions. Training code may read train_target inputs
// but never its labels: label access on that split goes through a counting
// accessor that throws MaskedLabelAccess. Labels are still serialized so
// evaluation tooling can audit files offline.
class Splits {
 public:
  Splits() : masked_reads_(std::make_shared<std::atomic<long>>(0)) {}

  const std::vector<Sample>& train_source() const { return train_source_; }
  const std::vector<Sample>& val_target() const { return val_target_; }
  const std::vector<Sample>& test_target() const { return test_target_; }

  // Label-masked view over the target training split.
  class MaskedTargetView {
   public:
    explicit MaskedTargetView(const Splits* s) : s_(s) {}
    size_t size() const { return s_->train_target_.size(); }
    const Vec& x(size_t i) const { return s_->train_target_[i].x; }
    Domain domain(size_t i) const { return s_->train_target_[i].domain; }
    int label(size_t i, int level) const {
      (void)i;
      (void)level;
      s_->masked_reads_->fetch_add(1);
      fail(Errc::masked_label_access,
           "train_target labels are masked during training");
    }

   private:
    const Splits* s_;
  };

  MaskedTargetView train_target() const { return MaskedTargetView(this); }
  size_t train_target_size() const { return train_target_.size(); }
  long masked_label_reads() const { return masked_reads_->load(); }

  friend Splits make_splits(std::vector<Sample> train_source,
                            std::vector<Sample> train_target,
                            std::vector<Sample> val_target,
                            std::vector<Sample> test_target);
  friend const std::vector<Sample>& raw_train_target_for_io(const Splits& s);

  friend bool operator==(const Splits& a, const Splits& b) {
    return a.train_source_ == b.train_source_ &&
           a.train_target_ == b.train_target_ &&
           a.val_target_ == b.val_target_ && a.test_target_ == b.test_target_;
  }

 private:
  std::vector<Sample> train_source_;
  std::vector<Sample> train_target_;
  std::vector<Sample> val_target_;
  std::vector<Sample> test_target_;
  std::shared_ptr<std::atomic<long>> masked_reads_;
};

inline Splits make_splits(std::vector<Sample> train_source,
                          std::vector<Sample> train_target,
                          std::vector<Sample> val_target,
                          std::vector<Sample> test_target) {
  Splits s;
  s.train_source_ = std::move(train_source);
  s.train_target_ = std::move(train_target);
  s.val_target_ = std::move(val_target);
  s.test_target_ = std::move(test_target);
  return s;
}

// Serialization-only escape hatch; training code must use train_target().
inline const std::vector<Sample>& raw_train_target_for_io(const Splits& s) {
  return s.train_target_;
}

// Partitions samples: every source sample goes to train_source; target
// samples are split per-class proportionally into train/val, the rest into
// test. Quotas are floor(count * class_size / total) with the remainder
// assigned one-by-one to seeded draws among classes that still have room.
inline Splits split(const std::vector<Sample>& samples, int n_train_target,
                    int n_val_target, std::uint64_t seed) {
  if (n_train_target < 0 || n_val_target < 0)
    fail(Errc::infeasible_counts, "split counts must be >= 0");

  std::vector<Sample> train_source;
  int n_fine = 0;
  for (const auto& s : samples) n_fine = std::max(n_fine, s.y3 + 1);
  std::vector<std::vector<size_t>> by_class(n_fine);
  size_t n_target = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].domain == Domain::source) {
      train_source.push_back(samples[i]);
    } else {
      by_class[samples[i].y3].push_back(i);
      ++n_target;
    }
  }
  if (static_cast<size_t>(n_train_target) + n_val_target > n_target)
    fail(Errc::infeasible_counts,
         "train+val exceeds " + std::to_string(n_target) + " target samples");

  Rng rng(seed);
  auto quotas = [&](int want, const std::vector<int>& capacity) {
    std::vector<int> q(n_fine, 0);
    if (n_target == 0 || want == 0) return q;
    long long assigned = 0;
    for (int c = 0; c < n_fine; ++c) {
      q[c] = static_cast<int>(static_cast<long long>(want) *
                              by_class[c].size() / n_target);
      q[c] = std::min(q[c], capacity[c]);
      assigned += q[c];
    }
    long long rem = want - assigned;
    while (rem > 0) {
      std::vector<int> eligible;
      for (int c = 0; c < n_fine; ++c)
        if (q[c] < capacity[c]) eligible.push_back(c);
      if (eligible.empty())
        fail(Errc::infeasible_counts, "per-class capacity exhausted");
      const size_t take =
          std::min<size_t>(static_cast<size_t>(rem), eligible.size());
      rng.partial_shuffle(eligible, take);
      for (size_t i = 0; i < take; ++i) ++q[eligible[i]];
      rem -= static_cast<long long>(take);
    }
    return q;
  };

  std::vector<int> capacity(n_fine);
  for (int c = 0; c < n_fine; ++c)
    capacity[c] = static_cast<int>(by_class[c].size());
  const std::vector<int> q_train = quotas(n_train_target, capacity);
  for (int c = 0; c < n_fine; ++c) capacity[c] -= q_train[c];
  const std::vector<int> q_val = quotas(n_val_target, capacity);

  std::vector<Sample> train_target, val_target, test_target;
  for (int c = 0; c < n_fine; ++c) {
    std::vector<size_t> idx = by_class[c];
    rng.shuffle(idx);
    int i = 0;
    for (; i < q_train[c]; ++i) train_target.push_back(samples[idx[i]]);
    for (; i < q_train[c] + q_val[c]; ++i) val_target.push_back(samples[idx[i]]);
    for (; i < static_cast<int>(idx.size()); ++i)
      test_target.push_back(samples[idx[i]]);
  }
  return make_splits(std::move(train_source), std::move(train_target),
                     std::move(val_target), std::move(test_target));
}

// A dataset file bundles the taxonomy, the generator configuration it was
// produced with (including seeds), and the four splits.
struct Dataset {
  HierarchyTree tree;
  GenConfig config;
  std::uint64_t split_seed = 0;
  int n_train_target = 0;
  int n_val_target = 0;
  Splits splits;
};

inline bool operator==(const Dataset& a, const Dataset& b) {
  return a.tree == b.tree && a.config == b.config &&
         a.split_seed == b.split_seed &&
         a.n_train_target == b.n_train_target &&
         a.n_val_target == b.n_val_target && a.splits == b.splits;
}

namespace detail {

inline void write_sample(std::ostream& out, const char* split_tag,
                         const Sample& s) {
  out << split_tag << ',' << domain_name(s.domain) << ',' << s.y1 << ','
      << s.y2 << ',' << s.y3;
  for (double v : s.x) out << ',' << fmt_g17(v);
  out << '\n';
}

}  // namespace detail

constexpr int kDatasetFormatVersion = 1;

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "hfusion-dataset " << kDatasetFormatVersion << '\n';
  const GenConfig& c = ds.config;
  out << "n_fine " << c.tree.n_fine() << '\n';
  {
    std::ostringstream tree_text;
    save_hierarchy(c.tree, tree_text);
    for (const auto& line : split(tree_text.str(), '\n'))
      if (!line.empty()) out << "class " << line << '\n';
  }
  out << "d_in " << c.d_in << '\n';
  out << "per_class_source " << c.per_class_source << '\n';
  out << "per_class_target " << c.per_class_target << '\n';
  if (!c.target_class_counts.empty()) {
    out << "target_class_counts";
    for (int v : c.target_class_counts) out << ' ' << v;
    out << '\n';
  }
  out << "coarse_spread " << fmt_g17(c.coarse_spread) << '\n';
  out << "middle_spread " << fmt_g17(c.middle_spread) << '\n';
  out << "fine_spread " << fmt_g17(c.fine_spread) << '\n';
  out << "noise_sigma " << fmt_g17(c.noise_sigma) << '\n';
  out << "shift_rotation_angle " << fmt_g17(c.shift_rotation_angle) << '\n';
  out << "shift_translation_norm " << fmt_g17(c.shift_translation_norm) << '\n';
  for (const auto& p : c.confusable_pairs)
    out << "confusable " << p.fine_a << ' ' << p.fine_b << ' '
        << fmt_g17(p.proximity) << '\n';
  out << "seed " << c.seed << '\n';
  out << "split_seed " << ds.split_seed << '\n';
  out << "n_train_target " << ds.n_train_target << '\n';
  out << "n_val_target " << ds.n_val_target << '\n';

  const Splits& sp = ds.splits;
  const size_t total = sp.train_source().size() + sp.train_target_size() +
                       sp.val_target().size() + sp.test_target().size();
  out << "samples " << total << '\n';
  for (const auto& s : sp.train_source())
    detail::write_sample(out, "train_source", s);
  for (const auto& s : raw_train_target_for_io(sp))
    detail::write_sample(out, "train_target", s);
  for (const auto& s : sp.val_target()) detail::write_sample(out, "val_target", s);
  for (const auto& s : sp.test_target())
    detail::write_sample(out, "test_target", s);

  write_text_file(path, out.str());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) fail(Errc::schema_mismatch, "empty file");
  {
    const auto head = split(trim(line), ' ');
    if (head.size() != 2 || head[0] != "hfusion-dataset" ||
        parse_int(head[1]) != kDatasetFormatVersion)
      fail(Errc::schema_mismatch, "bad dataset header: '" + line + "'");
  }

  Dataset ds;
  GenConfig& c = ds.config;
  std::vector<std::string> tree_lines;
  size_t expected_samples = 0;
  int n_fine_declared = 0;

  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty()) continue;
    const size_t sp_pos = s.find(' ');
    const std::string key = s.substr(0, sp_pos);
    const std::string rest = sp_pos == std::string::npos ? "" : s.substr(sp_pos + 1);
    if (key == "n_fine") n_fine_declared = static_cast<int>(parse_int(rest));
    else if (key == "class") tree_lines.push_back(rest);
    else if (key == "d_in") c.d_in = static_cast<int>(parse_int(rest));
    else if (key == "per_class_source") c.per_class_source = static_cast<int>(parse_int(rest));
    else if (key == "per_class_target") c.per_class_target = static_cast<int>(parse_int(rest));
    else if (key == "target_class_counts") {
      c.target_class_counts.clear();
      for (const auto& tok : split(rest, ' '))
        if (!trim(tok).empty()) c.target_class_counts.push_back(static_cast<int>(parse_int(tok)));
    } else if (key == "coarse_spread") c.coarse_spread = parse_double(rest);
    else if (key == "middle_spread") c.middle_spread = parse_double(rest);
    else if (key == "fine_spread") c.fine_spread = parse_double(rest);
    else if (key == "noise_sigma") c.noise_sigma = parse_double(rest);
    else if (key == "shift_rotation_angle") c.shift_rotation_angle = parse_double(rest);
    else if (key == "shift_translation_norm") c.shift_translation_norm = parse_double(rest);
    else if (key == "confusable") {
      const auto parts = split(rest, ' ');
      if (parts.size() != 3) fail(Errc::schema_mismatch, "confusable record");
      c.confusable_pairs.push_back({static_cast<int>(parse_int(parts[0])),
                                    static_cast<int>(parse_int(parts[1])),
                                    parse_double(parts[2])});
    } else if (key == "seed") c.seed = parse_u64(rest);
    else if (key == "split_seed") ds.split_seed = parse_u64(rest);
    else if (key == "n_train_target") ds.n_train_target = static_cast<int>(parse_int(rest));
    else if (key == "n_val_target") ds.n_val_target = static_cast<int>(parse_int(rest));
    else if (key == "samples") {
      expected_samples = static_cast<size_t>(parse_int(rest));
      break;
    } else {
      fail(Errc::schema_mismatch, "unknown header key '" + key + "'");
    }
  }

  {
    std::ostringstream tree_text;
    for (const auto& l : tree_lines) tree_text << l << '\n';
    std::istringstream tree_in(tree_text.str());
    ds.tree = load_hierarchy(tree_in);
    c.tree = ds.tree;
  }
  if (ds.tree.n_fine() != n_fine_declared)
    fail(Errc::schema_mismatch, "class record count != n_fine");

  std::vector<Sample> train_source, train_target, val_target, test_target;
  size_t read = 0;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty()) continue;
    const auto parts = split(s, ',');
    if (parts.size() != static_cast<size_t>(5 + c.d_in))
      fail(Errc::schema_mismatch, "sample record width");
    Sample smp;
    smp.domain = parts[1] == "source" ? Domain::source : Domain::target;
    smp.y1 = static_cast<int>(parse_int(parts[2]));
    smp.y2 = static_cast<int>(parse_int(parts[3]));
    smp.y3 = static_cast<int>(parse_int(parts[4]));
    smp.x.resize(c.d_in);
    for (int k = 0; k < c.d_in; ++k) smp.x[k] = parse_double(parts[5 + k]);
    if (parts[0] == "train_source") train_source.push_back(std::move(smp));
    else if (parts[0] == "train_target") train_target.push_back(std::move(smp));
    else if (parts[0] == "val_target") val_target.push_back(std::move(smp));
    else if (parts[0] == "test_target") test_target.push_back(std::move(smp));
    else fail(Errc::schema_mismatch, "unknown split tag '" + parts[0] + "'");
    ++read;
  }
  if (read != expected_samples)
    fail(Errc::schema_mismatch, "sample count mismatch");

  ds.splits = make_splits(std::move(train_source), std::move(train_target),
                          std::move(val_target), std::move(test_target));
  return ds;
}

}  // namespace hfusion
