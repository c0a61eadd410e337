#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hfusion/datagen.hpp"
#include "hfusion/errors.hpp"
#include "hfusion/matrix.hpp"
#include "hfusion/pipeline.hpp"
#include "hfusion/util.hpp"

namespace hfusion {

// One fused-feature prototype per fine class, tagged with the split that
// produced it.
struct PrototypeSet {
  std::map<int, Vec> prototypes;
  std::string source_split_id;
};

inline Mat gather_inputs(const std::vector<Sample>& samples) {
  if (samples.empty()) fail(Errc::empty_split, "no samples");
  Mat x(static_cast<int>(samples.size()),
        static_cast<int>(samples[0].x.size()));
  for (size_t i = 0; i < samples.size(); ++i)
    for (size_t k = 0; k < samples[i].x.size(); ++k)
      x(static_cast<int>(i), static_cast<int>(k)) = samples[i].x[k];
  return x;
}

// Fraction of samples whose predicted fine label equals y3. Exact ratio of
// counts.
inline double top1(const TrainedModel& m, const std::vector<Sample>& split) {
  if (split.empty()) fail(Errc::empty_split, "top1 over empty split");
  const std::vector<int> pred = predict(m, gather_inputs(split));
  int correct = 0;
  for (size_t i = 0; i < split.size(); ++i)
    if (pred[i] == split[i].y3) ++correct;
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

// Class prototypes: per-class mean of fused features over a labeled
// reference split. Every fine class of the taxonomy must be present.
inline PrototypeSet class_prototypes(const TrainedModel& m,
                                     const std::vector<Sample>& reference,
                                     int n_fine,
                                     const std::string& split_id = "") {
  if (reference.empty()) fail(Errc::empty_split, "empty reference split");
  const Mat fused = fuse(m, gather_inputs(reference));
  std::map<int, Vec> sums;
  std::map<int, int> counts;
  for (size_t i = 0; i < reference.size(); ++i) {
    const int y = reference[i].y3;
    auto [it, fresh] = sums.try_emplace(y, Vec(fused.cols, 0.0));
    const double* row = fused.row(static_cast<int>(i));
    for (int k = 0; k < fused.cols; ++k) it->second[k] += row[k];
    ++counts[y];
  }
  PrototypeSet ps;
  ps.source_split_id = split_id;
  for (int c = 0; c < n_fine; ++c) {
    auto it = sums.find(c);
    if (it == sums.end())
      fail(Errc::missing_class,
           "class " + std::to_string(c) + " absent from reference split");
    Vec proto = it->second;
    double norm = 0.0;
    for (double& v : proto) v /= counts[c];
    for (double v : proto) norm += v * v;
    if (norm == 0.0)
      fail(Errc::degenerate_prototype,
           "class " + std::to_string(c) + " prototype is the zero vector");
    ps.prototypes[c] = std::move(proto);
  }
  return ps;
}

inline double cosine_similarity(const Vec& a, const Vec& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) fail(Errc::zero_vector, "cosine of zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// 1 iff the fused vector is strictly most cosine-similar to prototype i;
// exact ties award no class.
inline int indicator(const Vec& f, const PrototypeSet& protos, int i) {
  auto it = protos.prototypes.find(i);
  if (it == protos.prototypes.end())
    fail(Errc::missing_class, "no prototype for class " + std::to_string(i));
  const double s_i = cosine_similarity(f, it->second);
  for (const auto& [j, proto] : protos.prototypes) {
    if (j == i) continue;
    if (!(s_i > cosine_similarity(f, proto))) return 0;
  }
  return 1;
}

// Fraction of split samples of class c1 whose fused feature fires the
// indicator for class c2: the tendency of c1 samples to look like c2.
inline double m_metric(const TrainedModel& m, const std::vector<Sample>& split,
                       const PrototypeSet& protos, int c1, int c2) {
  int total = 0, hits = 0;
  const Mat fused = fuse(m, gather_inputs(split));
  for (size_t i = 0; i < split.size(); ++i) {
    if (split[i].y3 != c1) continue;
    ++total;
    Vec f(fused.cols);
    const double* row = fused.row(static_cast<int>(i));
    for (int k = 0; k < fused.cols; ++k) f[k] = row[k];
    hits += indicator(f, protos, c2);
  }
  if (total == 0)
    fail(Errc::no_samples_of_class,
         "class " + std::to_string(c1) + " absent from split");
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Scoring summary for one trained run.
struct EvalReport {
  double top1 = 0.0;
  std::map<int, double> per_class_accuracy;
  struct MEntry {
    int c1 = 0, c2 = 0;
    double m_c1_c1 = 0.0;
    double m_c1_c2 = 0.0;
  };
  std::vector<MEntry> m_table;

  // Provenance.
  std::string variant;
  double lambda = 0.0;
  bool use_da = false;
  std::uint64_t seed = 0;

  // Optional fused test features for the 2-D projection export.
  Mat fused_test;
  std::vector<int> fused_y1, fused_y2, fused_y3;
};

// ---------------------------------------------------------------------------
// 2-D PCA of fused features (deterministic Jacobi eigensolver)
// ---------------------------------------------------------------------------

namespace detail {

// Cyclic Jacobi sweeps on a symmetric matrix; returns eigenvalues and
// column eigenvectors. Deterministic rotation order.
inline void jacobi_eigensymm(Mat a, Vec& eigvals, Mat& eigvecs) {
  const int n = a.rows;
  eigvecs = Mat(n, n);
  for (int i = 0; i < n; ++i) eigvecs(i, i) = 1.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-22) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = eigvecs(k, p), vkq = eigvecs(k, q);
          eigvecs(k, p) = c * vkp - s * vkq;
          eigvecs(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eigvals.resize(n);
  for (int i = 0; i < n; ++i) eigvals[i] = a(i, i);
}

}  // namespace detail

// Projects rows of `features` onto their top-2 principal components. Sign
// convention: the largest-magnitude loading of each component is positive.
inline Mat pca_2d(const Mat& features) {
  const int n = features.rows, d = features.cols;
  if (n < 2) fail(Errc::batch_too_small, "pca needs >= 2 rows");
  Vec mean(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) mean[k] += features(i, k);
  for (double& v : mean) v /= n;
  Mat cov(d, d);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < d; ++p) {
      const double xp = features(i, p) - mean[p];
      for (int q = 0; q < d; ++q)
        cov(p, q) += xp * (features(i, q) - mean[q]);
    }
  scale_inplace(cov, 1.0 / (n - 1));

  Vec eigvals;
  Mat eigvecs;
  detail::jacobi_eigensymm(cov, eigvals, eigvecs);
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (eigvals[a] != eigvals[b]) return eigvals[a] > eigvals[b];
    return a < b;
  });

  Mat proj(n, 2);
  for (int comp = 0; comp < 2 && comp < d; ++comp) {
    Vec axis(d);
    int arg = 0;
    for (int k = 0; k < d; ++k) {
      axis[k] = eigvecs(k, order[comp]);
      if (std::fabs(axis[k]) > std::fabs(axis[arg])) arg = k;
    }
    if (axis[arg] < 0)
      for (double& v : axis) v = -v;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (features(i, k) - mean[k]) * axis[k];
      proj(i, comp) = s;
    }
  }
  return proj;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace detail {

struct GroupStats {
  double sum = 0.0;
  int n = 0;
  double mean() const { return n ? sum / n : 0.0; }
};

inline std::string pair_label(const HierarchyTree& tree, int c1, int c2) {
  const std::string a =
      tree.fine_names.empty() ? std::to_string(c1) : tree.fine_names[c1];
  const std::string b =
      tree.fine_names.empty() ? std::to_string(c2) : tree.fine_names[c2];
  return a + "(" + b + ")";
}

}  // namespace detail

// Writes the fixed-name CSV report files into `dir`, aggregating run
// reports by variant / domain-adaptation flag / lambda (means across
// seeds). Tables keyed to the default trade-off lambda = 1. Files with no
// applicable rows still get their header.
inline void emit_report(const std::vector<EvalReport>& results,
                        const HierarchyTree& tree,
                        const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::io_error, "cannot create " + dir.string());

  const double kDefaultLambda = 1.0;
  auto is_default_lambda = [&](const EvalReport& r) {
    return !r.use_da || r.lambda == kDefaultLambda;
  };

  // method -> accuracy at DA on, default lambda
  std::map<std::string, detail::GroupStats> acc_da_on, acc_da_off;
  // lambda -> method -> accuracy
  std::map<double, std::map<std::string, detail::GroupStats>> acc_by_lambda;
  // method -> pair index -> (m11, m12)
  std::map<std::string, std::vector<detail::GroupStats>> m11, m12;
  std::vector<std::pair<int, int>> pair_ids;

  for (const auto& r : results) {
    if (r.use_da) {
      acc_by_lambda[r.lambda][r.variant].sum += r.top1;
      acc_by_lambda[r.lambda][r.variant].n += 1;
      if (r.lambda == kDefaultLambda) {
        acc_da_on[r.variant].sum += r.top1;
        acc_da_on[r.variant].n += 1;
      }
    } else {
      acc_da_off[r.variant].sum += r.top1;
      acc_da_off[r.variant].n += 1;
    }
    if (r.use_da && is_default_lambda(r) && !r.m_table.empty()) {
      if (pair_ids.empty())
        for (const auto& e : r.m_table) pair_ids.emplace_back(e.c1, e.c2);
      auto& v11 = m11[r.variant];
      auto& v12 = m12[r.variant];
      v11.resize(pair_ids.size());
      v12.resize(pair_ids.size());
      for (size_t i = 0; i < r.m_table.size() && i < pair_ids.size(); ++i) {
        v11[i].sum += r.m_table[i].m_c1_c1;
        v11[i].n += 1;
        v12[i].sum += r.m_table[i].m_c1_c2;
        v12[i].n += 1;
      }
    }
  }

  const std::vector<std::string> table1_order{
      "baseline", "baseline_w_coarse", "baseline_w_middle", "ours"};

  {  // Table of the two headline methods.
    std::ostringstream out;
    out << "method,mean_top1\n";
    for (const std::string& v : {std::string("baseline"), std::string("ours")})
      if (acc_da_on.count(v))
        out << v << ',' << fmt_g6(acc_da_on[v].mean()) << '\n';
    write_text_file(dir / "table_main.csv", out.str());
  }

  {  // Label-level ablation.
    std::ostringstream out;
    out << "method,fe1,fe2,fe3,mean_top1\n";
    for (const std::string& v : table1_order) {
      if (!acc_da_on.count(v)) continue;
      const auto lv = make_variant(v);
      out << v << ',' << lv[0] << ',' << lv[1] << ',' << lv[2] << ','
          << fmt_g6(acc_da_on[v].mean()) << '\n';
    }
    write_text_file(dir / "table_ablation.csv", out.str());
  }

  {  // Domain-adaptation necessity.
    std::ostringstream out;
    out << "method,da,mean_top1\n";
    for (const std::string& v : {std::string("baseline"), std::string("ours")})
      if (acc_da_off.count(v))
        out << v << ",0," << fmt_g6(acc_da_off[v].mean()) << '\n';
    for (const std::string& v : {std::string("baseline"), std::string("ours")})
      if (acc_da_on.count(v))
        out << v << ",1," << fmt_g6(acc_da_on[v].mean()) << '\n';
    write_text_file(dir / "table_da.csv", out.str());
  }

  {  // Confusion-tendency table: cells are M(C1,C1)(M(C1,C2)).
    std::ostringstream out;
    out << "method";
    for (const auto& [c1, c2] : pair_ids)
      out << ',' << detail::pair_label(tree, c1, c2);
    out << '\n';
    for (const std::string& v : {std::string("baseline"), std::string("ours")}) {
      if (!m11.count(v)) continue;
      out << v;
      for (size_t i = 0; i < pair_ids.size(); ++i)
        out << ',' << fmt_g6(m11[v][i].mean()) << '('
            << fmt_g6(m12[v][i].mean()) << ')';
      out << '\n';
    }
    write_text_file(dir / "table_m.csv", out.str());
  }

  {  // Accuracy against the trade-off weight, one row per lambda.
    std::ostringstream out;
    out << "lambda,baseline,ours\n";
    for (const auto& [lam, methods] : acc_by_lambda) {
      out << fmt_g6(lam);
      for (const std::string& v :
           {std::string("baseline"), std::string("ours")}) {
        out << ',';
        auto it = methods.find(v);
        if (it != methods.end()) out << fmt_g6(it->second.mean());
      }
      out << '\n';
    }
    write_text_file(dir / "lambda_sweep.csv", out.str());
  }

  {  // 2-D projection of fused test features from the first report that
     // carries them.
    std::ostringstream out;
    out << "pc1,pc2,y1,y2,y3\n";
    for (const auto& r : results) {
      if (r.fused_test.rows == 0) continue;
      const Mat proj = pca_2d(r.fused_test);
      for (int i = 0; i < proj.rows; ++i)
        out << fmt_g6(proj(i, 0)) << ',' << fmt_g6(proj(i, 1)) << ','
            << r.fused_y1[i] << ',' << r.fused_y2[i] << ',' << r.fused_y3[i]
            << '\n';
      break;
    }
    write_text_file(dir / "features_2d.csv", out.str());
  }
}

}  // namespace hfusion
