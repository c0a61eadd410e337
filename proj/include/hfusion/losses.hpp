#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hfusion/errors.hpp"
#include "hfusion/matrix.hpp"

namespace hfusion {

// Indices into a feature batch. anchor/positive share the mining label,
// anchor/negative differ, anchor != positive.
struct Triplet {
  int anchor = -1;
  int positive = -1;
  int negative = -1;
};

inline bool operator==(const Triplet& a, const Triplet& b) {
  return a.anchor == b.anchor && a.positive == b.positive &&
         a.negative == b.negative;
}

// Batch-hard mining: one triplet per anchor, pairing the farthest same-label
// element with the nearest different-label element (Euclidean distance).
// Anchors without a valid positive or negative are skipped, which is common
// when mining under coarse labels. Ties break toward the lowest index.
inline std::vector<Triplet> mine_hard_triplets(const Mat& features,
                                               const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != features.rows)
    fail(Errc::shape_mismatch, "labels length != batch rows");

  const int n = features.rows;
  Mat d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = dist_rows(features, i, features, j);

  std::vector<Triplet> out;
  for (int a = 0; a < n; ++a) {
    int best_p = -1, best_n = -1;
    double far_p = -1.0, near_n = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (d(a, j) > far_p) {
          far_p = d(a, j);
          best_p = j;
        }
      } else {
        if (best_n < 0 || d(a, j) < near_n) {
          near_n = d(a, j);
          best_n = j;
        }
      }
    }
    if (best_p >= 0 && best_n >= 0) out.push_back({a, best_p, best_n});
  }
  return out;
}

struct LossGrad {
  double value = 0.0;
  Mat dfeatures;
};

// Mean over mined triplets of max(||f_a-f_p|| - ||f_a-f_n|| + alpha, 0).
// Distances are plain (non-squared) Euclidean. Gradients flow only through
// triplets with a strictly positive hinge; an empty triplet list yields
// loss 0 with zero gradients.
inline LossGrad triplet_loss(const Mat& features,
                             const std::vector<Triplet>& triplets,
                             double alpha) {
  if (alpha < 0) fail(Errc::bad_config, "margin must be >= 0");
  LossGrad out;
  out.dfeatures = Mat(features.rows, features.cols);
  if (triplets.empty()) return out;

  const double inv_n = 1.0 / static_cast<double>(triplets.size());
  const int dcols = features.cols;
  double total = 0.0;
  for (const auto& t : triplets) {
    if (t.anchor < 0 || t.anchor >= features.rows || t.positive < 0 ||
        t.positive >= features.rows || t.negative < 0 ||
        t.negative >= features.rows)
      fail(Errc::index_out_of_range, "triplet index outside batch");

    const double dap = dist_rows(features, t.anchor, features, t.positive);
    const double dan = dist_rows(features, t.anchor, features, t.negative);
    const double term = dap - dan + alpha;
    if (term <= 0.0) continue;
    total += term;

    const double* fa = features.row(t.anchor);
    const double* fp = features.row(t.positive);
    const double* fn = features.row(t.negative);
    double* ga = out.dfeatures.row(t.anchor);
    double* gp = out.dfeatures.row(t.positive);
    double* gn = out.dfeatures.row(t.negative);
    // d||fa-fp||/dfa = (fa-fp)/||fa-fp||; zero-distance pairs get a zero
    // subgradient.
    if (dap > 0.0) {
      for (int k = 0; k < dcols; ++k) {
        const double u = (fa[k] - fp[k]) / dap * inv_n;
        ga[k] += u;
        gp[k] -= u;
      }
    }
    if (dan > 0.0) {
      for (int k = 0; k < dcols; ++k) {
        const double u = (fa[k] - fn[k]) / dan * inv_n;
        ga[k] -= u;
        gn[k] += u;
      }
    }
  }
  out.value = total * inv_n;
  return out;
}

// Gaussian kernel family k(u,v) = exp(-||u-v||^2 / (2 sigma^2)).
struct KernelBank {
  std::vector<double> bandwidths;
  std::vector<double> weights;  // nonnegative, sum to 1
  bool degenerate = false;      // median heuristic hit an all-identical batch
};

// Median heuristic: sigma_base^2 = median of pairwise squared distances / 2
// (even pair counts average the two central order statistics). The bank
// spans sigma_base x {1/4, 1/2, 1, 2, 4} with uniform weights. An
// all-identical batch falls back to sigma_base = 1 and sets `degenerate`.
inline KernelBank median_bandwidth(const Mat& joint) {
  if (joint.rows < 2) fail(Errc::batch_too_small, "need at least 2 rows");
  std::vector<double> sq;
  sq.reserve(static_cast<size_t>(joint.rows) * (joint.rows - 1) / 2);
  for (int i = 0; i < joint.rows; ++i)
    for (int j = i + 1; j < joint.rows; ++j)
      sq.push_back(sq_dist_rows(joint, i, joint, j));
  std::sort(sq.begin(), sq.end());
  const size_t m = sq.size();
  const double median =
      (m % 2 == 1) ? sq[m / 2] : 0.5 * (sq[m / 2 - 1] + sq[m / 2]);

  KernelBank bank;
  double sigma_base = 1.0;
  if (median > 0.0) {
    sigma_base = std::sqrt(median / 2.0);
  } else {
    bank.degenerate = true;
  }
  for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    bank.bandwidths.push_back(sigma_base * f);
    bank.weights.push_back(0.2);
  }
  return bank;
}

struct MmdGrad {
  double value = 0.0;
  Mat dsource;
  Mat dtarget;
};

namespace detail {

// Sum of k(x_i, y_j) over all ordered pairs for one kernel, plus gradient
// accumulation: d k(u,v)/du = k * (v-u)/sigma^2. The same full double loop
// is used for every block so identical inputs cancel exactly.
inline double kernel_block(const Mat& x, const Mat& y, double sigma,
                           double coeff, Mat* gx, Mat* gy) {
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double inv_s2 = 1.0 / (sigma * sigma);
  double sum = 0.0;
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < y.rows; ++j) {
      const double sq = sq_dist_rows(x, i, y, j);
      const double k = std::exp(-sq * inv2s2);
      sum += k;
      if (gx || gy) {
        const double* xi = x.row(i);
        const double* yj = y.row(j);
        const double c = coeff * k * inv_s2;
        for (int t = 0; t < x.cols; ++t) {
          const double diff = yj[t] - xi[t];
          if (gx) (*gx)(i, t) += c * diff;
          if (gy) (*gy)(j, t) -= c * diff;
        }
      }
    }
  }
  return sum;
}

}  // namespace detail

// Biased (V-statistic) multi-kernel MMD^2 between two feature batches, with
// analytic gradients for both inputs. Always >= 0 and exactly 0 when the
// batches are identical.
inline MmdGrad mmd_loss(const Mat& source, const Mat& target,
                        const KernelBank& bank) {
  if (source.rows < 2 || target.rows < 2)
    fail(Errc::batch_too_small, "mmd needs >= 2 samples per domain");
  if (source.cols != target.cols)
    fail(Errc::shape_mismatch, "feature widths differ");
  if (bank.bandwidths.empty() || bank.bandwidths.size() != bank.weights.size())
    fail(Errc::bad_config, "kernel bank malformed");

  const double ns = source.rows, nt = target.rows;
  MmdGrad out;
  out.dsource = Mat(source.rows, source.cols);
  out.dtarget = Mat(target.rows, target.cols);

  for (size_t k = 0; k < bank.bandwidths.size(); ++k) {
    const double sigma = bank.bandwidths[k];
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      fail(Errc::bad_config, "kernel bandwidth must be positive");
    const double w = bank.weights[k];
    const double c_ss = w / (ns * ns);
    const double c_tt = w / (nt * nt);
    const double c_st = -2.0 * w / (ns * nt);

    // ss block touches dsource twice per pair (as both arguments).
    const double ss = detail::kernel_block(source, source, sigma, c_ss,
                                           &out.dsource, &out.dsource);
    const double tt = detail::kernel_block(target, target, sigma, c_tt,
                                           &out.dtarget, &out.dtarget);
    const double st = detail::kernel_block(source, target, sigma, c_st,
                                           &out.dsource, &out.dtarget);
    out.value += w * (ss / (ns * ns) + tt / (nt * nt) - 2.0 * st / (ns * nt));
  }
  return out;
}

struct CeGrad {
  double value = 0.0;
  Mat dlogits;
};

// Mean cross entropy of softmax(logits) against integer labels, with
// log-sum-exp stabilization. Gradient is (softmax - onehot) / n.
inline CeGrad cross_entropy(const Mat& logits, const std::vector<int>& labels) {
  if (logits.rows < 1) fail(Errc::shape_mismatch, "empty logits");
  if (static_cast<int>(labels.size()) != logits.rows)
    fail(Errc::shape_mismatch, "labels length != logits rows");

  const int n = logits.rows, c = logits.cols;
  CeGrad out;
  out.dlogits = Mat(n, c);
  const double inv_n = 1.0 / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= c)
      fail(Errc::label_out_of_range,
           "label " + std::to_string(y) + " for " + std::to_string(c) +
               " classes");
    const double* z = logits.row(i);
    double m = z[0];
    for (int j = 1; j < c; ++j) m = std::max(m, z[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(z[j] - m);
    const double lse = m + std::log(sum);
    total += lse - z[y];
    double* g = out.dlogits.row(i);
    for (int j = 0; j < c; ++j) g[j] = std::exp(z[j] - lse) * inv_n;
    g[y] -= inv_n;
  }
  out.value = total * inv_n;
  return out;
}

}  // namespace hfusion
