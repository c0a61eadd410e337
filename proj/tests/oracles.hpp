#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "hfusion/losses.hpp"
#include "hfusion/matrix.hpp"

namespace oracles {

using hfusion::Mat;
using hfusion::Triplet;

inline double row_dist(const Mat& f, int i, int j) {
  double s = 0.0;
  for (int k = 0; k < f.cols; ++k) {
    const double d = f(i, k) - f(j, k);
    s += d * d;
  }
  return std::sqrt(s);
}

// Exhaustive scan over all (a, p, n) index triples, keeping per anchor the
// farthest positive and nearest negative, ties to the lowest index.
inline std::vector<Triplet> exhaustive_hard_triplets(
    const Mat& f, const std::vector<int>& labels) {
  const int n = f.rows;
  std::vector<Triplet> out;
  for (int a = 0; a < n; ++a) {
    Triplet best{a, -1, -1};
    double dp = -1.0, dn = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < n; ++q) {
        if (p == a || q == a || labels[p] != labels[a] ||
            labels[q] == labels[a])
          continue;
        if (row_dist(f, a, p) > dp) {
          dp = row_dist(f, a, p);
          best.positive = p;
        }
        if (best.negative < 0 || row_dist(f, a, q) < dn) {
          dn = row_dist(f, a, q);
          best.negative = q;
        }
      }
    }
    if (best.positive >= 0 && best.negative >= 0) out.push_back(best);
  }
  return out;
}

// Direct softmax cross entropy without the log-sum-exp reformulation.
inline double brute_force_ce(const Mat& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (int i = 0; i < logits.rows; ++i) {
    double denom = 0.0;
    for (int j = 0; j < logits.cols; ++j) denom += std::exp(logits(i, j));
    total += -std::log(std::exp(logits(i, labels[i])) / denom);
  }
  return total / logits.rows;
}

// Central finite differences of a scalar loss with respect to every entry
// of a feature matrix. Returns the worst relative error against `analytic`.
inline double fd_check_features(const std::function<double(const Mat&)>& loss,
                                Mat f, const Mat& analytic,
                                double eps = 1e-5) {
  double worst = 0.0;
  for (size_t c = 0; c < f.data.size(); ++c) {
    const double orig = f.data[c];
    f.data[c] = orig + eps;
    const double lp = loss(f);
    f.data[c] = orig - eps;
    const double lm = loss(f);
    f.data[c] = orig;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = analytic.data[c];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace oracles
