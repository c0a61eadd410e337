#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hfusion/errors.hpp"

namespace hfusion {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. All reductions run in a fixed order so
// results are reproducible across runs.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) {
    return data[static_cast<size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }

  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline bool operator==(const Mat& a, const Mat& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

// C = A * B
inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) fail(Errc::shape_mismatch, "matmul dims");
  Mat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      double* crow = c.row(i);
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  return c;
}

// C = A * B^T
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols != b.cols) fail(Errc::shape_mismatch, "matmul_nt dims");
  Mat c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.rows; ++j) {
      const double* ar = a.row(i);
      const double* br = b.row(j);
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      c(i, j) = s;
    }
  return c;
}

// C = A^T * B
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) fail(Errc::shape_mismatch, "matmul_tn dims");
  Mat c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k)
    for (int i = 0; i < a.cols; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      const double* br = b.row(k);
      double* cr = c.row(i);
      for (int j = 0; j < b.cols; ++j) cr[j] += aki * br[j];
    }
  return c;
}

inline void add_inplace(Mat& a, const Mat& b) {
  if (!a.same_shape(b)) fail(Errc::shape_mismatch, "add_inplace dims");
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

inline void scale_inplace(Mat& a, double s) {
  for (double& v : a.data) v *= s;
}

// [A | B] column-wise.
inline Mat hstack(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) fail(Errc::shape_mismatch, "hstack rows");
  Mat c(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) c(i, j) = a(i, j);
    for (int j = 0; j < b.cols; ++j) c(i, a.cols + j) = b(i, j);
  }
  return c;
}

// [A; B] row-wise.
inline Mat vstack(const Mat& a, const Mat& b) {
  if (a.cols != b.cols) fail(Errc::shape_mismatch, "vstack cols");
  Mat c(a.rows + b.rows, a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) c(i, j) = a(i, j);
  for (int i = 0; i < b.rows; ++i)
    for (int j = 0; j < a.cols; ++j) c(a.rows + i, j) = b(i, j);
  return c;
}

inline Mat slice_cols(const Mat& a, int begin, int end) {
  if (begin < 0 || end > a.cols || begin > end)
    fail(Errc::shape_mismatch, "slice_cols range");
  Mat c(a.rows, end - begin);
  for (int i = 0; i < a.rows; ++i)
    for (int j = begin; j < end; ++j) c(i, j - begin) = a(i, j);
  return c;
}

inline double sq_dist_rows(const Mat& a, int i, const Mat& b, int j) {
  double s = 0.0;
  const double* x = a.row(i);
  const double* y = b.row(j);
  for (int k = 0; k < a.cols; ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return s;
}

inline double dist_rows(const Mat& a, int i, const Mat& b, int j) {
  return std::sqrt(sq_dist_rows(a, i, b, j));
}

}  // namespace hfusion
