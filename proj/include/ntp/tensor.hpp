#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ntp::num {

// Dense row-major 2-D tensor of doubles. Vectors are 1xN tensors. Double
// precision throughout so finite-difference checks are tight.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> v) : rows(r), cols(c), data(std::move(v)) {
    if (data.size() != static_cast<size_t>(r) * c) throw std::invalid_argument("tensor shape/data mismatch");
  }

  static Tensor row(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return Tensor(1, n, std::move(v));
  }

  int size() const { return rows * cols; }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Tensor& o) const { return rows == o.rows && cols == o.cols && data == o.data; }
};

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

inline MapM emap(Tensor& t) { return MapM(t.data.data(), t.rows, t.cols); }
inline CMapM emap(const Tensor& t) { return CMapM(t.data.data(), t.rows, t.cols); }

}  // namespace ntp::num
