#pragma once

// Minimal CSR symmetric-matrix container used by the grid discretization and
// the iterative eigensolver.  Assembly goes through a triplet accumulator so
// periodic wrap-around stencils that hit the same entry twice just sum.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <map>
#include <vector>

namespace folspec {

class SparseSym {
 public:
  explicit SparseSym(int n = 0) : n_(n), row_ptr_(static_cast<std::size_t>(n) + 1, 0) {}

  int dim() const { return n_; }
  std::size_t nonzeros() const { return vals_.size(); }

  void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.resize(n_);
    for (int i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t idx = row_ptr_[i]; idx < row_ptr_[i + 1]; ++idx)
        acc += vals_[idx] * x(col_idx_[idx]);
      y(i) = acc;
    }
  }

  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y;
    multiply(x, y);
    return y;
  }

  double coeff(int i, int j) const {
    for (std::size_t idx = row_ptr_[i]; idx < row_ptr_[i + 1]; ++idx)
      if (col_idx_[idx] == j) return vals_[idx];
    return 0.0;
  }

  // Largest |A_ij - A_ji|; exact zero when assembly preserved symmetry.
  double max_asymmetry() const {
    double worst = 0.0;
    for (int i = 0; i < n_; ++i)
      for (std::size_t idx = row_ptr_[i]; idx < row_ptr_[i + 1]; ++idx) {
        const int j = col_idx_[idx];
        if (j < i) continue;
        const double diff = std::abs(vals_[idx] - coeff(j, i));
        worst = std::max(worst, diff);
      }
    return worst;
  }

  double max_abs_row_sum() const {
    double worst = 0.0;
    for (int i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t idx = row_ptr_[i]; idx < row_ptr_[i + 1]; ++idx) acc += vals_[idx];
      worst = std::max(worst, std::abs(acc));
    }
    return worst;
  }

  class Builder {
   public:
    explicit Builder(int n) : n_(n), rows_(n) {}

    void add(int i, int j, double v) { rows_[i][j] += v; }

    SparseSym build() const {
      SparseSym m(n_);
      std::size_t nnz = 0;
      for (const auto& row : rows_) nnz += row.size();
      m.col_idx_.reserve(nnz);
      m.vals_.reserve(nnz);
      for (int i = 0; i < n_; ++i) {
        m.row_ptr_[i] = m.vals_.size();
        for (const auto& [j, v] : rows_[i]) {
          m.col_idx_.push_back(j);
          m.vals_.push_back(v);
        }
      }
      m.row_ptr_[n_] = m.vals_.size();
      return m;
    }

   private:
    int n_;
    std::vector<std::map<int, double>> rows_;
  };

 private:
  int n_;
  std::vector<std::size_t> row_ptr_;
  std::vector<int> col_idx_;
  std::vector<double> vals_;
};

}  // namespace folspec
