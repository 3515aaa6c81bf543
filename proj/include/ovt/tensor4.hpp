#pragma once

#include <array>
#include <algorithm>
#include <cmath>

#include "ovt/common.hpp"

namespace ovt {

// Dense symmetric order-4 tensor over R^d. Entries are stored in
// lexicographic order (i,j,k,l) with the last index fastest.
class SymTensor4 {
 public:
  SymTensor4(Index d, Vector entries) : d_(d), entries_(std::move(entries)) {
    if (d_ < 1) throw DimensionMismatch("SymTensor4: d must be >= 1");
    const Index expect = d_ * d_ * d_ * d_;
    if (entries_.size() != expect)
      throw DimensionMismatch("SymTensor4: entries size " +
                              std::to_string(entries_.size()) + " != d^4 = " +
                              std::to_string(expect));
  }

  static SymTensor4 zero(Index d) {
    return SymTensor4(d, Vector::Zero(d * d * d * d));
  }

  Index d() const { return d_; }
  const Vector& entries() const { return entries_; }
  Vector& entries() { return entries_; }

  double at(Index i, Index j, Index k, Index l) const {
    return entries_[flat(i, j, k, l)];
  }
  double& at(Index i, Index j, Index k, Index l) {
    return entries_[flat(i, j, k, l)];
  }

  Index flat(Index i, Index j, Index k, Index l) const {
    return ((i * d_ + j) * d_ + k) * d_ + l;
  }

  // Adds c * v^{x4}. One product is computed per sorted index orbit and
  // written to every permutation slot, so symmetry is bit-exact.
  void add_rank_one(const Vector& v, double c = 1.0) {
    if (v.size() != d_) throw DimensionMismatch("add_rank_one: size mismatch");
    for (Index i = 0; i < d_; ++i)
      for (Index j = i; j < d_; ++j)
        for (Index k = j; k < d_; ++k)
          for (Index l = k; l < d_; ++l) {
            const double val = c * v[i] * v[j] * v[k] * v[l];
            std::array<Index, 4> p{i, j, k, l};
            do {
              entries_[flat(p[0], p[1], p[2], p[3])] += val;
            } while (std::next_permutation(p.begin(), p.end()));
          }
  }

  // Largest deviation from full permutation symmetry, relative to the
  // largest entry magnitude. Exactly symmetric tensors return 0.
  double symmetry_max_deviation() const {
    const double scale = entries_.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    std::array<Index, 4> idx{};
    for (Index i = 0; i < d_; ++i)
      for (Index j = i; j < d_; ++j)
        for (Index k = j; k < d_; ++k)
          for (Index l = k; l < d_; ++l) {
            idx = {i, j, k, l};
            const double ref = entries_[flat(i, j, k, l)];
            std::array<Index, 4> p = idx;
            // Orbit of the sorted representative under all permutations.
            do {
              const double v = entries_[flat(p[0], p[1], p[2], p[3])];
              worst = std::max(worst, std::abs(v - ref));
            } while (std::next_permutation(p.begin(), p.end()));
          }
    return worst / scale;
  }

  // M_{(i,j),(k,l)} = T(i,j,k,l); symmetric whenever T is.
  Matrix square_reshape() const {
    const Index d2 = d_ * d_;
    // entries are laid out so that (i,j) indexes rows and (k,l) columns
    // contiguously; a row-major map gives the reshaping without copying loops.
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                          Eigen::Dynamic, Eigen::RowMajor>>(
        entries_.data(), d2, d2);
  }

 private:
  Index d_;
  Vector entries_;
};

}  // namespace ovt
