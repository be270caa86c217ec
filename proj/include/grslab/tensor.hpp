#pragma once

// Dense covariant tensor of jets at a point, rank 0..4, all indices lowered
// unless a routine says otherwise.  Row-major component layout.

#include <cassert>
#include <vector>

#include "grslab/jets.hpp"

namespace grs {

class JetTensor {
 public:
  JetTensor() : dim_(0), rank_(0) {}
  JetTensor(const JetSpace& s, int dim, int rank) : dim_(dim), rank_(rank) {
    int sz = 1;
    for (int i = 0; i < rank; ++i) sz *= dim;
    comp_.assign(sz, Jet(s));
  }

  int dim() const { return dim_; }
  int rank() const { return rank_; }
  int size() const { return static_cast<int>(comp_.size()); }
  int order() const { return comp_.empty() ? 0 : comp_[0].space().order(); }

  Jet& operator[](int flat) { return comp_[flat]; }
  const Jet& operator[](int flat) const { return comp_[flat]; }

  Jet& at() { return comp_[0]; }
  const Jet& at() const { return comp_[0]; }
  Jet& at(int i) { return comp_[i]; }
  const Jet& at(int i) const { return comp_[i]; }
  Jet& at(int i, int j) { return comp_[i * dim_ + j]; }
  const Jet& at(int i, int j) const { return comp_[i * dim_ + j]; }
  Jet& at(int i, int j, int k) { return comp_[(i * dim_ + j) * dim_ + k]; }
  const Jet& at(int i, int j, int k) const { return comp_[(i * dim_ + j) * dim_ + k]; }
  Jet& at(int i, int j, int k, int l) { return comp_[((i * dim_ + j) * dim_ + k) * dim_ + l]; }
  const Jet& at(int i, int j, int k, int l) const {
    return comp_[((i * dim_ + j) * dim_ + k) * dim_ + l];
  }

  JetTensor truncated(int order) const {
    JetTensor t;
    t.dim_ = dim_;
    t.rank_ = rank_;
    t.comp_.reserve(comp_.size());
    for (const Jet& c : comp_) t.comp_.push_back(c.truncated(order));
    return t;
  }

  JetTensor& operator+=(const JetTensor& o) {
    assert(size() == o.size());
    for (int i = 0; i < size(); ++i) comp_[i] += o.comp_[i];
    return *this;
  }
  JetTensor& operator-=(const JetTensor& o) {
    assert(size() == o.size());
    for (int i = 0; i < size(); ++i) comp_[i] -= o.comp_[i];
    return *this;
  }
  JetTensor& operator*=(double v) {
    for (Jet& c : comp_) c *= v;
    return *this;
  }
  friend JetTensor operator+(JetTensor a, const JetTensor& b) { return a += b; }
  friend JetTensor operator-(JetTensor a, const JetTensor& b) { return a -= b; }
  friend JetTensor operator*(JetTensor a, double v) { return a *= v; }
  friend JetTensor operator*(double v, JetTensor a) { return a *= v; }

 private:
  int dim_, rank_;
  std::vector<Jet> comp_;
};

}  // namespace grs
