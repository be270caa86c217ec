#pragma once

// TensorField: a lazily-evaluated covariant tensor field on a model chart.
// Fields are immutable handles; operators build new fields that pull their
// operands through the per-point EvalContext memo, so a deep operator chain
// evaluates each shared sub-expression once per node.

#include <atomic>
#include <memory>
#include <span>

#include "grslab/model.hpp"

namespace grs {

class TensorField {
 public:
  using EvalFn = std::function<JetTensor(EvalContext&, int)>;

  TensorField() = default;
  static TensorField make(int rank, EvalFn fn) {
    static std::atomic<uint64_t> next_id{1};
    TensorField f;
    f.impl_ = std::make_shared<const Impl>(Impl{rank, next_id.fetch_add(1), std::move(fn)});
    return f;
  }

  bool valid() const { return impl_ != nullptr; }
  int rank() const { return impl_->rank; }
  uint64_t id() const { return impl_->id; }
  JetTensor eval_raw(EvalContext& ctx, int order) const { return impl_->fn(ctx, order); }

 private:
  struct Impl {
    int rank;
    uint64_t id;
    EvalFn fn;
  };
  std::shared_ptr<const Impl> impl_;
};

TensorField scalar_field(ScalarFn fn);
TensorField constant_field(double v);
TensorField metric_field();
TensorField ricci_field();
// Metric restricted to factor block `b` of the model, zero on other blocks.
TensorField factor_metric_field(int b);

TensorField scaled(TensorField t, double c);
TensorField sum(TensorField a, TensorField b);
TensorField difference(TensorField a, TensorField b);
TensorField linear_combination(std::vector<TensorField> parts, std::vector<double> coef);
TensorField scalar_times(TensorField a, TensorField t);  // a rank 0
// Symmetrized tensor product of two 1-forms: (w ⊙ e)_ij = (w_i e_j + w_j e_i)/2.
TensorField sym_product(TensorField w, TensorField e);

}  // namespace grs
