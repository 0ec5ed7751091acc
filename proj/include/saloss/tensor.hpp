#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "saloss/errors.hpp"

namespace saloss {

using Shape = std::vector<std::size_t>;

struct TensorImpl;

/// Dense 64-bit float tensor with reverse-mode autodiff. Copies share the
/// underlying node; the recorded graph lives as long as tensors referencing it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rows() const;  // 2-D only
    std::size_t cols() const;  // 2-D only

    std::span<const double> values() const;
    std::span<double> mutable_values();  // leaf initialization / perturbation
    std::span<const double> grad() const;
    bool has_grad() const;
    bool requires_grad() const;

    double value() const;                               // scalar
    double at(std::size_t i) const;                     // 1-D
    double at(std::size_t r, std::size_t c) const;      // 2-D

    std::shared_ptr<TensorImpl> impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backprop;  // scatter self.grad into parents
    const char* op = "leaf";
};

/// Topologically ordered record of the operations reachable from a root.
/// Every node's parents precede it in order().
class Tape {
public:
    explicit Tape(const Tensor& root);
    const std::vector<std::shared_ptr<TensorImpl>>& order() const { return order_; }
    /// Seeds the root with gradient 1 and runs all backward rules in reverse
    /// topological order. Root must be scalar.
    void backward();

private:
    std::vector<std::shared_ptr<TensorImpl>> order_;
};

/// Convenience: Tape(loss).backward() with the scalar check.
void backward(const Tensor& loss);

// ---- differentiable operations ------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);  // same shape, or 2-D + 1-D row bias
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor softmax_rows(const Tensor& a);  // over last axis, max-subtracted
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids);
Tensor concat(const std::vector<Tensor>& parts);       // 1-D concatenation
Tensor concat_rows(const std::vector<Tensor>& parts);  // 2-D, stack along rows
Tensor mean(const Tensor& a);  // all elements -> scalar
Tensor sum(const Tensor& a);   // all elements -> scalar
Tensor transpose(const Tensor& a);
/// mask entries !=0 are replaced by fill (default -1e9, pre-softmax).
Tensor masked_fill(const Tensor& a, const std::vector<double>& mask,
                   double fill = -1e9);
Tensor relu(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor select_row(const Tensor& a, std::size_t row);
Tensor pick(const Tensor& a, std::size_t index);  // 1-D -> scalar
Tensor gather(const Tensor& a, const std::vector<std::size_t>& indices);
/// x / sum(x); backward distributes through the normalizer.
Tensor renormalize(const Tensor& a);
/// -log softmax(logits)[label] for a 1-D logit vector.
Tensor cross_entropy_logits(const Tensor& logits, std::size_t label);

/// Max over coordinates of |analytic - central difference| /
/// max(1e-8, |analytic| + |central difference|), with the analytic gradient
/// from backward() and the difference at the given step.
double gradient_check(const std::function<Tensor(const Tensor&)>& f,
                      const Tensor& x, double step);

}  // namespace saloss
