#include "saloss/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace saloss {

namespace {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

void check_finite(const char* op, const Tensor& t) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite input value");
        }
    }
}

std::shared_ptr<TensorImpl> make_node(const char* op, Shape shape,
                                      std::vector<Tensor> parents) {
    auto node = std::make_shared<TensorImpl>();
    node->op = op;
    node->shape = std::move(shape);
    node->values.assign(shape_size(node->shape), 0.0);
    for (auto& p : parents) {
        node->parents.push_back(p.impl());
        node->requires_grad = node->requires_grad || p.impl()->requires_grad ||
                              !p.impl()->parents.empty();
    }
    return node;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

}  // namespace

// ---- Tensor --------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->values.assign(shape_size(impl->shape), 0.0);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_size(shape) != values.size()) {
        throw ShapeError("Tensor::from: " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->values.size(); }

std::size_t Tensor::rows() const {
    if (impl_->shape.size() != 2) throw ShapeError("rows: tensor is not 2-D");
    return impl_->shape[0];
}

std::size_t Tensor::cols() const {
    if (impl_->shape.size() != 2) throw ShapeError("cols: tensor is not 2-D");
    return impl_->shape[1];
}

std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::mutable_values() { return impl_->values; }

std::span<const double> Tensor::grad() const {
    if (impl_->grad.size() != impl_->values.size()) {
        throw NumericError("grad: gradient not populated (run backward first)");
    }
    return impl_->grad;
}

bool Tensor::has_grad() const {
    return impl_ && impl_->grad.size() == impl_->values.size();
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

double Tensor::value() const {
    if (impl_->values.size() != 1) throw ShapeError("value: tensor is not scalar");
    return impl_->values[0];
}

double Tensor::at(std::size_t i) const { return impl_->values.at(i); }

double Tensor::at(std::size_t r, std::size_t c) const {
    return impl_->values.at(r * cols() + c);
}

// ---- Tape ----------------------------------------------------------------

Tape::Tape(const Tensor& root) {
    if (!root.defined()) throw NumericError("Tape: undefined root tensor");
    std::unordered_set<TensorImpl*> visited;
    // iterative post-order DFS
    std::vector<std::pair<std::shared_ptr<TensorImpl>, std::size_t>> stack;
    stack.emplace_back(root.impl(), 0);
    visited.insert(root.impl().get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            auto child = node->parents[next_child++];
            if (visited.insert(child.get()).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order_.push_back(node);
            stack.pop_back();
        }
    }
}

void Tape::backward() {
    if (order_.empty()) throw NumericError("backward: empty tape");
    auto& root = order_.back();
    if (root->values.size() != 1) {
        throw ShapeError("backward: loss must be scalar, got " +
                         shape_str(root->shape));
    }
    for (auto& node : order_) {
        node->grad.assign(node->values.size(), 0.0);
    }
    root->grad[0] = 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

void backward(const Tensor& loss) { Tape(loss).backward(); }

// ---- ops -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_finite("matmul", a);
    check_finite("matmul", b);
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
        shape_error("matmul", a, b);
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    auto node = make_node("matmul", {m, n}, {a, b});
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j) {
                node->values[i * n + j] += aip * bv[p * n + j];
            }
        }
    }
    node->backprop = [m, k, n](TensorImpl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double g = self.grad[i * n + j];
                for (std::size_t p = 0; p < k; ++p) {
                    pa.grad[i * k + p] += g * pb.values[p * n + j];
                    pb.grad[p * n + j] += g * pa.values[i * k + p];
                }
            }
        }
    };
    return Tensor(node);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_finite("add", a);
    check_finite("add", b);
    if (a.shape() == b.shape()) {
        auto node = make_node("add", a.shape(), {a, b});
        for (std::size_t i = 0; i < a.size(); ++i) {
            node->values[i] = a.values()[i] + b.values()[i];
        }
        node->backprop = [](TensorImpl& self) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                self.parents[0]->grad[i] += self.grad[i];
                self.parents[1]->grad[i] += self.grad[i];
            }
        };
        return Tensor(node);
    }
    // 2-D matrix + 1-D row bias
    if (a.shape().size() == 2 && b.shape().size() == 1 && a.cols() == b.size()) {
        const std::size_t m = a.rows(), n = a.cols();
        auto node = make_node("add", a.shape(), {a, b});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                node->values[i * n + j] = a.values()[i * n + j] + b.values()[j];
            }
        }
        node->backprop = [m, n](TensorImpl& self) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    self.parents[0]->grad[i * n + j] += self.grad[i * n + j];
                    self.parents[1]->grad[j] += self.grad[i * n + j];
                }
            }
        };
        return Tensor(node);
    }
    shape_error("add", a, b);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_finite("sub", a);
    check_finite("sub", b);
    if (a.shape() != b.shape()) shape_error("sub", a, b);
    auto node = make_node("sub", a.shape(), {a, b});
    for (std::size_t i = 0; i < a.size(); ++i) {
        node->values[i] = a.values()[i] - b.values()[i];
    }
    node->backprop = [](TensorImpl& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            self.parents[0]->grad[i] += self.grad[i];
            self.parents[1]->grad[i] -= self.grad[i];
        }
    };
    return Tensor(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_finite("mul", a);
    check_finite("mul", b);
    if (a.shape() != b.shape()) shape_error("mul", a, b);
    auto node = make_node("mul", a.shape(), {a, b});
    for (std::size_t i = 0; i < a.size(); ++i) {
        node->values[i] = a.values()[i] * b.values()[i];
    }
    node->backprop = [](TensorImpl& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            self.parents[0]->grad[i] += self.grad[i] * self.parents[1]->values[i];
            self.parents[1]->grad[i] += self.grad[i] * self.parents[0]->values[i];
        }
    };
    return Tensor(node);
}

Tensor scale(const Tensor& a, double c) {
    check_finite("scale", a);
    if (!std::isfinite(c)) throw NumericError("scale: non-finite factor");
    auto node = make_node("scale", a.shape(), {a});
    for (std::size_t i = 0; i < a.size(); ++i) {
        node->values[i] = a.values()[i] * c;
    }
    node->backprop = [c](TensorImpl& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            self.parents[0]->grad[i] += self.grad[i] * c;
        }
    };
    return Tensor(node);
}

Tensor softmax_rows(const Tensor& a) {
    check_finite("softmax_rows", a);
    if (a.shape().empty()) throw ShapeError("softmax_rows: scalar input");
    const std::size_t n = a.shape().back();
    const std::size_t rows = a.size() / n;
    auto node = make_node("softmax_rows", a.shape(), {a});
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.values().data() + r * n;
        double* y = node->values.data() + r * n;
        double mx = x[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            s += y[j];
        }
        for (std::size_t j = 0; j < n; ++j) y[j] /= s;
    }
    node->backprop = [rows, n](TensorImpl& self) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.values.data() + r * n;
            const double* dy = self.grad.data() + r * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
            for (std::size_t j = 0; j < n; ++j) {
                self.parents[0]->grad[r * n + j] += y[j] * (dy[j] - dot);
            }
        }
    };
    return Tensor(node);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    check_finite("layer_norm", x);
    check_finite("layer_norm", gain);
    check_finite("layer_norm", bias);
    const std::size_t n = x.shape().back();
    if (gain.size() != n || bias.size() != n) shape_error("layer_norm", x, gain);
    const std::size_t rows = x.size() / n;
    constexpr double kEps = 1e-12;
    auto node = make_node("layer_norm", x.shape(), {x, gain, bias});
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xi = x.values().data() + r * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += xi[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
        var /= static_cast<double>(n);
        const double inv_s = 1.0 / std::sqrt(var + kEps);
        for (std::size_t j = 0; j < n; ++j) {
            node->values[r * n + j] =
                (xi[j] - mu) * inv_s * gain.values()[j] + bias.values()[j];
        }
    }
    node->backprop = [rows, n](TensorImpl& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xi = px.values.data() + r * n;
            double mu = 0.0;
            for (std::size_t j = 0; j < n; ++j) mu += xi[j];
            mu /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
            var /= static_cast<double>(n);
            const double inv_s = 1.0 / std::sqrt(var + kEps);
            double mean_h = 0.0, mean_hx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double xhat = (xi[j] - mu) * inv_s;
                const double dy = self.grad[r * n + j];
                const double h = dy * pg.values[j];
                mean_h += h;
                mean_hx += h * xhat;
                pg.grad[j] += dy * xhat;
                pb.grad[j] += dy;
            }
            mean_h /= static_cast<double>(n);
            mean_hx /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
                const double xhat = (xi[j] - mu) * inv_s;
                const double h = self.grad[r * n + j] * pg.values[j];
                px.grad[r * n + j] += inv_s * (h - mean_h - xhat * mean_hx);
            }
        }
    };
    return Tensor(node);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids) {
    check_finite("embedding_lookup", table);
    if (table.shape().size() != 2) {
        throw ShapeError("embedding_lookup: table must be 2-D");
    }
    const std::size_t vocab = table.rows(), d = table.cols();
    for (auto id : ids) {
        if (id >= vocab) {
            throw ShapeError("embedding_lookup: id " + std::to_string(id) +
                             " out of range for vocab " + std::to_string(vocab));
        }
    }
    auto node = make_node("embedding_lookup", {ids.size(), d}, {table});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::copy_n(table.values().data() + ids[i] * d, d,
                    node->values.data() + i * d);
    }
    node->backprop = [ids, d](TensorImpl& self) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                self.parents[0]->grad[ids[i] * d + j] += self.grad[i * d + j];
            }
        }
    };
    return Tensor(node);
}

Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    std::size_t total = 0;
    for (const auto& p : parts) {
        check_finite("concat", p);
        if (p.shape().size() != 1) throw ShapeError("concat: inputs must be 1-D");
        total += p.size();
    }
    auto node = make_node("concat", {total}, parts);
    std::size_t off = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(off);
        std::copy_n(p.values().data(), p.size(), node->values.data() + off);
        off += p.size();
    }
    node->backprop = [offsets](TensorImpl& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto& p = *self.parents[k];
            for (std::size_t i = 0; i < p.values.size(); ++i) {
                p.grad[i] += self.grad[offsets[k] + i];
            }
        }
    };
    return Tensor(node);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t n = parts[0].cols();
    std::size_t total_rows = 0;
    for (const auto& p : parts) {
        check_finite("concat_rows", p);
        if (p.shape().size() != 2 || p.cols() != n) {
            throw ShapeError("concat_rows: column count mismatch");
        }
        total_rows += p.rows();
    }
    auto node = make_node("concat_rows", {total_rows, n}, parts);
    std::size_t off = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(off);
        std::copy_n(p.values().data(), p.size(), node->values.data() + off);
        off += p.size();
    }
    node->backprop = [offsets](TensorImpl& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto& p = *self.parents[k];
            for (std::size_t i = 0; i < p.values.size(); ++i) {
                p.grad[i] += self.grad[offsets[k] + i];
            }
        }
    };
    return Tensor(node);
}

Tensor mean(const Tensor& a) {
    check_finite("mean", a);
    if (a.size() == 0) throw ShapeError("mean: empty tensor");
    auto node = make_node("mean", {1}, {a});
    node->values[0] =
        std::accumulate(a.values().begin(), a.values().end(), 0.0) /
        static_cast<double>(a.size());
    node->backprop = [](TensorImpl& self) {
        const double g = self.grad[0] / static_cast<double>(self.parents[0]->values.size());
        for (auto& pg : self.parents[0]->grad) pg += g;
    };
    return Tensor(node);
}

Tensor sum(const Tensor& a) {
    check_finite("sum", a);
    auto node = make_node("sum", {1}, {a});
    node->values[0] = std::accumulate(a.values().begin(), a.values().end(), 0.0);
    node->backprop = [](TensorImpl& self) {
        for (auto& pg : self.parents[0]->grad) pg += self.grad[0];
    };
    return Tensor(node);
}

Tensor transpose(const Tensor& a) {
    check_finite("transpose", a);
    if (a.shape().size() != 2) throw ShapeError("transpose: tensor must be 2-D");
    const std::size_t m = a.rows(), n = a.cols();
    auto node = make_node("transpose", {n, m}, {a});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            node->values[j * m + i] = a.values()[i * n + j];
        }
    }
    node->backprop = [m, n](TensorImpl& self) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                self.parents[0]->grad[i * n + j] += self.grad[j * m + i];
            }
        }
    };
    return Tensor(node);
}

Tensor masked_fill(const Tensor& a, const std::vector<double>& mask, double fill) {
    check_finite("masked_fill", a);
    if (mask.size() != a.size()) {
        throw ShapeError("masked_fill: mask length " + std::to_string(mask.size()) +
                         " vs tensor " + shape_str(a.shape()));
    }
    auto node = make_node("masked_fill", a.shape(), {a});
    for (std::size_t i = 0; i < a.size(); ++i) {
        node->values[i] = mask[i] != 0.0 ? fill : a.values()[i];
    }
    node->backprop = [mask](TensorImpl& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (mask[i] == 0.0) self.parents[0]->grad[i] += self.grad[i];
        }
    };
    return Tensor(node);
}

Tensor relu(const Tensor& a) {
    check_finite("relu", a);
    auto node = make_node("relu", a.shape(), {a});
    for (std::size_t i = 0; i < a.size(); ++i) {
        node->values[i] = std::max(0.0, a.values()[i]);
    }
    node->backprop = [](TensorImpl& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (self.parents[0]->values[i] > 0.0) {
                self.parents[0]->grad[i] += self.grad[i];
            }
        }
    };
    return Tensor(node);
}

Tensor log_elem(const Tensor& a) {
    check_finite("log", a);
    auto node = make_node("log", a.shape(), {a});
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.values()[i] <= 0.0) {
            throw NumericError("log: non-positive input " +
                               std::to_string(a.values()[i]));
        }
        node->values[i] = std::log(a.values()[i]);
    }
    node->backprop = [](TensorImpl& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            self.parents[0]->grad[i] += self.grad[i] / self.parents[0]->values[i];
        }
    };
    return Tensor(node);
}

Tensor select_row(const Tensor& a, std::size_t row) {
    check_finite("select_row", a);
    if (a.shape().size() != 2 || row >= a.rows()) {
        throw ShapeError("select_row: row " + std::to_string(row) +
                         " out of range for " + shape_str(a.shape()));
    }
    const std::size_t n = a.cols();
    auto node = make_node("select_row", {n}, {a});
    std::copy_n(a.values().data() + row * n, n, node->values.data());
    node->backprop = [row, n](TensorImpl& self) {
        for (std::size_t j = 0; j < n; ++j) {
            self.parents[0]->grad[row * n + j] += self.grad[j];
        }
    };
    return Tensor(node);
}

Tensor pick(const Tensor& a, std::size_t index) {
    check_finite("pick", a);
    if (index >= a.size()) {
        throw ShapeError("pick: index " + std::to_string(index) +
                         " out of range for " + shape_str(a.shape()));
    }
    auto node = make_node("pick", {1}, {a});
    node->values[0] = a.values()[index];
    node->backprop = [index](TensorImpl& self) {
        self.parents[0]->grad[index] += self.grad[0];
    };
    return Tensor(node);
}

Tensor gather(const Tensor& a, const std::vector<std::size_t>& indices) {
    check_finite("gather", a);
    for (auto i : indices) {
        if (i >= a.size()) {
            throw ShapeError("gather: index " + std::to_string(i) +
                             " out of range for " + shape_str(a.shape()));
        }
    }
    auto node = make_node("gather", {indices.size()}, {a});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        node->values[k] = a.values()[indices[k]];
    }
    node->backprop = [indices](TensorImpl& self) {
        for (std::size_t k = 0; k < indices.size(); ++k) {
            self.parents[0]->grad[indices[k]] += self.grad[k];
        }
    };
    return Tensor(node);
}

Tensor renormalize(const Tensor& a) {
    check_finite("renormalize", a);
    double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
    if (s <= 0.0) throw NumericError("renormalize: non-positive mass");
    auto node = make_node("renormalize", a.shape(), {a});
    for (std::size_t i = 0; i < a.size(); ++i) {
        node->values[i] = a.values()[i] / s;
    }
    node->backprop = [s](TensorImpl& self) {
        double dot = 0.0;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            dot += self.grad[i] * self.values[i];
        }
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            self.parents[0]->grad[i] += (self.grad[i] - dot) / s;
        }
    };
    return Tensor(node);
}

Tensor cross_entropy_logits(const Tensor& logits, std::size_t label) {
    check_finite("cross_entropy", logits);
    if (logits.shape().size() != 1) {
        throw ShapeError("cross_entropy: logits must be 1-D");
    }
    if (label >= logits.size()) {
        throw DataError("cross_entropy: label " + std::to_string(label) +
                        " outside class range " + std::to_string(logits.size()));
    }
    const std::size_t n = logits.size();
    auto node = make_node("cross_entropy", {1}, {logits});
    double mx = logits.values()[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits.values()[j]);
    double lse = 0.0;
    for (std::size_t j = 0; j < n; ++j) lse += std::exp(logits.values()[j] - mx);
    lse = std::log(lse) + mx;
    node->values[0] = lse - logits.values()[label];
    node->backprop = [label, lse, n](TensorImpl& self) {
        for (std::size_t j = 0; j < n; ++j) {
            double p = std::exp(self.parents[0]->values[j] - lse);
            self.parents[0]->grad[j] +=
                self.grad[0] * (p - (j == label ? 1.0 : 0.0));
        }
    };
    return Tensor(node);
}

double gradient_check(const std::function<Tensor(const Tensor&)>& f,
                      const Tensor& x, double step) {
    if (step <= 0.0) throw NumericError("gradient_check: step must be positive");
    Tensor xc = x;
    Tensor y = f(xc);
    backward(y);
    std::vector<double> analytic(xc.grad().begin(), xc.grad().end());
    double max_err = 0.0;
    auto vals = xc.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + step;
        const double fp = f(xc).value();
        vals[i] = orig - step;
        const double fm = f(xc).value();
        vals[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("gradient_check: non-finite function value");
        }
        const double numeric = (fp - fm) / (2.0 * step);
        const double denom =
            std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
    }
    return max_err;
}

}  // namespace saloss
